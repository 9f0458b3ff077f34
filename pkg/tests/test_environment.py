from __future__ import annotations

from pathlib import Path

import pytest

from trade_design.environment import (
    EnvironmentDocumentError,
    affine_cost_fit,
    discretize_density,
    environment_from_mapping,
    load_environment,
    load_environment_file,
    load_joint_document,
    reduce_bidimensional,
    serialize_environment,
    surplus,
)
from trade_design.models import Environment


def test_load_environment_yaml_and_json() -> None:
    from_yaml = load_environment("values: [1, 2]\nprobs: [0.5, 0.5]\ncosts: [0.5, 1]\n")
    from_json = load_environment('{"values": [1, 2], "probs": [0.5, 0.5], "costs": [0.5, 1]}')

    assert from_yaml.values == from_json.values == (1.0, 2.0)
    assert from_yaml.gains_from_trade
    assert surplus(from_yaml) == pytest.approx(0.75, abs=1e-12)
    assert from_yaml.mean_value == pytest.approx(1.5)
    assert from_yaml.mean_cost == pytest.approx(0.75)


def test_gains_from_trade_flag(env_e3: Environment) -> None:
    assert not env_e3.gains_from_trade
    assert surplus(env_e3) == pytest.approx(0.0)


@pytest.mark.parametrize(
    "document, message",
    [
        ("values: [1, 2]\nprobs: [0.5, 0.5]\n", "missing keys"),
        ("values: [2, 1]\nprobs: [0.5, 0.5]\ncosts: [0, 0]\n", "increasing"),
        ("values: [1, 2]\nprobs: [0.5, 0.6]\ncosts: [0, 0]\n", "sum to"),
        ("values: [1, 2]\nprobs: [1.0, 0.0]\ncosts: [0, 0]\n", "positive"),
        ("values: [1, 2]\nprobs: [0.5, 0.5]\ncosts: [0]\n", "differ in length"),
        ("values: [1, x]\nprobs: [0.5, 0.5]\ncosts: [0, 0]\n", "non-number"),
        ("- just a list\n", "mapping"),
        ("values: [1, 2\n", "unreadable"),
    ],
)
def test_malformed_documents_are_rejected(document: str, message: str) -> None:
    with pytest.raises(EnvironmentDocumentError, match=message):
        load_environment(document)


def test_close_support_points_are_merged() -> None:
    env = environment_from_mapping(
        {"values": [1.0, 1.0 + 1e-14, 2.0], "probs": [0.25, 0.25, 0.5], "costs": [0, 1, 0]}
    )

    assert env.n == 2
    assert env.probs[0] == pytest.approx(0.5)
    assert env.costs[0] == pytest.approx(0.5)


def test_load_environment_file_uses_stem(tmp_path: Path) -> None:
    path = tmp_path / "market.yaml"
    path.write_text("values: [1, 2]\nprobs: [0.5, 0.5]\ncosts: [0, 0]\n")

    env = load_environment_file(path)

    assert env.name == "market"
    with pytest.raises(EnvironmentDocumentError, match="cannot read"):
        load_environment_file(tmp_path / "missing.yaml")


def test_serialize_environment_round_trips(env_e2: Environment) -> None:
    data = serialize_environment(env_e2)

    again = environment_from_mapping(data)

    assert data["name"] == "e2"
    assert again == env_e2


def test_reduce_bidimensional_averages_costs() -> None:
    env = reduce_bidimensional(
        [(2.0, 1.0, 0.25), (1.0, 0.0, 0.5), (2.0, 3.0, 0.25), (5.0, 0.0, 0.0)]
    )

    assert env.values == (1.0, 2.0)
    assert env.probs == pytest.approx((0.5, 0.5))
    assert env.costs == pytest.approx((0.0, 2.0))


def test_reduce_bidimensional_rejects_bad_rows() -> None:
    with pytest.raises(EnvironmentDocumentError, match="negative"):
        reduce_bidimensional([(1.0, 0.0, -0.5), (2.0, 0.0, 1.5)])
    with pytest.raises(EnvironmentDocumentError, match="no mass"):
        reduce_bidimensional([(1.0, 0.0, 0.0)])
    with pytest.raises(EnvironmentDocumentError, match="need"):
        reduce_bidimensional([(1.0, 0.0)])


def test_load_joint_document() -> None:
    env = load_joint_document("joint:\n  - [1, 0.5, 0.5]\n  - [2, 1, 0.5]\nname: pair\n")

    assert env.name == "pair"
    assert env.costs == (0.5, 1.0)
    with pytest.raises(EnvironmentDocumentError, match="joint"):
        load_joint_document("values: [1]\n")


def test_affine_cost_fit(env_e2: Environment, env_non_affine: Environment) -> None:
    assert affine_cost_fit(env_e2) == pytest.approx((0.5, 0.0))
    assert affine_cost_fit(env_non_affine) is None
    single = Environment((3.0,), (1.0,), (1.0,))
    assert affine_cost_fit(single) == (0.0, 1.0)


def test_discretize_uniform_density() -> None:
    env = discretize_density([(0.0, 1.0), (1.0, 1.0)], 200, cost_slope=0.5, cost_intercept=0.1)

    assert env.n == 200
    assert env.v_low == 0.0 and env.v_high == 1.0
    assert env.mean_value == pytest.approx(0.5, abs=1e-12)
    assert affine_cost_fit(env) == pytest.approx((0.5, 0.1))


def test_discretize_density_drops_zero_density_points() -> None:
    env = discretize_density([(0.0, 0.0), (1.0, 2.0)], 5)

    assert env.n == 4
    assert env.v_low == 0.25
    with pytest.raises(ValueError):
        discretize_density([(0.0, 0.0), (1.0, 0.0)], 5)


def test_reduce_bidimensional_preserves_surplus() -> None:
    rows = [
        (1.0, 0.2, 0.1),
        (1.0, 0.9, 0.15),
        (2.0, 0.5, 0.2),
        (2.0, 1.9, 0.05),
        (2.0, 1.0, 0.1),
        (3.5, 3.0, 0.4),
    ]

    env = reduce_bidimensional(rows)

    direct = sum(p * (v - c) for v, c, p in rows)
    assert env.values == (1.0, 2.0, 3.5)
    assert surplus(env) == pytest.approx(direct, abs=1e-12)
