from __future__ import annotations

import numpy as np
import pytest

from trade_design.equilibrium import (
    AFFINE_RESTART,
    SearchConfigError,
    affine_partition_witness,
    best_response_profile,
    buyer_best_response,
    default_price_grid,
    martingale_coupling,
    min_seller_profit_search,
    payoffs,
    segmented_structure,
    seller_best_response_value,
    seller_profit_table,
    unique_prices,
    uniqueness_sweep,
    verify_price_independent,
    verify_sequential,
    verify_wpbe,
)
from trade_design.geometry import contains, region_all
from trade_design.models import (
    FULLY_INFORMED_BUYER,
    UNINFORMED_SELLER,
    Environment,
    SearchConfig,
    StrategyProfile,
    TrembleSchedule,
)
from trade_design.structures import (
    construct_any,
    full_information,
    full_revelation_to_buyer,
    no_information,
)


def _replace(profile: StrategyProfile, **changes) -> StrategyProfile:
    fields = {
        "price_grid": profile.price_grid,
        "seller_strategy": profile.seller_strategy,
        "buyer_strategy": profile.buyer_strategy,
        "beliefs": profile.beliefs,
    }
    fields.update(changes)
    return StrategyProfile(**fields)


def test_default_price_grid_adds_sentinels(env_e2: Environment) -> None:
    grid = default_price_grid(env_e2)

    assert grid == pytest.approx([0.999, 1.0, 2.0, 2.001])


def test_default_price_grid_on_a_point_mass() -> None:
    env = Environment((2.0,), (1.0,), (0.5,))

    assert default_price_grid(env) == pytest.approx([1.998, 2.0, 2.002])


def test_unique_prices_merges_near_duplicates() -> None:
    merged = unique_prices([2.0, 1.0, 1.0 + 1e-15, 3.0])

    assert merged.tolist() == [1.0, 2.0, 3.0]


@pytest.mark.parametrize(
    "builder, expected",
    [
        (no_information, (0.0, 0.75)),
        (full_revelation_to_buyer, (0.0, 0.5)),
        (full_information, (0.0, 0.75)),
    ],
)
def test_canonical_payoffs_e2(env_e2: Environment, builder, expected) -> None:
    structure, profile = builder(env_e2)

    assert payoffs(env_e2, structure, profile).as_tuple() == pytest.approx(expected)
    assert verify_wpbe(env_e2, structure, profile).ok


def test_full_revelation_price_choice_e1(env_e1: Environment) -> None:
    low = full_revelation_to_buyer(env_e1)
    high = full_revelation_to_buyer(env_e1, price_choice="highest")

    assert payoffs(env_e1, *low).as_tuple() == pytest.approx((0.5, 1.0))
    assert payoffs(env_e1, *high).as_tuple() == pytest.approx((0.0, 1.0))


def test_all_reject_profile_pays_nothing(env_e2: Environment) -> None:
    structure, profile = no_information(env_e2)
    rejecting = _replace(profile, buyer_strategy=np.zeros_like(profile.buyer_strategy))

    assert payoffs(env_e2, structure, rejecting).as_tuple() == (0.0, 0.0)


def test_verified_payoffs_lie_in_the_triangle(
    env_e1: Environment, env_e2: Environment, env_non_affine: Environment
) -> None:
    for env in (env_e1, env_e2, env_non_affine):
        region = region_all(env)
        for builder in (no_information, full_revelation_to_buyer, full_information):
            structure, profile = builder(env)
            assert verify_wpbe(env, structure, profile).ok
            assert contains(region, payoffs(env, structure, profile), tol=1e-9)


def test_buyer_best_response_e2_full_revelation(env_e2: Environment) -> None:
    structure, _ = full_revelation_to_buyer(env_e2)
    grid = np.array([0.5, 1.0, 1.5])

    accept = buyer_best_response(env_e2, structure, grid)
    reject = buyer_best_response(env_e2, structure, grid, tie="reject")

    assert accept.tolist() == [[1.0, 1.0], [1.0, 1.0], [0.0, 1.0]]
    assert reject.tolist() == [[1.0, 1.0], [0.0, 1.0], [0.0, 1.0]]
    with pytest.raises(ValueError):
        buyer_best_response(env_e2, structure, grid, tie="maybe")


def test_seller_best_response_value(env_e2: Environment) -> None:
    structure, profile = no_information(env_e2)
    grid = profile.price_grid

    best = seller_best_response_value(env_e2, structure, profile.buyer_strategy, grid)
    nothing = seller_best_response_value(
        env_e2, structure, np.zeros_like(profile.buyer_strategy), grid
    )
    single = seller_best_response_value(
        env_e2, structure, np.ones((1, 1)), np.array([1.0])
    )

    assert best == pytest.approx([0.75])
    assert nothing == pytest.approx([0.0])
    assert single == pytest.approx([0.25])


def test_verify_wpbe_flags_a_rejected_bargain(env_e2: Environment) -> None:
    structure, profile = no_information(env_e2)
    alpha = np.array(profile.buyer_strategy)
    alpha[profile.price_index(1.0)] = 0.0

    report = verify_wpbe(env_e2, structure, _replace(profile, buyer_strategy=alpha))

    assert not report.buyer_optimal
    assert report.buyer_gap == pytest.approx(0.5)
    assert report.buyer_violation == (1.0, "t0", pytest.approx(0.5))
    assert report.seller_optimal
    assert not report.ok


def test_verify_wpbe_flags_a_lazy_seller(env_e2: Environment) -> None:
    structure, profile = no_information(env_e2)
    sigma = np.zeros_like(profile.seller_strategy)
    sigma[0, profile.price_index(1.0)] = 1.0

    report = verify_wpbe(env_e2, structure, _replace(profile, seller_strategy=sigma))

    assert not report.seller_optimal
    assert report.seller_gaps["t0"] == pytest.approx(0.5)


def test_verify_wpbe_flags_a_tampered_belief(env_e2: Environment) -> None:
    structure, profile = no_information(env_e2)
    beliefs = np.array(profile.beliefs)
    beliefs[profile.price_index(1.5), 0] = [1.0, 0.0]

    report = verify_wpbe(env_e2, structure, _replace(profile, beliefs=beliefs))

    assert not report.bayes_on_path
    assert report.bayes_gap == pytest.approx(0.5)
    assert report.bayes_violation == (1.5, "t0")


def test_verify_wpbe_checks_dimensions(env_e2: Environment, env_non_affine) -> None:
    structure, profile = no_information(env_e2)

    with pytest.raises(ValueError, match="values"):
        verify_wpbe(env_non_affine, structure, profile)


def test_price_independence(env_e1: Environment) -> None:
    structure, profile = full_revelation_to_buyer(env_e1)
    assert verify_price_independent(structure, profile) == (True, 0.0)

    structure, profile = construct_any(env_e1, (0.25, 1.25))
    ok, gap = verify_price_independent(structure, profile)
    assert not ok
    assert gap == pytest.approx(0.5)


def test_sequential_check_with_uninformative_trembles(env_e2: Environment) -> None:
    structure, profile = no_information(env_e2)

    report = verify_sequential(env_e2, structure, profile, TrembleSchedule((1.0,)))

    assert report.consistency
    assert [n for n, _ in report.consistency_trace] == [10, 100, 10_000]
    assert all(d == pytest.approx(0.0, abs=1e-12) for _, d in report.consistency_trace)


def test_sequential_check_rejects_skeptical_beliefs(env_e1: Environment) -> None:
    structure, profile = construct_any(env_e1, (0.25, 1.25))

    report = verify_sequential(env_e1, structure, profile, TrembleSchedule((1.0,)))

    assert report.buyer_optimal and report.seller_optimal and report.bayes_on_path
    assert report.consistency is False
    assert not report.ok


def test_uniqueness_sweep_needs_uninformed_seller(env_e2: Environment) -> None:
    structure, profile = full_information(env_e2)

    with pytest.raises(ValueError, match="uninformed"):
        uniqueness_sweep(env_e2, structure, profile, 1.0)


def test_uniqueness_sweep_full_revelation(env_e2: Environment) -> None:
    structure, profile = full_revelation_to_buyer(env_e2)

    sweep = uniqueness_sweep(env_e2, structure, profile, 2.0)

    assert sweep["max_above"] == pytest.approx(0.0)
    assert sweep["max_below"] == pytest.approx(0.25)
    assert sweep["accept_below"] >= sweep["reject_below"]


def test_segmented_structure_drops_empty_segments(env_e2: Environment) -> None:
    structure = segmented_structure(env_e2, np.array([[0.5, 0.0], [0.0, 0.0], [0.0, 0.5]]))

    assert structure.buyer_signals == ("m0", "m1")
    assert UNINFORMED_SELLER in structure.class_tags
    assert FULLY_INFORMED_BUYER in structure.class_tags


def test_search_brackets_the_floor(env_e2: Environment) -> None:
    config = SearchConfig(segments=3, restarts=2, bisection_steps=8, parallel=False)

    result = min_seller_profit_search(env_e2, config)

    assert 0.25 - 1e-9 <= result.upper_bound <= 0.251
    assert verify_wpbe(env_e2, result.structure, result.profile).ok
    assert UNINFORMED_SELLER in result.structure.class_tags


def test_search_is_deterministic_across_workers(env_non_affine: Environment) -> None:
    serial = SearchConfig(segments=3, restarts=3, bisection_steps=16, parallel=False)
    threaded = SearchConfig(segments=3, restarts=3, bisection_steps=16, parallel=True)

    first = min_seller_profit_search(env_non_affine, serial)
    second = min_seller_profit_search(env_non_affine, threaded)

    assert first.upper_bound == second.upper_bound
    assert first.restart == second.restart


def test_search_on_e1_matches_the_guarantee(env_e1: Environment, cheap_search) -> None:
    result = min_seller_profit_search(env_e1, cheap_search)

    assert result.upper_bound == pytest.approx(1.0)


def test_search_rejects_bad_settings(env_e2: Environment, env_e3: Environment) -> None:
    with pytest.raises(SearchConfigError):
        min_seller_profit_search(env_e2, SearchConfig(segments=0))
    with pytest.raises(ValueError, match="gains from trade"):
        min_seller_profit_search(env_e3)


def test_search_beats_full_revelation_on_bent_costs(env_non_affine: Environment) -> None:
    config = SearchConfig(segments=3, restarts=1, bisection_steps=8, parallel=False)

    result = min_seller_profit_search(env_non_affine, config)

    # pooling a little of v_1 with v_3 at mean 7/3 already gets below 0.78
    assert result.restart >= 0
    assert 0.36 - 1e-9 <= result.upper_bound < 0.78
    assert verify_wpbe(env_non_affine, result.structure, result.profile).ok
    assert UNINFORMED_SELLER in result.structure.class_tags


def test_search_refinement_never_hurts(env_non_affine: Environment) -> None:
    coarse = SearchConfig(segments=2, restarts=1, bisection_steps=0, parallel=False)
    fine = SearchConfig(segments=2, restarts=1, bisection_steps=6, parallel=False)

    first = min_seller_profit_search(env_non_affine, coarse)
    second = min_seller_profit_search(env_non_affine, fine)

    assert second.upper_bound <= first.upper_bound + 1e-7


def test_search_honours_a_price_grid(env_non_affine: Environment) -> None:
    config = SearchConfig(
        segments=2, restarts=1, bisection_steps=0, parallel=False, price_grid=(1.5, 2.5)
    )

    result = min_seller_profit_search(env_non_affine, config)

    assert verify_wpbe(env_non_affine, result.structure, result.profile).ok
    live = result.structure.buyer_marginal > 1e-6
    means = (result.structure.buyer_posteriors() @ env_non_affine.value_array)[live]
    allowed = [1.0, 1.5, 2.0, 2.5, 3.0]
    assert all(min(abs(m - a) for a in allowed) < 1e-6 for m in means)


def test_affine_partition_witness_e2(env_e2: Environment) -> None:
    witness = affine_partition_witness(env_e2, gap=1e-3)

    assert witness is not None
    assert witness.restart == AFFINE_RESTART
    assert 0.25 - 1e-9 <= witness.upper_bound <= 0.251 + 1e-9
    assert verify_wpbe(env_e2, witness.structure, witness.profile).ok
    assert UNINFORMED_SELLER in witness.structure.class_tags


def test_affine_partition_witness_needs_affine_costs(env_non_affine: Environment) -> None:
    assert affine_partition_witness(env_non_affine) is None


def test_martingale_coupling_splits_the_prior(env_e2: Environment) -> None:
    masses = martingale_coupling(env_e2, np.array([1.375, 2.0]), np.array([0.8, 0.2]))

    assert masses is not None
    assert masses.sum(axis=0) == pytest.approx([0.5, 0.5], abs=1e-9)
    assert masses[1] == pytest.approx([0.0, 0.2], abs=1e-9)
    assert martingale_coupling(env_e2, np.array([0.5, 2.5]), np.array([0.5, 0.5])) is None


@pytest.mark.parametrize("builder", [full_information, full_revelation_to_buyer, no_information])
def test_best_response_profile_is_a_fixed_point(env_non_affine: Environment, builder) -> None:
    structure, profile = builder(env_non_affine)
    grid = profile.price_grid

    again = best_response_profile(env_non_affine, structure, grid=grid)

    alpha = buyer_best_response(env_non_affine, structure, grid, tie="accept")
    assert np.array_equal(profile.buyer_strategy, alpha)
    assert np.array_equal(again.seller_strategy, profile.seller_strategy)
    best = seller_best_response_value(env_non_affine, structure, alpha, grid)
    profits = seller_profit_table(env_non_affine, structure, alpha, grid)
    realized = (profile.seller_strategy * profits).sum(axis=1)
    assert realized == pytest.approx(best, abs=1e-12)
    assert verify_wpbe(env_non_affine, structure, profile).ok
