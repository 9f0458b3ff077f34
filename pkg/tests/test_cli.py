from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from trade_design.cli import cli


def _summary(result) -> dict:
    assert result.exit_code == 0, result.output
    # older click runners mix log lines from stderr into stdout
    text = result.stdout
    document, _ = json.JSONDecoder().raw_decode(text[text.index("{\n") :])
    return document


def test_cli_version() -> None:
    result = CliRunner().invoke(cli, ["--version"])

    assert result.exit_code == 0
    assert "1.0.0" in result.output


def test_regions_with_gains(e2_file: Path, tmp_path: Path) -> None:
    svg = tmp_path / "e2.svg"
    csv = tmp_path / "e2.csv"

    summary = _summary(
        CliRunner().invoke(cli, ["regions", str(e2_file), "--svg", str(svg), "--csv", str(csv)])
    )

    assert summary["S"] == pytest.approx(0.75)
    assert summary["floors"] == pytest.approx([0.25, 0.25, 0.5])
    assert summary["floor_us_exact"] is True
    assert summary["floor_us_method"] == "affine"
    assert set(summary["regions"]) == {"triangle_all", "triangle_us", "triangle_fb"}
    assert "<svg" in svg.read_text()
    assert (tmp_path / "e2-triangle_fb.csv").read_text().startswith("pi_b,pi_s\n")
    assert len(summary["artifacts"]) == 4


def test_regions_with_negative_surplus(e3_file: Path, tmp_path: Path) -> None:
    csv = tmp_path / "e3.csv"

    summary = _summary(CliRunner().invoke(cli, ["regions", str(e3_file), "--csv", str(csv)]))

    assert summary["gains_from_trade"] is False
    assert summary["pi_hat_s"] == pytest.approx(0.5)
    assert summary["efficient_trade_profitable"] is True
    assert list(summary["regions"]) == ["negative_envelope"]
    assert csv.exists()


def test_regions_lambda_grid_option(e3_file: Path) -> None:
    summary = _summary(
        CliRunner().invoke(cli, ["regions", str(e3_file), "--lambda-grid", "1,2"])
    )

    assert summary["max_pi_b"] == pytest.approx(0.75)


def test_regions_missing_file(tmp_path: Path) -> None:
    result = CliRunner().invoke(cli, ["regions", str(tmp_path / "nope.yaml")])

    assert result.exit_code == 2
    assert "❌ Error" in result.output


def test_bad_settings_file(e2_file: Path, tmp_path: Path) -> None:
    config = tmp_path / "settings.toml"
    config.write_text("[trade-design]\nunknown = 1\n")

    result = CliRunner().invoke(cli, ["--config", str(config), "regions", str(e2_file)])

    assert result.exit_code == 2
    assert "unknown settings" in result.output


def test_icd_commands(e1_file: Path, e2_file: Path, tmp_path: Path) -> None:
    runner = CliRunner()
    out = tmp_path / "components.json"

    check = _summary(runner.invoke(cli, ["icd", "check", str(e1_file)]))
    decompose = _summary(runner.invoke(cli, ["icd", "decompose", str(e2_file), "--out", str(out)]))
    pstar = _summary(runner.invoke(cli, ["icd", "pstar", str(e2_file)]))
    binary = _summary(runner.invoke(cli, ["icd", "binary", str(e1_file)]))

    assert check["is_icd"] is True
    assert check["constant"] == pytest.approx(1.0)
    assert decompose["weighted_profit"] == pytest.approx(0.5)
    assert decompose["floor_fb"] == pytest.approx(0.5)
    assert json.loads(out.read_text())["kind"] == "icd_decomposition"
    assert pstar["p_star"] == pytest.approx(1.0, abs=1e-9)
    assert binary["method"] == "fallback"


def test_icd_check_with_belief(e2_file: Path) -> None:
    summary = _summary(
        CliRunner().invoke(cli, ["icd", "check", str(e2_file), "--belief", "0.6667,0.3333"])
    )

    assert summary["optimal_prices"]


def test_icd_pstar_writes_the_cdf(e2_file: Path, tmp_path: Path) -> None:
    cdf = tmp_path / "cdf.csv"

    _summary(CliRunner().invoke(cli, ["icd", "pstar", str(e2_file), "--cdf-csv", str(cdf)]))

    assert cdf.read_text().splitlines()[0] == "v,G"


def test_icd_pstar_rejects_bent_costs(bent_file: Path) -> None:
    result = CliRunner().invoke(cli, ["icd", "pstar", str(bent_file)])

    assert result.exit_code == 2
    assert "not affine" in result.output


def test_construct_any_verified(e1_file: Path, tmp_path: Path) -> None:
    result = CliRunner().invoke(
        cli,
        [
            "construct",
            "any",
            str(e1_file),
            "--target",
            "0.25,1.25",
            "--out-dir",
            str(tmp_path),
            "--verify",
        ],
    )

    summary = _summary(result)
    assert summary["payoffs"]["pi_b"] == pytest.approx(0.25)
    assert summary["payoffs"]["pi_s"] == pytest.approx(1.25)
    assert summary["verification"]["ok"] is True
    assert (tmp_path / "structure.json").exists()
    assert (tmp_path / "profile.json").exists()


def test_construct_outside_target_is_infeasible(e1_file: Path, tmp_path: Path) -> None:
    result = CliRunner().invoke(
        cli,
        ["construct", "any", str(e1_file), "--target", "1,1", "--out-dir", str(tmp_path)],
    )

    assert result.exit_code == 4
    assert "❌ Error" in result.output


def test_construct_needs_a_target(e1_file: Path, tmp_path: Path) -> None:
    result = CliRunner().invoke(cli, ["construct", "garble", str(e1_file), "--out-dir", str(tmp_path)])

    assert result.exit_code == 2
    assert "--target" in result.output


def test_construct_rejects_malformed_target(e1_file: Path) -> None:
    result = CliRunner().invoke(cli, ["construct", "any", str(e1_file), "--target", "0.25"])

    assert result.exit_code == 2


def test_construct_fb_summary(e2_file: Path, tmp_path: Path) -> None:
    summary = _summary(
        CliRunner().invoke(
            cli,
            ["construct", "fb", str(e2_file), "--beta", "1", "--out-dir", str(tmp_path), "--verify"],
        )
    )

    assert summary["payoffs"]["pi_b"] == pytest.approx(0.25)
    assert summary["payoffs"]["pi_s"] == pytest.approx(0.5)
    assert summary["verification"]["price_independent"] is True
    assert "fully_informed_buyer" in summary["classes"]


def test_construct_garble_reports_diagnostics(e1_file: Path, tmp_path: Path) -> None:
    summary = _summary(
        CliRunner().invoke(
            cli,
            [
                "construct",
                "garble",
                str(e1_file),
                "--target",
                "0.3,1.2",
                "--out-dir",
                str(tmp_path),
                "--verify",
            ],
        )
    )

    assert summary["pool_fraction"] == pytest.approx(0.25)
    assert summary["p_star"] == pytest.approx(1.2)


def test_construct_negative(e3_file: Path, tmp_path: Path) -> None:
    summary = _summary(
        CliRunner().invoke(
            cli,
            [
                "construct",
                "negative",
                str(e3_file),
                "--welfare-weight",
                "2",
                "--out-dir",
                str(tmp_path),
                "--verify",
            ],
        )
    )

    assert summary["payoffs"]["pi_b"] == pytest.approx(0.5)
    assert summary["payoffs"]["pi_s"] == pytest.approx(0.5)


def test_construct_discrete_writes_trembles(e1_file: Path, tmp_path: Path) -> None:
    summary = _summary(
        CliRunner().invoke(
            cli,
            [
                "construct",
                "discrete",
                str(e1_file),
                "--target",
                "0.25,1.25",
                "--out-dir",
                str(tmp_path),
                "--verify",
            ],
        )
    )

    assert summary["case"] == 2
    assert summary["verification"]["consistency"] is True
    assert (tmp_path / "trembles.json").exists()


def _construct(env_file: Path, out_dir: Path) -> None:
    result = CliRunner().invoke(
        cli,
        ["construct", "fb", str(env_file), "--beta", "0.5", "--out-dir", str(out_dir)],
    )
    assert result.exit_code == 0, result.output


def test_verify_round_trip(e2_file: Path, tmp_path: Path) -> None:
    _construct(e2_file, tmp_path)

    summary = _summary(
        CliRunner().invoke(
            cli,
            [
                "verify",
                str(e2_file),
                str(tmp_path / "structure.json"),
                str(tmp_path / "profile.json"),
                "--price-independent",
            ],
        )
    )

    assert summary["ok"] is True
    assert summary["price_independent"] is True
    assert summary["payoffs"]["pi_b"] == pytest.approx(0.125)


def test_verify_discrete_with_trembles(e1_file: Path, tmp_path: Path) -> None:
    runner = CliRunner()
    built = runner.invoke(
        cli,
        ["construct", "discrete", str(e1_file), "--target", "0.2,1.2", "--out-dir", str(tmp_path)],
    )
    assert built.exit_code == 0, built.output

    summary = _summary(
        runner.invoke(
            cli,
            [
                "verify",
                str(e1_file),
                str(tmp_path / "structure.json"),
                str(tmp_path / "profile.json"),
                "--trembles",
                str(tmp_path / "trembles.json"),
            ],
        )
    )

    assert summary["consistency"] is True
    assert [row["n"] for row in summary["consistency_trace"]] == [10, 100, 10_000]


def test_verify_corrupted_profile(e2_file: Path, tmp_path: Path) -> None:
    _construct(e2_file, tmp_path)
    profile_path = tmp_path / "profile.json"
    profile = json.loads(profile_path.read_text())
    profile["alpha"] = [[0.0 for _ in row] for row in profile["alpha"]]
    profile_path.write_text(json.dumps(profile))

    result = CliRunner().invoke(
        cli, ["verify", str(e2_file), str(tmp_path / "structure.json"), str(profile_path)]
    )

    assert result.exit_code == 3
    assert "buyer gap" in result.output


def test_verify_mismatched_support(e2_file: Path, bent_file: Path, tmp_path: Path) -> None:
    _construct(e2_file, tmp_path)

    result = CliRunner().invoke(
        cli,
        [
            "verify",
            str(bent_file),
            str(tmp_path / "structure.json"),
            str(tmp_path / "profile.json"),
        ],
    )

    assert result.exit_code == 2
    assert "❌ Error" in result.output


def test_verify_unreadable_document(e2_file: Path, tmp_path: Path) -> None:
    result = CliRunner().invoke(
        cli,
        ["verify", str(e2_file), str(tmp_path / "missing.json"), str(tmp_path / "p.json")],
    )

    assert result.exit_code == 2


def test_reduce_joint_document(tmp_path: Path) -> None:
    joint = tmp_path / "joint.yaml"
    joint.write_text("joint:\n  - [1, 0.0, 0.25]\n  - [1, 1.0, 0.25]\n  - [2, 1.0, 0.5]\n")
    out = tmp_path / "env.json"

    summary = _summary(CliRunner().invoke(cli, ["reduce", str(joint), "--out", str(out)]))

    assert summary["values"] == [1.0, 2.0]
    assert summary["costs"] == pytest.approx([0.5, 1.0])
    assert summary["artifacts"] == [str(out)]
    assert json.loads(out.read_text())["kind"] == "environment"


def test_reduce_missing_file(tmp_path: Path) -> None:
    result = CliRunner().invoke(cli, ["reduce", str(tmp_path / "joint.yaml")])

    assert result.exit_code == 2
