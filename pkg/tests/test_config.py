from __future__ import annotations

from pathlib import Path

import pytest

from trade_design.config import (
    Settings,
    SettingsError,
    _load_toml,
    load_settings,
    settings_from_mapping,
)
from trade_design.models import SearchConfig


def test_defaults_without_a_file(tmp_path: Path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)

    settings = load_settings()

    assert settings == Settings()
    assert settings.tolerance == 1e-9
    assert settings.n_list == (10, 100, 10_000)


def test_settings_file_in_working_directory(tmp_path: Path, monkeypatch) -> None:
    (tmp_path / "trade-design.toml").write_text(
        '[trade-design]\ntolerance = 1e-7\nlambda_grid = [1, 3, 9]\n'
        "\n[trade-design.search]\nsegments = 2\nparallel = false\nprice_grid = [1, 2]\n"
    )
    monkeypatch.chdir(tmp_path)

    settings = load_settings()

    assert settings.tolerance == 1e-7
    assert settings.lambda_grid == (1.0, 3.0, 9.0)
    assert settings.search == SearchConfig(segments=2, parallel=False, price_grid=(1.0, 2.0))


def test_explicit_path_without_section(tmp_path: Path) -> None:
    path = tmp_path / "other.toml"
    path.write_text("[unrelated]\nkey = 1\n")

    assert load_settings(path) == Settings()


@pytest.mark.parametrize(
    "data, message",
    [
        ({"tolerence": 1e-9}, "unknown settings: tolerence"),
        ({"search": {"segmants": 2}}, "unknown search keys"),
        ({"search": 3}, "must be a table"),
        ({"epsilon": "wide"}, "bad setting value"),
    ],
)
def test_bad_settings_are_rejected(data, message: str) -> None:
    with pytest.raises(SettingsError, match=message):
        settings_from_mapping(data)


def test_unreadable_files(tmp_path: Path) -> None:
    broken = tmp_path / "broken.toml"
    broken.write_text("[trade-design\n")

    with pytest.raises(SettingsError, match="invalid TOML"):
        load_settings(broken)
    with pytest.raises(SettingsError, match="cannot read"):
        load_settings(tmp_path / "missing.toml")


def test_pytest_runs_with_package_coverage() -> None:
    pyproject = Path(__file__).resolve().parent.parent / "pyproject.toml"

    data = _load_toml(pyproject)

    assert "--cov=trade_design" in data["tool"]["pytest"]["ini_options"]["addopts"]
