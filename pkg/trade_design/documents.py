"""Structure, profile and tremble documents - parse what the JSON exporter writes."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from .models import InformationStructure, StrategyProfile, TrembleSchedule


class DocumentError(ValueError):
    """Raised when a structure, profile or tremble document is malformed."""


def load_document(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML or JSON document into a mapping."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as e:
        raise DocumentError(f"cannot read {path}: {e}") from e
    except yaml.YAMLError as e:
        raise DocumentError(f"unreadable document {path}: {e}") from e
    if not isinstance(data, dict):
        raise DocumentError(f"{path} must contain a mapping")
    return data


def _labels(data: Dict[str, Any], key: str) -> List[str]:
    raw = data.get(key)
    if not isinstance(raw, list) or not raw:
        raise DocumentError(f"'{key}' must be a nonempty list of labels")
    return [str(x) for x in raw]


def _array(data: Dict[str, Any], key: str, ndim: int) -> np.ndarray:
    if key not in data:
        raise DocumentError(f"missing '{key}'")
    try:
        arr = np.array(data[key], dtype=float)
    except (TypeError, ValueError) as e:
        raise DocumentError(f"'{key}' is not numeric: {e}") from e
    if arr.ndim != ndim:
        raise DocumentError(f"'{key}' must be {ndim}-dimensional, got {arr.ndim}")
    return arr


def parse_structure(data: Dict[str, Any]) -> InformationStructure:
    """Build a structure from ``{seller_signals, buyer_signals, n_values, joint}``.

    ``joint`` lists sparse entries ``[seller_label, buyer_label, value_index, prob]``.
    """
    seller = _labels(data, "seller_signals")
    buyer = _labels(data, "buyer_signals")
    try:
        n = int(data["n_values"])
    except (KeyError, TypeError, ValueError) as e:
        raise DocumentError("'n_values' must be an integer") from e
    entries = data.get("joint")
    if not isinstance(entries, list):
        raise DocumentError("'joint' must be a list of entries")

    s_index = {label: i for i, label in enumerate(seller)}
    b_index = {label: i for i, label in enumerate(buyer)}
    joint = np.zeros((len(seller), len(buyer), n))
    for entry in entries:
        try:
            s, b, v, p = entry
            joint[s_index[str(s)], b_index[str(b)], int(v)] += float(p)
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise DocumentError(f"bad joint entry {entry!r}") from e
    try:
        return InformationStructure(tuple(seller), tuple(buyer), joint)
    except ValueError as e:
        raise DocumentError(str(e)) from e


def parse_profile(
    data: Dict[str, Any], structure: Optional[InformationStructure] = None
) -> StrategyProfile:
    """Build a profile from ``{grid, sigma, alpha, beliefs}``.

    ``sigma`` has one row per seller signal, ``alpha`` one row per price and
    ``beliefs`` is indexed ``[price][buyer signal][value]``.
    """
    grid = _array(data, "grid", 1)
    sigma = _array(data, "sigma", 2)
    alpha = _array(data, "alpha", 2)
    beliefs = _array(data, "beliefs", 3)
    if structure is not None:
        expected = (len(structure.seller_signals), len(structure.buyer_signals))
        if sigma.shape[0] != expected[0] or alpha.shape[1] != expected[1]:
            raise DocumentError(
                f"profile is shaped for {sigma.shape[0]} seller and {alpha.shape[1]} "
                f"buyer signals, structure has {expected[0]} and {expected[1]}"
            )
        if beliefs.shape[2] != structure.n_values:
            raise DocumentError("beliefs do not match the structure's value support")
    try:
        return StrategyProfile(grid, sigma, alpha, beliefs)
    except ValueError as e:
        raise DocumentError(str(e)) from e


def parse_trembles(data: Dict[str, Any]) -> TrembleSchedule:
    """Build a tremble schedule from ``{exponents: [...]}``."""
    raw = data.get("exponents")
    if not isinstance(raw, list) or not raw:
        raise DocumentError("'exponents' must be a nonempty list")
    try:
        return TrembleSchedule(tuple(float(e) for e in raw))
    except (TypeError, ValueError) as e:
        raise DocumentError(str(e)) from e
