"""Environment ingestion - load, validate and reduce trading environments."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .models import Environment

logger = logging.getLogger(__name__)

MERGE_TOLERANCE = 1e-12


class EnvironmentDocumentError(ValueError):
    """Raised when an environment document is malformed or violates invariants."""


def _number_list(data: Dict[str, Any], key: str) -> List[float]:
    raw = data.get(key)
    if not isinstance(raw, (list, tuple)):
        raise EnvironmentDocumentError(f"'{key}' must be a list of numbers")
    out = []
    for item in raw:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise EnvironmentDocumentError(f"'{key}' contains a non-number: {item!r}")
        out.append(float(item))
    return out


def _merge_close(
    values: Sequence[float], probs: Sequence[float], costs: Sequence[float]
) -> Tuple[List[float], List[float], List[float]]:
    """Merge support points closer than MERGE_TOLERANCE.

    Probabilities add up and costs become probability-weighted averages.
    """
    merged_v: List[float] = []
    merged_p: List[float] = []
    merged_c: List[float] = []
    for v, p, c in zip(values, probs, costs):
        if merged_v and abs(v - merged_v[-1]) <= MERGE_TOLERANCE:
            total = merged_p[-1] + p
            if total > 0:
                merged_c[-1] = (merged_p[-1] * merged_c[-1] + p * c) / total
            merged_p[-1] = total
            logger.debug("merged support point %r into %r", v, merged_v[-1])
            continue
        merged_v.append(v)
        merged_p.append(p)
        merged_c.append(c)
    return merged_v, merged_p, merged_c


def environment_from_mapping(data: Any, name: str = "") -> Environment:
    """Build an environment from a parsed ``{values, probs, costs}`` mapping.

    Args:
        data: Parsed document.
        name: Fallback name when the document has none.

    Returns:
        The validated environment.

    Raises:
        EnvironmentDocumentError: If the document breaks any environment invariant.
    """
    if not isinstance(data, dict):
        raise EnvironmentDocumentError("environment document must be a mapping")
    missing = [key for key in ("values", "probs", "costs") if key not in data]
    if missing:
        raise EnvironmentDocumentError(f"missing keys: {', '.join(missing)}")

    values = _number_list(data, "values")
    probs = _number_list(data, "probs")
    costs = _number_list(data, "costs")
    if not (len(values) == len(probs) == len(costs)):
        raise EnvironmentDocumentError(
            f"values, probs and costs differ in length "
            f"({len(values)}, {len(probs)}, {len(costs)})"
        )
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-9:
        raise EnvironmentDocumentError(f"probabilities sum to {total!r}, expected 1")

    values, probs, costs = _merge_close(values, probs, costs)
    label = data.get("name", name)
    try:
        return Environment(tuple(values), tuple(probs), tuple(costs), str(label or ""))
    except ValueError as e:
        raise EnvironmentDocumentError(str(e)) from e


def load_environment(text: str, name: str = "") -> Environment:
    """Parse a YAML (or JSON) environment document.

    Example:
        ``{values: [1, 2], probs: [0.5, 0.5], costs: [0.5, 1]}``
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise EnvironmentDocumentError(f"unreadable environment document: {e}") from e
    return environment_from_mapping(data, name=name)


def load_environment_file(path: Union[str, Path]) -> Environment:
    """Load an environment document from disk."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise EnvironmentDocumentError(f"cannot read {path}: {e}") from e
    return load_environment(text, name=path.stem)


def reduce_bidimensional(
    rows: Iterable[Sequence[float]], name: str = ""
) -> Environment:
    """Collapse a joint law over (value, cost) into an environment.

    Each row is ``(v, c, prob)``; the cost of a value becomes ``E[c | v]``.
    Zero-probability rows are dropped.
    """
    table = []
    for row in rows:
        if len(row) != 3:
            raise EnvironmentDocumentError(f"joint rows need (v, c, prob): {row!r}")
        v, c, p = (float(x) for x in row)
        if not all(math.isfinite(x) for x in (v, c, p)):
            raise EnvironmentDocumentError("joint entries must be finite")
        if p < 0:
            raise EnvironmentDocumentError(f"negative probability in row {row!r}")
        if p > 0:
            table.append((v, c, p))
    if not table:
        raise EnvironmentDocumentError("joint distribution has no mass")

    total = math.fsum(p for _, _, p in table)
    if abs(total - 1.0) > 1e-9:
        raise EnvironmentDocumentError(f"probabilities sum to {total!r}, expected 1")

    table.sort(key=lambda r: r[0])
    values, probs, costs = _merge_close(
        [r[0] for r in table], [r[2] for r in table], [r[1] for r in table]
    )
    try:
        return Environment(tuple(values), tuple(probs), tuple(costs), name)
    except ValueError as e:
        raise EnvironmentDocumentError(str(e)) from e


def load_joint_document(text: str, name: str = "") -> Environment:
    """Parse a ``{joint: [[v, c, prob], ...]}`` document and reduce it."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise EnvironmentDocumentError(f"unreadable joint document: {e}") from e
    if not isinstance(data, dict) or not isinstance(data.get("joint"), list):
        raise EnvironmentDocumentError("joint document needs a 'joint' list")
    return reduce_bidimensional(data["joint"], name=str(data.get("name", name) or ""))


def serialize_environment(env: Environment) -> Dict[str, Any]:
    """Render an environment as a plain mapping that ``load_environment`` accepts."""
    data: Dict[str, Any] = {
        "values": list(env.values),
        "probs": list(env.probs),
        "costs": list(env.costs),
    }
    if env.name:
        data["name"] = env.name
    return data


def surplus(env: Environment) -> float:
    """Expected gains from trade ``E[v - c(v)]``."""
    return float(
        math.fsum(p * (v - c) for v, p, c in zip(env.values, env.probs, env.costs))
    )


def discretize_density(
    points: Sequence[Tuple[float, float]],
    n_points: int,
    cost_slope: float = 0.0,
    cost_intercept: float = 0.0,
    name: str = "",
) -> Environment:
    """Discretize a piecewise-linear density onto an even grid.

    Args:
        points: ``(v, density)`` knots of the density.
        n_points: Grid size.
        cost_slope: Slope of the affine cost attached to every grid value.
        cost_intercept: Intercept of that cost.
        name: Environment name.

    Returns:
        Environment whose probabilities are proportional to the density.
    """
    if n_points < 1:
        raise ValueError("n_points must be positive")
    knots = sorted((float(v), float(d)) for v, d in points)
    if not knots:
        raise ValueError("density needs at least one knot")
    xs = np.array([k[0] for k in knots])
    ds = np.array([k[1] for k in knots])
    if np.any(ds < 0):
        raise ValueError("density must be nonnegative")

    grid = np.linspace(xs[0], xs[-1], n_points) if n_points > 1 else xs[:1]
    weights = np.interp(grid, xs, ds)
    keep = weights > 0
    if not np.any(keep):
        raise ValueError("density integrates to zero on the grid")
    grid, weights = grid[keep], weights[keep]
    probs = weights / weights.sum()
    costs = cost_slope * grid + cost_intercept
    return Environment(tuple(grid), tuple(probs), tuple(costs), name)


def affine_cost_fit(env: Environment, tol: float = 1e-10) -> Optional[Tuple[float, float]]:
    """Return ``(slope, intercept)`` when costs are affine in values, else None."""
    if env.n == 1:
        return 0.0, env.costs[0]
    slope = (env.costs[-1] - env.costs[0]) / env.span
    intercept = env.costs[0] - slope * env.values[0]
    fitted = slope * env.value_array + intercept
    scale = max(1.0, float(np.max(np.abs(env.cost_array))))
    if float(np.max(np.abs(fitted - env.cost_array))) > tol * scale:
        return None
    return float(slope), float(intercept)
