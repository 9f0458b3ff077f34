"""Payoff geometry - seller floors, implementable-payoff triangles and frontiers."""

from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .environment import affine_cost_fit, surplus
from .equilibrium import min_seller_profit_search
from .icd import affine_p_star, seller_profit
from .models import (
    Environment,
    FloorCertificate,
    PayoffPoint,
    PayoffRegion,
    SearchConfig,
)

logger = logging.getLogger(__name__)

Point = Tuple[float, float]

DEFAULT_LAMBDA_GRID: Tuple[float, ...] = (
    1.0,
    1.25,
    1.5,
    2.0,
    3.0,
    5.0,
    10.0,
    100.0,
    1e4,
    1e6,
)


class EmptyRegionError(RuntimeError):
    """Raised when the welfare-weighted frontier leaves nothing above the floor."""


def _require_gains(env: Environment) -> None:
    if not env.gains_from_trade:
        raise ValueError(
            f"environment {env.name or '<unnamed>'} has no gains from trade "
            "(needs v >= c everywhere and positive surplus)"
        )


def _point(p: Union[PayoffPoint, Sequence[float]]) -> Point:
    if isinstance(p, PayoffPoint):
        return p.as_tuple()
    return float(p[0]), float(p[1])


def seller_guarantee(env: Environment) -> float:
    """Profit the seller secures by posting the lowest value, ``max(v_1 - E[c], 0)``."""
    return max(env.v_low - env.mean_cost, 0.0)


def seller_floor_fb(env: Environment, tol: float = 1e-12) -> Tuple[float, Tuple[float, ...]]:
    """Best profit against a fully informed buyer, and the prices that reach it."""
    _require_gains(env)
    prior = env.prior
    profits = np.array([seller_profit(prior, v) for v in env.values])
    best = float(profits.max())
    keep = profits >= best - tol * max(1.0, abs(best))
    return best, tuple(v for v, k in zip(env.values, keep) if k)


def _check_bracket(value: float, guarantee: float, fb: float, tol: float = 1e-9) -> None:
    slack = tol * max(1.0, abs(fb))
    if value < guarantee - slack or value > fb + slack:
        logger.warning(
            "seller floor %.12g lies outside [guarantee %.12g, fb floor %.12g]",
            value,
            guarantee,
            fb,
        )


def seller_floor_us(
    env: Environment,
    search_config: Optional[SearchConfig] = None,
) -> FloorCertificate:
    """Seller's worst equilibrium payoff when only the buyer is informed.

    Exact for one-point supports, affine costs, and whenever the guarantee
    already equals the full-information floor. Otherwise the certified
    search supplies an upper bound, bracketed below by the guarantee. Values
    are reported as computed; one outside ``[guarantee, fb floor]`` is logged.
    """
    _require_gains(env)
    guarantee = seller_guarantee(env)
    fb, _ = seller_floor_fb(env)

    if env.n == 1:
        value = env.v_low - env.costs[0]
        return FloorCertificate(value, True, value, "degenerate", p_star=env.v_low)

    if fb - guarantee <= 1e-12 * max(1.0, fb):
        return FloorCertificate(fb, True, guarantee, "squeezed", p_star=env.v_low)

    if affine_cost_fit(env) is not None:
        star = affine_p_star(env)
        _check_bracket(star.pi_us, guarantee, fb)
        return FloorCertificate(
            star.pi_us,
            True,
            star.pi_us,
            "affine",
            p_star=star.p_star,
            witness=star.witness,
        )

    result = min_seller_profit_search(env, search_config or SearchConfig())
    _check_bracket(result.upper_bound, guarantee, fb)
    logger.warning(
        "costs are not affine; seller floor %.6g is an upper bound (guarantee %.6g)",
        result.upper_bound,
        guarantee,
    )
    return FloorCertificate(result.upper_bound, False, guarantee, "search", witness=result)


def _triangle(
    env: Environment, floor: float, kind: str, lower: Tuple[str, str]
) -> PayoffRegion:
    total = surplus(env)
    top = PayoffPoint(0.0, total)
    letters = ("A",) + lower
    if total - floor <= 1e-12 * max(1.0, abs(total)):
        return PayoffRegion((top,), kind, {letter: 0 for letter in letters})
    vertices = (top, PayoffPoint(0.0, floor), PayoffPoint(total - floor, floor))
    return PayoffRegion(vertices, kind, {letter: i for i, letter in enumerate(letters)})


def region_all(env: Environment) -> PayoffRegion:
    """Payoffs implementable by some information structure: A, F, G."""
    _require_gains(env)
    return _triangle(env, seller_guarantee(env), "triangle_all", ("F", "G"))


def region_us(env: Environment, floor: Optional[float] = None) -> PayoffRegion:
    """Payoffs implementable with an uninformed seller: A, D, E."""
    _require_gains(env)
    if floor is None:
        floor = seller_floor_us(env).value
    return _triangle(env, floor, "triangle_us", ("D", "E"))


def region_fb(env: Environment) -> PayoffRegion:
    """Payoffs implementable with a fully informed buyer: A, B, C."""
    _require_gains(env)
    fb, _ = seller_floor_fb(env)
    return _triangle(env, fb, "triangle_fb", ("B", "C"))


def _segment_distance(p: Point, a: Point, b: Point) -> float:
    ax, ay = b[0] - a[0], b[1] - a[1]
    length_sq = ax * ax + ay * ay
    if length_sq == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / length_sq
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - a[0] - t * ax, p[1] - a[1] - t * ay)


def contains(
    region: PayoffRegion, point: Union[PayoffPoint, Sequence[float]], tol: float = 1e-9
) -> bool:
    """Whether ``point`` lies in the closed region, up to ``tol``."""
    p = _point(point)
    verts = [v.as_tuple() for v in region.vertices]
    if len(verts) <= 2:
        return distance_to_region(region, p) <= tol
    for a, b in zip(verts, verts[1:] + verts[:1]):
        ex, ey = b[0] - a[0], b[1] - a[1]
        length = math.hypot(ex, ey)
        if length == 0.0:
            continue
        cross = ex * (p[1] - a[1]) - ey * (p[0] - a[0])
        if cross < -tol * length:
            return False
    return True


def distance_to_region(
    region: PayoffRegion, point: Union[PayoffPoint, Sequence[float]]
) -> float:
    """Euclidean distance from ``point`` to the region (0 inside)."""
    p = _point(point)
    verts = [v.as_tuple() for v in region.vertices]
    if len(verts) >= 3 and contains(region, p, tol=0.0):
        return 0.0
    if len(verts) == 1:
        return math.hypot(p[0] - verts[0][0], p[1] - verts[0][1])
    edges = zip(verts, verts[1:] + verts[:1]) if len(verts) >= 3 else [tuple(verts)]
    return min(_segment_distance(p, a, b) for a, b in edges)


def region_includes(outer: PayoffRegion, inner: PayoffRegion, tol: float = 1e-9) -> bool:
    """Whether every vertex of ``inner`` lies in ``outer``."""
    return all(contains(outer, v, tol) for v in inner.vertices)


def clip_half_plane(
    vertices: Sequence[Point], a: float, b: float, c: float, tol: float = 1e-12
) -> List[Point]:
    """Clip a convex polygon to ``a * x + b * y <= c``.

    One Sutherland-Hodgman pass; vertices stay in their original orientation.
    """
    if not vertices:
        return []
    scale = max(1.0, abs(c))

    def side(p: Point) -> float:
        return a * p[0] + b * p[1] - c

    out: List[Point] = []
    pts = list(vertices)
    for cur, nxt in zip(pts, pts[1:] + pts[:1]):
        s_cur, s_nxt = side(cur), side(nxt)
        cur_in, nxt_in = s_cur <= tol * scale, s_nxt <= tol * scale
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in and len(pts) > 1:
            t = s_cur / (s_cur - s_nxt)
            out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
    return out


def _dedupe(vertices: List[Point], tol: float) -> List[Point]:
    out: List[Point] = []
    for p in vertices:
        if not out or math.hypot(p[0] - out[-1][0], p[1] - out[-1][1]) > tol:
            out.append(p)
    while len(out) > 1 and math.hypot(
        out[0][0] - out[-1][0], out[0][1] - out[-1][1]
    ) <= tol:
        out.pop()
    return out


def s_lambda(env: Environment, welfare_weight: float) -> float:
    """Welfare-weighted surplus ``E[max(v_1 - c + lambda (v - v_1), 0)]``."""
    if welfare_weight < 1.0:
        raise ValueError("welfare_weight must be at least 1")
    v1 = env.v_low
    terms = []
    for v, p, c in zip(env.values, env.probs, env.costs):
        gain = (v - c) if welfare_weight == 1.0 else v1 - c + welfare_weight * (v - v1)
        terms.append(p * max(gain, 0.0))
    return float(math.fsum(terms))


def pi_hat_s(env: Environment) -> float:
    """Seller payoff at the corner where all efficient trade happens at ``v_1``."""
    v1 = env.v_low
    return max(
        math.fsum(p * (v1 - c) for v, p, c in zip(env.values, env.probs, env.costs) if v >= c),
        0.0,
    )


def region_negative(
    env: Environment, lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID
) -> PayoffRegion:
    """Implementable payoffs when some types have negative gains from trade.

    Starts from the welfare-weight-one triangle above the seller guarantee and
    clips it with ``lambda * pi_b + pi_s <= S_lambda`` for every weight in the
    grid. The grid must contain 1; a largest weight below 1e4 leaves the
    polygon loose near the ``pi_b`` axis.
    """
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise ValueError("lambda_grid must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda_grid must be strictly increasing")
    if grid[0] < 1.0 or not any(abs(x - 1.0) < 1e-12 for x in grid):
        raise ValueError("lambda_grid must start at 1")
    if grid[-1] < 1e4:
        logger.warning(
            "largest welfare weight %g is below 1e4; the frontier may be loose", grid[-1]
        )

    floor = seller_guarantee(env)
    s_one = s_lambda(env, 1.0)
    scale = max(1.0, abs(s_one))
    if s_one < floor - 1e-12 * scale:
        raise EmptyRegionError(
            f"S_1={s_one!r} lies below the seller guarantee {floor!r}"
        )

    if s_one - floor <= 1e-12 * scale:
        polygon: List[Point] = [(0.0, s_one)]
    else:
        polygon = [(0.0, s_one), (0.0, floor), (s_one - floor, floor)]
    for weight in grid:
        if abs(weight - 1.0) < 1e-12:
            continue
        polygon = clip_half_plane(polygon, weight, 1.0, s_lambda(env, weight))
        if not polygon:
            raise EmptyRegionError(f"clipping at lambda={weight!r} emptied the region")
    polygon = _dedupe(polygon, 1e-10 * scale)

    top = max(range(len(polygon)), key=lambda i: (polygon[i][1], -polygon[i][0]))
    polygon = polygon[top:] + polygon[:top]
    labels: Dict[str, int] = {"A": 0}
    for i, (x, y) in enumerate(polygon):
        if abs(x) <= 1e-12 * scale and abs(y - floor) <= 1e-12 * scale:
            labels["F"] = i
    vertices = tuple(PayoffPoint(x, y) for x, y in polygon)
    return PayoffRegion(vertices, "negative_envelope", labels)
