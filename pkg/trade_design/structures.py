"""Information-structure builders that implement target payoffs.

Every builder returns an information structure together with the strategy
profile that supports the target; the equilibrium module checks them.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .environment import surplus
from .equilibrium import (
    WITNESS_GAP,
    affine_partition_witness,
    best_response_profile,
    default_price_grid,
    min_seller_profit_search,
    payoffs,
    price_independent_beliefs,
    segmented_structure,
    unique_prices,
    uniqueness_sweep,
    verify_sequential,
)
from .geometry import (
    contains,
    distance_to_region,
    region_all,
    seller_floor_us,
    seller_guarantee,
)
from .icd import icd_decompose
from .models import (
    UNINFORMED_SELLER,
    DiscreteConstruction,
    Environment,
    GarbleResult,
    InformationStructure,
    PayoffPoint,
    PayoffRegion,
    SearchConfig,
    SearchResult,
    StrategyProfile,
    TrembleSchedule,
)

logger = logging.getLogger(__name__)

Target = Union[PayoffPoint, Sequence[float]]
Built = Tuple[InformationStructure, StrategyProfile]

# (e_l, e_h): off-path posteriors converge to v_1 as n grows
TREMBLE_EXPONENTS = (3.0, 6.0)
MIN_POOL_SHARE = 5e-3
SIGMA_FLOOR = 1e-3
MAX_DISCRETE_ATTEMPTS = 40


class InfeasibleTargetError(ValueError):
    """Raised when a target payoff lies outside the implementable region."""

    def __init__(self, message: str, distance: float = 0.0):
        super().__init__(message)
        self.distance = distance


class ConstructionError(RuntimeError):
    """Raised when a construction cannot produce a verified equilibrium."""


def _as_point(target: Target) -> PayoffPoint:
    if isinstance(target, PayoffPoint):
        return target
    return PayoffPoint(float(target[0]), float(target[1]))


def _require_gains(env: Environment) -> None:
    if not env.gains_from_trade:
        raise ValueError("construction needs gains from trade (v >= c everywhere)")


def _require_inside(region: PayoffRegion, point: PayoffPoint, tol: float) -> None:
    if not contains(region, point, tol):
        distance = distance_to_region(region, point)
        raise InfeasibleTargetError(
            f"target ({point.pi_b:.6g}, {point.pi_s:.6g}) lies {distance:.3g} "
            f"outside the {region.kind} region",
            distance,
        )


def _point_mass(n: int, index: int) -> np.ndarray:
    out = np.zeros(n)
    out[index] = 1.0
    return out


def _off_path_acceptance(env: Environment, grid: np.ndarray) -> np.ndarray:
    """Acceptance under the skeptical belief that puts all mass on ``v_1``."""
    return (grid <= env.v_low + 1e-12 * max(1.0, abs(env.v_low))).astype(float)


# -- canonical structures ---------------------------------------------------


def no_information(env: Environment) -> Built:
    """Neither side learns anything; the seller posts ``E[v]``."""
    structure = InformationStructure(("t0",), ("t0",), env.prob_array[None, None, :])
    return structure, best_response_profile(env, structure)


def full_revelation_to_buyer(env: Environment, price_choice: str = "lowest") -> Built:
    """Buyer learns the value; the seller stays uninformed."""
    structure = segmented_structure(env, np.diag(env.prob_array), prefix="v")
    return structure, best_response_profile(env, structure, price_choice=price_choice)


def full_information(env: Environment) -> Built:
    """Both sides learn the value; the seller extracts the whole surplus."""
    n = env.n
    labels = tuple(f"v{i}" for i in range(n))
    joint = np.zeros((n, n, n))
    joint[np.arange(n), np.arange(n), np.arange(n)] = env.prob_array
    structure = InformationStructure(labels, labels, joint)
    return structure, best_response_profile(env, structure)


# -- any target in the implementable triangle -------------------------------


def construct_any(
    env: Environment, target: Target, tol: float = 1e-9, sentinel_fraction: float = 1e-3
) -> Built:
    """No-information structure with mixed pricing that hits any target in the triangle.

    The seller mixes between ``p_l = pi_s + E[c]``, which the buyer always
    accepts, and ``p_h = E[v]``, accepted with the probability that keeps the
    seller indifferent. Off path the buyer believes the value is ``v_1``.
    """
    _require_gains(env)
    point = _as_point(target)
    _require_inside(region_all(env), point, tol)

    ev, ec = env.mean_value, env.mean_cost
    p_l = point.pi_s + ec
    p_h = ev
    structure = InformationStructure(("t0",), ("t0",), env.prob_array[None, None, :])
    grid = default_price_grid(env, extra=[p_l, p_h], sentinel_fraction=sentinel_fraction)
    k, n = grid.shape[0], env.n

    alpha = _off_path_acceptance(env, grid)
    beliefs = np.tile(_point_mass(n, 0), (k, 1))
    sigma = np.zeros(k)

    profile_index = _grid_lookup(grid)
    i_h = profile_index(p_h)
    beliefs[i_h] = env.prob_array
    if p_h - p_l <= 1e-12 * max(1.0, abs(p_h)):
        sigma[i_h] = 1.0
        alpha[i_h] = 1.0
    else:
        i_l = profile_index(p_l)
        sigma_l = min(1.0, max(0.0, point.pi_b / (ev - p_l)))
        sigma[i_l] = sigma_l
        sigma[i_h] = 1.0 - sigma_l
        alpha[i_l] = 1.0
        alpha[i_h] = (p_l - ec) / (p_h - ec)
        beliefs[i_l] = env.prob_array

    profile = StrategyProfile(grid, sigma[None, :], alpha[:, None], beliefs[:, None, :])
    return structure, profile


def _grid_lookup(grid: np.ndarray):
    def index(price: float) -> int:
        idx = int(np.argmin(np.abs(grid - price)))
        if abs(grid[idx] - price) > 1e-10 * max(1.0, abs(price)):
            raise KeyError(f"price {price!r} missing from grid")
        return idx

    return index


# -- finite-grid sequential equilibrium -------------------------------------


def _discrete_grid(
    env: Environment, epsilon: float, grid: Optional[Sequence[float]]
) -> np.ndarray:
    if grid is not None:
        prices = unique_prices(grid)
        if prices[0] > env.v_low or prices[-1] < env.v_high:
            raise ValueError("price grid must cover [v_1, v_n]")
        return prices
    step = epsilon / 10.0
    count = int(math.ceil(env.span / step)) + 3
    return unique_prices(env.v_low - step + step * np.arange(count))


def _interior_aim(region: PayoffRegion, point: PayoffPoint, margin: float) -> PayoffPoint:
    """Move ``point`` toward the centroid until it is ``margin`` inside every edge."""
    verts = [v.as_tuple() for v in region.vertices]
    if len(verts) < 3:
        return point
    centroid = (sum(x for x, _ in verts) / len(verts), sum(y for _, y in verts) / len(verts))
    t = point.as_tuple()

    def inside_distance(p, a, b) -> float:
        ex, ey = b[0] - a[0], b[1] - a[1]
        return (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / math.hypot(ex, ey)

    theta = 0.0
    for a, b in zip(verts, verts[1:] + verts[:1]):
        g_t, g_c = inside_distance(t, a, b), inside_distance(centroid, a, b)
        if g_t >= margin:
            continue
        theta = max(theta, (margin - g_t) / (g_c - g_t) if g_c > g_t else 1.0)
    theta = min(1.0, theta)
    return PayoffPoint(
        t[0] + theta * (centroid[0] - t[0]), t[1] + theta * (centroid[1] - t[1])
    )


def _two_type_profile(
    env: Environment,
    grid: np.ndarray,
    eta: float,
    low_price: float,
    high_price: float,
    low_posts: float,
    sigma_h: float,
    alpha_high: float,
) -> Built:
    """Seller types l (value ``v_1``) and h; the buyer only sees the price.

    Type l posts ``low_posts``; type h posts ``high_price`` with probability
    ``sigma_h`` and ``low_price`` otherwise.
    """
    n = env.n
    joint = np.zeros((2, 1, n))
    joint[0, 0, 0] = eta
    joint[1, 0, :] = env.prob_array
    joint[1, 0, 0] -= eta
    structure = InformationStructure(("l", "h"), ("t0",), joint)

    index = _grid_lookup(grid)
    k = grid.shape[0]
    sigma = np.zeros((2, k))
    sigma[0, index(low_posts)] = 1.0
    sigma[1, index(high_price)] += sigma_h
    sigma[1, index(low_price)] += 1.0 - sigma_h

    alpha = _off_path_acceptance(env, grid)
    alpha[index(low_price)] = 1.0
    alpha[index(high_price)] = alpha_high

    reach = np.einsum("sbv,sp->pbv", joint, sigma)[:, 0, :]
    mass = reach.sum(axis=1)
    beliefs = np.tile(_point_mass(n, 0), (k, 1))
    on_path = mass > 0
    beliefs[on_path] = reach[on_path] / mass[on_path, None]
    profile = StrategyProfile(grid, sigma, alpha[:, None], beliefs[:, None, :])
    return structure, profile


def _case_two_candidates(
    env: Environment,
    grid: np.ndarray,
    q: float,
    eta: float,
    c_h: float,
    aim: PayoffPoint,
    target: PayoffPoint,
) -> List[dict]:
    ev, ec, v1 = env.mean_value, env.mean_cost, env.v_low
    allowed = grid[(grid >= max(c_h, v1) - 1e-12) & (grid < q)]
    if allowed.size == 0:
        return []
    ideal = aim.pi_s + ec
    nearest = allowed[np.argsort(np.abs(allowed - ideal))[:4]]
    out = []
    for p_l in nearest:
        spread = (1.0 - eta) * (q - p_l)
        if spread <= 0:
            continue
        sigma_h = min(1.0, max(SIGMA_FLOOR, (ev - p_l - aim.pi_b) / spread))
        keep = eta + (1.0 - eta) * (1.0 - sigma_h)
        mean_low = (eta * v1 + (1.0 - eta) * (1.0 - sigma_h) * q) / keep
        if mean_low < p_l:
            continue
        achieved = PayoffPoint(ev - p_l - spread * sigma_h, p_l - ec)
        out.append(
            {
                "error": achieved.distance(target),
                "case": 2,
                "q": q,
                "eta": eta,
                "low_price": float(p_l),
                "high_price": q,
                "low_posts": float(p_l),
                "sigma_h": sigma_h,
                "alpha_high": (p_l - c_h) / (q - c_h),
            }
        )
    return out


def _case_one_candidates(
    env: Environment,
    grid: np.ndarray,
    q: float,
    eta: float,
    c_h: float,
    aim: PayoffPoint,
    target: PayoffPoint,
    epsilon: float,
    keep: int = 5,
) -> List[dict]:
    ec, v1, c1 = env.mean_cost, env.v_low, env.costs[0]
    ideal = aim.pi_s + ec
    window = 2.0 * epsilon + eta * env.span
    lows = grid[
        (grid >= max(c_h, v1) - 1e-12) & (grid < q) & (np.abs(grid - ideal) <= window)
    ]
    highs = grid[(grid > max(v1, c1) + 1e-12) & (grid < q)]
    if lows.size == 0 or highs.size == 0:
        return []
    p_l, p_h = np.meshgrid(lows, highs, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = (eta / (1.0 - eta)) * (p_h - v1) / (q - p_h)
        alpha = (p_l - c_h) / (p_h - c_h)
    valid = (p_h > p_l) & (sigma >= SIGMA_FLOOR) & (sigma <= 1.0 - SIGMA_FLOOR)
    if not np.any(valid):
        return []
    pi_s = (1.0 - eta) * (p_l - c_h) + eta * alpha * (p_h - c1)
    pi_b = (1.0 - eta) * (1.0 - sigma) * (q - p_l)
    error = np.hypot(pi_b - target.pi_b, pi_s - target.pi_s)
    error = np.where(valid, error, np.inf)
    order = np.argsort(error, axis=None)[:keep]
    out = []
    for flat in order:
        i, j = np.unravel_index(flat, error.shape)
        if not np.isfinite(error[i, j]):
            break
        out.append(
            {
                "error": float(error[i, j]),
                "case": 1,
                "q": q,
                "eta": eta,
                "low_price": float(p_l[i, j]),
                "high_price": float(p_h[i, j]),
                "low_posts": float(p_h[i, j]),
                "sigma_h": float(sigma[i, j]),
                "alpha_high": float(alpha[i, j]),
            }
        )
    return out


def construct_discrete(
    env: Environment,
    target: Target,
    epsilon: float = 0.05,
    grid: Optional[Sequence[float]] = None,
    strict_interior: bool = False,
    tol: float = 1e-9,
    max_pool_prices: int = 30,
) -> DiscreteConstruction:
    """Sequential equilibrium on a finite price grid within ``epsilon`` of ``target``.

    The seller privately learns whether the value is ``v_1`` (type l, with
    probability ``eta``) or not (type h); the buyer only sees the price. The
    target is first pulled ``epsilon / 4`` inside the triangle, so boundary
    targets are reached approximately. Candidates are ranked by distance to
    the target and the first one passing the sequential checks is returned.

    Raises:
        InfeasibleTargetError: Target outside the triangle, or not
            ``epsilon``-interior when ``strict_interior`` is set.
        ConstructionError: No candidate on the grid passes verification.
    """
    _require_gains(env)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    point = _as_point(target)
    region = region_all(env)
    _require_inside(region, point, tol)

    total, floor = surplus(env), seller_guarantee(env)
    margin = min(point.pi_b, point.pi_s - floor, (total - point.pi_b - point.pi_s) / math.sqrt(2))
    if strict_interior and margin < epsilon - tol:
        raise InfeasibleTargetError(
            f"target is only {margin:.3g} inside the region, need {epsilon:.3g}", 0.0
        )

    if env.n == 1:
        structure, profile = no_information(env)
        return DiscreteConstruction(
            structure,
            profile,
            TrembleSchedule((1.0,)),
            2,
            0.0,
            0.0,
            payoffs(env, structure, profile),
        )

    prices = _discrete_grid(env, epsilon, grid)
    aim = _interior_aim(region, point, epsilon / 4.0)
    ev, ec = env.mean_value, env.mean_cost
    v1, c1, mu1 = env.v_low, env.costs[0], env.probs[0]
    case = 1 if c1 > ec + 1e-12 * max(1.0, abs(ec)) else 2
    step = float(np.min(np.diff(prices))) if prices.size > 1 else epsilon / 10.0

    pool = prices[prices >= ev + 0.5 * step]
    shares = (pool - ev) / (pool - v1)
    usable = (shares >= MIN_POOL_SHARE) & (shares <= min(mu1, 1.0 - 1e-9))
    pool = pool[usable]
    if pool.size > max_pool_prices:
        pool = pool[np.linspace(0, pool.size - 1, max_pool_prices).astype(int)]

    candidates: List[dict] = []
    for q in pool:
        q = float(q)
        eta = (q - ev) / (q - v1)
        c_h = (ec - eta * c1) / (1.0 - eta)
        if case == 2:
            candidates.extend(_case_two_candidates(env, prices, q, eta, c_h, aim, point))
        else:
            candidates.extend(
                _case_one_candidates(env, prices, q, eta, c_h, aim, point, epsilon)
            )
    candidates = [c for c in candidates if c["error"] <= epsilon]
    candidates.sort(key=lambda c: (c["error"], c["q"]))
    logger.debug("case %d: %d candidates within epsilon", case, len(candidates))

    trembles = TrembleSchedule(TREMBLE_EXPONENTS)
    for cand in candidates[:MAX_DISCRETE_ATTEMPTS]:
        structure, profile = _two_type_profile(
            env,
            prices,
            cand["eta"],
            cand["low_price"],
            cand["high_price"],
            cand["low_posts"],
            cand["sigma_h"],
            cand["alpha_high"],
        )
        report = verify_sequential(env, structure, profile, trembles, tol=tol)
        achieved = payoffs(env, structure, profile)
        if report.ok and achieved.distance(point) <= epsilon:
            return DiscreteConstruction(
                structure,
                profile,
                trembles,
                case,
                cand["eta"],
                cand["sigma_h"],
                achieved,
            )
        logger.debug("candidate rejected: %s", report)

    raise ConstructionError(
        f"no grid equilibrium within {epsilon} of ({point.pi_b:.6g}, {point.pi_s:.6g})"
    )


# -- garbling an uninformed-seller structure --------------------------------


def _mean_classes(means: np.ndarray, order: np.ndarray) -> List[List[int]]:
    classes: List[List[int]] = []
    for b in order:
        if classes and abs(means[b] - means[classes[-1][0]]) <= 1e-12 * max(
            1.0, abs(means[b])
        ):
            classes[-1].append(int(b))
        else:
            classes.append([int(b)])
    return classes


def garble_to_target(
    env: Environment,
    base: InformationStructure,
    base_profile: StrategyProfile,
    target: Target,
    tol: float = 1e-9,
) -> GarbleResult:
    """Garble an uninformed-seller structure so its equilibrium pays ``target``.

    Low-mean buyer signals are excluded from trade until the surplus lost
    equals ``S - pi_b - pi_s``; the excluded cutoff class is split with
    fraction ``beta``. The seller then posts ``p_star``, which makes the
    retained buyers pay ``pi_s`` in total, and a ``pool_fraction`` of the
    high-mean signals is pooled with the rest so the pool's mean is ``p_star``.
    """
    if UNINFORMED_SELLER not in base.class_tags:
        raise ValueError("garbling needs an uninformed-seller structure")
    point = _as_point(target)
    _require_inside(region_all(env), point, tol)
    base_payoff = payoffs(env, base, base_profile).pi_s
    if point.pi_s < base_payoff - tol:
        raise InfeasibleTargetError(
            f"target seller payoff {point.pi_s:.6g} is below the base "
            f"equilibrium's {base_payoff:.6g}",
            base_payoff - point.pi_s,
        )

    values, costs = env.value_array, env.cost_array
    cells = base.joint[0]  # (B, n)
    mass = cells.sum(axis=1)
    value_mass = cells @ values
    cost_mass = cells @ costs
    live = np.flatnonzero(mass > 1e-15)
    means = np.zeros_like(mass)
    means[live] = value_mass[live] / mass[live]
    classes = _mean_classes(means, live[np.argsort(means[live], kind="stable")])

    gamma = max(surplus(env) - point.pi_b - point.pi_s, 0.0)
    excluded = np.zeros_like(mass)  # share of each signal kept out of trade
    z_star, beta, z_class = -math.inf, 0.0, None
    if gamma > 1e-15:
        cumulative = 0.0
        for members in classes:
            gain = float(sum(value_mass[b] - cost_mass[b] for b in members))
            if gain > 0 and cumulative + gain >= gamma - 1e-15:
                z_star = float(means[members[0]])
                beta = min(1.0, max(0.0, (gamma - cumulative) / gain))
                z_class = members
                excluded[members] = beta
                break
            cumulative += gain
            excluded[members] = 1.0
        else:
            raise ConstructionError("surplus to destroy exceeds the total surplus")

    retained = 1.0 - excluded
    m_ret = float(retained @ mass)
    if m_ret <= 1e-15:
        raise ConstructionError("no buyer signals are left to trade")
    c_ret = float(retained @ cost_mass)
    p_star = (point.pi_s + c_ret) / m_ret

    tol_p = 1e-12 * max(1.0, abs(p_star))
    below = np.zeros_like(mass, dtype=bool)
    below[live] = means[live] < p_star - tol_p
    if z_class is not None:
        below[z_class] = True
    numerator = float(np.sum(retained[below] * (p_star * mass[below] - value_mass[below])))
    above = np.zeros_like(below)
    above[live] = ~below[live]
    denominator = float(
        np.sum(retained[above] * (value_mass[above] - p_star * mass[above]))
    )
    if denominator <= 1e-15:
        if numerator > 1e-12:
            raise ConstructionError("pool mean cannot reach p_star")
        pool_fraction = 0.0
    else:
        pool_fraction = min(1.0, max(0.0, numerator / denominator))

    pooled = np.where(below, retained, retained * pool_fraction)
    kept_retained = retained - pooled
    rows, labels, accept_ties = [], [], []
    for b in live:
        if excluded[b] > 0:
            rows.append(excluded[b] * cells[b])
            labels.append(base.buyer_signals[b])
            accept_ties.append(False)
        if kept_retained[b] > 1e-15:
            rows.append(kept_retained[b] * cells[b])
            labels.append(base.buyer_signals[b])
            accept_ties.append(True)
    pool_row = (pooled[:, None] * cells).sum(axis=0)
    pool_index = None
    if pool_row.sum() > 1e-15:
        pool_index = len(rows)
        rows.append(pool_row)
        labels.append("pool")
        accept_ties.append(True)

    joint = np.array(rows)[None, :, :]
    structure = InformationStructure(("t0",), tuple(labels), joint / joint.sum())

    post = structure.buyer_posteriors()
    signal_means = post @ values
    grid = default_price_grid(env, extra=list(signal_means) + [p_star])
    k = grid.shape[0]
    slack = 1e-12 * np.maximum(1.0, np.abs(grid))
    alpha = np.zeros((k, len(labels)))
    for j, accept in enumerate(accept_ties):
        if j == pool_index:
            alpha[:, j] = grid <= p_star + slack
        elif accept:
            alpha[:, j] = signal_means[j] >= grid - slack
        else:
            alpha[:, j] = signal_means[j] > grid + slack
    sigma = np.zeros((1, k))
    sigma[0, int(np.argmin(np.abs(grid - p_star)))] = 1.0
    beliefs = price_independent_beliefs(env, structure, k)
    profile = StrategyProfile(grid, sigma, alpha, beliefs)

    achieved = payoffs(env, structure, profile)
    if achieved.distance(point) > 1e-7 * max(1.0, abs(point.pi_s)):
        raise ConstructionError(
            f"garbled payoffs ({achieved.pi_b:.9g}, {achieved.pi_s:.9g}) miss the target"
        )
    logger.debug(
        "garble: z*=%g beta=%.6g p*=%.9g pool=%.6g", z_star, beta, p_star, pool_fraction
    )
    return GarbleResult(structure, profile, z_star, beta, p_star, pool_fraction)


# -- uninformed seller with a unique equilibrium payoff ---------------------


def finite_floor_witness(
    env: Environment,
    gap: Optional[float] = None,
    search_config: Optional[SearchConfig] = None,
) -> SearchResult:
    """Finite uninformed-seller equilibrium whose seller payoff is close to the floor.

    No finite structure attains the affine floor exactly. Pooling the floor's
    ICD into intervals gets within ``gap`` of it; without affine costs the
    certified floor search provides the witness.
    """
    _require_gains(env)
    if env.n == 1:
        structure, profile = no_information(env)
        return SearchResult(payoffs(env, structure, profile).pi_s, structure, profile, 0)
    witness = affine_partition_witness(env, gap)
    if witness is not None:
        return witness
    return min_seller_profit_search(env, search_config)


def construct_us_unique(
    env: Environment,
    target: Target,
    witness: Optional[SearchResult] = None,
    tol: float = 1e-9,
) -> Built:
    """Uninformed-seller structure whose every equilibrium pays ``target``.

    A finite floor witness is garbled to the target. Unless one is passed in,
    the witness is built within half the target's margin over the floor, so
    every target strictly above an affine floor is reachable.

    Uniqueness is certified by a sweep under both tie rules: above ``p_star``
    no price beats the witness payoff, and below it no price reaches the
    target.
    """
    _require_gains(env)
    point = _as_point(target)
    floor = seller_floor_us(env)
    margin = point.pi_s - floor.value
    if margin <= tol:
        raise InfeasibleTargetError(
            f"target seller payoff {point.pi_s:.6g} is not above the floor "
            f"{floor.value:.6g}",
            -margin,
        )
    base = witness
    if base is None:
        gap = min(WITNESS_GAP * max(1.0, env.span), 0.5 * margin)
        try:
            base = finite_floor_witness(env, gap=gap)
        except ValueError as e:
            raise ConstructionError(f"no finite witness close enough: {e}") from e
    if point.pi_s < base.upper_bound - tol:
        raise InfeasibleTargetError(
            f"target seller payoff {point.pi_s:.6g} is below the witness payoff "
            f"{base.upper_bound:.6g}",
            base.upper_bound - point.pi_s,
        )
    garbled = garble_to_target(env, base.structure, base.profile, point, tol)
    sweep = uniqueness_sweep(env, garbled.structure, garbled.profile, garbled.p_star)
    if sweep["max_above"] > base.upper_bound + tol or sweep["max_below"] >= point.pi_s:
        raise ConstructionError(f"uniqueness sweep failed: {sweep}")
    logger.debug(
        "us-unique: witness %.9g, above p* %.9g, below p* %.9g",
        base.upper_bound,
        sweep["max_above"],
        sweep["max_below"],
    )
    return garbled.structure, garbled.profile


# -- fully informed buyer ----------------------------------------------------


def construct_fb(env: Environment, beta: float) -> Built:
    """Seller learns an ICD segment, buyer learns the value.

    Each segment prices at its lowest support point with probability ``beta``
    and at its highest otherwise, so payoffs move along the segment from
    ``(0, floor_fb)`` to ``(S - floor_fb, floor_fb)``.
    """
    _require_gains(env)
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    decomposition = icd_decompose(env)
    n = env.n
    components = decomposition.components
    joint = np.zeros((len(components), n, n))
    for j, comp in enumerate(components):
        joint[j, np.arange(n), np.arange(n)] = comp.weight * comp.belief.weight_array
    keep = joint.sum(axis=(0, 2)) > 0
    joint = joint[:, keep, :]
    buyer_labels = tuple(f"v{i}" for i in range(n) if keep[i])
    structure = InformationStructure(
        tuple(f"seg{j}" for j in range(len(components))), buyer_labels, joint
    )

    grid = default_price_grid(env)
    index = _grid_lookup(grid)
    sigma = np.zeros((len(components), grid.shape[0]))
    for j, comp in enumerate(components):
        sigma[j, index(comp.belief.lower)] += beta
        sigma[j, index(comp.belief.upper)] += 1.0 - beta
    values = env.value_array[keep]
    slack = 1e-12 * np.maximum(1.0, np.abs(grid))
    alpha = (values[None, :] >= grid[:, None] - slack[:, None]).astype(float)
    beliefs = price_independent_beliefs(env, structure, grid.shape[0])
    return structure, StrategyProfile(grid, sigma, alpha, beliefs)


# -- negative gains from trade -----------------------------------------------


def construct_negative(
    env: Environment, welfare_weight: float, tie_share: float = 1.0, tol: float = 1e-12
) -> Built:
    """Public signal that trades exactly the types with positive weighted gains.

    Types with ``v_1 - c + welfare_weight (v - v_1) > 0`` go to the ``pos``
    branch and buy at ``v_1``; ties go there with probability ``tie_share``.
    The ``neg`` branch never trades.
    """
    if welfare_weight < 1.0:
        raise ValueError("welfare_weight must be at least 1")
    if not 0.0 <= tie_share <= 1.0:
        raise ValueError("tie_share must lie in [0, 1]")
    v, c, mu = env.value_array, env.cost_array, env.prob_array
    v1 = env.v_low
    weighted = v1 - c + welfare_weight * (v - v1)
    scale = tol * max(1.0, float(np.max(np.abs(weighted))))
    share = np.where(weighted > scale, 1.0, np.where(weighted < -scale, 0.0, tie_share))

    branches = []
    pos, neg = share * mu, (1.0 - share) * mu
    if pos.sum() > 1e-15:
        seller_payoff = float(pos @ (v1 - c))
        if seller_payoff < -1e-12:
            raise InfeasibleTargetError(
                f"trading at v_1 loses money for the seller ({seller_payoff:.6g})",
                -seller_payoff,
            )
        branches.append(("pos", pos))
    if neg.sum() > 1e-15:
        branches.append(("neg", neg))

    labels = tuple(name for name, _ in branches)
    joint = np.zeros((len(branches), len(branches), env.n))
    for j, (_, row) in enumerate(branches):
        joint[j, j] = row
    structure = InformationStructure(labels, labels, joint)

    grid = default_price_grid(env)
    index = _grid_lookup(grid)
    k = grid.shape[0]
    sigma = np.zeros((len(branches), k))
    alpha = np.zeros((k, len(branches)))
    beliefs = price_independent_beliefs(env, structure, k)
    means = structure.buyer_posteriors() @ v
    for j, name in enumerate(labels):
        if name == "pos":
            sigma[j, index(v1)] = 1.0
            alpha[:, j] = _off_path_acceptance(env, grid)
            off_path = np.arange(k) != index(v1)
            beliefs[off_path, j] = _point_mass(env.n, 0)
        else:
            sigma[j, -1] = 1.0
            alpha[:, j] = means[j] > grid + 1e-12 * np.maximum(1.0, np.abs(grid))
    return structure, StrategyProfile(grid, sigma, alpha, beliefs)


# -- public randomization ----------------------------------------------------


def randomize_public(
    components: Sequence[Tuple[float, InformationStructure, StrategyProfile]],
    tol: float = 1e-9,
) -> Built:
    """Publicly draw one component with the given weight and play it.

    Signals are relabeled ``r{j}:{label}`` and the joint law is block-diagonal,
    so payoffs are the weighted average of the components' payoffs.
    """
    if not components:
        raise ValueError("randomize_public needs at least one component")
    weights = [float(w) for w, _, _ in components]
    if any(w < 0 for w in weights) or abs(math.fsum(weights) - 1.0) > tol:
        raise ValueError("component weights must be nonnegative and sum to 1")
    grid = components[0][2].price_grid
    n = components[0][1].n_values
    for _, structure, profile in components:
        if profile.price_grid.shape != grid.shape or not np.allclose(
            profile.price_grid, grid, rtol=0.0, atol=1e-12
        ):
            raise ValueError("components must share one price grid")
        if structure.n_values != n:
            raise ValueError("components must share one value support")

    live = [(j, c) for j, c in enumerate(components) if c[0] > 0]
    if len(live) == 1:
        _, structure, profile = live[0][1]
        return structure, profile

    seller_labels: List[str] = []
    buyer_labels: List[str] = []
    for j, (_, structure, _) in live:
        seller_labels.extend(f"r{j}:{s}" for s in structure.seller_signals)
        buyer_labels.extend(f"r{j}:{b}" for b in structure.buyer_signals)
    joint = np.zeros((len(seller_labels), len(buyer_labels), n))
    sigmas, alphas, beliefs = [], [], []
    s_off = b_off = 0
    for _, (weight, structure, profile) in live:
        n_s, n_b = structure.joint.shape[:2]
        joint[s_off : s_off + n_s, b_off : b_off + n_b] = weight * structure.joint
        sigmas.append(profile.seller_strategy)
        alphas.append(profile.buyer_strategy)
        beliefs.append(profile.beliefs)
        s_off += n_s
        b_off += n_b
    structure = InformationStructure(tuple(seller_labels), tuple(buyer_labels), joint)
    profile = StrategyProfile(
        grid,
        np.vstack(sigmas),
        np.hstack(alphas),
        np.concatenate(beliefs, axis=1),
    )
    return structure, profile
