"""Equilibrium evaluation - payoffs, best responses, verification and floor search."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .environment import affine_cost_fit
from .icd import affine_p_star, partition_affine_icd
from .models import (
    UNINFORMED_SELLER,
    Environment,
    InformationStructure,
    PayoffPoint,
    SearchConfig,
    SearchResult,
    StrategyProfile,
    TrembleSchedule,
    VerificationReport,
)

logger = logging.getLogger(__name__)

DEFAULT_TREMBLE_INDICES: Tuple[int, ...] = (10, 100, 10_000)
MAX_MEAN_GRID = 512
WITNESS_GAP = 5e-4
AFFINE_RESTART = -2


class SearchConfigError(ValueError):
    """Raised when the floor search is configured with unusable settings."""


def sentinel_step(env: Environment, fraction: float = 1e-3) -> float:
    """Offset of the off-support sentinel prices below ``v_1`` and above ``v_n``."""
    if env.span > 0:
        return fraction * env.span
    return fraction * max(1.0, abs(env.v_low))


def unique_prices(prices: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    """Sort prices and merge those closer than ``tol`` (relative)."""
    out: List[float] = []
    for p in sorted(float(x) for x in prices):
        if out and abs(p - out[-1]) <= tol * max(1.0, abs(p)):
            continue
        out.append(p)
    return np.array(out, dtype=float)


def default_price_grid(
    env: Environment, extra: Sequence[float] = (), sentinel_fraction: float = 1e-3
) -> np.ndarray:
    """Support values, extra prices, and one sentinel on each side of the support."""
    h = sentinel_step(env, sentinel_fraction)
    prices = list(env.values) + [env.v_low - h, env.v_high + h] + list(extra)
    return unique_prices(prices)


def _check_dimensions(
    env: Environment, structure: InformationStructure, profile: StrategyProfile
) -> None:
    if structure.n_values != env.n:
        raise ValueError(
            f"structure has {structure.n_values} values, environment has {env.n}"
        )
    n_seller, n_buyer = len(structure.seller_signals), len(structure.buyer_signals)
    if profile.seller_strategy.shape[0] != n_seller:
        raise ValueError("seller strategy rows do not match the seller signals")
    if profile.buyer_strategy.shape[1] != n_buyer:
        raise ValueError("buyer strategy columns do not match the buyer signals")
    if profile.beliefs.shape[2] != env.n:
        raise ValueError("beliefs do not match the value support")


def payoffs(
    env: Environment, structure: InformationStructure, profile: StrategyProfile
) -> PayoffPoint:
    """Ex-ante buyer and seller payoffs of a profile."""
    _check_dimensions(env, structure, profile)
    joint = structure.joint
    sigma, alpha, grid = profile.seller_strategy, profile.buyer_strategy, profile.price_grid
    # trade[s, b, v, p]: probability of reaching (s, b, v) and trading at p
    trade = np.einsum("sbv,sp,pb->bvp", joint, sigma, alpha)
    values, costs = env.value_array, env.cost_array
    buyer = float(np.einsum("bvp,v->", trade, values) - np.einsum("bvp,p->", trade, grid))
    seller = float(np.einsum("bvp,p->", trade, grid) - np.einsum("bvp,v->", trade, costs))
    return PayoffPoint(buyer, seller)


def seller_profit_table(
    env: Environment,
    structure: InformationStructure,
    alpha: np.ndarray,
    grid: np.ndarray,
) -> np.ndarray:
    """Ex-ante profit of each seller signal at each grid price, shape ``(S, k)``."""
    joint = structure.joint
    accepted = np.einsum("sbv,pb->spv", joint, alpha)
    return accepted.sum(axis=2) * grid[None, :] - accepted @ env.cost_array


def seller_best_response_value(
    env: Environment,
    structure: InformationStructure,
    alpha: np.ndarray,
    grid: np.ndarray,
) -> np.ndarray:
    """Best ex-ante profit of each seller signal against acceptance ``alpha``."""
    return seller_profit_table(env, structure, alpha, grid).max(axis=1)


def _posterior_means(env: Environment, structure: InformationStructure) -> np.ndarray:
    post = structure.buyer_posteriors()
    means = post @ env.value_array
    null = structure.buyer_marginal <= 0
    means[null] = env.mean_value
    return means


def buyer_best_response(
    env: Environment,
    structure: InformationStructure,
    grid: np.ndarray,
    tie: str = "accept",
    tol: float = 1e-12,
) -> np.ndarray:
    """Acceptance matrix ``(k, B)`` under price-independent posterior beliefs."""
    if tie not in ("accept", "reject"):
        raise ValueError("tie must be 'accept' or 'reject'")
    means = _posterior_means(env, structure)
    grid = np.asarray(grid, dtype=float)
    diff = means[None, :] - grid[:, None]
    slack = tol * np.maximum(1.0, np.abs(grid))[:, None]
    if tie == "accept":
        return (diff >= -slack).astype(float)
    return (diff > slack).astype(float)


def price_independent_beliefs(
    env: Environment, structure: InformationStructure, k: int
) -> np.ndarray:
    """Posterior beliefs repeated at every price; null signals hold the prior."""
    post = structure.buyer_posteriors()
    null = structure.buyer_marginal <= 0
    post[null] = env.prob_array
    return np.broadcast_to(post, (k,) + post.shape).copy()


def best_response_profile(
    env: Environment,
    structure: InformationStructure,
    grid: Optional[Sequence[float]] = None,
    tie: str = "accept",
    price_choice: str = "lowest",
) -> StrategyProfile:
    """Pure-strategy profile where both sides best-respond to posterior beliefs.

    The default grid adds every buyer posterior mean to the support and
    sentinels. Among optimal prices the seller picks the lowest, or the highest
    with ``price_choice="highest"``.
    """
    if grid is None:
        grid_arr = default_price_grid(env, extra=_posterior_means(env, structure))
    else:
        grid_arr = unique_prices(grid)
    alpha = buyer_best_response(env, structure, grid_arr, tie=tie)
    profits = seller_profit_table(env, structure, alpha, grid_arr)
    sigma = np.zeros_like(profits)
    for s, row in enumerate(profits):
        best = row.max()
        optimal = np.flatnonzero(row >= best - 1e-12 * max(1.0, abs(best)))
        choice = optimal[0] if price_choice == "lowest" else optimal[-1]
        sigma[s, choice] = 1.0
    beliefs = price_independent_beliefs(env, structure, grid_arr.shape[0])
    return StrategyProfile(grid_arr, sigma, alpha, beliefs)


def _total_variation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(a - b).sum(axis=-1)


def verify_wpbe(
    env: Environment,
    structure: InformationStructure,
    profile: StrategyProfile,
    tol: float = 1e-9,
) -> VerificationReport:
    """Check buyer optimality, seller optimality and on-path Bayes consistency.

    Buyer gaps are the expected loss of the prescribed acceptance against the
    best response; seller gaps are per unit of signal probability.
    """
    _check_dimensions(env, structure, profile)
    report = VerificationReport(tolerance=tol)
    grid = profile.price_grid
    alpha, sigma, beliefs = (
        profile.buyer_strategy,
        profile.seller_strategy,
        profile.beliefs,
    )

    means = beliefs @ env.value_array  # (k, B)
    surplus_at = means - grid[:, None]
    loss = np.where(surplus_at > tol, surplus_at * (1.0 - alpha), 0.0)
    loss = np.maximum(loss, np.where(surplus_at < -tol, -surplus_at * alpha, 0.0))
    worst = np.unravel_index(int(np.argmax(loss)), loss.shape)
    report.buyer_gap = float(loss[worst])
    report.buyer_optimal = report.buyer_gap <= tol
    if not report.buyer_optimal:
        report.buyer_violation = (
            float(grid[worst[0]]),
            structure.buyer_signals[worst[1]],
            report.buyer_gap,
        )

    profits = seller_profit_table(env, structure, alpha, grid)
    realized = (sigma * profits).sum(axis=1)
    mass = structure.joint.sum(axis=(1, 2))
    for s, label in enumerate(structure.seller_signals):
        gap = float(profits[s].max() - realized[s])
        report.seller_gaps[label] = gap / mass[s] if mass[s] > 0 else 0.0
    report.seller_optimal = report.seller_gap <= tol

    reach = np.einsum("sbv,sp->pbv", structure.joint, sigma)
    cell_mass = reach.sum(axis=2)
    on_path = cell_mass > tol / grid.shape[0]
    if np.any(on_path):
        post = reach[on_path] / cell_mass[on_path][:, None]
        gaps = _total_variation(beliefs[on_path], post)
        idx = int(np.argmax(gaps))
        report.bayes_gap = float(gaps[idx])
        report.bayes_on_path = report.bayes_gap <= tol
        if not report.bayes_on_path:
            cells = np.argwhere(on_path)
            p_idx, b_idx = cells[idx]
            report.bayes_violation = (float(grid[p_idx]), structure.buyer_signals[b_idx])
    return report


def verify_price_independent(
    structure: InformationStructure, profile: StrategyProfile, tol: float = 1e-9
) -> Tuple[bool, float]:
    """Whether beliefs equal ``P(v | t_b)`` at every price for live buyer signals."""
    post = structure.buyer_posteriors()
    live = structure.buyer_marginal > 0
    if not np.any(live):
        return True, 0.0
    gaps = _total_variation(profile.beliefs[:, live, :], post[None, live, :])
    gap = float(gaps.max())
    return gap <= tol, gap


def verify_sequential(
    env: Environment,
    structure: InformationStructure,
    profile: StrategyProfile,
    trembles: TrembleSchedule,
    n_list: Sequence[int] = DEFAULT_TREMBLE_INDICES,
    tol: float = 1e-9,
) -> VerificationReport:
    """WPBE checks plus convergence of tremble-induced posteriors to the beliefs.

    The trace records, per tremble index, the largest total-variation distance
    between the prescribed beliefs and the Bayes posteriors under the fully
    mixed strategy. It must not increase and must end below ``tol``.
    """
    report = verify_wpbe(env, structure, profile, tol)
    live = structure.buyer_marginal > 0
    trace = []
    for n in sorted(n_list):
        mixed = trembles.strategy(n, profile.seller_strategy)
        reach = np.einsum("sbv,sp->pbv", structure.joint, mixed)
        cell_mass = reach.sum(axis=2, keepdims=True)
        post = reach[:, live, :] / cell_mass[:, live, :]
        gap = float(_total_variation(profile.beliefs[:, live, :], post).max())
        trace.append((int(n), gap))
    report.consistency_trace = trace
    distances = [d for _, d in trace]
    monotone = all(b <= a + 1e-15 for a, b in zip(distances, distances[1:]))
    report.consistency = bool(trace) and monotone and distances[-1] <= tol
    return report


def uniqueness_sweep(
    env: Environment,
    structure: InformationStructure,
    profile: StrategyProfile,
    p_star: float,
    tol: float = 1e-12,
) -> Dict[str, float]:
    """Best seller profit above and below ``p_star`` under both tie rules.

    Only meaningful for uninformed sellers with price-independent beliefs.
    """
    if UNINFORMED_SELLER not in structure.class_tags:
        raise ValueError("uniqueness sweep needs an uninformed seller")
    grid = profile.price_grid
    scale = tol * max(1.0, abs(p_star))
    above = grid > p_star + scale
    below = grid < p_star - scale
    result: Dict[str, float] = {}
    for tie in ("accept", "reject"):
        alpha = buyer_best_response(env, structure, grid, tie=tie)
        profits = seller_profit_table(env, structure, alpha, grid)[0]
        result[f"{tie}_above"] = float(profits[above].max()) if np.any(above) else -np.inf
        result[f"{tie}_below"] = float(profits[below].max()) if np.any(below) else -np.inf
    result["max_above"] = max(result["accept_above"], result["reject_above"])
    result["max_below"] = max(result["accept_below"], result["reject_below"])
    return result


def segmented_structure(
    env: Environment, masses: np.ndarray, prefix: str = "m"
) -> InformationStructure:
    """Uninformed-seller structure from buyer segments ``masses[k, i]``.

    Empty segments are dropped.
    """
    masses = np.clip(np.asarray(masses, dtype=float), 0.0, None)
    keep = masses.sum(axis=1) > 1e-15
    masses = masses[keep]
    labels = tuple(f"{prefix}{j}" for j in range(masses.shape[0]))
    return InformationStructure(("t0",), labels, masses[None, :, :] / masses.sum())


def _certified_payoff(
    env: Environment, structure: InformationStructure
) -> Optional[Tuple[float, StrategyProfile]]:
    profile = best_response_profile(env, structure, tie="accept")
    report = verify_wpbe(env, structure, profile)
    if not report.ok:
        logger.debug("candidate structure failed verification: %s", report)
        return None
    return payoffs(env, structure, profile).pi_s, profile


def martingale_coupling(
    env: Environment, means: np.ndarray, weights: np.ndarray
) -> Optional[np.ndarray]:
    """Split the prior into segments with the given masses and means, if possible.

    Returns the segment-by-value masses ``(K, n)``, or None when no split
    exists (the means are then not a contraction of the prior).
    """
    means = np.asarray(means, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n, K = env.n, means.shape[0]
    v, mu = env.value_array, env.prob_array
    cols = np.arange(K * n)
    seg, val = np.divmod(cols, n)
    rows = np.concatenate([val, n + seg, n + K + seg])
    data = np.concatenate([np.ones(K * n), v[val] - means[seg], np.ones(K * n)])
    a_eq = sparse.csr_matrix(
        (data, (rows, np.tile(cols, 3))), shape=(n + 2 * K, K * n)
    )
    b_eq = np.concatenate([mu, np.zeros(K), weights])
    res = linprog(
        np.zeros(K * n), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs"
    )
    if res.status != 0:
        return None
    return np.clip(res.x.reshape(K, n), 0.0, None)


def affine_partition_witness(
    env: Environment, gap: Optional[float] = None
) -> Optional[SearchResult]:
    """Certified uninformed-seller equilibrium within ``gap`` of the affine floor.

    The most dispersed feasible affine ICD is pooled into finitely many
    posterior means (see :func:`partition_affine_icd`) and realized as a split
    of the prior. The default gap is ``5e-4`` per unit of value span. Returns
    None when costs are not affine or the split cannot be certified.
    """
    if affine_cost_fit(env) is None:
        return None
    if gap is None:
        gap = WITNESS_GAP * max(1.0, env.span)
    star = affine_p_star(env)
    means, masses = partition_affine_icd(star.witness, gap)
    coupling = martingale_coupling(env, means, masses)
    if coupling is None:
        logger.warning("affine ICD partition with %d means has no split", means.size)
        return None
    structure = segmented_structure(env, coupling, prefix="g")
    certified = _certified_payoff(env, structure)
    if certified is None:
        return None
    value, profile = certified
    logger.debug(
        "affine partition: %d segments, payoff %.9g (floor %.9g)",
        len(structure.buyer_signals),
        value,
        star.pi_us,
    )
    return SearchResult(value, structure, profile, AFFINE_RESTART)


def _mean_grid_lp(
    env: Environment, grid: np.ndarray
) -> Optional[Tuple[float, np.ndarray]]:
    """Lowest worst-case seller profit over segments with means on ``grid``.

    Segment ``j`` has mean ``grid[j]``. ``A_j`` and ``C_j`` carry the mass and
    the cost of segments ``j`` and above, so posting ``grid[j]`` earns
    ``grid[j] * A_j - C_j``; every such profit is held below ``z``, which is
    minimized. Returns ``(z, masses)``.
    """
    n, L = env.n, grid.shape[0]
    v, c, mu = env.value_array, env.cost_array, env.prob_array
    nx = L * n
    ia, ic, iz = nx, nx + L, nx + 2 * L
    cols = np.arange(nx)
    seg, val = np.divmod(cols, n)
    j = np.arange(L)
    ones = np.ones(nx)

    # rows: marginals, martingale, mass recursion, cost recursion
    eq_rows = [val, n + seg, n + L + seg, n + 2 * L + seg]
    eq_cols = [cols, cols, cols, cols]
    eq_data = [ones, v[val] - grid[seg], -ones, -c[val]]
    for offset, start in ((n + L, ia), (n + 2 * L, ic)):
        eq_rows += [offset + j, offset + j[:-1]]
        eq_cols += [start + j, start + j[1:]]
        eq_data += [np.ones(L), -np.ones(L - 1)]
    n_vars = iz + 1
    a_eq = sparse.csr_matrix(
        (np.concatenate(eq_data), (np.concatenate(eq_rows), np.concatenate(eq_cols))),
        shape=(n + 3 * L, n_vars),
    )
    b_eq = np.concatenate([mu, np.zeros(3 * L)])

    a_ub = sparse.csr_matrix(
        (
            np.concatenate([grid, -np.ones(L), -np.ones(L)]),
            (np.concatenate([j, j, j]), np.concatenate([ia + j, ic + j, np.full(L, iz)])),
        ),
        shape=(L, n_vars),
    )
    objective = np.zeros(n_vars)
    objective[iz] = 1.0
    bounds = [(0.0, None)] * (nx + L) + [(None, None)] * (L + 1)
    res = linprog(
        objective,
        A_ub=a_ub,
        b_ub=np.zeros(L),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        return None
    return float(res.fun), np.clip(res.x[:nx].reshape(L, n), 0.0, None)


def _initial_mean_grid(env: Environment, config: SearchConfig, restart: int) -> np.ndarray:
    v1, vn = env.v_low, env.v_high
    if config.price_grid:
        points = [p for p in config.price_grid if v1 <= p <= vn]
    else:
        points = np.linspace(v1, vn, config.segments + 1).tolist()
    if restart > 0:
        rng = np.random.default_rng(config.seed + restart)
        points += rng.uniform(v1, vn, config.segments).tolist()
    return unique_prices(list(env.values) + list(points))


def _refine_mean_grid(grid: np.ndarray, used: np.ndarray) -> np.ndarray:
    """Add the midpoints on either side of every used mean."""
    points = list(grid)
    for j in used:
        if j > 0:
            points.append(0.5 * (grid[j - 1] + grid[j]))
        if j + 1 < grid.shape[0]:
            points.append(0.5 * (grid[j] + grid[j + 1]))
    return unique_prices(points)


def _run_restart(
    env: Environment, config: SearchConfig, restart: int
) -> Optional[SearchResult]:
    grid = _initial_mean_grid(env, config, restart)
    best: Optional[Tuple[float, np.ndarray]] = None
    for _ in range(config.bisection_steps + 1):
        solved = _mean_grid_lp(env, grid)
        if solved is None:
            break
        if best is None or solved[0] < best[0]:
            best = solved
        used = np.flatnonzero(solved[1].sum(axis=1) > 1e-12)
        refined = _refine_mean_grid(grid, used)
        if refined.shape[0] == grid.shape[0] or refined.shape[0] > MAX_MEAN_GRID:
            break
        grid = refined
    if best is None:
        return None

    structure = segmented_structure(env, best[1])
    certified = _certified_payoff(env, structure)
    if certified is None:
        return None
    value, profile = certified
    logger.debug(
        "restart %d: %d means, lp bound %.9g, certified payoff %.9g",
        restart,
        grid.shape[0],
        best[0],
        value,
    )
    return SearchResult(value, structure, profile, restart)


def min_seller_profit_search(
    env: Environment, config: Optional[SearchConfig] = None
) -> SearchResult:
    """Search uninformed-seller structures for a low certified seller payoff.

    Buyer segments are placed on a grid of candidate posterior means, and one
    sparse LP finds the split of the prior that minimizes the best profit over
    all those prices. Restart 0 starts from ``segments + 1`` evenly spaced
    means (or ``price_grid``), later restarts add seeded random means, and up
    to ``bisection_steps`` rounds halve the grid around the means in use.

    Every incumbent is re-verified as an equilibrium before its payoff counts.
    The full-revelation structure seeds the search, so the bound never exceeds
    the fully-informed-buyer floor; with affine costs the partitioned affine
    ICD is a second seed. Results are reduced by ``(payoff, restart)``.
    """
    config = config or SearchConfig()
    if config.segments < 1 or config.restarts < 1 or config.bisection_steps < 0:
        raise SearchConfigError(
            "segments and restarts must be positive, bisection_steps nonnegative"
        )
    if not env.gains_from_trade:
        raise ValueError("floor search needs gains from trade")

    seed_structure = segmented_structure(env, np.diag(env.prob_array), prefix="v")
    seed = _certified_payoff(env, seed_structure)
    if seed is None:  # pragma: no cover
        raise RuntimeError("full revelation failed equilibrium verification")
    results: List[SearchResult] = [SearchResult(seed[0], seed_structure, seed[1], -1)]

    if env.n > 1:
        affine = affine_partition_witness(env)
        if affine is not None:
            results.append(affine)
        restarts = range(config.restarts)
        if config.parallel and config.restarts > 1:
            with ThreadPoolExecutor(max_workers=min(config.restarts, 8)) as executor:
                found = list(executor.map(lambda r: _run_restart(env, config, r), restarts))
        else:
            found = [_run_restart(env, config, r) for r in restarts]
        results.extend(r for r in found if r is not None)

    best = min(results, key=lambda r: (r.upper_bound, r.restart))
    logger.info(
        "floor search: %d certified candidates, best %.9g (restart %d)",
        len(results),
        best.upper_bound,
        best.restart,
    )
    return best
