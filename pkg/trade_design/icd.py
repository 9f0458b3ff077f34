"""Incentive-compatible distributions (ICDs) and the affine floor machinery.

An ICD is a belief under which the seller earns the same expected profit at
every price in its support. Finite ICDs come from a greedy recursion; for
affine costs a closed-form continuous family is available, and its most
dispersed member that is still a mean-preserving contraction of the prior
pins down the uninformed-seller floor.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .environment import affine_cost_fit
from .models import (
    AffineIcd,
    Belief,
    BinaryRoot,
    Environment,
    IcdComponent,
    IcdDecomposition,
    PStar,
)

logger = logging.getLogger(__name__)

Distribution = Union[Belief, AffineIcd]

_BRENT_RTOL = 4 * np.finfo(float).eps


class NonAffineCostError(ValueError):
    """Raised when an affine-only routine receives non-affine costs."""


class UnboundedSupportError(RuntimeError):
    """Raised when no member of the affine ICD family reaches the prior mean."""


def seller_profit(belief: Belief, price: float) -> float:
    """Expected profit from posting ``price`` to a buyer holding ``belief``."""
    return float(
        math.fsum(
            w * (price - c)
            for v, c, w in zip(belief.values, belief.costs, belief.weights)
            if v >= price and w > 0
        )
    )


def _scale(env: Environment) -> float:
    return env.span if env.span > 0 else 1.0


def is_icd(
    env: Environment, belief: Belief, tol: float = 1e-9
) -> Tuple[bool, Optional[float]]:
    """Check seller indifference over the support of ``belief``.

    Returns:
        ``(True, constant)`` when profits at all support prices agree within
        ``tol * (v_n - v_1)`` and are nonnegative, else ``(False, None)``.
    """
    support = belief.support_values
    if not support:
        raise ValueError("belief has empty support")
    tol_abs = tol * _scale(env)
    profits = np.array([seller_profit(belief, v) for v in support])
    if float(profits.max() - profits.min()) > tol_abs or float(profits.min()) < -tol_abs:
        return False, None
    return True, float(profits.mean())


def greedy_icd(
    env: Environment, top_index: int, support: Optional[Sequence[int]] = None
) -> Belief:
    """Build the ICD topped at ``top_index`` from the points of ``support``.

    Walking down from the top, each point receives just enough mass to make the
    seller indifferent between its price and the next higher support price.
    When some lower support point has zero gains from trade, the construction
    stops at the smallest such point and the ICD lives below it.
    """
    if not 0 <= top_index < env.n:
        raise ValueError(f"top_index {top_index} outside 0..{env.n - 1}")
    indices = sorted(set(support)) if support is not None else list(range(env.n))
    if any(not 0 <= i < env.n for i in indices):
        raise ValueError("support indices out of range")
    idx = [i for i in indices if i <= top_index]
    if not idx:
        raise ValueError("support has no point at or below top_index")

    v, c = env.values, env.costs
    gap_tol = 1e-12 * _scale(env)
    if any(v[i] - c[i] < -gap_tol for i in idx):
        raise ValueError("greedy ICD needs v >= c on its support")

    zero_gap = [i for i in idx[:-1] if v[i] - c[i] <= gap_tol]
    if zero_gap:
        anchor = zero_gap[0]
        idx = [i for i in idx if i <= anchor]

    weights = np.zeros(env.n)
    weights[idx[-1]] = 1.0
    running = 1.0
    for pos in range(len(idx) - 2, -1, -1):
        i, nxt = idx[pos], idx[pos + 1]
        mass = running * (v[nxt] - v[i]) / (v[i] - c[i])
        weights[i] = mass
        running += mass
    return env.belief(weights / weights.sum())


def icd_decompose(env: Environment, tol: float = 1e-12) -> IcdDecomposition:
    """Write the prior as a convex combination of ICDs.

    Repeatedly takes the greedy ICD on the support of the residual mass, topped
    at its largest point, and removes as much of it as the residual allows.
    Each step zeroes at least one coordinate, so at most ``n`` components come
    out.
    """
    if not env.gains_from_trade:
        raise ValueError("ICD decomposition needs gains from trade (v >= c)")

    residual = env.prob_array.copy()
    components = []
    for _ in range(env.n + 1):
        support = [i for i in range(env.n) if residual[i] > 1e-14]
        if not support:
            break
        nu = greedy_icd(env, support[-1], support)
        w = nu.weight_array
        on = w > 0
        ratios = residual[on] / w[on]
        q = float(ratios.min())

        residual = residual - q * w
        tied = np.zeros(env.n, dtype=bool)
        tied[on] = ratios <= q * (1.0 + tol) + 1e-300
        residual[tied] = 0.0
        residual = np.clip(residual, 0.0, None)

        constant = seller_profit(nu, nu.lower)
        components.append(IcdComponent(q, nu, constant))
        logger.debug("ICD component %d: weight %.6g on %s", len(components), q, nu.support)

    return IcdDecomposition(tuple(components))


def seller_opt_prices(
    env: Environment, belief: Belief, tol: float = 1e-12
) -> Tuple[float, ...]:
    """Support values that maximize seller profit under ``belief``."""
    profits = np.array([seller_profit(belief, v) for v in env.values])
    best = float(profits.max())
    scale = max(1.0, float(np.max(np.abs(env.value_array))))
    keep = profits >= best - tol * scale
    return tuple(v for v, k in zip(env.values, keep) if k)


def affine_icd(
    cost_slope: float,
    cost_intercept: float,
    v_lo: float,
    prior_mean: float,
    v_support_max: float,
) -> AffineIcd:
    """Member of the affine ICD family starting at ``v_lo`` with mean ``prior_mean``.

    Raises:
        UnboundedSupportError: If the family member never reaches the mean
            within ``v_support_max * (1 + 1e6)``, or has no gains at ``v_lo``.
    """
    slack = 1e-12 * max(1.0, abs(prior_mean))
    if v_lo > prior_mean + slack:
        raise ValueError("v_lo lies above the prior mean")
    if prior_mean - v_lo <= slack:
        return AffineIcd(cost_slope, cost_intercept, prior_mean, prior_mean, 1.0)

    h0 = (1.0 - cost_slope) * v_lo - cost_intercept
    if h0 <= 0:
        raise UnboundedSupportError(f"no gains from trade at v_lo={v_lo!r}")

    upper = v_lo + (1.0 + 1e6) * max(abs(v_support_max), abs(v_lo), 1.0)
    if cost_slope > 1.0 + 1e-12:
        # margin v - c(v) hits zero here
        upper = min(upper, cost_intercept / (1.0 - cost_slope))

    def excess(top: float) -> float:
        return AffineIcd(cost_slope, cost_intercept, v_lo, top, 0.0).mean - prior_mean

    if excess(upper) < 0:
        raise UnboundedSupportError(
            f"affine ICD from v_lo={v_lo!r} cannot reach mean {prior_mean!r}"
        )
    v_hi = brentq(excess, v_lo, upper, xtol=1e-14, rtol=_BRENT_RTOL, maxiter=500)
    shape = AffineIcd(cost_slope, cost_intercept, v_lo, v_hi, 0.0)
    return AffineIcd(cost_slope, cost_intercept, v_lo, v_hi, shape.survival(v_hi))


def _as_distribution(obj: Union[Environment, Distribution]) -> Distribution:
    return obj.prior if isinstance(obj, Environment) else obj


def mpc_check(
    candidate: Union[Environment, Distribution],
    reference: Union[Environment, Distribution],
    tol: float = 1e-9,
) -> bool:
    """Test whether ``candidate`` is a mean-preserving contraction of ``reference``.

    Equal means, and the integrated CDF of the candidate never exceeds that of
    the reference. The difference is convex between the reference's kinks, so
    checking kinks and support bounds suffices for finite references; a dense
    grid is added when the reference is continuous.
    """
    g = _as_distribution(candidate)
    f = _as_distribution(reference)
    tol_abs = tol * max(1.0, f.upper - f.lower, g.upper - g.lower)
    if abs(g.mean - f.mean) > tol_abs:
        return False

    points = set(f.kinks()) | set(g.kinks())
    points |= {f.lower, f.upper, g.lower, g.upper}
    if isinstance(f, AffineIcd) and not f.is_point_mass:
        lo, hi = min(points), max(points)
        points |= set(np.linspace(lo, hi, 513).tolist())
    return all(g.integrated_cdf(x) - f.integrated_cdf(x) <= tol_abs for x in points)


def affine_p_star(env: Environment, tol: float = 1e-12, max_steps: int = 200) -> PStar:
    """Locate the lowest feasible start of the affine ICD family.

    The smallest ``v_lo`` whose family member is a mean-preserving contraction
    of the prior is found by bisection; it is the price every buyer accepts in
    the seller-worst equilibrium, so the floor is ``p_star - E[c]``.

    Raises:
        NonAffineCostError: If costs are not affine in values.
    """
    fit = affine_cost_fit(env)
    if fit is None:
        raise NonAffineCostError("affine_p_star needs affine costs")
    slope, intercept = fit
    mean = env.mean_value
    v1 = env.v_low
    span = _scale(env)

    if env.n == 1 or mean - v1 <= 1e-12 * span:
        witness = AffineIcd(slope, intercept, mean, mean, 1.0)
        return PStar(mean, mean - env.mean_cost, witness)

    def member(x: float) -> Optional[AffineIcd]:
        try:
            return affine_icd(slope, intercept, x, mean, env.v_high)
        except (UnboundedSupportError, ValueError):
            return None

    def feasible(x: float) -> bool:
        g = member(x)
        return g is not None and mpc_check(g, env.prior, tol=tol)

    if feasible(v1):
        witness = member(v1)
        assert witness is not None
        logger.debug("p_star clamped to the lowest value %r", v1)
        return PStar(v1, v1 - env.mean_cost, witness, clamped=True)

    lo = max(v1, slope * mean + intercept)
    hi = mean
    for _ in range(max_steps):
        if hi - lo <= 1e-13 * span:
            break
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    witness = member(hi)
    assert witness is not None
    return PStar(hi, hi - env.mean_cost, witness)


def binary_p(env: Environment) -> BinaryRoot:
    """Solve the two-point floor equation for binary environments.

    The root ``p`` is the lowest start of the affine ICD whose atom sits at the
    high value. When the equation has no root in the bracket, the bisection of
    :func:`affine_p_star` is used instead.
    """
    if env.n != 2:
        raise ValueError("binary_p needs exactly two support points")
    (v1, v2), (c1, c2) = env.values, env.costs
    slope = (c2 - c1) / (v2 - v1)
    intercept = c1 - slope * v1
    mean_cost = env.mean_cost
    top_margin = v2 - c2

    def equation(p: float) -> float:
        margin = (1.0 - slope) * p - intercept
        if abs(slope - 1.0) < 1e-12:
            return (p - mean_cost) - (-intercept) * math.exp((v2 - p) / intercept)
        if margin <= 0:
            return math.inf
        power = 1.0 / (slope - 1.0)
        return margin**power * (p - mean_cost) - top_margin ** (slope * power)

    def fallback(reason: str) -> BinaryRoot:
        logger.info("binary equation unusable (%s); bisecting instead", reason)
        star = affine_p_star(env)
        return BinaryRoot(star.p_star, star.pi_us, "fallback")

    if abs(slope) < 1e-12:
        return fallback("constant costs")

    lo = max(mean_cost, v1 - 1e-9 * max(1.0, abs(v1)))
    hi = env.mean_value
    try:
        f_lo, f_hi = equation(lo), equation(hi)
    except (OverflowError, ZeroDivisionError, ValueError):
        return fallback("overflow")
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)):
        return fallback("non-finite bracket")
    if max(abs(f_lo), abs(f_hi)) < 1e-14:
        return fallback("flat equation")

    if f_lo == 0.0:
        p, method = lo, "equation"
    elif f_lo < 0 < f_hi or f_hi < 0 < f_lo:
        p = brentq(equation, lo, hi, xtol=1e-15, rtol=_BRENT_RTOL, maxiter=500)
        method = "equation"
    elif f_lo > 0 and f_hi > 0 and lo >= v1 - 2e-9 * max(1.0, abs(v1)):
        p, method = v1, "clamped"
    else:
        return fallback("no sign change")

    p = max(p, v1)
    return BinaryRoot(p, p - mean_cost, method)


def _stieltjes_tail(
    dist: Union[Environment, Distribution],
    p: float,
    cost_slope: float,
    cost_intercept: float,
) -> Tuple[float, float]:
    """Return ``P(X >= p)`` and ``E[(p - c(X)) 1{X >= p}]``."""
    dist = _as_distribution(dist)

    def cost(s: float) -> float:
        return cost_slope * s + cost_intercept

    if isinstance(dist, Belief):
        tail = math.fsum(w for v, w in zip(dist.values, dist.weights) if v >= p)
        value = math.fsum(
            w * (p - cost(v)) for v, w in zip(dist.values, dist.weights) if v >= p
        )
        return tail, value

    tail = dist.tail_mass(p)
    if dist.is_point_mass:
        return tail, tail * (p - cost(dist.v_lo))

    def density(s: float) -> float:
        return dist.survival(s) / dist._margin(s)

    lo = max(p, dist.v_lo)
    continuous = 0.0
    if lo < dist.v_hi:
        continuous, _ = quad(
            lambda s: (p - cost(s)) * density(s), lo, dist.v_hi, epsabs=1e-14, limit=200
        )
    atom = dist.atom_mass * (p - cost(dist.v_hi)) if dist.v_hi >= p else 0.0
    return tail, continuous + atom


def verify_linear_identities(
    f: Union[Environment, Distribution],
    g: Union[Environment, Distribution],
    p: float,
    cost_slope: float,
    cost_intercept: float,
) -> Tuple[float, float]:
    """Residuals of the integration-by-parts identity for ``F`` and ``G``.

    For each distribution X and ``v_bar`` the larger upper bound,
    ``slope * int_p^v_bar X = -P(X >= p)(p - c(p)) + slope (v_bar - p)
    + int_[p, v_bar] (p - c(s)) dX(s)``. Both residuals vanish for affine costs.
    """
    f_dist, g_dist = _as_distribution(f), _as_distribution(g)
    v_bar = max(f_dist.upper, g_dist.upper)
    cost_p = cost_slope * p + cost_intercept

    def residual(dist: Distribution) -> float:
        lhs = cost_slope * (dist.integrated_cdf(v_bar) - dist.integrated_cdf(p))
        tail, stieltjes = _stieltjes_tail(dist, p, cost_slope, cost_intercept)
        rhs = -tail * (p - cost_p) + cost_slope * (v_bar - p) + stieltjes
        return lhs - rhs

    return residual(f_dist), residual(g_dist)


def partition_affine_icd(
    witness: AffineIcd, gap: float, max_segments: int = 4096
) -> Tuple[np.ndarray, np.ndarray]:
    """Pool an affine ICD into finitely many posterior means.

    The continuous part is cut into intervals ``[a, b)``, each becoming one
    mean ``m``. Posting ``m`` then earns the ICD's constant profit plus
    ``(m - a) * S(a)``, so ``b`` is pushed as far as that excess stays at or
    below ``gap``. The atom at ``v_hi`` keeps its own mean.

    Returns:
        ``(means, masses)`` in increasing order of mean.

    Raises:
        ValueError: If ``gap`` is not positive or needs more than
            ``max_segments`` intervals.
    """
    if gap <= 0:
        raise ValueError("gap must be positive")
    if witness.is_point_mass:
        return np.array([witness.v_lo]), np.array([1.0])

    survival, integral = witness.survival, witness.survival_integral
    hi = witness.v_hi

    def excess(a: float, b: float) -> float:
        mass = survival(a) - survival(b)
        if mass <= 0:
            return 0.0
        return (integral(b) - integral(a) - (b - a) * survival(b)) / mass * survival(a)

    means: List[float] = []
    masses: List[float] = []
    a = witness.v_lo
    while a < hi:
        if len(means) >= max_segments:
            raise ValueError(
                f"gap {gap:.3g} needs more than {max_segments} segments"
            )
        if excess(a, hi) <= gap:
            b = hi
        else:
            b = brentq(
                lambda x, lo: excess(lo, x) - gap,
                a,
                hi,
                args=(a,),
                xtol=1e-14,
                maxiter=500,
            )
        mass = survival(a) - survival(b)
        if mass > 0:
            spread = integral(b) - integral(a) - (b - a) * survival(b)
            means.append(a + spread / mass)
            masses.append(mass)
        a = b
    if witness.atom_mass > 0:
        means.append(hi)
        masses.append(witness.atom_mass)
    return np.array(means), np.array(masses)
