"""Data models for trade design."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

UNINFORMED_SELLER = "uninformed_seller"
FULLY_INFORMED_BUYER = "fully_informed_buyer"
MORE_INFORMED_BUYER = "more_informed_buyer"

REGION_KINDS = ("triangle_all", "triangle_us", "triangle_fb", "negative_envelope")


def _as_float_tuple(values: Sequence[float]) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class Environment:
    """A finite trading environment: buyer values, prior and seller costs."""

    values: Tuple[float, ...]
    probs: Tuple[float, ...]
    costs: Tuple[float, ...]
    name: str = ""

    # Derived in __post_init__
    gains_from_trade: bool = field(init=False)

    def __post_init__(self):
        values = _as_float_tuple(self.values)
        probs = _as_float_tuple(self.probs)
        costs = _as_float_tuple(self.costs)

        if not values:
            raise ValueError("environment needs at least one support point")
        if not (len(values) == len(probs) == len(costs)):
            raise ValueError(
                f"values, probs and costs differ in length "
                f"({len(values)}, {len(probs)}, {len(costs)})"
            )
        if not all(math.isfinite(x) for x in values + probs + costs):
            raise ValueError("environment entries must be finite numbers")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("values must be strictly increasing")
        if any(p <= 0 for p in probs):
            raise ValueError("probabilities must be positive")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")

        if abs(total - 1.0) > 1e-12:
            probs = tuple(p / total for p in probs)

        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "costs", costs)

        margin = math.fsum(p * (v - c) for v, p, c in zip(values, self.probs, costs))
        object.__setattr__(
            self,
            "gains_from_trade",
            all(c <= v for v, c in zip(values, costs)) and margin > 0,
        )

    @property
    def n(self) -> int:
        """Number of support points."""
        return len(self.values)

    @property
    def v_low(self) -> float:
        return self.values[0]

    @property
    def v_high(self) -> float:
        return self.values[-1]

    @property
    def span(self) -> float:
        """Width of the value support, ``v_n - v_1``."""
        return self.values[-1] - self.values[0]

    @property
    def value_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def prob_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @property
    def cost_array(self) -> np.ndarray:
        return np.asarray(self.costs, dtype=float)

    @property
    def mean_value(self) -> float:
        return float(math.fsum(p * v for v, p in zip(self.values, self.probs)))

    @property
    def mean_cost(self) -> float:
        return float(math.fsum(p * c for c, p in zip(self.costs, self.probs)))

    @property
    def prior(self) -> "Belief":
        """The prior as a belief over the support."""
        return Belief(self.values, self.costs, self.probs)

    def belief(self, weights: Sequence[float]) -> "Belief":
        """Build a belief over this environment's support."""
        return Belief(self.values, self.costs, tuple(weights))


@dataclass(frozen=True)
class Belief:
    """A probability vector over an environment's value support."""

    values: Tuple[float, ...]
    costs: Tuple[float, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(self.values),) or len(self.costs) != len(self.values):
            raise ValueError("belief weights must match the support")
        if np.any(weights < -1e-12):
            raise ValueError("belief weights must be nonnegative")
        weights = np.clip(weights, 0.0, None)
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"belief weights sum to {total!r}, expected 1")
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        object.__setattr__(self, "costs", _as_float_tuple(self.costs))
        object.__setattr__(self, "weights", _as_float_tuple(weights / total))

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def support(self) -> Tuple[int, ...]:
        """Indices carrying positive mass."""
        return tuple(i for i, w in enumerate(self.weights) if w > 0.0)

    @property
    def support_values(self) -> Tuple[float, ...]:
        return tuple(self.values[i] for i in self.support)

    @property
    def mean(self) -> float:
        return float(math.fsum(w * v for v, w in zip(self.values, self.weights)))

    @property
    def mean_cost(self) -> float:
        return float(math.fsum(w * c for c, w in zip(self.costs, self.weights)))

    @property
    def lower(self) -> float:
        return self.support_values[0]

    @property
    def upper(self) -> float:
        return self.support_values[-1]

    def kinks(self) -> Tuple[float, ...]:
        return self.support_values

    def cdf(self, x: float) -> float:
        return float(sum(w for v, w in zip(self.values, self.weights) if v <= x))

    def integrated_cdf(self, x: float) -> float:
        """Return the integral of the CDF from minus infinity to ``x``."""
        return float(
            math.fsum(w * max(x - v, 0.0) for v, w in zip(self.values, self.weights))
        )


@dataclass(frozen=True)
class PayoffPoint:
    """Ex-ante (buyer, seller) payoffs."""

    pi_b: float
    pi_s: float

    def __post_init__(self):
        if not (math.isfinite(self.pi_b) and math.isfinite(self.pi_s)):
            raise ValueError("payoffs must be finite")

    def as_tuple(self) -> Tuple[float, float]:
        return (self.pi_b, self.pi_s)

    def distance(self, other: "PayoffPoint") -> float:
        return math.hypot(self.pi_b - other.pi_b, self.pi_s - other.pi_s)


@dataclass(frozen=True)
class PayoffRegion:
    """Convex polygon of implementable payoffs, vertices counterclockwise."""

    vertices: Tuple[PayoffPoint, ...]
    kind: str  # "triangle_all" | "triangle_us" | "triangle_fb" | "negative_envelope"
    labels: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind: {self.kind}")
        if not self.vertices:
            raise ValueError("a region needs at least one vertex")

    def as_array(self) -> np.ndarray:
        return np.array([v.as_tuple() for v in self.vertices], dtype=float)

    def labeled(self, letter: str) -> PayoffPoint:
        return self.vertices[self.labels[letter]]


@dataclass(frozen=True)
class IcdComponent:
    """One ICD of a decomposition, with its seller-indifference constant."""

    weight: float
    belief: Belief
    constant: float


@dataclass(frozen=True)
class IcdDecomposition:
    """Prior written as a convex combination of ICDs."""

    components: Tuple[IcdComponent, ...]

    @property
    def weights(self) -> Tuple[float, ...]:
        return tuple(c.weight for c in self.components)

    def reconstitute(self) -> np.ndarray:
        """Sum of weighted component beliefs."""
        return np.sum(
            [c.weight * c.belief.weight_array for c in self.components], axis=0
        )


@dataclass(frozen=True)
class AffineIcd:
    """Closed-form ICD for costs ``c(v) = cost_slope * v + cost_intercept``.

    The distribution has a continuous part on ``[v_lo, v_hi)`` whose survival
    function keeps the seller indifferent across all prices in the support,
    and an atom of mass ``atom_mass`` at ``v_hi``.
    """

    cost_slope: float
    cost_intercept: float
    v_lo: float
    v_hi: float
    atom_mass: float

    def __post_init__(self):
        if self.v_hi < self.v_lo:
            raise ValueError("v_hi must not lie below v_lo")

    @property
    def is_point_mass(self) -> bool:
        return self.v_hi <= self.v_lo

    def _margin(self, v: float) -> float:
        # v - c(v)
        return (1.0 - self.cost_slope) * v - self.cost_intercept

    def survival(self, v: float) -> float:
        """``1 - G(v)`` on the continuous part; 1 below ``v_lo``."""
        if v <= self.v_lo:
            return 1.0
        if self.is_point_mass or v > self.v_hi:
            return 0.0
        slope = self.cost_slope
        if abs(slope - 1.0) < 1e-12:
            return math.exp((v - self.v_lo) / self.cost_intercept)
        ratio = max(self._margin(v), 0.0) / self._margin(self.v_lo)
        if ratio == 0.0:
            return 0.0
        return ratio ** (1.0 / (slope - 1.0))

    def survival_integral(self, x: float) -> float:
        """Integral of the survival function from ``v_lo`` to ``x``."""
        if self.is_point_mass or x <= self.v_lo:
            return 0.0
        x = min(x, self.v_hi)
        slope, intercept = self.cost_slope, self.cost_intercept
        if abs(slope - 1.0) < 1e-12:
            return intercept * (math.exp((x - self.v_lo) / intercept) - 1.0)
        h0 = self._margin(self.v_lo)
        ratio = max(self._margin(x), 0.0) / h0
        if abs(slope) < 1e-12:
            return h0 * math.log(ratio) / (1.0 - slope)
        power = slope / (slope - 1.0)
        return h0 * (ratio**power - 1.0) / (power * (1.0 - slope))

    @property
    def mean(self) -> float:
        return self.v_lo + self.survival_integral(self.v_hi)

    @property
    def lower(self) -> float:
        return self.v_lo

    @property
    def upper(self) -> float:
        return self.v_hi

    def kinks(self) -> Tuple[float, ...]:
        return (self.v_lo, self.v_hi)

    def cdf(self, v: float) -> float:
        if v < self.v_lo:
            return 0.0
        if v >= self.v_hi:
            return 1.0
        return 1.0 - self.survival(v)

    def tail_mass(self, p: float) -> float:
        """Probability that the value is at least ``p``."""
        if p <= self.v_lo:
            return 1.0
        if p > self.v_hi:
            return 0.0
        if p == self.v_hi:
            return self.atom_mass
        return self.survival(p)

    def integrated_cdf(self, x: float) -> float:
        if x <= self.v_lo:
            return 0.0
        if x >= self.v_hi:
            return x - self.mean
        return (x - self.v_lo) - self.survival_integral(x)

    def seller_profit(self, p: float) -> float:
        """Expected seller profit from posting ``p`` to buyers distributed by G."""
        if p > self.v_hi:
            return 0.0
        if p <= self.v_lo:
            tail, tail_value = 1.0, self.mean
        else:
            tail = self.tail_mass(p)
            tail_value = p * tail + (
                self.survival_integral(self.v_hi) - self.survival_integral(p)
            )
        return (p - self.cost_intercept) * tail - self.cost_slope * tail_value

    def sample(self, n_points: int = 101) -> List[Tuple[float, float]]:
        """Tabulate ``(v, G(v))`` on an even grid over the support."""
        if self.is_point_mass:
            return [(self.v_lo, 1.0)]
        grid = np.linspace(self.v_lo, self.v_hi, n_points)
        return [(float(v), self.cdf(float(v))) for v in grid]


@dataclass(frozen=True)
class PStar:
    """Lowest support point of the most dispersed feasible affine ICD."""

    p_star: float
    pi_us: float
    witness: AffineIcd
    clamped: bool = False


@dataclass(frozen=True)
class BinaryRoot:
    """Solution of the two-point floor equation."""

    p: float
    pi_us: float
    method: str  # "equation" | "clamped" | "fallback"


@dataclass(frozen=True)
class FloorCertificate:
    """Uninformed-seller floor, exact or bracketed."""

    value: float
    exact: bool
    lower_bound: float
    method: str  # "degenerate" | "squeezed" | "affine" | "search"
    p_star: Optional[float] = None
    witness: Any = None

    @property
    def gap(self) -> float:
        """Distance between the reported value and the guaranteed lower bound."""
        return 0.0 if self.exact else self.value - self.lower_bound


@dataclass(frozen=True, eq=False)
class InformationStructure:
    """Finite joint distribution over (seller signal, buyer signal, value)."""

    seller_signals: Tuple[str, ...]
    buyer_signals: Tuple[str, ...]
    joint: np.ndarray  # shape (len(seller_signals), len(buyer_signals), n)

    class_tags: FrozenSet[str] = field(init=False)

    def __post_init__(self):
        joint = np.array(self.joint, dtype=float)
        seller_signals = tuple(str(s) for s in self.seller_signals)
        buyer_signals = tuple(str(b) for b in self.buyer_signals)
        if joint.ndim != 3 or joint.shape[:2] != (
            len(seller_signals),
            len(buyer_signals),
        ):
            raise ValueError(
                f"joint has shape {joint.shape}, expected "
                f"({len(seller_signals)}, {len(buyer_signals)}, n)"
            )
        if len(set(seller_signals)) != len(seller_signals) or len(
            set(buyer_signals)
        ) != len(buyer_signals):
            raise ValueError("signal labels must be unique")
        if np.any(joint < -1e-12):
            raise ValueError("joint probabilities must be nonnegative")
        joint = np.clip(joint, 0.0, None)
        total = float(joint.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"joint probabilities sum to {total!r}, expected 1")
        joint = joint / total
        joint.setflags(write=False)
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "seller_signals", seller_signals)
        object.__setattr__(self, "buyer_signals", buyer_signals)
        object.__setattr__(self, "class_tags", frozenset(self._classify()))

    def _classify(self) -> List[str]:
        tags = []
        if len(self.seller_signals) == 1:
            tags.append(UNINFORMED_SELLER)

        buyer_value = self.joint.sum(axis=0)
        buyer_mass = buyer_value.sum(axis=1)
        live = buyer_mass > 1e-15
        if np.all(buyer_value[live].max(axis=1) >= (1.0 - 1e-12) * buyer_mass[live]):
            tags.append(FULLY_INFORMED_BUYER)

        # v independent of t_s given t_b
        seller_buyer = self.joint.sum(axis=2)
        lhs = self.joint * buyer_mass[None, :, None]
        rhs = seller_buyer[:, :, None] * buyer_value[None, :, :]
        if np.all(np.abs(lhs - rhs) <= 1e-12):
            tags.append(MORE_INFORMED_BUYER)
        return tags

    @property
    def n_values(self) -> int:
        return int(self.joint.shape[2])

    @property
    def value_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 1))

    @property
    def buyer_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 2))

    def buyer_posteriors(self) -> np.ndarray:
        """``P(v | t_b)`` per buyer signal; zero rows for null signals."""
        buyer_value = self.joint.sum(axis=0)
        mass = buyer_value.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            post = np.where(mass > 0, buyer_value / np.where(mass > 0, mass, 1.0), 0.0)
        return post


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Seller pricing, buyer acceptance and buyer beliefs on a finite price grid."""

    price_grid: np.ndarray  # (k,)
    seller_strategy: np.ndarray  # (len(T_s), k)
    buyer_strategy: np.ndarray  # (k, len(T_b))
    beliefs: np.ndarray  # (k, len(T_b), n)

    def __post_init__(self):
        grid = np.array(self.price_grid, dtype=float)
        sigma = np.array(self.seller_strategy, dtype=float)
        alpha = np.array(self.buyer_strategy, dtype=float)
        beliefs = np.array(self.beliefs, dtype=float)
        k = grid.shape[0]
        if grid.ndim != 1 or k == 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("price grid must be a nonempty increasing list")
        if sigma.ndim != 2 or sigma.shape[1] != k:
            raise ValueError("seller strategy needs one column per grid price")
        if alpha.ndim != 2 or alpha.shape[0] != k:
            raise ValueError("buyer strategy needs one row per grid price")
        if beliefs.ndim != 3 or beliefs.shape[:2] != alpha.shape:
            raise ValueError("beliefs must be indexed by (price, buyer signal)")
        if np.any(sigma < -1e-12) or np.any(np.abs(sigma.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("seller strategy rows must be distributions")
        if np.any(alpha < -1e-12) or np.any(alpha > 1.0 + 1e-12):
            raise ValueError("acceptance probabilities must lie in [0, 1]")
        if np.any(beliefs < -1e-12) or np.any(
            np.abs(beliefs.sum(axis=2) - 1.0) > 1e-9
        ):
            raise ValueError("beliefs must be distributions")
        sigma = np.clip(sigma, 0.0, None)
        sigma = sigma / sigma.sum(axis=1, keepdims=True)
        beliefs = np.clip(beliefs, 0.0, None)
        beliefs = beliefs / beliefs.sum(axis=2, keepdims=True)
        for name, value in (
            ("price_grid", grid),
            ("seller_strategy", sigma),
            ("buyer_strategy", np.clip(alpha, 0.0, 1.0)),
            ("beliefs", beliefs),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def grid_size(self) -> int:
        return int(self.price_grid.shape[0])

    def price_index(self, price: float, tol: float = 1e-12) -> int:
        """Locate ``price`` on the grid."""
        idx = int(np.argmin(np.abs(self.price_grid - price)))
        if abs(self.price_grid[idx] - price) > tol * max(1.0, abs(price)):
            raise KeyError(f"price {price!r} is not on the grid")
        return idx


@dataclass(frozen=True)
class TrembleSchedule:
    """Fully mixed seller strategies converging to the equilibrium strategy.

    Signal ``s`` trembles with weight ``n ** -exponents[s]`` spread evenly over
    the grid, so ``sigma_n = (1 - n**-e) * sigma + n**-e / k``.
    """

    exponents: Tuple[float, ...]

    def __post_init__(self):
        if any(e <= 0 for e in self.exponents):
            raise ValueError("tremble exponents must be positive")
        object.__setattr__(self, "exponents", _as_float_tuple(self.exponents))

    def strategy(self, n: int, sigma: np.ndarray) -> np.ndarray:
        """Fully mixed strategy at index ``n``."""
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape[0] != len(self.exponents):
            raise ValueError("one exponent per seller signal is required")
        if n < 1:
            raise ValueError("tremble index must be at least 1")
        k = sigma.shape[1]
        weight = np.array([float(n) ** (-e) for e in self.exponents])[:, None]
        return (1.0 - weight) * sigma + weight / k


@dataclass
class VerificationReport:
    """Outcome of checking a profile against the equilibrium conditions."""

    tolerance: float
    buyer_optimal: bool = True
    buyer_gap: float = 0.0
    buyer_violation: Optional[Tuple[float, str, float]] = None  # (price, signal, gap)
    seller_optimal: bool = True
    seller_gaps: Dict[str, float] = field(default_factory=dict)
    bayes_on_path: bool = True
    bayes_gap: float = 0.0
    bayes_violation: Optional[Tuple[float, str]] = None
    price_independent: Optional[bool] = None
    price_independent_gap: Optional[float] = None
    consistency: Optional[bool] = None
    consistency_trace: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """True when every condition that was checked holds."""
        checks = [self.buyer_optimal, self.seller_optimal, self.bayes_on_path]
        checks.extend(
            flag
            for flag in (self.price_independent, self.consistency)
            if flag is not None
        )
        return all(checks)

    @property
    def seller_gap(self) -> float:
        return max(self.seller_gaps.values(), default=0.0)


@dataclass(frozen=True)
class SearchConfig:
    """Settings for the seller-profit-minimizing structure search."""

    segments: int = 4  # initial mean-grid resolution
    restarts: int = 4
    bisection_steps: int = 32  # refinement rounds
    price_grid: Optional[Tuple[float, ...]] = None
    parallel: bool = True
    seed: int = 0


@dataclass(frozen=True)
class SearchResult:
    """Best certified uninformed-seller structure found by the search."""

    upper_bound: float
    structure: InformationStructure
    profile: StrategyProfile
    restart: int  # -1 full-revelation seed, -2 affine ICD partition


@dataclass(frozen=True)
class GarbleResult:
    """Garbled structure plus the pooling diagnostics."""

    structure: InformationStructure
    profile: StrategyProfile
    z_star: float
    beta: float
    p_star: float
    pool_fraction: float

    @property
    def diagnostics(self) -> Dict[str, float]:
        return {
            "z_star": self.z_star,
            "beta": self.beta,
            "p_star": self.p_star,
            "pool_fraction": self.pool_fraction,
        }


@dataclass(frozen=True)
class DiscreteConstruction:
    """Finite-grid sequential equilibrium near a target payoff."""

    structure: InformationStructure
    profile: StrategyProfile
    trembles: TrembleSchedule
    case: int  # 1 when c(v_1) > E[c], else 2
    eta: float
    sigma_h: float
    achieved: PayoffPoint


@dataclass
class CommandResult:
    """Outcome of a CLI command."""

    status: int = 0  # 0 ok | 2 input error | 3 verification failure | 4 infeasible
    artifacts: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
