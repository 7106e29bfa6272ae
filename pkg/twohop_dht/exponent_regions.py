"""
Type-II error-exponent regions of the two-hop network.

Every region reduces to two single-hop curves: the best information an
auxiliary channel can forward about the observer's sequence for a given
description rate (transmitter->relay and relay->receiver). Corners of the
fixed-rate and equal-epsilon regions are read off those curves at (boosted)
budgets; the unequal-epsilon frontiers are scalarized (theta1 fixed, theta2
maximized) and solved as linear programs over the curves' hypographs, after
which every chosen rate is realized by an actual channel.
"""
import enum
import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from . import solvers
from .base import InfeasibleTheta1, RegionModel
from .probability import (ConditionalPmf, Side, TwoHopSource, channel_joint,
                          entropy, mutual_information, mutual_information_table)
from .utils import derive_seed, seed_random_state

logger = logging.getLogger(__name__)

VERIFY_TOL = 1e-9
FRONTIER_SLACK = 1e-6
ORACLE_MAX_CELLS = 4_000_000

__all__ = [
    'InfeasibleTheta1', 'UnsupportedAlphabet', 'Regime', 'Variant', 'RateBudget',
    'EpsilonPair', 'ExponentPair', 'AuxiliarySolution', 'FrontierPoint', 'Frontier',
    'OptimizerConfig', 'RateCurve', 'max_forwarded_info', 'theta1_fix', 'theta2_fix',
    'fixed_corner', 'region_equal_eps', 'max_exponents', 'frontier_eps2_greater',
    'frontier_eps1_greater', 'brute_force_oracle', 'evaluate_channels',
    'verify_solution',
]


class UnsupportedAlphabet(ValueError):
    pass


class LargeEpsilonWarning(UserWarning):
    pass


class Regime(enum.Enum):
    EQUAL = "equal"
    EPS2_GREATER = "eps2_greater"
    EPS1_GREATER = "eps1_greater"
    FIXED = "fixed"


class Variant(enum.Enum):
    FULL = "full"
    TIED_U1 = "tied_u1"
    TIED_U2 = "tied_u2"
    TIED_BOTH = "tied_both"

    @property
    def ties_u1(self) -> bool:
        return self in (Variant.TIED_U1, Variant.TIED_BOTH)

    @property
    def ties_u2(self) -> bool:
        return self in (Variant.TIED_U2, Variant.TIED_BOTH)


def _non_negative(name, value):
    if not np.isfinite(value) or value < 0:
        raise ValueError("%s must be a finite non-negative number, got %r" % (name, value))


@dataclass(frozen=True)
class RateBudget:
    r1: float
    r2: float

    def __post_init__(self):
        _non_negative("r1", self.r1)
        _non_negative("r2", self.r2)


@dataclass(frozen=True)
class EpsilonPair:
    eps1: float
    eps2: float

    def __post_init__(self):
        for name in ("eps1", "eps2"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ValueError("%s must lie in [0, 1), got %r" % (name, value))
            if value >= 0.5:
                msg = "%s=%g >= 1/2: outside the range where the fixed-rate exponents are known" \
                      % (name, value)
                logger.warning(msg)
                warnings.warn(msg, LargeEpsilonWarning)

    @classmethod
    def equal(cls, eps: float) -> "EpsilonPair":
        return cls(eps, eps)

    @property
    def regime(self) -> Regime:
        if self.eps1 == self.eps2:
            return Regime.EQUAL
        return Regime.EPS2_GREATER if self.eps2 > self.eps1 else Regime.EPS1_GREATER


@dataclass(frozen=True)
class ExponentPair:
    theta1: float
    theta2: float

    def __post_init__(self):
        _non_negative("theta1", self.theta1)
        _non_negative("theta2", self.theta2)


CHANNEL_NAMES = ("u1", "u1_prime", "u1_dprime", "u2", "u2_prime", "u2_dprime")

REGIME_CHANNELS = {
    Regime.FIXED: ("u1", "u2"),
    Regime.EQUAL: ("u1", "u2"),
    Regime.EPS2_GREATER: ("u1_prime", "u1_dprime", "u2_prime"),
    Regime.EPS1_GREATER: ("u1_prime", "u1_dprime", "u2_prime", "u2_dprime"),
}


def channel_side(name: str) -> Side:
    return Side.TX_RELAY if name.startswith("u1") else Side.RELAY_RX


@dataclass(frozen=True, eq=False)
class AuxiliarySolution:
    """Auxiliary channels of one operating point and what they achieve.

    ``rate_split`` is (r1', r1'', r2', r2''), the budget shares funding the
    primed and double-primed descriptions; it is only set for the unequal
    epsilon regimes.
    """
    channels: Mapping[str, ConditionalPmf]
    achieved: ExponentPair
    rates_used: RateBudget
    regime: Regime
    rate_split: Optional[Tuple[float, float, float, float]] = None
    variant: Variant = Variant.FULL

    def __post_init__(self):
        unknown = set(self.channels) - set(CHANNEL_NAMES)
        if unknown:
            raise ValueError("unknown auxiliary channel names %s" % sorted(unknown))


@dataclass(frozen=True)
class OptimizerConfig:
    u_cardinality: Optional[int] = None
    grid_resolution: float = 0.05
    refine_iterations: int = 3
    tolerance: float = 1e-7
    seed: int = 0
    max_evals: int = 1500
    max_grid_cells: int = 200_000
    curve_step: float = 0.025
    lp_refinements: int = 2
    lp_solver: Optional[str] = "CVXOPT"
    n_jobs: int = 1
    verbose: int = 0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive, got %r" % (self.tolerance,))
        if not 0 < self.grid_resolution <= 1:
            raise ValueError("grid_resolution must lie in (0, 1], got %r"
                             % (self.grid_resolution,))
        if self.refine_iterations < 0 or self.lp_refinements < 0:
            raise ValueError("iteration counts must be non-negative")
        if self.u_cardinality is not None and self.u_cardinality < 1:
            raise ValueError("u_cardinality must be positive, got %r" % (self.u_cardinality,))
        if self.curve_step <= 0:
            raise ValueError("curve_step must be positive, got %r" % (self.curve_step,))

    def u_card_for(self, input_size: int, obs_size: int) -> int:
        if self.u_cardinality is None:
            return input_size + 1
        if self.u_cardinality > input_size * obs_size + 2:
            raise ValueError("u_cardinality %d exceeds the cardinality bound %d"
                             % (self.u_cardinality, input_size * obs_size + 2))
        return self.u_cardinality

    @property
    def cache_key(self) -> tuple:
        return (self.u_cardinality, self.grid_resolution, self.refine_iterations,
                self.tolerance, self.seed, self.max_evals, self.max_grid_cells,
                self.curve_step)


# Channel search on one hop

@dataclass(frozen=True, eq=False)
class _ChannelGrid:
    channels: np.ndarray
    rates: np.ndarray
    values: np.ndarray
    sampled: bool


_GRID_CACHE: Dict[tuple, _ChannelGrid] = {}


def _channel_grid(src: TwoHopSource, side: Side, u_card: int, cfg: OptimizerConfig):
    key = (src.fingerprint, side, u_card, cfg.grid_resolution, cfg.max_grid_cells, cfg.seed)
    if key not in _GRID_CACHE:
        p_in, obs = src.hop(side)
        channels, sampled = solvers.channel_grid(
            p_in.alphabet_size, u_card, cfg.grid_resolution, cfg.max_grid_cells,
            random_state=seed_random_state(derive_seed(cfg.seed, 0 if side is Side.TX_RELAY else 1)))
        rates, values = solvers.batch_information(p_in.probs, obs.rows, channels)
        _GRID_CACHE[key] = _ChannelGrid(channels, rates, values, sampled)
        logger.debug("built %s channel grid with %d cells", side.value, len(channels))
    return _GRID_CACHE[key]


def max_forwarded_info(src: TwoHopSource, side, rate_cap: float,
                       cfg: Optional[OptimizerConfig] = None,
                       warm_start: Optional[ConditionalPmf] = None,
                       random_state=None) -> Tuple[ConditionalPmf, float]:
    """Best I(U;observation) over P_U|input with I(U;input) <= rate_cap.

    Transmitter->relay maximizes I(U1;Y) s.t. I(U1;X) <= cap, relay->receiver
    maximizes I(U2;Z) s.t. I(U2;Y) <= cap.
    """
    side = Side.parse(side)
    cfg = cfg or OptimizerConfig()
    _non_negative("rate_cap", rate_cap)
    p_in, obs = src.hop(side)
    u_card = cfg.u_card_for(p_in.alphabet_size, obs.output_size)
    if rate_cap == 0:
        return ConditionalPmf.constant(p_in.alphabet_size, u_card), 0.

    grid = _channel_grid(src, side, u_card, cfg)
    scores = np.where(grid.rates <= rate_cap, grid.values, -np.inf)
    order = np.argsort(-scores, kind='stable')
    n_starts = max(cfg.refine_iterations, 1)
    starts = [grid.channels[i] for i in order[:n_starts] if np.isfinite(scores[i])]
    if warm_start is not None and warm_start.rows.shape == (p_in.alphabet_size, u_card):
        starts.insert(0, warm_start.rows)
    if grid.sampled and random_state is not None:
        rs = seed_random_state(random_state)
        starts.append(rs.dirichlet(np.ones(u_card), size=p_in.alphabet_size))
    if not starts:
        starts = [ConditionalPmf.constant(p_in.alphabet_size, u_card).rows]

    sol = solvers.solve_channel(p_in.probs, obs.rows, rate_cap, starts,
                                tolerance=cfg.tolerance, max_evals=cfg.max_evals,
                                refine=cfg.refine_iterations > 0)
    logger.debug("%s cap=%.6g: value %.12f at rate %.12f (%s)", side.value, rate_cap,
                 sol.value, sol.rate, sol.status)
    return ConditionalPmf(sol.channel), sol.value


def theta1_fix(src: TwoHopSource, r1: float, cfg: Optional[OptimizerConfig] = None) -> float:
    return max_forwarded_info(src, Side.TX_RELAY, r1, cfg)[1]


def theta2_fix(src: TwoHopSource, r: RateBudget, cfg: Optional[OptimizerConfig] = None) -> float:
    return theta1_fix(src, r.r1, cfg) + max_forwarded_info(src, Side.RELAY_RX, r.r2, cfg)[1]


# Recomputing and checking solutions

def _info(src: TwoHopSource, name: str, channel: ConditionalPmf) -> Tuple[float, float]:
    joint = channel_joint(src, channel_side(name), channel)
    return (mutual_information_table(joint.sum(axis=2)),
            mutual_information_table(joint.sum(axis=1)))


def _weights(regime: Regime, eps: Optional[EpsilonPair]) -> Dict[str, float]:
    if regime is Regime.FIXED:
        return {"u1": 1., "u2": 1.}
    if eps is None:
        raise ValueError("regime %s needs an EpsilonPair" % regime.value)
    e1, e2 = eps.eps1, eps.eps2
    if regime is Regime.EQUAL:
        return {"u1": 1. - e1, "u2": 1. - e1}
    if regime is Regime.EPS2_GREATER:
        return {"u1_prime": 1. - e2, "u1_dprime": e2 - e1, "u2_prime": 1. - e2}
    return {"u1_prime": 1. - e1, "u1_dprime": e1 - e2,
            "u2_prime": 1. - e1, "u2_dprime": e1 - e2}


def evaluate_channels(src: TwoHopSource, channels: Mapping[str, ConditionalPmf],
                      eps: Optional[EpsilonPair], regime: Regime):
    """(achieved exponents, expected rates used, per-channel (I(U;in), I(U;obs)))."""
    info = {name: _info(src, name, channels[name]) for name in REGIME_CHANNELS[regime]}
    weights = _weights(regime, eps)
    used1 = sum(w * info[k][0] for k, w in weights.items() if k.startswith("u1"))
    used2 = sum(w * info[k][0] for k, w in weights.items() if k.startswith("u2"))
    obs = {k: v[1] for k, v in info.items()}
    if regime in (Regime.FIXED, Regime.EQUAL):
        theta1 = obs["u1"]
        theta2 = obs["u1"] + obs["u2"]
    elif regime is Regime.EPS2_GREATER:
        theta1 = min(obs["u1_prime"], obs["u1_dprime"])
        theta2 = obs["u1_prime"] + obs["u2_prime"]
    else:
        theta1 = obs["u1_prime"]
        theta2 = min(obs["u1_prime"] + obs["u2_prime"], obs["u1_dprime"] + obs["u2_dprime"])
    return ExponentPair(theta1, theta2), RateBudget(used1, used2), info


def verify_solution(src: TwoHopSource, sol: AuxiliarySolution, r: RateBudget,
                    eps: Optional[EpsilonPair], regime: Regime) -> bool:
    """Recompute every information term from the stored channels and check the regime constraints."""
    try:
        achieved, used, info = evaluate_channels(src, sol.channels, eps, regime)
    except (KeyError, ValueError) as e:
        logger.info("solution does not evaluate under regime %s: %s", regime.value, e)
        return False

    failures = []
    if used.r1 > r.r1 + VERIFY_TOL or used.r2 > r.r2 + VERIFY_TOL:
        failures.append("expected rates (%.12g, %.12g) exceed budget (%.12g, %.12g)"
                        % (used.r1, used.r2, r.r1, r.r2))
    if abs(achieved.theta1 - sol.achieved.theta1) > VERIFY_TOL \
            or abs(achieved.theta2 - sol.achieved.theta2) > VERIFY_TOL:
        failures.append("stored exponents (%.12g, %.12g) differ from recomputed (%.12g, %.12g)"
                        % (sol.achieved.theta1, sol.achieved.theta2,
                           achieved.theta1, achieved.theta2))
    if sol.rate_split is not None:
        r1p, r1pp, r2p, r2pp = sol.rate_split
        if min(sol.rate_split) < -VERIFY_TOL:
            failures.append("negative rate share in %s" % (sol.rate_split,))
        if abs(r1p + r1pp - r.r1) > VERIFY_TOL or abs(r2p + r2pp - r.r2) > VERIFY_TOL:
            failures.append("rate split %s does not sum to the budget" % (sol.rate_split,))
        shares = {"u1_prime": r1p, "u1_dprime": r1pp, "u2_prime": r2p, "u2_dprime": r2pp}
        for name, w in _weights(regime, eps).items():
            if w * info[name][0] > shares[name] + VERIFY_TOL:
                failures.append("%s needs rate %.12g but is funded %.12g"
                                % (name, w * info[name][0], shares[name]))
    for msg in failures:
        logger.info("verification failed: %s", msg)
    return not failures


# Equal-epsilon and fixed-rate corners

def _corner(src, caps, weights, regime, cfg, eps=None):
    u1, _ = max_forwarded_info(src, Side.TX_RELAY, caps[0], cfg)
    u2, _ = max_forwarded_info(src, Side.RELAY_RX, caps[1], cfg)
    channels = {"u1": u1, "u2": u2}
    achieved, used, _ = evaluate_channels(src, channels, eps, regime)
    return achieved, AuxiliarySolution(channels, achieved, used, regime)


def fixed_corner(src: TwoHopSource, r: RateBudget,
                 cfg: Optional[OptimizerConfig] = None) -> Tuple[ExponentPair, AuxiliarySolution]:
    """Corner of the maximum-rate (fixed) exponents rectangle."""
    return _corner(src, (r.r1, r.r2), None, Regime.FIXED, cfg)


def region_equal_eps(src: TwoHopSource, r: RateBudget, eps,
                     cfg: Optional[OptimizerConfig] = None) -> Tuple[ExponentPair, AuxiliarySolution]:
    """Corner of the rectangle region for eps1 = eps2: the fixed-rate corner at budget r/(1-eps)."""
    if not isinstance(eps, EpsilonPair):
        eps = EpsilonPair.equal(eps)
    if eps.regime is not Regime.EQUAL:
        raise ValueError("region_equal_eps needs eps1 == eps2, got %s" % (eps,))
    boost = 1. / (1. - eps.eps1)
    return _corner(src, (r.r1 * boost, r.r2 * boost), None, Regime.EQUAL, cfg, eps)


def max_exponents(src: TwoHopSource, r: RateBudget, eps: float,
                  cfg: Optional[OptimizerConfig] = None) -> ExponentPair:
    return region_equal_eps(src, r, eps, cfg)[0]


# Rate-exponent curves

class RateCurve():
    """Sampled rate-exponent curve of one hop, read through its upper concave hull.

    Knots map a rate cap to (value, channel). The hull is what the region
    programs see; knots are added wherever a program lands between them.
    """

    def __init__(self, src: TwoHopSource, side, cfg: Optional[OptimizerConfig] = None):
        self.src = src
        self.side = Side.parse(side)
        self.cfg = cfg or OptimizerConfig()
        p_in, obs = src.hop(self.side)
        self.rate_max = entropy(p_in)
        self.value_max = mutual_information(obs.joint_with(p_in))
        self._knots: Dict[float, Tuple[float, ConditionalPmf]] = {}
        self._hull = None

    def copy(self) -> "RateCurve":
        other = RateCurve.__new__(RateCurve)
        other.__dict__.update(self.__dict__)
        other._knots = dict(self._knots)
        return other

    def _clip(self, rate):
        return round(float(min(max(rate, 0.), self.rate_max)), 12)

    def sample(self) -> "RateCurve":
        grid = np.arange(0., self.rate_max, self.cfg.curve_step)
        return self.ensure(np.append(grid, self.rate_max))

    def ensure(self, rates) -> "RateCurve":
        missing = sorted({self._clip(r) for r in rates} - set(self._knots))
        if not missing:
            return self

        def _knot(rate):
            warm = self.channel_near(rate)
            return rate, max_forwarded_info(self.src, self.side, rate, self.cfg, warm_start=warm)

        if self.cfg.n_jobs == 1 or len(missing) < 4:
            results = [_knot(rate) for rate in missing]
        else:
            results = Parallel(n_jobs=self.cfg.n_jobs, verbose=self.cfg.verbose)(
                delayed(_knot)(rate) for rate in missing)
        for rate, (channel, value) in results:
            self._knots[rate] = (value, channel)
        self._hull = None
        return self

    def channel_near(self, rate: float) -> Optional[ConditionalPmf]:
        below = [k for k in self._knots if k <= rate]
        if not below:
            return None
        return self._knots[max(below)][1]

    @property
    def knots(self) -> Tuple[np.ndarray, np.ndarray]:
        rates = np.array(sorted(self._knots))
        return rates, np.array([self._knots[k][0] for k in rates])

    def hull(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._hull is None:
            rates, values = self.knots
            values = np.maximum.accumulate(values)
            keep: List[int] = []
            for i in range(len(rates)):
                while len(keep) >= 2:
                    a, b = keep[-2], keep[-1]
                    cross = (rates[b] - rates[a]) * (values[i] - values[a]) \
                        - (values[b] - values[a]) * (rates[i] - rates[a])
                    if cross < 0:
                        break
                    keep.pop()
                keep.append(i)
            self._hull = (rates[keep], values[keep])
        return self._hull

    def __call__(self, rate: float) -> float:
        rates, values = self.hull()
        return float(np.interp(min(rate, self.rate_max), rates, values))

    def inverse(self, theta: float) -> float:
        """Smallest rate whose hull value reaches theta (inf when out of reach)."""
        rates, values = self.hull()
        if theta > values[-1]:
            return np.inf
        i = int(np.searchsorted(values, theta, side='left'))
        if i == 0:
            return float(rates[0])
        return float(rates[i - 1] + (theta - values[i - 1]) * (rates[i] - rates[i - 1])
                     / (values[i] - values[i - 1]))

    def segments(self) -> List[Tuple[float, float]]:
        """(slope, intercept) pairs whose lower envelope is the hull on [0, rate_max]."""
        rates, values = self.hull()
        segs = []
        for k in range(len(rates) - 1):
            slope = (values[k + 1] - values[k]) / (rates[k + 1] - rates[k])
            segs.append((slope, values[k] - slope * rates[k]))
        segs.append((0., float(values[-1])))
        return segs


_CURVE_CACHE: Dict[tuple, RateCurve] = {}


def rate_curve(src: TwoHopSource, side, cfg: Optional[OptimizerConfig] = None) -> RateCurve:
    """Shared, sampled curve; callers that add knots work on a copy."""
    side = Side.parse(side)
    cfg = cfg or OptimizerConfig()
    key = (src.fingerprint, side, cfg.cache_key)
    if key not in _CURVE_CACHE:
        logger.info("sampling %s rate curve", side.value)
        _CURVE_CACHE[key] = RateCurve(src, side, cfg).sample()
    return _CURVE_CACHE[key]


# Unequal-epsilon frontiers

class _Program():
    """Small LP assembled by variable name, handed to solvers.solve_lp."""

    def __init__(self):
        self.names: List[str] = []
        self._le: List[Tuple[Dict[str, float], float]] = []
        self._eq: List[Tuple[Dict[str, float], float]] = []

    def var(self, name: str) -> str:
        self.names.append(name)
        return name

    def le(self, coeffs: Dict[str, float], rhs: float):
        self._le.append((coeffs, rhs))

    def eq(self, coeffs: Dict[str, float], rhs: float):
        self._eq.append((coeffs, rhs))

    def hypograph(self, t: str, a: str, curve: RateCurve):
        self.le({a: -1.}, 0.)
        for slope, intercept in curve.segments():
            self.le({t: 1., a: -slope}, intercept)

    def _matrix(self, rows):
        index = {name: i for i, name in enumerate(self.names)}
        A = np.zeros((len(rows), len(self.names)))
        b = np.zeros(len(rows))
        for j, (coeffs, rhs) in enumerate(rows):
            for name, coef in coeffs.items():
                A[j, index[name]] += coef
            b[j] = rhs
        return A, b

    def maximize(self, objective: Dict[str, float], solver) -> Optional[Dict[str, float]]:
        c = -self._matrix([(objective, 0.)])[0][0]
        G, h = self._matrix(self._le)
        C, d = self._matrix(self._eq)
        status, x = solvers.solve_lp(c, G, h, C, d, solver=solver)
        if status in ("optimal", "optimal_inaccurate") and x is not None:
            return dict(zip(self.names, np.asarray(x, dtype=np.float64)))
        if status not in ("infeasible", "infeasible_inaccurate"):
            logger.warning("LP finished with status %s", status)
        return None


@dataclass(frozen=True)
class _Hop:
    side: Side
    budget: float
    w_prime: float
    w_dprime: float

    @property
    def tag(self) -> str:
        return "1" if self.side is Side.TX_RELAY else "2"


@dataclass(frozen=True, eq=False)
class FrontierPoint:
    theta1: float
    theta2: float
    solution: AuxiliarySolution


@dataclass(frozen=True, eq=False)
class Frontier:
    points: Tuple[FrontierPoint, ...]
    regime: Regime
    variant: Variant
    infeasible: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def label(self) -> str:
        if self.regime in (Regime.EPS2_GREATER, Regime.EPS1_GREATER):
            return "achievable"
        return "optimal"

    @property
    def theta1s(self) -> np.ndarray:
        return np.array([p.theta1 for p in self.points])

    @property
    def theta2s(self) -> np.ndarray:
        return np.array([p.theta2 for p in self.points])

    def theta2_at(self, theta1: float) -> Optional[float]:
        for p in self.points:
            if abs(p.theta1 - theta1) <= 1e-12:
                return p.theta2
        return None

    def to_rows(self) -> List[dict]:
        return [{"theta1": p.theta1, "theta2": p.theta2,
                 "rate_used_1": p.solution.rates_used.r1,
                 "rate_used_2": p.solution.rates_used.r2,
                 "variant": self.variant.value} for p in self.points]


class _UnequalEpsRegion(RegionModel):
    regime: Regime

    def __init__(self, src: TwoHopSource, r: RateBudget, eps: EpsilonPair,
                 variant: Variant, cfg: OptimizerConfig):
        super().__init__(n_jobs=cfg.n_jobs, verbose=cfg.verbose, seed=cfg.seed)
        if eps.regime is not self.regime:
            raise ValueError("epsilons %s belong to regime %s, not %s"
                             % (eps, eps.regime.value, self.regime.value))
        self.src = src
        self.r = r
        self.eps = eps
        self.variant = variant
        self.cfg = cfg
        self.hops = self._hops()
        self.curves = {Side.TX_RELAY: rate_curve(src, Side.TX_RELAY, cfg),
                       Side.RELAY_RX: rate_curve(src, Side.RELAY_RX, cfg)}
        for hop in self.hops:
            self.curves[hop.side] = self.curves[hop.side].copy().ensure(self._anchors(hop))

    @staticmethod
    def _anchors(hop: _Hop):
        anchors = [hop.budget, hop.budget / hop.w_prime]
        if hop.w_dprime > 0:
            anchors += [hop.budget / (hop.w_prime + hop.w_dprime), hop.budget / hop.w_dprime]
        return anchors

    def _choices(self, hop: _Hop, tied: bool):
        if hop.w_dprime == 0:
            return ("single",)
        if tied:
            return ("tied", "zero")
        return ("free", "tied", "zero")

    def _options(self):
        tied = (self.variant.ties_u1, self.variant.ties_u2)
        return list(itertools.product(*(self._choices(h, t) for h, t in zip(self.hops, tied))))

    def _hops(self) -> Tuple[_Hop, _Hop]:
        raise NotImplementedError

    def _objective(self, prog: _Program, theta1: float) -> Dict[str, float]:
        raise NotImplementedError

    def _program(self, theta1, option, curves) -> _Program:
        prog = _Program()
        for hop, choice in zip(self.hops, option):
            k = hop.tag
            a1, t1 = prog.var("a%sp" % k), prog.var("t%sp" % k)
            prog.hypograph(t1, a1, curves[hop.side])
            if hop.w_dprime == 0:
                prog.le({a1: hop.w_prime}, hop.budget)
                continue
            a2, t2 = prog.var("a%spp" % k), prog.var("t%spp" % k)
            prog.hypograph(t2, a2, curves[hop.side])
            prog.le({a1: hop.w_prime, a2: hop.w_dprime}, hop.budget)
            if choice == "tied":
                prog.eq({a1: 1., a2: -1.}, 0.)
                prog.eq({t1: 1., t2: -1.}, 0.)
            elif choice == "zero":
                prog.eq({a2: 1.}, 0.)
                prog.eq({t2: 1.}, 0.)
        return prog

    def _solve_program(self, theta1, option, curves):
        values = None
        for _ in range(self.cfg.lp_refinements + 1):
            prog = self._program(theta1, option, curves)
            objective = self._objective(prog, theta1)
            values = prog.maximize(objective, self.cfg.lp_solver)
            if values is None:
                return None, None
            added = False
            for hop in self.hops:
                rates = [values[n] for n in ("a%sp" % hop.tag, "a%spp" % hop.tag) if n in values]
                before = len(curves[hop.side]._knots)
                curves[hop.side].ensure(rates)
                added |= len(curves[hop.side]._knots) > before
            if not added:
                break
        score = sum(values[n] * c for n, c in objective.items())
        return values, score

    def _realize(self, values, option, curves, random_state) -> AuxiliarySolution:
        channels: Dict[str, ConditionalPmf] = {}
        split: List[float] = []
        for hop, choice in zip(self.hops, option):
            k = hop.tag

            def _channel(cap):
                cap = max(cap, 0.)
                return max_forwarded_info(self.src, hop.side, cap, self.cfg,
                                          warm_start=curves[hop.side].channel_near(cap),
                                          random_state=random_state)[0]

            if choice == "single":
                channels["u%s_prime" % k] = _channel(hop.budget / hop.w_prime)
                split += [hop.budget, 0.]
            elif choice == "tied":
                cap = hop.budget / (hop.w_prime + hop.w_dprime)
                channels["u%s_prime" % k] = channels["u%s_dprime" % k] = _channel(cap)
                split += [hop.w_prime * cap, hop.budget - hop.w_prime * cap]
            elif choice == "zero":
                channels["u%s_prime" % k] = _channel(hop.budget / hop.w_prime)
                p_in, obs = self.src.hop(hop.side)
                channels["u%s_dprime" % k] = ConditionalPmf.constant(
                    p_in.alphabet_size, self.cfg.u_card_for(p_in.alphabet_size, obs.output_size))
                split += [hop.budget, 0.]
            else:
                r_prime = float(np.clip(hop.w_prime * values["a%sp" % k], 0., hop.budget))
                r_dprime = hop.budget - r_prime
                channels["u%s_prime" % k] = _channel(r_prime / hop.w_prime)
                channels["u%s_dprime" % k] = _channel(r_dprime / hop.w_dprime)
                split += [r_prime, r_dprime]
        achieved, used, _ = evaluate_channels(self.src, channels, self.eps, self.regime)
        return AuxiliarySolution(channels, achieved, used, self.regime,
                                 rate_split=tuple(split), variant=self.variant)

    def frontier_point(self, theta1: float, seed: int) -> AuxiliarySolution:
        random_state = seed_random_state(seed)
        candidates = []
        for option in self._options():
            curves = {side: curve.copy() for side, curve in self.curves.items()}
            values, score = self._solve_program(theta1, option, curves)
            if values is not None:
                candidates.append((score, option, values, curves))
        if not candidates:
            raise InfeasibleTheta1("no auxiliary channels reach theta1=%.12g within budget (%g, %g)"
                                   % (theta1, self.r.r1, self.r.r2))

        best = None
        for score, option, values, curves in sorted(candidates, key=lambda c: -c[0]):
            if best is not None and score < best.achieved.theta2 - FRONTIER_SLACK:
                break
            sol = self._realize(values, option, curves, random_state)
            if sol.achieved.theta1 < theta1 - FRONTIER_SLACK:
                logger.debug("option %s realized theta1=%.12g below %.12g", option,
                             sol.achieved.theta1, theta1)
                continue
            if best is None or sol.achieved.theta2 > best.achieved.theta2:
                best = sol
        if best is None:
            raise InfeasibleTheta1("realized channels fall short of theta1=%.12g" % theta1)
        return best

    def frontier(self, theta1_grid, on_infeasible: str = "raise") -> Frontier:
        if on_infeasible not in ("raise", "skip"):
            raise ValueError("on_infeasible must be 'raise' or 'skip', got %r" % (on_infeasible,))
        results = self.trace(theta1_grid)
        infeasible = tuple(t for t, sol, _ in results if sol is None)
        if infeasible and on_infeasible == "raise":
            raise InfeasibleTheta1("infeasible theta1 values: %s"
                                   % ", ".join("%.12g" % t for t in infeasible))
        points = [FrontierPoint(t, sol.achieved.theta2, sol) for t, sol, _ in results
                  if sol is not None]
        # a solution reaching a larger theta1 also serves every smaller one
        for i in reversed(range(len(points) - 1)):
            if points[i + 1].theta2 > points[i].theta2:
                points[i] = FrontierPoint(points[i].theta1, points[i + 1].theta2,
                                          points[i + 1].solution)
        return Frontier(tuple(points), self.regime, self.variant, infeasible)


class Eps2GreaterRegion(_UnequalEpsRegion):
    """eps2 > eps1: the transmitter may describe X with a second channel U1''.

    theta1 <= min(I(U1';Y), I(U1'';Y)), theta2 <= I(U1';Y) + I(U2';Z),
    R1 >= (1-eps2) I(U1';X) + (eps2-eps1) I(U1'';X), R2 >= (1-eps2) I(U2';Y).
    """
    regime = Regime.EPS2_GREATER

    def __init__(self, src, r, eps, variant, cfg):
        if variant.ties_u2:
            logger.info("variant %s: the relay uses a single channel when eps2 > eps1,"
                        " so only the U1 tie applies", variant.value)
        super().__init__(src, r, eps, variant, cfg)

    def _hops(self):
        e1, e2 = self.eps.eps1, self.eps.eps2
        return (_Hop(Side.TX_RELAY, self.r.r1, 1. - e2, e2 - e1),
                _Hop(Side.RELAY_RX, self.r.r2, 1. - e2, 0.))

    def _objective(self, prog, theta1):
        floor = theta1 - FRONTIER_SLACK
        prog.le({"t1p": -1.}, -floor)
        prog.le({"t1pp": -1.}, -floor)
        return {"t1p": 1., "t2p": 1.}


class Eps1GreaterRegion(_UnequalEpsRegion):
    """eps1 > eps2: both the transmitter and the relay split their budgets.

    theta1 <= I(U1';Y), theta2 <= min(I(U1';Y) + I(U2';Z), I(U1'';Y) + I(U2'';Z)),
    Ri >= (1-eps1) I(Ui';.) + (eps1-eps2) I(Ui'';.).
    """
    regime = Regime.EPS1_GREATER

    def _hops(self):
        e1, e2 = self.eps.eps1, self.eps.eps2
        return (_Hop(Side.TX_RELAY, self.r.r1, 1. - e1, e1 - e2),
                _Hop(Side.RELAY_RX, self.r.r2, 1. - e1, e1 - e2))

    def _objective(self, prog, theta1):
        w = prog.var("w")
        prog.le({"t1p": -1.}, -(theta1 - FRONTIER_SLACK))
        prog.le({w: 1., "t1p": -1., "t2p": -1.}, 0.)
        prog.le({w: 1., "t1pp": -1., "t2pp": -1.}, 0.)
        return {w: 1.}


def _frontier(cls, src, r, eps, theta1_grid, variant, cfg, on_infeasible):
    cfg = cfg or OptimizerConfig()
    variant = Variant(variant) if not isinstance(variant, Variant) else variant
    model = cls(src, r, eps, variant, cfg)
    return model.frontier(theta1_grid, on_infeasible=on_infeasible)


def frontier_eps2_greater(src: TwoHopSource, r: RateBudget, eps: EpsilonPair, theta1_grid,
                          variant=Variant.FULL, cfg: Optional[OptimizerConfig] = None,
                          on_infeasible: str = "raise") -> Frontier:
    return _frontier(Eps2GreaterRegion, src, r, eps, theta1_grid, variant, cfg, on_infeasible)


def frontier_eps1_greater(src: TwoHopSource, r: RateBudget, eps: EpsilonPair, theta1_grid,
                          variant=Variant.FULL, cfg: Optional[OptimizerConfig] = None,
                          on_infeasible: str = "raise") -> Frontier:
    return _frontier(Eps1GreaterRegion, src, r, eps, theta1_grid, variant, cfg, on_infeasible)


# Verification oracle

def brute_force_oracle(src: TwoHopSource, side, rate_cap: float, grid_resolution: float,
                       u_cardinality: int = 2) -> float:
    """Exhaustive lattice search for max I(U;observation) s.t. I(U;input) <= rate_cap."""
    side = Side.parse(side)
    _non_negative("rate_cap", rate_cap)
    p_in, obs = src.hop(side)
    if p_in.alphabet_size > 4 or u_cardinality > 3:
        raise UnsupportedAlphabet("oracle handles inputs up to 4 symbols and |U| <= 3, got %d and %d"
                                  % (p_in.alphabet_size, u_cardinality))
    if rate_cap == 0:
        return 0.
    lattice = solvers.simplex_lattice(u_cardinality, grid_resolution)
    shape = (len(lattice),) * p_in.alphabet_size
    cells = int(np.prod(shape, dtype=np.int64))
    if cells > ORACLE_MAX_CELLS:
        raise ValueError("oracle grid of %d cells is too large; use a coarser resolution" % cells)
    best = 0.
    for start in range(0, cells, solvers.BATCH):
        idx = np.stack(np.unravel_index(np.arange(start, min(start + solvers.BATCH, cells)),
                                        shape), axis=1)
        rates, values = solvers.batch_information(p_in.probs, obs.rows, lattice[idx])
        feasible = values[rates <= rate_cap + 1e-12]
        if len(feasible):
            best = max(best, float(feasible.max()))
    return best
