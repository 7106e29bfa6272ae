"""
Finite-blocklength simulation of the two-hop testing schemes.

The basic scheme: the transmitter sends the index of a codeword jointly
typical with x (or "0"), the relay tests that codeword against y and, when it
accepts, forwards the index of a codeword jointly typical with y; the
receiver tests that codeword against z. The variable-length wrappers pick,
per transmitter observation, between a degenerate zero-rate branch S, the
primed scheme and (unequal epsilons) a double-primed scheme, announced to the
next terminal through the message flags.
"""
import enum
import functools
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import binom
from tqdm import tqdm

from ..exponent_regions import (AuxiliarySolution, EpsilonPair, RateBudget, Regime,
                                REGIME_CHANNELS, channel_side, evaluate_channels)
from ..probability import (Pmf, TwoHopSource, joint_type_counts, sample_categorical,
                           typicality_mask)
from ..utils import derive_seed, seed_random_state
from .bitstrings import (DEGENERATE, BitString, Frame, frame_message, parse_message,
                         string_decode, string_encode)
from .codebook import Codebook, codebook_for_channel, joint_typical_indices
from .stats import SimulationStats, fit_exponent

logger = logging.getLogger(__name__)

TYPICAL_DRAWS = 100_000


class InfeasibleTarget(UserWarning):
    pass


class Branch(enum.Enum):
    S = "S"
    DPRIME = "Dprime"
    DDPRIME = "Ddprime"


@dataclass(frozen=True)
class PartitionRule:
    s_prob: float
    d2_prob: float
    seed: int = 0

    def __post_init__(self):
        for name in ("s_prob", "d2_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError("%s must lie in [0, 1], got %r" % (name, getattr(self, name)))
        if self.s_prob + self.d2_prob > 1 + 1e-12:
            raise ValueError("s_prob + d2_prob = %g exceeds 1" % (self.s_prob + self.d2_prob))


@dataclass(frozen=True, eq=False)
class SchemeParams:
    src: TwoHopSource
    regime: Regime
    n: int
    mu: float
    eps: EpsilonPair
    channels: AuxiliarySolution
    partition_seed: int = 0
    codebook_seed: int = 0
    noise_seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("blocklength must be positive, got %r" % (self.n,))
        if self.mu <= 0:
            raise ValueError("mu must be positive, got %r" % (self.mu,))
        if self.regime is Regime.FIXED:
            raise ValueError("the fixed-rate regime has no variable-length scheme")
        if self.eps.regime is not self.regime:
            raise ValueError("epsilons %s do not belong to regime %s"
                             % (self.eps, self.regime.value))
        missing = set(REGIME_CHANNELS[self.regime]) - set(self.channels.channels)
        if missing:
            raise ValueError("regime %s needs channels %s" % (self.regime.value, sorted(missing)))

    @staticmethod
    def default_mu(n: int) -> float:
        return n ** (-1. / 3.)

    @property
    def flagged(self) -> bool:
        return self.regime is not Regime.EQUAL


@dataclass(frozen=True)
class TrialOutcome:
    hyp: int
    h_hat_y: int
    h_hat_z: int
    len_m1: int
    len_m2: int
    branch: Branch
    typical: bool = True

    def __post_init__(self):
        if self.len_m1 < 1 or self.len_m2 < 1:
            raise ValueError("transmitted messages hold at least one bit")

    def to_dict(self) -> dict:
        return {"hyp": self.hyp, "h_hat_y": self.h_hat_y, "h_hat_z": self.h_hat_z,
                "len_m1": self.len_m1, "len_m2": self.len_m2, "branch": self.branch.value,
                "typical": self.typical}


SchemeCodebooks = Mapping[str, Codebook]


def build_codebooks(params: SchemeParams) -> Dict[str, Codebook]:
    books = {}
    for i, name in enumerate(REGIME_CHANNELS[params.regime]):
        books[name] = codebook_for_channel(
            params.src, channel_side(name), params.channels.channels[name], params.n,
            params.mu, derive_seed(params.codebook_seed, i))
        logger.info("codebook %s: %d codewords", name, books[name].size)
    return books


def partition_rule_for(params: SchemeParams) -> PartitionRule:
    """Targets Pr[S] = min(eps) - mu (clamped at 0) and Pr[D''] = |eps2 - eps1|."""
    e1, e2 = params.eps.eps1, params.eps.eps2
    s_prob = min(e1, e2) - params.mu
    if s_prob < 0:
        logger.warning("min(eps)-mu = %g < 0: the degenerate branch is never used", s_prob)
        s_prob = 0.
    return PartitionRule(s_prob, abs(e2 - e1), seed=params.partition_seed)


# Basic scheme

def _typical_input(seq, joint: np.ndarray, mu: float) -> bool:
    p = joint.sum(axis=0)
    counts = np.bincount(np.asarray(seq, dtype=np.int64), minlength=len(p))
    return bool(typicality_mask(counts, p, len(seq), mu))


def _pair_typical(u, seq, joint: np.ndarray, mu: float) -> bool:
    counts = joint_type_counts([u, seq], joint.shape)
    return bool(typicality_mask(counts, joint, len(seq), mu))


def tx_encode_basic(x_seq, codebook: Codebook, mu: float, random_state=None) -> BitString:
    """string(m) for a random index m jointly typical with the input, else "0"."""
    if not _typical_input(x_seq, codebook.enc_joint, mu):
        return DEGENERATE
    indices = joint_typical_indices(codebook, x_seq, codebook.enc_joint, mu)
    if len(indices) == 0:
        return DEGENERATE
    rs = seed_random_state(random_state)
    return string_encode(int(indices[rs.randint(len(indices))]))


def _accepts(seq, m: BitString, codebook: Codebook, mu: float) -> bool:
    u = codebook.codeword(string_decode(m))
    return _pair_typical(u, seq, codebook.dec_joint, mu)


def relay_step_basic(y_seq, m1: BitString, cb1: Codebook, cb2: Codebook, mu: float,
                     random_state=None) -> Tuple[int, BitString]:
    if m1 == DEGENERATE:
        return 1, DEGENERATE
    if not _accepts(y_seq, m1, cb1, mu):
        return 1, DEGENERATE
    return 0, tx_encode_basic(y_seq, cb2, mu, random_state)


def rx_decide_basic(z_seq, m2: BitString, cb2: Codebook, mu: float) -> int:
    if m2 == DEGENERATE:
        return 1
    return 0 if _accepts(z_seq, m2, cb2, mu) else 1


# Partition of the transmitter's observations

def typical_set_probability(p_x: Pmf, n: int, mu: float, seed: int = 0,
                            draws: int = TYPICAL_DRAWS) -> float:
    """Pr[X^n strongly typical]: exact for binary alphabets, Monte Carlo otherwise."""
    return _typical_set_probability(p_x.probs.tobytes(), n, mu, seed, draws)


@functools.lru_cache(maxsize=None)
def _typical_set_probability(key: bytes, n: int, mu: float, seed: int, draws: int) -> float:
    probs = np.frombuffer(key, dtype=np.float64)
    if len(probs) == 2:
        k = np.arange(n + 1)
        counts = np.stack((n - k, k), axis=1)
        mask = typicality_mask(counts, probs, n, mu)
        return float(binom.pmf(k[mask], n, probs[1]).sum())
    rs = seed_random_state(seed)
    hits = 0
    for start in range(0, draws, 10_000):
        rows = min(10_000, draws - start)
        x = sample_categorical(rs, probs, (rows, n))
        offsets = (np.arange(rows) * len(probs))[:, None]
        counts = np.bincount((x + offsets).ravel(), minlength=rows * len(probs)).reshape(
            rows, len(probs))
        hits += int(typicality_mask(counts, probs, n, mu).sum())
    return hits / draws


@functools.lru_cache(maxsize=None)
def _thinning(s_prob: float, p_typical: float) -> float:
    if s_prob > p_typical:
        msg = "Pr[S]=%g exceeds Pr[typical set]=%g; capping S at the typical set" \
              % (s_prob, p_typical)
        logger.warning(msg)
        warnings.warn(msg, InfeasibleTarget)
        return 1.
    return s_prob / p_typical if p_typical > 0 else 0.


def _hash_uniforms(seed: int, x_seq) -> Tuple[float, float]:
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed).to_bytes(8, 'little', signed=False))
    h.update(np.asarray(x_seq, dtype=np.uint8).tobytes())
    digest = h.digest()
    return (int.from_bytes(digest[:8], 'little') / 2. ** 64,
            int.from_bytes(digest[8:], 'little') / 2. ** 64)


def partition_assign(x_seq, rule: PartitionRule, p_x: Pmf, mu: float,
                     typical_prob: Optional[float] = None) -> Branch:
    """Branch of x^n, a deterministic function of (rule.seed, x^n).

    Typical sequences join S with probability s_prob / Pr[typical set]; every
    other sequence is double-primed with probability d2_prob / (1 - Pr[S]).
    """
    n = len(x_seq)
    if typical_prob is None:
        typical_prob = typical_set_probability(p_x, n, mu)
    q_s = _thinning(rule.s_prob, typical_prob)
    s_eff = min(rule.s_prob, typical_prob)
    u_s, u_d = _hash_uniforms(rule.seed % 2 ** 64, x_seq)
    counts = np.bincount(np.asarray(x_seq, dtype=np.int64), minlength=p_x.alphabet_size)
    if u_s < q_s and typicality_mask(counts, p_x.probs, n, mu):
        return Branch.S
    if s_eff < 1 and u_d < rule.d2_prob / (1. - s_eff):
        return Branch.DDPRIME
    return Branch.DPRIME


# Variable-length wrappers

def _transmit(params: SchemeParams, books, branch: Branch, x, rs) -> BitString:
    if branch is Branch.S:
        return DEGENERATE
    if not params.flagged:
        return tx_encode_basic(x, books["u1"], params.mu, rs)
    if branch is Branch.DDPRIME:
        # a failed encoding still announces the double-primed branch
        payload = tx_encode_basic(x, books["u1_dprime"], params.mu, rs)
        return frame_message(Frame.DPRIMED, None if payload == DEGENERATE else payload)
    payload = tx_encode_basic(x, books["u1_prime"], params.mu, rs)
    return DEGENERATE if payload == DEGENERATE else frame_message(Frame.PRIMED, payload)


def _relay(params: SchemeParams, books, y, m1: BitString, rs) -> Tuple[int, BitString]:
    if not params.flagged:
        return relay_step_basic(y, m1, books["u1"], books["u2"], params.mu, rs)
    frame, payload = parse_message(m1, flagged=True)
    if frame is Frame.DEGENERATE:
        return 1, DEGENERATE
    if len(payload) == 0:
        return 1, frame_message(Frame.DPRIMED)
    if frame is Frame.PRIMED:
        h_y, inner = relay_step_basic(y, payload, books["u1_prime"], books["u2_prime"],
                                      params.mu, rs)
        return h_y, DEGENERATE if inner == DEGENERATE else frame_message(Frame.PRIMED, inner)
    if params.regime is Regime.EPS2_GREATER:
        h_y = 0 if _accepts(y, payload, books["u1_dprime"], params.mu) else 1
        return h_y, frame_message(Frame.DPRIMED)
    # eps1 > eps2: always declares 1, the tentative decision only drives M2
    _, inner = relay_step_basic(y, payload, books["u1_dprime"], books["u2_dprime"],
                                params.mu, rs)
    return 1, frame_message(Frame.DPRIMED, None if inner == DEGENERATE else inner)


def _receive(params: SchemeParams, books, z, m2: BitString) -> int:
    if not params.flagged:
        return rx_decide_basic(z, m2, books["u2"], params.mu)
    frame, payload = parse_message(m2, flagged=True)
    if frame is Frame.DEGENERATE or len(payload) == 0:
        return 1
    name = "u2_prime" if frame is Frame.PRIMED else "u2_dprime"
    return rx_decide_basic(z, payload, books[name], params.mu)


def run_trial(params: SchemeParams, rule: PartitionRule, codebooks: SchemeCodebooks,
              hyp: int, trial_seed: int, typical_prob: Optional[float] = None,
              branch: Optional[Branch] = None) -> TrialOutcome:
    """One draw of (x, y, z) under ``hyp`` pushed through the scheme.

    ``branch`` overrides the partition, for exercising a single branch. The
    outcome keeps the assigned branch and flags whether x^n was typical.
    """
    rs = seed_random_state(trial_seed)
    x, y, z = params.src.sample(hyp, params.n, rs)
    counts = np.bincount(x, minlength=params.src.p_x.alphabet_size)
    typical = bool(typicality_mask(counts, params.src.p_x.probs, params.n, params.mu))
    if branch is None:
        branch = partition_assign(x, rule, params.src.p_x, params.mu, typical_prob)
    if branch is Branch.S:
        return TrialOutcome(hyp, 1, 1, 1, 1, Branch.S, typical)
    m1 = _transmit(params, codebooks, branch, x, rs)
    h_y, m2 = _relay(params, codebooks, y, m1, rs)
    h_z = _receive(params, codebooks, z, m2)
    return TrialOutcome(hyp, h_y, h_z, len(m1), len(m2), branch, typical)


def _run_chunk(params, rule, codebooks, hyp, master_seed, indices, typical_prob, verbose):
    return [run_trial(params, rule, codebooks, hyp, derive_seed(master_seed, t, hyp),
                      typical_prob)
            for t in tqdm(indices, ascii=True, desc="Trials H=%d" % hyp,
                          disable=verbose == 0)]


def estimate_errors(params: SchemeParams, rule: PartitionRule, trials: int, master_seed: int,
                    codebooks: Optional[SchemeCodebooks] = None, transcript=None,
                    n_jobs: int = 1, verbose: int = 0) -> SimulationStats:
    """Empirical type-I/II errors (H=0 / H=1 trials) and expected lengths (under H=0)."""
    if trials < 1:
        raise ValueError("need at least one trial, got %r" % (trials,))
    if codebooks is None:
        codebooks = build_codebooks(params)
    typical_prob = typical_set_probability(params.src.p_x, params.n, params.mu,
                                           seed=params.noise_seed)

    outcomes = {}
    for hyp in (0, 1):
        if n_jobs == 1:
            outcomes[hyp] = _run_chunk(params, rule, codebooks, hyp, master_seed,
                                       range(trials), typical_prob, verbose)
        else:
            chunks = np.array_split(np.arange(trials), abs(n_jobs) * 4)
            parts = Parallel(n_jobs=n_jobs, verbose=verbose)(
                delayed(_run_chunk)(params, rule, codebooks, hyp, master_seed,
                                    chunk.tolist(), typical_prob, 0)
                for chunk in chunks if len(chunk))
            outcomes[hyp] = [o for part in parts for o in part]

    if transcript is not None:
        write_transcript(transcript, outcomes)
    return SimulationStats.from_outcomes(outcomes[0], outcomes[1])


def write_transcript(target, outcomes: Mapping[int, List[TrialOutcome]]):
    """Newline-delimited JSON, one record per trial."""
    def _write(fp):
        for hyp in (0, 1):
            for t, outcome in enumerate(outcomes[hyp]):
                record = dict(outcome.to_dict(), trial_index=t)
                fp.write(json.dumps(record, sort_keys=True) + "\n")

    if hasattr(target, "write"):
        _write(target)
    else:
        with open(target, "w") as fp:
            _write(fp)


# Blocklength sweeps

@dataclass(frozen=True)
class ExponentSweep:
    """Simulation statistics along a blocklength grid, with fitted type-II slopes."""
    ns: Tuple[int, ...]
    mus: Tuple[float, ...]
    stats: Tuple[SimulationStats, ...]

    def fitted_exponent(self, name: str = "beta2") -> Optional[float]:
        betas = [getattr(s, name + "_hat") for s in self.stats]
        try:
            return fit_exponent(self.ns, betas)
        except ValueError as e:
            logger.warning("no %s exponent: %s", name, e)
            return None

    def to_dict(self) -> dict:
        return {"points": [dict(s.to_dict(), n=n, mu=mu)
                           for n, mu, s in zip(self.ns, self.mus, self.stats)],
                "fitted_beta1": self.fitted_exponent("beta1"),
                "fitted_beta2": self.fitted_exponent("beta2")}


def sweep_blocklengths(params: SchemeParams, ns: Sequence[int], trials: int, master_seed: int,
                       mu: Optional[float] = None, n_jobs: int = 1,
                       verbose: int = 0) -> ExponentSweep:
    """Rerun ``params`` at each blocklength; mu defaults to n^(-1/3) per point."""
    ns = tuple(int(n) for n in ns)
    if len(ns) < 2 or sorted(set(ns)) != list(ns):
        raise ValueError("need at least two increasing blocklengths, got %r" % (ns,))
    mus, results = [], []
    for n in ns:
        point = replace(params, n=n, mu=mu if mu is not None else SchemeParams.default_mu(n))
        rule = partition_rule_for(point)
        logger.info("sweep point n=%d mu=%.4g", n, point.mu)
        mus.append(point.mu)
        results.append(estimate_errors(point, rule, trials, derive_seed(master_seed, n),
                                       n_jobs=n_jobs, verbose=verbose))
    return ExponentSweep(ns, tuple(mus), tuple(results))


# Rate accounting

def _information(params: SchemeParams) -> Dict[str, float]:
    _, _, info = evaluate_channels(params.src, params.channels.channels, params.eps,
                                   params.regime)
    return {name: v[0] for name, v in info.items()}


def _branch_weights(params: SchemeParams):
    e1, e2, mu = params.eps.eps1, params.eps.eps2, params.mu
    if params.regime is Regime.EQUAL:
        return {"u1": 1 - e1 + mu, "u2": 1 - e2 + mu}
    if params.regime is Regime.EPS2_GREATER:
        return {"u1_prime": 1 - e2 + mu, "u1_dprime": e2 - e1, "u2_prime": 1 - e2 + mu}
    return {"u1_prime": 1 - e1 + mu, "u1_dprime": e1 - e2,
            "u2_prime": 1 - e1 + mu, "u2_dprime": e1 - e2}


def scheme_rates(params: SchemeParams) -> RateBudget:
    """Rates the scheme is designed for: sum of branch weight * (I(U;input) + 2 mu)."""
    info = _information(params)
    rates = {"u1": 0., "u2": 0.}
    for name, w in _branch_weights(params).items():
        rates[name[:2]] += w * (info[name] + 2 * params.mu)
    return RateBudget(rates["u1"], rates["u2"])


def _payload_bits(n: int, rate: float) -> int:
    return max(int(math.ceil(2. ** (n * rate) - 1e-9)), 1).bit_length()


def length_bound(params: SchemeParams, rule: Optional[PartitionRule] = None) -> Tuple[float, float]:
    """Upper bounds on E[len(M1)] and E[len(M2)] in bits under H=0.

    Each branch is charged its flag plus the longest index of its codebook;
    the degenerate branch costs one bit.
    """
    rule = rule or partition_rule_for(params)
    info = _information(params)
    n, mu = params.n, params.mu
    s, d2 = rule.s_prob, rule.d2_prob
    d1 = 1. - s - d2

    def bits(name):
        return _payload_bits(n, info[name] + mu)

    if params.regime is Regime.EQUAL:
        return s + (1 - s) * bits("u1"), s + (1 - s) * bits("u2")
    len1 = s + d1 * (2 + bits("u1_prime")) + d2 * (2 + bits("u1_dprime"))
    if params.regime is Regime.EPS2_GREATER:
        len2 = s + d1 * (2 + bits("u2_prime")) + d2 * 2
    else:
        len2 = s + d1 * (2 + bits("u2_prime")) + d2 * (2 + bits("u2_dprime"))
    return len1, len2


def min_blocklength(params: SchemeParams) -> int:
    """Smallest n for which the flag and degenerate bits fit inside the mu rate slack."""
    e1, e2, mu = params.eps.eps1, params.eps.eps2, params.mu
    if params.regime is Regime.EQUAL:
        need = [(e1 - mu) / ((1 - e1 + mu) * mu)]
    elif params.regime is Regime.EPS2_GREATER:
        need = [(2 - e1 + mu) / ((1 - e1 + mu) * mu), (2 - e1 + mu) / ((1 - e2 + mu) * mu)]
    else:
        need = [(2 - e2 + mu) / ((1 - e2 + mu) * mu)]
    return max(int(math.ceil(max(need))), 1)
