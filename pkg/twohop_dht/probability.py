"""
Finite-alphabet probability machinery: pmfs, conditionals, information
measures (in bits), empirical types and strong typicality.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

PMF_TOL = 1e-12


class InvalidPmf(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class AbsoluteContinuityViolation(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


def _validated(probs, ndim=None, what="pmf"):
    arr = np.array(probs, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise InvalidPmf("%s must have %d axes, got shape %s" % (what, ndim, arr.shape))
    if arr.size == 0:
        raise InvalidPmf("%s must not be empty" % what)
    if not np.all(np.isfinite(arr)):
        raise InvalidPmf("%s has non-finite entries" % what)
    if np.any(arr < 0):
        raise InvalidPmf("%s has negative entries" % what)
    arr.setflags(write=False)
    return arr


def _check_total(arr, what):
    total = arr.sum()
    if abs(total - 1.) > PMF_TOL:
        raise InvalidPmf("%s sums to %.17g, not 1" % (what, total))


@dataclass(frozen=True, eq=False)
class Pmf:
    probs: np.ndarray

    def __post_init__(self):
        arr = _validated(self.probs, ndim=1)
        _check_total(arr, "pmf")
        object.__setattr__(self, 'probs', arr)

    @property
    def alphabet_size(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def bernoulli(cls, p: float) -> "Pmf":
        return cls([1. - p, p])

    @classmethod
    def uniform(cls, size: int) -> "Pmf":
        return cls(np.full(size, 1. / size))

    @classmethod
    def point_mass(cls, size: int, symbol: int) -> "Pmf":
        probs = np.zeros(size)
        probs[symbol] = 1.
        return cls(probs)

    def __len__(self):
        return self.alphabet_size

    def __repr__(self):
        return "Pmf(%s)" % np.array2string(self.probs, precision=6)


@dataclass(frozen=True, eq=False)
class ConditionalPmf:
    """Row-stochastic matrix: ``rows[i]`` is the output law given input ``i``."""
    rows: np.ndarray

    def __post_init__(self):
        arr = _validated(self.rows, ndim=2, what="conditional pmf")
        totals = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(totals - 1.) > PMF_TOL)
        if len(bad):
            raise InvalidPmf("conditional pmf row %d sums to %.17g, not 1"
                             % (bad[0], totals[bad[0]]))
        object.__setattr__(self, 'rows', arr)

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    def row(self, i: int) -> Pmf:
        return Pmf(self.rows[i])

    def push(self, p: Pmf) -> Pmf:
        """Output marginal when the input is distributed as ``p``."""
        self._check_input(p)
        return Pmf(_renormalized(p.probs @ self.rows))

    def joint_with(self, p: Pmf) -> "JointPmf":
        """Joint pmf over (input, output)."""
        self._check_input(p)
        return JointPmf(_renormalized(p.probs[:, None] * self.rows))

    def then(self, other: "ConditionalPmf") -> "ConditionalPmf":
        if self.output_size != other.input_size:
            raise DimensionMismatch("cannot chain %dx%d with %dx%d channel" % (
                self.input_size, self.output_size, other.input_size, other.output_size))
        return ConditionalPmf(_renormalized(self.rows @ other.rows, axis=1))

    def _check_input(self, p: Pmf):
        if p.alphabet_size != self.input_size:
            raise DimensionMismatch("pmf over %d symbols fed to a channel with %d inputs"
                                    % (p.alphabet_size, self.input_size))

    @classmethod
    def identity(cls, size: int) -> "ConditionalPmf":
        return cls(np.eye(size))

    @classmethod
    def constant(cls, input_size: int, output: Union[Pmf, int]) -> "ConditionalPmf":
        if isinstance(output, Pmf):
            row = output.probs
        else:
            row = np.zeros(output)
            row[0] = 1.
        return cls(np.tile(row, (input_size, 1)))

    def __repr__(self):
        return "ConditionalPmf(%s)" % np.array2string(self.rows, precision=6)


@dataclass(frozen=True, eq=False)
class JointPmf:
    probs: np.ndarray

    def __post_init__(self):
        arr = _validated(self.probs, what="joint pmf")
        _check_total(arr, "joint pmf")
        object.__setattr__(self, 'probs', arr)

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.probs.shape

    def marginal(self, axis: int) -> Pmf:
        others = tuple(i for i in range(self.probs.ndim) if i != axis)
        return Pmf(_renormalized(self.probs.sum(axis=others)))

    def marginalize(self, keep: Sequence[int]) -> "JointPmf":
        keep = tuple(keep)
        drop = tuple(i for i in range(self.probs.ndim) if i not in keep)
        table = self.probs.sum(axis=drop) if drop else self.probs
        # sum() keeps the surviving axes in increasing order
        order = np.argsort(np.argsort(keep))
        return JointPmf(_renormalized(np.transpose(table, order)))

    def flat(self) -> Pmf:
        return Pmf(_renormalized(self.probs.ravel()))

    @classmethod
    def product(cls, *pmfs: Pmf) -> "JointPmf":
        table = pmfs[0].probs
        for p in pmfs[1:]:
            table = np.multiply.outer(table, p.probs)
        return cls(_renormalized(table))

    def __repr__(self):
        return "JointPmf(dims=%s)" % (self.dims,)


def _renormalized(arr, axis=None):
    # only absorbs floating point drift of products of valid pmfs
    return arr / arr.sum(axis=axis, keepdims=axis is not None)


def _probs(p) -> np.ndarray:
    if isinstance(p, (Pmf, JointPmf)):
        return p.probs
    return np.asarray(p, dtype=np.float64)


def _plogp(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def entropy(p: Union[Pmf, JointPmf]) -> float:
    return float(max(-_plogp(_probs(p)).sum(), 0.))


def binary_entropy(p: float) -> float:
    return entropy(Pmf.bernoulli(p))


def mutual_information(j: JointPmf) -> float:
    table = _probs(j)
    if table.ndim != 2:
        raise DimensionMismatch("mutual information needs a two-axis joint, got %d axes"
                                % table.ndim)
    return mutual_information_table(table)


def mutual_information_table(table: np.ndarray) -> float:
    """I(A;B) of an unvalidated two-axis probability table."""
    pa = table.sum(axis=1, keepdims=True)
    pb = table.sum(axis=0, keepdims=True)
    nz = table > 0
    ratio = table[nz] / (pa * pb)[nz]
    return float(max((table[nz] * np.log2(ratio)).sum(), 0.))


def conditional_entropy(j: JointPmf, given: int = 1) -> float:
    """H(other axis | ``given`` axis) of a two-axis joint."""
    return entropy(j) - entropy(j.marginal(given))


def kl_divergence(p: Pmf, q: Pmf) -> float:
    if p.alphabet_size != q.alphabet_size:
        raise DimensionMismatch("divergence between pmfs over %d and %d symbols"
                                % (p.alphabet_size, q.alphabet_size))
    nz = p.probs > 0
    if np.any(q.probs[nz] == 0):
        raise AbsoluteContinuityViolation(
            "support of p is not contained in the support of q (symbols %s)"
            % np.flatnonzero(nz & (q.probs == 0)).tolist())
    return float(max((p.probs[nz] * np.log2(p.probs[nz] / q.probs[nz])).sum(), 0.))


class Side(enum.Enum):
    """A hop of the cascade: the encoder input and the observer it serves."""
    TX_RELAY = "tx-relay"
    RELAY_RX = "relay-rx"

    @classmethod
    def parse(cls, value) -> "Side":
        if isinstance(value, cls):
            return value
        aliases = {"tx->relay": cls.TX_RELAY, "tx→relay": cls.TX_RELAY,
                   "relay->rx": cls.RELAY_RX, "relay→rx": cls.RELAY_RX}
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True, eq=False)
class TwoHopSource:
    """X -> Y -> Z source; Z depends on (X, Y) only through Y."""
    p_x: Pmf
    p_y_given_x: ConditionalPmf
    p_z_given_y: ConditionalPmf
    p_xy: JointPmf = field(init=False, repr=False)
    p_yz: JointPmf = field(init=False, repr=False)
    p_y: Pmf = field(init=False, repr=False)
    p_z: Pmf = field(init=False, repr=False)

    def __post_init__(self):
        if self.p_x.alphabet_size != self.p_y_given_x.input_size:
            raise DimensionMismatch("P_X has %d symbols but P_Y|X has %d inputs" % (
                self.p_x.alphabet_size, self.p_y_given_x.input_size))
        if self.p_y_given_x.output_size != self.p_z_given_y.input_size:
            raise DimensionMismatch("P_Y|X has %d outputs but P_Z|Y has %d inputs" % (
                self.p_y_given_x.output_size, self.p_z_given_y.input_size))
        p_y = self.p_y_given_x.push(self.p_x)
        object.__setattr__(self, 'p_xy', self.p_y_given_x.joint_with(self.p_x))
        object.__setattr__(self, 'p_y', p_y)
        object.__setattr__(self, 'p_yz', self.p_z_given_y.joint_with(p_y))
        object.__setattr__(self, 'p_z', self.p_z_given_y.push(p_y))

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return (self.p_x.alphabet_size, self.p_y.alphabet_size, self.p_z.alphabet_size)

    @property
    def p_xz(self) -> JointPmf:
        return self.p_y_given_x.then(self.p_z_given_y).joint_with(self.p_x)

    @property
    def fingerprint(self) -> tuple:
        return (self.p_x.probs.tobytes(), self.p_y_given_x.rows.shape,
                self.p_y_given_x.rows.tobytes(), self.p_z_given_y.rows.shape,
                self.p_z_given_y.rows.tobytes())

    def hop(self, side) -> Tuple[Pmf, ConditionalPmf]:
        """(encoder input law, observer channel) of one hop."""
        side = Side.parse(side)
        if side is Side.TX_RELAY:
            return self.p_x, self.p_y_given_x
        return self.p_y, self.p_z_given_y

    def sample(self, hyp: int, n: int, random_state) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Draw (x^n, y^n, z^n) under H=0 (P_XY P_Z|Y) or H=1 (P_X P_Y P_Z)."""
        x = sample_categorical(random_state, self.p_x.probs, n)
        if hyp == 0:
            y = sample_conditional(random_state, self.p_y_given_x.rows, x)
            z = sample_conditional(random_state, self.p_z_given_y.rows, y)
        elif hyp == 1:
            y = sample_categorical(random_state, self.p_y.probs, n)
            z = sample_categorical(random_state, self.p_z.probs, n)
        else:
            raise ValueError("hypothesis must be 0 or 1, got %r" % (hyp,))
        return x, y, z


def compose_two_hop(p_x: Pmf, p_y_given_x: ConditionalPmf,
                    p_z_given_y: ConditionalPmf) -> TwoHopSource:
    return TwoHopSource(p_x, p_y_given_x, p_z_given_y)


def channel_joint(src: TwoHopSource, side, channel: ConditionalPmf) -> np.ndarray:
    """Table P(u, input, observation) for an auxiliary channel on one hop."""
    p_in, obs = src.hop(side)
    if channel.input_size != p_in.alphabet_size:
        raise DimensionMismatch("auxiliary channel has %d inputs, hop input has %d symbols"
                                % (channel.input_size, p_in.alphabet_size))
    return np.einsum('i,iu,io->uio', p_in.probs, channel.rows, obs.rows)


def sample_categorical(random_state, probs: np.ndarray, size) -> np.ndarray:
    cdf = np.cumsum(probs)
    u = random_state.random_sample(size)
    out = np.searchsorted(cdf, u, side='right')
    return np.minimum(out, len(probs) - 1).astype(np.int64)


def sample_conditional(random_state, rows: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(rows, axis=1)[inputs]
    u = random_state.random_sample(len(inputs))
    out = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(out, rows.shape[1] - 1).astype(np.int64)


def _as_sequence(seq, alphabet_size: int) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= alphabet_size):
        raise ValueError("symbols must lie in [0, %d), got range [%d, %d]"
                         % (alphabet_size, arr.min(), arr.max()))
    return arr


def empirical_type(seq, alphabet_size: int) -> Pmf:
    arr = _as_sequence(seq, alphabet_size)
    if arr.size == 0:
        raise EmptySequence("empirical type of an empty sequence")
    return Pmf(np.bincount(arr, minlength=alphabet_size) / arr.size)


def joint_type_counts(seqs: Sequence[np.ndarray], dims: Tuple[int, ...]) -> np.ndarray:
    """Counts N(a|seqs) over the product alphabet, flattened row-major."""
    cols = [_as_sequence(s, d) for s, d in zip(seqs, dims)]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise LengthMismatch("aligned sequences have lengths %s" % [len(c) for c in cols])
    flat = np.ravel_multi_index(cols, dims)
    return np.bincount(flat, minlength=int(np.prod(dims)))


def typicality_mask(counts: np.ndarray, probs: np.ndarray, n: int, mu: float) -> np.ndarray:
    """Strong typicality of one or many count vectors (last axis = symbol tuples).

    Typical iff |N(a)/n - P(a)| <= mu for every a and N(a) = 0 whenever P(a) = 0.
    """
    probs = np.asarray(probs).ravel()
    close = np.all(np.abs(counts / n - probs) <= mu, axis=-1)
    off_support = np.any(counts[..., probs == 0] > 0, axis=-1)
    return close & ~off_support


def is_strongly_typical(seqs, reference: Union[Pmf, JointPmf], mu: float) -> bool:
    if mu <= 0:
        raise ValueError("typicality slack mu must be positive, got %r" % (mu,))
    if isinstance(reference, Pmf):
        dims = (reference.alphabet_size,)
        seqs = [seqs]
    else:
        dims = reference.dims
        seqs = list(seqs)
    if len(seqs) != len(dims):
        raise DimensionMismatch("%d sequences checked against a %d-axis reference"
                                % (len(seqs), len(dims)))
    n = len(np.asarray(seqs[0]).ravel())
    if n == 0:
        raise EmptySequence("typicality of empty sequences")
    counts = joint_type_counts(seqs, dims)
    return bool(typicality_mask(counts, reference.probs, n, mu))
