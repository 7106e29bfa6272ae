import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..probability import (ConditionalPmf, LengthMismatch, Side, TwoHopSource, channel_joint,
                           mutual_information_table, sample_categorical, typicality_mask)
from ..utils import seed_random_state

logger = logging.getLogger(__name__)

DEFAULT_MAX_ENTRIES = 1 << 24
MAX_ENTRIES_ENV = "TWOHOP_MAX_CODEBOOK_ENTRIES"


class CodebookTooLarge(ValueError):
    pass


class UnknownIndex(ValueError):
    pass


def max_codebook_entries() -> int:
    value = os.environ.get(MAX_ENTRIES_ENV)
    if value is None:
        return DEFAULT_MAX_ENTRIES
    try:
        return int(value)
    except ValueError:
        raise ValueError("%s must be an integer, got %r" % (MAX_ENTRIES_ENV, value))


@dataclass(frozen=True, eq=False)
class Codebook:
    """Random codebook: ``entries[m-1]`` is the codeword of index m.

    ``enc_joint`` is the (u, input) law codewords are checked against when
    encoding, ``dec_joint`` the (u, observation) law used by the decoder.
    """
    entries: np.ndarray
    n: int
    gen_pmf: np.ndarray
    seed: int
    rate_target: float
    enc_joint: Optional[np.ndarray] = None
    dec_joint: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.entries)

    def codeword(self, m: int) -> np.ndarray:
        if not 1 <= m <= self.size:
            raise UnknownIndex("index %d outside codebook of size %d" % (m, self.size))
        return self.entries[m - 1]


def generate_codebook(pmf, rate_target: float, n: int, seed: int,
                      enc_joint=None, dec_joint=None) -> Codebook:
    """ceil(2^(n rate_target)) codewords of length n drawn i.i.d. from ``pmf``."""
    probs = np.asarray(getattr(pmf, 'probs', pmf), dtype=np.float64)
    if n < 1:
        raise ValueError("blocklength must be positive, got %r" % (n,))
    if rate_target < 0:
        raise ValueError("rate_target must be non-negative, got %r" % (rate_target,))
    limit = max_codebook_entries()
    if n * rate_target > math.log2(limit):
        raise CodebookTooLarge(
            "2^(%d*%.4g) codewords exceed the limit of %d entries; lower the rate or n,"
            " or raise %s" % (n, rate_target, limit, MAX_ENTRIES_ENV))
    size = max(int(math.ceil(2. ** (n * rate_target) - 1e-9)), 1)
    rs = seed_random_state(seed)
    entries = sample_categorical(rs, probs, (size, n)).astype(np.uint8)
    logger.debug("generated codebook with %d entries of length %d", size, n)
    return Codebook(entries, n, probs, seed, rate_target, enc_joint, dec_joint)


def codebook_for_channel(src: TwoHopSource, side, channel: ConditionalPmf, n: int,
                         mu: float, seed: int) -> Codebook:
    """Codebook of rate I(U;input) + mu for an auxiliary channel on one hop."""
    joint = channel_joint(src, Side.parse(side), channel)
    enc = joint.sum(axis=2)
    dec = joint.sum(axis=1)
    rate = mutual_information_table(enc) + mu
    return generate_codebook(enc.sum(axis=1), rate, n, seed, enc_joint=enc, dec_joint=dec)


def joint_typical_indices(codebook: Codebook, seq: np.ndarray, joint: np.ndarray,
                          mu: float) -> np.ndarray:
    """1-based indices m with (u(m), seq) strongly typical w.r.t. ``joint`` (axes: u, seq)."""
    u_size, s_size = joint.shape
    seq = np.asarray(seq, dtype=np.int64)
    if len(seq) != codebook.n:
        raise LengthMismatch("sequence of length %d against codewords of length %d"
                             % (len(seq), codebook.n))
    flat = codebook.entries.astype(np.int64) * s_size + seq[None, :]
    cells = u_size * s_size
    flat += (np.arange(codebook.size, dtype=np.int64) * cells)[:, None]
    counts = np.bincount(flat.ravel(), minlength=codebook.size * cells).reshape(
        codebook.size, cells)
    mask = typicality_mask(counts, joint.ravel(), codebook.n, mu)
    return np.flatnonzero(mask) + 1
