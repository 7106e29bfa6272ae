import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.stats import norm

logger = logging.getLogger(__name__)


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> Tuple[float, float]:
    if trials < 1:
        raise ValueError("Wilson interval needs at least one trial")
    z = norm.ppf(1 - alpha / 2)
    p = successes / trials
    denom = 1 + z ** 2 / trials
    center = (p + z ** 2 / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z ** 2 / (4 * trials ** 2)) / denom
    return float(max(center - half, 0.)), float(min(center + half, 1.))


@dataclass(frozen=True)
class SimulationStats:
    """Error and length estimates; errors are counts over ``trials`` draws per hypothesis."""
    trials: int
    alpha1_count: int
    alpha2_count: int
    beta1_count: int
    beta2_count: int
    mean_len1: float
    mean_len2: float
    branch_counts: Dict[str, int] = field(default_factory=dict)
    atypical_count: int = 0

    @property
    def alpha1_hat(self) -> float:
        return self.alpha1_count / self.trials

    @property
    def alpha2_hat(self) -> float:
        return self.alpha2_count / self.trials

    @property
    def beta1_hat(self) -> float:
        return self.beta1_count / self.trials

    @property
    def beta2_hat(self) -> float:
        return self.beta2_count / self.trials

    def interval(self, name: str) -> Tuple[float, float]:
        return wilson_interval(getattr(self, name + "_count"), self.trials)

    @classmethod
    def from_outcomes(cls, h0: Sequence, h1: Sequence) -> "SimulationStats":
        if len(h0) != len(h1) or not h0:
            raise ValueError("need the same positive number of trials under both hypotheses")
        return cls(
            trials=len(h0),
            alpha1_count=sum(o.h_hat_y == 1 for o in h0),
            alpha2_count=sum(o.h_hat_z == 1 for o in h0),
            beta1_count=sum(o.h_hat_y == 0 for o in h1),
            beta2_count=sum(o.h_hat_z == 0 for o in h1),
            mean_len1=float(np.mean([o.len_m1 for o in h0])),
            mean_len2=float(np.mean([o.len_m2 for o in h0])),
            branch_counts=dict(sorted(Counter(o.branch.value for o in h0).items())),
            atypical_count=sum(not o.typical for o in h0),
        )

    def to_dict(self) -> dict:
        out = {"trials": self.trials, "mean_len1": self.mean_len1,
               "mean_len2": self.mean_len2, "branch_counts": dict(self.branch_counts),
               "atypical_count": self.atypical_count}
        for name in ("alpha1", "alpha2", "beta1", "beta2"):
            out[name + "_hat"] = getattr(self, name + "_hat")
            out[name + "_ci95"] = list(self.interval(name))
        return out


def fit_exponent(ns: Sequence[int], betas: Sequence[float]) -> float:
    """Least-squares slope of -log2(beta) against n."""
    ns = np.asarray(ns, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    keep = betas > 0
    if not np.all(keep):
        logger.warning("dropping %d blocklengths with no observed type-II errors",
                       int((~keep).sum()))
    if keep.sum() < 2:
        raise ValueError("need at least two blocklengths with positive beta to fit an exponent")
    return float(np.polyfit(ns[keep], -np.log2(betas[keep]), 1)[0])
