from abc import abstractmethod
import logging

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from .utils import derive_seed

logger = logging.getLogger(__name__)


class InfeasibleTheta1(ValueError):
    pass


class RegionModel():
    """Scalarized exponents region: for a required theta1, the best theta2.

    Subclasses implement ``frontier_point``; ``trace`` maps it over a grid of
    theta1 values, one independent task per grid point.
    """

    def __init__(self, n_jobs: int = 1, verbose: int = 0, seed: int = 0):
        super().__init__()
        self.n_jobs = n_jobs
        self.verbose = verbose
        self.seed = seed

    @abstractmethod
    def frontier_point(self, theta1: float, seed: int):
        pass

    def trace(self, theta1_grid):
        grid = np.unique(np.asarray(theta1_grid, dtype=np.float64))
        if np.any(~np.isfinite(grid)) or np.any(grid < 0):
            raise ValueError("theta1 grid must hold finite non-negative values")

        def _helper(i, theta1):
            try:
                return theta1, self.frontier_point(theta1, derive_seed(self.seed, i)), None
            except InfeasibleTheta1 as e:
                return theta1, None, str(e)

        if self.n_jobs == 1:
            ret = []
            for i, theta1 in tqdm(enumerate(grid), ascii=True, desc="Frontier",
                                  total=len(grid), disable=self.verbose == 0):
                ret.append(_helper(i, float(theta1)))
        else:
            ret = Parallel(n_jobs=self.n_jobs, verbose=self.verbose)(
                delayed(_helper)(i, float(theta1)) for i, theta1 in enumerate(grid))

        for theta1, _, err in ret:
            if err is not None:
                logger.info("theta1=%.6g infeasible: %s", theta1, err)
        return ret
