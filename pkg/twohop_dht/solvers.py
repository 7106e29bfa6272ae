"""
Numerical back ends: auxiliary-channel search and linear programs.
"""
import itertools
import logging
from collections import namedtuple
from math import comb

import numpy as np
import cvxpy as cp
from scipy.optimize import brentq, minimize

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-12
BATCH = 1 << 16

ChannelSolution = namedtuple('ChannelSolution', ['channel', 'rate', 'value', 'status'])


def solve_lp(c, G=None, h=None, C=None, d=None, solver=cp.CVXOPT):
    """minimize c @ x  s.t.  G @ x <= h,  C @ x == d

    Returns (status, x). A solver that fails outright is retried once with
    cvxpy's default solver.
    """
    n = len(c)
    x = cp.Variable(shape=(n,))
    obj = cp.Minimize(np.asarray(c) @ x)
    constraints = []
    if G is not None and h is not None and len(G):
        constraints.append(np.asarray(G) @ x <= np.asarray(h))
    if C is not None and d is not None and len(C):
        constraints.append(np.asarray(C) @ x == np.asarray(d))
    prob = cp.Problem(obj, constraints)
    try:
        prob.solve(solver=solver)
    except cp.error.SolverError as e:
        logger.error("LP solver error: %s", e)
        if solver is None:
            return 'solver_error', None
        return solve_lp(c, G, h, C, d, solver=None)
    return prob.status, x.value


def simplex_lattice(n_parts: int, resolution: float) -> np.ndarray:
    """All pmfs on ``n_parts`` symbols whose entries are multiples of ``resolution``."""
    steps = int(round(1. / resolution))
    if steps < 1:
        raise ValueError("resolution must be in (0, 1], got %r" % (resolution,))
    if n_parts == 1:
        return np.ones((1, 1))
    bars = np.array(list(itertools.combinations(range(steps + n_parts - 1), n_parts - 1)),
                    dtype=np.int64)
    edges = np.hstack((np.full((len(bars), 1), -1), bars,
                       np.full((len(bars), 1), steps + n_parts - 1)))
    return (np.diff(edges, axis=1) - 1) / steps


def lattice_size(n_parts: int, resolution: float) -> int:
    steps = int(round(1. / resolution))
    return comb(steps + n_parts - 1, n_parts - 1)


def channel_grid(input_size: int, u_card: int, resolution: float, max_cells: int,
                 random_state=None):
    """Channels P_U|input whose rows lie on the simplex lattice.

    Returns (channels, sampled) with channels of shape (cells, input, U). When
    the full product grid exceeds ``max_cells`` a seeded subset is drawn.
    """
    lattice = simplex_lattice(u_card, resolution)
    total = len(lattice) ** input_size
    if total <= max_cells:
        idx = np.indices((len(lattice),) * input_size).reshape(input_size, -1).T
        return lattice[idx], False
    logger.info("channel grid has %d cells, sampling %d of them", total, max_cells)
    idx = random_state.randint(len(lattice), size=(max_cells, input_size))
    return lattice[idx], True


def _info_terms(joint, denom):
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(joint > 0, joint * np.log2(joint / denom), 0.)
    return terms


def batch_information(p_in: np.ndarray, obs: np.ndarray, channels: np.ndarray):
    """I(U;input) and I(U;observation) for a stack of channels (cells, input, U)."""
    i_in = np.empty(len(channels))
    i_obs = np.empty(len(channels))
    p_obs = p_in @ obs
    for start in range(0, len(channels), BATCH):
        W = channels[start:start + BATCH]
        joint_ui = p_in[None, :, None] * W
        p_u = joint_ui.sum(axis=1)
        i_in[start:start + BATCH] = _info_terms(
            joint_ui, p_in[None, :, None] * p_u[:, None, :]).sum(axis=(1, 2))
        joint_uo = np.einsum('ciu,io->cuo', joint_ui, obs)
        i_obs[start:start + BATCH] = _info_terms(
            joint_uo, p_u[:, :, None] * p_obs[None, None, :]).sum(axis=(1, 2))
    return np.maximum(i_in, 0.), np.maximum(i_obs, 0.)


def information(p_in: np.ndarray, obs: np.ndarray, W: np.ndarray):
    i_in, i_obs = batch_information(p_in, obs, W[None])
    return float(i_in[0]), float(i_obs[0])


def _rate(p_in, W):
    joint = p_in[:, None] * W
    p_u = joint.sum(axis=0)
    return max(float(_info_terms(joint, p_in[:, None] * p_u[None, :]).sum()), 0.)


def repair_channel(p_in: np.ndarray, W: np.ndarray, cap: float) -> np.ndarray:
    """Mix W toward the constant channel with the same output law until I(U;input) <= cap.

    I(U;input) is convex along the mixing segment and vanishes at the constant
    end, so the crossing is unique.
    """
    if _rate(p_in, W) <= cap:
        return W
    q = p_in @ W
    const = np.tile(q, (W.shape[0], 1))
    if cap <= 0:
        return const
    lam = brentq(lambda t: _rate(p_in, t * W + (1. - t) * const) - cap, 0., 1.,
                 xtol=1e-15, rtol=4 * np.finfo(float).eps)
    # keep the feasible side of the root
    while lam > 0 and _rate(p_in, lam * W + (1. - lam) * const) > cap:
        lam = np.nextafter(lam, 0.)
    return lam * W + (1. - lam) * const


def _from_logits(theta, shape):
    z = np.zeros(shape)
    z[:, :-1] = theta.reshape(shape[0], shape[1] - 1)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _to_logits(W):
    logw = np.log(np.clip(W, LOG_FLOOR, None))
    return (logw[:, :-1] - logw[:, -1:]).ravel()


def solve_channel(p_in: np.ndarray, obs: np.ndarray, cap: float, starts,
                  tolerance: float = 1e-7, max_evals: int = 1500,
                  refine: bool = True) -> ChannelSolution:
    """max I(U;observation) over P_U|input subject to I(U;input) <= cap.

    Each start is repaired onto the feasible set and, when ``refine`` is set,
    polished with Nelder-Mead over row logits; the repair step is part of the
    objective so every evaluated point is feasible. Ties keep the earliest start.
    """
    shape = np.shape(starts[0])
    best_W, best_val, status = None, -np.inf, 'grid'

    def _objective(theta):
        W = repair_channel(p_in, _from_logits(theta, shape), cap)
        return -information(p_in, obs, W)[1]

    for start in starts:
        W0 = repair_channel(p_in, np.asarray(start, dtype=np.float64), cap)
        val = information(p_in, obs, W0)[1]
        if val > best_val:
            best_W, best_val = W0, val
        if not refine or shape[1] < 2:
            continue
        res = minimize(_objective, _to_logits(W0), method='Nelder-Mead',
                       options={'xatol': 1e-9, 'fatol': tolerance * 1e-3,
                                'maxfev': max_evals, 'adaptive': True})
        W = repair_channel(p_in, _from_logits(res.x, shape), cap)
        val = information(p_in, obs, W)[1]
        logger.debug("Nelder-Mead from start: %s after %d evaluations, value %.12f",
                     res.message, res.nfev, val)
        if val > best_val:
            best_W, best_val = W, val
            status = 'optimal' if res.success else 'max_evals'

    rate = _rate(p_in, best_W)
    return ChannelSolution(best_W, rate, best_val, status)
