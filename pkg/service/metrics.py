"""
Evaluation metrics over trajectory logs and frames, including exact oracles for
realism, semantic change, history alignment and trajectory faithfulness.
"""
import math
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import cdist
from skimage.metrics import structural_similarity

from constants import ERROR_COLD_HISTORY, ERROR_NON_FINITE, ERROR_ZERO_MASS, PROJECTION_TIE_TOLERANCE
from exceptions_handler import DegenerateMassError, NumericsError, ShapeError, StateError, WarmupError
from models.data.env import EnvState, Frame
from models.data.trajectory import TrajectoryLog
from service.envcore import MiniFreeway
from service.networks import QNetwork
from service.victim import greedy_action
from utils.logger import log_performance

SSIM_WINDOW = 7


def episode_reward(log: TrajectoryLog) -> float:
    return float(sum(log.rewards))


def deviation_rate(log: TrajectoryLog, q: QNetwork) -> float:
    """Percent of steps where the action on the observed frame differs from the action on the true render."""
    if not log.steps:
        return 0.0
    env = MiniFreeway(log.env)
    deviated = sum(
        greedy_action(q, step.observed) != greedy_action(q, env.render(step.true_state))
        for step in log.steps
    )
    return 100.0 * deviated / len(log.steps)


def action_deviation_rate(log: TrajectoryLog, q: QNetwork) -> float:
    """Percent of steps where the executed action differs from the action on the true render."""
    if not log.steps:
        return 0.0
    env = MiniFreeway(log.env)
    deviated = sum(step.action != greedy_action(q, env.render(step.true_state)) for step in log.steps)
    return 100.0 * deviated / len(log.steps)


def l2_distance(a: Frame, b: Frame) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))


@log_performance(threshold_ms=1000)
def wasserstein1(a: Frame, b: Frame) -> float:
    """Exact earth mover's distance between the two intensity distributions.

    Ground cost is the Euclidean pixel distance divided by the grid diagonal; only
    pixels with positive mass enter the transport problem.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(detail=f"frames must share a 2-D shape, got {a.shape} and {b.shape}")
    if a.sum() <= 0 or b.sum() <= 0:
        raise DegenerateMassError(detail=ERROR_ZERO_MASS)
    if np.array_equal(a, b):
        return 0.0

    src = np.argwhere(a > 0)
    dst = np.argwhere(b > 0)
    supply = a[a > 0] / a.sum()
    demand = b[b > 0] / b.sum()
    height, width = a.shape
    diagonal = math.hypot(height - 1, width - 1) or 1.0
    cost = cdist(src, dst) / diagonal

    n, m = len(src), len(dst)
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    result = linprog(cost.ravel(), A_eq=sparse.vstack([rows, cols]).tocsr(),
                     b_eq=np.concatenate([supply, demand]), bounds=(0, None), method="highs")
    if result.status != 0:
        raise NumericsError(detail=f"{ERROR_NON_FINITE}: transport LP failed ({result.message})")
    return max(0.0, float(result.fun))


def ssim(a: Frame, b: Frame) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(detail=f"ssim needs equal shapes, got {a.shape} and {b.shape}")
    if np.array_equal(a, b):
        return 1.0
    return float(structural_similarity(a, b, win_size=SSIM_WINDOW, data_range=1.0, gaussian_weights=False,
                                       use_sample_covariance=False))


class StateSpaceIndex:
    """Renders of every valid state, for nearest-state projections."""

    def __init__(self, env: MiniFreeway, states: list[EnvState] | None = None):
        self.env = env
        self.states = list(env.valid_states if states is None else states)
        if not self.states:
            raise StateError(detail="projection needs a nonempty set of valid states")

    @cached_property
    def renders(self) -> np.ndarray:
        return np.stack([self.env.render(s).ravel() for s in self.states]).astype(np.float64)

    def distances(self, frame: Frame) -> np.ndarray:
        flat = np.asarray(frame, dtype=np.float64).ravel()
        return np.linalg.norm(self.renders - flat, axis=1)

    def projection_set(self, frame: Frame) -> list[EnvState]:
        d = self.distances(frame)
        best = d.min()
        return [self.states[i] for i in np.flatnonzero(d <= best + PROJECTION_TIE_TOLERANCE)]

    def second_nearest_distances(self) -> np.ndarray:
        pairwise = cdist(self.renders, self.renders)
        np.fill_diagonal(pairwise, np.inf)
        return pairwise.min(axis=1)


def realism_distance(frame: Frame, index: StateSpaceIndex) -> tuple[float, EnvState]:
    d = index.distances(frame)
    best = int(np.argmin(d))
    return float(d[best]), index.states[best]


def is_semantics_changing(frame: Frame, true: EnvState, index: StateSpaceIndex) -> bool:
    true = index.env.canonical(true)
    return any(s != true for s in index.projection_set(frame))


def is_history_aligned(frame: Frame, prev_observed_projection: EnvState, index: StateSpaceIndex) -> bool:
    successors = index.env.reachable_next(prev_observed_projection)
    return any(s in successors for s in index.projection_set(frame))


def faithfulness(log: TrajectoryLog, t: int, k: int, delta2: float) -> tuple[float, bool]:
    """Summed L2 gap between observed and true frames over steps t-k .. t-1."""
    if t < k or t > len(log.steps):
        raise WarmupError(detail=f"{ERROR_COLD_HISTORY}: window [{t - k}, {t}) outside a log of {len(log)} steps")
    env = MiniFreeway(log.env)
    score = sum(l2_distance(step.observed, env.render(step.true_state)) for step in log.steps[t - k:t])
    return score, score <= delta2


def calibrate_thresholds(index: StateSpaceIndex, k: int, percentile: float = 99.0) -> tuple[float, float]:
    """delta1 from the distance of each valid render to its nearest other render; delta2 = k * delta1."""
    delta1 = float(np.percentile(index.second_nearest_distances(), percentile))
    return delta1, k * delta1


def _safe_w1(a: Frame, b: Frame) -> float:
    try:
        return wasserstein1(a, b)
    except DegenerateMassError:
        return float("nan")


def annotate_log(log: TrajectoryLog, index: StateSpaceIndex, delta1: float, delta2: float, k: int,
                 ae=None) -> TrajectoryLog:
    """Fill the per-step stealth and oracle metric slots of a finished episode."""
    from service.realism import reconstruction_error

    env = MiniFreeway(log.env)
    prev_observed = prev_true = prev_projection = None
    for step in log.steps:
        m = step.metrics
        true_frame = env.render(step.true_state)
        observed = step.observed
        dist, projection = realism_distance(observed, index)
        m["l2_to_true"] = l2_distance(observed, true_frame)
        m["ssim"] = ssim(observed, true_frame)
        m["realism_distance"] = dist
        m["realistic"] = float(dist <= delta1)
        m["semantics_changing"] = float(is_semantics_changing(observed, step.true_state, index))
        if ae is not None:
            m["recon_error"] = reconstruction_error(ae, observed)
        if prev_observed is not None:
            m["history_aligned"] = float(is_history_aligned(observed, prev_projection, index))
            m["w1_consecutive_observed"] = _safe_w1(prev_observed, observed)
            m["w1_to_prev_true"] = _safe_w1(observed, prev_true)
            m["w1_true_adjacent"] = _safe_w1(prev_true, true_frame)
        if step.t + 1 >= k:
            score, faithful = faithfulness(log, step.t + 1, k, delta2)
            m["faithfulness"] = score
            m["faithful"] = float(faithful)
        prev_observed, prev_true, prev_projection = observed, true_frame, projection
    return log
