"""Mean-shift iteration and multi-restart search."""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import StallError
from .kde import KdeInstance, evaluate
from .kernels import KernelSpec, kappa_prime, log_neg_kappa_prime

__all__ = [
    "Method",
    "ModeResult",
    "shift_weights",
    "mean_shift_step",
    "mean_shift",
    "restart_point",
    "multi_restart",
    "DEFAULT_TOL",
    "DEFAULT_ITERS",
]

DEFAULT_TOL = 1e-9
DEFAULT_ITERS = 100
UNDERFLOW = 1e-300


class Method(enum.Enum):
    MEAN_SHIFT = "meanshift"
    BRUTE_FORCE = "brute"
    RECOVERED_CONVEX = "recovered_convex"
    RECOVERED_NONCONVEX = "recovered_nonconvex"


@dataclass(frozen=True, eq=False)
class ModeResult:
    point: np.ndarray
    value: float
    method: Method
    iterations: int = 0
    seed: int = 0
    trajectory_values: Optional[list] = None
    stalled: bool = False
    meta: dict = field(default_factory=dict)

    @classmethod
    def at(cls, inst: KdeInstance, point, method: Method, **kw):
        """Build a result whose ``value`` is freshly evaluated at ``point``."""
        p = np.array(point, dtype=float, copy=True)
        p.setflags(write=False)
        return cls(p, evaluate(inst, p), method, **kw)

    def to_dict(self):
        return {
            "point": [float(v) for v in self.point],
            "value": self.value,
            "method": self.method.value,
            "iterations": self.iterations,
            "seed": self.seed,
            "trajectory_values": self.trajectory_values,
            "stalled": self.stalled,
            "meta": self.meta,
        }


def shift_weights(kernel: KernelSpec, t) -> np.ndarray:
    """Normalized mean-shift weights ``k'(t_m) / sum_j k'(t_j)``.

    Both numerator and denominator are non-positive, so the negated
    derivatives are used directly.  When every derivative underflows the
    weights are recomputed in the log domain; infinite derivatives (the cusp of
    a generalized Gaussian with alpha < 1) absorb all of the weight.
    """
    t = np.asarray(t, dtype=float)
    w = -np.asarray(kappa_prime(kernel, t), dtype=float)
    inf = np.isinf(w)
    if inf.any():
        w = inf.astype(float)
    elif not w.max() >= UNDERFLOW:
        lw = np.asarray(log_neg_kappa_prime(kernel, t), dtype=float)
        top = lw.max()
        if not np.isfinite(top):
            raise StallError("all mean-shift weights are zero")
        w = np.exp(lw - top)
    return w / w.sum()


def mean_shift_step(inst: KdeInstance, x) -> np.ndarray:
    w = shift_weights(inst.kernel, inst.scaled_sqdist(x))
    return w @ inst.data.points


def mean_shift(inst: KdeInstance, x0, max_iters: int = DEFAULT_ITERS, tol: float = DEFAULT_TOL,
               record_trajectory: bool = False, seed: int = 0) -> ModeResult:
    """Iterate mean-shift from ``x0``.

    Stops when ``||x_new - x|| <= tol * (1 + ||x||)`` or after ``max_iters``
    steps.  A stall (all weights zero) ends the run at the current iterate
    with ``stalled=True``.
    """
    x = np.array(x0, dtype=float, copy=True)
    traj = [evaluate(inst, x)] if record_trajectory else None
    stalled = False
    iters = 0
    for _ in range(max_iters):
        try:
            new = mean_shift_step(inst, x)
        except StallError:
            stalled = True
            break
        iters += 1
        if traj is not None:
            traj.append(evaluate(inst, new))
        moved = np.linalg.norm(new - x)
        done = moved <= tol * (1.0 + np.linalg.norm(x))
        x = new
        if done:
            break
    return ModeResult.at(inst, x, Method.MEAN_SHIFT, iterations=iters, seed=seed,
                         trajectory_values=traj, stalled=stalled)


def restart_point(points: np.ndarray, index: int, rng) -> np.ndarray:
    """Even restarts: Dirichlet-uniform mix of all points.  Odd: mix of a random pair."""
    n = points.shape[0]
    if index % 2 == 0:
        w = rng.exponential(size=n)
        return (w / w.sum()) @ points
    if n == 1:
        return points[0].copy()
    i, j = rng.choice(n, size=2, replace=False)
    lam = rng.random()
    return lam * points[i] + (1.0 - lam) * points[j]


def multi_restart(inst: KdeInstance, restarts: int = 60, iters: int = DEFAULT_ITERS,
                  tol: float = DEFAULT_TOL, seed: int = 0,
                  record_trajectory: bool = False) -> ModeResult:
    """Best of ``restarts`` mean-shift runs; restart ``r`` draws from ``rng([seed, r])``."""
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    best = None
    best_idx = -1
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = restart_point(inst.data.points, r, rng)
        res = mean_shift(inst, x0, iters, tol, record_trajectory, seed)
        if best is None or res.value > best.value:
            best, best_idx = res, r
    return ModeResult(best.point, best.value, Method.MEAN_SHIFT, best.iterations, seed,
                      best.trajectory_values, best.stalled,
                      {"restart": best_idx, "restarts": restarts})
