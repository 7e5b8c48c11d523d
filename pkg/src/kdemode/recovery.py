"""Map a low-dimensional approximate mode back to the original space."""

import numpy as np

from .errors import ExtensionFailure, InconsistentSketchError, StallError
from .kde import Dataset, KdeInstance
from .kernels import KernelSpec
from .meanshift import Method, ModeResult, shift_weights
from .sketch import SketchPair

__all__ = ["recover_convex", "recover_nonconvex", "sketched_sqdist", "DEFAULT_SWEEPS"]

DEFAULT_SWEEPS = 10_000


def _check_pair(data: Dataset, sk: SketchPair, x_tilde):
    if sk.source_fingerprint != data.fingerprint():
        raise InconsistentSketchError("sketch was built from a different dataset")
    x_tilde = np.asarray(x_tilde, dtype=float)
    if x_tilde.shape != (sk.w,):
        raise InconsistentSketchError(
            f"x_tilde must have dimension {sk.w}, got shape {x_tilde.shape}")
    return x_tilde


def sketched_sqdist(sk: SketchPair, x_tilde) -> np.ndarray:
    """Raw squared distances ``||x_tilde - P m||^2`` to every projected center."""
    diff = sk.projected.points - np.asarray(x_tilde, dtype=float)
    return np.einsum("ij,ij->i", diff, diff)


def recover_convex(data: Dataset, sk: SketchPair, x_tilde, kernel: KernelSpec) -> ModeResult:
    """One mean-shift step whose weights come from the sketched distances.

    For a convex, non-increasing kernel the returned point scores at least
    as well in the original space as ``x_tilde`` does in the sketched one,
    provided the sketch does not shrink distances between centers.
    """
    x_tilde = _check_pair(data, sk, x_tilde)
    t = sketched_sqdist(sk, x_tilde) / kernel.bandwidth ** 2
    x = shift_weights(kernel, t) @ data.points
    return ModeResult.at(KdeInstance(data, kernel), x, Method.RECOVERED_CONVEX,
                         iterations=1)


def recover_nonconvex(data: Dataset, sk: SketchPair, x_tilde, eps: float,
                      kernel: KernelSpec, max_iters: int = DEFAULT_SWEEPS) -> ModeResult:
    """Find ``x'`` with ``||x' - m||^2 <= (1 + eps) ||x_tilde - P m||^2`` for every center.

    Cyclic projection onto the balls of squared radius
    ``(1 + eps/2) ||x_tilde - P m||^2``; the tighter target keeps rounding on
    the boundary from breaking the ``(1 + eps)`` contract, which is checked
    exactly before returning.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x_tilde = _check_pair(data, sk, x_tilde)
    inst = KdeInstance(data, kernel)
    pts = data.points
    sq = sketched_sqdist(sk, x_tilde)
    limit = (1.0 + eps) * sq

    def worst(x):
        diff = pts - x
        dist = np.einsum("ij,ij->i", diff, diff)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(limit > 0, dist / limit, np.where(dist > 0, np.inf, 0.0))
        return float(ratio.max())

    zero = np.flatnonzero(sq == 0.0)
    if zero.size:
        x = pts[zero[0]]
        w = worst(x)
        if w > 1.0:
            raise ExtensionFailure(w, 0)
        return ModeResult.at(inst, x, Method.RECOVERED_NONCONVEX, meta={"worst_ratio": w})

    if kernel.differentiable:
        try:
            x = shift_weights(kernel, sq / kernel.bandwidth ** 2) @ pts
        except StallError:
            x = pts.mean(axis=0)
    else:
        x = pts.mean(axis=0)
    target = np.sqrt((1.0 + 0.5 * eps) * sq)

    sweeps = 0
    w = worst(x)
    while w > 1.0 and sweeps < max_iters:
        for m, r in zip(pts, target):
            v = x - m
            dist = np.sqrt(v @ v)
            if dist > r:
                x = m + v * (r / dist)
        sweeps += 1
        w = worst(x)
    if w > 1.0:
        raise ExtensionFailure(w, sweeps)
    return ModeResult.at(inst, x, Method.RECOVERED_NONCONVEX, iterations=sweeps,
                         meta={"worst_ratio": w})
