"""Exhaustive epsilon-net search for an approximate mode in low dimension.

Grid geometry is worked out in bandwidth-scaled coordinates, where the
kernel sees squared distances directly, and offsets are multiplied by the
bandwidth when points are emitted.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, DomainError, UnsupportedOperation
from .kde import KdeInstance
from .kernels import KernelKind, KernelSpec, critical_radius, kappa, rds_params
from .meanshift import Method, ModeResult

__all__ = [
    "CoverSpec",
    "DEFAULT_BUDGET",
    "delta_for_eps",
    "cover_spec",
    "cover_points",
    "iter_cover_blocks",
    "brute_force_mode",
]

DEFAULT_BUDGET = 10 ** 8
_BLOCK_FLOATS = 4_000_000


@dataclass(frozen=True)
class CoverSpec:
    """Per-center grid ``m + sigma * step * k`` with integer ``|k_i| <= per_axis_range``.

    ``xi`` and ``delta`` are squared distances in bandwidth-scaled units.
    """

    xi: float
    delta: float
    d: int
    bandwidth: float = 1.0

    @property
    def per_axis_step(self) -> float:
        return math.sqrt(self.delta) / math.sqrt(self.d)

    @property
    def reach(self) -> float:
        # per-axis extent that contains the ball of squared radius xi
        return max(self.xi, math.sqrt(self.xi))

    @property
    def per_axis_range(self) -> int:
        raw = math.sqrt(self.d) * self.reach / math.sqrt(self.delta)
        return max(0, math.ceil(raw - 1e-9 * max(1.0, raw)))

    @property
    def points_per_center(self) -> int:
        return (2 * self.per_axis_range + 1) ** self.d

    def size(self, n: int) -> int:
        return n * self.points_per_center


def delta_for_eps(kernel: KernelSpec, n: int, eps: float) -> float:
    """Largest grid budget ``delta`` we can certify ``k(c) - k(c + delta) <= eps k(c)`` for."""
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if kernel.kind is KernelKind.CAUCHY:
        return eps
    p = rds_params(kernel)
    if p is None:
        raise UnsupportedOperation(f"no delta rule for the {kernel.kind.value} kernel")
    xi_bar = max(1.0, critical_radius(kernel, 1.0 / n))
    return min((p.d2 * eps / p.c2) ** (1.0 / p.d2),
               (eps / p.c2) * (2.0 * xi_bar) ** (1.0 - p.d2))


def cover_spec(inst: KdeInstance, delta: float, xi=None) -> CoverSpec:
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if xi is None:
        xi = critical_radius(inst.kernel, 1.0 / inst.data.n)
    return CoverSpec(float(xi), float(delta), inst.data.d, inst.kernel.bandwidth)


def iter_cover_blocks(inst: KdeInstance, cover: CoverSpec, block_rows=None):
    """Yield ``(center_index, points)`` blocks in enumeration order.

    Centers are the outer loop; within a center the integer offsets run as an
    odometer with the last axis fastest.
    """
    d = cover.d
    B = cover.per_axis_range
    side = 2 * B + 1
    per = cover.points_per_center
    if block_rows is None:
        block_rows = max(1, _BLOCK_FLOATS // max(1, d * inst.data.n))
    step = cover.bandwidth * cover.per_axis_step
    for ci, m in enumerate(inst.data.points):
        for start in range(0, per, block_rows):
            idx = np.arange(start, min(per, start + block_rows))
            k = np.stack(np.unravel_index(idx, (side,) * d), axis=1) - B
            yield ci, m + step * k


def cover_points(inst: KdeInstance, delta: float, xi=None, budget: int = DEFAULT_BUDGET):
    """Lazily enumerate the covering grid one point at a time."""
    cover = cover_spec(inst, delta, xi)
    total = cover.size(inst.data.n)
    if total > budget:
        raise BudgetExceeded(total, budget)
    for _, block in iter_cover_blocks(inst, cover):
        yield from block


def _block_values(inst: KdeInstance, block: np.ndarray) -> np.ndarray:
    diff = block[:, None, :] - inst.data.points[None, :, :]
    t = np.einsum("ijk,ijk->ij", diff, diff) / inst.kernel.bandwidth ** 2
    return kappa(inst.kernel, t).sum(axis=1)


def brute_force_mode(inst: KdeInstance, eps: float, budget: int = DEFAULT_BUDGET,
                     xi=None) -> ModeResult:
    """Best grid point; scores at least ``(1 - eps)`` of the true maximum.

    Parameters
    ----------
    inst : KdeInstance
        Low-dimensional instance to search.
    eps : float
        Target relative accuracy in (0, 1).
    budget : int
        Cap on the number of grid points; exceeding it raises
        :class:`BudgetExceeded` before any work is done.
    xi : float, optional
        Override for the critical radius (scaled squared distance).
    """
    delta = delta_for_eps(inst.kernel, inst.data.n, eps)
    cover = cover_spec(inst, delta, xi)
    total = cover.size(inst.data.n)
    if total > budget:
        raise BudgetExceeded(total, budget)
    best_val = -np.inf
    best_pt = None
    for _, block in iter_cover_blocks(inst, cover):
        vals = _block_values(inst, block)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_pt = vals[i], block[i]
    return ModeResult.at(inst, best_pt, Method.BRUTE_FORCE, iterations=total,
                         meta={"delta": delta, "xi": cover.xi, "grid_size": total,
                               "per_axis_range": cover.per_axis_range})
