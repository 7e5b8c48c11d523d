"""Radial, non-increasing kernels written in unit-bandwidth form.

Every function here takes ``t``, the *already scaled* squared distance
``||x - m||^2 / sigma^2``.  The bandwidth stored on :class:`KernelSpec` is
applied by the callers that compute distances, never inside a formula.
"""

import enum
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateKernelError, DomainError, UnsupportedOperation

__all__ = [
    "KernelKind",
    "KernelSpec",
    "RdsParams",
    "parse_kernel",
    "kappa",
    "kappa_prime",
    "log_neg_kappa_prime",
    "relative_slope",
    "critical_radius",
    "kappa_prime_min",
    "kappa_prime_min_bound",
    "gamma_for_epsilon",
    "rds_params",
    "rds_check",
    "derivative_check",
]

BISECT_RTOL = 1e-12
BISECT_MAX_ITERS = 200
KPMIN_GRID_POINTS = 10_001
KPMIN_SAFETY = 1.01
RDS_SLACK = 1e-9
# below this s = sqrt(t), tanh(s/2)/(2s) and tanh(s)/(2s) switch to their series
_SERIES_CUTOFF = 1e-4


class KernelKind(enum.Enum):
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"
    SIGMOID = "sigmoid"
    CAUCHY = "cauchy"
    GENERALIZED_GAUSSIAN = "gengauss"
    BOX = "box"
    EPANECHNIKOV = "epanechnikov"


_ALIASES = {
    "gaussian": KernelKind.GAUSSIAN,
    "gauss": KernelKind.GAUSSIAN,
    "logistic": KernelKind.LOGISTIC,
    "sigmoid": KernelKind.SIGMOID,
    "cauchy": KernelKind.CAUCHY,
    "gengauss": KernelKind.GENERALIZED_GAUSSIAN,
    "generalizedgaussian": KernelKind.GENERALIZED_GAUSSIAN,
    "generalized_gaussian": KernelKind.GENERALIZED_GAUSSIAN,
    "box": KernelKind.BOX,
    "epanechnikov": KernelKind.EPANECHNIKOV,
    "epan": KernelKind.EPANECHNIKOV,
}


@dataclass(frozen=True)
class RdsParams:
    """Constants of ``c1 t^d1 - q1 <= -k'(t) t / k(t) <= c2 t^d2``."""

    c1: float
    d1: float
    q1: float
    c2: float
    d2: float


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    alpha: float = 1.0
    bandwidth: float = 1.0

    def __post_init__(self):
        if not isinstance(self.kind, KernelKind):
            object.__setattr__(self, "kind", KernelKind(self.kind))
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise DomainError(f"bandwidth must be positive and finite, got {self.bandwidth}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be positive and finite, got {self.alpha}")

    @property
    def differentiable(self) -> bool:
        return self.kind is not KernelKind.BOX

    @property
    def convex(self) -> bool:
        if self.kind is KernelKind.BOX:
            return False
        if self.kind is KernelKind.GENERALIZED_GAUSSIAN:
            return self.alpha <= 1.0
        return True

    def __str__(self):
        head = self.kind.value
        if self.kind is KernelKind.GENERALIZED_GAUSSIAN:
            head += f":{self.alpha:g}"
        return f"{head}@{self.bandwidth:g}"


_KERNEL_RE = re.compile(r"^\s*([a-z_]+)\s*(?::\s*([^@\s]+))?\s*(?:@\s*(\S+))?\s*$")


def parse_kernel(text: str) -> KernelSpec:
    """Parse ``kind[:alpha]@bandwidth`` (case-insensitive), e.g. ``gengauss:0.5@20``."""
    m = _KERNEL_RE.match(text.lower())
    if not m:
        raise DomainError(f"cannot parse kernel spec {text!r}")
    name, alpha, bandwidth = m.groups()
    if name not in _ALIASES:
        raise DomainError(f"unknown kernel kind {name!r}")
    kind = _ALIASES[name]
    if alpha is not None and kind is not KernelKind.GENERALIZED_GAUSSIAN:
        raise DomainError(f"kernel {name!r} takes no alpha parameter")
    try:
        a = float(alpha) if alpha is not None else 1.0
        bw = float(bandwidth) if bandwidth is not None else 1.0
    except ValueError as exc:
        raise DomainError(f"bad number in kernel spec {text!r}") from exc
    return KernelSpec(kind, alpha=a, bandwidth=bw)


def _as_t(t):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("kernel argument t must be non-negative")
    return arr


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _half_tanh_ratio(s):
    """tanh(s/2) / (2 s), finite at s = 0 (limit 1/4)."""
    out = np.empty_like(s)
    small = s < _SERIES_CUTOFF
    out[small] = 0.25 - s[small] ** 2 / 48.0
    big = ~small
    out[big] = np.tanh(s[big] / 2.0) / (2.0 * s[big])
    return out


def _tanh_ratio(s):
    """tanh(s) / (2 s), finite at s = 0 (limit 1/2)."""
    out = np.empty_like(s)
    small = s < _SERIES_CUTOFF
    out[small] = 0.5 - s[small] ** 2 / 6.0
    big = ~small
    out[big] = np.tanh(s[big]) / (2.0 * s[big])
    return out


def kappa(spec: KernelSpec, t):
    """Kernel profile value at scaled squared distance ``t`` (scalar or array)."""
    tt = _as_t(t)
    k = spec.kind
    if k is KernelKind.GAUSSIAN:
        out = np.exp(-tt)
    elif k is KernelKind.LOGISTIC:
        # sech^2(s/2): cosh >= 1 keeps the value in [0, 1] and monotone after rounding
        with np.errstate(over="ignore"):
            out = 1.0 / np.cosh(0.5 * np.sqrt(tt)) ** 2
    elif k is KernelKind.SIGMOID:
        with np.errstate(over="ignore"):
            out = 1.0 / np.cosh(np.sqrt(tt))
    elif k is KernelKind.CAUCHY:
        out = 1.0 / (1.0 + tt)
    elif k is KernelKind.GENERALIZED_GAUSSIAN:
        out = np.exp(-np.power(tt, spec.alpha))
    elif k is KernelKind.BOX:
        out = np.where(tt <= 1.0, 1.0, 0.0)
    else:
        out = np.maximum(0.0, 1.0 - tt)
    return _ret(out, t)


def kappa_prime(spec: KernelSpec, t):
    """First derivative of the profile with respect to ``t``.

    The generalized Gaussian with ``alpha < 1`` has a cusp at 0 and returns
    ``-inf`` there; the Epanechnikov kink at ``t = 1`` takes the right limit 0.
    """
    if not spec.differentiable:
        raise UnsupportedOperation(f"{spec.kind.value} kernel has no derivative")
    tt = _as_t(t)
    k = spec.kind
    if k is KernelKind.GAUSSIAN:
        out = -np.exp(-tt)
    elif k is KernelKind.LOGISTIC:
        s = np.atleast_1d(np.sqrt(tt))
        u = np.exp(-s)
        out = (-4.0 * u / (1.0 + u) ** 2 * _half_tanh_ratio(s)).reshape(tt.shape)
    elif k is KernelKind.SIGMOID:
        s = np.atleast_1d(np.sqrt(tt))
        u = np.exp(-s)
        out = (-2.0 * u / (1.0 + u * u) * _tanh_ratio(s)).reshape(tt.shape)
    elif k is KernelKind.CAUCHY:
        out = -1.0 / (1.0 + tt) ** 2
    elif k is KernelKind.GENERALIZED_GAUSSIAN:
        a = spec.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -a * np.power(tt, a - 1.0) * np.exp(-np.power(tt, a))
        if a > 1.0:
            out = np.where(tt == 0.0, 0.0, out)
        elif a == 1.0:
            out = np.where(tt == 0.0, -1.0, out)
    else:
        out = np.where(tt < 1.0, -1.0, 0.0)
    return _ret(out, t)


def log_neg_kappa_prime(spec: KernelSpec, t):
    """``log(-k'(t))`` computed without forming ``k'``; immune to underflow."""
    if not spec.differentiable:
        raise UnsupportedOperation(f"{spec.kind.value} kernel has no derivative")
    tt = _as_t(t)
    k = spec.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if k is KernelKind.GAUSSIAN:
            out = -tt
        elif k is KernelKind.LOGISTIC:
            s = np.atleast_1d(np.sqrt(tt))
            out = (np.log(4.0) - s - 2.0 * np.log1p(np.exp(-s))
                   + np.log(_half_tanh_ratio(s))).reshape(tt.shape)
        elif k is KernelKind.SIGMOID:
            s = np.atleast_1d(np.sqrt(tt))
            out = (np.log(2.0) - s - np.log1p(np.exp(-2.0 * s))
                   + np.log(_tanh_ratio(s))).reshape(tt.shape)
        elif k is KernelKind.CAUCHY:
            out = -2.0 * np.log1p(tt)
        elif k is KernelKind.GENERALIZED_GAUSSIAN:
            a = spec.alpha
            if a == 1.0:
                out = -tt
            else:
                out = math.log(a) + (a - 1.0) * np.log(tt) - np.power(tt, a)
        else:
            out = np.where(tt < 1.0, 0.0, -np.inf)
    return _ret(out, t)


def relative_slope(spec: KernelSpec, t):
    """Closed form of ``-k'(t) t / k(t)``, well defined where ``k`` underflows."""
    if not spec.differentiable:
        raise UnsupportedOperation(f"{spec.kind.value} kernel has no derivative")
    tt = _as_t(t)
    k = spec.kind
    if k is KernelKind.GAUSSIAN:
        out = tt.copy()
    elif k is KernelKind.LOGISTIC:
        s = np.sqrt(tt)
        out = s * np.tanh(s / 2.0) / 2.0
    elif k is KernelKind.SIGMOID:
        s = np.sqrt(tt)
        out = s * np.tanh(s) / 2.0
    elif k is KernelKind.CAUCHY:
        out = tt / (1.0 + tt)
    elif k is KernelKind.GENERALIZED_GAUSSIAN:
        out = spec.alpha * np.power(tt, spec.alpha)
    else:
        with np.errstate(divide="ignore"):
            out = np.where(tt < 1.0, tt / np.where(tt < 1.0, 1.0 - tt, 1.0), np.inf)
    return _ret(out, t)


def _check_level(level):
    if not (0.0 < level <= 1.0):
        raise DomainError(f"level must lie in (0, 1], got {level}")


def critical_radius(spec: KernelSpec, level: float) -> float:
    """Smallest ``t`` with ``k(t) <= level``."""
    _check_level(level)
    if level == 1.0:
        return 0.0
    k = spec.kind
    if k is KernelKind.BOX:
        return 1.0
    if k is KernelKind.GAUSSIAN:
        xi = math.log(1.0 / level)
    elif k is KernelKind.CAUCHY:
        xi = 1.0 / level - 1.0
    elif k is KernelKind.GENERALIZED_GAUSSIAN:
        xi = math.log(1.0 / level) ** (1.0 / spec.alpha)
    elif k is KernelKind.EPANECHNIKOV:
        xi = 1.0 - level
    else:
        return _bisect_radius(spec, level)
    # closed forms can land an ulp or two short of the level set
    for _ in range(64):
        if kappa(spec, xi) <= level:
            break
        xi = math.nextafter(xi, math.inf)
    return xi


def _bisect_radius(spec, level):
    lo, hi = 0.0, 1.0
    while kappa(spec, hi) > level:
        lo, hi = hi, 2.0 * hi
    for _ in range(BISECT_MAX_ITERS):
        if hi - lo <= BISECT_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if kappa(spec, mid) > level:
            lo = mid
        else:
            hi = mid
    return hi


_RDS = {
    KernelKind.GAUSSIAN: RdsParams(1.0, 1.0, 0.0, 1.0, 1.0),
    KernelKind.LOGISTIC: RdsParams(0.5, 0.5, 0.5, 0.5, 0.5),
    KernelKind.SIGMOID: RdsParams(0.5, 0.5, 0.5, 0.5, 0.5),
}


def rds_params(spec: KernelSpec):
    """Built-in relative-distance-smoothness constants, or ``None``."""
    if spec.kind is KernelKind.GENERALIZED_GAUSSIAN:
        a = spec.alpha
        return RdsParams(a, a, 0.0, a, a)
    return _RDS.get(spec.kind)


def kappa_prime_min_bound(spec: KernelSpec, xi: float):
    """Lower bound on ``min_{0<=t<=2 xi} k'(t) t / k(t)`` and whether it is certified.

    Cauchy and the relative-distance smooth kernels have analytic bounds.
    Anything else falls back to a uniform grid with a 1% safety margin,
    which is *not* a certificate.
    """
    if not spec.differentiable:
        raise UnsupportedOperation(f"{spec.kind.value} kernel has no derivative")
    if not (xi >= 0 and math.isfinite(xi)):
        raise DomainError(f"xi must be finite and non-negative, got {xi}")
    if spec.kind is KernelKind.CAUCHY:
        return -1.0, True
    p = rds_params(spec)
    if p is not None:
        return -p.c2 * (2.0 * xi) ** p.d2, True
    grid = np.linspace(0.0, 2.0 * xi, KPMIN_GRID_POINTS)
    vals = kappa(spec, grid)
    live = vals > 0
    if not np.any(live):
        return 0.0, False
    ratio = kappa_prime(spec, grid[live]) * grid[live] / vals[live]
    return KPMIN_SAFETY * float(np.min(ratio)), False


def kappa_prime_min(spec: KernelSpec, xi: float) -> float:
    return kappa_prime_min_bound(spec, xi)[0]


def gamma_for_epsilon(spec: KernelSpec, n: int, eps: float) -> float:
    """JL distortion that preserves the mode value to ``(1 - eps)``."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if not (0.0 < eps <= 1.0):
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    xi = critical_radius(spec, eps / (2.0 * n))
    kmin = kappa_prime_min(spec, xi)
    if kmin == 0.0:
        raise DegenerateKernelError(
            f"{spec.kind.value}: k'(t) t / k(t) vanishes on [0, {2 * xi:g}]"
        )
    return -eps / (2.0 * kmin)


def rds_check(spec: KernelSpec, params: RdsParams, t_grid) -> bool:
    t = _as_t(t_grid)
    r = relative_slope(spec, t)
    lower = params.c1 * np.power(t, params.d1) - params.q1
    upper = params.c2 * np.power(t, params.d2)
    return bool(np.all(lower <= r + RDS_SLACK) and np.all(r <= upper + RDS_SLACK))


def derivative_check(spec: KernelSpec, t_grid, rtol=1e-5, step=1e-6):
    """Compare ``kappa_prime`` with central differences; return failing ``t`` values.

    The step is ``step * max(1, t)``.  Near 0 it is capped at ``t / 2`` so the
    stencil stays inside the domain, and points whose stencil straddles the
    Epanechnikov kink are skipped.
    """
    t = _as_t(t_grid).ravel()
    h = step * np.maximum(1.0, t)
    h = np.minimum(h, t / 2.0)
    keep = h > 0
    if spec.kind is KernelKind.EPANECHNIKOV:
        keep &= np.abs(t - 1.0) > h
    t, h = t[keep], h[keep]
    fd = (kappa(spec, t + h) - kappa(spec, t - h)) / (2.0 * h)
    exact = kappa_prime(spec, t)
    bad = np.abs(exact - fd) > rtol * np.maximum(1.0, np.abs(exact))
    return t[bad]
