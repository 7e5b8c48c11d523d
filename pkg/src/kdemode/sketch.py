"""One-sided Johnson-Lindenstrauss sketches.

A raw JL matrix with ``E||P v||^2 = ||v||^2`` and two-sided distortion
``g = min(gamma, 1) / 3`` is rescaled by ``1 / sqrt(1 - g)``.  Squared
distances then land in ``[1, (1 + g) / (1 - g)]``, which is inside
``[1, 1 + gamma]``.
"""

import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DatasetError, DomainError, SketchFailure
from .kde import Dataset

__all__ = [
    "JlFamily",
    "JlMatrix",
    "SketchPair",
    "DEFAULT_CJL",
    "target_dim",
    "internal_gamma",
    "design_scale",
    "make_jl",
    "project",
    "verify_one_sided",
    "sketch_with_retry",
    "save_sketch",
    "load_sketch",
]

DEFAULT_CJL = 48.0
VERIFY_RTOL = 1e-12
MAGIC = b"KJLS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQBQ")


class JlFamily(enum.IntEnum):
    GAUSSIAN = 0
    RADEMACHER = 1
    CUSTOM = 255


def target_dim(n: int, gamma: float, delta: float, c_jl: float = DEFAULT_CJL) -> int:
    """Rows needed for the one-sided guarantee on ``n + 1`` points."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not c_jl > 0:
        raise DomainError(f"c_jl must be positive, got {c_jl}")
    raw = c_jl * math.log((n + 1) / delta) / min(1.0, gamma * gamma)
    # absorb last-ulp noise so exact products like 8 * 10 do not round up
    return max(1, math.ceil(raw - 1e-9 * max(1.0, raw)))


def internal_gamma(gamma: float) -> float:
    return min(gamma, 1.0) / 3.0


def design_scale(gamma: float) -> float:
    """Expected squared-norm gain ``E||P v||^2 / ||v||^2`` of the rescaled matrix."""
    return 1.0 / (1.0 - internal_gamma(gamma))


@dataclass(frozen=True, eq=False)
class JlMatrix:
    entries: np.ndarray
    family: JlFamily
    gamma_target: float
    seed: int

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def from_matrix(cls, entries, gamma_target=float("nan"), seed=0):
        """Wrap an explicit matrix (identity and other test hooks)."""
        arr = np.array(entries, dtype=float, copy=True, ndmin=2)
        return cls(arr, JlFamily.CUSTOM, gamma_target, seed)

    @classmethod
    def identity(cls, d: int):
        return cls.from_matrix(np.eye(d), gamma_target=0.0)


@dataclass(frozen=True, eq=False)
class SketchPair:
    pi: JlMatrix
    projected: Dataset
    source_fingerprint: str
    meta: dict = field(default_factory=dict)

    @property
    def w(self) -> int:
        return self.pi.rows


def make_jl(d: int, w: int, family=JlFamily.RADEMACHER, gamma_target: float = 1.0,
            seed: int = 0) -> JlMatrix:
    """Draw a ``w x d`` one-sided JL matrix; deterministic in ``(seed, family, w, d)``."""
    if d < 1 or w < 1:
        raise DomainError(f"dimensions must be positive, got w={w}, d={d}")
    if not gamma_target > 0:
        raise DomainError(f"gamma_target must be positive, got {gamma_target}")
    family = JlFamily(family)
    if family is JlFamily.CUSTOM:
        raise DomainError("custom matrices are built with JlMatrix.from_matrix")
    rng = np.random.default_rng(seed)
    scale = math.sqrt(design_scale(gamma_target) / w)
    if family is JlFamily.RADEMACHER:
        signs = rng.integers(0, 2, size=(w, d), dtype=np.int8)
        entries = np.where(signs == 1, scale, -scale)
    else:
        entries = rng.standard_normal((w, d)) * scale
    return JlMatrix(entries, family, float(gamma_target), int(seed))


def project(pi: JlMatrix, data: Dataset, meta=None) -> SketchPair:
    if data.d != pi.cols:
        raise DomainError(f"sketch expects dimension {pi.cols}, dataset has {data.d}")
    projected = Dataset(data.points @ pi.entries.T)
    return SketchPair(pi, projected, data.fingerprint(), dict(meta or {}))


def verify_one_sided(pi: JlMatrix, points: Dataset, gamma: float) -> bool:
    """Check ``||u - v||^2 <= ||P u - P v||^2 <= (1 + gamma) ||u - v||^2`` on all pairs."""
    if points.d != pi.cols:
        raise DomainError(f"sketch expects dimension {pi.cols}, points have {points.d}")
    if points.n < 2:
        return True
    src = pdist(points.points, "sqeuclidean")
    img = pdist(points.points @ pi.entries.T, "sqeuclidean")
    lower_ok = np.all(img >= src * (1.0 - VERIFY_RTOL))
    upper_ok = np.all(img <= (1.0 + gamma) * src * (1.0 + VERIFY_RTOL))
    return bool(lower_ok and upper_ok)


def sketch_with_retry(data: Dataset, gamma: float, delta: float,
                      family=JlFamily.RADEMACHER, seed: int = 0, max_attempts: int = 3,
                      c_jl: float = DEFAULT_CJL, w=None) -> SketchPair:
    """Draw sketches with seeds ``seed, seed + 1, ...`` until one verifies on the data.

    Only pairs of dataset points can be checked; the unknown mode is not.  The
    failure budget is split evenly and reported in ``meta``.
    """
    if max_attempts < 1:
        raise DomainError("max_attempts must be at least 1")
    if w is None:
        w = target_dim(data.n, gamma, delta, c_jl)
    for attempt in range(1, max_attempts + 1):
        s = seed + attempt - 1
        pi = make_jl(data.d, w, family, gamma, s)
        if verify_one_sided(pi, data, gamma):
            meta = {
                "attempts": attempt,
                "gamma": gamma,
                "delta_verified": delta / 2.0,
                "delta_residual": delta / 2.0,
                "c_jl": c_jl,
            }
            return project(pi, data, meta)
    raise SketchFailure(max_attempts)


def save_sketch(path, pi: JlMatrix):
    """Binary layout: header ``<4s I Q Q B Q`` then row-major little-endian f8."""
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, pi.rows, pi.cols, int(pi.family),
                          int(pi.seed) & 0xFFFFFFFFFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(pi.entries, dtype="<f8").tobytes())


def load_sketch(path) -> JlMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise DatasetError(f"{path}: truncated sketch header")
    magic, version, w, d, family, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported sketch version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * w * d:
        raise DatasetError(f"{path}: expected {w * d} entries, found {len(body) // 8}")
    entries = np.frombuffer(body, dtype="<f8").reshape(w, d).astype(float)
    try:
        fam = JlFamily(family)
    except ValueError:
        raise DatasetError(f"{path}: unknown family code {family}") from None
    return JlMatrix(entries, fam, float("nan"), seed)
