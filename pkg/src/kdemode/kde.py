"""Datasets and unnormalized KDE evaluation."""

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, DomainError
from .kernels import KernelSpec, kappa

__all__ = ["Dataset", "KdeInstance", "evaluate", "evaluate_batch", "load_csv", "save_csv"]


class Dataset:
    """Immutable ``(n, d)`` array of KDE centers."""

    __slots__ = ("_points",)

    def __init__(self, points):
        arr = np.array(points, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DatasetError(f"dataset must be a non-empty (n, d) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DatasetError("dataset contains non-finite coordinates")
        arr.setflags(write=False)
        self._points = arr

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def d(self) -> int:
        return self._points.shape[1]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self._points.shape, dtype="<u8").tobytes())
        h.update(np.ascontiguousarray(self._points, dtype="<f8").tobytes())
        return h.hexdigest()

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d})"


@dataclass(frozen=True)
class KdeInstance:
    data: Dataset
    kernel: KernelSpec

    def __call__(self, x):
        return evaluate(self, x)

    def scaled_sqdist(self, x) -> np.ndarray:
        """``||x - m||^2 / sigma^2`` for every center, as an explicit sum of squares."""
        x = _query(self, x)
        diff = self.data.points - x
        return np.einsum("ij,ij->i", diff, diff) / self.kernel.bandwidth ** 2


def _query(inst, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != inst.data.d:
        raise DomainError(f"query must be a vector of dimension {inst.data.d}, got shape {x.shape}")
    return x


def evaluate(inst: KdeInstance, x) -> float:
    """Unnormalized KDE ``sum_m k(||x - m||^2 / sigma^2)``.

    The sum is exactly rounded (``math.fsum``), so the value does not depend on
    the order of the centers.
    """
    return math.fsum(kappa(inst.kernel, inst.scaled_sqdist(x)))


def evaluate_batch(inst: KdeInstance, xs) -> list:
    xs = list(xs)
    return [evaluate(inst, x) for x in xs]


def load_csv(path) -> Dataset:
    """Read one point per row, no header.  Ragged rows are rejected."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(rows)


def save_csv(path, points):
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in arr:
            w.writerow([repr(float(v)) for v in row])
