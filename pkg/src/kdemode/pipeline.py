"""Sketch, solve, recover: the end-to-end experiment driver."""

import csv
import dataclasses
import json
import logging
import math
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import __version__
from .errors import BudgetExceeded, DomainError, KdeModeError
from .kde import Dataset, KdeInstance, load_csv
from .kernels import KernelSpec, gamma_for_epsilon, parse_kernel
from .lowdim import DEFAULT_BUDGET, brute_force_mode
from .meanshift import DEFAULT_TOL, multi_restart
from .recovery import recover_convex, recover_nonconvex
from .sketch import DEFAULT_CJL, JlFamily, make_jl, project, target_dim

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "PipelineError",
    "auto_dims",
    "derive_seed",
    "run_pipeline",
    "thread_cap",
]

log = logging.getLogger(__name__)

MAX_SKETCH_ENTRIES = 200_000_000


class PipelineError(KdeModeError):
    """One or more trials failed; ``report`` holds everything that did finish."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class ExperimentConfig:
    data_path: Optional[str] = None
    kernel: str = "gaussian@1"
    eps: float = 0.1
    delta: float = 0.1
    c_jl: float = DEFAULT_CJL
    dims: Union[str, list] = "auto"
    trials: int = 10
    baseline_iters: int = 100
    baseline_restarts: int = 60
    sketched_iters: int = 10
    sketched_restarts: int = 30
    seed: int = 0
    method: str = "meanshift"
    recovery: str = "convex"
    family: str = "rademacher"
    tol: float = DEFAULT_TOL
    budget: int = DEFAULT_BUDGET
    output: Optional[str] = None

    def validate(self):
        for name in ("trials", "baseline_iters", "baseline_restarts",
                     "sketched_iters", "sketched_restarts", "budget"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")
        if not 0 < self.eps < 1:
            raise DomainError("eps must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise DomainError("delta must lie in (0, 1)")
        if self.c_jl <= 0:
            raise DomainError("c_jl must be positive")
        if self.method not in ("meanshift", "brute"):
            raise DomainError(f"unknown method {self.method!r}")
        if self.recovery not in ("convex", "nonconvex"):
            raise DomainError(f"unknown recovery {self.recovery!r}")
        if self.family.upper() not in JlFamily.__members__ or self.family.lower() == "custom":
            raise DomainError(f"unknown JL family {self.family!r}")
        if self.dims != "auto":
            if not self.dims or any(int(w) < 1 for w in self.dims):
                raise DomainError("dims must be 'auto' or a list of positive integers")
        parse_kernel(self.kernel)
        return self

    @classmethod
    def from_json(cls, path, **overrides):
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise DomainError(f"{path}: config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise DomainError(f"{path}: unknown config keys {sorted(unknown)}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


@dataclass
class ExperimentReport:
    config: dict
    baseline: dict
    dims: list
    records: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    version: str = __version__

    def to_dict(self):
        return dataclasses.asdict(self)

    def write(self, outdir):
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
        cols = ["w", "trial", "seed", "sketched_value", "recovered_value", "wall_time", "status"]
        with open(os.path.join(outdir, "trials.csv"), "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            wr.writeheader()
            wr.writerows(self.records)


def thread_cap() -> int:
    raw = os.environ.get("KDE_MODE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise DomainError(f"KDE_MODE_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(8, os.cpu_count() or 1))


def derive_seed(master: int, tag: str, w: int = 0, trial: int = 0) -> int:
    """Child seed from ``(master, tag, w, trial)``; independent of execution order."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(tag.encode()), int(w), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def auto_dims(kernel: KernelSpec, n: int, eps: float, delta: float,
              c_jl: float = DEFAULT_CJL) -> list:
    """Sweep ``{w*/8, w*/4, w*/2, w*}`` around the guarantee-level dimension ``w*``."""
    gamma = gamma_for_epsilon(kernel, n, eps)
    w_star = target_dim(n, gamma, delta, c_jl)
    return sorted({math.ceil(w_star / 8), math.ceil(w_star / 4), math.ceil(w_star / 2), w_star})


def _sketch_gamma(kernel, n, eps):
    try:
        return gamma_for_epsilon(kernel, n, eps)
    except KdeModeError:
        return eps


def run_pipeline(config: ExperimentConfig, data: Optional[Dataset] = None,
                 sketch_factory=None) -> ExperimentReport:
    """Run the baseline and every ``(w, trial)`` job; deterministic given ``config``.

    ``sketch_factory(d, w, seed)`` replaces the random JL draw (used by tests
    to inject identity sketches).  Trial-level failures are recorded, the
    partial report is written, and :class:`PipelineError` is raised.
    """
    config.validate()
    if data is None:
        if config.data_path is None:
            raise DomainError("no dataset given")
        data = load_csv(config.data_path)
    kernel = parse_kernel(config.kernel)
    inst = KdeInstance(data, kernel)
    family = JlFamily[config.family.upper()]

    if config.dims == "auto":
        dims = auto_dims(kernel, data.n, config.eps, config.delta, config.c_jl)
    else:
        dims = sorted({int(w) for w in config.dims})
    if sketch_factory is None:
        for w in dims:
            if w * data.d > MAX_SKETCH_ENTRIES:
                raise BudgetExceeded(w * data.d, MAX_SKETCH_ENTRIES, what="sketch entries")
    gamma = _sketch_gamma(kernel, data.n, config.eps)

    t0 = time.perf_counter()
    base = multi_restart(inst, config.baseline_restarts, config.baseline_iters, config.tol,
                         seed=derive_seed(config.seed, "baseline"))
    baseline = {"value": base.value, "restart": base.meta.get("restart"),
                "wall_time": time.perf_counter() - t0}
    log.info("baseline value %.6g", base.value)

    def trial(w, k):
        s = derive_seed(config.seed, "sketch", w, k)
        rec = {"w": w, "trial": k, "seed": s}
        start = time.perf_counter()
        try:
            pi = sketch_factory(data.d, w, s) if sketch_factory else make_jl(
                data.d, w, family, gamma, s)
            sk = project(pi, data)
            low = KdeInstance(sk.projected, kernel)
            if config.method == "meanshift":
                sol = multi_restart(low, config.sketched_restarts, config.sketched_iters,
                                    config.tol, seed=derive_seed(config.seed, "solve", w, k))
            else:
                sol = brute_force_mode(low, config.eps, config.budget)
            if config.recovery == "convex":
                hi = recover_convex(data, sk, sol.point, kernel)
            else:
                hi = recover_nonconvex(data, sk, sol.point, config.eps, kernel)
            rec.update(sketched_value=sol.value, recovered_value=hi.value, status="ok")
        except KdeModeError as exc:
            rec.update(sketched_value=None, recovered_value=None,
                       status=f"failed: {type(exc).__name__}: {exc}")
        rec["wall_time"] = time.perf_counter() - start
        return rec

    jobs = [(w, k) for w in dims for k in range(config.trials)]
    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        records = list(pool.map(lambda job: trial(*job), jobs))

    aggregates = []
    for w in dims:
        vals = [r["recovered_value"] for r in records if r["w"] == w and r["status"] == "ok"]
        aggregates.append({
            "w": w,
            "count": len(vals),
            "mean": float(np.mean(vals)) if vals else None,
            "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else (0.0 if vals else None),
        })
    echo = dataclasses.asdict(config)
    report = ExperimentReport(echo, baseline, dims, records, aggregates)
    if config.output:
        report.write(config.output)
    failed = [r for r in records if r["status"] != "ok"]
    if failed:
        first = failed[0]
        raise PipelineError(f"{len(failed)} of {len(records)} trials failed; first "
                            f"(w={first['w']}, trial={first['trial']}): {first['status']}",
                            report)
    return report
