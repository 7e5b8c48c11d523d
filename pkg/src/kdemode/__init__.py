"""Approximate KDE mode finding through random-projection sketches."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .kernels import KernelKind, KernelSpec, RdsParams, parse_kernel  # noqa: E402
from .kde import Dataset, KdeInstance, evaluate, evaluate_batch, load_csv  # noqa: E402
from .sketch import JlFamily, JlMatrix, SketchPair, make_jl, project, sketch_with_retry  # noqa: E402
from .meanshift import Method, ModeResult, mean_shift, multi_restart  # noqa: E402
from .recovery import recover_convex, recover_nonconvex  # noqa: E402
from .lowdim import brute_force_mode, delta_for_eps  # noqa: E402
