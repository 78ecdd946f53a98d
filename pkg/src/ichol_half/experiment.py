"""
End-to-end runs: load -> rhs -> scale -> squeeze -> pattern -> shifted
factorization -> iterative refinement, summarized in a `RunReport`.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .factorize import FactorizationError, IcOptions, shifted_factorize
from .fixtures import generate_fixture
from .krylov import IrConfig, Preconditioner, ir_driver
from .sparsecore import make_rhs, read_matrix_market, scale_l2, squeeze
from .symbolic import level_pattern

MATRIX_DIR_ENV = "ICHOL_HALF_MATRIX_DIR"

# identifiers of the ill-conditioned SuiteSparse test set
SUITESPARSE_IDS = [
    "Boeing/msc01050", "HB/bcsstk11", "HB/bcsstk26", "HB/bcsstk24",
    "HB/bcsstk16", "Cylshell/s2rmt3m1", "Cylshell/s3rmt3m1",
    "Boeing/bcsstk38", "Boeing/msc10848", "Oberwolfach/t2dah_e",
    "Boeing/ct20stif", "DNVS/shipsec8", "GHS_psdef/hood", "Um/offshore",
]


def suitesparse_url(ident: str) -> str:
    return f"https://sparse.tamu.edu/MM/{ident}.tar.gz"


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    matrix: str
    level: int = 2
    ic: IcOptions = field(default_factory=lambda: IcOptions(lookahead=True))
    ir: IrConfig = field(default_factory=IrConfig)
    output: str = "json"
    seed: int = 0
    flush_tol: float = 1e-5
    identifier: Optional[str] = None

    def __post_init__(self):
        if not self.matrix:
            raise ValueError("a matrix source is required")
        if self.level < 0:
            raise ValueError("level must be non-negative")
        if self.output not in ("json", "csv"):
            raise ValueError(f"unknown output format {self.output!r}")


@dataclass
class RunReport:
    identifier: str
    n: int = 0
    nnz_a: int = 0
    nnz_al: int = 0
    level: int = 0
    precision: str = ""
    lookahead: bool = False
    gmw: Optional[float] = None
    solver: str = ""
    its: int = 0
    outer_its: int = 0
    n1: int = 0
    n2: int = 0
    n3: int = 0
    n4: int = 0
    nmod: int = 0
    alpha: float = 0.0
    restarts: int = 0
    breakdowns: str = ""
    factor_max: float = 0.0
    res: Optional[float] = None
    converged: bool = False
    nc: bool = False
    error: str = ""
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


CSV_COLUMNS = [f.name for f in dataclasses.fields(RunReport)]


def resolve_matrix(source: str, seed: int = 0):
    """Load a matrix from a path, ``fixture:SPEC`` or a SuiteSparse
    identifier found in the ``ICHOL_HALF_MATRIX_DIR`` cache."""
    if source.startswith("fixture:"):
        spec = source[len("fixture:"):]
        kwargs = {}
        if spec.split(":")[0].startswith("synthetic") and "seed=" not in spec:
            kwargs["seed"] = seed
        return generate_fixture(spec, **kwargs)
    path = Path(source)
    if path.is_file():
        return read_matrix_market(path)
    cache = os.environ.get(MATRIX_DIR_ENV)
    if cache:
        name = Path(source).name
        for cand in (Path(cache) / f"{name}.mtx",
                     Path(cache) / source / f"{name}.mtx",
                     Path(cache) / name / f"{name}.mtx",
                     Path(cache) / f"{source}.mtx"):
            if cand.is_file():
                return read_matrix_market(cand)
    raise FileNotFoundError(f"matrix {source!r} not found (set {MATRIX_DIR_ENV} "
                            f"to a directory of Matrix Market files)")


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run the whole pipeline once.

    Errors are raised as ExperimentError naming the failing stage, except a
    factorization that runs out of restarts: that still yields a report with
    ``converged=False``.
    """
    t0 = time.perf_counter()
    opts = cfg.ic
    fmt = opts.fmt
    rep = RunReport(identifier=cfg.identifier or cfg.matrix, level=cfg.level,
                    precision=opts.precision, lookahead=opts.lookahead,
                    gmw=opts.gmw, solver=cfg.ir.solver)

    def stage(name, fn, *args):
        try:
            return fn(*args)
        except FactorizationError:
            raise
        except Exception as exc:
            raise ExperimentError(name, exc) from exc

    a = stage("load", resolve_matrix, cfg.matrix, cfg.seed)
    rep.n, rep.nnz_a = a.n, a.nnz
    b = stage("rhs", make_rhs, a)
    s, a_hat = stage("scale", scale_l2, a)
    if fmt.storage_bits == 16:
        a_l = stage("squeeze", squeeze, a_hat, cfg.flush_tol, fmt)
    else:
        a_l = a_hat
    rep.nnz_al = a_l.nnz
    pattern = stage("symbolic", level_pattern, a_l, cfg.level)
    try:
        alpha, factor, stats = stage("factorize", shifted_factorize,
                                     a_l, pattern, opts)
    except FactorizationError as exc:
        stats = exc.stats
        _copy_stats(rep, stats)
        rep.error = f"factorize: {exc}"
        rep.wall_time = time.perf_counter() - t0
        return rep
    _copy_stats(rep, stats)
    rep.factor_max = factor.max_abs()
    prec = Preconditioner(factor, s)
    sol = stage("solve", ir_driver, a, b, prec, cfg.ir)
    rep.its = sol.total_inner_its
    rep.outer_its = sol.outer_its
    rep.res = sol.res
    rep.converged = sol.converged
    rep.nc = sol.nc
    rep.wall_time = time.perf_counter() - t0
    return rep


def _copy_stats(rep, stats):
    rep.n1, rep.n2, rep.n3, rep.n4 = stats.n1, stats.n2, stats.n3, stats.n4
    rep.nmod = stats.nmod
    rep.alpha = stats.alpha
    rep.restarts = stats.restarts
    rep.breakdowns = ";".join(str(f) for f in stats.breakdowns if not f.ok)


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.to_dict())
    return buf.getvalue()
