"""
Right-looking incomplete Cholesky factorization with explicit, overflow-free
breakdown tests.

Breakdown kinds:

    B1  pivot (before its square root) below ``tau_u``
    B2  scaling the pivot column would overflow
    B3  an update ``l_ij - l_ik * l_jk`` would overflow
    B4  the GMW modification ``(l_kmax / beta)**2`` would overflow

All arithmetic is done in the factorization format with one rounding per
operation.  Within a major step the column updates are independent, so each
step is evaluated as a handful of vectorized operations; the outcome (values
and the first breakdown met in loop order) is the same as the scalar loop.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .halffloat import FormatParams, get_format, safe_difference, safe_product
from .sparsecore import HalfMatrix, SparseSpd
from .symbolic import FillPattern

logger = logging.getLogger(__name__)

DEFAULT_TAU = {"fp16": 1e-5, "bf16": 1e-5, "fp32": 1e-30, "fp64": 1e-20}


class Breakdown(enum.IntEnum):
    OK = 0
    B1 = 1
    B2 = 2
    B3 = 3
    B4 = 4


@dataclass(frozen=True)
class BreakdownFlag:
    """Outcome of one factorization attempt.

    ``column`` is the 1-based major step at which the event was detected
    (0 when the factorization completed).
    """

    kind: Breakdown = Breakdown.OK
    column: int = 0

    @property
    def ok(self) -> bool:
        return self.kind is Breakdown.OK

    def __str__(self):
        return "OK" if self.ok else f"{self.kind.name}@{self.column}"


@dataclass(frozen=True)
class IcOptions:
    precision: str = "fp16"
    tau_u: Optional[float] = None
    lookahead: bool = False
    gmw: Optional[float] = None
    shift_init: float = 1e-3
    max_restarts: int = 40

    def __post_init__(self):
        fmt = get_format(self.precision)
        object.__setattr__(self, "precision", fmt.name)
        if self.tau_u is None:
            object.__setattr__(self, "tau_u", DEFAULT_TAU[fmt.name])
        # the test is applied before the square root, so 1/sqrt(tau) must fit
        if not (self.tau_u > 0 and 1.0 / math.sqrt(self.tau_u) <= fmt.x_max):
            raise ValueError(f"tau_u={self.tau_u} too small for {fmt.name}")
        if self.gmw is not None:
            if not self.gmw > 0:
                raise ValueError("GMW beta must be positive")
            if self.lookahead:
                raise ValueError("GMW modification and look-ahead are "
                                 "mutually exclusive")
        if not self.shift_init > 0:
            raise ValueError("shift_init must be positive")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be non-negative")

    @property
    def fmt(self) -> FormatParams:
        return get_format(self.precision)


@dataclass(frozen=True, eq=False)
class IcFactor:
    """Incomplete Cholesky factor; ``payload`` is stored in the factorization
    format (float16/float32/float64, or uint16 bit patterns for bfloat16)."""

    pattern: FillPattern
    payload: np.ndarray
    fmt: FormatParams

    @property
    def n(self) -> int:
        return self.pattern.n

    def decoded(self) -> np.ndarray:
        return self.fmt.from_payload(self.payload)

    def diagonal(self) -> np.ndarray:
        return self.fmt.from_payload(self.payload[self.pattern.col_ptr[:-1]])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.pattern.row_idx, self.pattern.col_idx] = self.decoded()
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.decoded()))) if self.n else 0.0


@dataclass
class Attempt:
    """One factorization attempt.  ``pivots`` holds the diagonal values
    tested against ``tau_u`` (before the square root) at each major step
    reached, including the failing one."""

    factor: Optional[IcFactor]
    flag: BreakdownFlag
    nmod: int = 0
    pivots: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ok(self) -> bool:
        return self.flag.ok


@dataclass
class FactorStats:
    n1: int = 0
    n2: int = 0
    n3: int = 0
    n4: int = 0
    nmod: int = 0
    alpha: float = 0.0
    restarts: int = 0
    alphas: list = field(default_factory=list)
    breakdowns: list = field(default_factory=list)

    def record(self, flag: BreakdownFlag):
        self.breakdowns.append(flag)
        if not flag.ok:
            name = f"n{int(flag.kind)}"
            setattr(self, name, getattr(self, name) + 1)


class FactorizationError(RuntimeError):
    """The shift driver ran out of restarts."""

    def __init__(self, msg, stats: FactorStats):
        super().__init__(msg)
        self.stats = stats


@dataclass(frozen=True)
class _Step:
    tgt: np.ndarray    # positions updated at this step, ordered by (j, i)
    src_i: np.ndarray  # position of l_ik
    src_j: np.ndarray  # position of l_jk
    col: np.ndarray    # column j of each update
    diag: np.ndarray   # indices into tgt that are diagonal entries


@lru_cache(maxsize=8)
def _plan(pattern: FillPattern):
    """Per-step index arrays for the right-looking updates of ``pattern``."""
    n = pattern.n
    cp, ri = pattern.col_ptr, pattern.row_idx
    keys = pattern.col_idx * n + ri
    steps = []
    empty = np.zeros(0, dtype=np.int64)
    for k in range(n):
        lo, hi = cp[k] + 1, cp[k + 1]
        m = hi - lo
        if m == 0:
            steps.append(None)
            continue
        rows = ri[lo:hi]
        pos = np.arange(lo, hi)
        a, b = np.triu_indices(m)  # a indexes j, b indexes i >= j
        want = rows[a] * n + rows[b]
        at = np.minimum(np.searchsorted(keys, want), keys.size - 1)
        hit = keys[at] == want
        a, b = a[hit], b[hit]
        tgt = at[hit]
        steps.append(_Step(tgt, pos[b], pos[a], rows[a],
                           np.flatnonzero(a == b) if tgt.size else empty))
    return steps


def _working_values(a) -> SparseSpd:
    if isinstance(a, HalfMatrix):
        return a.decoded()
    return a


def _initial_values(a, pattern: FillPattern, alpha: float = 0.0):
    a = _working_values(a)
    if a.n != pattern.n:
        raise ValueError("matrix and pattern dimensions differ")
    vals = np.zeros(pattern.nnz)
    vals[pattern.positions(a.col_ptr, a.row_idx)] = a.values
    if alpha:
        vals[pattern.col_ptr[:-1]] += alpha
    return vals


def ic_factorize(a_l, pattern: FillPattern, opts: IcOptions) -> Attempt:
    """One factorization attempt of ``a_l`` restricted to ``pattern``.

    Entries are rounded to the factorization format first.  Breakdown is
    reported through ``Attempt.flag``; no exception is raised for it.
    """
    return _factorize_values(_initial_values(a_l, pattern), pattern, opts)


def _factorize_values(init, pattern, opts):
    fmt = opts.fmt
    tau = opts.tau_u
    beta = opts.gmw
    lookahead = opts.lookahead and beta is None
    sqrt_xmax = fmt.sqrt_x_max
    vals = fmt.round(init)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"matrix entries overflow {fmt.name}")
    cp = pattern.col_ptr
    steps = _plan(pattern)
    nmod = 0
    pivots = np.zeros(pattern.n)

    def fail(kind, k, reached):
        return Attempt(None, BreakdownFlag(kind, k + 1), nmod, pivots[:reached])

    if lookahead and pattern.n and np.any(vals[cp[:-1]] < tau):
        return fail(Breakdown.B1, 0, 0)

    for k in range(pattern.n):
        dk, lo, hi = cp[k], cp[k] + 1, cp[k + 1]
        d = vals[dk]
        sub = vals[lo:hi]
        lkmax = float(np.max(np.abs(sub))) if hi > lo else 0.0
        if beta is not None:
            t = lkmax / beta
            if t > sqrt_xmax:
                return fail(Breakdown.B4, k, k)
            m2 = fmt.round_scalar(t * t)
            if m2 > d:
                d = m2
                nmod += 1
        pivots[k] = d
        if d < tau:
            return fail(Breakdown.B1, k, k + 1)
        lkk = fmt.round_scalar(math.sqrt(d))
        if not (lkk >= 1.0 or lkk >= lkmax / fmt.x_max):
            return fail(Breakdown.B2, k, k + 1)
        vals[dk] = lkk
        if hi == lo:
            continue
        vals[lo:hi] = fmt.round(sub / lkk)

        st = steps[k]
        b = vals[st.src_i]
        c = vals[st.src_j]
        a = vals[st.tgt]
        with np.errstate(over="ignore", invalid="ignore"):
            if np.max(np.abs(vals[lo:hi])) < sqrt_xmax:
                ok = np.ones(b.size, dtype=bool)  # no product can overflow
            else:
                ok = safe_product(b, c, fmt)
            w = fmt.round(b * c)
            ok &= safe_difference(a, np.where(ok, w, 0.0), fmt)
            new = fmt.round(a - w)
        bad3 = np.flatnonzero(~ok)
        j3 = st.col[bad3[0]] if bad3.size else None
        j1 = None
        if lookahead:
            low = np.flatnonzero(new[st.diag] < tau)
            if low.size:
                j1 = st.col[st.diag[low[0]]]
        if j3 is not None and (j1 is None or j3 <= j1):
            return fail(Breakdown.B3, k, k + 1)
        if j1 is not None:
            return fail(Breakdown.B1, k, k + 1)
        vals[st.tgt] = new

    return Attempt(IcFactor(pattern, fmt.to_payload(vals), fmt),
                   BreakdownFlag(), nmod, pivots)


def gmw_adjust(l_kk: float, l_kmax: float, beta: float, fmt: FormatParams):
    """GMW(beta) pivot modification ``max(l_kk, (l_kmax/beta)**2)``.

    Returns ``(new_l_kk, modified)``, or None when the candidate value would
    overflow ``fmt`` (a B4 breakdown).
    """
    t = l_kmax / beta
    if t > fmt.sqrt_x_max:
        return None
    m2 = fmt.round_scalar(t * t)
    if m2 > l_kk:
        return m2, True
    return l_kk, False


def shifted_factorize(a_hat, pattern: FillPattern, opts: IcOptions):
    """Factorize ``a_hat + alpha*I`` for alpha = 0, alpha_S, 2 alpha_S, ...
    until an attempt succeeds.

    The shift is added to the diagonal in binary64 before the entries are
    rounded to the factorization format.  Returns ``(alpha, factor, stats)``;
    raises FactorizationError after ``opts.max_restarts`` restarts.
    """
    stats = FactorStats()
    base = _initial_values(a_hat, pattern)
    diag = pattern.col_ptr[:-1]
    alpha = 0.0
    while True:
        vals = base.copy()
        vals[diag] += alpha
        stats.alphas.append(alpha)
        attempt = _factorize_values(vals, pattern, opts)
        stats.record(attempt.flag)
        if attempt.ok:
            stats.alpha = alpha
            stats.nmod = attempt.nmod
            return alpha, attempt.factor, stats
        logger.info("breakdown %s with shift %g", attempt.flag, alpha)
        if stats.restarts >= opts.max_restarts:
            raise FactorizationError(
                f"no factorization after {stats.restarts} restarts "
                f"(last shift {alpha:g}, last breakdown {attempt.flag})", stats)
        stats.restarts += 1
        alpha = max(2 * alpha, opts.shift_init)
