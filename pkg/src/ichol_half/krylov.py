"""
Mixed precision iterative refinement with an incomplete Cholesky
preconditioner.

Residuals, the Krylov solver and the preconditioner application all run in
binary64; only the factor is held in low precision and its entries are
decoded column by column during the triangular solves.  The preconditioner
works on the scaled system ``S^-1 A S^-1``; the refinement driver owns the
scaling.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .factorize import IcFactor
from .halffloat import FP64
from .sparsecore import SparseSpd
from .symbolic import FillPattern

logger = logging.getLogger(__name__)

U64 = float(np.finfo(np.float64).eps) / 2


class Preconditioner:
    """``z = (L L^T)^-1 r`` with ``L`` an incomplete factor of the scaled
    matrix; ``scale`` holds the diagonal of ``S``."""

    def __init__(self, factor: IcFactor, scale=None):
        self.factor = factor
        n = factor.n
        self.scale = np.ones(n) if scale is None else np.asarray(scale, float)
        if self.scale.shape != (n,) or np.any(self.scale <= 0):
            raise ValueError("scale must be a positive vector of length n")
        diag = factor.diagonal()
        if np.any(diag == 0) or not np.all(np.isfinite(diag)):
            raise ValueError("factor has a zero or non-finite diagonal entry")

    @property
    def n(self) -> int:
        return self.factor.n

    def apply(self, r: np.ndarray) -> np.ndarray:
        pat = self.factor.pattern
        cp, ri = pat.col_ptr, pat.row_idx
        payload = self.factor.payload
        decode = self.factor.fmt.from_payload
        n = pat.n
        y = np.array(r, dtype=np.float64)
        # forward: L y = r, column oriented
        for j in range(n):
            col = decode(payload[cp[j]:cp[j + 1]])
            y[j] /= col[0]
            if col.size > 1:
                y[ri[cp[j] + 1:cp[j + 1]]] -= col[1:] * y[j]
        # backward: L^T z = y, column j of L is row j of L^T
        for j in range(n - 1, -1, -1):
            col = decode(payload[cp[j]:cp[j + 1]])
            if col.size > 1:
                y[j] -= col[1:] @ y[ri[cp[j] + 1:cp[j + 1]]]
            y[j] /= col[0]
        return y

    __call__ = apply


def identity_preconditioner(n: int, scale=None) -> Preconditioner:
    """Preconditioner built from the identity factor (fp64)."""
    pat = FillPattern(n, np.arange(n + 1), np.arange(n), np.zeros(n, np.int32))
    return Preconditioner(IcFactor(pat, np.ones(n), FP64), scale)


@dataclass
class IrConfig:
    delta: float = 1e3 * U64
    inner_tol: float = U64 ** 0.25
    max_inner: int = 1000
    itmax_outer: int = 20
    solver: str = "gmres"

    def __post_init__(self):
        if not self.delta > U64:
            raise ValueError("delta must exceed the unit roundoff")
        if not 0 < self.inner_tol < 1:
            raise ValueError("inner_tol must lie in (0, 1)")
        if self.max_inner < 1 or self.itmax_outer < 1:
            raise ValueError("iteration limits must be positive")
        if self.solver not in ("gmres", "cg"):
            raise ValueError(f"unknown solver {self.solver!r}")


class KrylovResult(NamedTuple):
    x: np.ndarray
    its: int
    converged: bool
    history: list


def _scaled_operator(a: SparseSpd, s: np.ndarray):
    full = a.full

    def op(v):
        return (full @ (v / s)) / s

    return op


def gmres_solve(a: SparseSpd, prec: Preconditioner, rhs, cfg: IrConfig = None):
    """Unrestarted left-preconditioned GMRES with modified Gram-Schmidt.

    Solves ``S^-1 A S^-1 y = rhs``.  Stops when the preconditioned residual
    norm falls to ``cfg.inner_tol`` times its initial value, or after
    ``cfg.max_inner`` iterations (then ``converged`` is False).
    ``history`` lists the preconditioned residual norm after each iteration,
    starting with the initial one.
    """
    cfg = cfg or IrConfig()
    op = _scaled_operator(a, prec.scale)
    n = a.n
    rhs = np.asarray(rhs, dtype=np.float64)
    z0 = prec.apply(rhs)
    beta = np.linalg.norm(z0)
    history = [beta]
    if beta == 0:
        return KrylovResult(np.zeros(n), 0, True, history)
    m = cfg.max_inner
    V = np.zeros((m + 1, n))
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[0] = z0 / beta
    target = cfg.inner_tol * beta
    its = 0
    converged = False
    for j in range(m):
        w = prec.apply(op(V[j]))
        for i in range(j + 1):
            H[i, j] = w @ V[i]
            w -= H[i, j] * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        happy = H[j + 1, j] == 0
        if not happy:
            V[j + 1] = w / H[j + 1, j]
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        rho = np.hypot(H[j, j], H[j + 1, j])
        cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
        H[j, j] = rho
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        its = j + 1
        history.append(abs(g[j + 1]))
        if happy or abs(g[j + 1]) <= target:
            converged = True
            break
    y = _upper_solve(H[:its, :its], g[:its])
    x = V[:its].T @ y
    return KrylovResult(x, its, converged, history)


def _upper_solve(R, g):
    y = np.zeros_like(g)
    for i in range(len(g) - 1, -1, -1):
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def cg_solve(a: SparseSpd, prec: Preconditioner, rhs, cfg: IrConfig = None):
    """Preconditioned conjugate gradients on ``S^-1 A S^-1 y = rhs``.

    Same stopping rule as `gmres_solve`, measured on ``M^-1 r``.  A
    non-positive curvature ``p^T A p`` ends the iteration unconverged.
    """
    cfg = cfg or IrConfig()
    op = _scaled_operator(a, prec.scale)
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.zeros(a.n)
    r = rhs.copy()
    z = prec.apply(r)
    znorm0 = np.linalg.norm(z)
    history = [znorm0]
    if znorm0 == 0:
        return KrylovResult(x, 0, True, history)
    target = cfg.inner_tol * znorm0
    p = z.copy()
    rz = r @ z
    for its in range(1, cfg.max_inner + 1):
        q = op(p)
        curv = p @ q
        if curv <= 0:
            logger.warning("CG: non-positive curvature %g at iteration %d",
                           curv, its)
            return KrylovResult(x, its, False, history)
        step = rz / curv
        x += step * p
        r -= step * q
        z = prec.apply(r)
        history.append(np.linalg.norm(z))
        if history[-1] <= target:
            return KrylovResult(x, its, True, history)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return KrylovResult(x, cfg.max_inner, False, history)


def backward_error(a: SparseSpd, b, x) -> float:
    """Normwise backward error ``|b - Ax|_inf / (|A|_inf |x|_inf + |b|_inf)``."""
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    num = np.max(np.abs(b - a.matvec(x))) if b.size else 0.0
    den = a.norm_inf() * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0)
    if den == 0:
        return 0.0
    return float(num / den)


@dataclass
class SolveReport:
    x: np.ndarray
    total_inner_its: int = 0
    outer_its: int = 0
    res_history: list = field(default_factory=list)
    converged: bool = False
    nc: bool = False

    @property
    def res(self) -> float:
        return self.res_history[-1] if self.res_history else float("nan")


def ir_driver(a: SparseSpd, b, prec: Preconditioner,
              cfg: IrConfig = None) -> SolveReport:
    """Iterative refinement: x <- x + d with ``A d = b - A x`` solved by a
    preconditioned Krylov method on the scaled system.

    Stops once the backward error is at most ``cfg.delta``, after
    ``cfg.itmax_outer`` corrections, or when an inner solve fails to converge.
    """
    cfg = cfg or IrConfig()
    solve = gmres_solve if cfg.solver == "gmres" else cg_solve
    s = prec.scale
    b = np.asarray(b, dtype=np.float64)
    rep = SolveReport(np.zeros(a.n))
    rep.res_history.append(backward_error(a, b, rep.x))
    while rep.res_history[-1] > cfg.delta and rep.outer_its < cfg.itmax_outer:
        r = b - a.matvec(rep.x)
        inner = solve(a, prec, r / s, cfg)
        rep.total_inner_its += inner.its
        rep.outer_its += 1
        rep.x = rep.x + inner.x / s
        rep.res_history.append(backward_error(a, b, rep.x))
        if not inner.converged:
            rep.nc = True
            break
    rep.converged = rep.res_history[-1] <= cfg.delta and not rep.nc
    hist = rep.res_history[1:]
    if any(y > x for x, y in zip(hist, hist[1:])):
        logger.debug("backward error increased during refinement: %s", hist)
    return rep
