"""
Named test matrices and a synthetic SPD generator.

The ``paper-*`` fixtures are small 5x5 matrices that exhibit growth,
breakdown and the effect of look-ahead on incomplete factorizations.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sps

from .sparsecore import MatrixError, SparseSpd


def growth_matrix(delta: float = 0.5, c: float = 1.0) -> SparseSpd:
    """5x5 SPD matrix whose IC(0) factor grows like ``1/sqrt(delta)`` when
    ``c == 0`` (the (4,2) entry is then absent from the structure)."""
    a = np.array([
        [3.0, -2.0, 0.0, 2.0, 0.0],
        [-2.0, 3.0, -2.0, c, 0.0],
        [0.0, -2.0, 3.0, -2.0, 0.0],
        [2.0, c, -2.0, 8.0 + 2.0 * delta, 2.0],
        [0.0, 0.0, 0.0, 2.0, 8.0],
    ])
    return SparseSpd.from_dense(a)


def lookahead_matrix() -> SparseSpd:
    """IC(0) of this matrix has a zero (5,5) pivot in exact arithmetic; the
    zero already shows up in the diagonal after the third step."""
    return SparseSpd.from_dense([
        [3, -2, 0, 1, 2],
        [-2, 3, -2, 0, 0],
        [0, -2, 3, 0, -2],
        [1, 0, 0, 5, 0],
        [2, 0, -2, 0, 8],
    ])


def overflow_matrix() -> SparseSpd:
    """The (5,4) entry of its IC(0) factor is about 65738, beyond fp16."""
    return SparseSpd.from_dense([
        [3, -2, 0, 2, 0],
        [-2, 3, -2, 0, 0],
        [0, -2, 3, -2, 0],
        [2, 0, -2, 8.00007, 550],
        [0, 0, 0, 550, 60000],
    ])


def laplace2d(m: int) -> SparseSpd:
    """5-point Laplacian on an ``m x m`` grid (n = m**2), natural ordering."""
    t = sps.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(m, m))
    eye = sps.identity(m)
    a = sps.csr_matrix(sps.kron(eye, t) + sps.kron(t, eye))
    a.eliminate_zeros()  # kron of banded matrices stores explicit zeros
    return SparseSpd.from_scipy(a)


def synthetic_spd(n: int, density: float = 0.05, slack: float = 0.1,
                  stretch: float = 0.0, seed: int = 0,
                  max_tries: int = 20) -> SparseSpd:
    """Random sparse SPD matrix ``S (D + R + R^T) S``.

    ``R`` is strictly lower triangular with uniform(-1, 1) entries at the
    given density and ``D`` makes each row dominant by ``slack`` times its
    off-diagonal absolute sum (negative slack gives matrices that are not
    diagonally dominant).  Draws are checked with a dense Cholesky (skipped
    only for n > 2000 with positive slack) and rejected if not SPD.  ``S`` is a
    random diagonal with entries in ``[1, 10**stretch]``.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        r = sps.random(n, n, density=density, random_state=rng,
                       data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
        r = sps.tril(r, k=-1)
        off = r + r.T
        rowsum = np.asarray(abs(off).sum(axis=1)).ravel()
        d = np.maximum(rowsum * (1.0 + slack), 1e-3) + (rowsum == 0)
        a = off + sps.diags(d)
        if stretch:
            s = 10.0 ** (stretch * rng.uniform(0.0, 1.0, n))
            a = sps.diags(s) @ a @ sps.diags(s)
        a = sps.csr_matrix(a)
        # dominance proves SPD for clear positive slack; otherwise check
        if (slack > 1e-8 and n > 2000) or _is_spd(a.toarray()):
            return SparseSpd.from_scipy(a)
    raise MatrixError(f"no SPD draw in {max_tries} tries")


def synthetic_gram(n: int, density: float = 0.05, small: float = 0.1,
                   seed: int = 0, max_cond: float = 1e6,
                   max_tries: int = 20) -> SparseSpd:
    """SPD matrix ``L L^T`` from a random sparse lower triangular ``L`` with
    diagonal log-uniform in ``[small, 1]``.

    Incomplete factorizations of these drop fill that the exact factor
    needs, so they break down often.  Draws whose ``L`` has 2-norm
    condition number above ``max_cond`` are rejected, otherwise the product
    is often singular in floating point.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        low = sps.random(n, n, density=density, random_state=rng,
                         data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
        diag = np.exp(rng.uniform(np.log(small), 0.0, n))
        low = (sps.tril(low, k=-1) + sps.diags(diag)).toarray()
        if np.linalg.cond(low) <= max_cond:
            return SparseSpd.from_dense(low @ low.T)
    raise MatrixError(f"no well conditioned draw in {max_tries} tries")


def _is_spd(a) -> bool:
    """Cholesky succeeds with pivots clear of rounding-level noise."""
    try:
        l = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    eps = np.finfo(np.float64).eps
    return bool(np.min(np.diag(l)) ** 2 > a.shape[0] * eps * np.max(np.diag(a)))


FIXTURES = {
    "paper-5x5-c1": lambda delta=0.5: growth_matrix(delta, 1.0),
    "paper-5x5-c0": lambda delta=1e-4: growth_matrix(delta, 0.0),
    "paper-5x5-lookahead": lookahead_matrix,
    "paper-5x5-b3": overflow_matrix,
    # after l2 scaling, IC(0) needs a shift between 1e-3 and 2e-3 (about 1.49e-3)
    "shift-two-restarts": lambda: growth_matrix(0.14, 0.0),
    "laplace2d": lambda m=50: laplace2d(int(m)),
    "synthetic": lambda n=100, density=0.05, slack=0.1, stretch=0.0, seed=0:
        synthetic_spd(int(n), density, slack, stretch, int(seed)),
    "synthetic-gram": lambda n=100, density=0.05, small=0.1, seed=0:
        synthetic_gram(int(n), density, small, int(seed)),
}


def parse_fixture_spec(spec: str):
    """``"NAME"`` or ``"NAME:key=val,key=val"`` -> (name, kwargs)."""
    name, _, rest = spec.partition(":")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"bad fixture parameter {item!r}")
        kwargs[key.strip()] = float(val)
    return name, kwargs


def generate_fixture(spec: str, **kwargs) -> SparseSpd:
    """Build a named fixture, e.g. ``generate_fixture("laplace2d:m=20")``."""
    name, parsed = parse_fixture_spec(spec)
    parsed.update(kwargs)
    try:
        make = FIXTURES[name]
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; "
                         f"known: {', '.join(FIXTURES)}") from None
    return make(**parsed)
