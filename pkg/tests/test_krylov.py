import numpy as np
import pytest
from scipy.linalg import solve_triangular

from ichol_half.factorize import IcFactor, IcOptions, ic_factorize, shifted_factorize
from ichol_half.fixtures import growth_matrix, laplace2d, synthetic_spd
from ichol_half.halffloat import FP16, FP64
from ichol_half.krylov import (U64, IrConfig, Preconditioner, backward_error,
                               cg_solve, gmres_solve, identity_preconditioner,
                               ir_driver)
from ichol_half.sparsecore import SparseSpd, make_rhs, scale_l2, squeeze
from ichol_half.symbolic import FillPattern, level_pattern

import oracles

DELTA = 1e3 * U64


def build(a, level=0, precision="fp64", **kw):
    s, ah = scale_l2(a)
    al = squeeze(ah, fmt=FP16) if precision == "fp16" else ah
    pat = level_pattern(al, level)
    _, factor, _ = shifted_factorize(al, pat, IcOptions(precision=precision, **kw))
    return s, ah, Preconditioner(factor, s)


def dense_apply(factor, r):
    l = factor.to_dense()
    y = solve_triangular(l, r, lower=True)
    return solve_triangular(l.T, y, lower=False)


def test_irconfig_defaults_and_validation():
    cfg = IrConfig()
    assert cfg.delta == pytest.approx(1.11e-13, rel=1e-2)
    assert cfg.inner_tol == U64 ** 0.25 and cfg.max_inner == 1000 and cfg.itmax_outer == 20
    for bad in (dict(delta=U64 / 2), dict(inner_tol=1.0), dict(inner_tol=0.0),
                dict(max_inner=0), dict(itmax_outer=0), dict(solver="bicg")):
        with pytest.raises(ValueError):
            IrConfig(**bad)


def test_apply_identity_and_scalar():
    r = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(identity_preconditioner(3)(r), r)
    pat = FillPattern(1, np.array([0, 1]), np.array([0]), np.array([0], np.int32))
    p = Preconditioner(IcFactor(pat, FP16.to_payload(np.array([2.0])), FP16))
    assert p(np.array([4.0]))[0] == 1.0


def test_apply_rejects_bad_inputs():
    pat = FillPattern(1, np.array([0, 1]), np.array([0]), np.array([0], np.int32))
    with pytest.raises(ValueError):
        Preconditioner(IcFactor(pat, np.array([0.0]), FP64))
    with pytest.raises(ValueError):
        identity_preconditioner(2, scale=[1.0, -1.0])


def test_apply_growth_factor_matches_dense_solve():
    a = growth_matrix(0.5, 1.0)
    at = ic_factorize(a, level_pattern(a, 0), IcOptions(precision="fp16"))
    p = Preconditioner(at.factor)
    e1 = np.eye(5)[0]
    np.testing.assert_allclose(p(e1), dense_apply(at.factor, e1), rtol=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_apply_matches_dense_solve_on_random_fixtures(seed):
    rng = np.random.default_rng(seed)
    a = synthetic_spd(int(rng.integers(10, 100)), density=0.1, slack=0.05, seed=seed)
    _, ah = scale_l2(a)
    for prec in ("fp16", "bf16", "fp64"):
        _, f, _ = shifted_factorize(ah, level_pattern(ah, 1), IcOptions(precision=prec))
        r = rng.standard_normal(a.n)
        np.testing.assert_allclose(Preconditioner(f)(r), dense_apply(f, r), rtol=1e-12)


def test_gmres_trivial_cases():
    eye = SparseSpd.from_dense(np.eye(4))
    res = gmres_solve(eye, identity_preconditioner(4), np.eye(4)[0])
    assert res.its == 1 and res.converged
    np.testing.assert_allclose(res.x, np.eye(4)[0])
    zero = gmres_solve(eye, identity_preconditioner(4), np.zeros(4))
    assert zero.its == 0 and zero.converged and not zero.x.any()


def test_gmres_exact_preconditioner():
    a = SparseSpd.from_dense(np.diag([1.0, 10.0]))
    s, ah, p = build(a)
    res = gmres_solve(a, p, np.array([1.0, 1.0]))
    assert res.converged and res.its <= 2


def _laplace_setup(precision="fp64", level=0):
    a = laplace2d(10)
    s, ah, p = build(a, level=level, precision=precision)
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(a.n)
    ad = ah.full.toarray()
    prec_dense = lambda v: dense_apply(p.factor, v)
    return a, s, ah, p, rhs, ad, prec_dense


def test_gmres_matches_reference():
    a, s, ah, p, rhs, ad, pd = _laplace_setup()
    cfg = IrConfig(inner_tol=1e-10)
    got = gmres_solve(a, p, rhs, cfg)
    x_ref, h_ref = oracles.dense_gmres(lambda v: ad @ v, pd, rhs, 1e-10, 1000)
    assert got.converged and got.its == len(h_ref) - 1
    np.testing.assert_allclose(got.history, h_ref, rtol=1e-10, atol=1e-10 * h_ref[0])
    np.testing.assert_allclose(got.x, x_ref, rtol=1e-10, atol=1e-10 * np.abs(x_ref).max())


def test_gmres_history_nonincreasing():
    a, s, ah, p, rhs, *_ = _laplace_setup("fp16", 1)
    h = gmres_solve(a, p, rhs, IrConfig(inner_tol=1e-12)).history
    assert all(y <= x * (1 + 1e-12) for x, y in zip(h, h[1:]))


def test_gmres_reports_nonconvergence():
    a = laplace2d(10)
    s, _ = scale_l2(a)
    res = gmres_solve(a, identity_preconditioner(a.n, s), np.ones(a.n), IrConfig(max_inner=3))
    assert res.its == 3 and not res.converged


def test_cg_trivial_cases():
    eye = SparseSpd.from_dense(np.eye(3))
    res = cg_solve(eye, identity_preconditioner(3), np.array([1.0, 2.0, 3.0]))
    assert res.its == 1 and res.converged
    a = SparseSpd.from_dense(np.diag([1.0, 4.0]))
    s, ah, p = build(a)
    res = cg_solve(a, p, np.array([1.0, 1.0]))
    assert res.converged and res.its <= 2


def test_cg_matches_reference():
    a, s, ah, p, rhs, ad, pd = _laplace_setup()
    minv = np.linalg.inv(p.factor.to_dense() @ p.factor.to_dense().T)
    got = cg_solve(a, p, rhs, IrConfig(inner_tol=1e-10))
    x_ref, h_ref = oracles.dense_pcg(ad, minv, rhs, 1e-10, 1000)
    assert got.converged and got.its == len(h_ref) - 1
    np.testing.assert_allclose(got.history, h_ref, rtol=1e-10, atol=1e-10 * h_ref[0])
    np.testing.assert_allclose(got.x, x_ref, rtol=1e-10, atol=1e-10 * np.abs(x_ref).max())


def test_cg_detects_indefinite_operator(caplog):
    a = SparseSpd.from_dense([[1.0, 2.0], [2.0, 1.0]])
    res = cg_solve(a, identity_preconditioner(2), np.array([1.0, -1.0]))
    assert not res.converged
    assert "curvature" in caplog.text


def test_backward_error_examples():
    eye = SparseSpd.from_dense(np.eye(3))
    assert backward_error(eye, np.ones(3), np.ones(3)) == 0.0
    assert backward_error(eye, np.ones(3), np.zeros(3)) == 1.0
    d = SparseSpd.from_dense(np.diag([2.0, 3.0]))
    x = np.array([1.0, 1.0 + 1e-8])
    got = backward_error(d, np.array([2.0, 3.0]), x)
    assert got == pytest.approx(3e-8 / (3 * (1 + 1e-8) + 3), rel=1e-6)
    assert backward_error(eye, np.zeros(3), np.zeros(3)) == 0.0


def test_ir_identity():
    eye = SparseSpd.from_dense(np.eye(5))
    rep = ir_driver(eye, np.ones(5), identity_preconditioner(5))
    # x = (b/|b|) * |b| is exact only up to one rounding
    assert rep.converged and rep.outer_its == 1 and rep.res <= U64
    assert rep.res_history[0] == 1.0


@pytest.mark.parametrize("solver", ["gmres", "cg"])
def test_ir_laplace_fp16(solver):
    a = laplace2d(20)
    s, ah, p = build(a, level=2, precision="fp16", lookahead=True)
    b = make_rhs(a)
    rep = ir_driver(a, b, p, IrConfig(solver=solver))
    assert rep.converged and rep.res <= DELTA and not rep.nc
    assert rep.res == pytest.approx(backward_error(a, b, rep.x))
    np.testing.assert_allclose(rep.x, np.ones(a.n), rtol=1e-10)


def test_ir_solvers_agree():
    a = synthetic_spd(150, density=0.05, slack=0.02, stretch=2, seed=4)
    s, ah, p = build(a, level=1, precision="fp16")
    b = make_rhs(a)
    g = ir_driver(a, b, p, IrConfig(solver="gmres"))
    c = ir_driver(a, b, p, IrConfig(solver="cg"))
    assert g.converged and c.converged
    assert g.res <= DELTA and c.res <= DELTA
    assert np.allclose(g.x, c.x, rtol=1e-9)


def test_identity_preconditioner_through_scaling():
    a = synthetic_spd(40, density=0.2, slack=0.1, stretch=2, seed=8)
    s, ah = scale_l2(a)
    b = make_rhs(a)
    p = identity_preconditioner(a.n, s)
    cfg = IrConfig(inner_tol=1e-8, itmax_outer=1)
    got = gmres_solve(a, p, b / s, cfg)
    ad = ah.full.toarray()
    y_ref, h_ref = oracles.dense_gmres(lambda v: ad @ v, lambda v: v, b / s, 1e-8, 1000)
    np.testing.assert_allclose(got.history, h_ref, rtol=1e-9, atol=1e-12 * h_ref[0])
    rep = ir_driver(a, b, p, IrConfig())
    assert rep.converged
    assert backward_error(a, b, rep.x) == rep.res <= DELTA


def test_ir_marks_inner_nonconvergence():
    a = laplace2d(20)
    s, _ = scale_l2(a)
    rep = ir_driver(a, make_rhs(a), identity_preconditioner(a.n, s), IrConfig(max_inner=5))
    assert rep.nc and not rep.converged and rep.outer_its == 1
    assert rep.total_inner_its == 5 and len(rep.res_history) == 2


def test_ir_outer_cap():
    a = laplace2d(20)
    s, _ = scale_l2(a)
    rep = ir_driver(a, make_rhs(a), identity_preconditioner(a.n, s),
                    IrConfig(inner_tol=0.5, itmax_outer=2))
    assert rep.outer_its == 2 and not rep.converged and not rep.nc
