"""
fp16 IC preconditioned refinement on a 2D Laplacian
===================================================

The five point Laplacian on a 50x50 grid, IC(2) stored in binary16, and
refinement to fp64 backward error with either GMRES or CG as the inner
solver.  Also prints the residual history of the outer loop.
"""
import time

from ichol_half import (IcOptions, IrConfig, Preconditioner, generate_fixture,
                        ir_driver, level_pattern, make_rhs, scale_l2,
                        shifted_factorize, squeeze)
from ichol_half.halffloat import FP16

a = generate_fixture("laplace2d:m=50")
b = make_rhs(a)
s, ah = scale_l2(a)
al = squeeze(ah, fmt=FP16)

for level in (0, 1, 2):
    pat = level_pattern(al, level)
    alpha, factor, stats = shifted_factorize(al, pat, IcOptions(precision="fp16", lookahead=True))
    prec = Preconditioner(factor, s)
    print(f"\nIC({level}): nnz(L)={pat.nnz}, shift={alpha}, breakdowns={stats.n1}")
    for solver in ("gmres", "cg"):
        t0 = time.perf_counter()
        rep = ir_driver(a, b, prec, IrConfig(solver=solver))
        hist = " ".join(f"{r:.1e}" for r in rep.res_history)
        print(f"  {solver:<5} inner its={rep.total_inner_its:>4} outer={rep.outer_its} "
              f"res={rep.res:.2e} ({time.perf_counter() - t0:.2f}s)  [{hist}]")
