"""
Where incomplete Cholesky fails
===============================

Four small SPD matrices, each provoking a different failure mode of a
right-looking IC factorization.  The same factorization is run with and
without look-ahead and in several precisions.
"""
from ichol_half import IcOptions, generate_fixture, ic_factorize, level_pattern, scale_l2


def attempt(a, level=0, **opts):
    return ic_factorize(a, level_pattern(a, level), IcOptions(**opts))


# %%
# Dropped fill destroys positivity.  With c=1 the (4,2) entry is present
# and IC(0) is exact; with c=0 the last pivot is about 8 - 2/delta.
for spec in ("paper-5x5-c1", "paper-5x5-c0:delta=1e-4"):
    at = attempt(generate_fixture(spec), precision="fp64")
    print(f"{spec:<26} {str(at.flag):<6} pivots={[float(f'{d:.6g}') for d in at.pivots]}")

# %%
# Look-ahead tests every updated diagonal after each step, so a negative
# pivot is seen as soon as it appears instead of when it is reached.
a = generate_fixture("paper-5x5-lookahead")
print("\nlook-ahead matrix, fp64")
print("  plain:     ", attempt(a, precision="fp64").flag)
print("  look-ahead:", attempt(a, precision="fp64", lookahead=True).flag)

# %%
# A small pivot next to a large off-diagonal entry: in fp16 the multiplier
# l54 is about 5080 and its square overflows the Schur update.
a = generate_fixture("paper-5x5-b3")
for prec in ("fp16", "bf16", "fp32"):
    at = attempt(a, precision=prec)
    print(f"\noverflow matrix, {prec}: {at.flag}, pivot 4 before sqrt = {at.pivots[3]:.6g}")

# %%
# GMW(beta) enlarges the pivot so that every multiplier stays below beta.
# Unscaled, 550/beta already exceeds sqrt(x_max), which GMW reports itself.
for beta in (1.0, 10.0):
    print(f"with GMW({beta:g}):", attempt(a, precision="fp16", gmw=beta).flag)

# %%
# Scaling first keeps the entries of order one and removes the overflow.
_, ah = scale_l2(a)
print("after l2 scaling, fp16:", attempt(ah, precision="fp16").flag)
