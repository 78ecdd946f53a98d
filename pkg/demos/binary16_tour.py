"""
A short tour of the emulated binary16 format
============================================

Every value is computed in binary64 and rounded once to the target
format.  This script prints a few landmarks of binary16 and shows how the
safe tests refuse operations that would overflow.
"""
import numpy as np

from ichol_half import FP16, BF16, decode, encode, h_arith, safe_mulsub, safe_scale_check

# %%
# Landmarks
for name, bits in [("smallest subnormal", 0x0001), ("smallest normal", 0x0400),
                   ("one", 0x3C00), ("largest finite", 0x7BFF), ("+inf", 0x7C00)]:
    print(f"{name:>20}: 0x{bits:04x} -> {decode(bits)!r}")

print("unit roundoff fp16 / bf16:", FP16.u, BF16.u)

# %%
# Round to nearest, ties to even.  65519 still rounds down, 65520 overflows.
for x in (1.0 + 2 ** -11, 1.0 + 3 * 2 ** -11, 65519.0, 65520.0, 1e-8):
    bits, status = encode(x)
    print(f"{x!r:>24} -> 0x{bits:04x} = {decode(bits)!r:<12} {status.name}")

# %%
# Arithmetic on bit patterns: one rounding per operation
a, _ = encode(0.1)
b, _ = encode(0.2)
c, _ = h_arith("add", a, b)
print("0.1 + 0.2 in fp16 =", decode(c), " (fp64:", 0.1 + 0.2, ")")

# %%
# The safe tests answer "would this overflow?" without overflowing.
print("550 / sqrt(7e-5) representable:", safe_scale_check(np.sqrt(7e-5), 550.0, FP16))
print("550 / 0.5 representable:       ", safe_scale_check(0.5, 550.0, FP16))
print("60000 - 250*250 =", safe_mulsub(60000.0, 250.0, 250.0, FP16))
print("60000 - 300*300 =", safe_mulsub(60000.0, 300.0, 300.0, FP16))
