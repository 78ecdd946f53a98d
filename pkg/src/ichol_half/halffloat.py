"""
Software emulation of low precision IEEE formats.

Every operation is carried out in binary64 and rounded once to the target
format with round-to-nearest, ties-to-even.  For binary16 and bfloat16 this
single rounding is exact emulation of the hardware operation, since binary64
carries more than twice the significand bits of either format.

The module also holds the overflow-free scalar tests used by the incomplete
factorization (`safe_scale_check`, `safe_mulsub`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class RoundStatus(enum.IntEnum):
    EXACT = 0
    ROUNDED = 1
    UNDERFLOW_FLUSHED = 2
    OVERFLOW = 3


@dataclass(frozen=True)
class FormatParams:
    """Parameters of a binary floating-point format.

    ``signif_bits`` counts the implicit leading bit, so binary16 has 11.
    """

    name: str
    signif_bits: int
    exp_bits: int
    emax: int = field(init=False)
    emin: int = field(init=False)
    u: float = field(init=False)
    x_max: float = field(init=False)
    x_min: float = field(init=False)
    x_min_subnormal: float = field(init=False)

    def __post_init__(self):
        p = self.signif_bits
        emax = 2 ** (self.exp_bits - 1) - 1
        emin = 1 - emax
        set_ = object.__setattr__
        set_(self, "emax", emax)
        set_(self, "emin", emin)
        set_(self, "u", math.ldexp(1.0, -p))
        set_(self, "x_max", math.ldexp(2.0 - math.ldexp(1.0, 1 - p), emax))
        set_(self, "x_min", math.ldexp(1.0, emin))
        set_(self, "x_min_subnormal", math.ldexp(1.0, emin - p + 1))

    @property
    def storage_bits(self) -> int:
        return self.signif_bits + self.exp_bits

    @property
    def sqrt_x_max(self) -> float:
        return math.sqrt(self.x_max)

    def round(self, x):
        """Round binary64 values to this format (ties-to-even).

        Subnormals are kept.  Magnitudes that round beyond ``x_max`` become
        signed infinity; callers are expected to have ruled that out.
        """
        if self.signif_bits == 53:
            return np.asarray(x, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        _, e = np.frexp(x)
        # exponent of the last significand bit, clamped at the subnormal range
        q = np.maximum(e - 1, self.emin) - (self.signif_bits - 1)
        with np.errstate(over="ignore"):
            r = np.ldexp(np.rint(np.ldexp(x, -q)), q)
        return np.where(np.abs(r) > self.x_max, np.copysign(np.inf, x), r)

    def round_scalar(self, x: float) -> float:
        return float(self.round(x))

    def numpy_dtype(self):
        """Native numpy dtype holding this format's values, or None."""
        return {"fp16": np.float16, "fp32": np.float32,
                "fp64": np.float64}.get(self.name)

    def to_payload(self, values: np.ndarray) -> np.ndarray:
        """Pack already-rounded binary64 values into compact storage."""
        dt = self.numpy_dtype()
        if dt is not None:
            return np.asarray(values).astype(dt)
        # bfloat16: no native dtype, keep the bit patterns
        with np.errstate(over="ignore"):
            f32 = np.asarray(values, dtype=np.float64).astype(np.float32)
        return (f32.view(np.uint32) >> 16).astype(np.uint16)

    def from_payload(self, payload: np.ndarray) -> np.ndarray:
        """Decode storage back to binary64 (exact)."""
        if self.numpy_dtype() is not None:
            return np.asarray(payload).astype(np.float64)
        bits = np.asarray(payload, dtype=np.uint16).astype(np.uint32) << 16
        return bits.view(np.float32).astype(np.float64)


FP16 = FormatParams("fp16", 11, 5)
BF16 = FormatParams("bf16", 8, 8)
FP32 = FormatParams("fp32", 24, 8)
FP64 = FormatParams("fp64", 53, 11)

FORMATS = {f.name: f for f in (FP16, BF16, FP32, FP64)}


def get_format(name) -> FormatParams:
    if isinstance(name, FormatParams):
        return name
    try:
        return FORMATS[name]
    except KeyError:
        raise ValueError(f"unknown precision {name!r}; "
                         f"choose from {sorted(FORMATS)}") from None


def _status(x, r):
    x = np.asarray(x)
    st = np.full(x.shape, RoundStatus.ROUNDED, dtype=np.int8)
    st[r == x] = RoundStatus.EXACT
    st[(r == 0) & (x != 0)] = RoundStatus.UNDERFLOW_FLUSHED
    st[np.isinf(r)] = RoundStatus.OVERFLOW
    return st


def _check_16bit(fmt):
    if fmt.storage_bits != 16:
        raise ValueError(f"{fmt.name} is not a 16-bit format")


def encode_array(x, fmt: FormatParams = FP16):
    """Vectorized `encode`; returns ``(uint16 bits, int8 status codes)``."""
    _check_16bit(fmt)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("encode requires finite input")
    r = fmt.round(x)
    if fmt is FP16 or fmt.name == "fp16":
        with np.errstate(over="ignore"):
            bits = r.astype(np.float16).view(np.uint16)
    else:
        bits = fmt.to_payload(r)
    return bits, _status(x, r)


def encode(x: float, fmt: FormatParams = FP16):
    """Round one binary64 value to a 16-bit pattern.

    Returns ``(bits, RoundStatus)``.  Overflow yields the infinity pattern,
    which must be treated as a breakdown signal and never stored.
    """
    bits, st = encode_array(np.float64(x), fmt)
    return int(bits), RoundStatus(int(st))


def decode(w, fmt: FormatParams = FP16):
    """Exact conversion of 16-bit pattern(s) to binary64.

    Accepts an int or an integer array; NaN patterns raise ValueError.
    """
    _check_16bit(fmt)
    arr = np.asarray(w)
    if np.any((arr < 0) | (arr > 0xFFFF)):
        raise ValueError("not a 16-bit pattern")
    bits = arr.astype(np.uint16)
    if fmt.name == "fp16":
        out = bits.view(np.float16).astype(np.float64)
    else:
        out = fmt.from_payload(bits)
    if np.any(np.isnan(out)):
        raise ValueError("NaN pattern cannot be decoded")
    if np.ndim(w) == 0:
        return float(out)
    return out


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "sqrt": lambda a, b: math.sqrt(a),
}


def h_arith(op: str, a: int, b: int = 0, fmt: FormatParams = FP16):
    """One arithmetic operation on 16-bit operands, rounded once.

    ``b`` is ignored for ``sqrt``.  Division by zero and square roots of
    negative numbers are contract violations and raise ValueError.
    """
    if op not in _OPS:
        raise ValueError(f"unknown op {op!r}")
    x, y = decode(a, fmt), decode(b, fmt)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("operands must be finite")
    if op == "div" and y == 0:
        raise ValueError("division by zero")
    if op == "sqrt" and x < 0:
        raise ValueError("square root of a negative number")
    return encode(_OPS[op](x, y), fmt)


def safe_scale_check(l_kk: float, l_kmax: float, fmt: FormatParams) -> bool:
    """True if every entry of a column with largest magnitude ``l_kmax`` can
    be divided by the pivot ``l_kk`` without overflow."""
    return l_kk >= 1.0 or l_kk >= l_kmax / fmt.x_max


def safe_product(b, c, fmt: FormatParams):
    """Elementwise: can ``b*c`` be formed without exceeding ``x_max``?"""
    ab = np.abs(b)
    ac = np.abs(c)
    small = ab <= 1.0
    with np.errstate(divide="ignore"):
        limit = np.where(small, np.inf, fmt.x_max / np.where(small, 1.0, ab))
    return small | (ac <= limit)


def safe_difference(a, w, fmt: FormatParams):
    """Elementwise: can ``a - w`` be formed without exceeding ``x_max``?"""
    a = np.asarray(a)
    w = np.asarray(w)
    same_sign = np.sign(a) * np.sign(w) >= 0  # |a - w| <= max(|a|, |w|)
    return same_sign | (np.abs(a) <= fmt.x_max - np.abs(w))


def safe_mulsub(a: float, b: float, c: float, fmt: FormatParams):
    """Return ``fl(a - fl(b*c))`` in ``fmt``, or None if that is unsafe.

    The product is tested first and then the subtraction; neither test
    forms a quantity that can overflow.
    """
    if not bool(safe_product(b, c, fmt)):
        return None
    w = fmt.round_scalar(b * c)
    if not bool(safe_difference(a, w, fmt)):
        return None
    return fmt.round_scalar(a - w)
