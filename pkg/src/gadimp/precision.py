"""Software emulation of reduced-precision floating-point formats.

Everything is computed in native 64-bit arithmetic and rounded after every
operation ("round-after-op"), which realizes the standard model
fl(a op b) = (a op b)(1 + delta), |delta| <= u.  Low-precision data therefore
lives in float64 arrays whose values are exact images of the target format.

Rounding mode is round-to-nearest, ties-to-even.  The pseudo-format
``fp64x2`` does not round at all: it marks accumulations that must be done
with compensated (error-free-transformation) arithmetic, whose effective
roundoff behaves like the square of the float64 unit roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RangeOverflow

__all__ = [
    "PrecisionFormat",
    "FORMATS",
    "resolve_format",
    "unit_roundoff",
    "quantize",
    "fl_op",
    "fl_sum",
    "fl_dot",
    "comp_dot",
    "two_sum",
    "two_prod",
]


@dataclass(frozen=True)
class PrecisionFormat:
    """An emulated binary floating-point format.

    ``significand_bits`` includes the implicit leading bit, so the unit
    roundoff under round-to-nearest is 2**(-significand_bits).
    """

    name: str
    significand_bits: int
    exponent_bits: int
    compensated: bool = field(default=False)

    def __post_init__(self):
        if self.significand_bits < 2 or self.exponent_bits < 2:
            raise ValueError("need significand_bits >= 2 and exponent_bits >= 2")

    @property
    def unit_roundoff(self) -> float:
        return 2.0 ** (-self.significand_bits)

    @property
    def max_exponent(self) -> int:
        """Largest unbiased exponent E of a normal number 1.f * 2**E."""
        return 2 ** (self.exponent_bits - 1) - 1

    @property
    def min_exponent(self) -> int:
        return 1 - self.max_exponent

    @property
    def max_finite(self) -> float:
        p = self.significand_bits
        return (2.0 - 2.0 ** (1 - p)) * 2.0 ** self.max_exponent

    @property
    def min_normal(self) -> float:
        return 2.0 ** self.min_exponent

    def __str__(self):
        return self.name


FORMATS = {
    "bf16": PrecisionFormat("bf16", 8, 8),
    "fp16": PrecisionFormat("fp16", 11, 5),
    "fp32": PrecisionFormat("fp32", 24, 8),
    "fp64": PrecisionFormat("fp64", 53, 11),
    # Compensated float64: storage stays fp64, accumulations use
    # error-free transformations, effective roundoff ~ u_fp64**2.
    "fp64x2": PrecisionFormat("fp64x2", 106, 11, compensated=True),
}

BF16 = FORMATS["bf16"]
FP16 = FORMATS["fp16"]
FP32 = FORMATS["fp32"]
FP64 = FORMATS["fp64"]
FP64X2 = FORMATS["fp64x2"]


def resolve_format(fmt) -> PrecisionFormat:
    """Accept a PrecisionFormat or one of the names bf16|fp16|fp32|fp64|fp64x2."""
    if isinstance(fmt, PrecisionFormat):
        return fmt
    try:
        return FORMATS[str(fmt).lower()]
    except KeyError:
        raise ValueError(
            f"unknown precision format {fmt!r}; expected one of {sorted(FORMATS)}"
        ) from None


def unit_roundoff(fmt) -> float:
    return resolve_format(fmt).unit_roundoff


def _quantize_bf16(x: np.ndarray) -> np.ndarray:
    # float64 -> float32 is innocuous double rounding for an 8-bit target
    # (24 >= 2*8 + 2), so round to bf16 by bit surgery on the float32 image.
    f32 = x.astype(np.float32)
    bits = f32.view(np.uint32)
    lsb = (bits >> np.uint32(16)) & np.uint32(1)
    rounded = (bits + np.uint32(0x7FFF) + lsb) & np.uint32(0xFFFF0000)
    out = rounded.view(np.float32).astype(np.float64)
    # keep NaNs untouched (the carry above could turn them into inf)
    nan = np.isnan(x)
    if np.any(nan):
        out = np.where(nan, x, out)
    return out


def _quantize_generic(x: np.ndarray, fmt: PrecisionFormat) -> np.ndarray:
    _, ex = np.frexp(x)  # x = m * 2**ex with |m| in [0.5, 1)
    expo = np.maximum(ex - 1, fmt.min_exponent)  # clamp into subnormal grid
    step = expo - (fmt.significand_bits - 1)
    q = np.ldexp(np.rint(np.ldexp(x, -step)), step)
    return np.where(np.abs(q) > fmt.max_finite, np.copysign(np.inf, x), q)


def quantize(x, fmt, flush_subnormals: bool = False, strict: bool = False):
    """Round value(s) to the nearest representable number of ``fmt``.

    Values exceeding the format range overflow to signed infinity; in strict
    mode this raises RangeOverflow instead.  Subnormals are kept by default
    and flushed to (signed) zero when ``flush_subnormals`` is set.
    """
    fmt = resolve_format(fmt)
    scalar = np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0)
    arr = np.asarray(x, dtype=np.float64)

    with np.errstate(over="ignore"):  # out-of-range casts overflow to inf
        if fmt.significand_bits >= 53:  # fp64 and fp64x2: pass-through
            out = arr
        elif fmt.name == "fp32":
            out = arr.astype(np.float32).astype(np.float64)
        elif fmt.name == "fp16":
            out = arr.astype(np.float16).astype(np.float64)
        elif fmt.name == "bf16":
            out = _quantize_bf16(arr)
        else:
            out = _quantize_generic(arr, fmt)

    if strict and np.any(np.isinf(out) & np.isfinite(arr)):
        raise RangeOverflow(f"value overflows {fmt.name} range")
    if flush_subnormals and fmt.significand_bits < 53:
        tiny = (np.abs(out) < fmt.min_normal) & (out != 0.0)
        if np.any(tiny):
            out = np.where(tiny, np.copysign(0.0, out), out)
    return float(out) if scalar else out


_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
}


def fl_op(op: str, a, b, fmt, strict: bool = False):
    """fl(a op b) in the given format: exact 64-bit result, then one rounding."""
    if op == "fma":
        raise ValueError("fma is not part of the round-after-op model")
    try:
        func = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}; expected one of {sorted(_OPS)}") from None
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        exact = func(a, b)
    return quantize(exact, fmt, strict=strict)


def fl_sum(v, fmt) -> float:
    """Sum of a 1-d array with a rounding after every addition.

    Uses a deterministic pairwise (binary-tree) order, which keeps the
    emulation vectorizable; each tree level is one rounded addition per
    surviving pair.
    """
    fmt = resolve_format(fmt)
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        return 0.0
    if fmt.significand_bits >= 53:
        return float(np.sum(v)) if not fmt.compensated else _comp_sum(v)
    while v.size > 1:
        m = v.size // 2
        head = quantize(v[: 2 * m : 2] + v[1 : 2 * m : 2], fmt)
        v = np.concatenate([head, v[2 * m :]]) if v.size % 2 else head
    return float(v[0])


def fl_dot(x, y, fmt) -> float:
    """Dot product with every multiply and add rounded in ``fmt``."""
    fmt = resolve_format(fmt)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("dot operands must have identical shapes")
    if fmt.compensated:
        return comp_dot(x, y)
    if fmt.significand_bits >= 53:
        return float(np.dot(x, y))
    return fl_sum(quantize(x * y, fmt), fmt)


def two_sum(a, b):
    """Error-free transformation: a + b = s + e exactly (Knuth)."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


_SPLITTER = 134217729.0  # 2**27 + 1


def two_prod(a, b):
    """Error-free transformation: a * b = p + e exactly (Dekker)."""
    p = a * b
    ca = _SPLITTER * a
    ahi = ca - (ca - a)
    alo = a - ahi
    cb = _SPLITTER * b
    bhi = cb - (cb - b)
    blo = b - bhi
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, e


def _comp_sum(v: np.ndarray) -> float:
    s = 0.0
    c = 0.0
    for a in v:
        s, e = two_sum(s, float(a))
        c += e
    return s + c


def comp_dot(x: np.ndarray, y: np.ndarray) -> float:
    """Compensated dot product (Ogita-Rump-Oishi style), error ~ u**2."""
    p, ep = two_prod(x, y)
    s = 0.0
    c = float(np.sum(ep))
    for a in p:
        s, e = two_sum(s, float(a))
        c += e
    return s + c
