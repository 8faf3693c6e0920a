"""Value quantization for label-map storage: f32, f16, and an 8-bit minifloat.

The 8-bit format has 1 sign, 4 exponent, and 3 mantissa bits with exponent
bias 7. There are no infinities: the all-ones exponent shares its range with
finite values and only the all-ones code (0x7F / 0xFF) is NaN, so the largest
finite magnitude is 1.75 * 2^8 = 448. Sub-normals step in units of 2^-9.
Rounding is to nearest, ties to even mantissa.
"""

from __future__ import annotations

import numpy as np

from .types import QuantFormat

__all__ = ["quantize", "values_to_wire", "values_from_wire", "F8_MAX", "F16_MAX"]

F8_MAX = 448.0
F16_MAX = 65504.0


def _f8_value_table() -> np.ndarray:
    codes = np.arange(256)
    sign = np.where(codes & 0x80, -1.0, 1.0)
    e = (codes >> 3) & 0xF
    m = (codes & 0x7).astype(np.float64)
    mag = np.where(e == 0, m * 2.0**-9, (1.0 + m / 8.0) * 2.0 ** (e - 7.0))
    vals = (sign * mag).astype(np.float32)
    vals[(codes & 0x7F) == 0x7F] = np.nan
    return vals


_F8_VALUES = _f8_value_table()
_F8_POSITIVE = _F8_VALUES[:127].astype(np.float64)  # ascending, 0.0 .. 448.0


def _f8_encode(x: np.ndarray) -> np.ndarray:
    """Round float input to the nearest 8-bit code, ties to even mantissa."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    mag = np.minimum(np.abs(x), F8_MAX)
    hi = np.searchsorted(_F8_POSITIVE, mag).clip(0, 126)
    lo = np.maximum(hi - 1, 0)
    d_lo = mag - _F8_POSITIVE[lo]
    d_hi = _F8_POSITIVE[hi] - mag
    pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (hi % 2 == 0))
    code = np.where(pick_hi, hi, lo).astype(np.uint8)
    code |= np.where(np.signbit(x), np.uint8(0x80), np.uint8(0))
    return code


def _f8_decode(codes: np.ndarray) -> np.ndarray:
    return _F8_VALUES[np.asarray(codes, dtype=np.uint8)]


def quantize(values: np.ndarray, quant: QuantFormat) -> np.ndarray:
    """Round values to the nearest representable number of the format.

    Returns float32 (every representable value of all three formats is exact
    in float32). Raises on non-finite input.
    """
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot quantize non-finite values")
    if quant == QuantFormat.F32:
        return values.astype(np.float32)
    if quant == QuantFormat.F16:
        return values.astype(np.float16).astype(np.float32)
    return _f8_decode(_f8_encode(values))


def values_to_wire(values: np.ndarray, quant: QuantFormat) -> np.ndarray:
    """Encode already-quantized float32 values as little-endian wire bytes."""
    if quant == QuantFormat.F32:
        return np.ascontiguousarray(values, dtype="<f4").view(np.uint8)
    if quant == QuantFormat.F16:
        return np.ascontiguousarray(values.astype("<f2")).view(np.uint8)
    return _f8_encode(values).view(np.uint8)


def values_from_wire(raw: np.ndarray, quant: QuantFormat) -> np.ndarray:
    """Decode wire bytes back to float32 values."""
    raw = np.ascontiguousarray(raw, dtype=np.uint8)
    if quant == QuantFormat.F32:
        return raw.view("<f4").astype(np.float32)
    if quant == QuantFormat.F16:
        return raw.view("<f2").astype(np.float32)
    return _f8_decode(raw)
