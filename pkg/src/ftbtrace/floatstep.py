"""ULP-exact neighbour stepping on IEEE-754 binary32 values.

Every distance that crosses the emulated pipeline boundary (ray interval
endpoints, hit distances) is a binary32 value carried in a Python float;
binary64 represents all of them exactly, so ordinary comparisons are exact.

Neighbour stepping works on the value's ordered bit pattern: the
sign-magnitude binary32 encoding is mapped onto a monotone unsigned key, the
key is incremented or decremented, and the result is mapped back.  That makes
``just_above``/``just_below`` bit-identical on every platform; the test suite
cross-checks them against the platform nextafter.

-0.0 and +0.0 are treated as one point on the number line: stepping never
lands on -0.0, and ``just_above(+/-0.0)`` is the smallest positive subnormal.
Subnormals are stepped bit-adjacently like any other value; scenes should
keep interesting distances in the normal range.
"""

from __future__ import annotations

import math
import struct

_pack_f = struct.Struct("<f").pack
_unpack_f = struct.Struct("<f").unpack
_pack_u = struct.Struct("<I").pack
_unpack_u = struct.Struct("<I").unpack

F32_MAX = 3.4028234663852886e+38
F32_MIN_NORMAL = 2.0 ** -126
F32_MIN_SUBNORMAL = 2.0 ** -149

# values at or beyond this magnitude round to infinity (round-to-nearest-even)
_F32_OVERFLOW = 2.0 ** 128 - 2.0 ** 103

_SIGN = 0x80000000
_U32 = 0xFFFFFFFF


def f32(x: float) -> float:
    """Round a Python float to the nearest binary32 value (ties to even)."""
    try:
        return _unpack_f(_pack_f(x))[0]
    except OverflowError:
        if x != x:
            return x
        if abs(x) >= _F32_OVERFLOW:
            return math.inf if x > 0.0 else -math.inf
        return F32_MAX if x > 0.0 else -F32_MAX


def f32_bits(x: float) -> int:
    """Bit pattern of a binary32-valued float."""
    return _unpack_u(_pack_f(x))[0]


def f32_from_bits(bits: int) -> float:
    """Float for a binary32 bit pattern."""
    return _unpack_f(_pack_u(bits))[0]


def _key(bits: int) -> int:
    # monotone map: float order -> unsigned integer order
    if bits & _SIGN:
        return (~bits) & _U32
    return bits | _SIGN


def _bits(key: int) -> int:
    if key & _SIGN:
        return key & ~_SIGN
    return (~key) & _U32


def _check(f: float, name: str) -> int:
    if math.isnan(f):
        raise ValueError(f"{name}: NaN has no neighbours")
    if math.isinf(f):
        raise ValueError(f"{name}: input must be finite")
    if f32(f) != f:
        raise ValueError(f"{name}: {f!r} is not a binary32 value")
    bits = f32_bits(f)
    if bits == _SIGN:  # canonicalise -0.0 to +0.0
        bits = 0
    return bits


def just_above(f: float) -> float:
    """Smallest binary32 value strictly greater than ``f``.

    No representable binary32 value lies between ``f`` and the result.
    ``f`` must be finite and below the largest finite binary32 value.
    """
    bits = _check(f, "just_above")
    if f == F32_MAX:
        raise ValueError("just_above: largest finite value has no successor")
    key = _key(bits) + 1
    out = _bits(key)
    if out == _SIGN:  # skip -0.0
        out = _bits(key + 1)
    return f32_from_bits(out)


def just_below(f: float) -> float:
    """Largest binary32 value strictly less than ``f``.

    ``f`` must be finite and above the smallest finite binary32 value.
    """
    bits = _check(f, "just_below")
    if f == -F32_MAX:
        raise ValueError("just_below: smallest finite value has no predecessor")
    key = _key(bits) - 1
    out = _bits(key)
    if out == _SIGN:  # skip -0.0
        out = _bits(key - 1)
    return f32_from_bits(out)


def ulp_distance(a: float, b: float) -> int:
    """Number of representable binary32 steps between two binary32 values."""
    ka = _key(_check(a, "ulp_distance"))
    kb = _key(_check(b, "ulp_distance"))
    return abs(ka - kb)
