#!/usr/bin/env python3
"""Stepping to adjacent binary32 values, and why that makes ray intervals
programmable.

Every distance the traversal pipeline sees is a binary32 value, so the reals
between two adjacent representable values simply do not exist for it.  That
turns interval endpoints into precise instruments: just_below(t) < t opens an
interval that re-admits everything at distance t, and the pair
(just_below(t), just_above(t)) brackets exactly one representable value.
"""

from ftbtrace import f32, f32_bits, just_above, just_below, ulp_distance

t = 6.0
up = just_above(t)
dn = just_below(t)
print(f"t            = {t!r}  bits 0x{f32_bits(t):08X}")
print(f"just_above(t) = {up!r}  bits 0x{f32_bits(up):08X}")
print(f"just_below(t) = {dn!r}  bits 0x{f32_bits(dn):08X}")
print(f"steps between just_below and just_above: {ulp_distance(dn, up)}")
print(f"-> the open interval (just_below(t), just_above(t)) holds exactly {{t}}\n")

print("ULPs scale with magnitude; the gap at 1.0 differs across the binade:")
print(f"  just_above(1.0) - 1.0 = {just_above(1.0) - 1.0!r}  (2^-23)")
print(f"  1.0 - just_below(1.0) = {1.0 - just_below(1.0)!r}  (2^-24)\n")

print("around zero, -0.0 and +0.0 are the same point:")
print(f"  just_above(0.0)  = {just_above(0.0)!r}   (smallest positive subnormal)")
print(f"  just_above(-0.0) = {just_above(-0.0)!r}")
print(f"  just_below(0.0)  = {just_below(0.0)!r}\n")

print("0.1 is not a binary32 value; the library refuses to step from it:")
try:
    just_above(0.1)
except ValueError as e:
    print(f"  ValueError: {e}")
print(f"  round first: f32(0.1) = {f32(0.1)!r}, then step to {just_above(f32(0.1))!r}")
