"""Emulation of the hardware trace call's observable semantics.

One trace walks the scene tree and hands every candidate intersection whose
distance lies strictly inside the live (t_min, t_max) interval to the
any-hit callback -- the interval test happens before the callback ever sees
the hit.  Accepting a candidate (the default when no any-hit program runs)
commits it and shrinks t_max to its distance; ignoring leaves the interval
untouched; terminating commits and stops all further traversal, triangle
tests and any-hit calls at once.  After traversal the closest-hit callback
runs on the committed hit, or the miss callback when nothing was committed.

There is deliberately no way to accept a hit while keeping t_max just above
it: kernels built on this emulator live under the same rules as on the real
pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntFlag, auto
from typing import Callable, NamedTuple, Optional

from .bvh import BuiltScene, traverse
from .geom import Affine3, Ray


class AhVerdict(Enum):
    ACCEPT = auto()
    IGNORE = auto()
    TERMINATE_ACCEPT = auto()


class TraceFlags(IntFlag):
    NONE = 0
    DISABLE_ANYHIT = 1
    DISABLE_CLOSESTHIT = 2


class HitContext(NamedTuple):
    """Pipeline state for one candidate or committed hit."""

    t: float
    u: float
    v: float
    front_face: bool
    prim: int
    geom: int
    inst: int
    object_to_world: Affine3
    world_to_object: Affine3


@dataclass
class TraceStats:
    traces: int = 0
    nodes_visited: int = 0
    tri_tests: int = 0
    ah_calls: int = 0
    ch_calls: int = 0
    miss_calls: int = 0
    user_code_calls: int = 0

    def add(self, other: "TraceStats") -> None:
        self.traces += other.traces
        self.nodes_visited += other.nodes_visited
        self.tri_tests += other.tri_tests
        self.ah_calls += other.ah_calls
        self.ch_calls += other.ch_calls
        self.miss_calls += other.miss_calls
        self.user_code_calls += other.user_code_calls

    def as_dict(self) -> dict:
        return {
            "traces": self.traces,
            "nodesVisited": self.nodes_visited,
            "triTests": self.tri_tests,
            "ahCalls": self.ah_calls,
            "chCalls": self.ch_calls,
            "missCalls": self.miss_calls,
            "userCodeCalls": self.user_code_calls,
        }


@dataclass
class TraceConfig:
    """Emulated shader-table entry: callbacks plus per-ray flags.

    any_hit(ctx, prd) returns an AhVerdict (None counts as ACCEPT, matching
    a plain return).  closest_hit(ctx, prd) and miss(prd) return nothing.
    """

    any_hit: Optional[Callable] = None
    closest_hit: Optional[Callable] = None
    miss: Optional[Callable] = None
    flags: TraceFlags = TraceFlags.NONE


def trace(built: BuiltScene, ray: Ray, cfg: TraceConfig, prd=None,
          stats: Optional[TraceStats] = None) -> Optional[HitContext]:
    """Run one trace; returns the committed hit context, if any.

    Every candidate with t_min < t < current t_max triggers the any-hit
    callback (unless disabled); each accepted hit becomes the committed one
    and shrinks t_max, so committed distances strictly decrease within a
    trace and the final committed hit is the closest accepted one.
    """
    if math.isnan(ray.t_min) or math.isnan(ray.t_max):
        raise ValueError("trace: NaN in ray interval")
    if math.isinf(ray.t_min) or math.isinf(ray.t_max):
        raise ValueError("trace: ray interval must be finite")
    if stats is None:
        stats = TraceStats()
    stats.traces += 1
    any_hit = None if cfg.flags & TraceFlags.DISABLE_ANYHIT else cfg.any_hit
    committed = [None]

    if any_hit is None:
        def visit(t, u, v, front, prim, sbt, inst, bi):
            committed[0] = HitContext(t, u, v, front, prim, sbt, inst,
                                      bi.transform, bi.inverse or bi.transform)
            return t, False
    else:
        def visit(t, u, v, front, prim, sbt, inst, bi):
            ctx = HitContext(t, u, v, front, prim, sbt, inst,
                             bi.transform, bi.inverse or bi.transform)
            stats.ah_calls += 1
            verdict = any_hit(ctx, prd)
            if verdict is None or verdict is AhVerdict.ACCEPT:
                committed[0] = ctx
                return t, False
            if verdict is AhVerdict.IGNORE:
                return None, False
            if verdict is AhVerdict.TERMINATE_ACCEPT:
                committed[0] = ctx
                return t, True
            raise TypeError(f"any_hit returned {verdict!r}")

    traverse(built, ray, visit, stats)

    hit = committed[0]
    if hit is not None:
        if cfg.closest_hit is not None and not cfg.flags & TraceFlags.DISABLE_CLOSESTHIT:
            stats.ch_calls += 1
            cfg.closest_hit(hit, prd)
    else:
        if cfg.miss is not None:
            stats.miss_calls += 1
            cfg.miss(prd)
    return hit
