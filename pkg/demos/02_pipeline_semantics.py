#!/usr/bin/env python3
"""The trace call's observable rules, demonstrated one at a time.

The emulated pipeline enforces the exclusive valid interval
(t_min < t < t_max), shrinks t_max on every accepted hit, lets the any-hit
callback ignore or terminate, and resolves each trace through exactly one of
closest-hit or miss.  These rules are the raw material every front-to-back
kernel is built from.
"""

from ftbtrace import (
    AhVerdict,
    TraceConfig,
    TraceStats,
    build_scene,
    gen_coplanar_stack,
    just_below,
    make_ray,
    trace,
)

built = build_scene(gen_coplanar_stack(4, True))  # 4 quads, identical plane z=5
ray = make_ray((0.1, -0.2, -1.0), (0, 0, 1), 0.0, 100.0)

print("1. the interval is exclusive: a hit exactly at t_min is invalid")
events = []
cfg = TraceConfig(
    closest_hit=lambda ctx, prd: events.append(f"closest-hit t={ctx.t}"),
    miss=lambda prd: events.append("miss"),
)
trace(built, ray, cfg, None, TraceStats())
trace(built, ray._replace(t_min=6.0), cfg, None, TraceStats())
print(f"   t_min=0 -> {events[0]};  t_min=6 -> {events[1]}\n")

print("2. accepting shrinks t_max, so one accept silences a whole tie group")
seen = []
cfg2 = TraceConfig(any_hit=lambda ctx, prd: seen.append(ctx.prim))  # plain return = accept
trace(built, ray, cfg2, None, TraceStats())
print(f"   4 coplanar triangles, any-hit invoked {len(seen)} time(s)\n")

print("3. ignoring keeps the interval open: every tie is delivered")
seen2 = []
cfg3 = TraceConfig(any_hit=lambda ctx, prd: (seen2.append(ctx.prim), AhVerdict.IGNORE)[1])
trace(built, ray, cfg3, None, TraceStats())
print(f"   any-hit saw primitives {seen2}\n")

print("4. follow-up rays around a found distance")
t_found = 6.0
at = []
trace(built, ray._replace(t_min=just_below(t_found)),
      TraceConfig(any_hit=lambda c, p: (at.append(c.t), AhVerdict.IGNORE)[1]),
      None, TraceStats())
beyond = []
trace(built, ray._replace(t_min=t_found),
      TraceConfig(any_hit=lambda c, p: (beyond.append(c.t), AhVerdict.IGNORE)[1]),
      None, TraceStats())
print(f"   t_min=just_below({t_found}): re-finds {len(at)} hits, all at {set(at)}")
print(f"   t_min={t_found}:             finds {len(beyond)} hits at that distance\n")

print("5. terminating commits the hit and stops traversal instantly")
stats = TraceStats()
resolved = []
trace(built, ray,
      TraceConfig(any_hit=lambda c, p: AhVerdict.TERMINATE_ACCEPT,
                  closest_hit=lambda c, p: resolved.append(c.prim)),
      None, stats)
print(f"   any-hit calls: {stats.ah_calls}; closest-hit still ran on prim {resolved[0]}")
