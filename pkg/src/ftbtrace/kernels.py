"""Front-to-back any-hit traversal kernels.

Every kernel iterates the hits along one ray strictly front to back without
losing hits that share a distance, using nothing but repeated traces,
interval surgery on t_min/t_max, and any-hit verdicts -- exactly the toolbox
a hardware pipeline exposes.  A kernel frequently tells the pipeline the
opposite of what it thinks: it OptiX-rejects a hit it stores (so the
pipeline cannot cull that hit's distance ties) and OptiX-accepts hits it
discards (so the traversal interval still shrinks).  That looks wrong and
is intentional.

All kernels drive a common ``user_code(hit, ctx, prd)`` callback; `ctx` is
the full pipeline hit state for kernels whose user code runs inside an
any-hit or closest-hit program, and None for the stable kernels, which can
only hand out the stored identity tuple.  stable-next, reject-repeats and
the multi-hit variant additionally expose resumable iterators so callers
can do arbitrary work between hits.

Two reference baselines are included for comparison: ch-only (misses
distance ties) and ah-only (delivers out of order).  They are intentionally
incorrect.
"""

from __future__ import annotations

import math
from bisect import insort
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Iterator, Optional

from .bvh import BuiltScene
from .floatstep import just_above, just_below
from .hitorder import HitDesc, less, order_key
from .pipeline import AhVerdict, HitContext, TraceConfig, TraceFlags, TraceStats, trace


class Step(Enum):
    CONTINUE = auto()
    STOP = auto()


@dataclass
class FtbReport:
    """What one kernel run delivered, in delivery order."""

    hits: list
    stopped_early: bool
    stats: TraceStats
    batches: Optional[list] = None  # multi-hit only: delivered batch sizes


def _desc(ctx: HitContext) -> HitDesc:
    return HitDesc(ctx.t, ctx.prim, ctx.geom, ctx.inst)


# ---------------------------------------------------------------- stable-next

class _StableNextPrd:
    __slots__ = ("hit_min", "hit_max")

    def __init__(self, hit_min, hit_max):
        self.hit_min = hit_min
        self.hit_max = hit_max


def _sn_any_hit(ctx, prd):
    curr = _desc(ctx)
    if less(prd.hit_min, curr) and less(curr, prd.hit_max):
        prd.hit_max = curr
    if ctx.t > prd.hit_max.t:
        # strictly beyond the best candidate: OptiX-accept purely to shrink
        # the traversal interval; the hit itself is discarded
        return AhVerdict.ACCEPT
    # ties at the best candidate's distance (and re-reported ties of the
    # previous hit) must be OptiX-rejected or the pipeline would cull the
    # rest of their distance group
    return AhVerdict.IGNORE


_SN_CFG = TraceConfig(any_hit=_sn_any_hit, flags=TraceFlags.DISABLE_CLOSESTHIT)


def iter_stable_next(built: BuiltScene, ray, stats: TraceStats) -> Iterator[HitDesc]:
    """Next hit under the total order, one trace per hit.

    Each trace finds the smallest hit strictly greater than the previous
    one; the re-trace starts at just_below(previous distance) so the
    previous hit's distance ties are still inside the valid interval.
    Delivery order is independent of traversal order, hence stable across
    rebuilds.
    """
    user_tmax = ray.t_max
    hit_min = HitDesc(ray.t_min, -1, -1, -1)
    cur = ray
    while True:
        prd = _StableNextPrd(hit_min, HitDesc(user_tmax, -1, -1, -1))
        trace(built, cur, _SN_CFG, prd, stats)
        best = prd.hit_max
        if best.prim < 0:
            return
        yield best
        hit_min = best
        cur = cur._replace(t_min=just_below(best.t), t_max=user_tmax)


def run_stable_next(built, ray, user_code, stats=None, user_prd=None) -> FtbReport:
    stats = stats if stats is not None else TraceStats()
    hits = []
    stopped = False
    for hit in iter_stable_next(built, ray, stats):
        hits.append(hit)
        stats.user_code_calls += 1
        if user_code(hit, None, user_prd) is Step.STOP:
            stopped = True
            break
    return FtbReport(hits, stopped, stats)


# ------------------------------------------------------------- reject-repeats

class _RejectRepeatsPrd:
    __slots__ = ("skip_hit", "skip_left", "this_hit", "this_ctx")

    def __init__(self):
        self.skip_hit = HitDesc(-math.inf, -1, -1, -1)
        self.skip_left = 0
        self.this_hit = None
        self.this_ctx = None


def _rr_any_hit(ctx, prd):
    if ctx.t > prd.skip_hit.t:
        return AhVerdict.ACCEPT  # first hit at a farther distance
    # now at the skip distance (the interval excludes anything nearer)
    if _desc(ctx) == prd.skip_hit:
        # the anchor hit is skipped by identity, never by count: a t_min
        # change may have reordered the traversal since it was delivered
        return AhVerdict.IGNORE
    if prd.skip_left == 0:
        return AhVerdict.ACCEPT
    prd.skip_left -= 1
    return AhVerdict.IGNORE


def _rr_closest_hit(ctx, prd):
    prd.this_hit = _desc(ctx)
    prd.this_ctx = ctx


_RR_CFG = TraceConfig(any_hit=_rr_any_hit, closest_hit=_rr_closest_hit)


def iter_reject_repeats(built: BuiltScene, ray, stats: TraceStats):
    """Hits in nondecreasing distance order, disambiguating ties by skip
    counting in traversal order; yields (HitDesc, HitContext).

    The committed hit of each trace is the delivery.  Repeated traces at one
    distance keep the identical interval, so their traversal order -- and
    with it the skip count -- is consistent; only the anchor hit, delivered
    under a different t_min, needs the identity guard.
    """
    user_tmax = ray.t_max
    prd = _RejectRepeatsPrd()
    next_tmin = ray.t_min
    next_skip = 0
    while True:
        prd.this_hit = None
        prd.skip_left = next_skip
        trace(built, ray._replace(t_min=next_tmin, t_max=user_tmax), _RR_CFG, prd, stats)
        got = prd.this_hit
        if got is None:
            return
        yield got, prd.this_ctx
        if got.t > prd.skip_hit.t:
            # new distance: re-anchor and count skips from zero again
            # (the anchor itself is skipped by identity, on top of the count)
            next_tmin = just_below(got.t)
            next_skip = 0
            prd.skip_hit = got
        else:
            next_skip += 1


def run_reject_repeats(built, ray, user_code, stats=None, user_prd=None) -> FtbReport:
    stats = stats if stats is not None else TraceStats()
    hits = []
    stopped = False
    for hit, ctx in iter_reject_repeats(built, ray, stats):
        hits.append(hit)
        stats.user_code_calls += 1
        if user_code(hit, ctx, user_prd) is Step.STOP:
            stopped = True
            break
    return FtbReport(hits, stopped, stats)


# ---------------------------------------------------------------- while-while

class _FeelerPrd:
    __slots__ = ("t_next",)

    def __init__(self):
        self.t_next = None


def _feeler_closest_hit(ctx, prd):
    prd.t_next = ctx.t


_FEELER_CFG = TraceConfig(closest_hit=_feeler_closest_hit, flags=TraceFlags.DISABLE_ANYHIT)


class _ExecutorPrd:
    __slots__ = ("user_code", "user_prd", "hits", "stats", "stopped")

    def __init__(self, user_code, user_prd, stats):
        self.user_code = user_code
        self.user_prd = user_prd
        self.hits = []
        self.stats = stats
        self.stopped = False


def _executor_any_hit(ctx, prd):
    hit = _desc(ctx)
    prd.hits.append(hit)
    prd.stats.user_code_calls += 1
    if prd.user_code(hit, ctx, prd.user_prd) is Step.STOP:
        prd.stopped = True
        return AhVerdict.TERMINATE_ACCEPT
    return AhVerdict.IGNORE


_EXECUTOR_CFG = TraceConfig(any_hit=_executor_any_hit, flags=TraceFlags.DISABLE_CLOSESTHIT)


def run_while_while(built, ray, user_code, stats=None, user_prd=None) -> FtbReport:
    """Feeler rays find each next hit distance; executor rays enumerate it.

    The feeler is a plain closest-hit trace (any-hit disabled) whose result
    sets the executor's interval to (just_below(t), just_above(t)) -- an
    interval containing exactly one representable binary32 value, so the
    executor's any-hit program fires for precisely the hits at that
    distance, and OptiX-rejecting each keeps every distance tie coming.
    """
    stats = stats if stats is not None else TraceStats()
    user_tmax = ray.t_max
    eprd = _ExecutorPrd(user_code, user_prd, stats)
    t_lo = ray.t_min
    while True:
        fprd = _FeelerPrd()
        trace(built, ray._replace(t_min=t_lo, t_max=user_tmax), _FEELER_CFG, fprd, stats)
        t_next = fprd.t_next
        if t_next is None:
            break
        trace(
            built,
            ray._replace(t_min=just_below(t_next), t_max=just_above(t_next)),
            _EXECUTOR_CFG,
            eprd,
            stats,
        )
        if eprd.stopped:
            break
        t_lo = t_next  # anything strictly beyond the finished distance
    return FtbReport(eprd.hits, eprd.stopped, stats)


# --------------------------------------------------------------- while-merged

_WM_NO_FEELER = -1.0
_WM_STOPPED = -2.0


class _WhileMergedPrd:
    __slots__ = ("t_exec", "t_feeler", "user_code", "user_prd", "hits", "stats", "stopped")

    def __init__(self, user_code, user_prd, stats):
        self.t_exec = _WM_NO_FEELER
        self.t_feeler = _WM_NO_FEELER
        self.user_code = user_code
        self.user_prd = user_prd
        self.hits = []
        self.stats = stats
        self.stopped = False


def _wm_any_hit(ctx, prd):
    if ctx.t != prd.t_exec:
        # feeler part: accept silently so t_max homes in on the next
        # distance; user code must not see these
        return AhVerdict.ACCEPT
    hit = _desc(ctx)
    prd.hits.append(hit)
    prd.stats.user_code_calls += 1
    if prd.user_code(hit, ctx, prd.user_prd) is Step.STOP:
        prd.stopped = True
        prd.t_feeler = _WM_STOPPED  # closest-hit still runs; keep it out
        return AhVerdict.TERMINATE_ACCEPT
    return AhVerdict.IGNORE


def _wm_closest_hit(ctx, prd):
    if prd.t_feeler != _WM_STOPPED:
        prd.t_feeler = ctx.t


_WM_CFG = TraceConfig(any_hit=_wm_any_hit, closest_hit=_wm_closest_hit)


def run_while_merged(built, ray, user_code, stats=None, user_prd=None) -> FtbReport:
    """Single trace per distance: executor and feeler merged into one ray.

    The any-hit program runs user code only at the distance promoted from
    the previous trace's committed hit and OptiX-rejects those, while every
    other (strictly farther) hit is accepted without user code so the
    committed hit becomes the next distance.  Costs far more any-hit calls
    than while-while, which is the point of comparing them.
    """
    if ray.t_min < 0.0:
        raise ValueError("while-merged needs t_min >= 0 (negative sentinel values)")
    stats = stats if stats is not None else TraceStats()
    user_tmax = ray.t_max
    prd = _WhileMergedPrd(user_code, user_prd, stats)
    cur_tmin = ray.t_min
    while True:
        prd.t_feeler = _WM_NO_FEELER
        trace(built, ray._replace(t_min=cur_tmin, t_max=user_tmax), _WM_CFG, prd, stats)
        if prd.t_feeler < 0.0:
            break  # no next distance (or user code stopped)
        prd.t_exec = prd.t_feeler
        cur_tmin = just_below(prd.t_exec)
    return FtbReport(prd.hits, prd.stopped, stats)


# ------------------------------------------------------------ stable multi-hit

class _MultiHitPrd:
    __slots__ = ("hit_min", "capacity", "buffer")

    def __init__(self, hit_min, capacity):
        self.hit_min = hit_min
        self.capacity = capacity
        self.buffer = []


def _mh_any_hit(ctx, prd):
    curr = _desc(ctx)
    if not less(prd.hit_min, curr):
        return AhVerdict.IGNORE  # already delivered in an earlier batch
    buf = prd.buffer
    if len(buf) < prd.capacity:
        insort(buf, curr, key=order_key)
        return AhVerdict.IGNORE
    if less(curr, buf[-1]):
        buf.pop()
        insort(buf, curr, key=order_key)
    if ctx.t > buf[-1].t:
        # strictly beyond a full buffer's worst distance: can never enter
        # this batch, so let the pipeline shrink
        return AhVerdict.ACCEPT
    # at the worst distance: rejecting keeps that distance group alive for
    # later, closer arrivals that may still evict into it
    return AhVerdict.IGNORE


_MH_CFG = TraceConfig(any_hit=_mh_any_hit, flags=TraceFlags.DISABLE_CLOSESTHIT)


def iter_multi_hit_batches(built: BuiltScene, ray, n: int, stats: TraceStats):
    """Batches of the next up-to-n hits in sorted order, resumable past ties.

    Each trace gathers the n smallest hits strictly greater (under the total
    order) than the last delivered hit, so a batch boundary can fall inside
    a distance group without losing or repeating its members.
    """
    if n < 1:
        raise ValueError("multi-hit capacity must be >= 1")
    user_tmax = ray.t_max
    hit_min = HitDesc(ray.t_min, -1, -1, -1)
    cur_tmin = ray.t_min
    while True:
        prd = _MultiHitPrd(hit_min, n)
        trace(built, ray._replace(t_min=cur_tmin, t_max=user_tmax), _MH_CFG, prd, stats)
        if not prd.buffer:
            return
        batch = prd.buffer
        yield batch
        hit_min = batch[-1]
        cur_tmin = just_below(hit_min.t)


def run_stable_multi_hit(built, ray, user_code, stats=None, user_prd=None, n: int = 4) -> FtbReport:
    stats = stats if stats is not None else TraceStats()
    hits = []
    batches = []
    stopped = False
    for batch in iter_multi_hit_batches(built, ray, n, stats):
        batches.append(len(batch))
        for hit in batch:
            hits.append(hit)
            stats.user_code_calls += 1
            if user_code(hit, None, user_prd) is Step.STOP:
                stopped = True
                break
        if stopped:
            break
    return FtbReport(hits, stopped, stats, batches=batches)


# ------------------------------------------------------- reference baselines

class _AhOnlyPrd:
    __slots__ = ("user_code", "user_prd", "hits", "stats", "stopped")

    def __init__(self, user_code, user_prd, stats):
        self.user_code = user_code
        self.user_prd = user_prd
        self.hits = []
        self.stats = stats
        self.stopped = False


def _ao_any_hit(ctx, prd):
    hit = _desc(ctx)
    prd.hits.append(hit)
    prd.stats.user_code_calls += 1
    if prd.user_code(hit, ctx, prd.user_prd) is Step.STOP:
        prd.stopped = True
        return AhVerdict.TERMINATE_ACCEPT
    return AhVerdict.IGNORE


_AO_CFG = TraceConfig(any_hit=_ao_any_hit, flags=TraceFlags.DISABLE_CLOSESTHIT)


def run_ah_only(built, ray, user_code, stats=None, user_prd=None) -> FtbReport:
    """Single trace, user code in the any-hit program.

    Finds every hit but delivers them in traversal order, which need not be
    ascending in distance; kept as the fast-but-unordered reference.
    """
    stats = stats if stats is not None else TraceStats()
    prd = _AhOnlyPrd(user_code, user_prd, stats)
    trace(built, ray, _AO_CFG, prd, stats)
    return FtbReport(prd.hits, prd.stopped, stats)


class _ChOnlyPrd:
    __slots__ = ("user_code", "user_prd", "hits", "stats", "stopped", "this_t")

    def __init__(self, user_code, user_prd, stats):
        self.user_code = user_code
        self.user_prd = user_prd
        self.hits = []
        self.stats = stats
        self.stopped = False
        self.this_t = None


def _co_closest_hit(ctx, prd):
    hit = _desc(ctx)
    prd.hits.append(hit)
    prd.this_t = ctx.t
    prd.stats.user_code_calls += 1
    if prd.user_code(hit, ctx, prd.user_prd) is Step.STOP:
        prd.stopped = True


_CO_CFG = TraceConfig(closest_hit=_co_closest_hit, flags=TraceFlags.DISABLE_ANYHIT)


def run_ch_only(built, ray, user_code, stats=None, user_prd=None) -> FtbReport:
    """Loop of closest-hit traces, each next t_min set to the found distance.

    Because the new t_min equals (not just_below) the last distance, the
    rest of that distance group is skipped: exactly one hit per distance
    survives.  Kept as the simple-but-lossy reference.
    """
    stats = stats if stats is not None else TraceStats()
    user_tmax = ray.t_max
    prd = _ChOnlyPrd(user_code, user_prd, stats)
    t_lo = ray.t_min
    while True:
        prd.this_t = None
        trace(built, ray._replace(t_min=t_lo, t_max=user_tmax), _CO_CFG, prd, stats)
        if prd.this_t is None or prd.stopped:
            break
        t_lo = prd.this_t
    return FtbReport(prd.hits, prd.stopped, stats)


# -------------------------------------------------------------------- registry

KERNELS = {
    "stable-next": run_stable_next,
    "reject-repeats": run_reject_repeats,
    "while-while": run_while_while,
    "while-merged": run_while_merged,
    "stable-multi-hit": run_stable_multi_hit,
    "ah-only": run_ah_only,
    "ch-only": run_ch_only,
}

CORRECT_KERNELS = (
    "stable-next",
    "reject-repeats",
    "while-while",
    "while-merged",
    "stable-multi-hit:1",
    "stable-multi-hit:4",
    "stable-multi-hit:16",
)

STABLE_KERNELS = ("stable-next", "stable-multi-hit")


def parse_kernel(kernel_id: str):
    """Split 'name[:N]' into (runner, kwargs); N is the multi-hit capacity."""
    name, _, arg = kernel_id.partition(":")
    fn = KERNELS.get(name)
    if fn is None:
        raise ValueError(f"unknown kernel {kernel_id!r}; choose from {sorted(KERNELS)}")
    kwargs = {}
    if arg:
        if name != "stable-multi-hit":
            raise ValueError(f"kernel {name!r} takes no parameter")
        kwargs["n"] = int(arg)
    return fn, kwargs


def run_kernel(kernel_id, built, ray, user_code, stats=None, user_prd=None) -> FtbReport:
    """Run a kernel by id string, e.g. 'while-while' or 'stable-multi-hit:4'."""
    if callable(kernel_id):
        return kernel_id(built, ray, user_code, stats=stats, user_prd=user_prd)
    fn, kwargs = parse_kernel(kernel_id)
    return fn(built, ray, user_code, stats=stats, user_prd=user_prd, **kwargs)


def is_stable(kernel_id) -> bool:
    if not isinstance(kernel_id, str):
        return False
    return kernel_id.partition(":")[0] in STABLE_KERNELS
