import math

import pytest

from ftbtrace import (
    BuildOptions,
    HitContext,
    Step,
    build_scene,
    gen_abutting_boxes,
    gen_adversarial_order,
    gen_coplanar_stack,
    gen_instanced_grid,
    gen_leaf_reorder,
    iter_multi_hit_batches,
    iter_stable_next,
    make_ray,
    oracle_all_hits,
    run_ah_only,
    run_ch_only,
    run_kernel,
    run_reject_repeats,
    run_stable_multi_hit,
    run_stable_next,
    run_while_merged,
    run_while_while,
    sort_hits,
)
from ftbtrace.hitorder import order_key
from ftbtrace.kernels import CORRECT_KERNELS, parse_kernel
from ftbtrace.pipeline import TraceStats

from conftest import rays_for

CENTER_RAY = make_ray((0.1, -0.2, -1.0), (0, 0, 1), 0, 100)
AXIS_RAY = make_ray((-1.0, 0.3, 0.4), (1, 0, 0), 0, 100)
REORDER_RAY = make_ray((10, 0, 0), (-1, 0, 0), 0, 100)


def _exhaust(run, built, ray, **kw):
    return run(built, ray, lambda h, c, p: None, **kw)


def _groups(hits):
    out = []
    for h in hits:
        if out and out[-1][0].t == h.t:
            out[-1].append(h)
        else:
            out.append([h])
    return out


# ------------------------------------------------------------------ stable-next

def test_stable_next_delivers_sorted_oracle_on_ties():
    built = build_scene(gen_coplanar_stack(4, True))
    orc = oracle_all_hits(built, CENTER_RAY)
    rep = _exhaust(run_stable_next, built, CENTER_RAY)
    assert rep.hits == orc.hits
    assert len(rep.hits) == 4
    assert len({h.t for h in rep.hits}) == 1


def test_stable_next_empty_region_is_one_trace():
    built = build_scene(gen_coplanar_stack(4, True))
    ray = make_ray((40, 40, -1), (0, 0, 1), 0, 100)
    rep = _exhaust(run_stable_next, built, ray)
    assert rep.hits == []
    assert rep.stats.traces == 1


def test_stable_next_trace_count_is_hits_plus_one():
    built = build_scene(gen_abutting_boxes(3))
    rep = _exhaust(run_stable_next, built, AXIS_RAY)
    assert rep.stats.traces == len(rep.hits) + 1


def test_stable_next_permuted_rebuild_same_sequence():
    scene = gen_coplanar_stack(8, True)
    base = _exhaust(run_stable_next, build_scene(scene), CENTER_RAY).hits
    for seed in (1, 2, 3):
        built = build_scene(scene, BuildOptions(permute_seed=seed))
        assert _exhaust(run_stable_next, built, CENTER_RAY).hits == base


def test_stable_next_survives_redelivered_tie_arriving_first():
    # after delivering the first tie, the next trace may report that same
    # tie again before the undelivered one; it must not be OptiX-accepted
    # or the rest of the distance group would be culled
    built = build_scene(gen_leaf_reorder())
    orc = oracle_all_hits(built, REORDER_RAY)
    rep = _exhaust(run_stable_next, built, REORDER_RAY)
    assert rep.hits == orc.hits
    assert len(rep.hits) == 2


def test_stable_next_cursor_allows_work_between_hits():
    built = build_scene(gen_coplanar_stack(3, True))
    stats = TraceStats()
    it = iter_stable_next(built, CENTER_RAY, stats)
    first = next(it)
    mid_traces = stats.traces
    second = next(it)
    assert stats.traces == mid_traces + 1
    assert order_key(first) < order_key(second)


# --------------------------------------------------------------- reject-repeats

def test_reject_repeats_matches_oracle_groups_on_ties():
    built = build_scene(gen_coplanar_stack(4, True))
    orc = oracle_all_hits(built, CENTER_RAY)
    rep = _exhaust(run_reject_repeats, built, CENTER_RAY)
    assert sort_hits(rep.hits) == orc.hits
    assert len({h.t for h in rep.hits}) == 1


def test_reject_repeats_survives_tmin_leaf_reorder():
    # the anchor-hit identity guard: no hit skipped or duplicated even when
    # raising t_min flips the traversal order of the tied hits
    built = build_scene(gen_leaf_reorder())
    orc = oracle_all_hits(built, REORDER_RAY)
    rep = _exhaust(run_reject_repeats, built, REORDER_RAY)
    assert sort_hits(rep.hits) == orc.hits
    assert rep.stats.traces == len(orc.hits) + 1


def test_reject_repeats_single_hit_two_traces():
    built = build_scene(gen_coplanar_stack(1, True))
    rep = _exhaust(run_reject_repeats, built, CENTER_RAY)
    assert len(rep.hits) == 1
    assert rep.stats.traces == 2


def test_reject_repeats_cursor_yields_hit_and_context():
    from ftbtrace import iter_reject_repeats

    built = build_scene(gen_coplanar_stack(3, True))
    stats = TraceStats()
    it = iter_reject_repeats(built, CENTER_RAY, stats)
    first_hit, first_ctx = next(it)
    traces_between = stats.traces
    second_hit, second_ctx = next(it)
    assert stats.traces == traces_between + 1  # one trace per explicit request
    assert first_ctx.t == first_hit.t and second_ctx.t == second_hit.t
    assert first_hit != second_hit


# ------------------------------------------------------------------ while-while

def test_while_while_delivers_all_ties_at_feeler_distance():
    built = build_scene(gen_coplanar_stack(4, True))
    stats = TraceStats()
    rep = run_while_while(built, CENTER_RAY, lambda h, c, p: None, stats=stats)
    assert len(rep.hits) == 4
    assert len({h.t for h in rep.hits}) == 1
    assert stats.ah_calls == stats.user_code_calls == 4


def test_while_while_trace_count_identity():
    for scene, ray in (
        (gen_coplanar_stack(4, True), CENTER_RAY),
        (gen_coplanar_stack(4, False), CENTER_RAY),
        (gen_abutting_boxes(3), AXIS_RAY),
    ):
        built = build_scene(scene)
        orc = oracle_all_hits(built, ray)
        rep = _exhaust(run_while_while, built, ray)
        assert rep.stats.traces == 2 * len(orc.groups) + 1
        assert rep.stats.ah_calls == len(orc.hits)


def test_while_while_abutting_boxes_keeps_every_coplanar_pair():
    built = build_scene(gen_abutting_boxes(3))
    orc = oracle_all_hits(built, AXIS_RAY)
    rep = _exhaust(run_while_while, built, AXIS_RAY)
    assert sort_hits(rep.hits) == orc.hits
    assert [len(g) for g in _groups(rep.hits)] == [len(g) for g in orc.groups]


# ----------------------------------------------------------------- while-merged

def test_while_merged_matches_while_while_per_group():
    for scene, ray in (
        (gen_coplanar_stack(4, True), CENTER_RAY),
        (gen_abutting_boxes(4), AXIS_RAY),
        (gen_instanced_grid(2), CENTER_RAY),
    ):
        built = build_scene(scene)
        ww = _exhaust(run_while_while, built, ray)
        wm = _exhaust(run_while_merged, built, ray)
        assert sort_hits(wm.hits) == sort_hits(ww.hits)
        a = [(g[0].t, sorted(map(order_key, g))) for g in _groups(wm.hits)]
        b = [(g[0].t, sorted(map(order_key, g))) for g in _groups(ww.hits)]
        assert a == b


def test_while_merged_trace_count_and_ah_cost():
    built = build_scene(gen_coplanar_stack(8, False))
    orc = oracle_all_hits(built, CENTER_RAY)
    ww = _exhaust(run_while_while, built, CENTER_RAY)
    wm = _exhaust(run_while_merged, built, CENTER_RAY)
    assert wm.stats.traces == len(orc.groups) + 1
    assert wm.stats.user_code_calls == len(orc.hits)
    # merged rays run any-hit on every candidate, not just the target distance
    assert wm.stats.ah_calls > ww.stats.ah_calls


def test_while_merged_rejects_negative_t_min():
    built = build_scene(gen_coplanar_stack(1, True))
    ray = CENTER_RAY._replace(t_min=-1.5)
    with pytest.raises(ValueError):
        run_while_merged(built, ray, lambda h, c, p: None)


# ------------------------------------------------------------- stable multi-hit

def test_multi_hit_capacity_covers_all_hits_in_two_traces():
    built = build_scene(gen_coplanar_stack(4, True))
    orc = oracle_all_hits(built, CENTER_RAY)
    rep = _exhaust(run_stable_multi_hit, built, CENTER_RAY, n=16)
    assert rep.hits == orc.hits
    assert rep.stats.traces == 2  # one gather, one empty confirmation
    assert rep.batches == [4]


def test_multi_hit_n1_reduces_to_stable_next():
    for scene, ray in (
        (gen_coplanar_stack(5, True), CENTER_RAY),
        (gen_abutting_boxes(3), AXIS_RAY),
    ):
        built = build_scene(scene)
        a = _exhaust(run_stable_multi_hit, built, ray, n=1)
        b = _exhaust(run_stable_next, built, ray)
        assert a.hits == b.hits


def test_multi_hit_batch_boundary_inside_tie_group():
    # six hits at one distance, capacity four: 4 then 2, nothing lost
    built = build_scene(gen_coplanar_stack(6, True))
    orc = oracle_all_hits(built, CENTER_RAY)
    rep = _exhaust(run_stable_multi_hit, built, CENTER_RAY, n=4)
    assert rep.batches == [4, 2]
    assert rep.hits == orc.hits


def test_multi_hit_batches_are_resumable():
    built = build_scene(gen_coplanar_stack(6, True))
    stats = TraceStats()
    batches = list(iter_multi_hit_batches(built, CENTER_RAY, 4, stats))
    assert [len(b) for b in batches] == [4, 2]
    flat = [h for b in batches for h in b]
    assert flat == sort_hits(flat)


def test_multi_hit_zero_capacity_is_domain_error():
    built = build_scene(gen_coplanar_stack(1, True))
    with pytest.raises(ValueError):
        _exhaust(run_stable_multi_hit, built, CENTER_RAY, n=0)


def test_multi_hit_permuted_rebuild_same_sequence():
    scene = gen_coplanar_stack(6, True)
    base = _exhaust(run_stable_multi_hit, build_scene(scene), CENTER_RAY, n=4).hits
    for seed in (1, 2, 3):
        built = build_scene(scene, BuildOptions(permute_seed=seed))
        got = _exhaust(run_stable_multi_hit, built, CENTER_RAY, n=4).hits
        assert got == base


# ------------------------------------------------------------------- baselines

def test_ah_only_full_multiset_single_trace():
    built = build_scene(gen_abutting_boxes(3))
    orc = oracle_all_hits(built, AXIS_RAY)
    rep = _exhaust(run_ah_only, built, AXIS_RAY)
    assert sort_hits(rep.hits) == orc.hits
    assert rep.stats.traces == 1


def test_ah_only_out_of_order_on_adversarial_scene():
    built = build_scene(gen_adversarial_order())
    orc = oracle_all_hits(built, REORDER_RAY)
    rep = _exhaust(run_ah_only, built, REORDER_RAY)
    assert sort_hits(rep.hits) == orc.hits  # complete ...
    ts = [h.t for h in rep.hits]
    assert any(b < a for a, b in zip(ts, ts[1:]))  # ... but out of order


def test_ch_only_skips_coplanar_ties():
    built = build_scene(gen_coplanar_stack(4, True))
    rep = _exhaust(run_ch_only, built, CENTER_RAY)
    assert len(rep.hits) == 1  # three coplanar siblings skipped
    assert rep.stats.traces == 2


def test_ch_only_correct_without_ties():
    built = build_scene(gen_coplanar_stack(6, False))
    orc = oracle_all_hits(built, CENTER_RAY)
    rep = _exhaust(run_ch_only, built, CENTER_RAY)
    assert rep.hits == orc.hits
    assert rep.stats.traces == len(rep.hits) + 1


# --------------------------------------------------------- cross-kernel sweeps

_SCENES = (
    gen_coplanar_stack(8, True),
    gen_coplanar_stack(8, False),
    gen_abutting_boxes(4),
    gen_instanced_grid(3),
    gen_adversarial_order(),
    gen_leaf_reorder(),
)


@pytest.mark.parametrize("kernel", CORRECT_KERNELS)
def test_correct_kernels_match_oracle_everywhere(kernel):
    for scene in _SCENES:
        built = build_scene(scene)
        for ray in rays_for(scene, 8, 6):
            orc = oracle_all_hits(built, ray)
            rep = run_kernel(kernel, built, ray, lambda h, c, p: None)
            got = rep.hits
            assert sorted(got, key=order_key) == orc.hits  # completeness
            ts = [h.t for h in got]
            assert all(a <= b for a, b in zip(ts, ts[1:]))  # order
            runs = [(g[0].t, sorted(map(order_key, g))) for g in _groups(got)]
            want = [(g[0].t, sorted(map(order_key, g))) for g in orc.groups]
            assert runs == want  # distance group contents
            ids = [(h.inst, h.geom, h.prim) for h in got]
            assert len(set(ids)) == len(ids)  # no duplicates


@pytest.mark.parametrize("kernel", ("stable-next", "stable-multi-hit:4"))
def test_stable_kernels_bitwise_sorted_everywhere(kernel):
    for scene in _SCENES:
        built = build_scene(scene)
        for ray in rays_for(scene, 8, 6):
            orc = oracle_all_hits(built, ray)
            rep = run_kernel(kernel, built, ray, lambda h, c, p: None)
            assert rep.hits == orc.hits


@pytest.mark.parametrize("kernel", CORRECT_KERNELS)
def test_early_stop_is_exact_prefix(kernel):
    scene = gen_abutting_boxes(3)
    built = build_scene(scene)
    full = run_kernel(built=built, ray=AXIS_RAY, kernel_id=kernel,
                      user_code=lambda h, c, p: None).hits
    for k in range(1, len(full) + 1):
        state = {"n": 0}

        def stop_after(hit, ctx, prd, _k=k):
            state["n"] += 1
            return Step.STOP if state["n"] >= _k else Step.CONTINUE

        state["n"] = 0
        rep = run_kernel(kernel, built, AXIS_RAY, stop_after)
        assert rep.hits == full[:k]
        assert rep.stopped_early


@pytest.mark.parametrize(
    "kernel,expects_ctx",
    [
        ("stable-next", False),
        ("stable-multi-hit:4", False),
        ("reject-repeats", True),
        ("while-while", True),
        ("while-merged", True),
        ("ah-only", True),
        ("ch-only", True),
    ],
)
def test_user_code_pipeline_state_access(kernel, expects_ctx):
    built = build_scene(gen_coplanar_stack(2, True))
    seen = []

    def code(hit, ctx, prd):
        seen.append(ctx)
        return Step.CONTINUE

    run_kernel(kernel, built, CENTER_RAY, code)
    assert seen
    if expects_ctx:
        assert all(isinstance(c, HitContext) for c in seen)
        assert all(c.t == h_t for c, h_t in zip(seen, (s.t for s in seen)))
    else:
        assert all(c is None for c in seen)


def test_counter_identities_across_scenes():
    for scene, ray in (
        (gen_coplanar_stack(8, True), CENTER_RAY),
        (gen_coplanar_stack(8, False), CENTER_RAY),
        (gen_abutting_boxes(5), AXIS_RAY),
        (gen_instanced_grid(3), CENTER_RAY),
    ):
        built = build_scene(scene)
        orc = oracle_all_hits(built, ray)
        H, G = len(orc.hits), len(orc.groups)
        assert _exhaust(run_stable_next, built, ray).stats.traces == H + 1
        assert _exhaust(run_reject_repeats, built, ray).stats.traces == H + 1
        ww = _exhaust(run_while_while, built, ray)
        assert ww.stats.traces == 2 * G + 1
        assert ww.stats.ah_calls == H
        assert _exhaust(run_while_merged, built, ray).stats.traces == G + 1


def test_unknown_kernel_id_rejected():
    with pytest.raises(ValueError):
        parse_kernel("wobble")
    with pytest.raises(ValueError):
        parse_kernel("while-while:3")
