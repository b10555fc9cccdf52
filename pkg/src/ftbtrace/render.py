"""Test-rig rendering: cameras, user-code mock-ups, pseudo-color images,
per-kernel statistics and end-to-end validation.

Per-pixel colors avalanche-hash the visit count together with the last
delivered hit identity, so even one extra, missing, out-of-order or
double-reported hit flips the whole pixel color.  Per-pixel randomness is
counter-based (hashed from seed and pixel coordinates), so thread count and
rendering order can never change a single byte of output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

from .bvh import BuiltScene, build_scene
from .floatstep import f32_bits
from .geom import Ray, Vec3, apply_point, make_ray
from .hitorder import HitDesc
from .kernels import Step, run_kernel
from .oracle import check_rebuild_stability, validate_kernel
from .pipeline import TraceStats

T_FAR = 1.0e30

_M64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """Order-sensitive avalanche hash of integers; counter-based RNG core."""
    h = 0
    for v in values:
        h = _splitmix64((h ^ (v & _M64)) & _M64)
    return h


def _u01(h: int) -> float:
    return (h >> 11) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class Camera:
    position: tuple
    look_at: tuple
    up: tuple
    fov_y: float  # degrees
    width: int
    height: int


def pixel_ray(cam: Camera, x: int, y: int) -> Ray:
    """Primary ray through the center of pixel (x, y); y runs downward."""
    pos = Vec3(*cam.position)
    fwd = Vec3(*cam.look_at).sub(pos)
    fwd = fwd.scale(1.0 / fwd.length())
    right = fwd.cross(Vec3(*cam.up))
    right = right.scale(1.0 / right.length())
    upv = right.cross(fwd)
    tan_half = math.tan(math.radians(cam.fov_y) * 0.5)
    aspect = cam.width / cam.height
    px = ((x + 0.5) / cam.width * 2.0 - 1.0) * tan_half * aspect
    py = (1.0 - (y + 0.5) / cam.height * 2.0) * tan_half
    d = fwd.add(right.scale(px)).add(upv.scale(py))
    return make_ray(pos, d, 0.0, T_FAR)


def camera_rays(cam: Camera) -> list:
    """All primary rays, row-major from the top-left pixel."""
    return [pixel_ray(cam, x, y) for y in range(cam.height) for x in range(cam.width)]


def resolve_camera(scene, width: int, height: int) -> Camera:
    """Camera from the scene's hint, or an automatic framing of its bounds."""
    hint = scene.camera_hint
    if hint is not None:
        return Camera(
            position=tuple(hint["position"]),
            look_at=tuple(hint["look_at"]),
            up=tuple(hint.get("up", (0.0, 1.0, 0.0))),
            fov_y=float(hint["fov_y"]),
            width=width,
            height=height,
        )
    lo = [math.inf] * 3
    hi = [-math.inf] * 3
    for inst in scene.instances:
        for g in inst.geometries:
            for v in g.mesh.vertices:
                w = apply_point(inst.transform, v)
                for a in range(3):
                    if w[a] < lo[a]:
                        lo[a] = w[a]
                    if w[a] > hi[a]:
                        hi[a] = w[a]
    if lo[0] > hi[0]:  # empty scene
        return Camera((0.0, 0.0, -5.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), 45.0, width, height)
    center = tuple((lo[a] + hi[a]) * 0.5 for a in range(3))
    radius = max(hi[a] - lo[a] for a in range(3)) * 0.5 + 1e-3
    pos = (center[0] + 0.07 * radius, center[1] + 0.05 * radius, center[2] - 3.0 * radius)
    return Camera(pos, center, (0.0, 1.0, 0.0), 40.0, width, height)


# ------------------------------------------------------------- user code mocks

@dataclass(frozen=True)
class MaxDepth:
    n: int


@dataclass(frozen=True)
class ProbDepth:
    n: int
    seed: int


@dataclass(frozen=True)
class CountAll:
    pass


UserCodeSpec = Union[MaxDepth, ProbDepth, CountAll]


def parse_user_code(s: str) -> UserCodeSpec:
    """Parse 'maxdepth:N', 'probdepth:N:SEED' or 'countall'."""
    parts = s.lower().split(":")
    if parts[0] == "countall":
        return CountAll()
    if parts[0] == "maxdepth":
        return MaxDepth(int(parts[1]))
    if parts[0] == "probdepth":
        return ProbDepth(int(parts[1]), int(parts[2]) if len(parts) > 2 else 0)
    raise ValueError(f"unknown user code spec {s!r}")


class PixelState:
    """Tracks how often user code ran and the identity it last saw."""

    __slots__ = ("count", "last")

    def __init__(self):
        self.count = 0
        self.last = None


def make_user_code(spec: UserCodeSpec, x: int = 0, y: int = 0):
    """Per-pixel user-code callback plus its observable state.

    For ProbDepth the per-pixel stream is keyed by hash(seed, x, y); the
    k-th decision draws from hash(key, k), so results are independent of
    evaluation order.
    """
    state = PixelState()
    if isinstance(spec, CountAll):
        def code(hit, ctx, prd):
            state.count += 1
            state.last = hit
            return Step.CONTINUE
    elif isinstance(spec, MaxDepth):
        n = spec.n
        if n < 1:
            raise ValueError("maxdepth needs n >= 1")
        def code(hit, ctx, prd):
            state.count += 1
            state.last = hit
            return Step.STOP if state.count >= n else Step.CONTINUE
    elif isinstance(spec, ProbDepth):
        n = spec.n
        if n < 1:
            raise ValueError("probdepth needs n >= 1")
        key = mix64(spec.seed, x, y)
        threshold = 1.0 / n
        def code(hit, ctx, prd):
            state.count += 1
            state.last = hit
            if _u01(mix64(key, state.count)) < threshold:
                return Step.STOP
            return Step.CONTINUE
    else:
        raise TypeError(f"unknown user code spec {spec!r}")
    return code, state


# ---------------------------------------------------------------- image output

def pseudo_color(count: int, last: Optional[HitDesc]) -> tuple:
    """Avalanche color of (visit count, last hit identity); black = no hits."""
    if count == 0 or last is None:
        return (0, 0, 0)
    h = mix64(count, f32_bits(last.t), last.prim, last.geom, last.inst)
    rgb = (h & 0xFF, (h >> 8) & 0xFF, (h >> 16) & 0xFF)
    if rgb == (0, 0, 0):
        return (1, 1, 1)  # keep black reserved for 'no hits'
    return rgb


def ppm_bytes(width: int, height: int, pixels: bytes) -> bytes:
    """Binary PPM (P6) image from row-major RGB bytes."""
    if len(pixels) != width * height * 3:
        raise ValueError("pixel buffer size mismatch")
    return b"P6\n%d %d\n255\n" % (width, height) + pixels


def render_image(built: BuiltScene, cam: Camera, kernel_id, spec: UserCodeSpec,
                 threads: int = 1):
    """Render one pseudo-color image; returns (ppm bytes, aggregated stats).

    Rows render independently (optionally on a thread pool) and are merged
    by row index; per-pixel state is self-contained, so the byte output is
    identical for any thread count.
    """
    width, height = cam.width, cam.height

    def render_row(y: int):
        row = bytearray()
        row_stats = TraceStats()
        for x in range(width):
            ray = pixel_ray(cam, x, y)
            code, state = make_user_code(spec, x, y)
            run_kernel(kernel_id, built, ray, code, stats=row_stats)
            row.extend(pseudo_color(state.count, state.last))
        return y, bytes(row), row_stats

    results = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(render_row, range(height)))
    else:
        results = [render_row(y) for y in range(height)]
    results.sort(key=lambda r: r[0])
    stats = TraceStats()
    body = bytearray()
    for _, row, row_stats in results:
        body.extend(row)
        stats.add(row_stats)
    return ppm_bytes(width, height, bytes(body)), stats


STATS_CSV_HEADER = "kernel,traces,ahCalls,chCalls,userCodeCalls,nodesVisited,triTests"


def stats_csv_row(kernel_id: str, stats: TraceStats) -> str:
    return "%s,%d,%d,%d,%d,%d,%d" % (
        kernel_id,
        stats.traces,
        stats.ah_calls,
        stats.ch_calls,
        stats.user_code_calls,
        stats.nodes_visited,
        stats.tri_tests,
    )


def stats_csv(rows) -> str:
    """CSV text: header plus one (kernel, stats) row each."""
    return "\n".join([STATS_CSV_HEADER] + [stats_csv_row(k, s) for k, s in rows]) + "\n"


@dataclass
class CompareReport:
    kernels: list
    diff_pixels: dict  # kernel -> pixels differing from the first kernel
    images: dict  # kernel -> ppm bytes
    stats: dict  # kernel -> TraceStats

    @property
    def all_identical(self) -> bool:
        return all(v == 0 for v in self.diff_pixels.values())

    def csv(self) -> str:
        return stats_csv((k, self.stats[k]) for k in self.kernels)


def compare_kernels(built: BuiltScene, cam: Camera, kernel_ids, spec: UserCodeSpec,
                    threads: int = 1) -> CompareReport:
    """Render every kernel with identical rays and diff images pixel-exactly."""
    kernel_ids = list(kernel_ids)
    images = {}
    stats = {}
    for k in kernel_ids:
        img, st = render_image(built, cam, k, spec, threads=threads)
        images[k] = img
        stats[k] = st
    base = kernel_ids[0]
    base_img = images[base]
    diffs = {}
    header_len = base_img.index(b"255\n") + 4
    a = base_img[header_len:]
    for k in kernel_ids:
        b = images[k][header_len:]
        diffs[k] = sum(1 for p in range(0, len(a), 3) if a[p : p + 3] != b[p : p + 3])
    return CompareReport(kernel_ids, diffs, images, stats)


def run_validation(scene, kernel_ids, cam: Camera, seeds=(), threads: int = 1):
    """Drive the differential validator over all camera rays.

    Returns (status, report dict); status is 0 only when every check of
    every kernel (and, with seeds, every rebuild-stability check) passed.
    """
    built = build_scene(scene)
    rays = camera_rays(cam)
    from .oracle import oracle_all_hits  # local import to keep module edges tidy

    oracles = [oracle_all_hits(built, r) for r in rays]
    report = {
        "scene": scene.name or "custom",
        "rays": len(rays),
        "kernels": {},
        "stability": {},
    }
    status = 0
    for k in kernel_ids:
        v = validate_kernel(k, built, rays, oracles=oracles)
        report["kernels"][k] = v.to_dict()
        if not v.ok:
            status = 1
    for k in kernel_ids:
        if seeds:
            s = check_rebuild_stability(k, scene, rays, seeds)
            report["stability"][k] = s.to_dict()
            if not s.ok:
                status = 1
    report["status"] = status
    return status, report
