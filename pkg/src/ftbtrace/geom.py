"""Vectors, rays, triangles, boxes and affine instance transforms, plus the
deterministic ray/triangle and ray/box tests shared by the traversal pipeline
and the brute-force reference.

Stored coordinates are binary32 values held in Python floats.  Intersection
arithmetic runs in binary64 with a fixed operation order (written out below,
no fused operations) and rounds pipeline-visible outputs -- the hit distance
and barycentrics -- to binary32 at the end.  Identical inputs therefore give
bitwise identical results on every platform, and the brute-force reference
calls the very same routines, so reference-versus-pipeline distance
comparisons are exact.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

from .floatstep import f32


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def add(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def sub(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def scale(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, o: "Vec3") -> float:
        return self.x * o.x + self.y * o.y + self.z * o.z

    def cross(self, o: "Vec3") -> "Vec3":
        return Vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )

    def length(self) -> float:
        return math.sqrt(self.dot(self))


def vec3_32(x: float, y: float, z: float) -> Vec3:
    """Vec3 with every component rounded to binary32."""
    return Vec3(f32(x), f32(y), f32(z))


class Ray(NamedTuple):
    """Ray with an exclusive valid interval: a hit needs t_min < t < t_max.

    Kernels only ever replace t_min/t_max; origin and direction stay
    untouched so every retrace reproduces the exact same hit distances.
    The direction need not be unit length; t is measured in units of it.
    """

    origin: Vec3
    direction: Vec3
    t_min: float
    t_max: float


def make_ray(origin, direction, t_min, t_max) -> Ray:
    """Build a ray with all components rounded to binary32."""
    return Ray(vec3_32(*origin), vec3_32(*direction), f32(t_min), f32(t_max))


class Triangle(NamedTuple):
    v0: Vec3
    v1: Vec3
    v2: Vec3


class Aabb(NamedTuple):
    lo: Vec3
    hi: Vec3


class TriHit(NamedTuple):
    t: float
    u: float
    v: float
    front_face: bool


class Affine3(NamedTuple):
    """Affine transform: row-major 3x3 linear part plus translation."""

    m: tuple
    t: Vec3


IDENTITY = Affine3(
    ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)), Vec3(0.0, 0.0, 0.0)
)


def translation(x: float, y: float, z: float) -> Affine3:
    return Affine3(IDENTITY.m, vec3_32(x, y, z))


def scaling(sx: float, sy: float = None, sz: float = None) -> Affine3:
    if sy is None:
        sy = sx
    if sz is None:
        sz = sy
    return Affine3(
        ((f32(sx), 0.0, 0.0), (0.0, f32(sy), 0.0), (0.0, 0.0, f32(sz))),
        Vec3(0.0, 0.0, 0.0),
    )


def apply_point(xf: Affine3, p: Vec3) -> Vec3:
    m = xf.m
    t = xf.t
    return Vec3(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + t.x,
        m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + t.y,
        m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + t.z,
    )


def apply_vector(xf: Affine3, v: Vec3) -> Vec3:
    m = xf.m
    return Vec3(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )


def det3(m) -> float:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def affine_inverse(xf: Affine3) -> Affine3:
    """Inverse affine transform; raises ValueError on a singular linear part."""
    m = xf.m
    d = det3(m)
    if d == 0.0:
        raise ValueError("affine_inverse: singular transform")
    inv_d = 1.0 / d
    inv = (
        (
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_d,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_d,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_d,
        ),
        (
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_d,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_d,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_d,
        ),
        (
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_d,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_d,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_d,
        ),
    )
    t = xf.t
    ti = Vec3(
        -(inv[0][0] * t.x + inv[0][1] * t.y + inv[0][2] * t.z),
        -(inv[1][0] * t.x + inv[1][1] * t.y + inv[1][2] * t.z),
        -(inv[2][0] * t.x + inv[2][1] * t.y + inv[2][2] * t.z),
    )
    return Affine3(inv, ti)


def transform_ray(xf: Affine3, ray: Ray) -> Ray:
    """Map a world-space ray into the frame of an instance with transform xf.

    Applies the inverse of ``xf`` to origin and direction.  The direction is
    not renormalised, so object-space hit parameters equal world-space ones;
    the interval is copied unchanged.  The identity transform returns the ray
    bitwise untouched.
    """
    if xf == IDENTITY:
        return ray
    return transform_ray_inv(affine_inverse(xf), ray)


def transform_ray_inv(inv: Affine3, ray: Ray) -> Ray:
    """Like transform_ray, but with the inverse already computed."""
    o = apply_point(inv, ray.origin)
    d = apply_vector(inv, ray.direction)
    return Ray(vec3_32(*o), vec3_32(*d), ray.t_min, ray.t_max)


def mt_core(
    ox, oy, oz, dx, dy, dz, t_min, t_max,
    v0x, v0y, v0z, e1x, e1y, e1z, e2x, e2y, e2z,
) -> Optional[TriHit]:
    """Moeller-Trumbore ray/triangle test with a pinned evaluation order.

    Edge vectors e1 = v1 - v0 and e2 = v2 - v0 are taken as inputs (their
    binary64 computation from binary32 vertices is exact).  Boundary tests
    run on the binary64 barycentrics (edges inclusive), the hit distance is
    rounded to binary32 and then checked against the exclusive interval.
    """
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if det == 0.0:
        return None
    inv = 1.0 / det
    tx = ox - v0x
    ty = oy - v0y
    tz = oz - v0z
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return None
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return None
    t = f32((e2x * qx + e2y * qy + e2z * qz) * inv)
    if not t_min < t < t_max:  # NaN fails both comparisons
        return None
    return TriHit(t, f32(u), f32(v), det > 0.0)


def intersect_triangle(ray: Ray, tri: Triangle) -> Optional[TriHit]:
    """Hit of the ray against one triangle inside the exclusive interval.

    Degenerate (zero-area) triangles never report a hit.  Results for
    identical inputs are bitwise reproducible.
    """
    o = ray.origin
    d = ray.direction
    v0, v1, v2 = tri
    return mt_core(
        o.x, o.y, o.z, d.x, d.y, d.z, ray.t_min, ray.t_max,
        v0.x, v0.y, v0.z,
        v1.x - v0.x, v1.y - v0.y, v1.z - v0.z,
        v2.x - v0.x, v2.y - v0.y, v2.z - v0.z,
    )


def slab_entry(
    lox, loy, loz, hix, hiy, hiz,
    ox, oy, oz, dx, dy, dz, t_min, t_max,
) -> Optional[float]:
    """Clamped entry distance into a box, or None when the slab interval
    misses (t_min, t_max).

    Boundary overlap is inclusive on both sides, so the test may admit a box
    it strictly need not, but never wrongly rejects one.  Rays parallel to a
    slab pass when the origin lies inside it (inclusive).
    """
    enter = t_min
    exit_ = t_max
    if dx != 0.0:
        inv = 1.0 / dx
        t0 = (lox - ox) * inv
        t1 = (hix - ox) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > enter:
            enter = t0
        if t1 < exit_:
            exit_ = t1
        if enter > exit_:
            return None
    elif ox < lox or ox > hix:
        return None
    if dy != 0.0:
        inv = 1.0 / dy
        t0 = (loy - oy) * inv
        t1 = (hiy - oy) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > enter:
            enter = t0
        if t1 < exit_:
            exit_ = t1
        if enter > exit_:
            return None
    elif oy < loy or oy > hiy:
        return None
    if dz != 0.0:
        inv = 1.0 / dz
        t0 = (loz - oz) * inv
        t1 = (hiz - oz) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > enter:
            enter = t0
        if t1 < exit_:
            exit_ = t1
        if enter > exit_:
            return None
    elif oz < loz or oz > hiz:
        return None
    return enter


def intersect_aabb(ray: Ray, box: Aabb):
    """Overlap of the box's slab interval with (t_min, t_max), or None.

    Returns the clamped (enter, exit) pair.  Conservative: inclusive at the
    box boundary, so a box containing a valid hit is never rejected.
    """
    o = ray.origin
    d = ray.direction
    lo, hi = box
    enter = slab_entry(
        lo.x, lo.y, lo.z, hi.x, hi.y, hi.z,
        o.x, o.y, o.z, d.x, d.y, d.z, ray.t_min, ray.t_max,
    )
    if enter is None:
        return None
    # recompute the exit with the same arithmetic
    exit_ = ray.t_max
    for lov, hiv, ov, dv in ((lo.x, hi.x, o.x, d.x), (lo.y, hi.y, o.y, d.y), (lo.z, hi.z, o.z, d.z)):
        if dv != 0.0:
            inv = 1.0 / dv
            t0 = (lov - ov) * inv
            t1 = (hiv - ov) * inv
            if t0 > t1:
                t0, t1 = t1, t0
            if t1 < exit_:
                exit_ = t1
    return (enter, exit_)
