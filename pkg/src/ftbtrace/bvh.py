"""Deterministic two-level bounding volume hierarchy.

Per-mesh trees are built by median split over the longest axis of the
centroid bounds; the scene-level tree uses the same builder over instance
world bounds.  Building is fully deterministic for identical inputs.  An
optional seeded permutation of primitive insertion order emulates a
temporally unstable rebuild: the split sort is stable, so primitives whose
centroids tie keep their (permuted) insertion order and end up visited in a
different order.

Traversal is depth first.  At an inner node the child whose clamped slab
entry (entry distance, not allowed below the live t_min) is smaller is
visited first, ties going to the left child; for disjoint siblings this is
plain near-child-first along the ray.  Because entries are clamped, raising
t_min between traces can flip the visit order of overlapping leaves --
kernels that lean on traversal order must survive exactly that.  The upper
interval bound is re-read after every reported candidate, so an accepted
hit culls later subtrees within the same trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .geom import IDENTITY, Ray, Vec3, affine_inverse, apply_point, mt_core, slab_entry, vec3_32

# node tuple layout: (lox, loy, loz, hix, hiy, hiz, left, right, first, count)
# leaf <=> left < 0; first/count index into the element permutation
_LEAF = -1


@dataclass(frozen=True)
class BuildOptions:
    """leaf_size: max elements per leaf; permute_seed: None keeps the given
    primitive order, an int shuffles insertion order with that seed."""

    leaf_size: int = 4
    permute_seed: Optional[int] = None

    def __post_init__(self):
        if self.leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")


def _build_nodes(bounds, centroids, order, leaf_size):
    nodes = []

    def build(lo, hi):
        blox = bloy = bloz = float("inf")
        bhix = bhiy = bhiz = float("-inf")
        for e in order[lo:hi]:
            lx, ly, lz, hx, hy, hz = bounds[e]
            if lx < blox:
                blox = lx
            if ly < bloy:
                bloy = ly
            if lz < bloz:
                bloz = lz
            if hx > bhix:
                bhix = hx
            if hy > bhiy:
                bhiy = hy
            if hz > bhiz:
                bhiz = hz
        idx = len(nodes)
        nodes.append(None)
        if hi - lo <= leaf_size:
            nodes[idx] = (blox, bloy, bloz, bhix, bhiy, bhiz, _LEAF, _LEAF, lo, hi - lo)
            return idx
        clo = [float("inf")] * 3
        chi = [float("-inf")] * 3
        for e in order[lo:hi]:
            c = centroids[e]
            for a in range(3):
                if c[a] < clo[a]:
                    clo[a] = c[a]
                if c[a] > chi[a]:
                    chi[a] = c[a]
        axis = 0
        best = chi[0] - clo[0]
        for a in (1, 2):
            ext = chi[a] - clo[a]
            if ext > best:
                best = ext
                axis = a
        part = order[lo:hi]
        part.sort(key=lambda e: centroids[e][axis])  # stable: ties keep order
        order[lo:hi] = part
        mid = (lo + hi) // 2
        left = build(lo, mid)
        right = build(mid, hi)
        nodes[idx] = (blox, bloy, bloz, bhix, bhiy, bhiz, left, right, -1, 0)
        return idx

    build(0, len(order))
    return nodes


class Blas:
    """Tree over one mesh's triangles plus packed intersection data."""

    __slots__ = ("nodes", "order", "packed")

    def __init__(self, nodes, order, packed):
        self.nodes = nodes
        self.order = order
        self.packed = packed

    def root_bounds(self):
        n = self.nodes[0]
        return n[:6]


def build_blas(mesh, opts: BuildOptions = BuildOptions()) -> Blas:
    """Deterministic tree over a mesh; permuted insertion order with a seed."""
    ntris = len(mesh.indices)
    if ntris == 0:
        raise ValueError("build_blas: empty mesh")
    verts = mesh.vertices
    bounds = []
    centroids = []
    tri_data = []
    for (i0, i1, i2) in mesh.indices:
        a, b, c = verts[i0], verts[i1], verts[i2]
        bounds.append(
            (
                min(a.x, b.x, c.x), min(a.y, b.y, c.y), min(a.z, b.z, c.z),
                max(a.x, b.x, c.x), max(a.y, b.y, c.y), max(a.z, b.z, c.z),
            )
        )
        centroids.append(((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0, (a.z + b.z + c.z) / 3.0))
        tri_data.append(
            (
                a.x, a.y, a.z,
                b.x - a.x, b.y - a.y, b.z - a.z,
                c.x - a.x, c.y - a.y, c.z - a.z,
            )
        )
    order = list(range(ntris))
    if opts.permute_seed is not None:
        random.Random(opts.permute_seed).shuffle(order)
    nodes = _build_nodes(bounds, centroids, order, opts.leaf_size)
    packed = [tri_data[i] for i in order]
    return Blas(nodes, order, packed)


class BuiltGeometry:
    __slots__ = ("sbt_offset", "blas")

    def __init__(self, sbt_offset, blas):
        self.sbt_offset = sbt_offset
        self.blas = blas


class BuiltInstance:
    __slots__ = ("index", "transform", "inverse", "is_identity", "bounds", "geoms")

    def __init__(self, index, transform, geoms):
        self.index = index
        self.transform = transform
        self.is_identity = transform == IDENTITY
        self.inverse = None if self.is_identity else affine_inverse(transform)
        self.geoms = geoms
        lo = [float("inf")] * 3
        hi = [float("-inf")] * 3
        for g in geoms:
            blox, bloy, bloz, bhix, bhiy, bhiz = g.blas.root_bounds()
            for cx in (blox, bhix):
                for cy in (bloy, bhiy):
                    for cz in (bloz, bhiz):
                        if self.is_identity:
                            wx, wy, wz = cx, cy, cz
                        else:
                            wx, wy, wz = apply_point(transform, Vec3(cx, cy, cz))
                        if wx < lo[0]:
                            lo[0] = wx
                        if wy < lo[1]:
                            lo[1] = wy
                        if wz < lo[2]:
                            lo[2] = wz
                        if wx > hi[0]:
                            hi[0] = wx
                        if wy > hi[1]:
                            hi[1] = wy
                        if wz > hi[2]:
                            hi[2] = wz
        self.bounds = (lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])

    def object_ray_parts(self, ray: Ray):
        """Object-space origin/direction (binary32 components) for this instance."""
        if self.is_identity:
            o = ray.origin
            d = ray.direction
            return o.x, o.y, o.z, d.x, d.y, d.z
        inv = self.inverse
        o = apply_point(inv, ray.origin)
        m = inv.m
        dx = m[0][0] * ray.direction.x + m[0][1] * ray.direction.y + m[0][2] * ray.direction.z
        dy = m[1][0] * ray.direction.x + m[1][1] * ray.direction.y + m[1][2] * ray.direction.z
        dz = m[2][0] * ray.direction.x + m[2][1] * ray.direction.y + m[2][2] * ray.direction.z
        o32 = vec3_32(o.x, o.y, o.z)
        d32 = vec3_32(dx, dy, dz)
        return o32.x, o32.y, o32.z, d32.x, d32.y, d32.z


class BuiltScene:
    """Scene with per-mesh trees and a scene-level tree over instances."""

    __slots__ = ("scene", "opts", "instances", "tlas_nodes", "tlas_order")

    def __init__(self, scene, opts, instances, tlas_nodes, tlas_order):
        self.scene = scene
        self.opts = opts
        self.instances = instances
        self.tlas_nodes = tlas_nodes
        self.tlas_order = tlas_order


def build_scene(scene, opts: Optional[BuildOptions] = None) -> BuiltScene:
    """Build every mesh tree and the instance-level tree deterministically."""
    if opts is None:
        opts = scene.build_options
    scene.validate()
    blas_cache = {}
    instances = []
    for inst in scene.instances:
        geoms = []
        for g in inst.geometries:
            key = id(g.mesh)
            blas = blas_cache.get(key)
            if blas is None:
                blas = build_blas(g.mesh, opts)
                blas_cache[key] = blas
            geoms.append(BuiltGeometry(g.sbt_offset, blas))
        instances.append(BuiltInstance(inst.index, inst.transform, geoms))
    n = len(instances)
    if n == 0:
        return BuiltScene(scene, opts, [], [], [])
    bounds = [bi.bounds for bi in instances]
    centroids = [
        ((b[0] + b[3]) / 2.0, (b[1] + b[4]) / 2.0, (b[2] + b[5]) / 2.0) for b in bounds
    ]
    order = list(range(n))
    if opts.permute_seed is not None:
        random.Random(opts.permute_seed ^ 0x5CE11E).shuffle(order)
    nodes = _build_nodes(bounds, centroids, order, opts.leaf_size)
    return BuiltScene(scene, opts, instances, nodes, order)


def _walk_blas(blas, ox, oy, oz, dx, dy, dz, t_min, t_max, emit, stats):
    """Depth-first walk of one mesh tree; emit(prim, hit) -> (new_tmax, stop)."""
    nodes = blas.nodes
    order = blas.order
    packed = blas.packed
    stats.nodes_visited += 1
    if slab_entry(*nodes[0][:6], ox, oy, oz, dx, dy, dz, t_min, t_max) is None:
        return t_max, False
    stack = [0]
    while stack:
        node = nodes[stack.pop()]
        left = node[6]
        if left < 0:
            first = node[8]
            for slot in range(first, first + node[9]):
                stats.tri_tests += 1
                hit = mt_core(ox, oy, oz, dx, dy, dz, t_min, t_max, *packed[slot])
                if hit is None:
                    continue
                new_tmax, stop = emit(order[slot], hit)
                if new_tmax is not None:
                    t_max = new_tmax
                if stop:
                    return t_max, True
            continue
        right = node[7]
        ln = nodes[left]
        rn = nodes[right]
        stats.nodes_visited += 2
        le = slab_entry(ln[0], ln[1], ln[2], ln[3], ln[4], ln[5], ox, oy, oz, dx, dy, dz, t_min, t_max)
        re = slab_entry(rn[0], rn[1], rn[2], rn[3], rn[4], rn[5], ox, oy, oz, dx, dy, dz, t_min, t_max)
        if le is None:
            if re is not None:
                stack.append(right)
        elif re is None:
            stack.append(left)
        elif re < le:  # right strictly nearer; ties go left-first
            stack.append(left)
            stack.append(right)
        else:
            stack.append(right)
            stack.append(left)
    return t_max, False


def traverse(built: BuiltScene, ray: Ray, visit, stats) -> None:
    """Report every candidate with t_min < t < current t_max exactly once.

    visit(t, u, v, front_face, prim, sbt_offset, instance_index, built_instance)
    returns (new_tmax, stop): a non-None new_tmax shrinks the live interval
    for everything after it; stop aborts the walk immediately.
    """
    t_min = ray.t_min
    t_max = ray.t_max
    nodes = built.tlas_nodes
    if not nodes:
        return
    order = built.tlas_order
    instances = built.instances
    o = ray.origin
    d = ray.direction
    wx, wy, wz, wdx, wdy, wdz = o.x, o.y, o.z, d.x, d.y, d.z
    stats.nodes_visited += 1
    if slab_entry(*nodes[0][:6], wx, wy, wz, wdx, wdy, wdz, t_min, t_max) is None:
        return
    stack = [0]
    while stack:
        node = nodes[stack.pop()]
        left = node[6]
        if left < 0:
            first = node[8]
            for slot in range(first, first + node[9]):
                bi = instances[order[slot]]
                stats.nodes_visited += 1
                b = bi.bounds
                if slab_entry(b[0], b[1], b[2], b[3], b[4], b[5], wx, wy, wz, wdx, wdy, wdz, t_min, t_max) is None:
                    continue
                ox, oy, oz, dx, dy, dz = bi.object_ray_parts(ray)
                inst_index = bi.index
                for geom in bi.geoms:
                    sbt = geom.sbt_offset

                    def emit(prim, hit, _sbt=sbt, _inst=inst_index, _bi=bi):
                        return visit(hit[0], hit[1], hit[2], hit[3], prim, _sbt, _inst, _bi)

                    t_max, stop = _walk_blas(
                        geom.blas, ox, oy, oz, dx, dy, dz, t_min, t_max, emit, stats
                    )
                    if stop:
                        return
            continue
        right = node[7]
        ln = nodes[left]
        rn = nodes[right]
        stats.nodes_visited += 2
        le = slab_entry(ln[0], ln[1], ln[2], ln[3], ln[4], ln[5], wx, wy, wz, wdx, wdy, wdz, t_min, t_max)
        re = slab_entry(rn[0], rn[1], rn[2], rn[3], rn[4], rn[5], wx, wy, wz, wdx, wdy, wdz, t_min, t_max)
        if le is None:
            if re is not None:
                stack.append(right)
        elif re is None:
            stack.append(left)
        elif re < le:
            stack.append(left)
            stack.append(right)
        else:
            stack.append(right)
            stack.append(left)
