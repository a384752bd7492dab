"""Stochastic voxel phantoms of three-layer skin.

Cells are non-overlapping spheres placed by dart throwing (a hard-core
"disc Poisson" process), vessels are horizontal line segments with Poisson
counts and uniform centers, and red blood cells are dart-thrown inside the
vessel lumens. The result is rasterized onto a regular voxel grid.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError
from .materials import LUMEN, Catalog, CellSpecies, LayerSpec
from .streams import stream

log = logging.getLogger(__name__)

ATTEMPTS_PER_CELL = 30
_BATCH = 2048


@dataclass(frozen=True)
class GridConfig:
    dx: float = 1e-5
    extent: Tuple[float, float, float] = (1e-4, 1e-4, 5e-3)
    seed: int = 0

    def __post_init__(self):
        if not self.dx > 0:
            raise DomainError(f"voxel pitch must be > 0, got {self.dx}")
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))
        for e in self.extent:
            n = e / self.dx
            if not e > 0 or abs(n - round(n)) > 1e-6 * max(1.0, n):
                raise DomainError(f"extent {e} is not a positive multiple of dx = {self.dx}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(int(round(e / self.dx)) for e in self.extent)

    def centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.shape[axis]) + 0.5) * self.dx


@dataclass(frozen=True)
class Box:
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]

    @property
    def volume(self) -> float:
        return float(np.prod(np.maximum(np.subtract(self.hi, self.lo), 0.0)))

    @property
    def empty(self) -> bool:
        return any(h < l for l, h in zip(self.lo, self.hi))


@dataclass(frozen=True)
class CellPlacement:
    species: str
    center: Tuple[float, float, float]
    radius: float


@dataclass(frozen=True)
class VesselSegment:
    center: Tuple[float, float, float]
    axis: Tuple[float, float, float]
    half_length: float
    radius: float
    vessel_class: str
    layer: str = ""

    @property
    def lumen_volume(self) -> float:
        return math.pi * self.radius**2 * 2.0 * self.half_length

    def endpoints(self):
        c, a = np.asarray(self.center), np.asarray(self.axis)
        return c - self.half_length * a, c + self.half_length * a


@dataclass(frozen=True)
class SpeciesCount:
    target: int
    achieved: int
    volume: float  # m^3 the target was computed over

    @property
    def achieved_density(self) -> float:
        return self.achieved / self.volume if self.volume > 0 else 0.0


@dataclass(frozen=True)
class ScenarioRealization:
    grid: GridConfig
    placements: Tuple[CellPlacement, ...]
    vessels: Tuple[VesselSegment, ...]
    voxel_labels: np.ndarray  # uint16, indexed [ix, iy, iz]
    label_names: Tuple[str, ...]
    layer_ids: Tuple[str, ...]
    slice_layer: np.ndarray  # layer index of each z slice
    counts: Dict[str, SpeciesCount] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.grid.seed

    def label_id(self, name: str) -> int:
        return self.label_names.index(name)

    def label_counts(self) -> Dict[str, int]:
        counts = np.bincount(self.voxel_labels.ravel(), minlength=len(self.label_names))
        return {name: int(c) for name, c in zip(self.label_names, counts)}


# -- dart throwing -----------------------------------------------------------


def _dart_throw(
    sample: Callable[[int], np.ndarray],
    radius: float,
    target: int,
    budget: int,
    ex_centers: np.ndarray,
    ex_radii: np.ndarray,
) -> np.ndarray:
    """Sequential random sequential addition, evaluated in candidate batches.

    Candidates are accepted in draw order exactly as a one-at-a-time loop
    would accept them; batching only vectorizes the distance tests, so the
    outcome does not depend on the batch size.
    """
    accepted: List[np.ndarray] = []
    n_acc = 0
    used = 0
    centers, radii = ex_centers, ex_radii
    while n_acc < target and used < budget:
        # small batches while the region is empty keep within-batch pair lists short
        k = min(_BATCH, budget - used, max(64, 4 * (target - n_acc)))
        cand = sample(k)
        used += k
        ok = np.ones(k, dtype=bool)
        if len(centers):
            tree = cKDTree(centers)
            reach = radius + float(radii.max())
            sdm = cKDTree(cand).sparse_distance_matrix(tree, reach, output_type="ndarray")
            clash = sdm["v"] < radius + radii[sdm["j"]]
            ok[sdm["i"][clash]] = False
        idx = np.flatnonzero(ok)
        if len(idx) == 0:
            continue
        sub = cand[idx]
        # accept the earliest live candidate, then kill every later one it overlaps
        alive = np.ones(len(sub), dtype=bool)
        taken = []
        m = 0
        min_d2 = (2.0 * radius) ** 2
        while n_acc < target:
            nxt = np.flatnonzero(alive[m:])
            if len(nxt) == 0:
                break
            m += int(nxt[0])
            taken.append(m)
            n_acc += 1
            alive[m] = False
            tail = sub[m + 1 :]
            alive[m + 1 :] &= ((tail - sub[m]) ** 2).sum(axis=1) >= min_d2
        new = sub[taken]
        accepted.append(new)
        centers = np.vstack([centers, new]) if len(centers) else new
        radii = np.concatenate([radii, np.full(len(new), radius)])
    if not accepted:
        return np.empty((0, 3))
    return np.vstack(accepted)


def _as_arrays(existing: Sequence[CellPlacement]):
    if not existing:
        return np.empty((0, 3)), np.empty(0)
    return (
        np.array([p.center for p in existing], dtype=float),
        np.array([p.radius for p in existing], dtype=float),
    )


def place_cells_disc_poisson(
    volume: Box,
    species: CellSpecies,
    existing: Sequence[CellPlacement],
    rng: np.random.Generator,
    *,
    center_box: Optional[Box] = None,
    attempts_per_cell: int = ATTEMPTS_PER_CELL,
) -> List[CellPlacement]:
    """Place ``round(rho * volume)`` spheres of one species without overlap.

    Parameters
    ----------
    volume : Box
        Layer volume the target count is computed over.
    species : CellSpecies
        Geometry and number density of the cells.
    existing : sequence of CellPlacement
        Spheres already placed (any species); new spheres keep clear of them.
    rng : numpy.random.Generator
        Dedicated stream for this (layer, species) pair.
    center_box : Box, optional
        Where centers may fall. Defaults to ``volume`` shrunk laterally by the
        radius and kept at least one radius below the surface ``z = 0``.
    attempts_per_cell : int
        Candidate budget per targeted cell. Placement stops at the target or
        when the budget is spent; a shortfall is logged, never raised.
    """
    r = species.radius
    target = int(round(species.number_density * volume.volume))
    if target <= 0:
        return []
    if center_box is None:
        lo, hi = volume.lo, volume.hi
        center_box = Box(
            (lo[0] + r, lo[1] + r, max(lo[2], r)),
            (hi[0] - r, hi[1] - r, hi[2]),
        )
    if center_box.empty:
        log.info("%s: no room for a single cell (target %d)", species.id, target)
        return []
    lo = np.asarray(center_box.lo)
    span = np.asarray(center_box.hi) - lo

    def sample(k):
        return lo + span * rng.random((k, 3))

    ex_c, ex_r = _as_arrays(existing)
    if len(ex_c):
        # only neighbours that can reach the slab matter
        near = (ex_c[:, 2] + ex_r + r > center_box.lo[2]) & (ex_c[:, 2] - ex_r - r < center_box.hi[2])
        ex_c, ex_r = ex_c[near], ex_r[near]
    got = _dart_throw(sample, r, target, attempts_per_cell * target, ex_c, ex_r)
    if len(got) < target:
        log.info("%s: placed %d of %d cells", species.id, len(got), target)
    return [CellPlacement(species.id, tuple(map(float, c)), r) for c in got]


def _clip_to_lateral_box(center, axis, half_length, extent_x, extent_y):
    t0, t1 = -half_length, half_length
    for c, a, hi in ((center[0], axis[0], extent_x), (center[1], axis[1], extent_y)):
        if abs(a) < 1e-15:
            continue
        ta, tb = (0.0 - c) / a, (hi - c) / a
        t0 = max(t0, min(ta, tb))
        t1 = min(t1, max(ta, tb))
    mid = 0.5 * (t0 + t1)
    return tuple(float(center[i] + mid * axis[i]) for i in range(3)), 0.5 * (t1 - t0)


def place_vessels_line_poisson(
    layer: LayerSpec, grid: GridConfig, rng: np.random.Generator
) -> List[VesselSegment]:
    """Poisson number of horizontal vessel segments inside one layer.

    Count ~ Poisson(density x lateral area); lateral centers uniform; depth
    uniform over the top ``depth_fraction`` of the layer, keeping the lumen
    inside it; azimuth uniform. Segments run the full lateral extent and are
    clipped to the grid box.
    """
    vp = layer.vessel_policy
    X, Y, Z = grid.extent
    mean = vp.density * X * Y
    if mean <= 0 or vp.radius <= 0:
        return []
    n = int(rng.poisson(mean))
    if n == 0:
        return []
    z0 = layer.depth_interval[0]
    z1 = min(z0 + vp.depth_fraction * layer.thickness, Z)
    zlo, zhi = z0 + vp.radius, z1 - vp.radius
    u = rng.random((n, 4))
    if zhi < zlo:
        log.info("%s: layer too thin for vessels of radius %g", layer.id, vp.radius)
        return []
    out = []
    half = max(X, Y)
    for ux, uy, uz, uphi in u:
        center = (ux * X, uy * Y, zlo + uz * (zhi - zlo))
        phi = math.pi * uphi
        axis = (math.cos(phi), math.sin(phi), 0.0)
        c, h = _clip_to_lateral_box(center, axis, half, X, Y)
        out.append(VesselSegment(c, axis, h, vp.radius, vp.vessel_class, layer.id))
    return out


def _perpendicular_basis(axis):
    a = np.asarray(axis, dtype=float)
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(a, e1)


def fill_vessels_with_rbc(
    vessels: Sequence[VesselSegment],
    rbc: CellSpecies,
    rng: np.random.Generator,
    existing: Sequence[CellPlacement] = (),
    *,
    attempts_per_cell: int = ATTEMPTS_PER_CELL,
) -> List[CellPlacement]:
    """Dart-throw red blood cells inside vessel lumens.

    The target is the cell density times the total lumen volume of the
    vessels wide enough to hold a cell. Centers stay at least one cell radius
    from the wall and the segment ends, so a lumen exactly one cell wide
    forces every center onto the axis.
    """
    r = rbc.radius
    usable = []
    for v in vessels:
        if v.radius < r or v.half_length < r:
            warnings.warn(f"vessel of radius {v.radius:g} m cannot hold {rbc.id}; skipped", stacklevel=2)
            continue
        usable.append(v)
    if not usable:
        return []
    volumes = np.array([v.lumen_volume for v in usable])
    target = int(round(rbc.number_density * volumes.sum()))
    if target <= 0:
        return []
    cum = np.cumsum(volumes) / volumes.sum()
    centers = np.array([v.center for v in usable])
    axes = np.array([v.axis for v in usable])
    bases = [_perpendicular_basis(v.axis) for v in usable]
    e1 = np.array([b[0] for b in bases])
    e2 = np.array([b[1] for b in bases])
    reach_t = np.array([v.half_length - r for v in usable])
    reach_s = np.array([v.radius - r for v in usable])

    def sample(k):
        u = rng.random((k, 4))
        which = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), len(usable) - 1)
        t = (2.0 * u[:, 1] - 1.0) * reach_t[which]
        s = reach_s[which] * np.sqrt(u[:, 2])
        phi = 2.0 * math.pi * u[:, 3]
        return (
            centers[which]
            + t[:, None] * axes[which]
            + (s * np.cos(phi))[:, None] * e1[which]
            + (s * np.sin(phi))[:, None] * e2[which]
        )

    ex_c, ex_r = _as_arrays(existing)
    got = _dart_throw(sample, r, target, attempts_per_cell * target, ex_c, ex_r)
    if len(got) < target:
        log.info("%s: placed %d of %d cells", rbc.id, len(got), target)
    return [CellPlacement(rbc.id, tuple(map(float, c)), r) for c in got]


# -- rasterization -----------------------------------------------------------


def label_table(catalog: Catalog) -> Tuple[str, ...]:
    return tuple(ly.ecm_label for ly in catalog.layers.values()) + (LUMEN,) + tuple(catalog.cells)


def _index_range(lo, hi, dx, n):
    a = max(int(math.ceil(lo / dx - 0.5)), 0)
    b = min(int(math.floor(hi / dx - 0.5)), n - 1)
    return a, b


def rasterize(
    placements: Sequence[CellPlacement],
    vessels: Sequence[VesselSegment],
    grid: GridConfig,
    catalog: Catalog,
    counts: Optional[Dict[str, SpeciesCount]] = None,
) -> ScenarioRealization:
    """Label each voxel by its center: cell, else vessel lumen, else layer ECM.

    A voxel center inside several spheres (possible only for touching
    spheres) takes the nearest sphere's species.
    """
    nx, ny, nz = grid.shape
    dx = grid.dx
    names = label_table(catalog)
    layer_ids = tuple(catalog.layers)
    zc = grid.centers(2)
    slice_layer = np.array([layer_ids.index(catalog.layer_at(z).id) for z in zc], dtype=np.int16)
    labels = np.empty((nx, ny, nz), dtype=np.uint16)
    labels[:] = slice_layer[None, None, :].astype(np.uint16)  # ECM labels come first in the table
    xc, yc = grid.centers(0), grid.centers(1)

    lumen = names.index(LUMEN)
    for v in vessels:
        p0, p1 = v.endpoints()
        lo = np.minimum(p0, p1) - v.radius
        hi = np.maximum(p0, p1) + v.radius
        ia, ib = _index_range(lo[0], hi[0], dx, nx)
        ja, jb = _index_range(lo[1], hi[1], dx, ny)
        ka, kb = _index_range(lo[2], hi[2], dx, nz)
        if ia > ib or ja > jb or ka > kb:
            continue
        P = np.stack(
            np.meshgrid(xc[ia : ib + 1], yc[ja : jb + 1], zc[ka : kb + 1], indexing="ij"), axis=-1
        ) - np.asarray(v.center)
        t = P @ np.asarray(v.axis)
        radial2 = np.einsum("...i,...i->...", P, P) - t * t
        inside = (np.abs(t) <= v.half_length) & (radial2 <= v.radius**2)
        block = labels[ia : ib + 1, ja : jb + 1, ka : kb + 1]
        block[inside] = lumen

    best = np.full((nx, ny, nz), np.inf)
    for pl in placements:
        cx, cy, cz = pl.center
        r = pl.radius
        ia, ib = _index_range(cx - r, cx + r, dx, nx)
        ja, jb = _index_range(cy - r, cy + r, dx, ny)
        ka, kb = _index_range(cz - r, cz + r, dx, nz)
        if ia > ib or ja > jb or ka > kb:
            continue
        d2 = (
            (xc[ia : ib + 1, None, None] - cx) ** 2
            + (yc[None, ja : jb + 1, None] - cy) ** 2
            + (zc[None, None, ka : kb + 1] - cz) ** 2
        )
        bblock = best[ia : ib + 1, ja : jb + 1, ka : kb + 1]
        take = (d2 <= r * r) & (d2 < bblock)
        bblock[take] = d2[take]
        labels[ia : ib + 1, ja : jb + 1, ka : kb + 1][take] = names.index(pl.species)

    labels.setflags(write=False)
    return ScenarioRealization(
        grid=grid,
        placements=tuple(placements),
        vessels=tuple(vessels),
        voxel_labels=labels,
        label_names=names,
        layer_ids=layer_ids,
        slice_layer=slice_layer,
        counts=dict(counts or {}),
    )


def generate_scenario(
    grid: GridConfig, catalog: Catalog, *, attempts_per_cell: int = ATTEMPTS_PER_CELL
) -> ScenarioRealization:
    """Full phantom: cells layer by layer, then vessels, then blood cells, then voxels.

    Within a layer species are placed densest first. Every (layer, species)
    pair draws from its own stream, so the same seed always yields the same
    realization.
    """
    X, Y, Z = grid.extent
    placements: List[CellPlacement] = []
    counts: Dict[str, SpeciesCount] = {}
    for layer in catalog.layers.values():
        members = [sp for sp in catalog.cells.values() if catalog.layer_of(sp) is layer]
        members.sort(key=lambda sp: -sp.number_density)
        for sp in members:
            z0, z1 = sp.depth_interval
            z1 = min(z1, Z)
            if z1 <= z0:
                counts[sp.id] = SpeciesCount(0, 0, 0.0)
                continue
            vol = Box((0.0, 0.0, z0), (X, Y, z1))
            rng = stream(grid.seed, "cells", layer.id, sp.id)
            new = place_cells_disc_poisson(vol, sp, placements, rng, attempts_per_cell=attempts_per_cell)
            counts[sp.id] = SpeciesCount(int(round(sp.number_density * vol.volume)), len(new), vol.volume)
            placements.extend(new)

    vessels: List[VesselSegment] = []
    for layer in catalog.layers.values():
        if layer.depth_interval[0] >= Z:
            continue
        vessels.extend(place_vessels_line_poisson(layer, grid, stream(grid.seed, "vessels", layer.id)))

    for sp in catalog.cells.values():
        if not sp.vessel_bound:
            continue
        rng = stream(grid.seed, "vessel_cells", sp.id)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            new = fill_vessels_with_rbc(vessels, sp, rng, placements, attempts_per_cell=attempts_per_cell)
        lumen = sum(v.lumen_volume for v in vessels if v.radius >= sp.radius)
        counts[sp.id] = SpeciesCount(int(round(sp.number_density * lumen)), len(new), lumen)
        placements.extend(new)

    return rasterize(placements, vessels, grid, catalog, counts)


# -- verification --------------------------------------------------------------


def find_overlaps(placements: Sequence[CellPlacement], rel_tol: float = 1e-12) -> List[Tuple[int, int]]:
    """All overlapping sphere pairs by brute-force pairwise scan."""
    if len(placements) < 2:
        return []
    c, r = _as_arrays(placements)
    bad = []
    for i in range(len(c) - 1):
        d = np.sqrt(((c[i + 1 :] - c[i]) ** 2).sum(axis=1))
        lim = (r[i + 1 :] + r[i]) * (1.0 - rel_tol)
        for j in np.flatnonzero(d < lim):
            bad.append((i, i + 1 + int(j)))
    return bad


def verify_realization(real: ScenarioRealization, catalog: Catalog) -> List[str]:
    """Geometric invariants of a realization; returns human-readable violations."""
    problems = [
        f"overlap: {real.placements[i].species}#{i} and {real.placements[j].species}#{j}"
        for i, j in find_overlaps(real.placements)
    ]
    for k, pl in enumerate(real.placements):
        sp = catalog.cell_species(pl.species)
        if sp.depth_interval is not None:
            z0, z1 = sp.depth_interval
            if not z0 <= pl.center[2] <= z1:
                problems.append(f"depth: {pl.species}#{k} center z={pl.center[2]:.6g} outside [{z0:g}, {z1:g}]")
        else:
            inside = False
            for v in real.vessels:
                rel = np.subtract(pl.center, v.center)
                t = float(rel @ np.asarray(v.axis))
                radial = math.sqrt(max(float(rel @ rel) - t * t, 0.0))
                if abs(t) <= v.half_length + 1e-12 and radial <= v.radius + 1e-12:
                    inside = True
                    break
            if not inside:
                problems.append(f"lumen: {pl.species}#{k} center outside every vessel")
    total = sum(real.label_counts().values())
    if total != real.voxel_labels.size:
        problems.append(f"labels: counts sum to {total}, grid has {real.voxel_labels.size} voxels")
    return problems
