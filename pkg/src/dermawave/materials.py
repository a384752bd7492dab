"""Parameter catalog: Debye components, cell species and skin layers.

The catalog is read from a small TOML document (``schema_version = 1``) with
``[component.<id>]``, ``[cell.<id>]`` and ``[layer.<id>]`` sections. File units
are the ones used in the literature tables (ps, um, per mm^3, per mm^2); the
in-memory objects are SI.
"""
from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .dielectrics import BRANCH_LABELS, DebyeBranch, DebyeParameters, MixtureComposition
from .errors import CatalogError, CatalogReadError, CatalogValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1

# divide by these to convert file units to SI (exact for short decimals)
PER_UM = 1e6
PER_PS = 1e12
PER_MM3 = 1e9  # 1/mm^3 -> 1/m^3
PER_MM2 = 1e6  # 1/mm^2 -> 1/m^2

COMPONENT_KEYS = (
    "eps_inf",
    "delta_eps_alpha",
    "delta_eps_beta",
    "delta_eps_gamma",
    "tau_alpha_ps",
    "tau_beta_ps",
    "tau_gamma_ps",
)
FRACTION_KEYS = ("water_frac", "protein_frac", "lipid_frac")
CELL_KEYS = FRACTION_KEYS + ("diameter_um", "density_per_mm3", "z_min_um", "z_max_um")
LAYER_KEYS = FRACTION_KEYS + (
    "z_min_um",
    "z_max_um",
    "vessel_radius_um",
    "vessel_density_per_mm2",
    "vessel_class",
    "vessel_depth_fraction",
)
VESSEL_CLASSES = ("capillary", "deep")
LUMEN = "vessel_lumen"


@dataclass(frozen=True)
class ComponentRecord:
    id: str
    params: DebyeParameters
    source_range: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    note: str = ""


@dataclass(frozen=True)
class CellSpecies:
    id: str
    composition: MixtureComposition
    diameter: float  # m
    number_density: float  # 1/m^3
    depth_interval: Optional[Tuple[float, float]]  # m; None for vessel-bound cells
    shape: str = "sphere"
    note: str = ""

    @property
    def radius(self) -> float:
        return self.diameter / 2.0

    @property
    def vessel_bound(self) -> bool:
        return self.depth_interval is None


@dataclass(frozen=True)
class VesselPolicy:
    density: float  # vessels per m^2 of layer area
    radius: float  # m
    vessel_class: str = "capillary"
    depth_fraction: float = 1.0  # centers confined to the top fraction of the layer
    orientation: str = "horizontal"


@dataclass(frozen=True)
class LayerSpec:
    id: str
    depth_interval: Tuple[float, float]
    ecm_composition: MixtureComposition
    vessel_policy: VesselPolicy
    note: str = ""

    @property
    def thickness(self) -> float:
        return self.depth_interval[1] - self.depth_interval[0]

    @property
    def ecm_label(self) -> str:
        return f"ecm_{self.id}"


@dataclass(frozen=True)
class Catalog:
    components: Dict[str, ComponentRecord]
    cells: Dict[str, CellSpecies]
    layers: Dict[str, LayerSpec]

    def component_params(self, id: str) -> DebyeParameters:
        try:
            return self.components[id].params
        except KeyError:
            raise CatalogError(f"unknown component {id!r}") from None

    def cell_species(self, id: str) -> CellSpecies:
        try:
            return self.cells[id]
        except KeyError:
            raise CatalogError(f"unknown cell type {id!r}") from None

    def layer(self, id: str) -> LayerSpec:
        try:
            return self.layers[id]
        except KeyError:
            raise CatalogError(f"unknown layer {id!r}") from None

    def ecm_composition(self, layer_id: str) -> MixtureComposition:
        return self.layer(layer_id).ecm_composition

    def layer_of(self, species: CellSpecies) -> Optional[LayerSpec]:
        """Layer containing the species' depth interval (None for vessel-bound cells)."""
        if species.depth_interval is None:
            return None
        lo, hi = species.depth_interval
        for layer in self.layers.values():
            a, b = layer.depth_interval
            if a <= lo and hi <= b:
                return layer
        return None

    def layer_at(self, z: float) -> LayerSpec:
        """Layer whose interval holds depth ``z``; depths past the last layer map to it."""
        layers = list(self.layers.values())
        for layer in layers:
            if z < layer.depth_interval[1]:
                return layer
        return layers[-1]

    def material_composition(self, material_id: str) -> MixtureComposition:
        """Composition for a voxel material label, cell id, layer id or ``ecm_<layer>``."""
        if material_id in self.cells:
            return self.cells[material_id].composition
        if material_id == LUMEN or material_id == "water":
            return MixtureComposition()
        if material_id.startswith("ecm_") and material_id[4:] in self.layers:
            return self.layers[material_id[4:]].ecm_composition
        if material_id in self.layers:
            return self.layers[material_id].ecm_composition
        raise CatalogError(f"unknown material {material_id!r}")

    def sha256(self) -> str:
        return hashlib.sha256(dump_catalog(self).encode()).hexdigest()


def component_params(catalog: Catalog, id: str) -> DebyeParameters:
    return catalog.component_params(id)


def cell_species(catalog: Catalog, id: str) -> CellSpecies:
    return catalog.cell_species(id)


def ecm_composition(catalog: Catalog, layer_id: str) -> MixtureComposition:
    return catalog.ecm_composition(layer_id)


# -- parsing -----------------------------------------------------------------


def _number(section: dict, key: str, where: str, issues: List[str], required=True):
    if key not in section:
        if required:
            issues.append(f"{where}.{key}: missing")
        return None
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        issues.append(f"{where}.{key}: expected a finite number, got {v!r}")
        return None
    return float(v)


def _check_keys(section: dict, allowed, where: str, issues: List[str]):
    for key in section:
        if key == "note":
            continue
        base = key[: -len("_range")] if key.endswith("_range") else key
        if base not in allowed:
            issues.append(f"{where}.{key}: unknown key")


def _ranges(section: dict, where: str, issues: List[str]) -> Dict[str, Tuple[float, float]]:
    out = {}
    for key, v in section.items():
        if not key.endswith("_range"):
            continue
        base = key[: -len("_range")]
        if (
            not isinstance(v, list)
            or len(v) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
            or v[0] > v[1]
        ):
            issues.append(f"{where}.{key}: expected [min, max] with min <= max")
            continue
        lo, hi = float(v[0]), float(v[1])
        out[base] = (lo, hi)
        val = section.get(base)
        if isinstance(val, (int, float)) and not (lo <= val <= hi):
            issues.append(f"{where}.{base}: value {val} outside source range [{lo}, {hi}]")
    return out


def _parse_component(cid: str, sec: dict, issues: List[str]) -> Optional[ComponentRecord]:
    where = f"{cid}"
    _check_keys(sec, COMPONENT_KEYS, where, issues)
    n_before = len(issues)
    eps_inf = _number(sec, "eps_inf", where, issues)
    if eps_inf is not None and eps_inf < 1:
        issues.append(f"{where}.eps_inf: must be >= 1, got {eps_inf}")
    branches = {}
    for label in BRANCH_LABELS:
        dkey, tkey = f"delta_eps_{label}", f"tau_{label}_ps"
        delta = _number(sec, dkey, where, issues, required=False)
        tau = _number(sec, tkey, where, issues, required=False)
        if delta is not None and delta < 0:
            issues.append(f"{where}.{dkey}: must be >= 0, got {delta}")
        if tau is not None and tau <= 0:
            issues.append(f"{where}.{tkey}: must be > 0, got {tau}")
        if tau is None and delta:
            issues.append(f"{where}.{tkey}: missing for non-zero {dkey}")
        if tau is not None and delta is None:
            issues.append(f"{where}.{dkey}: missing for given {tkey}")
        if tau is not None and tau > 0 and delta is not None and delta >= 0:
            branches[label] = DebyeBranch(delta, tau / PER_PS)
    ranges = _ranges(sec, where, issues)
    if len(issues) > n_before:
        return None
    return ComponentRecord(
        cid, DebyeParameters(eps_inf, **branches), ranges, str(sec.get("note", ""))
    )


def _parse_fractions(sec: dict, where: str, issues: List[str]) -> Optional[MixtureComposition]:
    fr = {k: _number(sec, k, where, issues) for k in FRACTION_KEYS}
    if any(v is None for v in fr.values()):
        return None
    bad = False
    for k, v in fr.items():
        if not 0 <= v <= 1:
            issues.append(f"{where}.{k}: must lie in [0, 1], got {v}")
            bad = True
    total = math.fsum(fr.values())
    if abs(total - 1.0) > 1e-9:
        issues.append(f"{where}: water_frac + protein_frac + lipid_frac = {total!r}, must be 1")
        bad = True
    if not bad and fr["protein_frac"] + fr["lipid_frac"] >= 1:
        issues.append(f"{where}.water_frac: host share must be positive")
        bad = True
    if bad:
        return None
    return MixtureComposition((("protein", fr["protein_frac"]), ("lipid", fr["lipid_frac"])))


def _parse_cell(cid: str, sec: dict, issues: List[str]) -> Optional[CellSpecies]:
    where = f"{cid}"
    _check_keys(sec, CELL_KEYS, where, issues)
    n_before = len(issues)
    comp = _parse_fractions(sec, where, issues)
    d = _number(sec, "diameter_um", where, issues)
    rho = _number(sec, "density_per_mm3", where, issues)
    if d is not None and d <= 0:
        issues.append(f"{where}.diameter_um: must be > 0, got {d}")
    if rho is not None and rho < 0:
        issues.append(f"{where}.density_per_mm3: must be >= 0, got {rho}")
    has_z = "z_min_um" in sec or "z_max_um" in sec
    interval = None
    if has_z:
        z0 = _number(sec, "z_min_um", where, issues)
        z1 = _number(sec, "z_max_um", where, issues)
        if z0 is not None and z1 is not None:
            if not z0 < z1:
                issues.append(f"{where}.z_max_um: must exceed z_min_um ({z0} >= {z1})")
            elif z0 < 0:
                issues.append(f"{where}.z_min_um: must be >= 0, got {z0}")
            else:
                interval = (z0 / PER_UM, z1 / PER_UM)
    _ranges(sec, where, issues)
    if len(issues) > n_before:
        return None
    return CellSpecies(cid, comp, d / PER_UM, rho * PER_MM3, interval, note=str(sec.get("note", "")))


def _parse_layer(lid: str, sec: dict, issues: List[str]) -> Optional[LayerSpec]:
    where = f"{lid}"
    _check_keys(sec, LAYER_KEYS, where, issues)
    n_before = len(issues)
    comp = _parse_fractions(sec, where, issues)
    z0 = _number(sec, "z_min_um", where, issues)
    z1 = _number(sec, "z_max_um", where, issues)
    if z0 is not None and z1 is not None and not z0 < z1:
        issues.append(f"{where}.z_max_um: must exceed z_min_um ({z0} >= {z1})")
    radius = _number(sec, "vessel_radius_um", where, issues)
    density = _number(sec, "vessel_density_per_mm2", where, issues)
    if radius is not None and radius < 0:
        issues.append(f"{where}.vessel_radius_um: must be >= 0, got {radius}")
    if density is not None and density < 0:
        issues.append(f"{where}.vessel_density_per_mm2: must be >= 0, got {density}")
    if density and not radius:
        issues.append(f"{where}.vessel_radius_um: must be > 0 when vessel density is non-zero")
    vclass = sec.get("vessel_class", "capillary")
    if vclass not in VESSEL_CLASSES:
        issues.append(f"{where}.vessel_class: must be one of {VESSEL_CLASSES}, got {vclass!r}")
    frac = _number(sec, "vessel_depth_fraction", where, issues, required=False)
    frac = 1.0 if frac is None else frac
    if not 0 < frac <= 1:
        issues.append(f"{where}.vessel_depth_fraction: must lie in (0, 1], got {frac}")
    _ranges(sec, where, issues)
    if len(issues) > n_before:
        return None
    policy = VesselPolicy(density * PER_MM2, radius / PER_UM, vclass, frac)
    return LayerSpec(lid, (z0 / PER_UM, z1 / PER_UM), comp, policy, str(sec.get("note", "")))


def loads_catalog(text: str, source: str = "<string>") -> Catalog:
    """Parse and validate catalog text. Every invariant violation is reported at once."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise CatalogValidationError([f"{source}: parse error: {exc}"]) from None

    issues: List[str] = []
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        issues.append(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    for key in doc:
        if key not in ("schema_version", "component", "cell", "layer"):
            issues.append(f"{key}: unknown top-level entry")

    def sections(name):
        sec = doc.get(name, {})
        if not isinstance(sec, dict) or not all(isinstance(v, dict) for v in sec.values()):
            issues.append(f"{name}: expected [{name}.<id>] tables")
            return {}
        return sec

    components = {}
    for cid, sec in sections("component").items():
        rec = _parse_component(cid, sec, issues)
        if rec is not None:
            components[cid] = rec
    for required in ("water", "protein", "lipid"):
        if required not in doc.get("component", {}):
            issues.append(f"component.{required}: missing")

    cells = {}
    for cid, sec in sections("cell").items():
        sp = _parse_cell(cid, sec, issues)
        if sp is not None:
            cells[cid] = sp

    layers = {}
    for lid, sec in sections("layer").items():
        ly = _parse_layer(lid, sec, issues)
        if ly is not None:
            layers[lid] = ly
    if not doc.get("layer"):
        issues.append("layer: at least one [layer.<id>] section is required")

    # layers must tile [0, Z] in file order
    expected = 0.0
    for ly in layers.values():
        if not math.isclose(ly.depth_interval[0], expected, rel_tol=0, abs_tol=1e-12):
            issues.append(
                f"{ly.id}.z_min_um: layers must tile depth without gaps or overlap "
                f"(expected {expected * PER_UM:g}, got {ly.depth_interval[0] * PER_UM:g})"
            )
        expected = ly.depth_interval[1]

    catalog = Catalog(components, cells, layers)
    for sp in cells.values():
        if sp.depth_interval is not None and layers and catalog.layer_of(sp) is None:
            issues.append(f"{sp.id}.z_min_um: depth interval does not fit inside a single layer")

    if issues:
        raise CatalogValidationError([f"{source}: {msg}" if source != "<string>" else msg for msg in issues])
    return catalog


def load_catalog(path=None, *, builtin: bool = False) -> Catalog:
    """Load a catalog file, or the packaged defaults when ``builtin`` is set or ``path`` is None."""
    if builtin or path is None:
        return builtin_catalog()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise CatalogReadError(f"cannot read catalog {p}: {exc.strerror}") from exc
    return loads_catalog(text, source=str(p))


def builtin_text() -> str:
    return resources.files("dermawave").joinpath("data/catalog.toml").read_text(encoding="utf-8")


_BUILTIN: Optional[Catalog] = None


def builtin_catalog() -> Catalog:
    global _BUILTIN
    if _BUILTIN is None:
        _BUILTIN = loads_catalog(builtin_text(), source="builtin")
    return _BUILTIN


# -- serialization -----------------------------------------------------------


def _fmt(x: float) -> str:
    # repr round-trips exactly; trim float noise from unit conversions
    return repr(float(f"{x:.15g}"))


def _note(lines, note):
    if note:
        escaped = note.replace("\\", "\\\\").replace('"', '\\"')
        lines.append(f'note = "{escaped}"')


def dump_catalog(catalog: Catalog) -> str:
    lines = [
        "# Skin tissue dielectric catalog (dermawave). Units: ps, um, per mm^3, per mm^2.",
        f"schema_version = {SCHEMA_VERSION}",
    ]
    for rec in catalog.components.values():
        lines += ["", f"[component.{rec.id}]"]
        _note(lines, rec.note)
        p = rec.params
        lines.append(f"eps_inf = {_fmt(p.eps_inf)}")
        for label in BRANCH_LABELS:
            b = p.branch(label)
            if b is not None:
                lines.append(f"delta_eps_{label} = {_fmt(b.delta_eps)}")
        for label in BRANCH_LABELS:
            b = p.branch(label)
            if b is not None:
                lines.append(f"tau_{label}_ps = {_fmt(b.tau * PER_PS)}")
        for key, (lo, hi) in rec.source_range.items():
            lines.append(f"{key}_range = [{_fmt(lo)}, {_fmt(hi)}]")

    def fractions(comp: MixtureComposition):
        p, l = comp.fraction("protein"), comp.fraction("lipid")
        return [
            f"water_frac = {_fmt(round(1.0 - p - l, 12))}",
            f"protein_frac = {_fmt(p)}",
            f"lipid_frac = {_fmt(l)}",
        ]

    for sp in catalog.cells.values():
        lines += ["", f"[cell.{sp.id}]"]
        _note(lines, sp.note)
        lines += fractions(sp.composition)
        lines.append(f"diameter_um = {_fmt(sp.diameter * PER_UM)}")
        lines.append(f"density_per_mm3 = {_fmt(sp.number_density / PER_MM3)}")
        if sp.depth_interval is not None:
            lines.append(f"z_min_um = {_fmt(sp.depth_interval[0] * PER_UM)}")
            lines.append(f"z_max_um = {_fmt(sp.depth_interval[1] * PER_UM)}")

    for ly in catalog.layers.values():
        lines += ["", f"[layer.{ly.id}]"]
        _note(lines, ly.note)
        lines.append(f"z_min_um = {_fmt(ly.depth_interval[0] * PER_UM)}")
        lines.append(f"z_max_um = {_fmt(ly.depth_interval[1] * PER_UM)}")
        lines += fractions(ly.ecm_composition)
        vp = ly.vessel_policy
        lines.append(f"vessel_radius_um = {_fmt(vp.radius * PER_UM)}")
        lines.append(f"vessel_density_per_mm2 = {_fmt(vp.density / PER_MM2)}")
        lines.append(f'vessel_class = "{vp.vessel_class}"')
        lines.append(f"vessel_depth_fraction = {_fmt(vp.depth_fraction)}")
    return "\n".join(lines) + "\n"
