import pytest

from dermawave.errors import CatalogError, CatalogReadError, CatalogValidationError
from dermawave.materials import (
    LUMEN,
    builtin_text,
    cell_species,
    component_params,
    dump_catalog,
    ecm_composition,
    load_catalog,
    loads_catalog,
)


def test_builtin_contents(catalog):
    assert set(catalog.components) == {"water", "protein", "lipid"}
    assert set(catalog.layers) == {"epidermis", "dermis", "hypodermis"}
    assert len(catalog.cells) == 10


def test_water_parameters(catalog):
    w = component_params(catalog, "water")
    assert w.eps_inf == 1.8
    assert w.alpha.delta_eps == 78.0
    assert w.alpha.tau == pytest.approx(8.3e-12, rel=1e-15)


def test_fibroblast_record(catalog):
    fb = cell_species(catalog, "fibroblasts")
    assert fb.diameter == pytest.approx(2e-5)
    assert fb.number_density == pytest.approx(5e13)
    assert fb.composition.fraction("protein") == pytest.approx(0.175)
    assert fb.composition.fraction("water") == pytest.approx(0.8)


def test_rbc_is_vessel_bound(catalog):
    rbc = catalog.cell_species("red_blood_cells")
    assert rbc.vessel_bound and rbc.depth_interval is None
    assert catalog.layer_of(rbc) is None


def test_fractions_sum_to_one(catalog):
    for sp in catalog.cells.values():
        c = sp.composition
        assert sum(c.fraction(k) for k in ("water", "protein", "lipid")) == pytest.approx(1.0, abs=1e-12)
    for lid in catalog.layers:
        c = ecm_composition(catalog, lid)
        assert sum(c.fraction(k) for k in ("water", "protein", "lipid")) == pytest.approx(1.0, abs=1e-12)


def test_dermis_ecm_residual_water(catalog):
    assert catalog.ecm_composition("dermis").fraction("water") == pytest.approx(0.73)


def test_layers_tile_depth(catalog):
    bounds = [catalog.layers[k].depth_interval for k in ("epidermis", "dermis", "hypodermis")]
    assert bounds[0][0] == 0
    assert bounds[0][1] == bounds[1][0] and bounds[1][1] == bounds[2][0]
    assert bounds[2][1] == pytest.approx(5e-3)


def test_each_tissue_cell_fits_one_layer(catalog):
    for sp in catalog.cells.values():
        if not sp.vessel_bound:
            layer = catalog.layer_of(sp)
            z0, z1 = sp.depth_interval
            assert layer.depth_interval[0] <= z0 and z1 <= layer.depth_interval[1]


def test_layer_at(catalog):
    assert catalog.layer_at(0.0).id == "epidermis"
    assert catalog.layer_at(1e-3).id == "dermis"
    assert catalog.layer_at(4e-3).id == "hypodermis"


def test_material_composition_aliases(catalog):
    assert catalog.material_composition(LUMEN).host_fraction == 1.0
    assert catalog.material_composition("ecm_dermis") == catalog.ecm_composition("dermis")
    assert catalog.material_composition("dermis") == catalog.ecm_composition("dermis")


@pytest.mark.parametrize(
    "call", [lambda c: c.component_params("blood"), lambda c: c.cell_species("neuron"), lambda c: c.layer("muscle")]
)
def test_unknown_ids(catalog, call):
    with pytest.raises(CatalogError) as info:
        call(catalog)
    assert isinstance(info.value, KeyError)


def test_round_trip(catalog):
    text = dump_catalog(catalog)
    again = loads_catalog(text)
    assert again == catalog
    assert dump_catalog(again) == text


def test_file_round_trip(tmp_path, catalog):
    p = tmp_path / "cat.toml"
    p.write_text(dump_catalog(catalog))
    assert load_catalog(p) == catalog
    assert load_catalog(p).sha256() == catalog.sha256()


def test_missing_file(tmp_path):
    with pytest.raises(CatalogReadError):
        load_catalog(tmp_path / "absent.toml")


def test_validation_collects_every_issue():
    text = builtin_text()
    text = text.replace("schema_version = 1", "schema_version = 2")
    text = text.replace("tau_alpha_ps = 50.5", "tau_alpha_ps = -1")
    text = text.replace("water_frac = 0.73", "water_frac = 0.5")
    with pytest.raises(CatalogValidationError) as info:
        loads_catalog(text)
    issues = info.value.issues
    assert any(i.startswith("schema_version") for i in issues)
    assert any(i.startswith("protein.tau_alpha_ps") for i in issues)
    assert any("dermis" in i for i in issues)


def test_malformed_toml():
    with pytest.raises(CatalogValidationError):
        loads_catalog("schema_version = [")


def test_layer_gap_rejected():
    head, tail = builtin_text().split("[layer.hypodermis]")
    text = head + "[layer.hypodermis]" + tail.replace("z_min_um = 3000.0", "z_min_um = 3100.0")
    with pytest.raises(CatalogValidationError) as info:
        loads_catalog(text)
    assert any(i.startswith("hypodermis.z_min_um") for i in info.value.issues)
