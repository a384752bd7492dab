import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dermawave.dielectrics import RefractiveIndex
from dermawave.errors import DomainError
from dermawave.losses import (
    C0,
    SERIES_SWITCH,
    LossBreakdown,
    LossTerm,
    PropagationConfig,
    ScattererPopulation,
    absorption_coefficient,
    absorption_efficiency,
    extinction_efficiency,
    path_loss,
    rayleigh_efficiency,
    spreading_db,
    spreading_loss,
    total_loss,
)


def test_extinction_matches_oracle(golden_losses):
    for p, q in golden_losses["q_ext"].items():
        assert extinction_efficiency(float(p)) == pytest.approx(q, rel=1e-9), p


def test_absorption_efficiency_matches_oracle(golden_losses):
    for b, q in golden_losses["q_abs"].items():
        assert absorption_efficiency(float(b)) == pytest.approx(q, rel=1e-9), b


def test_rayleigh_matches_oracle(golden_losses):
    for case in golden_losses["rayleigh"]:
        n = RefractiveIndex(float(case["n_real"]), float(case["n_imag"]))
        assert rayleigh_efficiency(float(case["psi"]), n) == pytest.approx(case["q"], rel=1e-9)


def test_spreading_matches_oracle(golden_losses):
    for c in golden_losses["spreading_db"]:
        cfg = PropagationConfig(float(c["f"]), float(c["d"]), float(c["D"]), RefractiveIndex(float(c["n_real"]), 0))
        assert spreading_db(cfg) == pytest.approx(c["db"], rel=1e-9)
        assert -10 * math.log10(spreading_loss(cfg)) == pytest.approx(c["db"], rel=1e-9)


def test_absorption_coefficient_matches_oracle(golden_losses):
    for c in golden_losses["mu_abs"]:
        n = RefractiveIndex(float(c["n_real"]), float(c["n_imag"]))
        assert absorption_coefficient(n, float(c["f"])) == pytest.approx(c["mu"], rel=1e-9)


def test_extinction_limits():
    assert extinction_efficiency(0.0) == 0.0
    assert extinction_efficiency(1e-6) == pytest.approx(0.5e-12, rel=1e-9)
    assert abs(extinction_efficiency(1e6) - 2.0) < 1e-5
    assert extinction_efficiency(-2.0) == extinction_efficiency(2.0)


def test_efficiencies_continuous_at_series_switch():
    lo, hi = math.nextafter(SERIES_SWITCH, 0), SERIES_SWITCH
    assert extinction_efficiency(lo) == pytest.approx(extinction_efficiency(hi), rel=1e-14)
    assert absorption_efficiency(lo) == pytest.approx(absorption_efficiency(hi), rel=1e-14)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=0, max_value=1e4))
def test_absorption_efficiency_bounded(b):
    assert 0.0 <= absorption_efficiency(b) <= 1.0


def test_absorption_efficiency_rejects_negative():
    with pytest.raises(DomainError):
        absorption_efficiency(-0.1)


@pytest.mark.parametrize("psi", [1e-3, 0.05, 0.3])
def test_rayleigh_fourth_power(psi):
    n = RefractiveIndex(1.3, 0.05)
    ratio = rayleigh_efficiency(2 * psi, n) / rayleigh_efficiency(psi, n)
    assert ratio == pytest.approx(16.0, rel=1e-9)


def test_rayleigh_vanishes_without_contrast():
    assert rayleigh_efficiency(0.5, RefractiveIndex(1.0, 0.0)) == 0.0


def test_spreading_zero_distance_convention():
    cfg = PropagationConfig(1e11, 0.0)
    assert spreading_loss(cfg) == 1.0 and spreading_db(cfg) == 0.0


def test_spreading_directivity_gain():
    a = PropagationConfig(3e11, 2e-3, 1.0, RefractiveIndex(2.0, 0))
    b = PropagationConfig(3e11, 2e-3, 10.0, RefractiveIndex(2.0, 0))
    assert spreading_db(a) - spreading_db(b) == pytest.approx(10.0, rel=1e-12)


def test_guided_wavelength():
    cfg = PropagationConfig(1e12, 1e-3, medium_index=RefractiveIndex(2.0, 0.0))
    assert cfg.guided_wavelength == pytest.approx(C0 / 2e12)


@pytest.mark.parametrize("kw", [dict(frequency=0, distance=1), dict(frequency=1e11, distance=-1),
                                dict(frequency=1e11, distance=1, directivity=0.5)])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        PropagationConfig(**kw)


def test_population_regimes():
    medium = 2.0
    small = ScattererPopulation("rbc", 4e-6, 1e15, RefractiveIndex(1.1, 0.05), medium)
    large = ScattererPopulation("adipo", 50e-6, 1e12, RefractiveIndex(1.1, 0.05), medium)
    assert small.regime(1e11) == "small"
    assert large.regime(1e12) == "large"
    psi = large.size_parameter(1e12)
    q = extinction_efficiency(2 * 0.1 * psi) - absorption_efficiency(4 * psi * 0.05)
    assert large.efficiency(1e12) == pytest.approx(max(q, 0.0), rel=1e-12)
    assert large.coefficient(1e12) == pytest.approx(1e12 * large.efficiency(1e12) * math.pi * 50e-6**2)


def test_regime_boundary_is_size_parameter_one():
    medium = 1.5
    f = 1e12
    r = C0 / (f * medium) / (2 * math.pi)
    pop = ScattererPopulation("x", r * (1 + 1e-12), 1.0, RefractiveIndex(1.2, 0), medium)
    assert pop.regime(f) == "large"


@settings(max_examples=200, deadline=None)
@given(
    st.floats(min_value=1e11, max_value=1e12),
    st.floats(min_value=0, max_value=5e-3),
    st.floats(min_value=0, max_value=3e4),
    st.floats(min_value=0, max_value=10.0),
)
def test_factorization_identity(f, d, mu_a, mu_s):
    cfg = PropagationConfig(f, d, medium_index=RefractiveIndex(2.0, 0.0))
    b = path_loss(cfg, mu_a * d, mu_s * d)
    prod = b.spreading.factor * b.absorption.factor * b.scattering.factor
    assert b.total.factor == pytest.approx(prod, rel=1e-12, abs=0.0)
    assert abs(b.total.db - (b.spreading.db + b.absorption.db + b.scattering.db)) <= 1e-9


def test_total_loss_monotone_in_distance():
    pops = [ScattererPopulation("c", 10e-6, 5e13, RefractiveIndex(1.05, 0.02), 2.0)]
    prev = -1.0
    for k in range(1, 11):
        b = total_loss(PropagationConfig(1e12, k * 5e-4, medium_index=RefractiveIndex(2.0, 0)), 2e4, pops)
        assert b.total.db > prev
        prev = b.total.db


def test_loss_term_constructors():
    t = LossTerm.from_optical_depth(1.0)
    assert t.factor == pytest.approx(math.exp(-1)) and t.db == pytest.approx(10 / math.log(10))
    assert LossTerm.from_db(3.0).factor == pytest.approx(10 ** -0.3)
    b = LossBreakdown.combine(LossTerm.from_db(1), LossTerm.from_db(2), LossTerm.from_db(3))
    assert b.total.db == 6


def test_negative_optical_depth_rejected():
    with pytest.raises(DomainError):
        path_loss(PropagationConfig(1e11, 1e-3), -1.0, 0.0)
