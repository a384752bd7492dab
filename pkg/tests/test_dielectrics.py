import cmath
import math
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dermawave.dielectrics import (
    ComplexPermittivity,
    DebyeBranch,
    DebyeParameters,
    MixtureComposition,
    RefractiveIndex,
    debye_permittivity,
    maxwell_garnett,
    mixture_permittivity,
    refractive_index,
)
from dermawave.errors import CompositionError, DomainError, FrequencyRangeWarning, SingularityError

REL = 1e-9


def close(a, b, rel=REL):
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)


def _evaluate(catalog, group, name, f):
    if group == "components":
        return debye_permittivity(catalog.component_params(name), f)
    if group == "ecm":
        return mixture_permittivity(catalog.ecm_composition(name), f, catalog)
    return mixture_permittivity(catalog.cell_species(name).composition, f, catalog)


def _golden_cases():
    import json
    from pathlib import Path

    data = json.loads((Path(__file__).parent / "fixtures" / "golden_permittivity.json").read_text())
    return [(g, n, f) for g, names in data.items() for n, freqs in names.items() for f in freqs]


@pytest.mark.parametrize("group,name,freq", _golden_cases())
def test_matches_arbitrary_precision_oracle(catalog, golden_permittivity, group, name, freq):
    ref = golden_permittivity[group][name][freq]
    eps = _evaluate(catalog, group, name, float(freq))
    n = refractive_index(eps)
    assert close(eps.eps_real, ref["eps_real"])
    assert close(eps.eps_imag, ref["eps_imag"])
    assert close(n.n_real, ref["n_real"])
    assert close(n.n_imag, ref["n_imag"])


def test_water_at_100ghz_spot_values(catalog):
    eps = debye_permittivity(catalog.component_params("water"), 1e11)
    assert eps.eps_real == pytest.approx(4.566283, abs=1e-6)
    assert eps.eps_imag == pytest.approx(14.426287, abs=1e-6)


def test_debye_limits():
    p = DebyeParameters(2.0, alpha=DebyeBranch(30.0, 1e-11), beta=DebyeBranch(5.0, 1e-13))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FrequencyRangeWarning)
        low = debye_permittivity(p, 1e-3)
        high = debye_permittivity(p, 1e24)
    assert close(low.eps_real, 37.0)
    assert low.eps_imag < 1e-9
    assert close(high.eps_real, 2.0)
    assert high.eps_imag < 1e-9


def test_single_branch_loss_peak_at_corner_frequency():
    tau = 1e-12
    p = DebyeParameters(2.0, alpha=DebyeBranch(10.0, tau))
    f = 1.0 / (2 * math.pi * tau)
    eps = debye_permittivity(p, f)
    assert close(eps.eps_real, 7.0)
    assert close(eps.eps_imag, 5.0)


def test_absent_branch_contributes_nothing(catalog):
    lipid = catalog.component_params("lipid")
    assert lipid.alpha is None
    assert lipid.delta_eps("alpha") == 0.0
    assert len(lipid.branches) == 2


@pytest.mark.parametrize("bad", [0.0, -1e11, float("nan"), float("inf")])
def test_nonpositive_frequency_rejected(catalog, bad):
    with pytest.raises(DomainError):
        debye_permittivity(catalog.component_params("water"), bad)


def test_out_of_band_frequency_warns(catalog):
    with pytest.warns(FrequencyRangeWarning):
        debye_permittivity(catalog.component_params("water"), 5e12)


def test_branch_validation():
    with pytest.raises(DomainError):
        DebyeBranch(1.0, 0.0)
    with pytest.raises(DomainError):
        DebyeBranch(-1.0, 1e-12)
    with pytest.raises(DomainError):
        DebyeParameters(0.5)


def test_maxwell_garnett_identities():
    host = ComplexPermittivity(4.5, 14.0)
    inc = ComplexPermittivity(2.3, 0.4)
    assert maxwell_garnett(host, [(inc, 0.0)]) == host
    assert maxwell_garnett(host, []) == host
    same = maxwell_garnett(host, [(host, 0.4)])
    assert close(same.eps_real, host.eps_real) and close(same.eps_imag, host.eps_imag)


def test_maxwell_garnett_dilute_limit():
    # first order in phi: eps_h + 3 phi eps_h (e - h) / (e + 2h)
    h, e, phi = 3.0, 10.0, 1e-7
    out = maxwell_garnett(ComplexPermittivity(h, 0.0), [(ComplexPermittivity(e, 0.0), phi)])
    first = h + 3 * phi * h * (e - h) / (e + 2 * h)
    assert out.eps_real == pytest.approx(first, rel=1e-12)


def test_maxwell_garnett_errors():
    host = ComplexPermittivity(1.0, 0.0)
    with pytest.raises(CompositionError):
        maxwell_garnett(host, [(ComplexPermittivity(2.0, 0.0), 0.6), (ComplexPermittivity(3.0, 0.0), 0.5)])
    with pytest.raises(SingularityError):
        maxwell_garnett(host, [(ComplexPermittivity(-2.0, 0.0), 0.1)])
    with pytest.raises(CompositionError):
        MixtureComposition((("protein", 0.7), ("lipid", 0.4)))
    with pytest.raises(CompositionError):
        MixtureComposition((("protein", -0.1),))


def test_pure_host_mixture_equals_debye(catalog):
    eps = mixture_permittivity(MixtureComposition(), 3e11, catalog)
    assert eps == debye_permittivity(catalog.component_params("water"), 3e11)


def test_refractive_index_of_lossless_medium():
    n = refractive_index(ComplexPermittivity(4.0, 0.0))
    assert n == RefractiveIndex(2.0, 0.0)


finite = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(finite, st.floats(min_value=0, max_value=1e3))
def test_square_root_round_trip(er, ei):
    eps = ComplexPermittivity(er, ei)
    n = refractive_index(eps)
    assert n.n_real >= 0 and n.n_imag >= 0
    back = n.to_complex() ** 2
    assert cmath.isclose(back, eps.to_complex(), rel_tol=1e-12, abs_tol=1e-300)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e11, max_value=1e12), st.floats(min_value=0.0, max_value=0.45))
def test_mixture_losses_stay_nonnegative(catalog, f, phi):
    comp = MixtureComposition((("protein", phi), ("lipid", phi)))
    eps = mixture_permittivity(comp, f, catalog)
    assert eps.eps_imag >= 0
    assert eps.eps_real > 0


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e11, max_value=9.9e11))
def test_water_loss_decreases_above_relaxation(catalog, f):
    water = catalog.component_params("water")
    assert debye_permittivity(water, f * 1.01).eps_imag < debye_permittivity(water, f).eps_imag
