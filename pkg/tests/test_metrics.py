import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from adiaxxz.dynamics import EvolutionTrace, IntegrationSettings, propagate
from adiaxxz.metrics import (
    DegenerateBenchmarkError,
    adiabatic_fidelity,
    normalized_energy_distance,
    summarize,
)
from adiaxxz.model import InitialField, ProtocolSpec, XXZParams, standard_spec

energies = st.floats(-50, 50, allow_nan=False)


def fake_trace(times, fid):
    zeros = np.zeros_like(times)
    return EvolutionTrace(times, zeros, fid, zeros, np.zeros(2), np.zeros(2), 0.0)


def test_energy_distance_examples():
    assert normalized_energy_distance(-8, -8, -14.6) == 0.0
    assert normalized_energy_distance(-8, -14.6, -14.6) == 1.0
    assert normalized_energy_distance(0, -1, -4) == pytest.approx(0.25)
    with pytest.raises(DegenerateBenchmarkError):
        normalized_energy_distance(-3, -3, -3)
    with pytest.raises(DegenerateBenchmarkError):
        normalized_energy_distance(-4, -3, -3)


@settings(max_examples=100)
@given(energies, energies, energies, st.floats(-100, 100), st.floats(0.1, 10))
def test_energy_distance_affine_invariance(ei, ef, eg, shift, scale):
    assume(ei - eg > 1e-3)
    base = normalized_energy_distance(ei, ef, eg)
    moved = normalized_energy_distance(scale * ei + shift, scale * ef + shift, scale * eg + shift)
    assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)


def test_fidelity_quadrature_examples():
    t = np.linspace(0, 2, 5)
    assert adiabatic_fidelity(fake_trace(t, np.ones(5))) == pytest.approx(1.0)
    assert adiabatic_fidelity(fake_trace(t, t / 2)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        adiabatic_fidelity(fake_trace(np.zeros(1), np.ones(1)))


def test_fidelity_quadrature_converges_under_doubling():
    def f(t):
        return np.cos(t) ** 2

    exact = 0.5 + np.sin(2 * 3.0) / (4 * 3.0)
    errs = []
    for m in (101, 201):
        t = np.linspace(0, 3, m)
        errs.append(abs(adiabatic_fidelity(fake_trace(t, f(t))) - exact))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)


@pytest.mark.parametrize("delta,T", [(0.5, 1.0), (1.5, 3.0)])
def test_run_metrics_bounded(delta, T):
    spec = standard_spec(8, delta, T)
    trace = propagate(spec, settings=IntegrationSettings(dt=1e-3, sample_count=101))
    s = summarize(trace, spec, "sa")
    assert 0.0 <= s.f_ad <= 1.0
    # all spins along +x: each bond contributes <XX> = 1, <YY> = <ZZ> = 0
    assert s.e_initial == pytest.approx(8.0, abs=1e-10)
    assert 0.0 <= s.final_fidelity <= 1.0


def test_gapped_slow_run_reaches_ground():
    spec = ProtocolSpec(XXZParams(4, 0.5), InitialField.neel(4, "Z"), 50.0)
    trace = propagate(spec, settings=IntegrationSettings(dt=5e-3, sample_count=201))
    s = summarize(trace, spec)
    assert s.n_metric > 0.999
    assert s.f_ad > 0.99
