import numpy as np
import pytest

from monodomain.ionic import DEFAULT_STIMULUS, available_models, load_model
from monodomain.ionic.aliev_panfilov import A, K, TIME_SCALE, V_SCALE
from monodomain.ionic.single_cell import (DivergenceError, estimate_dt0, export_trace_csv, integrate,
                                          pace_to_steady_state, rates)
from monodomain.ionic.state import NodeStateArray

SHIPPED = ["aliev_panfilov", "maccannell_fibroblast", "ohara_rudy_epi", "ohara_rudy_endo", "inert"]


@pytest.mark.parametrize("name", available_models())
def test_rest_is_quasi_equilibrium(name):
    m = load_model(name)
    dv, _ = rates(m, m.rest_v, m.rest_state)
    assert abs(dv) <= m.rest_tolerance


@pytest.mark.parametrize("name", available_models())
def test_rates_are_pure_and_stimulus_additive(name):
    m = load_model(name)
    v = m.rest_v + 10.0
    dv0, ds0 = rates(m, v, m.rest_state)
    dv1, ds1 = rates(m, v, m.rest_state, 37.5)
    again, ds_again = rates(m, v, m.rest_state)
    assert dv1 - dv0 == pytest.approx(37.5, abs=1e-12)
    # ORd carries the stimulus as a K+ flux; every other state ignores it
    carrier = [m.state_names.index("ki")] if "ki" in m.state_names else []
    others = np.setdiff1d(np.arange(m.n_states), carrier)
    np.testing.assert_array_equal(ds1[others], ds0[others])
    assert again == dv0 and np.array_equal(ds_again, ds0)


def test_two_variable_closed_form(ap_model):
    assert rates(ap_model, -80.0, np.zeros(1)) == (0.0, pytest.approx([0.0]))
    u = 0.8  # V = 0 mV
    dv, ds = rates(ap_model, 0.0, np.zeros(1))
    assert dv == pytest.approx(V_SCALE * (-K * u * (u - A) * (u - 1.0)) / TIME_SCALE, rel=1e-14)
    assert ds[0] == pytest.approx(0.002 * (-K * u * (u - A - 1.0)) / TIME_SCALE, rel=1e-14)


@pytest.mark.parametrize("name", SHIPPED)
def test_resting_stability(name):
    m = load_model(name)
    v, s, _, failed = integrate(m, m.rest_v, m.rest_state, m.dt0 / 2, 1000.0)
    assert failed < 0
    assert abs(v - m.rest_v) < 1.0


@pytest.mark.parametrize("name", ["aliev_panfilov", "ohara_rudy_epi"])
def test_single_beat_returns_near_rest(name):
    m = load_model(name)
    st = DEFAULT_STIMULUS[name]
    r = pace_to_steady_state(m, 1000.0, 1, st.amplitude, st.duration)
    assert np.all(np.isfinite(r.state))
    assert abs(r.v - m.rest_v) < 5.0
    assert r.apd90[-1] > 100.0


def test_zero_stimulus_is_free_relaxation(ord_epi):
    r = pace_to_steady_state(ord_epi, 500.0, 2, 0.0, 1.0)
    v, s, _, _ = integrate(ord_epi, ord_epi.rest_v, ord_epi.rest_state, ord_epi.dt0 / 2, 500.0)
    v, s, _, _ = integrate(ord_epi, v, s, ord_epi.dt0 / 2, 500.0)
    assert r.v == v
    np.testing.assert_array_equal(r.state, s)


@pytest.mark.slow
def test_stiff_model_pacing_converges(ord_epi):
    st = DEFAULT_STIMULUS["ohara_rudy_epi"]
    r = pace_to_steady_state(ord_epi, 1000.0, 100, st.amplitude, st.duration, apd_every=50)
    assert r.apd_change < 0.5


def test_pacing_divergence_reports_beat(ap_model):
    with pytest.raises(DivergenceError, match="beat 0"):
        pace_to_steady_state(ap_model, 100.0, 3, 50.0, 1.0, dt=5.0)
    with pytest.raises(ValueError):
        pace_to_steady_state(ap_model, 100.0, 0)


def test_dt0_estimates(ap_model, ord_epi):
    st = DEFAULT_STIMULUS["ohara_rudy_epi"]
    stiff = estimate_dt0(ord_epi, st)
    assert 0.005 <= stiff <= 0.1
    v, s, _, failed = integrate(ord_epi, ord_epi.rest_v, ord_epi.rest_state, stiff / 2, 1000.0, st)
    assert failed < 0
    assert estimate_dt0(ap_model, DEFAULT_STIMULUS["aliev_panfilov"]) > 10 * stiff


def test_shipped_dt0_is_stable_for_a_beat(ord_epi):
    st = DEFAULT_STIMULUS["ohara_rudy_epi"]
    _, _, _, failed = integrate(ord_epi, ord_epi.rest_v, ord_epi.rest_state, ord_epi.dt0, 1000.0, st)
    assert failed < 0


def test_unknown_model():
    with pytest.raises(KeyError, match="registered"):
        load_model("hodgkin_huxley")


def test_state_array_round_trip(tmp_path, ap_model, ord_epi):
    tags = np.array(["a", "b", "a", "b", "b"], dtype=object)
    st = NodeStateArray.at_rest({"a": ap_model, "b": ord_epi}, tags)
    st.V += np.arange(5)
    st.last_dvdt[:] = [0.5, -1, 2, 0, 3]
    st.groups[1].S[0, 3] = 1.2345678901234567
    st.t = 12.5
    st.save(tmp_path / "state.npz")
    back = NodeStateArray.load(tmp_path / "state.npz", {m.name: m for m in (ap_model, ord_epi)})
    assert np.array_equal(back.V, st.V) and np.array_equal(back.last_dvdt, st.last_dvdt)
    assert back.t == st.t
    for g, h in zip(st.groups, back.groups):
        assert g.model.name == h.model.name
        assert np.array_equal(g.nodes, h.nodes) and np.array_equal(g.S, h.S)


def test_state_array_missing_model(ap_model):
    with pytest.raises(KeyError, match="no cell model"):
        NodeStateArray.at_rest({"a": ap_model}, np.array(["a", "z"]))


def test_trace_export(tmp_path, ap_model):
    path = tmp_path / "beat.csv"
    export_trace_csv(ap_model, path, 400.0, stim=DEFAULT_STIMULUS["aliev_panfilov"], states=("w",))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape[1] == 3
    assert data[:, 1].max() > 0.0 and data[0, 1] == ap_model.rest_v
