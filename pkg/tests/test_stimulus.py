import numpy as np
import pytest

from monodomain.fem import assemble, build_diffusion_field
from monodomain.mesh import RegionSelector, build_regular_sheet, nearest_node, select_nodes
from monodomain.splitting import SchemeConfig, propagates, run_simulation
from monodomain.stimulus import (Protocol, Stimulus, StimulusTable, diastolic_threshold, grouped_delays,
                                 stim_current, table_current)


def test_window_semantics():
    s1 = Stimulus([0, 1], 50.0, 1.0, 20.0, label="S1")
    p = Protocol((s1,))
    assert stim_current(p, 0, 49.99) == 0.0
    assert stim_current(p, 0, 50.0) == 20.0
    assert stim_current(p, 0, 50.5) == 20.0
    assert stim_current(p, 0, 51.0) == 0.0
    assert stim_current(p, 2, 50.5) == 0.0


def test_periodic_window():
    p = Protocol((Stimulus([3], 10.0, 2.0, 5.0, period=100.0),))
    assert stim_current(p, 3, 110.5) == 5.0
    assert stim_current(p, 3, 112.0) == 0.0
    assert stim_current(p, 3, 9.0) == 0.0
    assert stim_current(p, 3, 1010.0) == 5.0


def test_overlapping_stimuli_sum():
    p = Protocol((Stimulus([0], 0.0, 1.0, 2.0), Stimulus([0], 0.5, 1.0, 3.0)))
    assert stim_current(p, 0, 0.75) == 5.0


def test_invariants():
    with pytest.raises(ValueError):
        Stimulus([], 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Stimulus([0], 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Stimulus([0], 0.0, 1.0, float("nan"))


def test_integral_equals_amplitude_duration_count():
    p = Protocol((Stimulus([0, 1], 5.0, 1.0, 40.0, period=50.0),))
    dt = 0.001
    t = np.arange(0.0, 200.0, dt)
    total = sum(stim_current(p, 0, x) for x in t[::1]) * dt
    assert total == pytest.approx(40.0 * 1.0 * 4, rel=1e-9)


def test_compiled_table_agrees():
    p = Protocol((Stimulus([0, 2], 1.0, 1.0, 3.0), Stimulus([2, 4], 1.5, 2.0, 7.0, period=10.0)))
    tab = StimulusTable.build(p, 6)
    for node in range(6):
        for t in np.arange(0.0, 25.0, 0.25):
            assert table_current(node, t, *tab.arrays()) == stim_current(p, node, t)
    with pytest.raises(ValueError):
        StimulusTable.build(p, 3)


def test_grouped_delays():
    groups = [([1], 0.0), ([2], 7.0), ([3], 4.0), ([4], 11.0)]
    p = grouped_delays(groups, period=800.0, t0=10.0)
    assert [s.t_start for s in p] == [10.0, 17.0, 14.0, 21.0]
    assert all(s.period == 800.0 for s in p)
    blocked = grouped_delays(groups[2:], period=800.0)
    assert len(blocked) == 2
    with pytest.raises(ValueError):
        grouped_delays([([1], -1.0)], 800.0)


def test_empty_protocol_stays_at_rest(ap_model):
    mesh = build_regular_sheet(0.2, 0.1, 0.05)
    assert len(grouped_delays([], 1000.0)) == 0
    res = run_simulation(mesh, build_diffusion_field(mesh, 0.001), {"myocyte-epi": ap_model},
                         grouped_delays([], 1000.0), SchemeConfig(T=50.0))
    np.testing.assert_allclose(res.state.V, ap_model.rest_v)


def test_single_group_is_periodic_pacing():
    p = grouped_delays([([0], 0.0)], period=1000.0)
    assert [stim_current(p, 0, t) for t in (0.5, 1.5, 1000.5)] == [1.0, 0.0, 1.0]


@pytest.fixture(scope="module")
def strip():
    mesh = build_regular_sheet(1.1, 0.05, 0.025)
    field = build_diffusion_field(mesh, 0.0017, rho=0.25)
    left = select_nodes(mesh, RegionSelector("half_plane_x", {"value": 0.0}))
    probe = nearest_node(mesh, (1.0, 0.025))
    return mesh, field, left, probe


def _threshold(strip, model, duration, guess=20.0, **kw):
    mesh, field, left, probe = strip
    template = Stimulus(left, 1.0, duration, guess)
    return diastolic_threshold(mesh, field, {"myocyte-epi": model}, template, probe, window=100.0, **kw)


def test_threshold_bracket(strip, ap_model):
    mesh, field, left, probe = strip
    thr = _threshold(strip, ap_model, 1.0)
    models = {"myocyte-epi": ap_model}

    def fires(a):
        return propagates(mesh, field, models, Stimulus(left, 1.0, 1.0, a), probe, t_end=101.0)

    assert fires(2 * thr)
    assert not fires(0.5 * thr)
    assert not fires(0.0)


def test_threshold_monotone_in_duration(strip, ap_model):
    values = [_threshold(strip, ap_model, d) for d in (0.5, 1.0, 2.0)]
    for longer, shorter in zip(values[1:], values[:-1]):
        assert longer <= shorter * 1.05


def test_threshold_unreachable(strip, ap_model):
    thr = _threshold(strip, ap_model, 1.0)
    with pytest.raises(RuntimeError, match="no propagation"):
        _threshold(strip, ap_model, 1.0, guess=thr / 50, max_factor=10.0)
    with pytest.raises(ValueError):
        _threshold(strip, ap_model, 1.0, guess=0.0)
