from dataclasses import replace

import numpy as np
import pytest

from monodomain.fem import assemble, build_diffusion_field
from monodomain.mesh import assign_fibrosis, build_regular_sheet, build_truncated_sheet
from monodomain.oracles import (LinearTestProblem, OracleError, linear_decay_model, reference_solution,
                                spectral_bound, split_solve, splitting_order)
from monodomain.stimulus import Protocol

from conftest import operator_for

TEST_MESHES = {
    "unit_aniso": lambda: operator_for(build_regular_sheet(1.0, 1.0, 0.05), d=0.0017, rho=0.25)[1],
    "rotated": lambda: operator_for(build_regular_sheet(0.6, 0.4, 0.02, fiber_angle=0.6), d=0.002)[1],
    "fibrotic": lambda: operator_for(assign_fibrosis(build_truncated_sheet(1.0, 1.0, 0.018), 0.1, 3),
                                     d=0.002, d_fib=0.00066)[1],
    "strip": lambda: operator_for(build_regular_sheet(2.0, 0.1, 0.01), d=0.0017)[1],
}


@pytest.mark.parametrize("name", sorted(TEST_MESHES))
def test_gershgorin_is_conservative(name):
    op = TEST_MESHES[name]()
    sb = spectral_bound(op)
    assert sb.critical_step >= op.dt_s / 0.9


def test_power_iteration_matches_dense_eigensolver():
    op = TEST_MESHES["rotated"]()
    op_small = operator_for(build_regular_sheet(0.3, 0.2, 0.02, fiber_angle=0.6), d=0.002)[1]
    dense = np.diag(1 / np.sqrt(op_small.m)) @ op_small.K.toarray() @ np.diag(1 / np.sqrt(op_small.m))
    lam = np.linalg.eigvalsh(dense).max()
    assert spectral_bound(op_small).lam_max == pytest.approx(lam, rel=1e-5)
    assert spectral_bound(op).iterations > 0


def test_strip_bound_scales_with_h_squared():
    d = 0.001
    steps = [spectral_bound(operator_for(build_regular_sheet(1.0, 0.04, h), d=d, rho=1.0)[1]).critical_step
             for h in (0.02, 0.01)]
    assert steps[0] / steps[1] == pytest.approx(4.0, rel=0.05)
    # order of magnitude of the finite-difference limit h^2 / (2 d) in 2D
    assert 0.1 < steps[1] / (0.01 ** 2 / (2 * d)) < 10


def test_bound_linear_in_d():
    mesh = build_regular_sheet(0.5, 0.5, 0.05)
    a = spectral_bound(operator_for(mesh, d=0.001)[1]).lam_max
    b = spectral_bound(operator_for(mesh, d=0.003)[1]).lam_max
    assert b / a == pytest.approx(3.0, rel=1e-5)


def test_power_iteration_non_convergence():
    with pytest.raises(OracleError):
        spectral_bound(TEST_MESHES["strip"](), max_iter=3)


def test_reference_converges_to_analytic():
    p = LinearTestProblem(a=0.05, d=0.001, h=0.05)
    T = 20.0
    exact = p.analytic(T)
    errs = [np.abs(p.reference(T, refine) - exact).max() for refine in (1.0, 2.0, 4.0)]
    assert errs[0] > errs[1] > errs[2]
    # remaining error is the O(h^2) spatial part
    spatial = np.abs(p.semi_discrete(T) - exact).max()
    assert abs(errs[2] - spatial) < abs(errs[0] - spatial)


def test_reference_first_order_in_time():
    p = LinearTestProblem(a=0.05, d=0.001, h=0.1)
    T = 20.0
    semi = p.semi_discrete(T)
    e1 = np.abs(p.reference(T, 8.0) - semi).max()
    e2 = np.abs(p.reference(T, 16.0) - semi).max()
    assert 1.8 < e1 / e2 < 2.2


def test_reference_self_consistency():
    p = LinearTestProblem(a=0.05, d=0.001, h=0.1)
    r10 = p.reference(10.0, 10.0)
    r20 = p.reference(10.0, 20.0)
    gate = 1.0  # mV tolerance that scheme comparisons use
    assert np.abs(r10 - r20).max() < 0.1 * gate


def test_reference_solution_zero_time(ap_model):
    mesh = build_regular_sheet(0.2, 0.2, 0.05)
    field = build_diffusion_field(mesh, 0.001)
    V = reference_solution(mesh, field, {"myocyte-epi": ap_model}, Protocol(), 0.0)
    np.testing.assert_array_equal(V, ap_model.rest_v)
    assert LinearTestProblem().reference(0.0).tolist() == LinearTestProblem().initial().tolist()


def test_reference_solution_run(ap_model):
    mesh = build_regular_sheet(0.2, 0.1, 0.05)
    field = build_diffusion_field(mesh, 0.001)
    res = reference_solution(mesh, field, {"myocyte-epi": ap_model}, Protocol(), 5.0, probes=[0])
    assert res.scheme == "OST"
    assert res.dt == pytest.approx(ap_model.dt0 / 10)
    assert res.dt_ad <= res.dt_s / 10


def test_reference_instability_is_an_oracle_error():
    mesh = build_regular_sheet(0.1, 0.1, 0.05)
    field = build_diffusion_field(mesh, 0.001)
    model = replace(linear_decay_model(1.0), dt0=500.0, rest_v=1.0)  # dt = 50 ms, amplification 49
    with pytest.raises(OracleError, match="unstable"):
        reference_solution(mesh, field, {"myocyte-epi": model}, Protocol(), 20000.0)


def test_analytic_solution_satisfies_pde():
    p = LinearTestProblem()
    xy = np.array([[0.3, 0.7], [0.1, 0.2]])
    t, eps = 4.0, 1e-4
    u_t = (p.analytic(t + eps, xy) - p.analytic(t - eps, xy)) / (2 * eps)

    def lap(pt):
        h = 1e-3
        c = p.analytic(t, pt[None])[0]
        s = sum(p.analytic(t, (pt + dv)[None])[0] for dv in ([h, 0], [-h, 0], [0, h], [0, -h]))
        return (s - 4 * c) / h ** 2

    rhs = -p.a * p.analytic(t, xy) + p.d * np.array([lap(pt) for pt in xy])
    np.testing.assert_allclose(u_t, rhs, rtol=1e-5, atol=1e-8)
    with pytest.raises(ValueError):
        LinearTestProblem(a_variation=0.5).analytic(1.0)


def test_split_solve_validates_integrator():
    with pytest.raises(ValueError):
        split_solve(LinearTestProblem(), 1.0, 4, "rk4")


def test_splitting_orders():
    assert 1.9 <= splitting_order(integrator="exact").order <= 2.1
    assert 0.9 <= splitting_order(integrator="euler").order <= 1.1
