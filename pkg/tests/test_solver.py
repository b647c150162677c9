import dataclasses

import numpy as np
import pytest

from pxlab import (GridFunction, SolveConfig, discrete_energy,
                   discrete_residual, minimize, residual_norm,
                   synthetic_image, uniqueness_experiment,
                   verify_weak_solution)
from pxlab.grid import _centered_diff, _centered_diff_adjoint

from util import fidelity_src, grid_1d, grid_2d, image_op, power_src, \
    single_phase, two_phase, zero_src


def test_energy_constant_states():
    grid = grid_1d(16)
    fam = single_phase(grid, 2.0)
    src = power_src(grid.npoints, r1=1.0, q1=1.0)
    assert discrete_energy(fam, src, GridFunction(np.ones(16)), grid) == \
        pytest.approx(0.5, rel=1e-13)
    assert discrete_energy(fam, src, GridFunction(np.zeros(16)), grid) == 0.0


def test_energy_affine_quadratic():
    grid = grid_1d(16)
    fam = single_phase(grid, 2.0)
    src = zero_src(grid.npoints)
    slope = 0.8
    U = GridFunction(slope * grid.quad_points[:, 0])
    h = grid.h[0]
    # interior cells carry the exact quadratic density, boundary cells half slope
    expected = 0.5 * slope**2 * h * (16 - 2) + 2 * 0.5 * (slope / 2) ** 2 * h
    assert discrete_energy(fam, src, U, grid) == pytest.approx(expected, rel=1e-13)


def test_residual_zero_at_constant_states():
    grid = grid_2d(6)
    fam = two_phase(grid)
    fid = fidelity_src(grid.npoints, g=0.5, mu=1.0)
    res = discrete_residual(fam, fid, GridFunction(np.full(grid.n, 0.5)), grid)
    assert np.all(res.values == 0.0)
    zero = zero_src(grid.npoints)
    res2 = discrete_residual(fam, zero, GridFunction(np.full(grid.n, 0.3)), grid)
    assert np.all(res2.values == 0.0)


def test_stencil_adjointness():
    rng = np.random.default_rng(0)
    for shape, h, axis in [((3,), 0.5, 0), ((17,), 0.1, 0),
                           ((6, 9), 0.2, 0), ((6, 9), 0.3, 1)]:
        u = rng.standard_normal(shape)
        v = rng.standard_normal(shape)
        lhs = np.sum(_centered_diff(u, h, axis) * v)
        rhs = np.sum(u * _centered_diff_adjoint(v, h, axis))
        assert lhs == pytest.approx(rhs, rel=1e-13)


@pytest.mark.parametrize("op_name", ["single", "two", "image"])
@pytest.mark.parametrize("src_name", ["power", "fidelity", "zero"])
def test_residual_is_energy_gradient(op_name, src_name):
    grid = grid_2d(6)
    fam = {"single": single_phase(grid, 2.0),
           "two": two_phase(grid),
           "image": image_op(grid)}[op_name]
    src = {"power": power_src(grid.npoints),
           "fidelity": fidelity_src(grid.npoints, g=0.4, mu=1.2),
           "zero": zero_src(grid.npoints)}[src_name]
    rng = np.random.default_rng(1)
    U0 = rng.uniform(0.2, 0.8, grid.npoints)
    res = discrete_residual(fam, src, GridFunction(U0.reshape(grid.n)), grid)
    h = 1e-5
    for _ in range(5):
        d = rng.standard_normal(grid.npoints)
        d /= np.linalg.norm(d)
        ep = discrete_energy(fam, src, GridFunction((U0 + h * d).reshape(grid.n)), grid)
        em = discrete_energy(fam, src, GridFunction((U0 - h * d).reshape(grid.n)), grid)
        fd = (ep - em) / (2 * h)
        an = float(res.values.ravel() @ d)
        assert abs(fd - an) <= 1e-6 * max(1e-12, abs(an))


def test_minimize_constant_fidelity():
    grid = grid_2d(8)
    fam = two_phase(grid)
    fid = fidelity_src(grid.npoints, g=0.5, mu=1.0)
    res = minimize(SolveConfig(fam, fid, grid, init=0.2))
    assert res.converged
    assert np.allclose(res.U.values, 0.5, atol=1e-6)
    assert res.in_unit_box


def test_minimize_immediate_convergence():
    grid = grid_1d(16)
    fam = single_phase(grid, 2.0)
    res = minimize(SolveConfig(fam, zero_src(grid.npoints), grid, init=0.3))
    assert res.converged and res.iterations == 0
    assert res.residual_norm == 0.0


def test_minimize_power_decay_to_zero():
    grid = grid_1d(16)
    fam = single_phase(grid, 2.0)
    src = power_src(grid.npoints, r1=1.0, q1=1.0)
    res = minimize(SolveConfig(fam, src, grid, init=0.5))
    assert res.converged
    assert np.all(np.abs(res.U.values) <= 1e-6)
    assert not res.strongly_positive
    assert all(np.diff(res.energy_history) <= 0.0)


def test_minimize_energy_history_monotone():
    grid = grid_2d(8)
    fam = image_op(grid)
    fid = fidelity_src(grid.npoints, g=synthetic_image(8, seed=3).ravel(), mu=1.0)
    res = minimize(SolveConfig(fam, fid, grid, init=0.4))
    assert res.converged
    assert all(np.diff(res.energy_history) <= 0.0)
    assert res.residual_norm <= 1e-8


def test_minimize_fixed_step_rule():
    grid = grid_1d(16)
    fam = single_phase(grid, 2.0)
    fid = fidelity_src(grid.npoints, g=0.5, mu=1.0)
    res = minimize(SolveConfig(fam, fid, grid, init=0.2, step_rule="fixed"))
    assert res.converged
    assert np.allclose(res.U.values, 0.5, atol=1e-6)
    assert all(np.diff(res.energy_history) <= 0.0)


def test_minimize_deterministic():
    grid = grid_2d(8)
    fam = two_phase(grid)
    fid = fidelity_src(grid.npoints, g=synthetic_image(8, seed=4).ravel(), mu=1.0)
    cfg = SolveConfig(fam, fid, grid, init=0.3)
    a = minimize(cfg)
    b = minimize(cfg)
    assert a.iterations == b.iterations
    assert np.array_equal(a.U.values, b.U.values)


def test_refinement_keeps_constant_solution():
    vals = []
    for n in (8, 16):
        grid = grid_1d(n)
        fam = single_phase(grid, 2.0)
        fid = fidelity_src(grid.npoints, g=0.37, mu=1.0)
        res = minimize(SolveConfig(fam, fid, grid, init=0.6, residual_tol=1e-12))
        assert res.converged
        u = res.U.values
        assert u.max() - u.min() <= 1e-12
        vals.append(float(u.mean()))
    assert abs(vals[0] - vals[1]) <= 1e-10


def test_residual_norm_helper():
    grid = grid_1d(8)
    fam = single_phase(grid, 2.0)
    src = power_src(grid.npoints)
    res = discrete_residual(fam, src, GridFunction(np.full(8, 0.5)), grid)
    assert residual_norm(res, grid) == pytest.approx(
        np.max(np.abs(res.values)) / grid.quad_weights[0])


def test_solver_config_validation():
    grid = grid_1d(8)
    fam = single_phase(grid, 2.0)
    src = zero_src(grid.npoints)
    with pytest.raises(ValueError):
        SolveConfig(fam, src, grid, init=0.5, residual_tol=0.0)
    with pytest.raises(ValueError):
        SolveConfig(fam, src, grid, init=0.5, backtrack=1.5)
    with pytest.raises(ValueError):
        SolveConfig(fam, src, grid, init=0.5, step_rule="newton")
    with pytest.raises(ValueError):
        minimize(SolveConfig(fam, src, grid, init=np.ones(5)))


def test_weak_form_defect_bounded_by_residual_norm():
    # duality: the normalized defect of ANY state is at most its residual norm
    grid = grid_2d(7)
    fam = image_op(grid)
    fid = fidelity_src(grid.npoints, g=0.4, mu=1.3)
    rng = np.random.default_rng(3)
    for _ in range(5):
        U = GridFunction(rng.uniform(0.1, 0.9, grid.n))
        rn = residual_norm(discrete_residual(fam, fid, U, grid), grid)
        rep = verify_weak_solution(fam, fid, U, grid, n_tests=12, seed=4)
        assert rep["max_normalized_defect"] <= rn * (1.0 + 1e-10)


def test_verify_weak_solution():
    grid = grid_2d(8)
    fam = two_phase(grid)
    fid = fidelity_src(grid.npoints, g=0.5, mu=1.0)
    res = minimize(SolveConfig(fam, fid, grid, init=0.2))
    rep = verify_weak_solution(fam, fid, res.U, grid, seed=2)
    assert rep["passed"]
    # an exact constant solution has identically vanishing defect
    exact = verify_weak_solution(fam, fid, GridFunction(np.full(grid.n, 0.5)), grid)
    assert exact["max_normalized_defect"] <= 1e-13
    off = GridFunction(res.U.values + 0.1)
    rep_off = verify_weak_solution(fam, fid, off, grid, seed=2)
    assert not rep_off["passed"]


def test_uniqueness_experiment_fidelity():
    grid = grid_2d(8)
    fam = two_phase(grid)
    fid = fidelity_src(grid.npoints, g=synthetic_image(8, seed=5).ravel(), mu=1.0)
    cfg = SolveConfig(fam, fid, grid, init=0.2)
    rep = uniqueness_experiment(cfg, [0.2, 0.9])
    assert rep["uniqueness_asserted"] and rep["uniqueness_ok"]
    assert rep["max_pairwise_sup"] <= 1e-6
    single = uniqueness_experiment(cfg, [0.4])
    assert single["uniqueness_ok"]


def test_uniqueness_diagnostic_branch():
    grid = grid_1d(16)
    # flat ratio order and non-strict source: no assertion, diagnostics instead
    fam = single_phase(grid, 2.0, alpha=2.0)
    src = power_src(grid.npoints, r1=1.0, q1=1.0, alpha=2.0)
    assert not (fam.strict_flag or src.strict13_flag)
    cfg = SolveConfig(fam, src, grid, init=0.5)
    rep = uniqueness_experiment(cfg, [0.5, 0.8])
    assert not rep["uniqueness_asserted"]
    assert "scaling_diagnostic" in rep
    assert set(rep["scaling_diagnostic"]) == {
        "lambda_hat", "phi_scaling_residual", "f_scaling_residual"}


def test_uniqueness_experiment_validation():
    grid = grid_1d(16)
    fam = single_phase(grid, 2.0, alpha=1.5)
    fid = fidelity_src(grid.npoints, g=0.5, mu=1.0, alpha=1.5)
    cfg = SolveConfig(fam, fid, grid, init=0.5)
    with pytest.raises(ValueError):
        uniqueness_experiment(cfg, [0.0, 0.5])
    with pytest.raises(ValueError):
        uniqueness_experiment(dataclasses.replace(
            cfg, src=fidelity_src(grid.npoints, g=0.5, mu=1.0, alpha=1.8)), [0.5])


def test_uniqueness_experiment_reports_divergence():
    grid = grid_2d(8)
    fam = two_phase(grid)
    fid = fidelity_src(grid.npoints, g=synthetic_image(8, seed=6).ravel(), mu=1.0)
    starved = SolveConfig(fam, fid, grid, init=0.2, max_iters=2)
    with pytest.raises(RuntimeError):
        uniqueness_experiment(starved, [0.2, 0.9])


def test_synthetic_image_range_and_determinism():
    img = synthetic_image(16, seed=7)
    assert img.shape == (16, 16)
    assert img.min() > 0.0 and img.max() < 1.0
    assert np.array_equal(img, synthetic_image(16, seed=7))
