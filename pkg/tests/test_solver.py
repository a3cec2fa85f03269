import math

import numpy as np
import pytest

from parabinv.errors import AdmissibilityError, DomainError, InputError
from parabinv.signal import CausalSignal, TimeGrid, builtin_signal
from parabinv.solver import (
    FieldGrid,
    FrequencySolution,
    Profile,
    SpaceGrid,
    fd_forward_oracle,
    regularity_ratio,
    residual_check,
    solve,
    solve_shifted,
    solve_streaming,
    terminal_snapshot,
    w_norm,
    write_field_csv,
)
from parabinv.symbolkit import CoefficientSet


@pytest.fixture(scope="module")
def grid():
    return TimeGrid(0.01, 2048)


@pytest.fixture(scope="module")
def coeffs():
    return CoefficientSet(1, 1, 1, 1, 0)


@pytest.fixture(scope="module")
def xgrid():
    return SpaceGrid(0.05, 200)


@pytest.fixture(scope="module")
def solved(grid, coeffs, xgrid):
    g = builtin_signal("exp-sin", grid)
    return g, *solve(g, coeffs, xgrid)


def test_space_grid():
    xg = SpaceGrid.for_decay(1.0, 0.01)
    assert math.exp(-xg.x_max / 2) <= 1e-12 * 1.0001
    with pytest.raises(InputError):
        SpaceGrid(0.1, 2)
    with pytest.raises(InputError):
        SpaceGrid(-0.1, 10)


def test_field_shape_checked(grid, xgrid):
    with pytest.raises(InputError):
        FieldGrid(xgrid, grid, np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))


def test_boundary_condition_and_realness(solved):
    g, field, rep = solved
    assert rep.bc_residual < 1e-12
    assert rep.imag_residue < 1e-12
    np.testing.assert_allclose(field.u[0], g.values, atol=1e-13)


def test_derivative_fields_match_finite_differences(solved):
    _, f, _ = solved
    dx, dt = f.xgrid.dx, f.tgrid.dt
    k = slice(500, 520)
    ux = (f.u[12, k] - f.u[10, k]) / (2 * dx)
    np.testing.assert_allclose(ux, f.u_x[11, k], atol=5e-3)
    ut = (f.u[11, 501:521] - f.u[11, 499:519]) / (2 * dt)
    np.testing.assert_allclose(ut, f.u_t[11, k], atol=5e-3)
    # the spectral fields satisfy the equation exactly up to round-off
    r = f.u_t + f.u_xx + f.u_x + f.u
    assert np.max(np.abs(r)) < 1e-10


def test_streaming_matches_materialised(grid, coeffs, xgrid, solved):
    g, field, rep = solved
    st = solve_streaming(g, coeffs, xgrid, snapshot_times=[5.0], block_rows=7)
    for k, v in vars(rep).items():
        assert getattr(st.report, k) == pytest.approx(v, rel=1e-12, abs=1e-300)
    np.testing.assert_allclose(st.snapshots[5.0].values, field.u[:, 500], atol=1e-15)
    np.testing.assert_allclose(st.initial.values, field.u[:, 0], atol=1e-15)
    with pytest.raises(InputError):
        solve_streaming(g, coeffs, xgrid, block_rows=2)


def test_profile_matches_field(grid, coeffs, xgrid, solved):
    g, field, _ = solved
    prof = FrequencySolution(g, coeffs).profile(xgrid, 5.0)
    np.testing.assert_allclose(prof.values, field.u[:, 500], atol=1e-14)
    snap = terminal_snapshot(field, 5.0)
    assert snap.t == pytest.approx(5.0)
    assert snap(0.0) == pytest.approx(field.u[0, 500])


def test_residual_check_agrees_with_report(solved, coeffs):
    g, field, rep = solved
    pde, bc, ic = residual_check(field, coeffs, g)
    assert (pde, bc, ic) == (rep.pde_residual, rep.bc_residual, rep.ic_residual)
    assert w_norm(field) == pytest.approx(rep.w_norm)
    with pytest.raises(InputError):
        residual_check(field, coeffs, builtin_signal("exp-sin", TimeGrid(0.02, 1024)))


def test_per_x_decay(grid, coeffs, xgrid):
    g = builtin_signal("exp-sin", grid)
    st = solve_streaming(g, coeffs, xgrid)
    bound = np.exp(-xgrid.xs / 2) * math.sqrt(1 / 8)
    assert np.all(st.row_l2 <= bound * (1 + 1e-4))


def test_zero_input_gives_zero(grid, coeffs, xgrid):
    field, rep = solve(builtin_signal("zero", grid), coeffs, xgrid)
    assert not np.any(field.u)
    assert rep.w_norm == 0.0 and rep.pde_residual == 0.0


def test_linearity(grid, coeffs, xgrid):
    a = builtin_signal("exp-sin", grid)
    b = builtin_signal("bump", grid)
    fa, _ = solve(a, coeffs, xgrid)
    fb, _ = solve(b, coeffs, xgrid)
    fab, _ = solve(a + 2.0 * b, coeffs, xgrid)
    np.testing.assert_allclose(fab.u, fa.u + 2 * fb.u, atol=1e-13)


def test_robin_boundary(grid, xgrid):
    c = CoefficientSet(1, 1, 1, 1, -0.5)
    g = builtin_signal("exp-sin", grid)
    field, rep = solve(g, c, xgrid)
    trace = field.u[0] - 0.5 * field.u_x[0]
    np.testing.assert_allclose(trace, g.values, atol=1e-13)
    assert rep.bc_residual < 1e-2 * rep.w12_norm_g


def test_rejects_bad_inputs(grid, xgrid):
    g = builtin_signal("exp-sin", grid)
    with pytest.raises(AdmissibilityError):
        solve(g, CoefficientSet(1, 1, 1, 1, 1), xgrid)
    with pytest.raises(AdmissibilityError):
        solve(g, CoefficientSet(1, 2, 0, 1, 0), xgrid)
    with pytest.raises(DomainError):
        solve(CausalSignal.from_function(np.exp, TimeGrid(0.01, 100)), CoefficientSet(1, 1, 1, 1, 0), xgrid)


def test_pde_residual_second_order_for_smooth_input(coeffs):
    res = []
    for dt, n, dx in [(0.02, 1024, 0.1), (0.01, 2048, 0.05)]:
        g = builtin_signal("bump", TimeGrid(dt, n))
        res.append(solve_streaming(g, coeffs, SpaceGrid.for_decay(1.0, dx)).report.pde_residual)
    assert res[0] / res[1] > 3.0


def test_shift_zero_is_plain_solve(grid, coeffs, xgrid, solved):
    g, field, _ = solved
    shifted = solve_shifted(g, coeffs, 0.0, xgrid)
    np.testing.assert_array_equal(shifted.u, field.u)
    np.testing.assert_array_equal(shifted.u_t, field.u_t)


def test_shift_restores_equation():
    c = CoefficientSet(1, 2, 0, 1, 0)
    tg = TimeGrid(0.01, 1024)
    g = builtin_signal("exp-sin", tg)
    xg = SpaceGrid(0.05, 200)
    f = solve_shifted(g, c, 2.0, xg)
    # undoing the shift amplifies round-off by exp(M t)
    assert np.all(np.abs(f.u[0] - g.values) <= 1e-15 * np.exp(2.0 * tg.times) + 1e-14)
    r = f.u_t + f.u_xx + 2 * f.u_x
    assert np.max(np.abs(r)) < 1e-8 * np.max(np.abs(f.u_t))
    with pytest.raises(AdmissibilityError):
        solve_shifted(g, c, 1.0, xg)
    with pytest.raises(AdmissibilityError):
        solve_shifted(g, CoefficientSet(1, 1, 1, 1, 1), 5.0, xg)


def test_regularity_ratio():
    from parabinv.solver import SolveReport

    reps = [SolveReport(2.0, 1.0, 2.0, 0, 0, 0, 0, 0), SolveReport(3.0, 1.0, 3.0, 0, 0, 0, 0, 0), SolveReport(0, 0, math.nan, 0, 0, 0, 0, 0)]
    assert regularity_ratio(reps) == 3.0
    with pytest.raises(InputError):
        regularity_ratio([])


def test_oracle_reproduces_spectral_initial_profile(grid, coeffs):
    # the reversed march from u(., T) lands on the spectral u(., 0)
    g = builtin_signal("exp-sin", grid)
    xg = SpaceGrid.for_decay(1.0, 0.05)
    st = solve_streaming(g, coeffs, xg, snapshot_times=[5.0])
    v0 = fd_forward_oracle(st.snapshots[5.0], g, coeffs, 5.0)
    assert v0.values[0] == pytest.approx(g.values[0])
    diff = np.sqrt(np.sum((v0.values - st.initial.values) ** 2) * xg.dx)
    assert diff <= 1e-2 * st.initial.l2_norm()


def test_oracle_matches_free_space_gaussian(coeffs):
    # far from the boundary v_s = v_xx + b v_x + c v carries a Gaussian exactly
    xg = SpaceGrid(0.02, 1001)
    v = Profile(xg, np.exp(-((xg.xs - 10.0) ** 2)))
    g = builtin_signal("zero", TimeGrid(0.005, 400))
    out = fd_forward_oracle(v, g, coeffs, 1.0)
    s = 1.0
    exact = math.exp(s) / math.sqrt(1 + 4 * s) * np.exp(-((xg.xs - 10.0 + s) ** 2) / (1 + 4 * s))
    assert np.max(np.abs(out.values - exact)) < 1e-3 * np.max(exact)


def test_field_csv_shape(tmp_path, grid, coeffs):
    tg = TimeGrid(0.05, 300)
    g = builtin_signal("exp-sin", tg)
    field, _ = solve(g, coeffs, SpaceGrid(0.1, 7))
    write_field_csv(field, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x,t,u,u_x,u_xx,u_t"
    assert len(lines) == 7 * 300 + 1
