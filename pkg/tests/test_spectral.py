import math

import numpy as np
import pytest

from parabinv.errors import ConfigurationError, DomainError, InputError
from parabinv.signal import CausalSignal, TimeGrid, builtin_signal, l2_norm
from parabinv.spectral import (
    SQRT_2PI,
    FrequencyGrid,
    Spectrum,
    forward_transform,
    inverse_transform,
    laplace_at,
    next_odd_fast_len,
    reconstruct,
    synthesize_half,
    write_spectrum_csv,
)


def _factors_ok(m):
    for p in (3, 5, 7):
        while m % p == 0:
            m //= p
    return m == 1


@pytest.mark.parametrize("target", [1, 2, 10, 101, 4097, 32769])
def test_next_odd_fast_len(target):
    m = next_odd_fast_len(target)
    assert m >= target and m % 2 == 1 and _factors_ok(m)
    assert all(not _factors_ok(k) for k in range(target, m) if k % 2 == 1)


def test_frequency_grid():
    tg = TimeGrid(0.01, 1000)
    fg = FrequencyGrid.for_time_grid(tg)
    assert fg.m % 2 == 1 and fg.m > 2 * tg.n
    assert fg.d_omega * fg.m * tg.dt == pytest.approx(2 * math.pi)
    assert fg.omegas[fg.half] == 0.0
    np.testing.assert_allclose(fg.omegas, -fg.omegas[::-1])
    assert fg.omega_max <= math.pi / tg.dt
    with pytest.raises(InputError):
        FrequencyGrid(1.0, 4)
    with pytest.raises(InputError):
        FrequencyGrid(0.0, 5)
    with pytest.raises(InputError):
        FrequencyGrid.for_time_grid(tg, pad=0.5)


def test_exp_sin_transform_matches_closed_form():
    tg = TimeGrid(1e-3, 40000)
    g = builtin_signal("exp-sin", tg)
    spec = forward_transform(g)
    w = spec.grid.omegas
    exact = 1.0 / (SQRT_2PI * ((1 + 1j * w) ** 2 + 1))
    low = np.abs(w) < 20
    assert np.max(np.abs(spec.values[low] - exact[low])) < 1e-7


def test_endpoint_correction_handles_jump():
    tg = TimeGrid(1e-2, 8000)
    g = CausalSignal.from_function(lambda t: np.exp(-t), tg)
    fg = FrequencyGrid.for_time_grid(tg)
    w = fg.omegas
    exact = 1.0 / (SQRT_2PI * (1 + 1j * w))
    low = np.abs(w) < 5
    plain = forward_transform(g, fg)
    corr = forward_transform(g, fg, endpoint_correction=True)
    assert np.max(np.abs(plain.values[low] - exact[low])) > 1e-3
    assert np.max(np.abs(corr.values[low] - exact[low])) < 1e-6


def test_round_trip_is_exact(exp_sin):
    back = inverse_transform(forward_transform(exp_sin), exp_sin.grid)
    np.testing.assert_allclose(back.values, exp_sin.values, atol=1e-14)


def test_reconstruct_reports_outside_part(small_grid):
    fg = FrequencyGrid.for_time_grid(small_grid)
    # a spectrum whose inverse lives at negative times
    neg = CausalSignal.from_function(lambda t: np.exp(-t) * np.sin(t), small_grid)
    spec = Spectrum(fg, np.conj(forward_transform(neg, fg).values))
    rec = reconstruct(spec, small_grid)
    assert rec.outside_norm > 0.3
    assert rec.imag_residue < 1e-14


def test_asymmetric_spectrum_rejected(small_grid):
    fg = FrequencyGrid.for_time_grid(small_grid)
    v = np.zeros(fg.m, dtype=complex)
    v[fg.half + 3] = 1.0
    with pytest.raises(DomainError):
        inverse_transform(Spectrum(fg, v), small_grid)


def test_grid_mismatch_rejected(small_grid, exp_sin):
    with pytest.raises(ConfigurationError):
        forward_transform(exp_sin, FrequencyGrid(1.0, 4097))
    fg = FrequencyGrid.for_time_grid(small_grid)
    with pytest.raises(ConfigurationError):
        forward_transform(exp_sin, FrequencyGrid(fg.d_omega * 3, fg.m))
    with pytest.raises(ConfigurationError):
        forward_transform(exp_sin, FrequencyGrid(2 * math.pi / (101 * small_grid.dt), 101))


def test_spectrum_ops(small_grid, exp_sin):
    s = forward_transform(exp_sin)
    np.testing.assert_allclose((s + s).values, (2 * s).values)
    assert s.conjugate_asymmetry() < 1e-15
    assert Spectrum(s.grid, np.zeros(s.grid.m)).conjugate_asymmetry() == 0.0
    with pytest.raises(InputError):
        Spectrum(s.grid, np.zeros(3))


def test_plancherel(exp_sin):
    s = forward_transform(exp_sin)
    riemann = math.sqrt(float(np.sum(exp_sin.values**2)) * exp_sin.grid.dt)
    assert s.l2_norm() == pytest.approx(riemann, rel=1e-12)
    assert s.l2_norm() == pytest.approx(l2_norm(exp_sin), rel=1e-6)


def test_synthesize_half_matches_full_inverse(exp_sin):
    s = forward_transform(exp_sin)
    out = synthesize_half(s.values[s.grid.half :], exp_sin.grid, s.grid)
    np.testing.assert_allclose(out, exp_sin.values, atol=1e-14)
    full = synthesize_half(s.values[s.grid.half :], exp_sin.grid, s.grid, window=False)
    assert full.shape == (s.grid.m,)


def test_laplace_at():
    tg = TimeGrid(1e-3, 30000)
    g = CausalSignal.from_function(lambda t: np.exp(-t), tg)
    p = 0.5 + 2j
    exact = 1.0 / (SQRT_2PI * (p + 1))
    assert abs(laplace_at(g, p, endpoint_correction=True) - exact) < 1e-9
    assert abs(laplace_at(g, p) - exact) > 1e-5
    with pytest.raises(DomainError):
        laplace_at(g, -0.1)


def test_laplace_agrees_with_transform_on_axis(exp_sin):
    s = forward_transform(exp_sin)
    j = s.grid.half + 7
    assert laplace_at(exp_sin, 1j * s.grid.omegas[j]) == pytest.approx(s.values[j], abs=1e-13)


def test_spectrum_csv(tmp_path, exp_sin):
    s = forward_transform(exp_sin)
    write_spectrum_csv(s, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "omega,re,im" and len(lines) == s.grid.m + 1
