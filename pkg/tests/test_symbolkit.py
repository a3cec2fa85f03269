import numpy as np
import pytest

from parabinv.errors import AdmissibilityError, DomainError
from parabinv.signal import TimeGrid
from parabinv.spectral import FrequencyGrid
from parabinv.symbolkit import (
    CoefficientSet,
    Verdict,
    check_admissible,
    hardy_bounds,
    lambda2_crossover,
    require_strict,
    roots_at,
    roots_on_axis,
    sqrt_term,
    write_roots_csv,
)


@pytest.mark.parametrize(
    "coeffs,reason",
    [
        ((0, 1, 1, 1, 0), "a ≤ 0"),
        ((1, 0, 1, 1, 0), "b ≤ 0"),
        ((1, 1, 1, 0, 0), "k0²+k1² = 0"),
        ((1, 1, 1, 1, 1), "k0·k1 > 0"),
    ],
)
def test_rejections(coeffs, reason):
    adm = check_admissible(CoefficientSet(*coeffs))
    assert adm.verdict is Verdict.REJECTED and adm.reason == reason
    with pytest.raises(AdmissibilityError, match="inadmissible"):
        require_strict(CoefficientSet(*coeffs))


def test_strict_and_shift():
    assert check_admissible(CoefficientSet(1, 1, 1, 1, 0)).verdict is Verdict.STRICT
    assert check_admissible(CoefficientSet(1, 1, 1, 1, -1)).verdict is Verdict.STRICT
    adm = check_admissible(CoefficientSet(1, 2, 0, 1, 0))
    assert adm.verdict is Verdict.NEEDS_SHIFT and adm.m_min == 1.0
    assert CoefficientSet(1, 2, 0, 1, 0).shifted(2).is_strict
    with pytest.raises(AdmissibilityError, match="shift"):
        require_strict(CoefficientSet(1, 2, 0, 1, 0))


def test_non_finite_coefficient():
    with pytest.raises(DomainError):
        CoefficientSet(1, float("nan"), 1, 1, 0)


def test_spot_roots():
    r = roots_at(CoefficientSet(1, 1, 1, 1, 0), 1j)
    assert r.lambda1 == pytest.approx(-1 + 1j, abs=1e-15)
    assert r.lambda2 == pytest.approx(-1j, abs=1e-15)


def test_roots_solve_characteristic_equation():
    c = CoefficientSet(2.0, 3.0, 5.0, 1, 0)
    w = np.linspace(-50, 50, 1001)
    l1, l2 = roots_on_axis(c, w)
    p = 1j * w
    for lam in (l1, l2):
        assert np.max(np.abs(lam**2 + c.b * lam + c.c + c.a * p) / (1 + np.abs(w))) < 1e-12
    assert np.all(l1.real <= -c.b / 2 + 1e-15)
    np.testing.assert_allclose(l1 + l2, -c.b, atol=1e-12)


def test_cut_limit_from_above():
    c = CoefficientSet(1, 1, 1, 1, 0)
    p = 0.5
    s_on = complex(sqrt_term(c, p))
    s_above = complex(sqrt_term(c, p + 1e-12j))
    assert s_on == pytest.approx(s_above, abs=1e-9)
    assert s_on.real == 0 and s_on.imag < 0
    with pytest.raises(DomainError):
        sqrt_term(c, -1.0)


def test_hardy_bounds():
    fg = FrequencyGrid.for_time_grid(TimeGrid(0.01, 2048))
    hb = hardy_bounds(CoefficientSet(1, 1, 1, 1, 0), fg)
    assert hb.weighted
    assert hb.inv_k == pytest.approx(1.0)
    # |lambda1 - lambda2| = 2|sqrt(mu - i a w)| is smallest at w = 0: 2*sqrt(3/4)
    assert hb.inv_diff == pytest.approx(1 / np.sqrt(3), rel=1e-12)
    assert np.isfinite(hb.n_total)
    robin = hardy_bounds(CoefficientSet(1, 1, 1, 1, -1), fg)
    assert not robin.weighted and robin.inv_k <= 1.0
    with pytest.raises(AdmissibilityError):
        hardy_bounds(CoefficientSet(1, 2, 0, 1, 0), fg)


@pytest.mark.parametrize("delta", [0.0, 0.5, 2.0])
def test_lambda2_crossover(delta):
    c = CoefficientSet(1.5, 1.0, 2.0, 1, 0)
    w = lambda2_crossover(c, delta)
    _, l2 = roots_on_axis(c, [w])
    assert l2[0].real == pytest.approx(delta, abs=1e-9)


def test_roots_csv(tmp_path):
    write_roots_csv(CoefficientSet(1, 1, 1, 1, 0), [0.0, 1.0], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "omega,re_l1,im_l1,re_l2,im_l2"
    assert [float(v) for v in lines[2].split(",")] == pytest.approx([1.0, -1.0, 1.0, 0.0, -1.0])
