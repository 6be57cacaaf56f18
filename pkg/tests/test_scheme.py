from fractions import Fraction

import numpy as np
import pytest

from hamci import scheme
from hamci.errors import (BadExponent, ExponentHypothesisViolated, GridUnderResolved,
                          ProfileConstraintViolated)
from hamci.field import GridSpec


def test_paper_schedule_exact():
    s = scheme.make_schedule(2, 1, 4, 2)
    assert (s.gamma, s.alpha, s.b) == (3, 19, 724)
    assert s.beta == Fraction(1, 2 * 724 * 725)
    assert all(isinstance(v, Fraction) for v in (s.gamma, s.alpha, s.b, s.beta))


def test_paper_schedule_other_exponents():
    # p = 3/2, r = 1, d = 4: p' = 3, min{2, 1, 1} = 1, gamma = 5/3
    s = scheme.make_schedule(Fraction(3, 2), 1, 4, 2)
    assert s.gamma == Fraction(5, 3)
    assert s.alpha == 4 + Fraction(5, 3) * 5
    assert s.b == 3 * (3 * (1 + s.alpha) * 6 + 2)


def test_hypothesis_rejected():
    with pytest.raises(ExponentHypothesisViolated):
        scheme.make_schedule(2, 3, 4, 2)
    with pytest.raises(BadExponent):
        scheme.make_schedule(1, 1, 4, 2)


def test_tame_ladder():
    s = scheme.make_schedule(2, 1, 4, 2, "tame", {"b": 2, "alpha": 0.1, "gamma": 0.4})
    assert s.beta == pytest.approx(1 / 12)
    assert [s.lam(q) for q in range(3)] == [2, 4, 16]
    assert s.ell(1) == pytest.approx(4 ** -1.1)
    assert s.mu(2) == pytest.approx(16 ** 0.4)
    assert s.kappa(0) == pytest.approx(20 * 16 ** (2 / 12))


def test_tame_needs_overrides():
    with pytest.raises((KeyError, ValueError)):
        scheme.make_schedule(2, 1, 4, 2, "tame", {"b": 2})


def test_shell_weights_match_brute_force():
    rng = np.random.default_rng(0)
    m = rng.uniform(0, 3, 500)
    kappa = 17.0
    S, _, _ = scheme.shell_weights(m, kappa)
    from hamci.profiles import eval_chi
    brute = sum(eval_chi(kappa * m - k) * k / kappa for k in range(12, 80))
    assert np.abs(S - brute).max() < 1e-14
    big = kappa * m >= 12.75
    assert np.abs(S[big] - m[big]).max() <= 0.75 / kappa


def test_nyquist_free_removes_only_nyquist():
    n = 8
    x = np.arange(n) / n
    a = np.cos(2 * np.pi * 4 * x)[:, None] + np.cos(2 * np.pi * x)[None, :] * np.ones((n, 1))
    b = scheme.nyquist_free(a, 2)
    assert np.allclose(b, np.cos(2 * np.pi * x)[None, :] * np.ones((n, 1)), atol=1e-14)


def test_tce_triple_solves_its_equation():
    s = scheme.make_schedule(2, 1, 4, 2, "tame", {"b": 2, "alpha": 0.1, "gamma": 0.4})
    st = scheme.initial_triple_tce(s, GridSpec(4, 32, 16), lam=2)
    assert scheme.residual(st)["full_abs"] < 1e-12
    assert np.allclose(st.rho.data.mean(axis=(1, 2, 3, 4)), 1.0)


def test_tce_triple_rejects_aliased_lambda():
    s = scheme.make_schedule(2, 1, 4, 2, "tame", {"b": 2, "alpha": 0.1, "gamma": 0.4})
    with pytest.raises(GridUnderResolved):
        scheme.initial_triple_tce(s, GridSpec(4, 32, 16))


def test_hamil_triple_solves_its_equation_and_gap():
    s = scheme.make_schedule(2, 1, 4, 2, "tame", {"b": 2, "alpha": 0.1, "gamma": 0.4})
    st = scheme.initial_triple_hamil(s, GridSpec(4, 4096, 8), Delta=1 / 32, lam=40)
    assert scheme.residual(st)["full_abs"] < 1e-10
    gap = np.mean(st.H.values * st.rho.data[0]) - np.mean(st.H.values * st.rho.data[-1])
    assert gap == pytest.approx(1 - 1 / 32, abs=1e-12)


def test_hamil_rejects_large_delta():
    s = scheme.make_schedule(2, 1, 4, 2, "tame", {"b": 2, "alpha": 0.1, "gamma": 0.4})
    with pytest.raises(ProfileConstraintViolated):
        scheme.initial_triple_hamil(s, GridSpec(4, 4096, 8), Delta=0.1, lam=40)


def _tame():
    return scheme.make_schedule(2, 1, 4, 2, "tame", {"b": 2, "alpha": 0.1, "gamma": 0.4})


def test_mollifying_constant_state_is_identity():
    from hamci.field import PeriodicScalarField, PeriodicVectorField, TimeField
    g = GridSpec(4, 32, 16)
    one = TimeField(g, np.ones((16, 1, 1, 1, 1)))
    zero = TimeField(g, np.zeros((16, 1, 1, 1, 1)))
    st = scheme.IterationState(0, one, zero, PeriodicScalarField(g, np.zeros((1,) * 4)),
                               PeriodicVectorField.zeros(g), TimeField(g, (np.zeros((16, 1, 1, 1, 1)),) * 4))
    mol = scheme.mollify_state(st, 0.25)
    assert np.allclose(mol.rho, 1.0, atol=1e-14)
    assert all(np.abs(c).max() == 0 for c in mol.R)
    assert all(np.abs(c).max() == 0 for c in mol.commutator.data)


def test_mollification_error_bounded_by_ell_times_c1():
    g = GridSpec(4, 32, 16)
    st = scheme.initial_triple_tce(_tame(), g, lam=1)
    ell = 0.25
    mol = scheme.mollify_state(st, ell)
    r = st.rho.data
    from hamci.field import deriv_array
    c1 = np.abs(r).max() + np.abs(deriv_array(r, 4, 0)).max() + np.abs(st.rho_t.data).max()
    for p in (1, 2):
        err = (np.abs(np.broadcast_to(mol.rho, r.shape) - r) ** p).mean(axis=(1, 2, 3, 4)).max() ** (1 / p)
        assert err <= 2 * ell * c1


def test_initial_error_scales_like_inverse_lambda():
    g = GridSpec(4, 32, 16)
    from hamci.field import lp_norm
    n2 = lp_norm(scheme.initial_triple_tce(_tame(), g, lam=2).R, 1)
    n4 = lp_norm(scheme.initial_triple_tce(_tame(), g, lam=4).R, 1)
    assert n2 / n4 == pytest.approx(2.0, rel=0.05)


def test_tce_window_is_calm():
    g = GridSpec(4, 32, 16)
    st = scheme.initial_triple_tce(_tame(), g, lam=2)
    calm = g.times() <= 1 / 3
    assert np.all(st.rho.data[calm] == 1.0)
    assert all(np.all(c[calm] == 0) for c in st.R.data)


@pytest.mark.parametrize("s, active", [(15.0, (15, 15)), (14.5, (14, 15))])
def test_constant_error_activates_expected_shells(s, active):
    kappa = 40.0
    mag = np.full((3, 4), s / kappa)
    S, _, n_range = scheme.shell_weights(mag, kappa)
    assert n_range == active
    assert np.abs(S - mag).max() <= 3 / (2 * kappa)


def test_zero_error_activates_nothing():
    S, S_t, n_range = scheme.shell_weights(np.zeros(5), 40.0, np.zeros(5))
    assert n_range is None and np.all(S == 0) and np.all(S_t == 0)
