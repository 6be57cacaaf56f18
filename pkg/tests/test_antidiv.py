import numpy as np
import pytest

from hamci import antidiv
from hamci.errors import AliasedLambda, NonZeroMean
from hamci.field import GridSpec, PeriodicScalarField, divergence


def _pair(n=128):
    g = GridSpec(2, n)
    x, y = g.coords()
    f = PeriodicScalarField(g, 2 + np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y))
    gg = PeriodicScalarField(g, np.sin(2 * np.pi * (x + y)) * np.ones((1, 1)))
    return g, f, gg


def test_plain_antidivergence():
    g, f, _ = _pair()
    v = antidiv.grad_inv_laplacian(PeriodicScalarField(g, f.values - f.mean()))
    assert np.allclose(divergence(v).values, f.values - f.mean(), atol=1e-12)


def test_plain_rejects_mean():
    g, f, _ = _pair()
    with pytest.raises(NonZeroMean):
        antidiv.grad_inv_laplacian(f)


def test_improved_identity_and_decay():
    _, f, g = _pair()
    norms = []
    for lam in (4, 8, 16):
        res = antidiv.improved_antidivergence(f, g, lam)
        assert res.residual <= 1e-10
        norms.append(np.mean(res.field.magnitude()))
    slope = np.polyfit(np.log([4, 8, 16]), np.log(norms), 1)[0]
    assert slope == pytest.approx(-1, abs=0.15)


def test_aliasing_guard():
    _, f, g = _pair(32)
    with pytest.raises(AliasedLambda):
        antidiv.improved_antidivergence(f, g, 16)


def test_holder_gap_nonnegative():
    _, f, g = _pair()
    for lam in (2, 8, 32):
        gap = antidiv.improved_holder_gap(f, g, lam, 2.0)
        assert gap["slack"] >= 0 and gap["l26_slack"] >= 0
