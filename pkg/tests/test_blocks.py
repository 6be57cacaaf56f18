import numpy as np
import pytest

from hamci import blocks, geometry
from hamci.errors import GridUnderResolved
from hamci.field import GridSpec


@pytest.fixture(scope="module")
def family():
    ds = geometry.build_direction_set(4, 0.125)
    return blocks.build_block_family(ds, 4.0, 1.0, 2.0, GridSpec(4, 64))


def test_dual_exponent():
    assert blocks.dual(2.0) == 2.0
    assert blocks.dual(3.0) == pytest.approx(1.5)


def test_block_lemma_report(family):
    rep = blocks.verify_block_lemma(family)
    assert blocks.block_report_passes(rep)


def test_theta_mean_matches_continuum(family):
    # mean of Theta equals mu^{-(d-1)/p'} after discrete normalization
    for i in range(len(family.blocks)):
        th = np.broadcast_to(family.blocks[i].theta, family.grid.shape)
        assert th.mean() == pytest.approx(4.0 ** (-3 / 2), rel=1e-12)
        assert th.min() >= 0


def test_predicted_exponents():
    assert blocks.predicted_exponent("Theta", 0, 1, 2, 4) == pytest.approx(-1.5)
    assert blocks.predicted_exponent("X", 1, 2, 2, 4) == pytest.approx(1.0)
    assert blocks.predicted_exponent("H", 0, np.inf, 2, 4) == pytest.approx(0.5)


def test_scaling_slopes_match():
    ds = geometry.build_direction_set(4, 0.125)
    res = blocks.measure_scaling(ds, 1.0, 2.0, 1.0, 0, [4, 8, 16], n=256)
    for v in res.values():
        assert abs(v["slope"] - v["predicted"]) <= 0.1


def test_under_resolved_block_rejected():
    with pytest.raises(GridUnderResolved):
        blocks.block_norm("Theta", 0, 2, 64.0, 2.0, 0.125, 4, 256)


def test_scaling_needs_geometric_progression():
    ds = geometry.build_direction_set(4, 0.125)
    with pytest.raises(ValueError):
        blocks.measure_scaling(ds, 1.0, 2.0, 1.0, 0, [4, 8, 12])
