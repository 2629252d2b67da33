import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcpnc.errors import InvalidRate, NotPSD, UnsupportedOrder
from mcpnc.model import (
    CovarianceSpec,
    PilotGrid,
    build_covariance,
    laser_phase_variance,
    make_qam,
    place_pilots_wrapped_diagonal,
    wrapped_diagonal_mask,
)


def test_qpsk_points():
    c = make_qam(4)
    expected = {complex(a, b) / np.sqrt(2) for a in (-1, 1) for b in (-1, 1)}
    assert len(c.points) == 4
    for p in c.points:
        assert min(abs(p - e) for e in expected) < 1e-15


@pytest.mark.parametrize("order", [4, 16, 64, 256])
@pytest.mark.parametrize("es", [1.0, 2.5])
def test_constellation_invariants(order, es):
    c = make_qam(order, es)
    assert abs(np.mean(c.points)) < 1e-12
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(es, abs=1e-12)
    labels = {tuple(l) for l in c.labels}
    assert len(labels) == order and c.bits_per_symbol == int(np.log2(order))
    # points are indexed by their label value
    np.testing.assert_array_equal(c.bits_to_indices(c.labels.reshape(-1)), np.arange(order))


@pytest.mark.parametrize("order", [16, 64, 256])
def test_gray_adjacency(order):
    c = make_qam(order)
    pts = c.points / np.min(np.abs(np.diff(np.unique(np.round(c.points.real, 9)))))
    for i in range(order):
        for j in range(order):
            d = pts[j] - pts[i]
            if np.isclose(abs(d), 1.0) and (np.isclose(d.real, 0) or np.isclose(d.imag, 0)):
                assert np.sum(c.labels[i] != c.labels[j]) == 1


def test_unsupported_order():
    with pytest.raises(UnsupportedOrder):
        make_qam(32)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_nearest_matches_brute_force(order, rng):
    c = make_qam(order)
    z = rng.standard_normal(2000) + 1j * rng.standard_normal(2000)
    brute = np.argmin(np.abs(z[:, None] - c.points) ** 2, axis=1)
    np.testing.assert_array_equal(c.nearest(z), brute)


def test_build_covariance_examples():
    np.testing.assert_allclose(build_covariance(0.3, 0.1, 1), [[0.4]])
    var_lpn = laser_phase_variance(5e-5)
    q = build_covariance(var_lpn, var_lpn / 1000, 20)
    assert q[0, 0] == pytest.approx(3.1447e-4, rel=1e-4)
    assert q[0, 1] == pytest.approx(3.1416e-4, rel=1e-4)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0, 1e-2, allow_nan=False),
    st.floats(0, 1e-3, allow_nan=False),
    st.integers(1, 24),
)
def test_covariance_eigenstructure(var_lpn, var_drift, dim):
    eig = np.linalg.eigvalsh(build_covariance(var_lpn, var_drift, dim))
    assert eig.min() == pytest.approx(var_drift if dim > 1 else var_lpn + var_drift, abs=1e-12)
    assert eig.max() == pytest.approx(dim * var_lpn + var_drift, abs=1e-12)
    assert eig.min() >= -1e-15


def test_covariance_spec_validation():
    spec = CovarianceSpec(np.eye(3) * 1e-4, 0.1)
    assert spec.dim == 3 and spec.sigma2.shape == (3,)
    with pytest.raises(NotPSD):
        CovarianceSpec(np.array([[1.0, 0.5], [0.2, 1.0]]), 0.1)
    with pytest.raises(ValueError):
        CovarianceSpec(np.eye(2), [0.1, 0.0])
    off = CovarianceSpec(build_covariance(1e-4, 1e-7, 3), 0.1).per_channel()
    assert np.count_nonzero(off.q - np.diag(np.diag(off.q))) == 0


def test_pilots_single_channel():
    mask = wrapped_diagonal_mask(1, 4, 0.5)
    # zero-based times 0 and 2
    np.testing.assert_array_equal(mask[0], [True, False, True, False])


def test_pilots_one_per_column():
    mask = wrapped_diagonal_mask(4, 8, 0.25)
    assert np.all(mask.sum(axis=0) == 1)
    assert np.all(mask.mean(axis=1) == 0.25)
    np.testing.assert_array_equal(np.argmax(mask, axis=0), [0, 1, 2, 3, 0, 1, 2, 3])


def test_pilot_fraction_large(rng):
    c = make_qam(16)
    grid = place_pilots_wrapped_diagonal(20, 10000, 0.01, c, rng)
    assert abs(grid.rate - 0.01) <= 1 / (20 * 10000)
    vals = grid.values[grid.mask]
    assert np.all(np.min(np.abs(vals[:, None] - c.points), axis=1) < 1e-12)
    assert np.all(grid.values[~grid.mask] == 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(2, 50), st.integers(1, 8))
def test_pilot_rate_property(dim, period, repeats):
    n = period * repeats
    mask = wrapped_diagonal_mask(dim, n, 1.0 / period)
    assert abs(mask.mean() - 1.0 / period) <= 1.0 / (dim * n) + 1e-15
    assert np.all(mask.sum(axis=1) == repeats)


def test_invalid_rate():
    with pytest.raises(InvalidRate):
        wrapped_diagonal_mask(2, 10, 0.0)
    with pytest.raises(InvalidRate):
        wrapped_diagonal_mask(2, 10, 1.5)


def test_pilot_text_roundtrip(rng):
    grid = place_pilots_wrapped_diagonal(3, 12, 0.25, make_qam(4), rng)
    text = grid.to_text()
    assert text.splitlines()[0] == "PDDDPDDDPDDD"
    back = PilotGrid.from_text(text, grid.values)
    np.testing.assert_array_equal(back.mask, grid.mask)
    with pytest.raises(ValueError):
        PilotGrid.from_text("PDX\nPDD")
