import math

import mpmath
import numpy as np
import pytest

from wrapnet.sphere import (AS_WRITTEN, FULL_SPHERE, GOLDEN_ANGLE, default_grid_size, fibonacci_grid,
                            sample_sphere_uniform)


@pytest.mark.parametrize("N", [2, 7, 64, 1000])
def test_as_written_first_point(N):
    np.testing.assert_array_equal(fibonacci_grid(N, AS_WRITTEN).points[0], [0.0, 1.0, 0.0])


@pytest.mark.parametrize("N", [5, 64, 997])
def test_as_written_last_point_high_precision(N):
    mpmath.mp.dps = 50
    phi = mpmath.pi * (3 - mpmath.sqrt(5))
    expected = [float(mpmath.cos(phi * (N - 1))), 0.0, float(mpmath.sin(phi * (N - 1)))]
    np.testing.assert_allclose(fibonacci_grid(N, AS_WRITTEN).points[-1], expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("N", [2, 64, 501])
def test_full_sphere_poles(N):
    pts = fibonacci_grid(N, FULL_SPHERE).points
    np.testing.assert_array_equal(pts[0], [0.0, 1.0, 0.0])
    assert pts[-1, 1] == -1.0 and pts[-1, 0] == 0.0 and pts[-1, 2] == 0.0


@pytest.mark.parametrize("variant", [FULL_SPHERE, AS_WRITTEN])
def test_unit_norm_distinct_and_ordered(variant):
    g = fibonacci_grid(300, variant)
    assert g.N == 300 and g.variant == variant
    assert np.abs(np.linalg.norm(g.points, axis=1) - 1).max() <= 1e-12
    assert len(np.unique(g.points, axis=0)) == 300
    ys = g.points[:, 1]
    assert np.all(np.diff(ys) < 0)
    if variant == AS_WRITTEN:
        assert ys.min() >= 0.0


def test_deterministic():
    assert np.array_equal(fibonacci_grid(123).points, fibonacci_grid(123).points)


def _min_pairwise(p):
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    return d.min()


def test_min_distance_positive_and_decreasing():
    dists = [_min_pairwise(fibonacci_grid(n).points) for n in (50, 200, 800)]
    assert dists[0] > dists[1] > dists[2] > 0


def test_golden_angle():
    assert GOLDEN_ANGLE == math.pi * (3 - math.sqrt(5))


@pytest.mark.parametrize("bad", [0, 1, -3, 2.5])
def test_grid_size_errors(bad):
    with pytest.raises(ValueError):
        fibonacci_grid(bad)


def test_unknown_variant():
    with pytest.raises(ValueError):
        fibonacci_grid(10, "hemi")


def test_default_grid_size():
    assert default_grid_size(1) == 64
    assert default_grid_size(64) == 64
    assert default_grid_size(65) == 128
    assert default_grid_size(642) == 704


def test_samples_unit_and_deterministic():
    a = sample_sphere_uniform(1000, 7)
    assert np.abs(np.linalg.norm(a, axis=1) - 1).max() <= 1e-12
    assert np.array_equal(a, sample_sphere_uniform(1000, 7))
    assert not np.array_equal(a, sample_sphere_uniform(1000, 8))


def test_samples_are_centered():
    # each coordinate of a uniform unit vector has variance 1/3, so the mean's std is 1/sqrt(3K)
    a = sample_sphere_uniform(100_000, 0)
    assert np.abs(a.mean(axis=0)).max() < 0.02
    np.testing.assert_allclose((a * a).mean(axis=0), 1 / 3, atol=0.01)


def test_sample_count_error():
    with pytest.raises(ValueError):
        sample_sphere_uniform(0, 1)
