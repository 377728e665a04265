import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from baytomo.geometry import (ImageGrid, ProjectionGeometry, Sinogram, apply, apply_adjoint,
                              build_projector, likelihood_grad, likelihood_neglog,
                              ray_intersections, simulate_sinogram)
from conftest import clip_chord


def test_image_grid_validates_length():
    with pytest.raises(ValueError):
        ImageGrid(2, 2, 1.0, np.zeros(3))
    with pytest.raises(ValueError):
        ImageGrid(2, 2, 0.0)


def test_image_grid_values_read_only():
    g = ImageGrid(2, 2, 1.0, np.arange(4.0))
    with pytest.raises(ValueError):
        g.values[0] = 5.0


def test_geometry_rejects_bad_lists():
    with pytest.raises(ValueError):
        ProjectionGeometry([], [0.0])
    with pytest.raises(ValueError):
        ProjectionGeometry([0.0, 0.0], [0.0])
    with pytest.raises(ValueError):
        ProjectionGeometry([0.0], [-1.0, 0.5])


def test_parallel_beam_layout():
    g = ImageGrid(8, 8, 0.5)
    geom = ProjectionGeometry.parallel_beam(g, 10)
    assert geom.detector_count == 8
    assert np.allclose(geom.angles, np.arange(10) * np.pi / 10)
    assert np.allclose(geom.offsets, -geom.offsets[::-1])
    radius = 0.5 * 0.5 * np.hypot(8, 8)
    assert geom.offsets[-1] + (geom.offsets[1] - geom.offsets[0]) / 2 == pytest.approx(radius)


def test_horizontal_ray_through_top_row():
    g = ImageGrid(2, 2, 1.0)
    idx, lengths = ray_intersections(g, 0.0, 0.5)
    assert list(idx) == [0, 1]
    assert np.allclose(lengths, [1.0, 1.0])


def test_diagonal_ray_through_center():
    g = ImageGrid(2, 2, 1.0)
    idx, lengths = ray_intersections(g, np.pi / 4, 0.0)
    assert lengths.sum() == pytest.approx(2 * np.sqrt(2), abs=1e-12)


def test_row_sums_match_chord_lengths():
    g = ImageGrid(8, 8, 1.0)
    geom = ProjectionGeometry(np.arange(4) * np.pi / 4, np.linspace(-5.5, 5.5, 11))
    A = build_projector(g, geom)
    sums = np.asarray(A.matrix.sum(axis=1)).ravel()
    k = 0
    for th in geom.angles:
        for s in geom.offsets:
            assert sums[k] == pytest.approx(clip_chord(th, s, 4.0, 4.0), abs=1e-10)
            k += 1


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(0, np.pi, exclude_max=True), s=st.floats(-7, 7),
       rows=st.integers(1, 9), cols=st.integers(1, 9), h=st.sampled_from([0.25, 1.0, 1.7]))
def test_chord_property_random_rays(theta, s, rows, cols, h):
    g = ImageGrid(rows, cols, h)
    idx, lengths = ray_intersections(g, theta, s * h)
    assert np.all(lengths > 0)
    assert np.all(np.diff(idx) > 0)
    assert np.all(lengths <= h * np.hypot(rows, cols) + 1e-12)
    expected = clip_chord(theta, s * h, rows * h / 2, cols * h / 2)
    assert lengths.sum() == pytest.approx(expected, abs=1e-10 * max(1.0, h))


def test_operator_invariants():
    g = ImageGrid(8, 8, 1.0)
    A = build_projector(g, ProjectionGeometry.parallel_beam(g, 7))
    m = A.matrix
    assert np.all(m.data > 0)
    for r in range(m.shape[0]):
        cols = m.indices[m.indptr[r]:m.indptr[r + 1]]
        assert np.all(np.diff(cols) > 0)


def test_apply_matches_dense(rng):
    g = ImageGrid(8, 8, 1.0)
    A = build_projector(g, ProjectionGeometry.parallel_beam(g, 6))
    x = rng.standard_normal(64)
    assert np.allclose(apply(A, x), A.todense() @ x, atol=1e-12)
    assert np.all(apply(A, np.zeros(64)) == 0)
    e = np.zeros(64)
    e[10] = 1.0
    assert np.allclose(apply(A, e), A.todense()[:, 10])
    r = np.zeros(A.n_rays)
    r[5] = 1.0
    assert np.allclose(apply_adjoint(A, r), A.todense()[5])
    with pytest.raises(ValueError):
        apply(A, np.zeros(63))
    with pytest.raises(ValueError):
        apply_adjoint(A, np.zeros(A.n_rays + 1))


def test_adjoint_identity(rng):
    g = ImageGrid(16, 12, 0.3)
    A = build_projector(g, ProjectionGeometry.parallel_beam(g, 9))
    for _ in range(20):
        x = rng.standard_normal(A.n_pixels)
        r = rng.standard_normal(A.n_rays)
        lhs = apply(A, x) @ r
        assert abs(lhs - x @ apply_adjoint(A, r)) <= 1e-10 * (1 + abs(lhs))


def test_disk_phantom_sinogram_columns_agree():
    # a pixelated disk is symmetric under quarter turns and diagonal flips
    n = 32
    g = ImageGrid(n, n, 1.0)
    c = np.arange(n) - (n - 1) / 2
    U, V = np.meshgrid(c, c, indexing="ij")
    disk = (U**2 + V**2 <= 12**2).astype(float)
    angles = np.arange(4) * np.pi / 4
    geom = ProjectionGeometry(angles, np.linspace(-20.5, 20.5, 42))
    y = apply(build_projector(g, geom), disk).reshape(4, -1)
    assert np.allclose(y[0], y[2], atol=1e-8)
    assert np.allclose(y[1], y[3], atol=1e-8)
    assert np.allclose(y[0], y[0][::-1], atol=1e-8)


def test_noise_sigma_rule():
    g = ImageGrid(4, 4, 1.0, np.ones(16))
    A = build_projector(g, ProjectionGeometry.parallel_beam(g, 3))
    clean = apply(A, g.values)
    sino = simulate_sinogram(g, A, 0.015, seed=1)
    assert sino.noise_sigma == 0.015 * clean.max()
    again = simulate_sinogram(g, A, 0.015, seed=1)
    assert sino.values.tobytes() == again.values.tobytes()
    with pytest.raises(ValueError):
        simulate_sinogram(g.with_values(np.zeros(16)), A, 0.015, seed=1)


def test_noise_sigma_max_line_integral_ten():
    g = ImageGrid(1, 1, 10.0, np.ones(1))
    A = build_projector(g, ProjectionGeometry(np.array([0.0]), np.array([0.0])))
    assert apply(A, g.values).max() == pytest.approx(10.0)
    assert simulate_sinogram(g, A, 0.015, 0).noise_sigma == pytest.approx(0.15)


def test_noise_std_monte_carlo():
    g = ImageGrid(1, 1, 1.0, np.ones(1))
    A = build_projector(g, ProjectionGeometry(np.array([0.0]), np.array([0.0])))
    draws = np.array([simulate_sinogram(g, A, 0.1, seed).values[0] for seed in range(100_000)])
    assert np.std(draws - 1.0) == pytest.approx(0.1, rel=0.02)


def test_likelihood_values(rng):
    g = ImageGrid(5, 5, 1.0)
    A = build_projector(g, ProjectionGeometry.parallel_beam(g, 4))
    x = rng.standard_normal(25)
    y = Sinogram(apply(A, x), 0.3, "")
    assert likelihood_neglog(A, y, x) == 0.0
    assert np.all(likelihood_grad(A, y, x) == 0)
    u = rng.standard_normal(A.n_rays)
    u *= np.sqrt(A.n_rays) / np.linalg.norm(u)
    y2 = Sinogram(apply(A, x) + 0.3 * u, 0.3, "")
    assert likelihood_neglog(A, y2, x) == pytest.approx(A.n_rays / 2)


def test_likelihood_gradient_fd(rng):
    g = ImageGrid(5, 5, 1.0)
    A = build_projector(g, ProjectionGeometry.parallel_beam(g, 4))
    y = Sinogram(rng.standard_normal(A.n_rays), 0.7, "")
    x = rng.standard_normal(25)
    fd = np.array([(likelihood_neglog(A, y, x + 1e-5 * e) - likelihood_neglog(A, y, x - 1e-5 * e)) / 2e-5
                   for e in np.eye(25)])
    gr = likelihood_grad(A, y, x)
    assert np.linalg.norm(fd - gr) / np.linalg.norm(gr) < 1e-6


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.01, 0.99), seed=st.integers(0, 10_000))
def test_likelihood_convex(t, seed):
    rng = np.random.default_rng(seed)
    g = ImageGrid(4, 4, 1.0)
    A = build_projector(g, ProjectionGeometry.parallel_beam(g, 3))
    y = Sinogram(rng.standard_normal(A.n_rays), 0.5, "")
    a, b = rng.standard_normal((2, 16))
    f = lambda v: likelihood_neglog(A, y, v)
    assert f(t * a + (1 - t) * b) <= t * f(a) + (1 - t) * f(b) + 1e-10
