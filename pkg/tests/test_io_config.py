import numpy as np
import pytest

from baytomo import io
from baytomo.config import ConfigError, RunConfig, dump_config, load_config, parse_config, write_lock
from baytomo.geometry import ImageGrid, ProjectionGeometry, Sinogram, build_projector, geometry_digest, simulate_sinogram
from baytomo.volume import stack


def test_image_roundtrip(tmp_path):
    g = ImageGrid(3, 5, 0.25, np.random.default_rng(0).standard_normal(15))
    io.write_image(tmp_path / "img", g)
    back = io.read_image(tmp_path / "img.f64")
    assert back.shape == (3, 5) and back.pixel_size == 0.25
    assert back.values.tobytes() == g.values.tobytes()
    raw = (tmp_path / "img.f64").read_bytes()
    assert raw == g.values.astype("<f8").tobytes()


def test_sinogram_roundtrip_and_digest(tmp_path):
    g = ImageGrid(6, 6, 1.0, np.ones(36))
    geom = ProjectionGeometry.parallel_beam(g, 7)
    A = build_projector(g, geom)
    sino = simulate_sinogram(g, A, 0.01, 3, geometry_digest(g, geom))
    io.write_sinogram(tmp_path / "s", sino, g, geom)
    s2, g2, geom2 = io.read_sinogram(tmp_path / "s")
    assert s2.values.tobytes() == sino.values.tobytes()
    assert s2.noise_sigma == sino.noise_sigma
    assert np.array_equal(geom2.angles, geom.angles) and np.array_equal(geom2.offsets, geom.offsets)
    hdr = (tmp_path / "s.hdr").read_text().replace("n_rows = 6", "n_rows = 7")
    (tmp_path / "s.hdr").write_text(hdr)
    with pytest.raises(ValueError):
        io.read_sinogram(tmp_path / "s")


def test_truncated_data_rejected(tmp_path):
    io.write_image(tmp_path / "img", ImageGrid(2, 2, 1.0, np.ones(4)))
    (tmp_path / "img.f64").write_bytes(b"\0" * 24)
    with pytest.raises(ValueError):
        io.read_image(tmp_path / "img")


def test_volume_and_csv_roundtrip(tmp_path):
    a = ImageGrid(2, 3, 1.0, np.arange(6.0))
    vol = stack([a, a.with_values(np.arange(6.0) * 2)], 0.7)
    io.write_volume(tmp_path / "v", vol)
    back = io.read_volume(tmp_path / "v")
    assert np.array_equal(back.as_array(), vol.as_array()) and back.slice_spacing == 0.7
    io.write_image_csv(tmp_path / "a.csv", a)
    assert np.array_equal(io.read_image_csv(tmp_path / "a.csv").values, a.values)


def test_pgm_mapping(tmp_path):
    img = np.array([[0.0, 1.0], [2.0, -1.0]])
    vmax = io.render_pgm(tmp_path / "a.pgm", img, vmax=2.0)
    assert vmax == 2.0
    assert io.read_pgm(tmp_path / "a.pgm").tolist() == [[0, 128], [255, 0]]


def test_config_defaults_roundtrip():
    cfg = RunConfig()
    again = parse_config(dump_config(cfg))
    assert again == cfg


def test_config_line_precise_errors():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("[run]\nseed = 1\nbogus = 2\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("[geometry]\nn_angles = zero\n")
    with pytest.raises(ConfigError, match="line 4.*name"):
        parse_config("[run]\nseed = 1\n[prior]\nname = laplace\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[extras]\nx = 1\n")
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config("[phantom]\ntruth = /nonexistent/img\n")
    with pytest.raises(ConfigError, match="mwg_samples"):
        parse_config("[mcmc]\nestimator = mwg\nmwg_samples = 0\n")
    with pytest.raises(ConfigError):
        load_config("/nonexistent.ini")


def test_candidates(tmp_path):
    cfg = parse_config("[gridsearch]\ncandidates = 0.1, 1, 10\n")
    assert cfg.candidate_values() == [0.1, 1.0, 10.0]
    cfg = parse_config("[gridsearch]\nlo = 0.01\nhi = 100\nn = 5\n")
    assert cfg.candidate_values() == pytest.approx([0.01, 0.1, 1, 10, 100])
    with pytest.raises(ConfigError):
        parse_config("[gridsearch]\ncandidates = 1, -2\n")


def test_lock_is_loadable(tmp_path):
    cfg = parse_config("[prior]\nname = cauchy\nlam = 0.3\n")
    path = write_lock(cfg, tmp_path)
    assert load_config(path) == cfg
