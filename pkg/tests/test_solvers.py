import math

import numpy as np
import pytest

from gapde.errors import ConfigurationError, StructuralError
from gapde.solvers import (
    Field, ProblemSpec, add_noise, sample_training_data, solve_reference_problem,
    wave_discrete_energy,
)

EXPECTED_SIZES = {"kdv": 102912, "burgers": 51456, "wave": 51681, "chaffee_infante": 60200}


@pytest.mark.parametrize("kind", sorted(EXPECTED_SIZES))
def test_grid_sizes_and_finiteness(fields, kind):
    f = fields(kind)
    assert f.size == EXPECTED_SIZES[kind]
    assert np.all(np.isfinite(f.values))


def test_kdv_dimensions(fields):
    f = fields("kdv")
    assert f.values.shape == (512, 201)
    assert f.t[0] == 0 and f.t[-1] == pytest.approx(1.0)


def test_chaffee_infante_record_times(fields):
    f = fields("chaffee_infante")
    assert f.values.shape == (301, 200)
    assert f.t[-1] == pytest.approx(0.5)
    assert np.allclose(np.diff(f.t), 0.002)


def test_wave_boundaries_zero(fields):
    f = fields("wave")
    assert f.x[-1] == pytest.approx(math.pi)
    assert np.all(f.values[0] == 0) and np.all(f.values[-1] == 0)


def test_wave_energy_conserved():
    spec = ProblemSpec("wave").resolved()
    f = solve_reference_problem(spec)
    dx = f.x[1] - f.x[0]
    dt = f.t[1] - f.t[0]
    u = f.values
    energy = [wave_discrete_energy(u[:, j - 1], u[:, j], dx, dt) for j in range(1, u.shape[1])]
    energy = np.array(energy)
    assert np.max(np.abs(energy - energy[0])) / energy[0] < 0.01


def test_wave_stability_limit():
    with pytest.raises(ConfigurationError):
        ProblemSpec("wave", n_steps=200).validate()
    with pytest.raises(ConfigurationError):
        ProblemSpec("chaffee_infante", n_steps=5000).validate()
    assert ProblemSpec("wave").stability_ratio() == pytest.approx(1.0)


def test_spectral_modes_must_be_power_of_two():
    with pytest.raises(ConfigurationError):
        ProblemSpec("kdv", n_x=500).validate()
    with pytest.raises(ConfigurationError):
        ProblemSpec("heat").resolved()


def test_burgers_conserves_mean(fields):
    # periodic viscous Burgers keeps the spatial mean of u fixed
    f = fields("burgers")
    means = f.values.mean(axis=0)
    assert np.max(np.abs(means - means[0])) < 1e-10


def test_field_round_trip(tmp_path, fields):
    f = fields("wave")
    f.save(tmp_path / "w.bin")
    g = Field.load(tmp_path / "w.bin")
    assert np.array_equal(g.values, f.values) and np.array_equal(g.t, f.t)
    assert g.kind == "wave" and g.coefficients == f.coefficients
    f.to_csv(tmp_path / "w.csv")
    rows = np.loadtxt(tmp_path / "w.csv", delimiter=",", skiprows=1)
    assert np.allclose(rows, f.points())


def test_field_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a field")
    with pytest.raises(StructuralError):
        Field.load(path)


def _small_field():
    x = np.linspace(-1, 1, 9)
    t = np.linspace(0, 1, 5)
    return Field(x, t, np.sin(np.add.outer(x, t)) + 2.0, "kdv", {})


def test_noise_zero_is_identity():
    f = _small_field()
    assert np.array_equal(add_noise(f, 0.0, 3).values, f.values)


def test_noise_band_and_determinism():
    f = _small_field()
    g = add_noise(f, 0.05, 7)
    assert np.all(np.abs(g.values - f.values) <= 0.05 * np.abs(f.values) + 1e-15)
    assert np.array_equal(add_noise(f, 0.1, 11).values, add_noise(f, 0.1, 11).values)
    with pytest.raises(ConfigurationError):
        add_noise(f, -0.1, 0)


def test_sampling_exhaustive_and_single():
    f = _small_field()
    rows = sample_training_data(f, f.size, 0)
    assert sorted(map(tuple, rows)) == sorted(map(tuple, f.points()))
    one = sample_training_data(f, 1, 5)
    assert one.shape == (1, 3)
    assert any(np.array_equal(one[0], p) for p in f.points())
    with pytest.raises(StructuralError):
        sample_training_data(f, f.size + 1, 0)


def test_sampling_distinct_and_uniform():
    f = _small_field()
    n, draws = 10, 4000
    counts = np.zeros(f.size)
    index = {tuple(p): i for i, p in enumerate(f.points())}
    for seed in range(draws):
        rows = sample_training_data(f, n, seed)
        idx = [index[tuple(r)] for r in rows]
        assert len(set(idx)) == n
        counts[idx] += 1
    p = n / f.size
    mean, sd = draws * p, math.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - mean) <= 3 * sd)


def test_chaffee_infante_share(fields):
    assert 10000 / fields("chaffee_infante").size == pytest.approx(0.166, abs=5e-4)
