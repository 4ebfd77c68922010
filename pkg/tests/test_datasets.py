import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from feataug.analysis import fit_sinusoid
from feataug.datasets import (BoundarySpec, CsvParseError, CsvSchema, SequenceSample,
                              SinusoidSpec, fit_global_norm, gen_boundary_dataset, gen_sinusoids,
                              load_csv_sequences, normalize_global, normalize_local,
                              points_to_samples, reverse_sequence, write_csv_sequences)
from feataug.tensor import InsufficientDataError, ParameterError, RandomStream


def test_degenerate_sinusoid_is_analytic():
    spec = SinusoidSpec(amplitude=(1.0, 1.0), frequency=(0.05, 0.05), phase=(0.3, 0.3),
                        length=40, count=2)
    for s in gen_sinusoids(spec, RandomStream(0)):
        expect = [math.sin(2 * math.pi * 0.05 * t + 0.3) for t in range(40)]
        np.testing.assert_allclose(s.values[:, 0], expect, rtol=0, atol=1e-15)


def test_sinusoids_bounded_and_deterministic():
    spec = SinusoidSpec(count=50)
    a = gen_sinusoids(spec, RandomStream(3))
    b = gen_sinusoids(spec, RandomStream(3))
    for s, t in zip(a, b):
        assert np.array_equal(s.values, t.values)
        assert np.max(np.abs(s.values)) <= s.meta["amplitude"] <= 2.0
        assert s.values.shape == (100, 1)


def test_sinusoid_fit_recovers_parameters():
    s = gen_sinusoids(SinusoidSpec(count=3), RandomStream(5))
    for sample in s:
        fit = fit_sinusoid(sample.values[:, 0], offset=False)
        assert fit.residual < 1e-9
        assert fit.amplitude == pytest.approx(sample.meta["amplitude"], abs=1e-9)
        assert fit.frequency == pytest.approx(sample.meta["frequency"], abs=1e-9)
        dphi = (fit.phase - sample.meta["phase"] + math.pi) % (2 * math.pi) - math.pi
        assert abs(dphi) < 1e-8


def test_sinusoid_spec_errors():
    with pytest.raises(ParameterError):
        gen_sinusoids(SinusoidSpec(amplitude=(2.0, 1.0)), RandomStream(0))
    with pytest.raises(ParameterError):
        gen_sinusoids(SinusoidSpec(length=1), RandomStream(0))


def test_linear_noise_free_is_separated():
    X, y = gen_boundary_dataset(BoundarySpec("linear", 300, 0.0), RandomStream(1))
    side = X @ np.array([1.0, 1.0]) / math.sqrt(2)
    assert np.all(side[y == 0] < 0) and np.all(side[y == 1] > 0)


def test_circles_noise_free_radii_ordered():
    X, y = gen_boundary_dataset(BoundarySpec("circles", 300, 0.0), RandomStream(1))
    r = np.linalg.norm(X, axis=1)
    assert r[y == 0].max() < r[y == 1].min()


def test_spirals_learnable_by_1nn():
    Xr, yr = gen_boundary_dataset(BoundarySpec("spirals", 3000), RandomStream(1))
    Xt, yt = gen_boundary_dataset(BoundarySpec("spirals", 500), RandomStream(2))
    d = ((Xt[:, None] - Xr[None]) ** 2).sum(-1)
    assert np.mean(yr[d.argmin(1)] != yt) < 0.05


def test_spirals_not_linearly_separable():
    X, y = gen_boundary_dataset(BoundarySpec("spirals", 500), RandomStream(1))
    A = np.column_stack([X, np.ones(len(X))])
    w, *_ = np.linalg.lstsq(A, 2.0 * y - 1.0, rcond=None)
    assert np.mean((A @ w > 0) != y) > 0.2


def test_boundary_spec_errors():
    for spec in [BoundarySpec("moons"), BoundarySpec(samples_per_class=0), BoundarySpec(noise_std=-1)]:
        with pytest.raises(ParameterError):
            gen_boundary_dataset(spec, RandomStream(0))


def test_points_become_length_one_sequences():
    X, y = gen_boundary_dataset(BoundarySpec("circles", 5), RandomStream(0))
    samples = points_to_samples(X, y)
    assert all(s.values.shape == (1, 2) for s in samples)
    assert [s.label for s in samples] == y.tolist()


def test_normalize_local_examples():
    assert np.all(normalize_local(SequenceSample(np.full((5, 2), 3.5))).values == 0)
    s = SequenceSample(np.random.default_rng(0).normal(size=(30, 3)) + 7)
    out = normalize_local(s).values
    assert np.max(np.abs(out.mean(axis=0))) < 1e-12


@settings(max_examples=200)
@given(arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 3)),
              elements=st.floats(-1e6, 1e6)))
def test_normalize_local_idempotent(v):
    once = normalize_local(SequenceSample(v))
    assert np.array_equal(normalize_local(once).values, once.values)


def test_normalize_global_pooled_stats():
    rng = np.random.default_rng(1)
    samples = [SequenceSample(rng.normal(3.0, 2.0, size=(rng.integers(2, 20), 2))) for _ in range(30)]
    out, norm = normalize_global(samples)
    pooled = np.concatenate([s.values for s in out])
    np.testing.assert_allclose(pooled.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(pooled.std(axis=0), 1.0, atol=1e-9)
    # naive pooled oracle
    raw = [row for s in samples for row in s.values.tolist()]
    for j in range(2):
        col = [r[j] for r in raw]
        m = sum(col) / len(col)
        sd = math.sqrt(sum((c - m) ** 2 for c in col) / len(col))
        assert abs(norm.mean[j] - m) < 1e-12 and abs(norm.std[j] - sd) < 1e-12


def test_global_norm_reused_on_test():
    rng = np.random.default_rng(2)
    train = [SequenceSample(rng.normal(size=(5, 1))) for _ in range(4)]
    test = [SequenceSample(rng.normal(size=(5, 1)) + 10)]
    _, norm = normalize_global(train)
    out = norm.apply(test)[0].values
    np.testing.assert_array_equal(out, (test[0].values - norm.mean) / norm.std)
    np.testing.assert_allclose(norm.invert(out), test[0].values, atol=1e-12)


def test_global_norm_zero_variance(caplog):
    samples = [SequenceSample(np.column_stack([np.arange(3.0), np.full(3, 2.0)])) for _ in range(2)]
    with caplog.at_level(logging.WARNING):
        out, norm = normalize_global(samples)
    assert norm.std[1] == 1.0
    assert np.all(out[0].values[:, 1] == 0.0)
    assert "zero variance" in caplog.text
    with pytest.raises(InsufficientDataError):
        fit_global_norm(samples[:1])


def test_reverse_sequence():
    v = np.random.default_rng(0).normal(size=(6, 2))
    s = SequenceSample(v)
    r = reverse_sequence(s)
    assert np.array_equal(r.values[0], v[-1])
    assert np.array_equal(reverse_sequence(r).values, v)
    one = SequenceSample(v[:1])
    assert np.array_equal(reverse_sequence(one).values, one.values)


def _samples():
    rng = np.random.default_rng(3)
    return [SequenceSample(rng.normal(size=(rng.integers(1, 8), 3)) * 10 ** rng.uniform(-5, 5),
                           label=int(rng.integers(0, 4)), id=i) for i in range(12)]


def test_csv_round_trip_is_exact(tmp_path):
    samples = _samples()
    write_csv_sequences(samples, tmp_path / "s.csv")
    back = load_csv_sequences(tmp_path / "s.csv")
    assert len(back) == len(samples)
    for a, b in zip(samples, back):
        assert a.id == b.id and a.label == b.label
        assert np.array_equal(a.values, b.values)


def test_csv_shuffled_rows(tmp_path):
    samples = _samples()
    path = tmp_path / "s.csv"
    write_csv_sequences(samples, path)
    lines = path.read_text().splitlines()
    body = lines[1:]
    np.random.default_rng(0).shuffle(body)
    path.write_text("\n".join([lines[0]] + body) + "\n")
    for a, b in zip(samples, load_csv_sequences(path)):
        assert np.array_equal(a.values, b.values)


def test_csv_unlabeled_schema(tmp_path):
    samples = [SequenceSample(np.ones((2, 1)), None, 0)]
    schema = CsvSchema(label_col=None)
    write_csv_sequences(samples, tmp_path / "u.csv", schema)
    assert load_csv_sequences(tmp_path / "u.csv", schema)[0].label is None


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("seq_id,t,label,f0\n", 2),
    ("seq_id,t,label,f0\n0,0,1,0.5\n0,2,1,0.7\n", 3),
    ("seq_id,t,label,f0\n0,0,1,0.5\n0,1,1,abc\n", 3),
    ("seq_id,t,label,f0\n0,0,1,0.5\n0,1\n", 3),
    ("seq_id,t,label,f0\n0,0,1,0.5\n0,1,2,0.5\n", 3),
    ("seq_id,t,f0\n0,0,0.5\n", 1),
])
def test_csv_errors_carry_line_numbers(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(CsvParseError) as err:
        load_csv_sequences(path)
    assert err.value.line == line


def test_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv_sequences(tmp_path / "nope.csv")


def test_sample_validation():
    with pytest.raises(ParameterError):
        SequenceSample(np.zeros((0, 2)))
    with pytest.raises(ParameterError):
        SequenceSample(np.array([[np.nan]]))
