import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gplaplace.data import (
    GENERATORS, SIZE_PRESETS, GeneratorSpec, linear_benchmark_dataset, load_csv, normalize,
    sample_from_gp_prior, write_csv,
)
from gplaplace.errors import DataError
from gplaplace.kernels import gram, inv_softplus
from gplaplace.kernels import parse_kernel
from gplaplace.model import Dataset


def test_linear_benchmark():
    d = linear_benchmark_dataset()
    assert d.n == 10
    assert d.y[6] == 1.3649612419355
    np.testing.assert_allclose(np.diff(d.x), 1 / 9, atol=1e-15)
    assert d.x[0] == 0.0 and d.x[-1] == 1.0


@pytest.mark.parametrize("kernel", GENERATORS)
def test_generation_is_deterministic(kernel):
    a = sample_from_gp_prior(GeneratorSpec(kernel, 5, seed=11))
    b = sample_from_gp_prior(GeneratorSpec(kernel, 5, seed=11))
    c = sample_from_gp_prior(GeneratorSpec(kernel, 5, seed=12))
    assert a == b and a != c
    np.testing.assert_allclose(a.x, np.linspace(-2.5, 2.5, 5))


def test_lin_generator_covariance():
    spec = GeneratorSpec("LIN", 6, seed=0)
    x = np.array([0.7, 2.0])
    draws = sample_from_gp_prior(spec, x=x, size=20_000)
    emp = np.cov(draws.T)
    var = np.log(2.0)  # softplus(0)
    K = var * np.outer(x, x) + var * np.eye(2)
    np.testing.assert_allclose(emp, K, rtol=0.05)


def test_coincident_inputs_fully_correlated():
    spec = GeneratorSpec("SE", 2, seed=0)
    draws = sample_from_gp_prior(spec, x=[0.3, 0.3], size=20_000)
    # unscaled SE: shared signal variance 1, independent noise variance log 2
    assert np.corrcoef(draws.T)[0, 1] == pytest.approx(1 / (1 + np.log(2)), abs=0.02)
    K = gram(parse_kernel("SE"), np.zeros(2), [0.3, 0.3])
    assert np.all(K == K[0, 0])


def test_generator_spec_errors():
    with pytest.raises(DataError):
        GeneratorSpec("PER", 5)
    with pytest.raises(DataError):
        GeneratorSpec("SE", 1)
    with pytest.raises(DataError):
        GeneratorSpec("SE", 5, low=1.0, high=1.0)
    assert SIZE_PRESETS == (5, 10, 20, 30, 40, 50, 100, 200)


def test_normalize_examples():
    d, t = normalize(Dataset([0, 1], [0, 2]))
    np.testing.assert_allclose(d.y, [-1, 1])
    assert (t.mean, t.std) == (1.0, 1.0)
    np.testing.assert_allclose(t.invert(d.y), [0, 2])
    with pytest.raises(DataError):
        normalize(Dataset([0, 1], [3, 3]))


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30).filter(lambda v: np.std(v) > 1e-3))
def test_normalize_properties(ys):
    d, _ = normalize(Dataset(np.arange(len(ys)), ys))
    assert abs(np.mean(d.y)) < 1e-12
    assert abs(np.std(d.y) - 1) < 1e-12
    twice, _ = normalize(d)
    np.testing.assert_allclose(twice.y, d.y, atol=1e-12)


def test_load_csv_examples():
    d = load_csv(io.StringIO("x,y\n0,1\n1,2"))
    assert d.n == 2
    d = load_csv(io.StringIO("3,1\n1,2\n2,0\n1,5\n"))
    np.testing.assert_array_equal(d.x, [1, 1, 2, 3])
    np.testing.assert_array_equal(d.y, [2, 5, 0, 1])
    with pytest.raises(DataError, match="line 1"):
        load_csv(io.StringIO("0,abc"))
    with pytest.raises(DataError, match="line 2"):
        load_csv(io.StringIO("t,co2\n0,1\n1\n"))
    with pytest.raises(DataError):
        load_csv(io.StringIO(""))


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=20))
def test_csv_roundtrip(pairs):
    pairs = sorted(pairs, key=lambda p: p[0])
    d = Dataset([p[0] for p in pairs], [p[1] for p in pairs])
    buf = io.StringIO()
    write_csv(d, buf)
    buf.seek(0)
    assert load_csv(buf) == d


def test_csv_file_roundtrip(tmp_path):
    d = sample_from_gp_prior(GeneratorSpec("MAT32", 7, seed=3))
    write_csv(d, tmp_path / "d.csv")
    assert load_csv(tmp_path / "d.csv") == d
