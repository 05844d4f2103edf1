import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqtorus.torus import (
    Field,
    SpectralField,
    TestFunction,
    TorusGrid,
    besov_norm,
    from_spectral,
    l2_norm,
    load_field,
    pairing,
    save_field,
    to_spectral,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(3, 16)
    with pytest.raises(ValueError):
        TorusGrid(1, 48)
    with pytest.raises(ValueError):
        TorusGrid(1, 4)
    g = TorusGrid(2, 16)
    assert g.spacing == 1 / 16 and g.size == 256 and g.shape == (16, 16)
    x, y = g.coordinates()
    assert x.min() == -0.5 and x.max() == 0.5 - 1 / 16


def test_field_invariants():
    g = TorusGrid(1, 8)
    with pytest.raises(ValueError):
        Field(g, np.zeros(7))
    with pytest.raises(ValueError):
        Field(g, np.full(8, np.nan))
    f = Field.constant(g, 2.0)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    assert pairing(f, Field.constant(g, 1.0)) == f.mean() == 2.0


def test_constant_and_cosine_modes():
    g = TorusGrid(1, 32)
    F = to_spectral(Field.constant(g, 3.5))
    assert F.mode(0) == pytest.approx(3.5)
    assert np.allclose(np.delete(F.modes, 0), 0, atol=1e-14)
    F = to_spectral(Field.from_function(g, lambda x: np.cos(2 * np.pi * x)))
    assert abs(F.mode(1)) == pytest.approx(0.5) and abs(F.mode(-1)) == pytest.approx(0.5)
    # coefficient of exp(2 pi i x) for cos is exactly 1/2 with the [-1/2, 1/2) origin
    assert F.mode(1) == pytest.approx(0.5)
    F = to_spectral(Field.from_function(g, lambda x: np.sin(2 * np.pi * 3 * x)))
    assert F.mode(3) == pytest.approx(-0.5j)


@pytest.mark.parametrize("dim,n", [(1, 64), (2, 32)])
def test_round_trip_parseval_hermitian(dim, n):
    g = TorusGrid(dim, n)
    rng = np.random.default_rng(3)
    f = Field(g, rng.standard_normal(g.shape))
    F = to_spectral(f)
    back = from_spectral(F)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12
    assert np.sum(np.abs(F.modes) ** 2) == pytest.approx(l2_norm(f) ** 2, rel=1e-10)
    flip = F.modes[np.ix_(*[-np.arange(n) % n] * dim)]
    assert np.allclose(flip, np.conj(F.modes), atol=1e-14)


def test_pairing_examples():
    g = TorusGrid(1, 64)
    one = Field.constant(g, 1.0)
    c = Field.from_function(g, lambda x: np.cos(2 * np.pi * x))
    assert pairing(one, one) == 1.0
    assert pairing(c, c) == pytest.approx(0.5, abs=1e-14)
    assert pairing(c, Field.constant(g, 0.0)) == 0.0
    with pytest.raises(ValueError):
        pairing(Field.constant(TorusGrid(1, 32), 1.0), one)


def test_pairing_batched_matches_loop():
    g = TorusGrid(2, 16)
    rng = np.random.default_rng(0)
    batch = rng.standard_normal((3, 4) + g.shape)
    phi = TestFunction.mode(g, [1, 2])
    got = pairing(batch, phi)
    ref = np.array([[pairing(Field(g, batch[i, j]), phi) for j in range(4)] for i in range(3)])
    assert np.allclose(got, ref, rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**31))
def test_pairing_bilinear(a, b, seed):
    rng = np.random.default_rng(seed)
    f1, f2, phi = (rng.standard_normal(16) for _ in range(3))
    lhs = pairing(a * f1 + b * f2, phi)
    rhs = a * pairing(f1, phi) + b * pairing(f2, phi)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(a) + abs(b)) * 16


def test_test_function_modes_unit_norm():
    g = TorusGrid(2, 32)
    for k, kind in [([0, 0], "cos"), ([1, 0], "cos"), ([2, 1], "sin")]:
        phi = TestFunction.mode(g, k, kind)
        assert l2_norm(phi) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        TestFunction.mode(g, [0, 0], "sin")


def test_besov_examples():
    g = TorusGrid(1, 64)
    assert besov_norm(Field.constant(g, -2.5), -0.3) == pytest.approx(2.5)
    f = Field.from_function(g, lambda x: np.cos(2 * np.pi * 8 * x))
    # |k| = 8 lies in block j = 4 (8 <= |k| < 16): 2^{-4} * sup|cos| = 1/16
    assert besov_norm(f, -1.0) == pytest.approx(1 / 16)
    with pytest.raises(ValueError):
        besov_norm(f, 1.5)


def test_besov_monotone_in_alpha():
    g = TorusGrid(2, 32)
    f = Field(g, np.random.default_rng(1).standard_normal(g.shape))
    alphas = np.linspace(-2.9, 0.9, 12)
    vals = [besov_norm(f, a) for a in alphas]
    # 2^{j alpha} grows with alpha for j >= 0
    assert all(v1 <= v2 + 1e-15 for v1, v2 in zip(vals, vals[1:]))


def test_besov_white_noise_refinement():
    rng = np.random.default_rng(7)
    vals = []
    for n in (64, 128, 256):
        g = TorusGrid(1, n)
        # lattice white noise has site variance 1/h = n
        samples = rng.standard_normal((200, n)) * np.sqrt(n)
        vals.append(np.mean(besov_norm(samples, -0.6, g)))
    assert max(vals) / min(vals) < 2.0


def test_besov_batched_matches_single():
    g = TorusGrid(1, 32)
    arr = np.random.default_rng(2).standard_normal((5, 32))
    batch = besov_norm(arr, -0.5, g)
    single = [besov_norm(Field(g, a), -0.5) for a in arr]
    assert np.allclose(batch, single, rtol=1e-14)


@pytest.mark.parametrize("suffix", [".csv", ".bin"])
def test_field_io_round_trip(tmp_path, suffix):
    g = TorusGrid(2, 16)
    f = Field(g, np.random.default_rng(4).standard_normal(g.shape) * 1e3)
    path = tmp_path / ("f" + suffix)
    save_field(path, f)
    back = load_field(path)
    assert back.grid.dim == 2 and back.grid.n == 16
    assert np.array_equal(back.values, f.values)
    first = path.read_bytes().split(b"\n", 1)[0]
    assert first == b'{"dim": 2, "n": 16}'


def test_spectral_field_mode_lookup():
    g = TorusGrid(2, 8)
    modes = np.zeros(g.shape, complex)
    modes[1, 7] = 2 + 1j
    assert SpectralField(g, modes).mode((1, -1)) == 2 + 1j
