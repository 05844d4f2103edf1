"""Periodic grids on the unit torus, lattice fields and their spectral form.

The torus is identified with ``[-1/2, 1/2)^d`` and sampled on ``n`` points per
axis.  Fourier coefficients are normalised so that
``f(x) = sum_k f_hat(k) exp(2 pi i k.x)``; the quadrature ``L^2`` norm then
equals ``sum |f_hat|^2`` (Parseval).
"""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

LAPLACIANS = ("spectral", "fd")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid with ``n`` points per axis on ``T^dim``.

    ``laplacian`` selects the discrete Laplacian used by the dynamics and the
    diagnostics: ``"spectral"`` has symbol ``4 pi^2 |k|^2``, ``"fd"`` is the
    nearest-neighbour finite difference with symbol ``sum_i (2n sin(pi k_i/n))^2``.
    """

    dim: int
    n: int
    laplacian: str = "spectral"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if self.laplacian not in LAPLACIANS:
            raise ValueError(f"unknown laplacian {self.laplacian!r}")

    @property
    def spacing(self):
        return 1.0 / self.n

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def size(self):
        return self.n**self.dim

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    def coordinates(self):
        """Site coordinates, one array per axis, each of shape ``self.shape``."""
        x = -0.5 + np.arange(self.n) / self.n
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    @cached_property
    def wavenumbers(self):
        """Integer frequencies in numpy FFT order, shape ``(dim,) + shape``."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(int)
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def rwavenumbers(self):
        """Integer frequencies for the real-FFT layout (last axis halved)."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(int)
        kr = np.arange(self.n // 2 + 1)
        axes = [k] * (self.dim - 1) + [kr]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def symbol(self, real=False):
        """Eigenvalues of ``-Laplacian`` on the Fourier modes."""
        k = self.rwavenumbers if real else self.wavenumbers
        if self.laplacian == "spectral":
            return 4.0 * np.pi**2 * np.sum(k.astype(float) ** 2, axis=0)
        return np.sum((2.0 * self.n * np.sin(np.pi * k / self.n)) ** 2, axis=0)

    def rfft_weights(self):
        """Multiplicity of each real-FFT mode in the full spectrum."""
        w = np.full(self.rwavenumbers.shape[1:], 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    def rfft(self, values):
        return sfft.rfftn(values, axes=self.axes, norm="forward")

    def irfft(self, modes):
        return sfft.irfftn(modes, s=self.shape, axes=self.axes, norm="forward")


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Field:
    """Real lattice function; ``values`` has shape ``grid.shape``."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.shape != self.grid.shape:
            raise ValueError(f"values shape {arr.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(*grid.coordinates()))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    def mean(self):
        return float(self.values.mean())

    def __add__(self, other):
        _same_grid(self.grid, other.grid)
        return Field(self.grid, self.values + other.values)


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a real field, numpy FFT ordering."""

    grid: TorusGrid
    modes: np.ndarray

    def wavenumbers(self):
        return self.grid.wavenumbers

    def mode(self, k):
        """Coefficient at integer frequency ``k`` (int or tuple)."""
        k = (k,) if np.isscalar(k) else tuple(k)
        return complex(self.modes[tuple(ki % self.grid.n for ki in k)])


@dataclass(frozen=True)
class TestFunction:
    """Smooth band-limited test function with a label and normalisation record."""

    __test__ = False

    field: Field
    label: str = ""
    normalisation: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.field.grid

    @property
    def values(self):
        return self.field.values

    @classmethod
    def mode(cls, grid, k, kind="cos"):
        """``sqrt(2) cos(2 pi k.x)`` (or sin); the constant 1 for ``k = 0``.

        These have unit quadrature ``L^2`` norm.
        """
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if k.size != grid.dim:
            raise ValueError("wavevector dimension does not match grid")
        phase = 2.0 * np.pi * sum(ki * xi for ki, xi in zip(k, grid.coordinates()))
        if not np.any(k):
            if kind != "cos":
                raise ValueError("k = 0 has no sine mode")
            vals, label = np.ones(grid.shape), "const"
        else:
            trig = np.cos if kind == "cos" else np.sin
            vals = np.sqrt(2.0) * trig(phase)
            label = f"{kind}{tuple(int(x) for x in k)}"
        return cls(Field(grid, vals), label)

    def scaled(self, factor, **record):
        return TestFunction(Field(self.grid, factor * self.values), self.label, dict(record))


def _same_grid(g1, g2):
    if g1.dim != g2.dim or g1.n != g2.n:
        raise ValueError(f"grid mismatch: {g1} vs {g2}")


def to_spectral(f):
    """Forward transform; ``modes[k]`` is the coefficient of ``exp(2 pi i k.x)``."""
    g = f.grid
    raw = sfft.fftn(f.values, norm="forward")
    # coordinates start at -1/2, so every mode picks up (-1)^{sum k}
    sign = (-1.0) ** np.sum(g.wavenumbers, axis=0)
    return SpectralField(g, raw * sign)


def from_spectral(F):
    g = F.grid
    sign = (-1.0) ** np.sum(g.wavenumbers, axis=0)
    return Field(g, sfft.ifftn(F.modes * sign, norm="forward").real)


def _values(obj):
    return obj.values if hasattr(obj, "values") else np.asarray(obj, dtype=float)


def pairing(f, phi):
    """Quadrature pairing ``n^{-d} sum_x f(x) phi(x)``.

    ``f`` may carry leading batch axes (an array of shape ``(..., *grid.shape)``).
    """
    fv, pv = _values(f), _values(phi)
    if hasattr(f, "grid") and hasattr(phi, "grid"):
        _same_grid(f.grid, phi.grid)
    if fv.shape[fv.ndim - pv.ndim:] != pv.shape:
        raise ValueError(f"grid mismatch: {fv.shape} vs {pv.shape}")
    axes = tuple(range(fv.ndim - pv.ndim, fv.ndim))
    out = np.mean(fv * pv, axis=axes)
    return float(out) if np.ndim(out) == 0 else out


def l2_norm(f):
    v = _values(f)
    return float(np.sqrt(np.mean(v**2)))


def _block_index(grid):
    kabs = np.sqrt(np.sum(grid.wavenumbers.astype(float) ** 2, axis=0))
    j = np.zeros(kabs.shape, dtype=int)
    nz = kabs >= 1
    # 2^{j-1} <= |k| < 2^j; the small offset guards exact powers of two
    j[nz] = np.floor(np.log2(kabs[nz]) + 1e-12).astype(int) + 1
    return j


def besov_norm(f, alpha, grid=None):
    """Littlewood-Paley estimate ``max_j 2^{j alpha} ||Delta_j f||_inf``.

    Block 0 holds only ``k = 0``; block ``j >= 1`` holds ``2^{j-1} <= |k| < 2^j``
    (Euclidean ``|k|``), truncated at the grid Nyquist frequency.  Accepts a
    :class:`Field` or an array with leading batch axes plus ``grid``.
    """
    if not -3.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (-3, 1), got {alpha}")
    grid = grid or f.grid
    v = _values(f)
    axes = grid.axes
    fh = sfft.fftn(v, axes=axes, norm="forward")
    blocks = _block_index(grid)
    best = np.zeros(v.shape[: v.ndim - grid.dim])
    for j in range(blocks.max() + 1):
        mask = blocks == j
        if not mask.any():
            continue
        part = sfft.ifftn(fh * mask, axes=axes, norm="forward").real
        sup = np.max(np.abs(part), axis=axes)
        best = np.maximum(best, 2.0 ** (j * alpha) * sup)
    return float(best) if best.ndim == 0 else best


def save_field(path, f):
    """Write ``f`` as CSV (``.csv``) or flat little-endian float64 binary.

    Both formats start with a one-line JSON header ``{"dim": .., "n": ..}``.
    CSV values are written with 17 significant digits, which round-trips exactly.
    """
    path = Path(path)
    header = json.dumps({"dim": f.grid.dim, "n": f.grid.n})
    flat = f.values.reshape(-1)
    if path.suffix == ".csv":
        lines = [header] + ["%.17g" % x for x in flat]
        path.write_text("\n".join(lines) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(header.encode() + b"\n")
            fh.write(flat.astype("<f8").tobytes())


def load_field(path, laplacian="spectral"):
    path = Path(path)
    if path.suffix == ".csv":
        lines = path.read_text().splitlines()
        meta = json.loads(lines[0])
        flat = np.array([float(s) for s in lines[1:] if s.strip()])
    else:
        raw = path.read_bytes()
        cut = raw.index(b"\n")
        meta = json.loads(raw[:cut])
        flat = np.frombuffer(raw[cut + 1:], dtype="<f8")
    grid = TorusGrid(meta["dim"], meta["n"], laplacian)
    return Field(grid, flat.reshape(grid.shape))
