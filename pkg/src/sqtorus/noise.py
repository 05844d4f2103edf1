"""Spatial noise covariances ``(1 - Laplacian)^beta`` and the free field they induce."""

from dataclasses import dataclass

import numpy as np

from .torus import Field, TorusGrid, _values


@dataclass(frozen=True)
class NoiseSpec:
    """Noise with spatial covariance ``(1 - Laplacian)^beta``; ``beta = 0`` is white."""

    beta: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if self.beta > 0:
            raise ValueError(f"beta must be <= 0, got {self.beta}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")

    @property
    def rho(self):
        return 2 - self.dim - 2 * self.beta

    def to_dict(self):
        return {"beta": self.beta, "dim": self.dim}


@dataclass(frozen=True)
class RenormConstant:
    grid: TorusGrid
    noise: NoiseSpec
    sigma2: float

    def __float__(self):
        return float(self.sigma2)


def covariance_multiplier(noise, k):
    """``(1 + 4 pi^2 |k|^2)^beta`` for a frequency vector (or stack of them)."""
    k = np.asarray(k, dtype=float)
    k2 = np.sum(k**2, axis=0) if k.ndim else k**2
    return (1.0 + 4.0 * np.pi**2 * k2) ** noise.beta


def _check_dims(noise, grid):
    if noise.dim != grid.dim:
        raise ValueError(f"noise dim {noise.dim} does not match grid dim {grid.dim}")


def noise_multipliers(noise, grid, real=False):
    """Covariance multipliers on the grid modes, ``(1 + lambda_k)^beta``.

    On spectral grids this equals :func:`covariance_multiplier`; on
    finite-difference grids the lattice symbol replaces ``4 pi^2 |k|^2``.
    """
    _check_dims(noise, grid)
    return (1.0 + grid.symbol(real=real)) ** noise.beta


def gff_multipliers(noise, grid, real=False):
    """Per-mode variance ``E|Phi_hat(k)|^2`` of the free field ``nu``."""
    return noise_multipliers(noise, grid, real) / (1.0 + grid.symbol(real=real))


def sigma2_renorm(noise, grid):
    """Point variance of the grid-truncated free field, the Wick constant."""
    s2 = float(np.sum(gff_multipliers(noise, grid)))
    return RenormConstant(grid, noise, s2)


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def white_modes(grid, rng, batch=()):
    """Real-FFT modes of lattice white noise with ``E|w_hat(k)|^2 = 1``."""
    w = rng.standard_normal(tuple(batch) + grid.shape)
    return grid.rfft(w) * np.sqrt(grid.size)


def sample_gff(noise, grid, seed=None, size=None):
    """Draw ``Phi ~ nu`` on the grid.

    Returns a :class:`Field`, or an array of shape ``(size, *grid.shape)`` when
    ``size`` is given.  ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = as_rng(seed)
    batch = () if size is None else (size,)
    modes = white_modes(grid, rng, batch) * np.sqrt(gff_multipliers(noise, grid, real=True))
    values = grid.irfft(modes)
    return Field(grid, values) if size is None else values


def noise_pairing(noise, phi, psi, grid=None):
    """``<Cov_xi * phi, psi>`` computed mode by mode."""
    grid = grid or phi.grid
    mult = noise_multipliers(noise, grid, real=True) * grid.rfft_weights()
    a = grid.rfft(_values(phi))
    b = grid.rfft(_values(psi))
    return float(np.sum(mult * (a * np.conj(b)).real))
