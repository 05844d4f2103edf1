"""Generator identities and Hermite-chaos statistics on recorded chains.

For a test function ``phi`` write ``X = <u, phi>``, ``Y = <:P(u):, phi>`` and
``Z = <u, (Lap - 1) phi>``.  Stationarity of the Langevin dynamic (noise
covariance ``2 Cov_xi``, see :mod:`sqtorus.dynamics`) gives, for every ``k >= 1``,

    E[X^{k-1} (-Y - Z)] = (k - 1) / 2 * q * E[X^{k-2}],   q = <2 Cov_xi * phi, phi>,

and, if the law were Gaussian, ``E[H_k^{s2}(X - EX) Y] = 0`` for ``k >= 2`` with
``s2 = Var X``.
"""

from dataclasses import asdict, dataclass
from math import factorial

import numpy as np

from .hermite import hermite_coeffs, hermite_eval
from .noise import gff_multipliers, noise_pairing
from .stats import batch_labels, jackknife, mean_se
from .torus import TestFunction, _values, pairing
from .dynamics import wick_drift

Z_THRESHOLD = 3.0


@dataclass
class StationarityRecord:
    k: int
    lhs: float
    rhs: float
    residual: float
    stderr: float
    n_samples: int

    @property
    def z(self):
        return self.residual / self.stderr if self.stderr > 0 else 0.0

    def to_dict(self):
        return {**asdict(self), "z": self.z}


@dataclass
class ChaosStatistic:
    k: int
    estimate: float
    stderr: float
    z_score: float
    sigma2_hat: float
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)


class CovarianceOperator:
    """Translation-invariant covariance as Fourier multipliers, or a dense matrix.

    ``multipliers`` are in numpy FFT order; ``(C phi)_hat(k) = C(k) phi_hat(k)``.
    """

    def __init__(self, grid, multipliers=None, matrix=None, errors=None):
        if (multipliers is None) == (matrix is None):
            raise ValueError("give exactly one of multipliers or matrix")
        self.grid = grid
        self.multipliers = multipliers
        self.matrix = matrix
        self.errors = errors

    @classmethod
    def analytic(cls, noise, grid):
        return cls(grid, multipliers=gff_multipliers(noise, grid))

    @classmethod
    def identity(cls, grid, scale=1.0):
        return cls(grid, multipliers=np.full(grid.shape, float(scale)))

    def apply(self, phi):
        v = _values(phi)
        if self.matrix is not None:
            return (self.matrix @ v.reshape(-1) / self.grid.size).reshape(self.grid.shape)
        return np.fft.ifftn(self.multipliers * np.fft.fftn(v)).real

    def is_symmetric(self):
        if self.matrix is not None:
            return np.allclose(self.matrix, self.matrix.T)
        idx = -np.arange(self.grid.n) % self.grid.n
        flipped = self.multipliers[np.ix_(*[idx] * self.grid.dim)]
        return np.allclose(self.multipliers, flipped)


def apply(C, phi):
    """``C phi`` as an array on the grid."""
    return C.apply(phi)


def drive_pairing(noise, phi, psi=None):
    """``<Q phi, psi>`` for the driving noise covariance ``Q = 2 Cov_xi``."""
    return 2.0 * noise_pairing(noise, phi, phi if psi is None else psi)


def normalised(phi, noise):
    """Rescale ``phi`` so that ``<Cov_xi * phi, phi> = 1``."""
    c = noise_pairing(noise, phi, phi)
    return phi.scaled(1.0 / np.sqrt(c), cov_pairing=1.0, raw_cov_pairing=c)


def default_test_functions(grid, noise, kmax=2):
    """Normalised single low modes: the constant, then cos/sin for ``|k| <= kmax``."""
    out = [normalised(TestFunction.mode(grid, [0] * grid.dim), noise)]
    for m in range(1, kmax + 1):
        for axis in range(grid.dim):
            k = [0] * grid.dim
            k[axis] = m
            for kind in ("cos", "sin"):
                out.append(normalised(TestFunction.mode(grid, k, kind), noise))
    return out


def shifted_laplacian(phi, grid=None):
    """``(Lap - 1) phi`` with the grid's discrete Laplacian."""
    grid = grid or phi.grid
    v = _values(phi)
    return grid.irfft(-(1.0 + grid.symbol(real=True)) * grid.rfft(v))


def generator_value(u0, wick_p, degrees, phis, noise):
    """Generator of ``F(x) = prod_i x_i^{degrees[i]}`` at ``u0``.

    ``sum_i dF_i (<u0, (Lap-1) phi_i> + <:P(u0):, phi_i>)
    + 1/2 sum_ij d2F_ij <Q phi_i, phi_j>`` with ``Q = 2 Cov_xi``.
    """
    degrees = list(degrees)
    if len(degrees) != len(phis):
        raise ValueError("one degree per test function")
    grid = phis[0].grid
    x = np.array([pairing(u0, p) for p in phis])
    drift = np.array([pairing(u0, shifted_laplacian(p, grid)) + pairing(wick_p, p) for p in phis])

    def partial(idx):
        coef, pw = 1.0, np.array(degrees, dtype=float)
        for i in idx:
            coef *= pw[i]
            pw[i] -= 1
        if coef == 0.0:
            return 0.0
        return coef * np.prod([xi**e if e else 1.0 for xi, e in zip(x, pw)])

    m = len(phis)
    total = sum(partial([i]) * drift[i] for i in range(m))
    for i in range(m):
        for j in range(m):
            total += 0.5 * partial([i, j]) * drive_pairing(noise, phis[i], phis[j])
    return float(total)


def chain_observables(chain, nl, phi, chunk=64):
    """``X, Y, Z`` arrays of shape ``(n_records, n_chains)`` for one test function."""
    grid = chain.grid
    lap_phi = shifted_laplacian(phi, grid)
    X = pairing(chain.values, phi)
    Z = pairing(chain.values, lap_phi)
    Y = np.empty_like(X)
    for s in range(0, chain.n_records, chunk):
        block = chain.values[s : s + chunk]
        Y[s : s + chunk] = pairing(wick_drift(block, nl, chain.sigma2, grid), phi)
    return np.atleast_2d(X), np.atleast_2d(Y), np.atleast_2d(Z)


def stationarity_residuals(chain, nl, phi, k_max, noise, n_batches=32, observables=None):
    """Batch-means estimates of the generator identity for ``k = 1..k_max``.

    Raises :class:`~sqtorus.stats.InsufficientBatchesError` with fewer than 16 batches.
    """
    X, Y, Z = observables or chain_observables(chain, nl, phi)
    labels = batch_labels(*X.shape, n_batches=n_batches)
    q = drive_pairing(noise, phi)
    out = []
    for k in range(1, k_max + 1):
        lhs_s = X ** (k - 1) * (-Y - Z)
        rhs_s = 0.5 * (k - 1) * q * X ** (k - 2) if k >= 2 else np.zeros_like(X)
        lhs, _ = mean_se(lhs_s, labels)
        rhs, _ = mean_se(rhs_s, labels)
        res, se = mean_se(lhs_s - rhs_s, labels)
        out.append(StationarityRecord(k, lhs, rhs, res, se, int((labels >= 0).sum())))
    return out


def polynomial_identity(observables, coeffs, q, centre=True, n_batches=32):
    """``E[Q(Xc)(-Y - Z)] - q/2 E[Q'(Xc)]`` for a polynomial ``Q``; jackknife error.

    ``Xc = X - mean(X)`` when ``centre`` is set.
    """
    X, Y, Z = observables
    labels = batch_labels(*X.shape, n_batches=n_batches)
    c = np.asarray(coeffs, dtype=float)
    dc = np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1)

    def stat(x, y, z):
        xc = x - x.mean() if centre else x
        pv = np.polynomial.polynomial.polyval(xc, c)
        dv = np.polynomial.polynomial.polyval(xc, dc)
        return np.mean(pv * (-y - z) - 0.5 * q * dv)

    return jackknife(stat, [X, Y, Z], labels)


def _chaos_stat(k):
    def stat(x, y):
        xc = x - x.mean()
        s2 = xc.var()
        if s2 <= 0:
            return 0.0
        return np.mean(hermite_eval(k, s2, xc) * y)

    return stat


def nongauss_statistics(chain, nl, phi, k_max, noise=None, n_batches=32, observables=None):
    """``E[H_k^{s2}(X - EX) Y]`` with ``s2`` the sample variance of ``X``, ``k = 2..k_max``."""
    X, Y, _ = observables or chain_observables(chain, nl, phi)
    labels = batch_labels(*X.shape, n_batches=n_batches)
    s2 = float(X[labels >= 0].var())
    out = []
    for k in range(2, k_max + 1):
        if s2 <= 0:
            out.append(ChaosStatistic(k, 0.0, 0.0, 0.0, s2, degenerate=True))
            continue
        est, se = jackknife(_chaos_stat(k), [X, Y], labels)
        z = est / se if se > 0 else 0.0
        out.append(ChaosStatistic(k, float(est), float(se), float(z), s2))
    return out


def chaos_polynomial(k, sigma2):
    """``Q_k`` in coefficient form, for cross-checks against :func:`hermite_eval`."""
    return hermite_coeffs(k, sigma2)


def empirical_covariance(chain, mode_cut=None, dense=False, n_batches=32, chunk=32):
    """Covariance of the recorded field, assuming translation invariance.

    Multipliers ``C(k) = E|u_hat(k) - E u_hat(k)|^2`` with batch-means errors;
    modes with ``max_i |k_i| > mode_cut`` are set to zero.  ``dense=True``
    returns the full site covariance matrix instead (small grids only).
    """
    grid = chain.grid
    vals = chain.values
    n_rec, n_ch = vals.shape[:2]
    if dense:
        flat = vals.reshape(n_rec * n_ch, -1)
        flat = flat - flat.mean(axis=0)
        return CovarianceOperator(grid, matrix=flat.T @ flat / len(flat))
    # the transform is linear, so the mean mode is the transform of the mean field;
    # the power is then accumulated record-chunk by record-chunk to bound memory
    mean_hat = np.fft.fftn(vals.mean(axis=(0, 1)), norm="forward")
    labels = batch_labels(n_rec, n_ch, n_batches=n_batches, min_batches=2)
    nb = labels.max() + 1
    total = np.zeros(grid.shape)
    sums = np.zeros((nb,) + grid.shape)
    counts = np.zeros(nb)
    for s in range(0, n_rec, chunk):
        uh = np.fft.fftn(vals[s : s + chunk], axes=grid.axes, norm="forward") - mean_hat
        power = (np.abs(uh) ** 2).reshape((-1,) + grid.shape)
        total += power.sum(axis=0)
        lab = labels[s : s + chunk].ravel()
        for b in np.unique(lab[lab >= 0]):
            sel = lab == b
            sums[b] += power[sel].sum(axis=0)
            counts[b] += sel.sum()
    mult = total / (n_rec * n_ch)
    bmeans = sums / counts.reshape((-1,) + (1,) * grid.dim)
    errors = bmeans.std(axis=0, ddof=1) / np.sqrt(nb) if nb > 1 else None
    if mode_cut is not None:
        keep = np.max(np.abs(grid.wavenumbers), axis=0) <= mode_cut
        mult = np.where(keep, mult, 0.0)
    return CovarianceOperator(grid, multipliers=mult, errors=errors)


def top_chaos_functional(C, phi, p, theta):
    """``theta * int (C phi)^p phi`` by grid quadrature; ``p`` must be odd."""
    if p % 2 == 0:
        raise ValueError(f"p must be odd, got {p}")
    cphi = C.apply(phi)
    return float(theta * np.mean(cphi**p * _values(phi)))


def wick_top_chaos_constant(p):
    """Ratio ``E[Q_p(X) Y] / (theta int (C phi)^p phi)`` for a pure free-field chain.

    Follows from ``E[H_p(X) :Phi(x)^p:] = p! (C phi)(x)^p`` for jointly Gaussian
    variables, so the ratio is ``p!``.
    """
    return factorial(p)


def gaussianity_report(chain, nl, phis, noise, k_max=None, n_batches=32):
    """Stationarity and chaos statistics for each test function, plus a verdict.

    The verdict is ``"Gaussian-consistent"`` iff every chaos ``|z| < 3`` for
    ``k = 2..k_max`` (default ``max(p + 1, 3)``) over all test functions.
    """
    k_max = k_max or max(nl.p + 1, 3)
    entries, worst = [], 0.0
    for phi in phis:
        obs = chain_observables(chain, nl, phi)
        st = stationarity_residuals(chain, nl, phi, k_max, noise, n_batches, observables=obs)
        ch = nongauss_statistics(chain, nl, phi, k_max, noise, n_batches, observables=obs)
        worst = max([worst] + [abs(c.z_score) for c in ch])
        entries.append({
            "phi": phi.label,
            "stationarity": [r.to_dict() for r in st],
            "chaos": [c.to_dict() for c in ch],
        })
    verdict = "Gaussian-consistent" if worst < Z_THRESHOLD else "non-Gaussian"
    return {"verdict": verdict, "max_abs_z": worst, "k_max": k_max, "test_functions": entries}
