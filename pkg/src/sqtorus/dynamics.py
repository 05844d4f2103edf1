"""Time stepping for the renormalised Langevin dynamic on the torus.

The simulated equation is

    (d/dt + 1 - Laplacian) u = :P(u): + sqrt(2) xi,

with ``xi`` Gaussian, white in time, spatial covariance ``(1 - Laplacian)^beta``.
The factor ``sqrt(2)`` is the Langevin normalisation: with it the free field
``nu`` of :mod:`sqtorus.noise` is invariant for the linear part, and for
``d = 1`` the Gibbs density of :mod:`sqtorus.oracle` is invariant for the full
dynamic.  Wick ordering uses the grid constant ``sigma2_renorm``.

Two schemes share one exponential-Euler step:

* ``dpd``: ``u = v + Psi`` with ``Psi`` the exact Ornstein-Uhlenbeck solution and
  ``v`` the remainder driven by ``sum_j C(k, j) v^j Psi^{:k-j:}``;
* ``direct``: one equation with ``sum_j a_j H_j^{sigma2}(u)`` on the right.
"""

import logging
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .hermite import hermite_all
from .noise import (
    as_rng,
    noise_multipliers,
    sample_gff,
    sigma2_renorm,
    white_modes,
)
from .torus import Field, SpectralField, _values

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e8


class BlowUpError(RuntimeError):
    """Raised when the sup norm of the solution exceeds ``BLOWUP_THRESHOLD``."""

    def __init__(self, time, norm):
        super().__init__(f"solution diverged at t = {time:.6g} (sup norm {norm:.3g})")
        self.time = time
        self.norm = norm


@dataclass(frozen=True)
class Nonlocal:
    """Nonlocal term ``:u^ell: * R(y_1, ..., y_m)`` with ``y_i = int :u^{2i}:``.

    ``terms`` is a sequence of ``(coeff, exponents)`` pairs, so
    ``R(y) = sum coeff * prod_i y_i ** exponents[i]``.
    """

    ell: int = 1
    terms: tuple = ((-1.0, (1,)),)

    def __post_init__(self):
        if self.ell < 1 or self.ell % 2 == 0:
            raise ValueError(f"ell must be a positive odd integer, got {self.ell}")
        terms = tuple((float(c), tuple(int(e) for e in ex)) for c, ex in self.terms)
        object.__setattr__(self, "terms", terms)

    @property
    def n_moments(self):
        return max((len(ex) for _, ex in self.terms), default=0)

    def evaluate(self, moments):
        """``R`` at ``moments[i] = y_{i+1}``; broadcasts over batch axes."""
        total = 0.0
        for c, ex in self.terms:
            term = c
            for i, e in enumerate(ex):
                if e:
                    term = term * moments[i] ** e
            total = total + term
        return total

    def to_dict(self):
        return {"ell": self.ell, "terms": [[c, list(ex)] for c, ex in self.terms]}


@dataclass(frozen=True)
class NonlinearitySpec:
    """Polynomial ``P(x) = sum_j coeffs[j] x^j``, optionally Wick ordered.

    ``globally_safe`` asserts ``p`` odd and ``a_p < 0`` at construction.
    """

    coeffs: tuple = ()
    wick: bool = True
    nonlocal_: Nonlocal = None
    globally_safe: bool = False

    def __post_init__(self):
        c = [float(x) for x in self.coeffs]
        while c and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))
        if self.globally_safe and (self.p % 2 == 0 or self.theta >= 0):
            raise ValueError("globally safe nonlinearity needs odd degree and negative leading coefficient")

    @property
    def p(self):
        return max(len(self.coeffs) - 1, 0)

    @property
    def theta(self):
        return self.coeffs[-1] if self.coeffs else 0.0

    @property
    def max_power(self):
        """Highest Wick power needed to assemble the drift."""
        k = self.p
        if self.nonlocal_ is not None:
            k = max(k, self.nonlocal_.ell, 2 * self.nonlocal_.n_moments)
        return k

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return sum(j * a * x ** (j - 1) for j, a in enumerate(self.coeffs) if j)

    def to_dict(self):
        out = {"coeffs": list(self.coeffs), "wick": self.wick}
        if self.nonlocal_ is not None:
            out["nonlocal"] = self.nonlocal_.to_dict()
        return out


@dataclass
class WickPowers:
    """``values[k] = Psi^{:k:}`` for ``k = 0..p`` (``values[0] = 1``)."""

    grid: object
    values: np.ndarray
    sigma2: float

    def __getitem__(self, k):
        return Field(self.grid, self.values[k])

    def __len__(self):
        return len(self.values) - 1


@dataclass(frozen=True)
class TrajectoryConfig:
    """Time stepping and recording parameters.

    Records start at ``burn_in`` and are taken every ``record_stride`` time
    units up to ``t_end`` inclusive.  ``noise_amplitude = 0`` switches the
    noise off (Wick constants are unchanged).
    """

    dt: float = 1e-3
    t_end: float = 10.0
    record_stride: float = 0.1
    burn_in: float = 5.0
    seed: int = 0
    scheme: str = "direct"
    noise_amplitude: float = 1.0

    def __post_init__(self):
        if not 0 < self.dt <= 0.5:
            raise ValueError(f"dt must lie in (0, 0.5], got {self.dt}")
        if self.scheme not in ("dpd", "direct"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_stride < self.dt:
            raise ValueError("record_stride must be at least dt")
        if self.burn_in > self.t_end:
            raise ValueError("burn_in exceeds t_end")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    @property
    def steps_per_record(self):
        return max(int(round(self.record_stride / self.dt)), 1)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class Chain:
    """Recorded snapshots, ``values`` of shape ``(n_records, n_chains, *grid.shape)``."""

    grid: object
    times: np.ndarray
    values: np.ndarray
    sigma2: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_records(self):
        return self.values.shape[0]

    @property
    def n_chains(self):
        return self.values.shape[1]

    def field(self, i, c=0):
        return Field(self.grid, self.values[i, c])

    def last(self):
        return self.values[-1]

    @classmethod
    def from_samples(cls, grid, samples, sigma2=0.0, **meta):
        """Wrap i.i.d. samples of shape ``(n, *grid.shape)`` as a one-chain record."""
        samples = np.asarray(samples, dtype=float)
        vals = samples[:, None]
        return cls(grid, np.arange(len(samples), dtype=float), vals, sigma2, dict(meta))


def _stack(u, grid):
    """Field or array -> array with one leading chain axis."""
    v = _values(u)
    if v.shape == grid.shape:
        return v[None].copy()
    if v.shape[1:] != grid.shape:
        raise ValueError(f"initial data shape {v.shape} incompatible with grid {grid.shape}")
    return np.array(v, dtype=float)


def wick_powers(psi, p, sigma2):
    """Pointwise ``H_k^{sigma2}(psi)`` for ``k = 0..p``.

    ``psi`` is a :class:`Field` or an array; ``sigma2`` a float or
    :class:`~sqtorus.noise.RenormConstant`.
    """
    s2 = float(sigma2)
    vals = hermite_all(p, s2, _values(psi))
    return WickPowers(getattr(psi, "grid", None), vals, s2)


def sum_wick_powers(v, psi_powers):
    """``(v + Psi)^{:k:} = sum_j C(k, j) v^j Psi^{:k-j:}`` for all stored ``k``."""
    pw = psi_powers.values if isinstance(psi_powers, WickPowers) else psi_powers
    K = len(pw) - 1
    v = np.asarray(v, dtype=float)
    vpow = [np.ones_like(v)]
    for _ in range(K):
        vpow.append(vpow[-1] * v)
    out = np.empty(np.broadcast_shapes(pw.shape, (K + 1,) + v.shape))
    for k in range(K + 1):
        acc = vpow[k] * pw[0]
        for j in range(k):
            acc = acc + comb(k, j) * vpow[j] * pw[k - j]
        out[k] = acc
    return out


def drift_from_powers(powers, nl, axes):
    """``:P(u):`` (plus any nonlocal term) from ``powers[k] = :u^k:``."""
    out = np.zeros(powers.shape[1:])
    for j, a in enumerate(nl.coeffs):
        if a:
            out = out + a * powers[j]
    if nl.nonlocal_ is not None:
        nlc = nl.nonlocal_
        moments = [np.mean(powers[2 * (i + 1)], axis=axes, keepdims=True) for i in range(nlc.n_moments)]
        out = out + powers[nlc.ell] * nlc.evaluate(moments)
    return out


def wick_drift(u, nl, sigma2, grid):
    """Assemble ``:P(u):`` pointwise, the same way the direct scheme does."""
    s2 = float(sigma2) if nl.wick else 0.0
    powers = hermite_all(nl.max_power, s2, _values(u))
    return drift_from_powers(powers, nl, grid.axes)


class Stepper:
    """Precomputed exponential-Euler and exact OU factors on the real-FFT layout."""

    def __init__(self, grid, nl, noise, dt, sigma2=None, noise_amplitude=1.0):
        self.grid, self.nl, self.noise, self.dt = grid, nl, noise, dt
        if sigma2 is None:
            sigma2 = sigma2_renorm(noise, grid).sigma2 if nl.wick else 0.0
        self.sigma2 = float(sigma2)
        a = 1.0 + grid.symbol(real=True)
        self.decay = np.exp(-a * dt)
        self.phi1 = -np.expm1(-a * dt) / a
        cov = noise_multipliers(noise, grid, real=True)
        # stationary per-mode variance cov / a, i.e. noise of covariance 2 Cov_xi
        self.innov_std = noise_amplitude * np.sqrt(cov * -np.expm1(-2.0 * a * dt) / a)

    def innovation(self, rng, batch):
        return white_modes(self.grid, rng, batch) * self.innov_std

    def drift(self, u):
        return wick_drift(u, self.nl, self.sigma2, self.grid)

    def step_direct(self, u, eta):
        uh = self.decay * self.grid.rfft(u) + self.phi1 * self.grid.rfft(self.drift(u)) + eta
        return self.grid.irfft(uh)

    def step_dpd(self, v, psi_hat, eta):
        """Advance ``(v, Psi)`` by one step; returns the new ``(v, psi_hat)``."""
        psi = self.grid.irfft(psi_hat)
        rhs = self.remainder_rhs(v, psi)
        v_new = self.grid.irfft(self.decay * self.grid.rfft(v) + self.phi1 * self.grid.rfft(rhs))
        psi_hat = self.decay * psi_hat + eta
        return v_new, psi_hat

    def remainder_rhs(self, v, psi):
        s2 = self.sigma2 if self.nl.wick else 0.0
        pw = hermite_all(self.nl.max_power, s2, psi)
        return drift_from_powers(sum_wick_powers(v, pw), self.nl, self.grid.axes)


def ou_step(psi, dt, noise, rng=None, noise_amplitude=1.0):
    """Exact-in-law Ornstein-Uhlenbeck update of every Fourier mode.

    Mean ``exp(-(1 + lambda_k) dt) psi_hat(k)`` plus an independent Gaussian
    innovation with variance ``C(k) (1 - exp(-2 (1 + lambda_k) dt)) / (1 + lambda_k)``,
    which keeps the free field ``nu`` invariant.  ``rng=None`` suppresses the
    innovation.
    """
    grid = psi.grid
    a = 1.0 + grid.symbol()
    out = np.exp(-a * dt) * psi.modes
    if rng is not None:
        rng = as_rng(rng)
        # leading axes of psi.modes, if any, are independent chains
        w = rng.standard_normal(np.shape(psi.modes))
        sign = (-1.0) ** np.sum(grid.wavenumbers, axis=0)
        wh = np.fft.fftn(w, axes=grid.axes, norm="forward") * sign * np.sqrt(grid.size)
        var = noise_multipliers(noise, grid) * -np.expm1(-2.0 * a * dt) / a
        out = out + noise_amplitude * np.sqrt(var) * wh
    return SpectralField(grid, out)


def remainder_step(v, wick, nl, dt, grid=None):
    """One exponential-Euler step of ``(d/dt + 1 - Laplacian) v = :P(v + Psi):``.

    ``wick`` holds the Wick powers of ``Psi`` up to the degree of ``P``.
    Raises :class:`BlowUpError` if the result leaves the finite range.
    """
    grid = grid or getattr(v, "grid", None) or wick.grid
    vv = _values(v)
    rhs = drift_from_powers(sum_wick_powers(vv, wick), nl, grid.axes)
    a = 1.0 + grid.symbol(real=True)
    vh = np.exp(-a * dt) * grid.rfft(vv) + (-np.expm1(-a * dt) / a) * grid.rfft(rhs)
    out = grid.irfft(vh)
    norm = np.max(np.abs(out))
    if not np.isfinite(norm) or norm > BLOWUP_THRESHOLD:
        raise BlowUpError(dt, norm)
    return Field(grid, out) if isinstance(v, Field) else out


def _check_blowup(x, t):
    norm = np.max(np.abs(x))
    if not np.isfinite(norm) or norm > BLOWUP_THRESHOLD:
        raise BlowUpError(t, norm)


def _solve(u0, nl, noise, cfg, scheme, psi0=None, sigma2=None, grid=None):
    grid = grid or u0.grid
    st = Stepper(grid, nl, noise, cfg.dt, sigma2, cfg.noise_amplitude)
    rng = as_rng(cfg.seed)
    u = _stack(u0, grid)
    batch = (u.shape[0],)

    stiff = float(np.max(np.abs(nl.derivative(u)))) * cfg.dt if nl.coeffs else 0.0
    if stiff > 1.0:
        log.warning("dt * max|P'(u0)| = %.3g; explicit nonlinearity may be unstable", stiff)

    spr = cfg.steps_per_record
    first = int(np.ceil(cfg.burn_in / cfg.dt - 1e-9))
    n_rec = (cfg.n_steps - first) // spr + 1 if first <= cfg.n_steps else 0
    # preallocated so long runs never hold the chain twice
    times = np.empty(n_rec)
    records = np.empty((n_rec,) + u.shape)
    filled = 0

    def record(step, x):
        nonlocal filled
        if step >= first and (step - first) % spr == 0:
            times[filled] = step * cfg.dt
            records[filled] = x
            filled += 1

    if scheme == "dpd":
        psi = u.copy() if psi0 is None else _stack(psi0, grid)
        v = u - psi
        psi_hat = grid.rfft(psi)
        record(0, u)
        for s in range(1, cfg.n_steps + 1):
            eta = st.innovation(rng, batch)
            v, psi_hat = st.step_dpd(v, psi_hat, eta)
            _check_blowup(v, s * cfg.dt)
            if s >= first and (s - first) % spr == 0:
                record(s, v + grid.irfft(psi_hat))
    else:
        record(0, u)
        for s in range(1, cfg.n_steps + 1):
            eta = st.innovation(rng, batch)
            u = st.step_direct(u, eta)
            _check_blowup(u, s * cfg.dt)
            record(s, u)

    meta = {
        "scheme": scheme,
        "trajectory": cfg.to_dict(),
        "nonlinearity": nl.to_dict(),
        "noise": noise.to_dict(),
        "grid": {"dim": grid.dim, "n": grid.n, "laplacian": grid.laplacian},
        "sigma2": st.sigma2,
        "stiffness_estimate": stiff,
    }
    return Chain(grid, times[:filled], records[:filled], st.sigma2, meta)


def solve_dpd(u0, nl, noise, cfg, psi0=None, sigma2=None):
    """Da Prato-Debussche scheme; ``Psi_0 = u_0`` and ``v_0 = 0`` unless ``psi0`` is given.

    ``u0`` is a :class:`Field` or an array of shape ``(n_chains, *grid.shape)``
    (then pass ``grid=`` through :func:`solve`).
    """
    return _solve(u0, nl, noise, cfg, "dpd", psi0=psi0, sigma2=sigma2)


def solve_direct(u0, nl, noise, cfg, sigma2=None):
    """Single-equation renormalised scheme ``(d/dt + 1 - Lap) u = sum a_j H_j(u) + noise``."""
    return _solve(u0, nl, noise, cfg, "direct", sigma2=sigma2)


def solve(u0, nl, noise, cfg, grid=None, sigma2=None, psi0=None):
    """Dispatch on ``cfg.scheme``; accepts batched array initial data with ``grid``."""
    return _solve(u0, nl, noise, cfg, cfg.scheme, psi0=psi0, sigma2=sigma2, grid=grid)


def relative_l2_gap(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.sqrt(np.sum((a - b) ** 2) / np.sum(b**2)))


def markov_crosscheck(u0, nl, noise, cfg, seed_psi=None):
    """Run direct, DPD with ``Psi_0 = u_0``, and DPD with an independent ``Psi_0``.

    All three share the noise path (same seed).  The split run takes
    ``Psi_0 ~ nu`` and ``v_0 = exp(dt Laplacian)(u_0 - Psi_0)``.  Returns the
    relative L2 gaps at ``t_end``.
    """
    grid = u0.grid
    cfg = replace(cfg, burn_in=cfg.t_end, record_stride=max(cfg.record_stride, cfg.dt))
    direct = solve_direct(u0, nl, noise, replace(cfg, scheme="direct"))
    dpd = solve_dpd(u0, nl, noise, replace(cfg, scheme="dpd"))

    psi_bar = sample_gff(noise, grid, seed=cfg.seed + 1 if seed_psi is None else seed_psi)
    lam = grid.symbol(real=True)
    v0 = grid.irfft(np.exp(-cfg.dt * lam) * grid.rfft(u0.values - psi_bar.values))
    split = solve_dpd(Field(grid, psi_bar.values + v0), nl, noise, replace(cfg, scheme="dpd"),
                      psi0=psi_bar)
    ref = direct.last()
    return {
        "t": float(direct.times[-1]),
        "gap_dpd_direct": relative_l2_gap(dpd.last(), ref),
        "gap_split_direct": relative_l2_gap(split.last(), ref),
        "sigma2": direct.sigma2,
    }
