"""Metropolis-adjusted Langevin sampler for the d = 1 lattice Gibbs measure.

The target is ``exp(-S(u))`` with

    S(u) = h sum_x [ (u_{x+1} - u_x)^2 / (2 h^2) + mass u_x^2 / 2 - W(u_x) ],

``h = 1/n`` and ``W' = P``.  This is the invariant law of the direct scheme on a
``TorusGrid(1, n, laplacian="fd")`` with ``wick=False``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .dynamics import Chain
from .noise import as_rng
from .stats import batch_labels, mean_se
from .torus import TorusGrid, _values, pairing

TARGET_ACCEPT = 0.574


class TuningError(RuntimeError):
    """MALA acceptance rate fell outside the usable range."""


@dataclass(frozen=True)
class GibbsAction:
    """Lattice action on ``n`` sites; ``coeffs`` are those of ``P`` (not Wick ordered)."""

    n: int
    coeffs: tuple = ()
    mass: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two sites")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))

    @property
    def h(self):
        return 1.0 / self.n

    def potential(self, x):
        """``W(x) = sum_j a_j x^{j+1} / (j+1)``, with ``W(0) = 0``."""
        x = np.asarray(x, dtype=float)
        return sum(a * x ** (j + 1) / (j + 1) for j, a in enumerate(self.coeffs)) + 0.0 * x

    def force(self, x):
        x = np.asarray(x, dtype=float)
        return sum(a * x**j for j, a in enumerate(self.coeffs)) + 0.0 * x

    def symbol(self):
        """Real-FFT eigenvalues of the quadratic part ``h (mass - Lap_fd)``."""
        k = np.arange(self.n // 2 + 1)
        return self.h * (self.mass + (2.0 * self.n * np.sin(np.pi * k / self.n)) ** 2)

    def grid(self):
        """Matching lattice, or ``None`` for site counts a TorusGrid cannot hold."""
        if self.n < 8 or self.n & (self.n - 1):
            return None
        return TorusGrid(1, self.n, laplacian="fd")


def _lap(u):
    return np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1)


def log_density(u, action):
    """``-S(u)``; ``u`` may carry leading batch axes."""
    v = _values(u)
    n, h = action.n, action.h
    grad2 = np.sum((np.roll(v, -1, axis=-1) - v) ** 2, axis=-1) * n**2 / 2.0
    local = np.sum(action.mass * v**2 / 2.0 - action.potential(v), axis=-1)
    out = -h * (grad2 + local)
    return float(out) if np.ndim(out) == 0 else out


def grad_log_density(u, action):
    v = _values(u)
    h, n = action.h, action.n
    return h * (n**2 * _lap(v) - action.mass * v + action.force(v))


class _Precond:
    """Circulant preconditioner ``M = (h (mass - Lap_fd))^{-1}``."""

    def __init__(self, action):
        self.n = action.n
        self.a = action.symbol()
        w = np.full(self.a.shape, 2.0)
        w[0] = 1.0
        if self.n % 2 == 0:
            w[-1] = 1.0
        self.w = w

    def _apply(self, x, mult):
        return sfft.irfft(sfft.rfft(x, axis=-1) * mult, n=self.n, axis=-1)

    def M(self, x):
        return self._apply(x, 1.0 / self.a)

    def sqrtM(self, x):
        return self._apply(x, 1.0 / np.sqrt(self.a))

    def quad_inv(self, r):
        """``r^T M^{-1} r`` along the last axis."""
        rh = sfft.rfft(r, axis=-1)
        return np.sum(self.w * self.a * np.abs(rh) ** 2, axis=-1) / self.n


def mala_chain(action, n_samples, step=None, seed=0, n_chains=1, warmup=None,
               thin=1, u0=None, return_rate=False):
    """Run ``n_chains`` independent preconditioned MALA chains.

    ``step`` is the proposal scale; if ``None`` it is adapted during ``warmup``
    iterations towards an acceptance rate of 0.574 and then frozen, so the
    recorded part is an exact Metropolis-Hastings chain.  Returns a
    :class:`~sqtorus.dynamics.Chain` with ``n_samples`` records per chain.
    """
    rng = as_rng(seed)
    pre = _Precond(action)
    n = action.n
    u = np.zeros((n_chains, n)) if u0 is None else np.array(_values(u0), dtype=float).reshape(n_chains, n)
    adapt = step is None
    eps = 1.0 if adapt else float(step)
    warmup = (1000 if adapt else 0) if warmup is None else warmup

    logp = log_density(u, action)
    g = grad_log_density(u, action)
    mean = u + 0.5 * eps**2 * pre.M(g)
    out = np.empty((n_samples, n_chains, n))
    accepted = 0
    total_iter = warmup + n_samples * thin
    for it in range(total_iter):
        y = mean + eps * pre.sqrtM(rng.standard_normal(u.shape))
        logp_y = log_density(y, action)
        g_y = grad_log_density(y, action)
        mean_y = y + 0.5 * eps**2 * pre.M(g_y)
        log_fwd = -pre.quad_inv(y - mean) / (2.0 * eps**2)
        log_bwd = -pre.quad_inv(u - mean_y) / (2.0 * eps**2)
        log_alpha = logp_y - logp + log_bwd - log_fwd
        acc = np.log(rng.uniform(size=n_chains)) < log_alpha
        u = np.where(acc[:, None], y, u)
        logp = np.where(acc, logp_y, logp)
        g = np.where(acc[:, None], g_y, g)
        if it < warmup:
            if adapt:
                rate = np.mean(np.minimum(1.0, np.exp(np.minimum(log_alpha, 0.0))))
                eps *= np.exp((rate - TARGET_ACCEPT) / np.sqrt(it + 1.0))
        else:
            accepted += int(acc.sum())
            j = it - warmup
            if (j + 1) % thin == 0:
                out[j // thin] = u
        mean = u + 0.5 * eps**2 * pre.M(g)

    rate = accepted / max(n_samples * thin * n_chains, 1)
    if not 0.05 <= rate <= 0.99:
        raise TuningError(
            f"acceptance rate {rate:.3f} with step {eps:.3g}; "
            + ("decrease the step" if rate < 0.05 else "increase the step")
        )
    meta = {"sampler": "mala", "step": eps, "acceptance": rate, "n": n,
            "coeffs": list(action.coeffs), "mass": action.mass, "thin": thin}
    chain = Chain(action.grid(), np.arange(n_samples, dtype=float), out, 0.0, meta)
    return (chain, rate) if return_rate else chain


def _moment_stats(chain, phi, k, n_batches):
    X = np.atleast_2d(pairing(chain.values, phi))
    labels = batch_labels(*X.shape, n_batches=n_batches)
    return mean_se(X**k, labels)


def moment_compare(dyn_chain, oracle_chain, phis, k_max, n_batches=32, z_max=3.0):
    """Two-sample comparison of ``E<u, phi>^k``, ``k = 1..k_max``, with joint SE."""
    rows = []
    for phi in phis:
        for k in range(1, k_max + 1):
            m1, s1 = _moment_stats(dyn_chain, phi, k, n_batches)
            m2, s2 = _moment_stats(oracle_chain, phi, k, n_batches)
            se = float(np.hypot(s1, s2))
            gap = m1 - m2
            z = gap / se if se > 0 else (0.0 if gap == 0 else np.inf)
            rows.append({"phi": phi.label, "k": k, "dynamic": m1, "dynamic_se": s1,
                         "oracle": m2, "oracle_se": s2, "gap": gap, "joint_se": se, "z": z})
    passed = all(abs(r["z"]) < z_max for r in rows)
    return {"pass": passed, "rows": rows}
