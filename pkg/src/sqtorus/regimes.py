"""Exact parameter-regime arithmetic for the renormalised dynamic.

With noise covariance ``(1 - Lap)^beta`` on ``T^d`` set ``rho = 2 - d - 2 beta``.
For nonlinearity degree ``p``:

* the remainder equation closes (DPD regime) iff ``rho > max{4/(1-2p), -d/p}``;
* for ``p > 1`` the invariant measure is singular w.r.t. the free field iff
  ``rho <= (d-4)/(p-1)`` and ``rho < 0``; for ``p = 1`` iff ``d < 4``;
* regularity exponents ``alpha`` of the free field must lie in
  ``(2/(1-2p), rho/2)``;
* the effective dimension is ``delta = 2 - rho`` (the Phi^4_delta bookkeeping).

All arithmetic uses :class:`fractions.Fraction`; floats are converted through
their decimal string, so ``-0.6`` becomes exactly ``-3/5``.
"""

from dataclasses import dataclass
from fractions import Fraction

NOT_APPLICABLE = "not applicable (rho = 0 log case)"
DELTA_LABEL = "effective dimension delta = 2 - rho (Phi^4_delta convention)"
DELTA_NOTE = (
    "delta = 2 - rho matches the Phi^4_delta conversions for white noise in d = 3; "
    "its meaning for general beta is a convention"
)


def exact(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


def dpd_threshold(p, d):
    p, d = exact(p), exact(d)
    return max(Fraction(4) / (1 - 2 * p), -d / p)


def singular_threshold(p, d):
    """``(d - 4)/(p - 1)``; undefined for ``p = 1``."""
    p, d = exact(p), exact(d)
    if p == 1:
        raise ValueError("p = 1 has no rho threshold; singular iff d < 4")
    return (d - 4) / (p - 1)


def alpha_window(p, rho):
    """Open interval ``(2/(1-2p), rho/2)``, or ``None`` when empty."""
    lo = Fraction(2) / (1 - 2 * exact(p))
    hi = exact(rho) / 2
    return (lo, hi) if lo < hi else None


def covar_bound_ok(rho, p, d, alpha):
    """``rho > max{-d/p, 2 alpha}``."""
    return exact(rho) > max(-exact(d) / exact(p), 2 * exact(alpha))


def is_singular(p, d, rho):
    p, d, rho = exact(p), exact(d), exact(rho)
    if rho > 0:
        return False
    if rho == 0:
        return NOT_APPLICABLE
    if p == 1:
        return d < 4
    return rho <= singular_threshold(p, d)


@dataclass(frozen=True)
class RegimeReport:
    p: int
    d: int
    beta: Fraction
    rho: Fraction
    dpd_threshold: Fraction
    dpd_feasible: bool
    singular: object
    singular_threshold: object
    alpha_window: object
    delta_effective: Fraction
    note: str = DELTA_NOTE

    def to_dict(self):
        def s(x):
            return str(x) if isinstance(x, Fraction) else x

        win = None if self.alpha_window is None else [s(x) for x in self.alpha_window]
        return {
            "p": self.p, "d": self.d, "beta": s(self.beta), "rho": s(self.rho),
            "dpd_threshold": s(self.dpd_threshold), "dpd_feasible": self.dpd_feasible,
            "singular": self.singular, "singular_threshold": s(self.singular_threshold),
            "alpha_window": win, "delta_effective": s(self.delta_effective),
            "delta_label": DELTA_LABEL, "note": self.note,
        }

    def table(self):
        win = "empty" if self.alpha_window is None else "({}, {})".format(*self.alpha_window)
        rows = [
            ("p", self.p), ("d", self.d), ("beta", self.beta), ("rho", self.rho),
            ("dpd threshold", self.dpd_threshold), ("dpd feasible", self.dpd_feasible),
            ("singular threshold", self.singular_threshold), ("singular", self.singular),
            ("alpha window", win), ("delta (2 - rho)", self.delta_effective),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def regime_report(p, d, beta=None, rho=None):
    """Classify ``(p, d, beta)``; give exactly one of ``beta`` and ``rho``."""
    if int(p) != p or p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    if d not in (1, 2, 3, 4):
        raise ValueError(f"d must be in 1..4, got {d}")
    if (beta is None) == (rho is None):
        raise ValueError("give exactly one of beta and rho")
    p, d = int(p), int(d)
    if rho is None:
        beta = exact(beta)
        rho = 2 - d - 2 * beta
    else:
        rho = exact(rho)
        beta = (2 - d - rho) / 2
    if beta > 0:
        raise ValueError(f"beta must be <= 0, got {beta}")
    thr = dpd_threshold(p, d)
    sing_thr = None if p == 1 else singular_threshold(p, d)
    return RegimeReport(
        p=p, d=d, beta=beta, rho=rho,
        dpd_threshold=thr, dpd_feasible=rho > thr,
        singular=is_singular(p, d, rho), singular_threshold=sing_thr,
        alpha_window=alpha_window(p, rho), delta_effective=2 - rho,
    )


def overlap_interval(p, d):
    """``rho`` values that are both DPD-feasible and singular: ``(lo, hi]`` or ``None``."""
    lo = dpd_threshold(p, d)
    hi = singular_threshold(p, d) if p > 1 else Fraction(0)
    hi = min(hi, Fraction(0))
    return (lo, hi) if lo < hi else None


def scan_rationals(p, d, denominators=range(1, 41)):
    """Rationals ``2 - d <= rho < 0`` (so ``beta <= 0``) that are DPD-feasible and singular."""
    hits = set()
    for q in denominators:
        for m in range((2 - d) * q, 0):
            r = Fraction(m, q)
            rep = regime_report(p, d, rho=r)
            if rep.dpd_feasible and rep.singular is True:
                hits.add(r)
    return sorted(hits)
