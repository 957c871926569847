"""Free energy, the tilted excursion law Q_beta and the Gumbel constants.

Sign convention: the free energy solves

    sum_n K(n) exp(-n F) = exp(-beta),

and the tilted law is Q(n) = exp(beta) K(n) exp(-n F), which is then a
probability distribution on n >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AssumptionNotSatisfied, DomainError, InputError, NoBracket
from .laws import ExcursionLaw

__all__ = [
    "TiltedModel",
    "solve_free_energy",
    "free_energy_residual",
    "build_tilted",
    "gumbel_constant",
    "centering_constant",
    "gamma_threshold",
    "threshold",
    "tilted_tail_exact",
    "tilted_tail_asymptotic",
    "tail_asymptotic",
]

F_FLOOR = 1e-12
MAX_TERMS = 1 << 26
DEFAULT_EPS_TRUNC = 1e-12
DEFAULT_TOL = 1e-14


class _Terms:
    """Lazily extended arrays n, K(n), P(tau_1 > n) for one law."""

    def __init__(self, law: ExcursionLaw, start: int = 256):
        self.law = law
        self.L = 0
        self._grow(law.support_max or start)

    def _grow(self, L):
        self.n = np.arange(1, L + 1, dtype=np.float64)
        self.K = self.law.pmf_array(np.arange(1, L + 1))
        self.L = L

    def upto(self, L):
        if L > self.L:
            self._grow(L)
        return self.n[:L], self.K[:L]

    def tail(self, L) -> float:
        return float(self.law.tail_array(L))


def _bracketed_sum(terms: _Terms, F: float, width: float, target: float | None = None):
    """Sum K(n) e^{-nF} with a remainder certificate.

    Returns ``(partial, remainder_bound)``; the full series lies in
    ``[partial, partial + remainder_bound]``. Grows the cutoff until the bound
    is below ``width`` or, when ``target`` is given, until the comparison with
    ``target`` is decided.
    """
    law = terms.law
    L = law.support_max or 64
    while True:
        n, K = terms.upto(L)
        partial = math.fsum(K * np.exp(-n * F))
        bound = 0.0 if law.support_max else terms.tail(L) * math.exp(-(L + 1) * F)
        if bound <= width:
            return partial, bound
        if target is not None and (partial > target or partial + bound < target):
            return partial, bound
        if L >= MAX_TERMS:
            return partial, bound
        L *= 2


def free_energy_residual(law: ExcursionLaw, F: float, beta: float, width: float = 1e-15):
    """sum_n K(n) e^{-nF} - e^{-beta}, with an absolute error bound.

    Returns ``(residual, error_bound)``.
    """
    partial, bound = _bracketed_sum(_Terms(law), F, width)
    return partial + 0.5 * bound - math.exp(-beta), 0.5 * bound


def solve_free_energy(law: ExcursionLaw, beta: float, tol: float = DEFAULT_TOL) -> float:
    """Root of the free-energy equation by bracketed bisection on (0, beta]
    with a final Newton polish.

    The residual is strictly decreasing in F, positive near 0 for a proper
    law and nonpositive at F = beta.
    """
    if not beta > 0:
        raise InputError(f"beta must be positive, got {beta}")
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")
    terms = _Terms(law)
    target = math.exp(-beta)
    width = tol / 10

    def sign(F):
        partial, bound = _bracketed_sum(terms, F, width, target)
        if partial > target:
            return 1
        if partial + bound < target:
            return -1
        if bound <= width:
            return 0
        raise NoBracket(f"cannot certify residual sign at F={F:g}")

    lo, hi = F_FLOOR, float(beta)
    try:
        s_lo = sign(lo)
    except NoBracket:
        s_lo = 0
    if s_lo <= 0:
        raise NoBracket(f"residual not positive at F={lo:g}; defective law or beta too small")
    s_hi = sign(hi)
    if s_hi == 0:
        return hi
    if s_hi > 0:
        raise NoBracket(f"residual positive at F=beta={beta:g}")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = sign(mid)
        if s == 0:
            lo = hi = mid
            break
        if s > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * hi:
            break

    F = 0.5 * (lo + hi)
    for _ in range(4):
        partial, bound = _bracketed_sum(terms, F, width)
        g = partial + 0.5 * bound - target
        n, K = terms.upto(max(terms.L, 1))
        dg = -math.fsum(n * K * np.exp(-n * F))
        if dg == 0.0:
            break
        step = g / dg
        new = F - step
        if not lo <= new <= hi and lo < hi:
            new = min(max(new, lo), hi)
        if new == F:
            break
        F = new

    resid, err = free_energy_residual(law, F, beta, width)
    if abs(resid) + err > tol:
        raise NoBracket(f"residual {abs(resid) + err:.3e} above tol {tol:.1e} at F={F!r}")
    return F


def centering_constant(F: float, D: float, alpha: float, beta: float) -> float:
    """log( F^alpha D e^{beta - F} / (1 - e^{-F}) )."""
    return alpha * math.log(F) + math.log(D) + beta - F - math.log(-math.expm1(-F))


def tail_asymptotic(k, F, D, alpha, beta):
    """e^{-kF} k^{-alpha} D e^{beta-F} / (1 - e^{-F})."""
    k = np.asarray(k, dtype=np.float64)
    out = np.exp(-k * F) * k ** (-alpha) * D * math.exp(beta - F) / -math.expm1(-F)
    return out if out.ndim else float(out)


def threshold(x, N_eff, F, C, alpha):
    """(x + C + log N - alpha log log N) / F."""
    if not N_eff > math.e:
        raise DomainError(f"threshold needs N_eff > e, got {N_eff}")
    ll = math.log(math.log(N_eff))
    out = (np.asarray(x, dtype=np.float64) + C + math.log(N_eff) - alpha * ll) / F
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class TiltedModel:
    law: ExcursionLaw
    beta: float
    F: float
    mu: float
    C: float | None
    q: np.ndarray
    eps_trunc: float
    tol: float
    residual: float

    @property
    def M(self) -> int:
        return int(self.q.size)

    @cached_property
    def table_mass(self) -> float:
        return math.fsum(self.q)

    @cached_property
    def q_normalized(self) -> np.ndarray:
        """The table renormalised to unit mass (what the DP and samplers use)."""
        q = self.q / self.table_mass
        q.setflags(write=False)
        return q

    def tail_params(self):
        return self.law.tail_params()

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "F": self.F,
            "mu": self.mu,
            "C": self.C,
            "M": self.M,
            "residual": self.residual,
        }


def _truncation_index(law: ExcursionLaw, beta: float, F: float, eps: float) -> int:
    """Smallest M whose tilted tail mass and tail first moment are both <= eps.

    Mass: e^beta P(tau_1 > M) e^{-MF} / (1 - e^{-F}).
    First moment: e^beta P(tau_1 > M) sum_{n>M} n e^{-nF}.
    """
    if law.support_max is not None:
        L = law.support_max
        tails = law.tail_array(np.arange(1, L + 1))
        ok = np.nonzero(tails <= 0.0)[0]
        return int(ok[0]) + 1 if ok.size else L
    x = math.exp(-F)
    one_minus_x = -math.expm1(-F)
    L = 256
    while True:
        M = np.arange(1, L + 1, dtype=np.float64)
        tails = law.tail_array(np.arange(1, L + 1))
        geo = np.exp(-M * F)
        mass = math.exp(beta) * tails * geo / one_minus_x
        moment = math.exp(beta) * tails * geo * x * ((M + 1) - M * x) / one_minus_x**2
        ok = np.nonzero((mass <= eps) & (moment <= eps))[0]
        if ok.size:
            return int(ok[0]) + 1
        if L >= MAX_TERMS:
            raise InputError("truncation index exceeds term budget; beta too small")
        L *= 4


def build_tilted(
    law: ExcursionLaw,
    beta: float,
    eps_trunc: float = DEFAULT_EPS_TRUNC,
    tol: float = DEFAULT_TOL,
) -> TiltedModel:
    if not 0 < eps_trunc <= 1e-6:
        raise InputError(f"eps_trunc must lie in (0, 1e-6], got {eps_trunc}")
    F = solve_free_energy(law, beta, tol)
    M = _truncation_index(law, beta, F, eps_trunc)
    n = np.arange(1, M + 1)
    K = law.pmf_array(n)
    with np.errstate(divide="ignore"):
        q = np.exp(beta + np.log(K) - n * F)
    q.setflags(write=False)
    mu = math.fsum(n * q)
    C = None
    if law.has_tail:
        D, alpha = law.tail_params()
        C = centering_constant(F, D, alpha, beta)
    resid, err = free_energy_residual(law, F, beta, tol / 10)
    return TiltedModel(law, float(beta), F, mu, C, q, eps_trunc, tol, abs(resid) + err)


def _require_tail(model: TiltedModel):
    D, alpha = model.law.tail_params()
    if model.C is None:
        raise AssumptionNotSatisfied("model has no Gumbel constant")
    return D, alpha


def gumbel_constant(model: TiltedModel) -> float:
    _require_tail(model)
    return model.C


def gamma_threshold(model: TiltedModel, x, N_eff):
    """Real threshold gamma_x(N_eff); vectorised over ``x``."""
    _, alpha = _require_tail(model)
    return threshold(x, N_eff, model.F, model.C, alpha)


def tilted_tail_asymptotic(model: TiltedModel, k):
    if not np.all(np.asarray(k) > 0):
        raise DomainError("k must be positive")
    D, alpha = _require_tail(model)
    return tail_asymptotic(k, model.F, D, alpha, model.beta)


def tilted_tail_exact(model: TiltedModel, k: int, rel: float = 1e-16) -> float:
    """Q(tau_1 > k) = e^beta sum_{n>k} K(n) e^{-nF}, summed directly from the law.

    Terms are formed in log space so deep tails do not underflow early;
    summation stops once the remainder bound is below ``rel`` times the sum
    (or below ``eps_trunc`` times ``rel``, whichever is larger).
    """
    k = int(k)
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return 1.0
    law, F, beta = model.law, model.F, model.beta
    top = law.support_max
    if top is not None and k >= top:
        return 0.0
    chunk = 1024
    parts = []
    start = k + 1
    while True:
        stop = start + chunk - 1 if top is None else top
        n = np.arange(start, stop + 1)
        K = law.pmf_array(n)
        with np.errstate(divide="ignore"):
            parts.append(math.fsum(np.exp(beta + np.log(K) - n * F)))
        if top is not None:
            return math.fsum(parts)
        s = math.fsum(parts)
        bound = math.exp(beta - (stop + 1) * F) * float(law.tail_array(stop))
        if bound <= max(rel * s, 1e-300):
            return s
        start = stop + 1
        chunk *= 2
