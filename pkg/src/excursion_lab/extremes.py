"""Extreme-value diagnostics for the longest excursion.

The longest excursion is integer valued, so the event {gamma_N <= t} for a
real threshold t is the event {gamma_N <= floor(t)}; every exact evaluation
below uses the floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptySample
from .renewal_dp import (
    RenewalTable,
    _u_at,
    longest_cdf_vector,
    renewal_mass,
    restricted_endpoints,
)
from .sampler import run_experiment
from .tilt import TiltedModel, _require_tail, gamma_threshold

__all__ = [
    "DEFAULT_X_GRID",
    "GapResult",
    "ConvergenceRecord",
    "ConvergenceReport",
    "gumbel_cdf",
    "normalize",
    "exact_gumbel_gap",
    "ks_distance",
    "dkw_epsilon",
    "expected_longest",
    "lln_ratio",
    "convergence_report",
]

DEFAULT_X_GRID = np.round(np.linspace(-3.0, 4.0, 71), 10)


def gumbel_cdf(x):
    out = np.exp(-np.exp(-np.asarray(x, dtype=np.float64)))
    return out if out.ndim else float(out)


def normalize(model: TiltedModel, gamma, N):
    """F gamma - log(N/mu) + alpha log log(N/mu) - C."""
    _, alpha = _require_tail(model)
    n_eff = N / model.mu
    if not n_eff > math.e:
        raise DomainError(f"normalize needs N/mu > e, got {n_eff}")
    shift = math.log(n_eff) - alpha * math.log(math.log(n_eff)) + model.C
    out = model.F * np.asarray(gamma, dtype=np.float64) - shift
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GapResult:
    N: int
    x: np.ndarray
    threshold: np.ndarray
    caps: np.ndarray
    exact: np.ndarray
    gumbel: np.ndarray

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.exact - self.gumbel)

    @property
    def sup_gap(self) -> float:
        return float(self.gaps.max())


def exact_gumbel_gap(
    model: TiltedModel,
    N: int,
    x_grid=DEFAULT_X_GRID,
    table: RenewalTable | None = None,
    form: str = "conditional",
    workers: int = 1,
) -> GapResult:
    """Compare the exact law of the longest excursion with exp(-exp(-x)).

    ``form="conditional"`` evaluates P^c(gamma_N <= floor(gamma_x(N/mu)))
    = u_m(N)/u(N); ``form="joint"`` evaluates mu Q(M_{sigma_N} <= m, N in tau)
    = mu u_m(N).
    """
    if form not in ("conditional", "joint"):
        raise ValueError(f"unknown form {form!r}")
    x = np.asarray(x_grid, dtype=np.float64)
    th = np.atleast_1d(gamma_threshold(model, x, N / model.mu))
    caps = np.floor(th).astype(np.int64)
    ends = restricted_endpoints(model, N, caps[caps >= 1], workers)
    scale = model.mu if form == "joint" else 1.0 / _u_at(model, N, table)
    exact = np.array([scale * ends[c] if c >= 1 else 0.0 for c in caps])
    return GapResult(int(N), x, th, caps, exact, np.atleast_1d(gumbel_cdf(x)))


def ks_distance(samples, cdf, cdf_left=None, support=None) -> float:
    """Two-sided KS statistic sup_t |F_n(t) - F(t)|, lattice aware.

    ``cdf_left`` gives the left limit F(t-) (defaults to ``cdf``, i.e. a
    continuous law). For a discrete reference law pass its atoms as
    ``support`` so jumps not hit by the sample are also inspected.
    """
    xs = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = xs.size
    if n == 0:
        raise EmptySample("ks_distance needs at least one sample")
    left = cdf if cdf_left is None else cdf_left
    pts = np.unique(xs if support is None else np.concatenate([xs, np.asarray(support, float)]))
    ecdf = np.searchsorted(xs, pts, side="right") / n
    ecdf_left = np.searchsorted(xs, pts, side="left") / n
    Fr = np.asarray([cdf(t) for t in pts], dtype=np.float64)
    Fl = np.asarray([left(t) for t in pts], dtype=np.float64)
    return float(max(np.abs(ecdf - Fr).max(), np.abs(ecdf_left - Fl).max()))


def dkw_epsilon(n: int, level: float = 0.99) -> float:
    """Dvoretzky-Kiefer-Wolfowitz half width: P(D_n > eps) <= 2 exp(-2 n eps^2)."""
    return math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * n))


def expected_longest(model: TiltedModel, N: int, table=None, workers: int = 1) -> float:
    """E^c[gamma_N] = sum_{m >= 0} P^c(gamma_N > m)."""
    cdf = longest_cdf_vector(model, N, table, workers)
    return math.fsum(1.0 - cdf[:-1])


def lln_ratio(model: TiltedModel, N: int, table=None, workers: int = 1) -> float:
    return expected_longest(model, N, table, workers) * model.F / math.log(N)


@dataclass
class ConvergenceRecord:
    N: int
    sup_gap: float
    ks_gumbel: float | None
    lln_ratio: float
    renewal_gap: float
    threshold_frac: float


@dataclass
class ConvergenceReport:
    records: list = field(default_factory=list)

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    @property
    def sup_gaps_decreasing(self) -> bool:
        g = self.column("sup_gap")
        return all(b < a for a, b in zip(g, g[1:]))

    @property
    def flags(self) -> list:
        out = []
        if not self.sup_gaps_decreasing:
            out.append("sup gap not monotone in N (lattice oscillation?)")
        r = self.column("lln_ratio")
        if not all(abs(b - 1) <= abs(a - 1) for a, b in zip(r, r[1:])):
            out.append("LLN ratio not monotone toward 1")
        return out


def convergence_report(
    model: TiltedModel,
    Ns,
    x_grid=DEFAULT_X_GRID,
    n_samples: int = 0,
    seed: int = 0,
    workers: int = 1,
) -> ConvergenceReport:
    report = ConvergenceReport()
    for N in sorted(int(n) for n in Ns):
        table = renewal_mass(model, N)
        gap = exact_gumbel_gap(model, N, x_grid, table, workers=workers)
        ks = None
        if n_samples:
            rows = run_experiment(model, "pinned", N, n_samples, seed, workers, table)
            ks = ks_distance(normalize(model, rows[:, 0], N), gumbel_cdf)
        th0 = float(gamma_threshold(model, 0.0, N / model.mu))
        report.records.append(
            ConvergenceRecord(
                N=N,
                sup_gap=gap.sup_gap,
                ks_gumbel=ks,
                lln_ratio=lln_ratio(model, N, table, workers),
                renewal_gap=abs(float(table.u[N]) * model.mu - 1.0),
                threshold_frac=th0 - math.floor(th0),
            )
        )
    return report
