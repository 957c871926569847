"""Exact renewal dynamic programming under the tilted law.

Under Q the excursion lengths are i.i.d. with law Q(n); every composition
(n_1, ..., n_k) of N carries P-weight e^{beta k} prod K(n_i) = e^{NF} prod Q(n_i).
The tilting factor is constant on {N in tau}, so conditioning the tilted
renewal on that event reproduces the constrained polymer measure exactly:

    P^c(longest excursion <= m) = u_m(N) / u(N),
    log Z^c_N = N F + log u(N).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import renewal_kernel
from .errors import DegenerateHorizon, HorizonTooLarge, InputError, TooLarge
from .laws import ExcursionLaw
from .tilt import TiltedModel

__all__ = [
    "RenewalTable",
    "RestrictedTable",
    "OracleResult",
    "renewal_mass",
    "restricted_renewal_mass",
    "restricted_endpoints",
    "longest_cdf_exact",
    "longest_cdf_vector",
    "log_partition_constrained",
    "brute_force_oracle",
    "MAX_HORIZON",
    "ORACLE_MAX_N",
]

MAX_HORIZON = 10**7
ORACLE_MAX_N = 16


@dataclass(frozen=True, eq=False)
class RenewalTable:
    model: TiltedModel
    N: int
    u: np.ndarray

    def __getitem__(self, n):
        return self.u[n]


@dataclass(frozen=True, eq=False)
class RestrictedTable:
    model: TiltedModel
    m: int
    N: int
    u: np.ndarray

    def __getitem__(self, n):
        return self.u[n]


def _check_horizon(N, max_horizon):
    N = int(N)
    if N < 1:
        raise InputError(f"horizon must be >= 1, got {N}")
    if N > max_horizon:
        raise HorizonTooLarge(f"horizon {N} exceeds the budget of {max_horizon}")
    return N


def _table(model, N, cap):
    u = renewal_kernel(model.q_normalized, N, cap)
    u.setflags(write=False)
    return u


def renewal_mass(model: TiltedModel, N: int, max_horizon: int = MAX_HORIZON) -> RenewalTable:
    N = _check_horizon(N, max_horizon)
    return RenewalTable(model, N, _table(model, N, model.M))


def restricted_renewal_mass(
    model: TiltedModel, N: int, m: int, max_horizon: int = MAX_HORIZON
) -> RestrictedTable:
    N = _check_horizon(N, max_horizon)
    m = int(m)
    if m < 1:
        raise InputError(f"cap must be >= 1, got {m}")
    return RestrictedTable(model, m, N, _table(model, N, m))


def restricted_endpoints(model: TiltedModel, N: int, caps, workers: int = 1) -> dict:
    """u_m(N) for every cap in ``caps``; each cap is an independent DP."""
    N = _check_horizon(N, MAX_HORIZON)
    caps = sorted({int(m) for m in caps})
    q = model.q_normalized
    full = None

    def one(m):
        if m < 1:
            return 0.0
        if m >= min(N, model.M):
            return None
        return float(renewal_kernel(q, N, m)[N])

    if workers > 1 and len(caps) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(one, caps))
    else:
        vals = [one(m) for m in caps]
    out = {}
    for m, v in zip(caps, vals):
        if v is None:
            if full is None:
                full = float(renewal_kernel(q, N, model.M)[N])
            v = full
        out[m] = v
    return out


def _u_at(model, N, table):
    if table is not None and table.N >= N and table.model is model:
        return float(table.u[N])
    return float(renewal_kernel(model.q_normalized, N, model.M)[N])


def longest_cdf_exact(model: TiltedModel, N: int, m: int, table: RenewalTable | None = None) -> float:
    """P^c_{beta,N}(longest excursion <= m) = u_m(N) / u(N)."""
    N = _check_horizon(N, MAX_HORIZON)
    uN = _u_at(model, N, table)
    if uN <= 0.0:
        raise DegenerateHorizon(f"u({N}) = 0: the horizon is not a possible renewal epoch")
    if m < 1:
        return 0.0
    if m >= min(N, model.M):
        return 1.0
    return float(renewal_kernel(model.q_normalized, N, int(m))[N]) / uN


def longest_cdf_vector(
    model: TiltedModel, N: int, table: RenewalTable | None = None, workers: int = 1
) -> np.ndarray:
    """cdf[m] = P^c(longest <= m) for m = 0..min(N, M); the last entry is 1."""
    N = _check_horizon(N, MAX_HORIZON)
    top = min(N, model.M)
    uN = _u_at(model, N, table)
    if uN <= 0.0:
        raise DegenerateHorizon(f"u({N}) = 0: the horizon is not a possible renewal epoch")
    ends = restricted_endpoints(model, N, range(1, top), workers)
    cdf = np.empty(top + 1)
    cdf[0] = 0.0
    for m in range(1, top):
        cdf[m] = ends[m] / uN
    cdf[top] = 1.0
    return cdf


def log_partition_constrained(model: TiltedModel, N: int, table: RenewalTable | None = None) -> float:
    """log Z^c_{beta,N} = N F + log u(N)."""
    N = _check_horizon(N, MAX_HORIZON)
    uN = _u_at(model, N, table)
    if uN <= 0.0:
        return -math.inf
    return N * model.F + math.log(uN)


@dataclass(frozen=True)
class OracleResult:
    N: int
    log_zc: float
    pmf: np.ndarray  # pmf[m] = P^c(longest = m), m = 0..N

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)


def brute_force_oracle(law: ExcursionLaw, beta: float, N: int) -> OracleResult:
    """Enumerate all 2^(N-1) compositions of N with weight e^{beta k} prod K(n_i)."""
    N = int(N)
    if N < 1:
        raise InputError("N must be >= 1")
    if N > ORACLE_MAX_N:
        raise TooLarge(f"oracle enumerates 2^(N-1) compositions; N={N} > {ORACLE_MAX_N}")
    K = [0.0] + [float(v) for v in law.pmf_array(np.arange(1, N + 1))]
    eb = math.exp(beta)
    by_longest = [[] for _ in range(N + 1)]
    for mask in range(1 << (N - 1)):
        # bit b set: a renewal at time b + 1
        w = 1.0
        longest = 0
        last = 0
        for b in range(N - 1):
            if mask >> b & 1:
                step = b + 1 - last
                w *= eb * K[step]
                longest = max(longest, step)
                last = b + 1
        step = N - last
        w *= eb * K[step]
        longest = max(longest, step)
        by_longest[longest].append(w)
    mass = np.array([math.fsum(ws) for ws in by_longest])
    Z = math.fsum(mass)
    log_zc = math.log(Z) if Z > 0 else -math.inf
    pmf = mass / Z if Z > 0 else mass
    return OracleResult(N, log_zc, pmf)
