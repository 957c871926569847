"""Monte Carlo engines for the tilted renewal.

* free renewal paths run until the first renewal at or after N,
* paths pinned at N (exact, by backward sampling on the renewal table),
* the (excursion length, residual) overshoot chain.

Randomness: sample ``s`` of a run seeded with ``seed`` draws from a Philox
stream keyed by ``SeedSequence(seed, spawn_key=(s,))``, so results depend
only on (seed, s) and never on how samples are scheduled across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import InputError
from .renewal_dp import RenewalTable, renewal_mass
from .tilt import TiltedModel

__all__ = [
    "AliasTable",
    "PathSample",
    "OvershootState",
    "OvershootRun",
    "make_stream",
    "build_alias",
    "sample_free",
    "sample_pinned",
    "overshoot_step",
    "run_overshoot_chain",
    "run_experiment",
]

SEED_MAX = 2**64 - 1


def make_stream(seed: int, index: int | None = None) -> np.random.Generator:
    """Independent counter-based stream for ``(seed, index)``."""
    if not 0 <= int(seed) <= SEED_MAX:
        raise InputError(f"seed must be a 64-bit unsigned integer, got {seed}")
    key = () if index is None else (int(index),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True, eq=False)
class AliasTable:
    prob: np.ndarray
    alias: np.ndarray

    @property
    def M(self) -> int:
        return int(self.prob.size)

    def pmf(self) -> np.ndarray:
        """Per-atom probabilities implied by the table."""
        M = self.M
        out = self.prob.copy()
        np.add.at(out, self.alias, 1.0 - self.prob)
        return out / M

    def draw(self, stream) -> int:
        return int(K.alias_draw(stream, self.prob, self.alias))


def build_alias(weights) -> AliasTable:
    """Vose's alias construction from nonnegative weights (atom i is value i + 1)."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not w.sum() > 0:
        raise InputError("alias table needs a nonempty vector of nonnegative weights")
    M = w.size
    scaled = (w / w.sum()) * M
    prob = np.zeros(M)
    alias = np.arange(M, dtype=np.int64)
    small = [i for i in range(M) if scaled[i] < 1.0]
    large = [i for i in range(M) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large + small:
        prob[i] = 1.0
        alias[i] = i
    prob.setflags(write=False)
    alias.setflags(write=False)
    return AliasTable(prob, alias)


def _alias_for(model: TiltedModel) -> AliasTable:
    cached = getattr(model, "_alias", None)
    if cached is None:
        cached = build_alias(model.q_normalized)
        object.__setattr__(model, "_alias", cached)
    return cached


@dataclass(frozen=True, eq=False)
class PathSample:
    lengths: np.ndarray
    total: int
    gamma: int
    k: int

    @classmethod
    def from_lengths(cls, lengths) -> "PathSample":
        lengths = np.asarray(lengths, dtype=np.int64)
        lengths.setflags(write=False)
        return cls(lengths, int(lengths.sum()), int(lengths.max(initial=0)), int(lengths.size))


def sample_free(stream, model: TiltedModel, N: int) -> PathSample:
    """i.i.d. Q-lengths until the running sum first reaches N (so k = sigma_N)."""
    N = int(N)
    if N < 1:
        raise InputError("N must be >= 1")
    a = _alias_for(model)
    buf = np.empty(N, dtype=np.int64)
    k = K.free_kernel(stream, a.prob, a.alias, N, buf)
    return PathSample.from_lengths(buf[:k])


def _check_table(model, table, N):
    if table is None:
        return renewal_mass(model, N)
    if table.model is not model or table.N < N:
        raise InputError("renewal table must belong to the model and reach the horizon")
    return table


def sample_pinned(stream, model: TiltedModel, table: RenewalTable | None, N: int) -> PathSample:
    """Exact draw from Q(. | N in tau): step n has probability Q(n) u(rem - n) / u(rem)."""
    N = int(N)
    if N < 1:
        raise InputError("N must be >= 1")
    table = _check_table(model, table, N)
    buf = np.empty(N, dtype=np.int64)
    k = K.pinned_kernel(stream, model.q_normalized, table.u, N, buf)
    return PathSample.from_lengths(buf[:k])


@dataclass(frozen=True)
class OvershootState:
    i: int = 1
    j: int = 0

    def __post_init__(self):
        if not (self.i >= 1 and 0 <= self.j <= self.i - 1):
            raise InputError(f"invalid overshoot state ({self.i}, {self.j})")


def overshoot_step(state: OvershootState, stream, model: TiltedModel) -> OvershootState:
    if state.j >= 1:
        return OvershootState(state.i, state.j - 1)
    t = _alias_for(model).draw(stream)
    return OvershootState(t, t - 1)


@dataclass(frozen=True)
class OvershootRun:
    steps: int
    zero_visits: int
    counts: np.ndarray  # counts[i-1]: visits to (i, 0)
    final: OvershootState

    @property
    def zero_fraction(self) -> float:
        return self.zero_visits / self.steps

    @property
    def renewal_marginal(self) -> np.ndarray:
        return self.counts / max(self.zero_visits, 1)


def run_overshoot_chain(
    model: TiltedModel, steps: int, seed: int, start: OvershootState = OvershootState(1, 0)
) -> OvershootRun:
    steps = int(steps)
    if steps < 1:
        raise InputError("steps must be >= 1")
    a = _alias_for(model)
    counts = np.zeros(model.M, dtype=np.int64)
    i, j, z = K.overshoot_kernel(make_stream(seed), a.prob, a.alias, start.i, start.j, steps, counts)
    return OvershootRun(steps, int(z), counts, OvershootState(int(i), int(j)))


def run_experiment(
    model: TiltedModel,
    mode: str,
    N: int,
    n_samples: int,
    seed: int,
    workers: int = 1,
    table: RenewalTable | None = None,
) -> np.ndarray:
    """Rows ``(gamma, k, total)`` for samples 0..n_samples-1, ordered by index."""
    N, n_samples, workers = int(N), int(n_samples), max(1, int(workers))
    if mode not in ("free", "pinned"):
        raise InputError(f"mode must be 'free' or 'pinned', got {mode!r}")
    if n_samples < 1 or N < 1:
        raise InputError("need N >= 1 and n_samples >= 1")
    make_stream(seed, 0)  # validates the seed
    out = np.empty((n_samples, 3), dtype=np.int64)
    if mode == "pinned":
        table = _check_table(model, table, N)
        q, u = model.q_normalized, table.u
    else:
        a = _alias_for(model)

    def work(lo, hi):
        buf = np.empty(N, dtype=np.int64)
        for s in range(lo, hi):
            rng = make_stream(seed, s)
            if mode == "pinned":
                k = K.pinned_kernel(rng, q, u, N, buf)
            else:
                k = K.free_kernel(rng, a.prob, a.alias, N, buf)
            row = buf[:k]
            out[s, 0] = row.max()
            out[s, 1] = k
            out[s, 2] = row.sum()

    bounds = np.linspace(0, n_samples, min(workers * 4, n_samples) + 1).astype(int)
    spans = list(zip(bounds[:-1], bounds[1:]))
    if workers == 1:
        for lo, hi in spans:
            work(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda span: work(*span), spans))
    return out
