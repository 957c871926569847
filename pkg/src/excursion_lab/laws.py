"""Return-time laws K(n) = P(tau_1 = n) for the pinned polymer.

Every law exposes vectorised ``pmf_array`` / ``tail_array`` and, where the
law has a power-law tail K(n) ~ D n^(-alpha), the pair ``(D, alpha)``.
Periodic walks are stored in reduced time, K~(n) = K(p n); ``period``
records the multiplier p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import zeta as _hurwitz

from .errors import AssumptionNotSatisfied, InputError, ValidationFailure

__all__ = [
    "ExcursionLaw",
    "Zeta",
    "TwoPoint",
    "SRW1D",
    "Tabulated",
    "ValidationReport",
    "pmf",
    "tail_exact",
    "tail_params",
    "validate",
    "parse_law",
    "load_table",
]


class ExcursionLaw:
    """Base class. Subclasses are frozen dataclasses."""

    family = "abstract"
    period = 1

    def pmf_array(self, n) -> np.ndarray:
        raise NotImplementedError

    def tail_array(self, k) -> np.ndarray:
        """P(tau_1 > k) for each entry of ``k``."""
        raise NotImplementedError

    def tail_params(self) -> tuple[float, float]:
        raise AssumptionNotSatisfied(f"{self.family} law has no power-law tail")

    @property
    def support_max(self) -> int | None:
        """Largest n with K(n) > 0, or None for infinite support."""
        return None

    @property
    def has_tail(self) -> bool:
        try:
            self.tail_params()
        except AssumptionNotSatisfied:
            return False
        return True

    def describe(self) -> str:
        return self.family


@dataclass(frozen=True)
class Zeta(ExcursionLaw):
    """K(n) = n^(-alpha) / zeta(alpha)."""

    alpha: float = 2.0
    family = "zeta"

    def __post_init__(self):
        if not self.alpha > 1:
            raise InputError(f"zeta law needs alpha > 1, got {self.alpha}")

    @property
    def norm(self) -> float:
        return float(_hurwitz(self.alpha, 1.0))

    def pmf_array(self, n):
        n = np.asarray(n, dtype=np.float64)
        with np.errstate(divide="ignore"):
            out = np.where(n >= 1, n ** (-self.alpha) / self.norm, 0.0)
        return out

    def tail_array(self, k):
        # Hurwitz zeta(alpha, k+1) = sum_{n>k} n^-alpha
        k = np.maximum(np.asarray(k, dtype=np.float64), 0.0)
        out = _hurwitz(self.alpha, k + 1.0) / self.norm
        return np.where(k == 0, 1.0, out)

    def tail_params(self):
        return 1.0 / self.norm, float(self.alpha)

    def describe(self):
        return f"zeta:alpha={self.alpha!r}"


@dataclass(frozen=True)
class TwoPoint(ExcursionLaw):
    """K(1) = q, K(2) = 1 - q."""

    q: float = 0.5
    family = "twopoint"

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise InputError(f"twopoint law needs 0 <= q <= 1, got {self.q}")

    def pmf_array(self, n):
        n = np.asarray(n)
        return np.where(n == 1, self.q, np.where(n == 2, 1.0 - self.q, 0.0))

    def tail_array(self, k):
        k = np.asarray(k)
        return np.where(k <= 0, 1.0, np.where(k == 1, 1.0 - self.q, 0.0))

    @property
    def support_max(self):
        return 2 if self.q < 1.0 else 1

    def describe(self):
        return f"twopoint:q={self.q!r}"


# sqrt(pi n) * Gamma(n + 1/2) / Gamma(n + 1) expanded in 1/n
_CENTRAL_SERIES = (1.0, -1 / 8, 1 / 128, 5 / 1024, -21 / 32768, -399 / 262144, 869 / 4194304)
_CENTRAL_EXACT_MAX = 128
_CENTRAL_EXACT = np.array(
    [math.comb(2 * n, n) / 4**n for n in range(_CENTRAL_EXACT_MAX + 1)]
)


def _central(n) -> np.ndarray:
    """C(2n, n) 4^(-n), exact for small n, asymptotic series beyond."""
    n = np.asarray(n, dtype=np.int64)
    shape = n.shape
    n = n.ravel()
    out = np.empty(n.shape, dtype=np.float64)
    small = n <= _CENTRAL_EXACT_MAX
    out[small] = _CENTRAL_EXACT[np.maximum(n[small], 0)]
    big = n[~small].astype(np.float64)
    if big.size:
        s = np.zeros_like(big)
        for c in reversed(_CENTRAL_SERIES):
            s = s / big + c
        out[~small] = s / np.sqrt(np.pi * big)
    return out.reshape(shape)


@dataclass(frozen=True)
class SRW1D(ExcursionLaw):
    """First return of simple random walk on Z, in reduced time (period 2).

    K~(n) = C(2n, n) 2^(-2n) / (2n - 1), and P(tau_1 > n) = C(2n, n) 2^(-2n).
    """

    family = "srw1d"
    period = 2

    def pmf_array(self, n):
        n = np.asarray(n, dtype=np.int64)
        out = _central(n) / np.maximum(2 * n - 1, 1)
        return np.where(n >= 1, out, 0.0)

    def tail_array(self, k):
        k = np.maximum(np.asarray(k, dtype=np.int64), 0)
        return _central(k)

    def tail_params(self):
        return 1.0 / (2.0 * math.sqrt(math.pi)), 1.5

    def describe(self):
        return "srw1d"


@dataclass(frozen=True, eq=False)
class Tabulated(ExcursionLaw):
    """Finite pmf table, ``probs[i] = K(i + 1)``, renormalised on construction.

    The continuation rule is truncation: the table is the full support.
    Declared ``D``/``alpha`` are metadata, cross-checked by :func:`validate`.
    """

    probs: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    D: float | None = None
    alpha: float | None = None
    source: str = "table"
    family = "table"

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).ravel()
        if p.size == 0:
            raise InputError("empty pmf table")
        total = math.fsum(p)
        if total > 0:
            p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        tails = np.concatenate([np.cumsum(p[::-1])[::-1], [0.0]])
        tails[0] = 1.0
        tails.setflags(write=False)
        object.__setattr__(self, "_tails", tails)

    def pmf_array(self, n):
        n = np.asarray(n, dtype=np.int64)
        inside = (n >= 1) & (n <= self.probs.size)
        return np.where(inside, self.probs[np.clip(n - 1, 0, self.probs.size - 1)], 0.0)

    def tail_array(self, k):
        k = np.clip(np.asarray(k, dtype=np.int64), 0, self.probs.size)
        return self._tails[k]

    def tail_params(self):
        if self.D is None or self.alpha is None:
            return super().tail_params()
        return float(self.D), float(self.alpha)

    @property
    def support_max(self):
        nz = np.nonzero(self.probs)[0]
        return int(nz[-1]) + 1 if nz.size else 0

    def describe(self):
        return f"table:path={self.source}"


def pmf(law: ExcursionLaw, n: int) -> float:
    return float(law.pmf_array(np.array([n]))[0])


def tail_exact(law: ExcursionLaw, k: int) -> float:
    return float(law.tail_array(np.array([k]))[0])


def tail_params(law: ExcursionLaw) -> tuple[float, float]:
    return law.tail_params()


@dataclass
class ValidationReport:
    law: str
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def add(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))


RATIO_POINTS = (10**3, 10**4, 10**5)


def validate(law: ExcursionLaw, mass_tol: float = 1e-12, ratio_tol: float = 1e-3) -> ValidationReport:
    """Check normalisation, nonnegativity and (if claimed) the power-law tail.

    Raises ValidationFailure when any check fails; otherwise returns the report.
    """
    rep = ValidationReport(law.describe())
    L = law.support_max or 10**4
    n = np.arange(1, L + 1)
    p = law.pmf_array(n)

    neg = np.nonzero(p < 0)[0]
    rep.add("nonnegative", neg.size == 0, f"negative at n={(neg + 1)[:5].tolist()}" if neg.size else "")

    mass = math.fsum(p) + float(law.tail_array(L))
    rep.add("mass", abs(mass - 1.0) <= mass_tol, f"|sum - 1| = {abs(mass - 1.0):.3e}")
    rep.add("tail(0) = 1", float(law.tail_array(0)) == 1.0)

    if law.has_tail:
        D, alpha = law.tail_params()
        pts = [m for m in RATIO_POINTS if law.support_max is None or m <= law.support_max]
        if not pts:
            rep.notes.append("declared tail not checkable inside the table")
        devs = {}
        for m in pts:
            devs[m] = abs(float(law.pmf_array(m)) * m**alpha / D - 1.0)
        if pts:
            last = pts[-1]
            rep.add(
                "tail ratio",
                devs[last] < ratio_tol,
                ", ".join(f"n={m}: {d:.2e}" for m, d in devs.items()),
            )
    else:
        rep.notes.append("no tail claim")

    if not rep.passed:
        raise ValidationFailure([f"{name}: {detail}" for name, ok, detail in rep.checks if not ok])
    return rep


def load_table(path, D=None, alpha=None) -> Tabulated:
    """Read ``n value`` pairs (one per line) into a renormalised table."""
    pairs = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"{path}:{lineno}: expected 'n value'")
        n, v = int(parts[0]), float(parts[1])
        if n < 1 or v < 0 or not math.isfinite(v):
            raise InputError(f"{path}:{lineno}: need n >= 1 and finite value >= 0")
        pairs[n] = pairs.get(n, 0.0) + v
    if not pairs:
        raise InputError(f"{path}: no entries")
    probs = np.zeros(max(pairs))
    for n, v in pairs.items():
        probs[n - 1] = v
    if not probs.sum() > 0:
        raise InputError(f"{path}: table has zero mass")
    return Tabulated(probs, D=D, alpha=alpha, source=str(path))


def _kv(body: str) -> dict:
    out = {}
    for item in filter(None, body.split(",")):
        if "=" not in item:
            raise InputError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_law(spec: str) -> ExcursionLaw:
    """Parse ``zeta:alpha=2``, ``twopoint:q=0.5``, ``srw1d`` or ``table:path=FILE``."""
    name, _, body = spec.partition(":")
    name = name.strip().lower()
    args = _kv(body)
    try:
        if name == "zeta" and set(args) <= {"alpha"}:
            return Zeta(float(args.get("alpha", 2.0)))
        if name == "twopoint" and set(args) <= {"q"}:
            return TwoPoint(float(args.get("q", 0.5)))
        if name == "srw1d" and not args:
            return SRW1D()
        if name == "table" and "path" in args and set(args) <= {"path", "D", "alpha"}:
            D = float(args["D"]) if "D" in args else None
            alpha = float(args["alpha"]) if "alpha" in args else None
            return load_table(args["path"], D=D, alpha=alpha)
    except (ValueError, OSError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad law spec {spec!r}: {exc}") from exc
    raise InputError(f"unknown law spec {spec!r}")
