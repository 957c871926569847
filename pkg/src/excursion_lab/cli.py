"""Command line entry point: ``excursion-lab <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid input, 1 runtime failure. Data files are
deterministic; timing lives only in the provenance record.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ExcursionLabError, InputError
from .extremes import exact_gumbel_gap, lln_ratio
from .laws import parse_law
from .renewal_dp import (
    brute_force_oracle,
    longest_cdf_exact,
    longest_cdf_vector,
    renewal_mass,
)
from .sampler import SEED_MAX, run_experiment, run_overshoot_chain
from .tilt import DEFAULT_EPS_TRUNC, DEFAULT_TOL, build_tilted

log = logging.getLogger("excursion_lab")

THREADS_ENV = "EXCURSION_LAB_THREADS"


def fmt(x) -> str:
    return format(float(x), ".17g")


def int_list(text: str) -> list[int]:
    out = []
    for tok in str(text).replace(" ", "").split(","):
        if tok:
            out.append(int(float(tok)) if "e" in tok.lower() else int(tok))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def x_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive stop) or a comma list."""
    if ":" in text:
        a, b, s = (float(v) for v in text.split(":"))
        if s <= 0 or b < a:
            raise argparse.ArgumentTypeError("need start <= stop and step > 0")
        n = int(round((b - a) / s)) + 1
        return np.round(a + s * np.arange(n), 10)
    return np.array([float(v) for v in text.split(",") if v])


@dataclass
class RunConfig:
    command: str
    law: str
    beta: float
    eps_trunc: float
    tol: float
    N: list = field(default_factory=list)
    m: list | None = None
    x_grid: list | None = None
    n_samples: int = 0
    seed: int = 0
    workers: int = 1
    mode: str = "pinned"
    steps: int = 0
    form: str = "conditional"
    output: str | None = None

    def validate(self):
        if not self.beta > 0:
            raise InputError("beta must be positive")
        for name in ("eps_trunc", "tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-6:
                raise InputError(f"{name} must lie in (0, 1e-6]")
        if not 0 <= self.seed <= SEED_MAX:
            raise InputError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise InputError("workers must be >= 1")
        if any(n < 1 for n in self.N):
            raise InputError("N must be >= 1")


def _common(p):
    p.add_argument("--law", default="zeta:alpha=2", help="zeta:alpha=A | twopoint:q=Q | srw1d | table:path=FILE")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eps-trunc", type=float, default=DEFAULT_EPS_TRUNC)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--workers", type=int, default=None, help=f"defaults to ${THREADS_ENV} or 1")
    p.add_argument("--output", "-o", default=None, help="data file; stdout if omitted")
    p.add_argument("--config", default=None, help="key=value defaults file (flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="excursion-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("free-energy", help="solve for F, mu, C")
    _common(p)

    p = sub.add_parser("exact-cdf", help="exact law of the longest excursion (CSV N,m,cdf)")
    _common(p)
    p.add_argument("--N", type=int_list, required=True)
    p.add_argument("--m", type=int_list, default=None)

    p = sub.add_parser("oracle", help="brute-force enumeration (CSV N,m,cdf,log_zc)")
    _common(p)
    p.add_argument("--N", type=int_list, required=True)

    p = sub.add_parser("simulate", help="Monte Carlo samples (CSV sample,gamma,k)")
    _common(p)
    p.add_argument("--N", type=int_list, required=True)
    p.add_argument("--mode", choices=("free", "pinned"), default="pinned")
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify-gumbel", help="exact CDF vs Gumbel (CSV N,x,exact_cdf,gumbel_cdf,gap)")
    _common(p)
    p.add_argument("--N", type=int_list, default=int_list("1000,10000,100000"))
    p.add_argument("--x-grid", type=x_grid, default=x_grid("-3:4:0.1"))
    p.add_argument("--form", choices=("conditional", "joint"), default="conditional")
    p.add_argument("--summary", default=None, help="JSON summary path")

    p = sub.add_parser("overshoot-chain", help="run the overshoot Markov chain (JSON)")
    _common(p)
    p.add_argument("--steps", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    parser.subcommands = sub.choices
    return parser


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = read_config(args.config)
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        bad = set(defaults) - known - {"config"}
        if bad:
            raise InputError(f"unknown config keys: {sorted(bad)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if args.workers is None:
        env = os.environ.get(THREADS_ENV)
        try:
            args.workers = int(env) if env else 1
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer") from None
    return args


def to_config(args) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        law=args.law,
        beta=args.beta,
        eps_trunc=args.eps_trunc,
        tol=args.tol,
        N=list(getattr(args, "N", []) or []),
        m=getattr(args, "m", None),
        x_grid=[float(v) for v in args.x_grid] if hasattr(args, "x_grid") else None,
        n_samples=getattr(args, "n_samples", 0),
        seed=getattr(args, "seed", 0),
        workers=args.workers,
        mode=getattr(args, "mode", "pinned"),
        steps=getattr(args, "steps", 0),
        form=getattr(args, "form", "conditional"),
        output=args.output,
    )
    cfg.validate()
    return cfg


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=None, sort_keys=False) + "\n"


class Outputs:
    """Collects data files; ``main`` decides where they go."""

    def __init__(self, output):
        self.output = Path(output) if output else None
        self.side = []

    def primary(self, text, stdout):
        if self.output:
            self.output.write_text(text)
        else:
            stdout.write(text)

    def sidecar(self, text, path=None, stderr=None):
        if path is None and self.output is not None:
            path = self.output.with_suffix(".json")
        if path is not None:
            Path(path).write_text(text)
        elif stderr is not None:
            stderr.write(text)


def cmd_free_energy(cfg, model, out, stdout, stderr, args):
    out.primary(_json(model.summary()), stdout)


def cmd_exact_cdf(cfg, model, out, stdout, stderr, args):
    rows = []
    for N in cfg.N:
        table = renewal_mass(model, N)
        if cfg.m:
            for m in cfg.m:
                rows.append((N, m, fmt(longest_cdf_exact(model, N, m, table))))
        else:
            cdf = longest_cdf_vector(model, N, table, cfg.workers)
            rows.extend((N, m, fmt(cdf[m])) for m in range(1, cdf.size))
    out.primary(_csv(["N", "m", "cdf"], rows), stdout)


def cmd_oracle(cfg, model, out, stdout, stderr, args):
    law = model.law
    rows = []
    for N in cfg.N:
        res = brute_force_oracle(law, cfg.beta, N)
        cdf = np.minimum(res.cdf, 1.0)
        rows.extend((N, m, fmt(cdf[m]), fmt(res.log_zc)) for m in range(1, N + 1))
    out.primary(_csv(["N", "m", "cdf", "log_zc"], rows), stdout)


def cmd_simulate(cfg, model, out, stdout, stderr, args):
    if len(cfg.N) != 1:
        raise InputError("simulate takes a single N")
    N = cfg.N[0]
    res = run_experiment(model, cfg.mode, N, cfg.n_samples, cfg.seed, cfg.workers)
    rows = ((s, int(g), int(k)) for s, (g, k, _) in enumerate(res))
    out.primary(_csv(["sample", "gamma", "k"], rows), stdout)
    side = {"seed": cfg.seed, "N": N, "mode": cfg.mode, "n_samples": cfg.n_samples}
    out.sidecar(_json(side), stderr=stderr)


def cmd_verify_gumbel(cfg, model, out, stdout, stderr, args):
    rows = []
    summary = {"sup_gaps": [], "lln_ratios": [], "renewal_gaps": []}
    for N in cfg.N:
        table = renewal_mass(model, N)
        gap = exact_gumbel_gap(model, N, args.x_grid, table, form=cfg.form, workers=cfg.workers)
        for x, e, g in zip(gap.x, gap.exact, gap.gumbel):
            rows.append((N, fmt(x), fmt(e), fmt(g), fmt(abs(e - g))))
        summary["sup_gaps"].append(gap.sup_gap)
        summary["lln_ratios"].append(lln_ratio(model, N, table, cfg.workers))
        summary["renewal_gaps"].append(abs(float(table.u[N]) * model.mu - 1.0))
    out.primary(_csv(["N", "x", "exact_cdf", "gumbel_cdf", "gap"], rows), stdout)
    out.sidecar(_json(summary), path=args.summary, stderr=stderr)


def cmd_overshoot_chain(cfg, model, out, stdout, stderr, args):
    run = run_overshoot_chain(model, cfg.steps, cfg.seed)
    q = model.q_normalized
    tv = 0.5 * float(np.abs(run.renewal_marginal - q).sum())
    p = 1.0 / model.mu
    res = {
        "steps": run.steps,
        "zero_visits": run.zero_visits,
        "zero_fraction": run.zero_fraction,
        "inverse_mu": p,
        "sigma": math.sqrt(p * (1 - p) / run.steps),
        "renewal_marginal_tv": tv,
        "final_state": [run.final.i, run.final.j],
    }
    out.primary(_json(res), stdout)


HANDLERS = {
    "free-energy": cmd_free_energy,
    "exact-cdf": cmd_exact_cdf,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "verify-gumbel": cmd_verify_gumbel,
    "overshoot-chain": cmd_overshoot_chain,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except InputError as exc:
        stderr.write(f"error: {exc}\n")
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr)

    t0 = time.perf_counter()
    try:
        cfg = to_config(args)
        law = parse_law(cfg.law)
        model = build_tilted(law, cfg.beta, cfg.eps_trunc, cfg.tol)
        log.info("F=%.17g mu=%.17g M=%d period=%d", model.F, model.mu, model.M, law.period)
        out = Outputs(cfg.output)
        HANDLERS[cfg.command](cfg, model, out, stdout, stderr, args)
    except InputError as exc:
        stderr.write(f"error: {exc}\n")
        return 2
    except (ExcursionLabError, MemoryError, OSError) as exc:
        stderr.write(f"runtime error: {exc}\n")
        return 1

    prov = {
        "version": __version__,
        "config": asdict(cfg),
        "period": law.period,
        "wall_time_s": time.perf_counter() - t0,
    }
    if cfg.output:
        Path(str(cfg.output) + ".provenance.json").write_text(_json(prov))
    else:
        stderr.write(_json({"provenance": prov}))
    return 0


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
