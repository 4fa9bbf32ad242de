"""Command-line front end: parameter sweeps and figure presets written as CSV.

Exit status is 0 on success, 2 on a usage error (nothing is written) and 1
when a computation fails (diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import harq
from .channel_stats import (
    ChannelParams,
    log_fading_quantile,
    mean_mutual_info,
    mi_sum_distribution,
    sample_block_mi,
    std_mutual_info,
)
from .mc_sim import SimConfig, derive_seed, simulate, simulate_sweep
from .outage_capacity import (
    OutageSpec,
    affine_approx_capacity,
    chebyshev_bounds,
    eps_outage_capacity,
    gap_ec_fd,
    gaussian_approx_capacity,
)
from .special_math import DomainError, NumericalError, QuadratureError, q_function

COMMANDS = ("capacity", "harq-ir", "harq-cc", "optimize", "simulate", "figure", "compare")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunSpec:
    command: str
    snr_db: tuple[float, ...]
    rounds: tuple[int, ...]
    eps: tuple[float, ...]
    protocol: str = "ir"
    optimize: bool = False
    messages: int = 100_000
    seed: int = 1
    samples: int = 0
    out: str | None = None
    figure: int | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.snr_db or not self.rounds or not self.eps:
            raise UsageError("parameter ranges must be nonempty")
        if any(m < 1 for m in self.rounds):
            raise UsageError("--M values must be >= 1")
        if any(not (0.0 < e < 1.0) for e in self.eps):
            raise UsageError("--eps values must lie in (0, 1)")
        if self.protocol not in ("ir", "cc"):
            raise UsageError("--protocol must be ir or cc")
        if self.messages < 1:
            raise UsageError("--messages must be >= 1")
        if self.samples < 0:
            raise UsageError("--samples must be >= 0")
        if self.out is not None:
            parent = os.path.dirname(os.path.abspath(self.out))
            if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
                raise UsageError(f"output directory {parent!r} is not writable")


# ---------------------------------------------------------------------------
# range parsing
# ---------------------------------------------------------------------------

def parse_range(text: str, cast: Callable = float) -> tuple:
    """``a,b,c`` or ``start:stop:step`` (stop inclusive) or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range {text!r} must look like start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise UsageError(f"range step must be > 0 in {text!r}")
        n = math.floor((stop - start) / step + 1e-9) + 1
        if n < 1:
            raise UsageError(f"range {text!r} is empty")
        values = [start + i * step for i in range(n)]
        # round away accumulated float noise, e.g. 0.30000000000000004
        values = [round(v, 12) for v in values]
    else:
        values = [float(v) for v in text.split(",") if v.strip()]
        if not values:
            raise UsageError(f"empty value list {text!r}")
    if cast is int:
        if any(v != int(v) for v in values):
            raise UsageError(f"integer values expected in {text!r}")
        return tuple(int(v) for v in values)
    return tuple(cast(v) for v in values)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if not math.isfinite(v):
        raise NumericalError(f"non-finite value {v!r} in output")
    return f"{v:.9g}"


def render_csv(rows: list[dict]) -> str:
    if not rows:
        raise NumericalError("no rows produced")
    header = list(rows[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in header])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _chan(snr_db: float) -> ChannelParams:
    return ChannelParams.from_db(snr_db)


def cmd_capacity(spec: RunSpec) -> list[dict]:
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        mu = mean_mutual_info(p)
        for L in spec.rounds:
            for e in spec.eps:
                o = OutageSpec(e, L)
                exact = eps_outage_capacity(p, o).rate
                gauss = gaussian_approx_capacity(p, o).rate
                lo, hi = chebyshev_bounds(p, o)
                gap, gap_approx = gap_ec_fd(p, o)
                row = {
                    "snr_db": s, "snr_linear": p.snr, "L": L, "eps": e, "ergodic": mu,
                    "c_exact": exact, "c_gaussian": gauss, "gaussian_negative": gauss < 0,
                    "c_affine": affine_approx_capacity(p, o).rate,
                    "chebyshev_lower": lo.rate, "chebyshev_upper": hi.rate,
                    "gap_exact": gap, "gap_gaussian": gap_approx,
                }
                if spec.samples:
                    draws = sample_block_mi(p, spec.samples * L, derive_seed(spec.seed, s)).values
                    avg = draws.reshape(spec.samples, L).mean(axis=1)
                    row["mc_quantile"] = float(np.quantile(avg, e))
                    row["mc_outage_at_exact"] = float(np.mean(avg <= exact))
                rows.append(row)
    return rows


def cmd_harq_ir(spec: RunSpec) -> list[dict]:
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        mu = mean_mutual_info(p)
        for e in spec.eps:
            for a in harq.ir_rates(p, spec.rounds, e):
                M = a.max_rounds
                gap_approx, gap_simple = harq._gap_ec_ir_approx(mu, std_mutual_info(p), M, e)
                row = {
                    "snr_db": s, "snr_linear": p.snr, "M": M, "eps": e,
                    "initial_rate": a.initial_rate, "expected_rounds": a.expected_rounds,
                    "c_ir": a.longterm_rate, "c_eps": a.initial_rate / M, "ergodic": mu,
                    "c_ir_gaussian": harq.ir_rate_gaussian(p, M, e),
                    "expected_rounds_approx": harq.expected_rounds_approx(p, M, e),
                    "gap_exact": mu - a.longterm_rate, "gap_approx": gap_approx, "gap_simple": gap_simple,
                    "early_termination_gaussian": harq.early_termination_probability(p, M, e) if M > 1 else 0.0,
                }
                if spec.optimize:
                    row["r_opt"], row["c_ir_opt"] = harq.optimize_initial_rate(p, M, e)
                rows.append(row)
    return rows


def cmd_harq_cc(spec: RunSpec) -> list[dict]:
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for M in spec.rounds:
            for e in spec.eps:
                a = harq.cc_rate(p, M, e)
                prelog, offset = harq.cc_affine(p, M, e)
                row = {
                    "snr_db": s, "snr_linear": p.snr, "M": M, "eps": e,
                    "initial_rate": a.initial_rate, "expected_rounds": a.expected_rounds,
                    "c_cc": a.longterm_rate, "prelog": prelog, "offset": offset,
                }
                if spec.optimize:
                    row["r_opt"], row["c_cc_opt"] = harq.optimize_cc_rate(p, M, e)
                rows.append(row)
    return rows


def cmd_optimize(spec: RunSpec) -> list[dict]:
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for M in spec.rounds:
            for e in spec.eps:
                if spec.protocol == "ir":
                    base = harq.ir_rate(p, M, e)
                    r_opt, rate_opt = harq.optimize_initial_rate(p, M, e)
                else:
                    base = harq.cc_rate(p, M, e)
                    r_opt, rate_opt = harq.optimize_cc_rate(p, M, e)
                rows.append({
                    "snr_db": s, "snr_linear": p.snr, "protocol": spec.protocol, "M": M, "eps": e,
                    "r_unopt": base.initial_rate, "rate_unopt": base.longterm_rate,
                    "r_opt": r_opt, "rate_opt": rate_opt, "gain": rate_opt - base.longterm_rate,
                })
    return rows


def _base_config(spec: RunSpec, M: int, e: float, snr_db: float = 0.0) -> SimConfig:
    return SimConfig(_chan(snr_db), harq.HarqConfig(spec.protocol.upper(), M, e), spec.messages, spec.seed)


def cmd_simulate(spec: RunSpec) -> list[dict]:
    rows = []
    for M in spec.rounds:
        for e in spec.eps:
            reports = simulate_sweep(_base_config(spec, M, e), spec.snr_db, spec.workers)
            for s, r in zip(spec.snr_db, reports):
                rows.append({
                    "snr_db": s, "snr_linear": r.snr, "protocol": spec.protocol, "M": M, "eps": e,
                    "messages": r.messages, "seed": r.seed, "initial_rate": r.initial_rate,
                    "sim_rate": r.empirical_rate, "rate_std_error": r.rate_std_error,
                    "ci95_rate": r.ci95_rate, "sim_expected_rounds": r.empirical_expected_rounds,
                    "sim_outage": r.empirical_outage, "ci95_outage": r.ci95_outage,
                    "outage_lo": r.outage_interval[0], "outage_hi": r.outage_interval[1],
                })
    return rows


def cmd_compare(spec: RunSpec) -> list[dict]:
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for M in spec.rounds:
            for e in spec.eps:
                analytic = (harq.ir_rate if spec.protocol == "ir" else harq.cc_rate)(p, M, e)
                cfg = SimConfig(p, harq.HarqConfig(spec.protocol.upper(), M, e), spec.messages,
                                derive_seed(spec.seed, s))
                r = simulate(cfg, spec.workers)
                se_null = math.sqrt(e * (1.0 - e) / r.messages)
                rows.append({
                    "snr_db": s, "snr_linear": p.snr, "protocol": spec.protocol, "M": M, "eps": e,
                    "messages": r.messages, "seed": r.seed,
                    "analytic_rate": analytic.longterm_rate, "sim_rate": r.empirical_rate,
                    "rate_std_error": r.rate_std_error, "ci95_rate": r.ci95_rate,
                    "z_rate": (r.empirical_rate - analytic.longterm_rate) / r.rate_std_error
                    if r.rate_std_error > 0 else 0.0,
                    "analytic_expected_rounds": analytic.expected_rounds,
                    "sim_expected_rounds": r.empirical_expected_rounds,
                    "analytic_outage": analytic.outage_at_termination, "sim_outage": r.empirical_outage,
                    "outage_std_error": se_null, "ci95_outage": r.ci95_outage,
                    "z_outage": (r.empirical_outage - e) / se_null,
                })
    return rows


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------

# defaults per figure: (snr_db, rounds/L, eps); CLI flags override
FIGURE_DEFAULTS: dict[int, tuple[str, str, str]] = {
    1: ("40", "1:20:1", "0.01"),
    2: ("0,10,20", "2,10", "0.01"),
    3: ("0:40:2", "3,10", "0.01"),
    4: ("20", "1:64:1", "0.01,0.05"),
    5: ("0:40:1", "1,2,6", "0.01"),
    6: ("10", "1:100:1", "0.01"),
    7: ("10,40", "2,3", "0.01"),
    8: ("10,30", "2,3,4", "0.01"),
    9: ("0:60:2", "2,6", "0.01"),
    10: ("0,10,20", "5", "0.01:0.5:0.01"),
    11: ("0:60:2", "2,4", "0.01"),
}


def _fig1(spec):
    # rate offset vs L: limit value and the finite-SNR offset
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for L in spec.rounds:
            for e in spec.eps:
                rows.append({
                    "snr_db": s, "L": L, "eps": e,
                    "rate_offset": -log_fading_quantile(L, e),
                    "rate_offset_at_snr": math.log2(p.snr) - eps_outage_capacity(p, OutageSpec(e, L)).rate,
                })
    return rows


def _fig2(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        mu, sigma = mean_mutual_info(p), std_mutual_info(p)
        for L in spec.rounds:
            dist = mi_sum_distribution(p, L, "average")
            sd = sigma / math.sqrt(L)
            for x in np.linspace(0.0, mu + 4 * sd, 201):
                rows.append({"snr_db": s, "L": L, "rate": x, "cdf_exact": dist.cdf(x),
                             "cdf_gaussian": q_function((mu - x) / sd)})
    return rows


def _fig3(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        row = {"snr_db": s}
        for e in spec.eps:
            sfx = "" if len(spec.eps) == 1 else f"_eps{e:g}"
            for L in spec.rounds:
                o = OutageSpec(e, L)
                row[f"c_exact_{L}{sfx}"] = eps_outage_capacity(p, o).rate
                g = gaussian_approx_capacity(p, o).rate
                row[f"c_gaussian_{L}{sfx}"] = g
                row[f"gaussian_negative_{L}{sfx}"] = g < 0
                row[f"c_affine_{L}{sfx}"] = affine_approx_capacity(p, o).rate
        rows.append(row)
    return rows


def _fig4(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for L in spec.rounds:
            row = {"snr_db": s, "L": L}
            for e in spec.eps:
                exact, approx = gap_ec_fd(p, OutageSpec(e, L))
                row[f"gap_exact_eps{e:g}"] = exact
                row[f"gap_gaussian_eps{e:g}"] = approx
            rows.append(row)
    return rows


def _fig5(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for e in spec.eps:
            sfx = "" if len(spec.eps) == 1 else f"_eps{e:g}"
            row = {"snr_db": s, "ergodic": mean_mutual_info(p)}
            res = harq.ir_rates(p, spec.rounds, e)
            for a in res:
                if a.max_rounds > 1:
                    row[f"c_ir_{a.max_rounds}{sfx}"] = a.longterm_rate
            for a in res:
                row[f"c_eps_{a.max_rounds}{sfx}"] = a.initial_rate / a.max_rounds
            rows.append(row)
    return rows


def _fig6(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        mu, sigma = mean_mutual_info(p), std_mutual_info(p)
        for e in spec.eps:
            for a in harq.ir_rates(p, spec.rounds, e):
                M = a.max_rounds
                g_approx, g_simple = harq._gap_ec_ir_approx(mu, sigma, M, e)
                rows.append({
                    "snr_db": s, "M": M, "eps": e,
                    "gap_ir_exact": mu - a.longterm_rate, "gap_ir_approx": g_approx, "gap_ir_simple": g_simple,
                    "gap_fd_exact": mu - a.initial_rate / M,
                })
    return rows


def _fig7(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        mu, sigma = mean_mutual_info(p), std_mutual_info(p)
        top = max(spec.rounds) * mu + 5 * sigma * math.sqrt(max(spec.rounds))
        for k in spec.rounds:
            dist = mi_sum_distribution(p, k)
            for x in np.linspace(0.0, top, 201):
                rows.append({"snr_db": s, "k": k, "threshold": x, "cdf": dist.cdf(x)})
    return rows


def _fig8(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for e in spec.eps:
            for M in spec.rounds:
                r_max = harq.ir_rate(p, M, e).initial_rate
                grid = np.linspace(r_max / 200, r_max, 200)
                rates = harq.ir_rate_vs_initial_rate(p, M, grid)
                for r, c in zip(grid, rates):
                    rows.append({"snr_db": s, "eps": e, "M": M, "r_init": r, "harq_rate": c})
    return rows


def _fig9(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for e in spec.eps:
            sfx = "" if len(spec.eps) == 1 else f"_eps{e:g}"
            row = {"snr_db": s}
            for M in spec.rounds:
                a = harq.ir_rate(p, M, e)
                row[f"c_ir_{M}{sfx}"] = a.longterm_rate
                row[f"c_ir_opt_{M}{sfx}"] = harq.optimize_initial_rate(p, M, e)[1]
                row[f"c_eps_{M}{sfx}"] = a.initial_rate / M
            rows.append(row)
    return rows


def _fig10(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for e in spec.eps:
            row = {"snr_db": s, "eps": e}
            for a in harq.ir_rates(p, spec.rounds, e):
                row[f"c_ir_{a.max_rounds}"] = a.longterm_rate
                row[f"c_eps_{a.max_rounds}"] = a.initial_rate / a.max_rounds
            rows.append(row)
    return rows


def _fig11(spec):
    rows = []
    for s in spec.snr_db:
        p = _chan(s)
        for e in spec.eps:
            sfx = "" if len(spec.eps) == 1 else f"_eps{e:g}"
            row = {"snr_db": s}
            for M in spec.rounds:
                row[f"c_ir_opt_{M}{sfx}"] = harq.optimize_initial_rate(p, M, e)[1]
                row[f"c_cc_opt_{M}{sfx}"] = harq.optimize_cc_rate(p, M, e)[1]
            rows.append(row)
    return rows


FIGURES = {1: _fig1, 2: _fig2, 3: _fig3, 4: _fig4, 5: _fig5, 6: _fig6,
           7: _fig7, 8: _fig8, 9: _fig9, 10: _fig10, 11: _fig11}

HANDLERS = {
    "capacity": cmd_capacity,
    "harq-ir": cmd_harq_ir,
    "harq-cc": cmd_harq_cc,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def run(spec: RunSpec) -> str:
    """Compute the rows for ``spec`` and return the CSV text."""
    if spec.command == "figure":
        rows = FIGURES[spec.figure](spec)
    else:
        rows = HANDLERS[spec.command](spec)
    return render_csv(rows)


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--snr", help="SNR in dB: list a,b,c or range start:stop:step")
    common.add_argument("--M", dest="rounds", help="H-ARQ rounds (or diversity L): list or range")
    common.add_argument("--eps", help="outage targets: list or range")
    common.add_argument("--protocol", choices=("ir", "cc"), default="ir")
    common.add_argument("--optimize", action="store_true", help="also optimise the initial rate")
    common.add_argument("--messages", type=int, default=100_000, help="simulated messages per point")
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--samples", type=int, default=0,
                        help="Monte Carlo size for quantile cross-checks (capacity)")
    common.add_argument("--workers", type=int, default=None, help="simulation worker threads")
    common.add_argument("--out", help="output CSV path (default: stdout)")

    parser = argparse.ArgumentParser(prog="harqcap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "figure":
            sp.add_argument("number", type=int, choices=sorted(FIGURES))
    return parser


_PLAIN_DEFAULTS = ("10", "2", "0.01")


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    defaults = FIGURE_DEFAULTS[ns.number] if ns.command == "figure" else _PLAIN_DEFAULTS
    snr = parse_range(ns.snr or defaults[0])
    rounds = parse_range(ns.rounds or defaults[1], int)
    eps = parse_range(ns.eps or defaults[2])
    return RunSpec(
        command=ns.command, snr_db=snr, rounds=rounds, eps=eps, protocol=ns.protocol,
        optimize=ns.optimize, messages=ns.messages, seed=ns.seed, samples=ns.samples,
        out=ns.out, figure=getattr(ns, "number", None), workers=ns.workers,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        spec = spec_from_args(ns)
    except (UsageError, ValueError) as exc:
        parser.error(str(exc))
    try:
        text = run(spec)
    except (NumericalError, QuadratureError, DomainError, ArithmeticError, NotImplementedError) as exc:
        print(f"harqcap: numerical failure: {exc}", file=sys.stderr)
        return 1
    if spec.out:
        try:
            with open(spec.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            parser.error(f"cannot write {spec.out}: {exc}")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
