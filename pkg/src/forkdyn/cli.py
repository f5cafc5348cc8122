"""Command-line front end: ``forkdyn markov|gamma|simulate|reproduce``.

Output files are comma-separated with a header row; figure and table presets
also write a whitespace-separated ``.dat`` copy for plotting tools.  Floats
are written with Python's shortest round-trip representation, so identical
runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from forkdyn import __version__
from forkdyn.chain_model import ChainRates, build_generator, orphan_rate, solve_stationary
from forkdyn.errors import ForkdynError, QuadratureError
from forkdyn.metrics import (
    METRIC_NAMES,
    ReplicatedSummary,
    replicate,
    summarize,
    summarize_reports,
)
from forkdyn.presets import PRESETS, GammaPreset, MarkovPreset, SimPreset, get_preset
from forkdyn.sim import SimConfig, run, write_event_log
from forkdyn.spatial_gamma import (
    SpatialParams,
    gamma_all_relays_with_error,
    gamma_tilde_with_error,
    monte_carlo_gamma,
)

MARKOV_COLUMNS = ("variant", "quantity", "k", "l", "value")
GAMMA_COLUMNS = ("d12", "nu", "mode", "method", "value", "error")
SUMMARY_COLUMNS = ("metric", "mean", "ci_half_width", "n_reps")


def fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def write_csv(path: Optional[Path], columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text


def write_dat(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = ["# " + " ".join(columns)]
    lines.extend(" ".join(fmt(v) for v in row) for row in rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------- markov


def markov_rows(
    lambda1: float, lambda2: float, mu: float, variant: str, truncation: int, grid: Optional[int]
) -> List[tuple]:
    """``(variant, 'pi', k, l, value)`` rows then an ``orphan_rate`` footer row."""
    rates = ChainRates(lambda1, lambda2, mu)
    pi = solve_stationary(build_generator(rates, variant, truncation))
    if grid is None:
        states = [(s.k, s.l) for s in pi]
    else:
        states = [(k, l) for k in range(grid) for l in range(grid)]
    rows = [(variant, "pi", k, l, pi[(k, l)]) for k, l in states]
    rows.append((variant, "orphan_rate", "", "", orphan_rate(pi, rates)))
    return rows


def cmd_markov(args) -> int:
    rows = markov_rows(args.lambda1, args.lambda2, args.mu, args.variant, args.truncation, args.grid)
    write_csv(args.output, MARKOV_COLUMNS, rows)
    return 0


# --------------------------------------------------------------------------- gamma


def gamma_rows(
    d12s: Sequence[float],
    nus: Sequence[float],
    mode: str,
    method: str,
    k_slope: float = 50.0,
    sigma: float = 1.0,
    samples: int = 100_000,
    seed: int = 0,
) -> List[tuple]:
    rows = []
    for d12 in d12s:
        for nu in nus:
            params = SpatialParams(d12, nu, k_slope, sigma)
            if method == "quad":
                func = gamma_tilde_with_error if mode == "nearest" else gamma_all_relays_with_error
                value, err = func(params)
            else:
                value, err = monte_carlo_gamma(params, mode, samples, seed=seed)
            rows.append((float(d12), float(nu), mode, method, value, err))
    return rows


def cmd_gamma(args) -> int:
    rows = gamma_rows(
        args.d12, args.nu, args.mode, args.method, args.k_slope, args.sigma, args.samples, args.seed
    )
    write_csv(args.output, GAMMA_COLUMNS, rows)
    return 0


# --------------------------------------------------------------------------- simulate


def replication_row(rep: int, report) -> List:
    row = report.as_row()
    return [rep] + [row[m] for m in METRIC_NAMES]


def summary_rows(summary: ReplicatedSummary) -> List[tuple]:
    return [(m, s.mean, s.half_width, s.n_reps) for m, s in summary.stats.items()]


def run_replications(
    config: SimConfig, n_reps: int, threads: Optional[int], events_dir: Optional[Path] = None
) -> ReplicatedSummary:
    if events_dir is None:
        return replicate(config, n_reps, threads)
    if n_reps < 2:
        raise ForkdynError("n_reps must be at least 2")
    events_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for i in range(n_reps):
        trace = run(config, i, record_events=True)
        write_event_log(trace.events, events_dir / f"events_rep{i:02d}.log")
        reports.append(summarize(trace, config))
    return summarize_reports(config, reports)


def cmd_simulate(args) -> int:
    config = SimConfig(
        n_nodes=args.nodes,
        pool_fraction=args.alpha,
        area_side=args.area_side,
        block_rate=args.block_rate,
        n_blocks=args.blocks,
        mean_delay_target=args.delay,
        cv=args.cv,
        seed=args.seed,
        runaway_cap=args.runaway_cap,
    )
    out = args.out_dir
    summary = run_replications(config, args.reps, args.threads, out / "events" if args.events else None)
    write_csv(
        out / "replications.csv",
        ("replication",) + METRIC_NAMES,
        (replication_row(i, r) for i, r in enumerate(summary.reports)),
    )
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(summary))
    print(f"wrote {out / 'replications.csv'} and {out / 'summary.csv'}")
    return 0


# --------------------------------------------------------------------------- reproduce


def _sweep_rows(preset: SimPreset, seed: Optional[int], threads: Optional[int]):
    axis_names = [name for name, _ in preset.axes]
    summary_cols = list(axis_names)
    for m in preset.metrics:
        summary_cols += [m, m + "_ci"]
    summary_cols += list(preset.extra_columns) + ["n_reps"]
    rep_cols = axis_names + ["replication"] + list(METRIC_NAMES)
    summaries, reps = [], []
    for point in preset.points(seed):
        coords = [v for _, v in point.coords]
        summary = replicate(point.config, preset.n_reps, threads)
        row = list(coords)
        for m in preset.metrics:
            row += [summary.mean(m), summary.half_width(m)]
        alpha = point.config.pool_fraction
        extras = {
            "big_gamma_theory": alpha + (1.0 - alpha) * summary.mean("gamma_hat"),
            "honest_share": 1.0 - summary.mean("relative_pool_revenue"),
            "fair_share": alpha,
        }
        row += [extras[c] for c in preset.extra_columns]
        row.append(summary.n_reps)
        summaries.append(row)
        for i, report in enumerate(summary.reports):
            reps.append(coords + replication_row(i, report))
    return summary_cols, summaries, rep_cols, reps


def reproduce(name: str, out_dir: Path, seed: Optional[int] = None, threads: Optional[int] = None) -> List[Path]:
    """Run preset ``name`` and write its files into ``out_dir``; return the paths written."""
    preset = get_preset(name)
    csv_path, dat_path = out_dir / f"{name}.csv", out_dir / f"{name}.dat"
    written = [csv_path, dat_path]
    if isinstance(preset, MarkovPreset):
        rows = markov_rows(
            preset.lambda1, preset.lambda2, preset.mu, preset.variant, preset.truncation, preset.grid
        )
        write_csv(csv_path, MARKOV_COLUMNS, rows)
        cells = {(r[2], r[3]): r[4] for r in rows if r[1] == "pi"}
        write_dat(
            dat_path,
            ["k"] + [f"l={l}" for l in range(preset.grid)],
            ([k] + [cells[(k, l)] for l in range(preset.grid)] for k in range(preset.grid)),
        )
    elif isinstance(preset, GammaPreset):
        rows = gamma_rows(preset.d12, preset.nu, preset.mode, "quad", preset.k_slope, preset.sigma)
        write_csv(csv_path, GAMMA_COLUMNS, rows)
        cells = {(r[0], r[1]): r[4] for r in rows}
        write_dat(
            dat_path,
            ["d12"] + [f"nu={nu}" for nu in preset.nu],
            ([d] + [cells[(d, nu)] for nu in preset.nu] for d in preset.d12),
        )
    else:
        cols, rows, rep_cols, rep_rows = _sweep_rows(preset, seed, threads)
        write_csv(csv_path, cols, rows)
        write_dat(dat_path, cols, rows)
        rep_path = out_dir / f"{name}_replications.csv"
        write_csv(rep_path, rep_cols, rep_rows)
        written.append(rep_path)
    return written


def cmd_reproduce(args) -> int:
    if args.list or args.preset is None:
        for name, preset in PRESETS.items():
            desc = getattr(preset, "description", None) or f"{preset.kind} preset"
            print(f"{name:13s} {desc}")
        return 0
    for path in reproduce(args.preset, args.out_dir, args.seed, args.threads):
        print(f"wrote {path}")
    return 0


# --------------------------------------------------------------------------- parser


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forkdyn",
        description="Blockchain fork dynamics: Markov fork model, spatial race probabilities "
        "and a selfish-mining network simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("markov", help="stationary distribution of the fork-state chain")
    p.add_argument("--lambda1", type=float, default=0.6, help="pool mining rate per hour (default 0.6)")
    p.add_argument("--lambda2", type=float, default=5.4, help="community mining rate per hour (default 5.4)")
    p.add_argument("--mu", type=float, default=285.0, help="propagation rate per hour (default 285)")
    p.add_argument("--variant", choices=("honest", "selfish"), default="honest")
    p.add_argument("--truncation", type=int, default=6, help="keep states with k + l <= N (default 6)")
    p.add_argument("--grid", type=_positive_int, default=None,
                   help="only report states with k, l < GRID (default: every state)")
    p.add_argument("-o", "--output", type=Path, default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_markov)

    p = sub.add_parser("gamma", help="probability that a released pool block wins the race")
    p.add_argument("--d12", type=float, nargs="+", default=[4.0], help="miner separation(s)")
    p.add_argument("--nu", type=float, nargs="+", default=[0.4], help="relay intensity value(s)")
    p.add_argument("--k-slope", type=float, default=50.0, help="mean delay per unit distance")
    p.add_argument("--sigma", type=float, default=1.0, help="standard deviation of one hop")
    p.add_argument("--mode", choices=("nearest", "all"), default="nearest",
                   help="race only the nearest relay, or every relay")
    p.add_argument("--method", choices=("quad", "mc"), default="quad",
                   help="numerical quadrature or Monte Carlo")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    p.add_argument("-o", "--output", type=Path, default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("simulate", help="replicated network simulation")
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.0, help="pool fraction of nodes, in [0, 0.5]")
    p.add_argument("--area-side", type=float, default=1000.0)
    p.add_argument("--block-rate", type=float, default=6.0, help="blocks per hour")
    p.add_argument("--blocks", type=int, default=10_000, help="mining events per replication")
    p.add_argument("--delay", type=float, default=10.0, help="mean delay over node pairs, seconds")
    p.add_argument("--cv", type=float, default=0.0, help="coefficient of variation of each delay")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runaway-cap", type=int, default=5)
    p.add_argument("--reps", type=int, default=12, help="replications (at least 2)")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker processes (default $FORKDYN_THREADS or 1)")
    p.add_argument("--events", action="store_true",
                   help="also write one event log per replication under OUT_DIR/events")
    p.add_argument("--out-dir", type=Path, default=Path("results"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="run a named table or figure preset")
    p.add_argument("preset", nargs="?", choices=list(PRESETS), metavar="PRESET",
                   help="one of: " + ", ".join(PRESETS))
    p.add_argument("--list", action="store_true", help="list presets and exit")
    p.add_argument("--seed", type=int, default=None, help="override the preset seed")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker processes (default $FORKDYN_THREADS or 1)")
    p.add_argument("--out-dir", type=Path, default=Path("results"))
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QuadratureError as exc:
        print(f"forkdyn: quadrature failed: {exc} (achieved error {exc.error:.3g})", file=sys.stderr)
        return 1
    except ForkdynError as exc:
        print(f"forkdyn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
