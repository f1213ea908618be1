"""Command-line entry point: single runs, seed ensembles, analysis, comparison.

Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import multiprocessing
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .agents import Trader
from .config import ConfigError, ModelConfig, default_config, load_config
from .engine import DEFAULT_SNAPSHOT_TIMES, MarketRecord, initialize, run_transient, step
from .stats import analyze_series

FORMAT_VERSION = 1

TIMESERIES_FILE = "timeseries.csv"
AVALANCHE_FILE = "avalanches.csv"
SUMMARY_FILE = "summary.json"
ANALYSIS_FILE = "analysis.json"
HISTOGRAM_FILE = "histogram.csv"
ENSEMBLE_FILE = "ensemble-summary.json"
BOOK_DUMP_FILE = "book_dump.csv"


class CliError(RuntimeError):
    def __init__(self, message: str, exit_code: int = 3):
        super().__init__(message)
        self.exit_code = exit_code


def _fmt(x: float) -> str:
    return repr(float(x))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_run_outputs(
    out_dir: Path,
    config: ModelConfig,
    records: MarketRecord,
    final_traders: list[Trader],
    wall_time: float,
) -> None:
    """Time-series CSV, avalanche log, snapshot CSVs, run-summary JSON."""
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = ["t,price,ret,n_bid,n_ask,n_trades,avalanche_size"]
    for i in range(len(records)):
        rows.append(
            f"{records.t[i]},{_fmt(records.price[i])},{_fmt(records.ret[i])},"
            f"{records.n_bid[i]},{records.n_ask[i]},{records.n_trades[i]},"
            f"{records.avalanche_size[i]}"
        )
    _atomic_write(out_dir / TIMESERIES_FILE, "\n".join(rows) + "\n")

    rows = ["t,size,initiator_count,imitated_status"]
    for av in records.avalanches:
        rows.append(f"{av.step},{av.size},{av.initiator_count},{av.imitated_status.name.lower()}")
    _atomic_write(out_dir / AVALANCHE_FILE, "\n".join(rows) + "\n")

    price_at = {t: p for t, p in zip(records.t, records.price)}
    price_at[0] = config.p0
    for snap_t, traders in sorted(records.snapshots.items()):
        p = price_at[snap_t]
        rows = ["id,kind,money,shares,wealth,info,status"]
        for tr in traders:
            rows.append(
                f"{tr.id},{tr.kind.name.lower()},{_fmt(tr.money)},{tr.shares},"
                f"{_fmt(tr.wealth(p))},{_fmt(tr.info)},{tr.status.name.lower()}"
            )
        _atomic_write(out_dir / f"snapshot_t{snap_t}.csv", "\n".join(rows) + "\n")

    final_price = records.price[-1] if records.price else config.p0
    shares = [tr.shares for tr in final_traders]
    money = [tr.money for tr in final_traders]
    summary = {
        "format_version": FORMAT_VERSION,
        "run_id": f"{config.config_hash()[:12]}-seed{config.seed}",
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "wall_time_s": wall_time,
        "n_steps": len(records),
        "n_cascades": len(records.avalanches),
        "final": {
            "price": final_price,
            "total_money": sum(money),
            "total_shares": sum(shares),
            "agents_without_shares": sum(1 for s in shares if s == 0),
            "agents_without_money": sum(1 for m in money if m < 100.0),
        },
        "files": {
            "timeseries": TIMESERIES_FILE,
            "avalanches": AVALANCHE_FILE,
            "snapshots": [f"snapshot_t{t}.csv" for t in sorted(records.snapshots)],
        },
    }
    _write_json(out_dir / SUMMARY_FILE, summary)


def execute_run(
    config: ModelConfig,
    out_dir: Path,
    snapshot_times: tuple[int, ...] = DEFAULT_SNAPSHOT_TIMES,
    dump_book: bool = False,
) -> None:
    """Run one replica and write its outputs under out_dir."""
    started = time.perf_counter()
    state = initialize(config)
    run_transient(state)
    wanted = {s for s in snapshot_times if 0 <= s <= config.t_run}
    if 0 in wanted:
        state.records.snapshots[0] = state.snapshot()
    book_rows: list[str] | None = None
    if dump_book:
        book_rows = ["t,side,agent_id,price"]

        def on_book(t: int, book) -> None:
            for o in book.bids:
                book_rows.append(f"{t},bid,{o.agent_id},{_fmt(o.price)}")
            for o in book.asks:
                book_rows.append(f"{t},ask,{o.agent_id},{_fmt(o.price)}")

        state.on_book = on_book
    for _ in range(config.t_run):
        step(state)
        if state.step_index in wanted:
            state.records.snapshots[state.step_index] = state.snapshot()
    records, final = state.records, state.snapshot()
    write_run_outputs(out_dir, config, records, final, time.perf_counter() - started)
    if book_rows is not None:
        _atomic_write(out_dir / BOOK_DUMP_FILE, "\n".join(book_rows) + "\n")


def read_timeseries(path: Path) -> dict[str, np.ndarray]:
    expected = ["t", "price", "ret", "n_bid", "n_ask", "n_trades", "avalanche_size"]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise CliError(f"{path}: unexpected header {header!r}")
        cols: list[list[float]] = [[] for _ in expected]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise CliError(f"{path}: row {lineno} has {len(row)} fields, expected {len(expected)}")
            try:
                for c, v in zip(cols, row):
                    c.append(float(v))
            except ValueError:
                raise CliError(f"{path}: row {lineno} is not numeric: {row!r}") from None
    if not cols[0]:
        raise CliError(f"{path}: no data rows")
    out = {name: np.array(c) for name, c in zip(expected, cols)}
    for name in ("t", "n_bid", "n_ask", "n_trades", "avalanche_size"):
        out[name] = out[name].astype(np.int64)
    return out


def read_avalanches(path: Path) -> np.ndarray:
    """(t, size) pairs from the cascade log."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "size", "initiator_count", "imitated_status"]:
            raise CliError(f"{path}: unexpected header {header!r}")
        pairs = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise CliError(f"{path}: row {lineno} has {len(row)} fields, expected 4")
            try:
                pairs.append((int(row[0]), int(row[1])))
            except ValueError:
                raise CliError(f"{path}: row {lineno} is not numeric: {row!r}") from None
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def execute_analyze(run_dir: Path) -> dict:
    ts_path = run_dir / TIMESERIES_FILE
    av_path = run_dir / AVALANCHE_FILE
    if not ts_path.exists():
        raise CliError(f"missing {ts_path}")
    series = read_timeseries(ts_path)
    if av_path.exists():
        av = read_avalanches(av_path)
        post = av[av[:, 0] >= 1, 1] if av.size else np.empty(0, dtype=np.int64)
    else:
        post = np.empty(0, dtype=np.int64)
    summary, hist = analyze_series(series["price"], series["n_trades"], post)
    summary["format_version"] = FORMAT_VERSION
    summary["run_dir"] = run_dir.name
    _write_json(run_dir / ANALYSIS_FILE, summary)
    rows = ["bin_center,density,fit_density"]
    for c, d, f in zip(hist["bin_center"], hist["density"], hist["fit_density"]):
        rows.append(f"{_fmt(c)},{_fmt(d)},{_fmt(f)}")
    _atomic_write(run_dir / HISTOGRAM_FILE, "\n".join(rows) + "\n")
    return summary


def _ensemble_worker(args: tuple) -> tuple[int, dict | None, str | None]:
    config_dict, seed, out_dir, snapshots = args
    try:
        cfg = ModelConfig(**{**config_dict, "seed": seed, "avalanche_topple_cap": 0})
        run_dir = Path(out_dir) / f"seed-{seed:04d}"
        execute_run(cfg, run_dir, snapshot_times=snapshots)
        return seed, execute_analyze(run_dir), None
    except Exception as exc:  # reported per seed by the parent
        return seed, None, f"{type(exc).__name__}: {exc}"


def execute_ensemble(
    config: ModelConfig,
    n_seeds: int,
    out_dir: Path,
    jobs: int = 1,
    snapshot_times: tuple[int, ...] = DEFAULT_SNAPSHOT_TIMES,
) -> dict:
    """n_seeds independent replicas (seeds base..base+n-1) plus a summary."""
    if n_seeds < 1:
        raise CliError("need at least one seed", exit_code=1)
    base = config.seed
    payload = config.to_dict()
    tasks = [(payload, base + i, str(out_dir), snapshot_times) for i in range(n_seeds)]
    if jobs > 1 and n_seeds > 1:
        with multiprocessing.Pool(min(jobs, n_seeds)) as pool:
            results = pool.map(_ensemble_worker, tasks)
    else:
        results = [_ensemble_worker(t) for t in tasks]

    per_seed, failures = {}, {}
    for seed, summary, error in sorted(results):
        if error is not None:
            failures[str(seed)] = error
        else:
            per_seed[str(seed)] = {
                "q": summary["q"],
                "t_star": summary["t_star"],
                "excess_kurtosis": summary["excess_kurtosis"],
            }

    def med(key: str) -> float | None:
        vals = [v[key] for v in per_seed.values() if v[key] is not None]
        return statistics.median(vals) if vals else None

    ensemble = {
        "format_version": FORMAT_VERSION,
        "config": payload,
        "config_hash": config.config_hash(),
        "base_seed": base,
        "n_seeds": n_seeds,
        "per_seed": per_seed,
        "failures": failures,
        "median": {k: med(k) for k in ("q", "t_star", "excess_kurtosis")},
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / ENSEMBLE_FILE, ensemble)
    if failures:
        raise CliError(f"{len(failures)} of {n_seeds} replicas failed: {failures}")
    return ensemble


def _load_metrics(run_dir: Path) -> dict:
    """Comparison metrics from an ensemble dir (medians) or a single run."""
    ens = run_dir / ENSEMBLE_FILE
    if ens.exists():
        data = json.loads(ens.read_text(encoding="utf-8"))
        return {"kind": "ensemble", **data["median"]}
    ana = run_dir / ANALYSIS_FILE
    if ana.exists():
        data = json.loads(ana.read_text(encoding="utf-8"))
        return {
            "kind": "run",
            "q": data["q"],
            "t_star": data["t_star"],
            "excess_kurtosis": data["excess_kurtosis"],
        }
    raise CliError(f"{run_dir}: no {ENSEMBLE_FILE} or {ANALYSIS_FILE}; analyze it first")


def execute_compare(dir_a: Path, dir_b: Path) -> dict:
    a, b = _load_metrics(dir_a), _load_metrics(dir_b)

    def delta(key: str) -> float | None:
        if a[key] is None or b[key] is None:
            return None
        return b[key] - a[key]

    return {
        "format_version": FORMAT_VERSION,
        "a": {"dir": str(dir_a), **a},
        "b": {"dir": str(dir_b), **b},
        "delta": {
            "q": delta("q"),
            "t_star": delta("t_star"),
            "excess_kurtosis": delta("excess_kurtosis"),
        },
    }


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise CliError(message, exit_code=1)


def _parse_snapshots(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise CliError(f"--snapshots must be comma-separated integers, got {text!r}", 1) from None


def _resolve_config(args) -> ModelConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        cfg = ModelConfig(**{**cfg.to_dict(), "seed": args.seed, "avalanche_topple_cap": 0})
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="herdmarket", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single simulation run")
    p_run.add_argument("--config", type=Path, default=None)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", type=Path, required=True)
    p_run.add_argument("--snapshots", type=str, default=None, help="comma-separated step indices")
    p_run.add_argument("--dump-book", action="store_true", help="log every ranked book (large)")

    p_ens = sub.add_parser("ensemble", help="independent runs over consecutive seeds")
    p_ens.add_argument("--config", type=Path, default=None)
    p_ens.add_argument("--seed", type=int, default=None, help="base seed (default from config)")
    p_ens.add_argument("--n-seeds", type=int, required=True)
    p_ens.add_argument("--jobs", type=int, default=1)
    p_ens.add_argument("--out", type=Path, required=True)
    p_ens.add_argument("--snapshots", type=str, default=None)

    p_ana = sub.add_parser("analyze", help="analysis summary for a saved run")
    p_ana.add_argument("run_dir", type=Path)

    p_cmp = sub.add_parser("compare", help="side-by-side metrics of two analyzed dirs")
    p_cmp.add_argument("dir_a", type=Path)
    p_cmp.add_argument("dir_b", type=Path)
    p_cmp.add_argument("--out", type=Path, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            cfg = _resolve_config(args)
            snaps = _parse_snapshots(args.snapshots) if args.snapshots else DEFAULT_SNAPSHOT_TIMES
            execute_run(cfg, args.out, snapshot_times=snaps, dump_book=args.dump_book)
        elif args.command == "ensemble":
            cfg = _resolve_config(args)
            snaps = _parse_snapshots(args.snapshots) if args.snapshots else DEFAULT_SNAPSHOT_TIMES
            execute_ensemble(cfg, args.n_seeds, args.out, jobs=args.jobs, snapshot_times=snaps)
        elif args.command == "analyze":
            summary = execute_analyze(args.run_dir)
            print(json.dumps(summary, indent=2, sort_keys=True))
        elif args.command == "compare":
            result = execute_compare(args.dir_a, args.dir_b)
            if args.out is not None:
                _write_json(args.out, result)
            print(json.dumps(result, indent=2, sort_keys=True))
        return 0
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
