"""Batch front-end: run one reachability job, sweep budgets, compare runs.

Outputs per run directory:

* ``sets.jsonl``    one record per time step: ``{"t": t, "lo": [...], "hi": [...]}``
* ``schedule.json`` the query log (one record per issued query)
* ``report.csv``    header ``budget,elapsed_s,e_volume,e_radius,n,seed``
* ``config.json``   resolved run configuration (used by ``compare``)
* ``sets.png``      computed boxes vs sampled hulls

``sweep`` writes one sub-run per budget plus an aggregated ``report.csv``
and ``sweep.png`` at the top level.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys as _sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .bounder import Query
from .clock import Clock, SimulatedClock, WallClock, load_cost_model
from .geometry import Hyperrect
from .model import SystemSpec, load_system
from .oracle import audit_soundness, evaluate_run, sample_hulls
from .scheduler import (
    ScheduleRecord,
    fixed_schedule_reach,
    refined_reach,
    schedule_to_json,
)

__all__ = ["RunConfig", "run", "sweep", "compare", "main", "CliError"]

REPORT_FIELDS = ("budget", "elapsed_s", "e_volume", "e_radius", "n", "seed")


class CliError(ValueError):
    """Bad flags or configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    system: str
    mode: str = "refined"
    budget: Optional[float] = None
    schedule: Optional[list[int]] = None
    horizon: Optional[int] = None
    samples: int = 100_000
    seed: int = 0
    clock: str = "wall"
    out: str = "out"
    refine_levels: int = 2
    pwl_segments: int = 8
    intermediate_mode: str = "concrete"
    dims: tuple[int, int] = (0, 1)
    make_plots: bool = True

    def validate(self) -> None:
        if self.mode not in ("refined", "naive", "fixed"):
            raise CliError(f"unknown mode {self.mode!r}")
        if self.mode == "refined":
            if self.budget is None:
                raise CliError("mode=refined requires --budget")
            if not self.budget > 0:
                raise CliError("budget must be > 0")
        if self.mode == "fixed" and not self.schedule:
            raise CliError("mode=fixed requires --schedule d1,d2,...")
        if self.samples < 1:
            raise CliError("--samples must be >= 1")

    def to_dict(self) -> dict:
        d = {
            "system": str(self.system), "mode": self.mode,
            "budget": _fmt_budget(self.budget), "schedule": self.schedule,
            "horizon": self.horizon, "samples": self.samples, "seed": self.seed,
            "clock": self.clock, "refine_levels": self.refine_levels,
            "pwl_segments": self.pwl_segments,
            "intermediate_mode": self.intermediate_mode,
        }
        return d


def _fmt_budget(budget: Optional[float]) -> str:
    if budget is None:
        return ""
    return "inf" if math.isinf(budget) else repr(float(budget))


def _parse_budget(text: str) -> float:
    if text.strip().lower() == "inf":
        return math.inf
    try:
        value = float(text)
    except ValueError as exc:
        raise CliError(f"bad budget {text!r}") from exc
    return value


def _make_clock(spec: str) -> Clock:
    if spec == "wall":
        return WallClock()
    if spec.startswith("sim:"):
        path = spec[len("sim:"):]
        if not path:
            raise CliError("--clock sim: needs a cost-model file path")
        try:
            return SimulatedClock(load_cost_model(path))
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CliError(f"bad cost model {path!r}: {exc}") from exc
    raise CliError(f"unknown clock {spec!r} (use wall or sim:<path>)")


def _resolve(config: RunConfig) -> tuple[SystemSpec, Hyperrect, int]:
    try:
        system = load_system(config.system)
    except (OSError, ValueError) as exc:  # ModelError and ExprError included
        raise CliError(f"cannot load system {config.system!r}: {exc}") from exc
    n = config.horizon if config.horizon is not None else system.horizon
    if n is None:
        raise CliError("no horizon: pass --horizon or set it in the system file")
    if n < 1:
        raise CliError("horizon must be >= 1")
    if system.initial_set is None:
        raise CliError("system file does not declare an initial_set")
    return system, system.initial_set, n


def _execute(config: RunConfig
             ) -> tuple[list[Hyperrect], list[ScheduleRecord], float, SystemSpec, int]:
    system, x0, n = _resolve(config)
    clock = _make_clock(config.clock)
    q = Query(system=system, n=n, refine_levels=config.refine_levels,
              pwl_segments=config.pwl_segments,
              intermediate_mode=config.intermediate_mode)
    begin = clock.now()
    if config.mode == "refined":
        sets, log = refined_reach(q, x0, config.budget, clock=clock)
    elif config.mode == "naive":
        sets, log = fixed_schedule_reach(q, x0, [1] * n, clock=clock)
    else:
        try:
            sets, log = fixed_schedule_reach(q, x0, config.schedule, clock=clock)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    elapsed = clock.now() - begin
    return sets, log, elapsed, system, n


def _write_report(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in REPORT_FIELDS})


def _report_row(config: RunConfig, elapsed: float, report) -> dict:
    return {
        "budget": _fmt_budget(config.budget),
        "elapsed_s": repr(float(elapsed)),
        "e_volume": repr(report.e_total_volume),
        "e_radius": repr(report.e_total_radius),
        "n": report.n,
        "seed": report.seed,
    }


def run(config: RunConfig) -> dict:
    """Execute one job and write its result files; returns the report row."""
    config.validate()
    sets, log, elapsed, system, n = _execute(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    with (out / "sets.jsonl").open("w") as fh:
        for t, box in enumerate(sets, start=1):
            fh.write(json.dumps({"t": t, "lo": box.lo.tolist(),
                                 "hi": box.hi.tolist()}) + "\n")
    (out / "schedule.json").write_text(schedule_to_json(log))

    report = evaluate_run(system, system.initial_set, sets, config.samples,
                          config.seed)
    row = _report_row(config, elapsed, report)
    _write_report(out / "report.csv", [row])
    (out / "config.json").write_text(
        json.dumps({**config.to_dict(), "system_name": system.name, "n": n},
                   indent=2))

    violations = audit_soundness(system, system.initial_set, sets,
                                 config.samples, config.seed)
    if violations:
        raise RuntimeError(
            f"soundness audit failed: {len(violations)} sampled states escaped "
            f"(first at sample {violations[0][0]}, t={violations[0][1]})")

    if config.make_plots:
        from .plots import save_sets_figure

        hulls = sample_hulls(system, system.initial_set, n,
                             min(config.samples, 20_000), config.seed)
        dims = config.dims if system.state_dim >= 2 else (0, 0)
        save_sets_figure(sets, out / "sets.png", hulls=hulls, dims=dims,
                         title=f"{system.name}: {config.mode} mode")
    return row


def sweep(config: RunConfig, budgets: Sequence[float]) -> list[dict]:
    """One refined run per budget; aggregated CSV plus a trend figure."""
    if len(budgets) < 2:
        raise CliError("sweep needs at least 2 budgets")
    if config.mode != "refined":
        raise CliError("sweep only makes sense for mode=refined")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, budget in enumerate(budgets):
        sub = RunConfig(**{**config.__dict__, "budget": budget,
                           "out": str(out / f"budget_{i:02d}")})
        rows.append(run(sub))
    _write_report(out / "report.csv", rows)
    if config.make_plots:
        from .plots import save_sweep_figure

        plot_rows = [{"budget": float(r["budget"]),
                      "e_volume": float(r["e_volume"]),
                      "e_radius": float(r["e_radius"])} for r in rows]
        save_sweep_figure(plot_rows, out / "sweep.png")
    return rows


def _load_run(path: Path) -> tuple[dict, dict]:
    try:
        config = json.loads((path / "config.json").read_text())
        with (path / "report.csv").open() as fh:
            report = next(iter(csv.DictReader(fh)))
    except (OSError, StopIteration) as exc:
        raise CliError(f"{path} does not look like a run directory: {exc}") from exc
    return config, report


def compare(dir_a: Path, dir_b: Path, out: Optional[Path] = None) -> dict:
    """Error/time comparison row for two runs of the same experiment."""
    conf_a, rep_a = _load_run(Path(dir_a))
    conf_b, rep_b = _load_run(Path(dir_b))
    for key in ("system_name", "n", "seed", "samples"):
        if conf_a.get(key) != conf_b.get(key):
            raise CliError(f"runs disagree on {key}: "
                           f"{conf_a.get(key)!r} vs {conf_b.get(key)!r}")
    row = {"system": conf_a["system_name"], "n": conf_a["n"],
           "mode_a": conf_a["mode"], "mode_b": conf_b["mode"]}
    for metric in ("e_volume", "e_radius", "elapsed_s"):
        a, b = float(rep_a[metric]), float(rep_b[metric])
        row[f"{metric}_a"] = a
        row[f"{metric}_b"] = b
        row[f"{metric}_ratio"] = b / a if a != 0 else math.inf
    if out is not None:
        with Path(out).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            writer.writeheader()
            writer.writerow(row)
    return row


def _print_compare(row: dict) -> None:
    print(f"system={row['system']} n={row['n']} "
          f"A={row['mode_a']} B={row['mode_b']}")
    print(f"{'metric':<12}{'A':>12}{'B':>12}{'B/A':>10}")
    for metric in ("e_volume", "e_radius", "elapsed_s"):
        print(f"{metric:<12}{row[f'{metric}_a']:>12.4g}"
              f"{row[f'{metric}_b']:>12.4g}{row[f'{metric}_ratio']:>10.3g}")


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"bad integer list {text!r}") from exc


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", required=True, help="system JSON file")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clock", default="wall", help="wall or sim:<cost-model.json>")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--refine-levels", type=int, default=2)
    p.add_argument("--pwl-segments", type=int, default=8)
    p.add_argument("--intermediate-mode", choices=("concrete", "symbolic"),
                   default="concrete")
    p.add_argument("--dims", default="0,1", help="projection axes for sets.png")
    p.add_argument("--no-plots", action="store_true")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    dims = _csv_ints(args.dims)
    if len(dims) != 2:
        raise CliError("--dims needs exactly two axes, e.g. 0,1")
    return RunConfig(
        system=args.system,
        mode=getattr(args, "mode", "refined"),
        budget=_parse_budget(args.budget) if getattr(args, "budget", None) else None,
        schedule=_csv_ints(args.schedule) if getattr(args, "schedule", None) else None,
        horizon=args.horizon,
        samples=args.samples,
        seed=args.seed,
        clock=args.clock,
        out=args.out,
        refine_levels=args.refine_levels,
        pwl_segments=args.pwl_segments,
        intermediate_mode=args.intermediate_mode,
        dims=(dims[0], dims[1]),
        make_plots=not args.no_plots,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temporeach",
        description="Reachability for neural feedback loops with automatic "
                    "temporal refinement.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single reachability run")
    p_run.add_argument("--mode", choices=("refined", "naive", "fixed"),
                       default="refined")
    p_run.add_argument("--budget", default=None, help="seconds or 'inf'")
    p_run.add_argument("--schedule", default=None,
                       help="comma-separated depths for mode=fixed")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="refined runs over several budgets")
    p_sweep.add_argument("--budgets", required=True,
                         help="comma-separated budgets (seconds or 'inf')")
    _add_common(p_sweep)

    p_cmp = sub.add_parser("compare", help="compare two finished runs")
    p_cmp.add_argument("--a", required=True, help="first run directory")
    p_cmp.add_argument("--b", required=True, help="second run directory")
    p_cmp.add_argument("--out", default=None, help="optional compare.csv path")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            row = run(_config_from_args(args))
            print(f"e_volume={row['e_volume']} e_radius={row['e_radius']} "
                  f"elapsed_s={row['elapsed_s']}")
        elif args.command == "sweep":
            budgets = [_parse_budget(b) for b in args.budgets.split(",") if b.strip()]
            args.mode = "refined"
            config = _config_from_args(args)
            config.budget = budgets[0] if budgets else None
            rows = sweep(config, budgets)
            for row in rows:
                print(f"budget={row['budget']} e_volume={row['e_volume']}")
        else:
            row = compare(Path(args.a), Path(args.b),
                          Path(args.out) if args.out else None)
            _print_compare(row)
    except CliError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except Exception as exc:  # backend/runtime failures
        print(f"error: {exc}", file=_sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
