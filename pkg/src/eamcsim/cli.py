"""Experiment runner: policy x scenario x seed sweeps from an INI manifest.

Example manifest::

    [system]
    appdb = bundled            # or a path, relative to this file
    partitions = p1:16, p2:16  # model_id:node_count, or name=model_id:node_count

    [workload]                 # defaults for every scenario
    job_count = 500
    mean_interarrival = 12
    max_power = 4
    pow2_bias = 0.75
    requested_time_factor = 1.5

    [scenario 50]
    favored = stream
    share = 0.5

    [policies]
    policies = MinRuntime:1, MinEnergy:1, EamcPriorityInc:1, EamcPriorityInc:1.5
    v_threshold = 0.35

    [run]
    seeds = 1, 2, 3
    output_dir = results
    baseline = MinRuntime:1

A scenario takes either ``mix = uniform``, ``mix = app:p, app:p, ...`` or
``favored``/``share``; it may also override any [workload] key.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import appdb as appdb_mod
from .appdb import AppDatabase, AppDBError
from .epm import PolicyConfig, Strategy
from .jobs import Partition
from .sim import (METRIC_NAMES, SimulationError, WorkloadSpec, favored_mix, generate_workload,
                  run_simulation, uniform_mix, write_trace_csv)

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 1, 2

# metrics where a larger value is better; everything else is lower-is-better
HIGHER_IS_BETTER = {"pct_optimal_partition"}

_WORKLOAD_KEYS = {"job_count": int, "mean_interarrival": float, "max_power": int,
                  "pow2_bias": float, "requested_time_factor": float}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    spec: WorkloadSpec  # seed is replaced per run


@dataclass
class ExperimentConfig:
    appdb_path: str
    partitions: list[Partition]
    scenarios: list[Scenario]
    policies: list[PolicyConfig]
    seeds: list[int]
    output_dir: Path
    baseline: PolicyConfig | None = None
    frequency_weighting: str = "job"
    write_traces: bool = False
    db: AppDatabase | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.policies:
            raise ConfigError("no policies configured")
        if not self.scenarios:
            raise ConfigError("no scenarios configured")
        if not self.seeds:
            raise ConfigError("no seeds configured")


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def _policy(token: str, v_threshold: float) -> PolicyConfig:
    name, _, tw = token.partition(":")
    try:
        return PolicyConfig(Strategy.parse(name), float(tw) if tw else 1.0, v_threshold)
    except ValueError as exc:
        raise ConfigError(f"policy {token!r}: {exc}") from None


def _load_db(value: str, base: Path) -> tuple[str, AppDatabase]:
    if value in ("bundled", "bundled:table1.appdb"):
        return "bundled", appdb_mod.load_bundled()
    if value.startswith("bundled:"):
        return value, appdb_mod.load_bundled(value.split(":", 1)[1])
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    return str(path), appdb_mod.load(path)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    def need(section, key):
        if not cp.has_option(section, key):
            raise ConfigError(f"{path}: [{section}] is missing {key!r}")
        return cp.get(section, key)

    try:
        db_path, db = _load_db(need("system", "appdb"), path.parent)
    except (AppDBError, OSError) as exc:
        raise ConfigError(f"{path}: appdb: {exc}") from None

    partitions = []
    for token in _split(need("system", "partitions")):
        name, eq, rest = token.partition("=")
        if not eq:
            rest, name = token, token.split(":")[0]
        model_id, _, count = rest.partition(":")
        name, model_id = name.strip(), model_id.strip()
        if model_id not in db.models:
            raise ConfigError(f"{path}: [system] partitions: unknown model {model_id!r}")
        try:
            partitions.append(Partition(name, int(count), model_id))
        except ValueError as exc:
            raise ConfigError(f"{path}: [system] partition {token!r}: {exc}") from None
    if len({p.partition_id for p in partitions}) != len(partitions):
        raise ConfigError(f"{path}: [system] duplicate partition names")

    defaults = {}
    if cp.has_section("workload"):
        defaults = dict(cp.items("workload"))

    scenarios = []
    for section in cp.sections():
        if not section.startswith("scenario"):
            continue
        name = section[len("scenario"):].strip() or "default"
        opts = {**defaults, **dict(cp.items(section))}
        try:
            spec = _workload(opts, db)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{path}: [{section}] {exc}") from None
        largest = max((p.node_count for p in partitions), default=0)
        if 2 ** spec.max_power > largest:
            raise ConfigError(
                f"{path}: [{section}] jobs may request {2 ** spec.max_power} nodes but the "
                f"largest partition has {largest}")
        scenarios.append(Scenario(name, spec))

    try:
        v_threshold = cp.getfloat("policies", "v_threshold", fallback=0.35)
        traces = cp.getboolean("run", "traces", fallback=False)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    policies = [_policy(t, v_threshold) for t in _split(need("policies", "policies"))]

    try:
        seeds = [int(s) for s in _split(need("run", "seeds"))]
    except ValueError as exc:
        raise ConfigError(f"{path}: [run] seeds: {exc}") from None
    out = Path(cp.get("run", "output_dir", fallback="results"))
    if not out.is_absolute():
        out = path.parent / out
    baseline = None
    if cp.has_option("run", "baseline"):
        baseline = resolve_baseline(cp.get("run", "baseline"), policies)
    weighting = cp.get("run", "frequency_weighting", fallback="job")
    if weighting not in ("job", "node_hours"):
        raise ConfigError(f"{path}: [run] frequency_weighting must be job or node_hours")

    try:
        return ExperimentConfig(db_path, partitions, scenarios, policies, seeds, out, baseline,
                                weighting, traces, db)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _workload(opts: dict, db: AppDatabase) -> WorkloadSpec:
    kwargs = {}
    for key, conv in _WORKLOAD_KEYS.items():
        if key in opts:
            kwargs[key] = conv(opts[key])
    if "job_count" not in kwargs:
        raise KeyError("job_count is required")
    apps = sorted(db.apps)
    if "favored" in opts:
        mix = favored_mix(apps, opts["favored"].strip(), float(opts.get("share", "0.5")))
    else:
        raw = opts.get("mix", "uniform").strip()
        if raw == "uniform":
            mix = uniform_mix(apps)
        else:
            mix = {}
            for token in _split(raw):
                app, _, p = token.partition(":")
                mix[app.strip()] = float(p)
    unknown = sorted(set(mix) - set(db.apps))
    if unknown:
        raise ValueError(f"unknown apps in mix: {', '.join(unknown)}")
    return WorkloadSpec(app_mix=mix, **kwargs)


def resolve_baseline(token: str, policies: list[PolicyConfig]) -> PolicyConfig:
    name, _, tw = token.partition(":")
    try:
        strategy = Strategy.parse(name)
    except ValueError as exc:
        raise ConfigError(f"baseline: {exc}") from None
    for p in policies:
        if p.strategy is strategy and (not tw or math.isclose(p.t_weight, float(tw))):
            return p
    raise ConfigError(f"baseline {token!r} is not among the configured policies")


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Run every (policy, scenario, seed) cell; rows come back in canonical order."""
    db = config.db or appdb_mod.load(config.appdb_path)
    rows = []
    pids = [p.partition_id for p in config.partitions]
    for scenario in config.scenarios:
        for seed in config.seeds:
            jobs = generate_workload(replace(scenario.spec, seed=seed), db)
            for policy in config.policies:
                result = run_simulation(jobs, config.partitions, db, policy,
                                        frequency_weighting=config.frequency_weighting)
                if config.write_traces:
                    tdir = config.output_dir / "traces"
                    tdir.mkdir(parents=True, exist_ok=True)
                    write_trace_csv(result.trace, tdir / (
                        f"{policy.strategy.value}_tw{policy.t_weight:g}_"
                        f"{scenario.name}_seed{seed}.csv"))
                row = {"policy": policy.strategy.value, "t_weight": policy.t_weight,
                       "scenario": scenario.name, "seed": seed}
                row.update(result.metrics.as_row(pids))
                rows.append(row)
    rows.sort(key=lambda r: (r["policy"], r["t_weight"], r["scenario"], r["seed"]))
    return rows


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return str(value)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        header = list(rows[0])
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r.get(k, "")) for k in header])
    return buf.getvalue()


def improvement(value: float, base: float, metric: str) -> float:
    """Percent improvement of ``value`` over ``base``; positive means better."""
    if base == 0:
        return 0.0 if value == base else math.nan
    if metric in HIGHER_IS_BETTER:
        return 100.0 * (value - base) / base
    return 100.0 * (base - value) / base


def summarize(rows: list[dict], baseline: PolicyConfig) -> list[dict]:
    """Seed-averaged metrics per (policy, t_weight, scenario), as % improvement over baseline."""
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        cells.setdefault((r["policy"], r["t_weight"], r["scenario"]), []).append(r)

    def mean(rs, m):
        return math.fsum(r[m] for r in rs) / len(rs)

    out = []
    for (policy, tw, scenario), rs in sorted(cells.items()):
        base_rows = cells.get((baseline.strategy.value, baseline.t_weight, scenario))
        if base_rows is None:
            continue
        row = {"policy": policy, "t_weight": tw, "scenario": scenario, "seeds": len(rs)}
        for m in METRIC_NAMES:
            row[f"{m}_improvement_pct"] = improvement(mean(rs, m), mean(base_rows, m), m)
        out.append(row)
    return out


def format_table(summary: list[dict]) -> str:
    short = {"makespan": "makespan", "avg_response_time": "response",
             "total_energy": "energy", "total_runtime": "runtime",
             "avg_frequency": "freq", "pct_optimal_partition": "opt_part"}
    head = f"{'policy':<18}{'tw':>5} {'scen':>5}" + "".join(f"{short[m]:>10}" for m in METRIC_NAMES)
    lines = [head, "-" * len(head)]
    for r in summary:
        cells = "".join(f"{r[f'{m}_improvement_pct']:>+9.1f}%" for m in METRIC_NAMES)
        lines.append(f"{r['policy']:<18}{r['t_weight']:>5g} {r['scenario']:>5}{cells}")
    return "\n".join(lines)


def run(config: ExperimentConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        rows = run_experiment(config)
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    config.output_dir.mkdir(parents=True, exist_ok=True)
    (config.output_dir / "metrics.csv").write_text(to_csv(rows), encoding="utf-8")
    baseline = config.baseline or config.policies[0]
    summary = summarize(rows, baseline)
    (config.output_dir / "summary.csv").write_text(to_csv(summary), encoding="utf-8")
    print(f"improvement over {baseline.label} (mean over {len(config.seeds)} seed(s))",
          file=stdout)
    print(format_table(summary), file=stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="eamcsim", description="Run energy-aware scheduling simulation sweeps.")
    ap.add_argument("--config", required=True, type=Path, help="experiment manifest (INI)")
    ap.add_argument("--out", type=Path, help="output directory (overrides [run] output_dir)")
    ap.add_argument("--seed-override", type=int, metavar="N", help="run only seed N")
    ap.add_argument("--baseline", metavar="POLICY",
                    help="policy used for normalisation, e.g. MinRuntime or MinRuntime:1")
    ap.add_argument("--validate", action="store_true",
                    help="check the manifest and application database, then exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.out is not None:
            config.output_dir = args.out
        if args.seed_override is not None:
            config.seeds = [args.seed_override]
        if args.baseline:
            config.baseline = resolve_baseline(args.baseline, config.policies)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.validate:
        print(f"ok: {len(config.policies)} policies x {len(config.scenarios)} scenarios x "
              f"{len(config.seeds)} seeds on {', '.join(p.partition_id for p in config.partitions)}")
        return EXIT_OK
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
