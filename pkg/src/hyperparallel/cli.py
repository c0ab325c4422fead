"""Command-line entry point.

Subcommands::

    hyperparallel shard            --layout FILE [--cluster FILE]
    hyperparallel simulate-mpmd    --cluster FILE (--workload FILE | --seed N) [--groups FILE] [--scheduler mpmd|spmd]
    hyperparallel simulate-offload --cluster FILE --model FILE [--lookahead N]
    hyperparallel compare          --cluster FILE --workload FILE [--groups FILE]
    hyperparallel validate         [--cluster FILE] [--workload FILE] [--groups FILE] [--layout FILE] [--model FILE]
    hyperparallel run              --scenario NAME [--scenario NAME ...] [--jobs N]
    hyperparallel scenarios

Any subcommand accepts ``--scenario NAME`` to take its input files from a
bundled scenario.  With ``--out DIR`` the run writes ``report.json``,
``summary.txt`` and (where there is a timeline) ``trace.ndjson``.

Exit status: 0 success, 2 invalid input (reported as ``file:line: message``),
3 infeasible request, 4 internal integrity failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from . import __version__, configio, trace
from .errors import ConfigError, InfeasibleError, IntegrityError
from .report import build_report, dumps
from .topology import Topology, build_topology

log = logging.getLogger("hyperparallel")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTEGRITY = 0, 2, 3, 4
COMMANDS = ("shard", "simulate-mpmd", "simulate-offload", "compare")
_FILE_KEYS = ("cluster", "workload", "groups", "layout", "model")


@dataclass
class RunConfig:
    cluster: Path | None = None
    workload: Path | None = None
    groups: Path | None = None
    layout: Path | None = None
    model: Path | None = None
    scenario: str | None = None
    out: Path | None = None
    seed: int | None = None
    scheduler: str = "mpmd"
    lookahead: int | None = None
    command: str | None = None


@dataclass
class RunResult:
    report: dict[str, Any]
    summary: str
    traces: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    extra_files: dict[str, str] = field(default_factory=dict)


# scenarios ------------------------------------------------------------------

def scenario_root() -> Path:
    return Path(str(resources.files("hyperparallel") / "scenarios"))


def list_scenarios() -> list[str]:
    root = scenario_root()
    return sorted(p.name for p in root.iterdir() if (p / "scenario.yaml").is_file())


def resolve_scenario(name: str, cfg: RunConfig) -> RunConfig:
    """Fill the file paths ``cfg`` leaves unset from the scenario's manifest."""
    base = scenario_root() / name
    manifest = base / "scenario.yaml"
    if not manifest.is_file():
        raise ConfigError(f"unknown scenario {name!r} (available: {', '.join(list_scenarios())})",
                          field="scenario")
    doc = configio.require_mapping(configio.load_file(manifest), "scenario")
    updates: dict[str, Any] = {"scenario": name}
    for key in _FILE_KEYS:
        if getattr(cfg, key) is None and doc.get(key):
            updates[key] = base / str(doc[key])
    if cfg.command is None and doc.get("command"):
        updates["command"] = str(doc["command"])
    return replace(cfg, **updates)


# loading helpers ------------------------------------------------------------

def _need(cfg: RunConfig, key: str, command: str) -> Path:
    path = getattr(cfg, key)
    if path is None:
        raise ConfigError(f"{command} needs --{key}", field=key)
    return Path(path)


def _topology(cfg: RunConfig, command: str) -> Topology:
    return build_topology(configio.load_file(_need(cfg, "cluster", command)))


def _maybe_topology(cfg: RunConfig) -> Topology | None:
    return build_topology(configio.load_file(cfg.cluster)) if cfg.cluster else None


def _inputs(cfg: RunConfig, *keys: str) -> dict[str, Path | None]:
    return {k: getattr(cfg, k) for k in keys}


def _fmt_time(seconds: float | None) -> str:
    if seconds is None:
        return "n/a"
    if seconds == 0:
        return "0"
    if abs(seconds) >= 1:
        return f"{seconds:.4g} s"
    if abs(seconds) >= 1e-3:
        return f"{seconds * 1e3:.4g} ms"
    return f"{seconds * 1e6:.4g} us"


def _fmt_bytes(n: float) -> str:
    for unit, size in (("TiB", 2**40), ("GiB", 2**30), ("MiB", 2**20), ("KiB", 2**10)):
        if abs(n) >= size:
            return f"{n / size:.4g} {unit}"
    return f"{n:g} B"


# shard ----------------------------------------------------------------------

def _block_text(values: np.ndarray) -> str:
    return json.dumps(values.tolist())


def cmd_shard(cfg: RunConfig) -> RunResult:
    from .hypershard import (default_binding, gather_tensor, infer_reshard, load_layout_file, reshard_cost,
                             shard_tensor)

    topology = _maybe_topology(cfg)
    path = _need(cfg, "layout", "shard")
    spec = load_layout_file(path, topology.device_count if topology else None)
    layout = spec.layout
    binding = default_binding(layout, spec.ranks)
    tensors: dict[str, Any] = {}
    lines = [f"device matrix {list(layout.dims)} aliases {list(layout.aliases)}"]
    for name, decl in spec.tensors.items():
        dense = np.arange(1, int(np.prod(decl.shape)) + 1).reshape(decl.shape)
        sharded = shard_tensor(dense, decl.strategy, layout)
        if not np.array_equal(gather_tensor(sharded), dense):
            raise IntegrityError(f"tensor {name!r}: gather(shard(t)) != t")
        owners = []
        for coord in layout.coordinates():
            shard = sharded.placement[coord]
            owners.append({"coord": list(coord), "rank": binding[coord], "offset": list(shard.offset),
                           "shape": list(shard.values.shape), "values": shard.values.tolist()})
        tmap = [("None" if a is None else a) for a in decl.tensor_map]
        tensors[name] = {"shape": list(decl.shape), "tensor_map": tmap,
                         "local_shape": list(decl.strategy.local_shape), "ownership": owners}
        lines.append("")
        lines.append(f"tensor {name}: shape {list(decl.shape)} tensor_map {tmap} "
                     f"local shape {list(decl.strategy.local_shape)} (values 1..{dense.size} row-major)")
        lines.extend(_ownership_table(layout, sharded))

    reshards = []
    for a, b in spec.reshards:
        plan = infer_reshard(spec.tensors[a].strategy, spec.tensors[b].strategy, layout)
        entry: dict[str, Any] = {"from": a, "to": b, "steps": [s.describe(layout) for s in plan.steps]}
        if topology is not None:
            entry["cost"] = reshard_cost(plan, spec.element_bytes, topology, layout, binding)
        reshards.append(entry)
        lines.append("")
        lines.append(f"reshard {a} -> {b}: " + ("no-op" if not plan.steps else "; ".join(entry["steps"])))
        if "cost" in entry:
            lines.append(f"  estimated time {_fmt_time(entry['cost'])}")

    payload = {"layout": {"device_matrix": list(layout.dims), "alias_name": list(layout.aliases)},
               "tensors": tensors, "reshards": reshards}
    report = build_report("shard", payload, _inputs(cfg, "layout", "cluster"))
    return RunResult(report, "\n".join(lines) + "\n")


def _ownership_table(layout, sharded) -> list[str]:
    """Coordinate grid for 1-D and 2-D device matrices, a flat list otherwise."""
    cells = {c: _block_text(sharded.placement[c].values) for c in layout.coordinates()}
    if len(layout.dims) == 2:
        rows, cols = layout.dims
        ax, ay = layout.aliases
        head = [f"{ax}\\{ay}"] + [f"{ay}={j}" for j in range(cols)]
        body = [[f"{ax}={i}"] + [cells[(i, j)] for j in range(cols)] for i in range(rows)]
        widths = [max(len(r[k]) for r in [head] + body) for k in range(cols + 1)]
        return ["  " + "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [head] + body]
    return [f"  {list(c)}: {v}" for c, v in cells.items()]


# mpmd -----------------------------------------------------------------------

def _load_workload(cfg: RunConfig, topology: Topology, command: str):
    from .hypermpmd import load_process_groups, load_workload, validate_against_topology
    from .hypermpmd.generate import random_workload, workload_document

    generated = None
    if cfg.workload is None:
        if cfg.seed is None:
            raise ConfigError(f"{command} needs --workload (or --seed for a generated workload)", field="workload")
        workload = random_workload(cfg.seed, topology.device_count)
        generated = yaml.safe_dump(workload_document(workload), sort_keys=False)
    else:
        groups = load_process_groups(cfg.groups) if cfg.groups else None
        workload = load_workload(cfg.workload, groups)
    errors = validate_against_topology(list(workload.groups.values()), topology)
    if errors:
        raise errors[0]
    workload.check_groups()
    return workload, generated


def _schedule_lines(rep: dict[str, Any]) -> list[str]:
    return [
        f"  makespan             {_fmt_time(rep['makespan'])}",
        f"  masking ratio        {rep['masking_ratio']:.4f}",
        f"  communication share  {rep['communication_share']:.4f}",
        f"  bubble fraction      {rep['bubble_fraction']:.4f}",
        f"  straggler gap        {_fmt_time(rep['straggler_gap'])}",
    ]


def cmd_simulate_mpmd(cfg: RunConfig) -> RunResult:
    from .hypermpmd import report as schedule_report, schedule_mpmd, schedule_spmd

    topology = _topology(cfg, "simulate-mpmd")
    workload, generated = _load_workload(cfg, topology, "simulate-mpmd")
    if cfg.scheduler == "spmd":
        timeline = schedule_spmd(workload, topology)
    else:
        timeline = schedule_mpmd(workload, workload.groups, topology)
    rep = schedule_report(timeline, cfg.scheduler).to_dict()
    extra = {"seed": cfg.seed} if generated is not None else None
    report = build_report("simulate-mpmd", rep, _inputs(cfg, "cluster", "workload", "groups"), extra)
    summary = "\n".join([f"{cfg.scheduler.upper()} schedule: {len(timeline.intervals)} intervals on "
                         f"{len(timeline.ranks)} ranks"] + _schedule_lines(rep)) + "\n"
    files = {"workload.generated.yaml": generated} if generated is not None else {}
    return RunResult(report, summary, {"trace.ndjson": timeline.records()}, files)


def cmd_compare(cfg: RunConfig) -> RunResult:
    from .hypermpmd import compare_schedules

    topology = _topology(cfg, "compare")
    workload, generated = _load_workload(cfg, topology, "compare")
    comparison, spmd, mpmd = compare_schedules(workload, None, topology)
    payload = comparison.to_dict()
    extra = {"seed": cfg.seed} if generated is not None else None
    report = build_report("compare", payload, _inputs(cfg, "cluster", "workload", "groups"), extra)
    lines = ["SPMD baseline" + (" (two in-order streams)" if workload.overlap == "in_order" else "")]
    lines += _schedule_lines(payload["spmd"])
    lines += ["MPMD"] + _schedule_lines(payload["mpmd"])
    lines.append(f"makespan ratio (MPMD / SPMD)  {payload['makespan_ratio']:.4f}")
    files = {"workload.generated.yaml": generated} if generated is not None else {}
    traces = {"trace.ndjson": mpmd.records(), "trace.spmd.ndjson": spmd.records()}
    return RunResult(report, "\n".join(lines) + "\n", traces, files)


# offload --------------------------------------------------------------------

def cmd_simulate_offload(cfg: RunConfig) -> RunResult:
    from .hyperoffload import (NDPlan, build_access_sequence, dp_feasibility, load_model_file, max_capacity,
                               max_seq_under_latency, per_device_model, plan_offload, simulate_plan)

    topology = _topology(cfg, "simulate-offload")
    path = cfg.model or cfg.workload
    if path is None:
        raise ConfigError("simulate-offload needs --model", field="model")
    spec = load_model_file(path)
    lookahead = cfg.lookahead or spec.lookahead
    devices = spec.participating_devices
    model = spec.model
    if spec.mode == "training":
        # one data-parallel replica's share of the global batch
        model = per_device_model(model, devices or topology.device_count)
    seq = build_access_sequence(model, spec.mode, topology.hbm_bandwidth)
    plan = plan_offload(seq, topology, lookahead)
    sim = simulate_plan(plan, seq, topology)
    capacity = max_capacity(topology, spec.mode, participating_devices=devices)
    payload: dict[str, Any] = {
        "mode": spec.mode,
        "lookahead": lookahead,
        "capacity": capacity.to_dict(),
        "simulation": sim.to_dict(),
        "operators": [list(op) for op in plan.annotated(seq) if op[0] != "compute"],
    }
    scope = " per data-parallel rank" if spec.mode == "training" else ""
    lines = [f"{spec.mode} access sequence{scope}: {len(seq.steps)} steps, {len(seq.blocks)} blocks, lookahead {lookahead}",
             f"  HBM capacity          {_fmt_bytes(capacity.hbm_only)} (with pool share {_fmt_bytes(capacity.with_offload)})",
             f"  HBM peak              {_fmt_bytes(sim.hbm_peak)}",
             f"  transfers             {sim.transfer_count} ({_fmt_bytes(sim.transfer_bytes)})",
             f"  total stall           {_fmt_time(sim.total_stall)}",
             f"  step time             {_fmt_time(sim.step_time_with_offload)} "
             f"(compute only {_fmt_time(sim.step_time_without_offload)})"]

    if spec.mode == "inference" and spec.latency_budget is not None:
        res = max_seq_under_latency(spec.model, spec.latency_budget, topology, lookahead, devices)
        payload["max_sequence"] = res.to_dict()
        ratio = "n/a" if res.hbm_only == 0 else f"{res.ratio:.4f}"
        lines += [f"max sequence length under {_fmt_time(spec.latency_budget)} per token",
                  f"  HBM only              {res.hbm_only} tokens",
                  f"  with offload          {res.with_offload} tokens",
                  f"  ratio                 {ratio}"]
        lines += [f"  note: {d}" for d in res.diagnostics]

    if spec.mode == "training":
        one = dp_feasibility(spec.model, topology, "1d_dp", devices=devices, lookahead=lookahead)
        payload["dp"] = {"1d_dp": one.to_dict()}
        lines += ["1D data parallel" + (" (with offload)" if one.needs_offload else ""),
                  f"  feasible              {one.feasible}",
                  f"  step time             {_fmt_time(one.step_time)} "
                  f"(compute {_fmt_time(one.compute_time)}, stall {_fmt_time(one.offload_stall)}, "
                  f"sync {_fmt_time(one.sync_time)})"]
        nd_doc = spec.training.get("nd_plan")
        if nd_doc:
            nd = dp_feasibility(spec.model, topology, "nd", NDPlan.from_dict(nd_doc), devices=devices)
            payload["dp"]["nd"] = nd.to_dict()
            payload["dp"]["step_time_ratio"] = one.step_time / nd.step_time
            lines += [f"reference ND plan (tp={nd_doc['tp']}, pp={nd_doc['pp']}, dp={nd_doc['dp']})",
                      f"  feasible              {nd.feasible}",
                      f"  step time             {_fmt_time(nd.step_time)} "
                      f"(compute {_fmt_time(nd.compute_time)}, tp/pp {_fmt_time(nd.parallel_overhead)}, "
                      f"sync {_fmt_time(nd.sync_time)})",
                      f"1D-DP / ND step time    {payload['dp']['step_time_ratio']:.4f}"]

    report = build_report("simulate-offload", payload, {"cluster": cfg.cluster, "model": path})
    records = [iv.record() for iv in sim.trace]
    return RunResult(report, "\n".join(lines) + "\n", {"trace.ndjson": records})


# validate ---------------------------------------------------------------------

def validate(cfg: RunConfig) -> list[str]:
    """Every diagnostic found across the referenced files, without simulating anything."""
    from .hyperoffload import load_model_file
    from .hypermpmd import check_process_groups, load_workload, validate_against_topology
    from .hypershard import load_layout_file

    diags: list[str] = []

    def attempt(fn: Callable[[], Any]) -> Any:
        try:
            return fn()
        except ConfigError as exc:
            diags.append(exc.located())
        except (InfeasibleError, IntegrityError) as exc:
            diags.append(str(exc))
        return None

    topology = attempt(lambda: build_topology(configio.load_file(cfg.cluster))) if cfg.cluster else None
    groups = None
    if cfg.groups:
        doc = attempt(lambda: configio.load_file(cfg.groups))
        if doc is not None:
            groups, errors = check_process_groups(doc)
            diags.extend(e.located() for e in errors)
            if errors:
                groups = None
    if groups and topology:
        diags.extend(e.located() for e in validate_against_topology(groups, topology))
    if cfg.workload:
        wl = attempt(lambda: load_workload(cfg.workload, groups))
        if wl is not None and topology is not None:
            if not cfg.groups:
                diags.extend(e.located() for e in validate_against_topology(list(wl.groups.values()), topology))
            attempt(wl.check_groups)
    if cfg.layout:
        attempt(lambda: load_layout_file(cfg.layout, topology.device_count if topology else None))
    if cfg.model:
        attempt(lambda: load_model_file(cfg.model))
    return diags


# dispatch -------------------------------------------------------------------

_HANDLERS: dict[str, Callable[[RunConfig], RunResult]] = {
    "shard": cmd_shard,
    "simulate-mpmd": cmd_simulate_mpmd,
    "simulate-offload": cmd_simulate_offload,
    "compare": cmd_compare,
}


def execute(command: str, cfg: RunConfig) -> RunResult:
    if command not in _HANDLERS:
        raise ConfigError(f"unknown command {command!r}", field="command")
    return _HANDLERS[command](cfg)


def write_outputs(result: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(result.report), encoding="utf-8")
    (out / "summary.txt").write_text(result.summary, encoding="utf-8")
    for name, records in result.traces.items():
        trace.write_ndjson(records, out / name)
    for name, text in result.extra_files.items():
        (out / name).write_text(text, encoding="utf-8")


def _emit(result: RunResult, fmt: str) -> None:
    sys.stdout.write(dumps(result.report) if fmt == "json" else result.summary)


def _run_scenario(name: str, out: str | None) -> tuple[str, int, str, RunResult | None]:
    """Worker for ``run``: returns (name, exit code, diagnostic, result)."""
    try:
        cfg = resolve_scenario(name, RunConfig())
        if cfg.command is None:
            raise ConfigError(f"scenario {name!r} does not name a command", field="command")
        result = execute(cfg.command, cfg)
        if out:
            write_outputs(result, Path(out) / name)
        return name, EXIT_OK, "", result
    except BaseException as exc:  # report and keep going with the other scenarios
        code, message = _classify(exc)
        return name, code, message, None


def _classify(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG, f"error: {exc.located()}"
    if isinstance(exc, InfeasibleError):
        return EXIT_INFEASIBLE, f"infeasible: {exc}"
    if isinstance(exc, IntegrityError):
        return EXIT_INTEGRITY, f"integrity failure: {exc}"
    raise exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperparallel",
                                     description="Desk-scale simulator for supernode parallelism.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--cluster", type=Path, help="cluster topology file")
        p.add_argument("--scenario", help="take unset input files from a bundled scenario")
        p.add_argument("--out", type=Path, help="directory for report.json, summary.txt and traces")
        p.add_argument("--format", choices=("json", "text"), default="text", help="stdout format")

    p = sub.add_parser("shard", help="derive shard strategies and print ownership tables")
    common(p)
    p.add_argument("--layout", "--workload", dest="layout", type=Path, help="layout declaration file")

    for name, text in (("simulate-mpmd", "schedule a workload with one scheduler"),
                       ("compare", "schedule a workload under SPMD and MPMD and compare")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--workload", type=Path, help="workload graph file")
        p.add_argument("--groups", type=Path, help="process-group file (overrides inline groups)")
        p.add_argument("--seed", type=int, help="generate a random workload with this seed")
        if name == "simulate-mpmd":
            p.add_argument("--scheduler", choices=("mpmd", "spmd"), default="mpmd")

    p = sub.add_parser("simulate-offload", help="plan and simulate HBM offload for a model")
    common(p)
    p.add_argument("--model", "--workload", dest="model", type=Path, help="model spec file")
    p.add_argument("--lookahead", type=int, help="prefetch lookahead in steps (overrides the model file)")

    p = sub.add_parser("validate", help="check input files without simulating")
    common(p)
    for key in ("workload", "groups", "layout", "model"):
        p.add_argument(f"--{key}", type=Path)

    p = sub.add_parser("run", help="run bundled scenarios")
    p.add_argument("--scenario", action="append", required=True, help="scenario name (repeatable)")
    p.add_argument("--out", type=Path, help="parent directory; each scenario writes to OUT/NAME")
    p.add_argument("--jobs", type=int, default=1, help="run up to N scenarios concurrently")
    p.add_argument("--format", choices=("json", "text"), default="text")

    sub.add_parser("scenarios", help="list bundled scenarios")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(**{k: getattr(args, k, None) for k in _FILE_KEYS},
                    out=getattr(args, "out", None), seed=getattr(args, "seed", None),
                    scheduler=getattr(args, "scheduler", "mpmd") or "mpmd",
                    lookahead=getattr(args, "lookahead", None))
    if getattr(args, "scenario", None):
        cfg = resolve_scenario(args.scenario, cfg)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "scenarios":
            for name in list_scenarios():
                doc = configio.load_file(scenario_root() / name / "scenario.yaml")
                print(f"{name:20s} {doc.get('command', ''):17s} {doc.get('description', '')}")
            return EXIT_OK
        if args.command == "run":
            return _run_many(args)
        cfg = _config_from_args(args)
        if args.command == "validate":
            diags = validate(cfg)
            if args.format == "json":
                print(json.dumps({"diagnostics": diags}, indent=2))
            else:
                for d in diags:
                    print(d)
                if not diags:
                    print("ok")
            return EXIT_CONFIG if diags else EXIT_OK
        if getattr(args, "lookahead", None) is not None and args.lookahead < 1:
            raise ConfigError("--lookahead must be >= 1", field="lookahead")
        log.info("running %s", args.command)
        result = execute(args.command, cfg)
        if cfg.out:
            write_outputs(result, cfg.out)
        _emit(result, args.format)
        return EXIT_OK
    except (ConfigError, InfeasibleError, IntegrityError) as exc:
        code, message = _classify(exc)
        print(message, file=sys.stderr)
        return code


def _run_many(args: argparse.Namespace) -> int:
    names = list(args.scenario)
    out = str(args.out) if args.out else None
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_run_scenario, names, [out] * len(names)))
    else:
        outcomes = [_run_scenario(n, out) for n in names]
    worst = EXIT_OK
    for name, code, message, result in outcomes:
        if code:
            print(f"[{name}] {message}", file=sys.stderr)
            worst = max(worst, code)
        elif args.format == "json":
            sys.stdout.write(dumps(result.report))
        else:
            sys.stdout.write(f"== {name} ==\n{result.summary}")
    return worst


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
