"""Acceptance criteria, one test each, at the stated tolerances and time limits.

Every test records a one-line PASS/FAIL verdict; ``conftest.py`` prints the
collected lines at the end of the pytest run.  Running this file directly
(``python tests/test_acceptance.py``) runs just this suite.
"""

import contextlib
import random
import time

import numpy as np
import pytest

from cases import pipeline_workload, random_shard_case
from conftest import make_topology
from hyperparallel import cli
from hyperparallel.hypermpmd import bubble_fraction, schedule_mpmd, schedule_spmd
from hyperparallel.hypermpmd.generate import random_workload
from hyperparallel.hyperoffload import AccessSequence, StateBlock, Step, plan_offload, simulate_plan
from hyperparallel.hypershard import Layout, execute_plan, gather_tensor, infer_reshard, shard_tensor
from hyperparallel.report import comparable
from oracles import all_tensor_maps, brute_force_makespan, expected_block, optimal_loads_all_prefixes

RESULTS: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str, limit: float | None = None):
    """Time the body, record a verdict line, and fail if the body failed or ran past ``limit`` seconds."""
    detail: dict = {}
    start = time.perf_counter()
    ok = False
    try:
        yield detail
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        late = limit is not None and elapsed >= limit
        verdict = "PASS" if ok and not late else "FAIL"
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        timing = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit else "")
        RESULTS.append(f"[{verdict}] {number:2d}. {title}: {extra}{'; ' if extra else ''}{timing}")
    assert not late, f"criterion {number} took {elapsed:.2f}s, limit {limit}s"


def _run(scenario: str):
    cfg = cli.resolve_scenario(scenario, cli.RunConfig())
    return cli.execute(cfg.command, cfg)


def test_01_shard_round_trip():
    with criterion(1, "shard round trip over 1000 random cases", 10.0) as d:
        rng = random.Random(2024)
        for i in range(1000):
            dims, aliases, tmap, shape = random_shard_case(rng)
            layout = Layout(dims, aliases)
            dense = np.random.default_rng(i).integers(-10**6, 10**6, size=shape)
            assert np.array_equal(gather_tensor(shard_tensor(dense, layout(tmap, shape), layout)), dense)
        d["cases"] = 1000


def test_02_ownership_table():
    with criterion(2, "shard subcommand prints the 2x2 ownership table") as d:
        summary = _run("shard_2x2").summary
        block = summary.split("tensor tensor:")[1].split("\n\n")[0].splitlines()
        rows = [line.split() for line in block[1:]]
        # coordinate (i, j) owns element (i, j) of [[1, 2], [3, 4]]
        assert rows[0] == ["x\\y", "y=0", "y=1"]
        assert rows[1] == ["x=0", "[[1]]", "[[2]]"]
        assert rows[2] == ["x=1", "[[3]]", "[[4]]"]
        d["rows"] = 2


def test_03_reshard_exhaustive():
    with criterion(3, "reshard plans match direct re-sharding, all (4,4) pairs on 2x2", 30.0) as d:
        layout = Layout((2, 2), ("x", "y"))
        shape = (4, 4)
        dense = np.arange(16).reshape(shape)
        maps = list(all_tensor_maps(2, layout.aliases))
        mismatches = 0
        for a in maps:
            for b in maps:
                src, dst = layout(a, shape), layout(b, shape)
                result = execute_plan(shard_tensor(dense, src, layout), infer_reshard(src, dst, layout))
                for coord, shard in result.placement.items():
                    if not np.array_equal(shard.values, expected_block(dense, layout.dims, layout.aliases, b, coord)):
                        mismatches += 1
        d["pairs"] = len(maps) ** 2
        d["mismatches"] = mismatches
        assert mismatches == 0


def test_04_masking_calibration():
    with criterion(4, "EP scenario masking calibration", 5.0) as d:
        payload = _run("ep_calibration").report["payload"]
        spmd, mpmd = payload["spmd"], payload["mpmd"]
        d["spmd_masking"] = f"{spmd['masking_ratio']:.4f}"
        d["comm_share"] = f"{spmd['communication_share']:.4f}"
        d["mpmd_masking"] = f"{mpmd['masking_ratio']:.4f}"
        assert abs(spmd["masking_ratio"] - 0.61) <= 0.02
        assert abs(spmd["communication_share"] - 0.17) <= 0.01
        assert mpmd["masking_ratio"] >= 0.90


def test_05_bubble_formula():
    with criterion(5, "pipeline bubble equals (p-1)/(m+p-1)") as d:
        topo = make_topology()
        wl = pipeline_workload(2, 2)
        assert bubble_fraction(schedule_mpmd(wl, wl.groups, topo)) == pytest.approx(1 / 3, abs=1e-15)
        worst = 0.0
        for p in range(1, 5):
            for m in range(1, 17):
                wl = pipeline_workload(p, m)
                got = bubble_fraction(schedule_mpmd(wl, wl.groups, topo))
                worst = max(worst, abs(got - (p - 1) / (m + p - 1)))
        d["max_error"] = f"{worst:.1e}"
        assert worst <= 1e-9


def test_06_mpmd_dominance():
    with criterion(6, "MPMD never slower than SPMD; within 2x of optimum on small instances") as d:
        topo = make_topology()
        rng = random.Random(6)
        for _ in range(500):
            wl = random_workload(rng, 8, 20)
            assert schedule_mpmd(wl, wl.groups, topo).makespan <= schedule_spmd(wl, topo).makespan + 1e-12
        worst = 1.0
        for _ in range(200):
            wl = random_workload(rng, 8, 6, min_tasks=1, allow_steps=False)
            optimum = brute_force_makespan(wl, topo)
            got = schedule_mpmd(wl, wl.groups, topo).makespan
            assert got <= 2 * optimum + 1e-12
            if optimum > 0:  # single-rank collectives cost nothing, so some instances are empty
                worst = max(worst, got / optimum)
        d["random"] = 500
        d["small"] = 200
        d["worst_ratio_to_optimum"] = f"{worst:.3f}"


def test_07_zero_pressure_identity():
    with criterion(7, "zero-pressure offload identity") as d:
        rng = random.Random(7)
        for _ in range(500):
            names = [f"b{i}" for i in range(rng.randint(1, 6))]
            blocks = {b: StateBlock(b, rng.randint(1, 100), pinned=rng.random() < 0.2) for b in names}
            steps = tuple(Step(rng.randint(1, 9) * 1e-3, tuple(rng.sample(names, rng.randint(1, len(names)))),
                               tuple(b for b in names if rng.random() < 0.2)) for _ in range(rng.randint(1, 12)))
            seq = AccessSequence(blocks, steps)
            capacity = sum(b.size for b in blocks.values())
            topo = make_topology(hbm_capacity_per_device=capacity)
            plan = plan_offload(seq, topo)
            rep = simulate_plan(plan, seq, topo)
            assert plan.transfer_count == 0 and plan.operator_count == 0
            assert rep.step_time_with_offload == seq.compute_total
        d["sequences"] = 500


def test_08_belady_optimal():
    with criterion(8, "Belady transfer count is minimal over every eviction policy", 60.0) as d:
        blocks = {s: StateBlock(f"b{s}", 1) for s in range(5)}
        steps = {s: Step(1e-3, (f"b{s}",)) for s in range(5)}
        cases = worse = 0
        for seq, cap, optimum in optimal_loads_all_prefixes(10, 5, 4):
            used = {blocks[s].id: blocks[s] for s in set(seq)}
            plan = plan_offload(AccessSequence(used, tuple(steps[s] for s in seq)), cap)
            cases += 1
            if plan.transfer_count != optimum:
                worse += 1
        d["cases"] = cases
        d["non_optimal"] = worse
        assert worse == 0


def test_09_sequence_length_target():
    with criterion(9, "offload / HBM-only sequence length ratio >= 1.7", 5.0) as d:
        ms = _run("offload_inference").report["payload"]["max_sequence"]
        d["hbm_only"] = ms["hbm_only"]
        d["with_offload"] = ms["with_offload"]
        d["ratio"] = f"{ms['ratio']:.4f}"
        assert ms["ratio"] >= 1.7


def test_10_data_parallel_target():
    with criterion(10, "1D-DP with offload step time <= 0.85x the ND plan", 5.0) as d:
        dp = _run("offload_training").report["payload"]["dp"]
        d["ratio"] = f"{dp['step_time_ratio']:.4f}"
        assert dp["step_time_ratio"] <= 0.85


def test_11_determinism():
    with criterion(11, "every scenario report is byte-identical across two runs") as d:
        names = cli.list_scenarios()
        for name in names:
            assert comparable(_run(name).report) == comparable(_run(name).report), name
        d["scenarios"] = len(names)


if __name__ == "__main__":
    import sys
    code = pytest.main([__file__, "-q"])
    sys.exit(code)
