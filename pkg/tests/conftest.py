import sys
from pathlib import Path

import pytest
from hypothesis import settings

from hyperparallel.topology import Topology

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

GiB = 2**30
SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "hyperparallel" / "scenarios"


def make_topology(**overrides) -> Topology:
    fields = dict(rack_count=2, devices_per_rack=4, intra_rack_bandwidth=1e11, inter_rack_bandwidth=5e10,
                  intra_rack_latency=1e-6, inter_rack_latency=5e-6, hbm_capacity_per_device=64 * GiB,
                  hbm_bandwidth=1.6e12, pool_capacity=1024 * GiB, pool_bandwidth=1e11)
    fields.update(overrides)
    return Topology(**fields)


@pytest.fixture
def topology() -> Topology:
    return make_topology()


@pytest.fixture
def scenarios() -> Path:
    return SCENARIOS


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
