import math

import pytest
from hypothesis import given, strategies as st

from conftest import GiB, make_topology
from hyperparallel import configio
from hyperparallel.errors import ConfigError
from hyperparallel.topology import LinkClass, build_topology, link_between, point_to_point_time, worst_link

CLUSTER = """\
rack_count: 2
devices_per_rack: 4
intra_rack_bandwidth: 1.0e11
inter_rack_bandwidth: 5.0e10
intra_rack_latency: 1us
inter_rack_latency: 5us
hbm_capacity_per_device: 68719476736
hbm_bandwidth: 1.6e12
pool_capacity: 1099511627776
pool_bandwidth: 1.0e11
"""


def test_build_from_document():
    topo = build_topology(configio.loads(CLUSTER, "c.yaml"))
    assert topo == make_topology()
    assert topo.device_count == 8
    assert topo.intra_rack_latency == pytest.approx(1e-6)


def test_nested_cluster_key_is_accepted():
    doc = configio.loads("cluster:\n" + "".join("  " + line + "\n" for line in CLUSTER.splitlines()))
    assert build_topology(doc).device_count == 8


def test_tier_ordering_bandwidth_names_field():
    text = CLUSTER.replace("inter_rack_bandwidth: 5.0e10", "inter_rack_bandwidth: 2.0e11")
    with pytest.raises(ConfigError) as exc:
        build_topology(configio.loads(text, "c.yaml"))
    assert exc.value.field == "inter_rack_bandwidth"
    assert "tier ordering" in exc.value.message
    assert exc.value.located().startswith("c.yaml:4:")


def test_tier_ordering_latency():
    with pytest.raises(ConfigError, match="tier ordering"):
        make_topology(intra_rack_latency=1e-5)


@pytest.mark.parametrize("field", ["rack_count", "devices_per_rack", "hbm_capacity_per_device",
                                   "intra_rack_bandwidth", "hbm_bandwidth", "pool_bandwidth"])
def test_non_positive_fields_rejected(field):
    with pytest.raises(ConfigError) as exc:
        make_topology(**{field: 0})
    assert exc.value.field == field


def test_zero_pool_is_allowed():
    assert make_topology(pool_capacity=0).pool_share() == 0


def test_missing_field_reports_location():
    text = CLUSTER.replace("hbm_bandwidth: 1.6e12\n", "")
    with pytest.raises(ConfigError, match="hbm_bandwidth"):
        build_topology(configio.loads(text, "c.yaml"))


def test_fractional_bytes_rejected():
    with pytest.raises(ConfigError, match="integers"):
        build_topology(configio.loads(CLUSTER.replace("68719476736", "6.5e10")))


def test_links(topology):
    assert link_between(topology, 2, 2) is LinkClass.SELF
    assert link_between(topology, 0, 3) is LinkClass.INTRA_RACK
    assert link_between(topology, 3, 4) is LinkClass.INTER_RACK
    assert worst_link(topology, [0, 1, 2]) is LinkClass.INTRA_RACK
    assert worst_link(topology, [0, 5]) is LinkClass.INTER_RACK
    assert worst_link(topology, [6]) is LinkClass.SELF


def test_rank_out_of_range(topology):
    with pytest.raises(ConfigError, match="out of range"):
        link_between(topology, 0, 8)


def test_point_to_point_times(topology):
    assert point_to_point_time(topology, 1e6, 0, 1) == pytest.approx(1e-6 + 1e6 / 1e11)
    assert point_to_point_time(topology, 1e6, 0, 4) == pytest.approx(5e-6 + 1e6 / 5e10)
    assert point_to_point_time(topology, 1e6, 3, 3) == 0.0


def test_pool_share():
    topo = make_topology(pool_capacity=8 * GiB)
    assert topo.pool_share() == GiB
    assert topo.pool_share(2) == 4 * GiB
    with pytest.raises(ConfigError):
        topo.pool_share(0)


@given(st.integers(0, 7), st.integers(0, 7), st.floats(0, 1e9))
def test_inter_rack_never_cheaper(a, b, nbytes):
    topo = make_topology()
    same_rack_peer = (a // 4) * 4 + ((a + 1) % 4)
    if a == same_rack_peer:
        return
    t_intra = point_to_point_time(topo, nbytes, a, same_rack_peer)
    other = (a + 4) % 8
    assert point_to_point_time(topo, nbytes, a, other) >= t_intra
    assert math.isfinite(point_to_point_time(topo, nbytes, a, b))
