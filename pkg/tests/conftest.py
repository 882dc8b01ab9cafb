import numpy as np
import pytest

from linecal.network import network_from_dict
from linecal.presets import desk_mesh_dict, four_cycle_dict, single_line_dict, triangle_dict

REF_Z = 0.00175 + 0.0202j
REF_Y = 0.404j


def analytic_zhat(z, y, kv_i=1.0, ki_i=1.0, kv_j=1.0, ki_j=1.0):
    """Measured-domain impedance matrix built directly from the true parameters."""
    w = 1 + z * y
    return np.array([[w * ki_i / kv_i, ki_j / kv_i],
                     [ki_i / kv_j, w * ki_j / kv_j]]) / (y * (w + 1))


@pytest.fixture
def single_line():
    return network_from_dict(single_line_dict())


@pytest.fixture
def triangle():
    return network_from_dict(triangle_dict())


@pytest.fixture
def four_cycle():
    return network_from_dict(four_cycle_dict())


@pytest.fixture
def desk_mesh():
    return network_from_dict(desk_mesh_dict())


def random_multigraph(seed, max_buses=30, max_lines=60):
    """Connected multigraph with at least one parallel group, as a network dict."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_buses + 1))
    edges = [(int(rng.integers(0, k)), k) for k in range(1, n)]  # random spanning tree
    extra = int(rng.integers(0, max_lines - len(edges)))
    for _ in range(extra):
        a, b = rng.choice(n, size=2, replace=False)
        edges.append((int(a), int(b)))
    edges.append(edges[int(rng.integers(0, len(edges)))][::-1])  # force a parallel
    ids = rng.permutation(len(edges))
    ref = int(rng.integers(0, n))
    return {
        "buses": [{"id": f"b{k}", "voltage_base_kv": 345.0, "is_reference": k == ref} for k in range(n)],
        "lines": [{"id": f"l{ids[e]:02d}", "from": f"b{a}", "to": f"b{b}",
                   "r_pu": 0.002, "x_pu": 0.02, "y_pu": 0.3} for e, (a, b) in enumerate(edges)],
    }


def check_plan(network, plan):
    """Coverage, causality, level optimality and ordering of a visit plan; returns nothing."""
    from collections import deque

    lines = [e.line for e in plan]
    assert sorted(lines) == sorted(network.lines)
    reached = {plan.root}
    for e in plan:
        assert e.from_bus in reached
        assert network.lines[e.line].endpoints == {e.from_bus, e.to_bus}
        reached.add(e.to_bus)
    # bus distances by an ordinary BFS
    adj = network.adjacency()
    dist = {plan.root: 0}
    queue = deque([plan.root])
    while queue:
        b = queue.popleft()
        for lid in adj[b]:
            o = network.lines[lid].other_end(b)
            if o not in dist:
                dist[o] = dist[b] + 1
                queue.append(o)
    for e in plan:
        line = network.lines[e.line]
        assert e.level == min(dist[line.from_bus], dist[line.to_bus]) + 1
    levels = [e.level for e in plan]
    assert levels == sorted(levels)
