"""Synthetic case generator: geometric vertiport networks with capacity
scenarios.

Nodes are dropped uniformly in the unit square.  Undirected connections are
picked shortest-first among all pairs, skipping any segment that would cross
an already-accepted one; a spanning subset is locked in first so the network
is always connected, and every connection becomes two directed links (one per
direction), which also guarantees a balanced circulation exists for any route
flows.  Communities are distinct origin-destination pairs within a hop limit;
the first routes are their shortest paths (so every community is served), the
rest are randomized simple paths between community endpoints.  Scenarios come
from capacity-reduction rules applied to nominal capacities.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .network import Network, validate_network
from .riskmeasures import ScenarioSet

DEFAULT_REDUCTION_RULES = ((0.2, 0.3), (0.4, 0.2))


@dataclass
class CaseSpec:
    """Parameters of a synthetic case.  Defaults give the Austin-scale
    network: 17 vertiports, 72 directed links, 200 routes, 46 communities."""

    n_nodes: int = 17
    n_links: int = 72
    n_routes: int = 200
    n_communities: int = 46
    node_cap_range: tuple = (50.0, 200.0)
    link_cap_range: tuple = (20.0, 100.0)
    reduction_rules: Sequence = DEFAULT_REDUCTION_RULES
    max_route_len: int = 5
    seed: int = 7

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ValueError("need at least 3 nodes")
        if self.n_links % 2 != 0 or self.n_links < 2 * (self.n_nodes - 1):
            raise ValueError(
                "n_links must be even and at least 2*(n_nodes-1) so both "
                "directions of a spanning set fit")
        if self.n_communities < 1 or self.n_routes < self.n_communities:
            raise ValueError("need n_routes >= n_communities >= 1")
        if self.max_route_len < 1:
            raise ValueError("max_route_len must be at least 1")
        for name, (lo, hi) in (("node_cap_range", self.node_cap_range),
                               ("link_cap_range", self.link_cap_range)):
            if not (0.0 < lo <= hi):
                raise ValueError(f"{name} must satisfy 0 < low <= high")


@dataclass
class GeneratedCase:
    """A generated instance plus the provenance block that reproduces it."""

    network: Network
    scenarios: ScenarioSet
    provenance: dict


def _segments_cross(p, a, b, c, d) -> bool:
    """True when segments (a,b) and (c,d) intersect anywhere except at a
    shared endpoint.  Indices into the coordinate array p."""
    if len({a, b} & {c, d}) > 0:
        return False

    def orient(i, j, k):
        return ((p[j, 0] - p[i, 0]) * (p[k, 1] - p[i, 1])
                - (p[j, 1] - p[i, 1]) * (p[k, 0] - p[i, 0]))

    d1, d2 = orient(a, b, c), orient(a, b, d)
    d3, d4 = orient(c, d, a), orient(c, d, b)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True

    def on_segment(i, j, k):
        return (orient(i, j, k) == 0.0
                and min(p[i, 0], p[j, 0]) <= p[k, 0] <= max(p[i, 0], p[j, 0])
                and min(p[i, 1], p[j, 1]) <= p[k, 1] <= max(p[i, 1], p[j, 1]))

    return (on_segment(a, b, c) or on_segment(a, b, d)
            or on_segment(c, d, a) or on_segment(c, d, b))


def _greedy_planar_connections(coords: np.ndarray, need: int) -> list:
    """Shortest-first non-crossing connection selection, with a spanning
    subset taken first so the result is connected.  Returns undirected pairs
    in acceptance order."""
    n = len(coords)
    pairs = [(float(np.hypot(*(coords[a] - coords[b]))), a, b)
             for a in range(n) for b in range(a + 1, n)]
    pairs.sort()
    accepted: list = []
    for _, a, b in pairs:
        if all(not _segments_cross(coords, a, b, c, d) for c, d in accepted):
            accepted.append((a, b))

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    spanning, extras = [], []
    for a, b in accepted:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            spanning.append((a, b))
        else:
            extras.append((a, b))
    if len(spanning) != n - 1:
        raise ValueError("non-crossing connections do not span the nodes")
    if need > len(accepted):
        raise ValueError(
            f"only {len(accepted)} non-crossing connections fit between these "
            f"{n} nodes but {need} were requested; use more nodes, fewer "
            "links, or another seed")
    chosen = set(spanning) | set(extras[:need - len(spanning)])
    return [pair for pair in accepted if pair in chosen]


def _out_adjacency(n_nodes: int, links: np.ndarray) -> list:
    adj = [[] for _ in range(n_nodes)]
    for k, (tail, head) in enumerate(links):
        adj[tail].append((int(k), int(head)))
    return adj


def _bfs_tree(adj: list, src: int):
    """Hop distances and (parent node, parent link) entries from src."""
    n = len(adj)
    dist = np.full(n, -1, dtype=int)
    parent = [(-1, -1)] * n
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for link, v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                parent[v] = (u, link)
                queue.append(v)
    return dist, parent


def _path_links(parent: list, dst: int) -> list:
    links = []
    node = dst
    while parent[node][0] >= 0:
        links.append(parent[node][1])
        node = parent[node][0]
    return links[::-1]


def _random_simple_path(adj: list, src: int, dst: int, max_len: int,
                        rng: np.random.Generator) -> Optional[list]:
    """First simple path src -> dst of at most max_len links found by a
    depth-first search with randomized neighbor order."""
    nodes = [src]
    path: list = []
    iters = [iter(rng.permutation(len(adj[src])))]
    on_path = {src}
    budget = 4000
    while iters:
        node = nodes[-1]
        advanced = False
        for idx in iters[-1]:
            budget -= 1
            if budget <= 0:
                return None
            link, nxt = adj[node][int(idx)]
            if nxt in on_path or len(path) >= max_len:
                continue
            path.append(link)
            nodes.append(nxt)
            on_path.add(nxt)
            if nxt == dst:
                return path
            iters.append(iter(rng.permutation(len(adj[nxt]))))
            advanced = True
            break
        if not advanced:
            iters.pop()
            on_path.discard(nodes.pop())
            if path:
                path.pop()
    return None


def generate(spec: CaseSpec) -> GeneratedCase:
    """Builds a case from the spec, deterministically in spec.seed.  The
    network always passes validate_network."""
    rng = np.random.default_rng(spec.seed)
    coords = rng.uniform(0.0, 1.0, size=(spec.n_nodes, 2))

    connections = _greedy_planar_connections(coords, spec.n_links // 2)
    links = []
    for a, b in connections:
        links.append((a, b))
        links.append((b, a))
    links = np.array(links, dtype=int)
    adj = _out_adjacency(spec.n_nodes, links)

    trees = [_bfs_tree(adj, s) for s in range(spec.n_nodes)]

    reachable_pairs = [
        (o, d)
        for o in range(spec.n_nodes) for d in range(spec.n_nodes)
        if o != d and 1 <= trees[o][0][d] <= spec.max_route_len
    ]
    if len(reachable_pairs) < spec.n_communities:
        raise ValueError(
            f"only {len(reachable_pairs)} origin-destination pairs lie within "
            f"{spec.max_route_len} hops but {spec.n_communities} communities "
            "were requested")
    pick = rng.choice(len(reachable_pairs), size=spec.n_communities,
                      replace=False)
    community_od = [reachable_pairs[int(i)] for i in pick]

    routes = []
    route_communities = []
    seen_routes = set()
    for k, (o, d) in enumerate(community_od):
        path = _path_links(trees[o][1], d)
        routes.append(np.array(path, dtype=int))
        route_communities.append(np.array([k], dtype=int))
        seen_routes.add(tuple(path))
    for _ in range(spec.n_routes - spec.n_communities):
        route = None
        serve = 0
        for _attempt in range(30):
            k = int(rng.integers(spec.n_communities))
            o, d = community_od[k]
            path = _random_simple_path(adj, o, d, spec.max_route_len, rng)
            if path is None:
                continue
            if tuple(path) not in seen_routes or _attempt == 29:
                route, serve = path, k
                break
        if route is None:
            k = int(rng.integers(spec.n_communities))
            o, d = community_od[k]
            route, serve = _path_links(trees[o][1], d), k
        seen_routes.add(tuple(route))
        routes.append(np.array(route, dtype=int))
        route_communities.append(np.array([serve], dtype=int))

    net = Network(n_nodes=spec.n_nodes, links=links, routes=routes,
                  n_communities=spec.n_communities,
                  route_communities=route_communities,
                  coordinates=coords)
    problems = validate_network(net)
    if problems:
        raise AssertionError(
            "generated network failed validation: " + "; ".join(problems))

    node_caps = rng.uniform(*spec.node_cap_range, size=spec.n_nodes)
    link_caps = rng.uniform(*spec.link_cap_range, size=spec.n_links)
    scen = scenario_from_reductions(node_caps, link_caps, spec.reduction_rules)
    provenance = {
        "generator": "fairflow casegen",
        "seed": int(spec.seed),
        "spec": {
            "n_nodes": spec.n_nodes,
            "n_links": spec.n_links,
            "n_routes": spec.n_routes,
            "n_communities": spec.n_communities,
            "node_cap_range": [float(v) for v in spec.node_cap_range],
            "link_cap_range": [float(v) for v in spec.link_cap_range],
            "reduction_rules": [[float(f), float(p)]
                                for f, p in spec.reduction_rules],
            "max_route_len": spec.max_route_len,
        },
    }
    return GeneratedCase(network=net, scenarios=scen, provenance=provenance)


def scenario_from_reductions(node_caps, link_caps, rules) -> ScenarioSet:
    """Builds a ScenarioSet: the nominal capacities with the leftover
    probability first, then one scenario per (reduction_fraction, probability)
    rule with all capacities scaled by (1 - fraction)."""
    node_caps = np.asarray(node_caps, dtype=float)
    link_caps = np.asarray(link_caps, dtype=float)
    rules = list(rules)
    total_p = 0.0
    for frac, p in rules:
        if not (0.0 <= frac <= 1.0):
            raise ValueError(f"reduction fraction {frac} outside [0, 1]")
        if p <= 0.0:
            raise ValueError(f"rule probability {p} must be positive")
        total_p += p
    if total_p >= 1.0:
        raise ValueError("rule probabilities must leave room for the nominal "
                         f"scenario; they sum to {total_p}")
    node_rows = [node_caps]
    link_rows = [link_caps]
    probs = [1.0 - total_p]
    for frac, p in rules:
        node_rows.append((1.0 - frac) * node_caps)
        link_rows.append((1.0 - frac) * link_caps)
        probs.append(float(p))
    return ScenarioSet(node_caps=np.array(node_rows),
                       link_caps=np.array(link_rows),
                       probs=np.array(probs))
