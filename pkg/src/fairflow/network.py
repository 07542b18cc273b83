"""Vertiport network model: nodes, directed links, routes, communities.

File format (JSON, ids are 1-based; in memory everything is 0-based):

    {
      "format_version": 1,
      "nodes": {"count": N, "coordinates": [[x, y], ...]?},
      "links": [[tail, head], ...],
      "routes": [[link_id, ...], ...],
      "communities": C,
      "route_communities": [[community_id, ...], ...]
    }

Unknown top-level keys (for example a generator provenance block) are
ignored.  Instances are treated as immutable after construction; share them
freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputFormatError

FORMAT_VERSION = 1


@dataclass
class Network:
    """A routing network.

    Attributes:
        n_nodes: number of vertiports.
        links: (n_links, 2) int array of (tail, head) node indices.
        routes: list of int arrays, each a sequence of link indices forming a
            head-to-tail chain.
        n_communities: number of demand communities.
        route_communities: list of int arrays; entry r holds the communities
            route r serves.
        coordinates: optional (n_nodes, 2) float array of planar positions.
    """

    n_nodes: int
    links: np.ndarray
    routes: list
    n_communities: int
    route_communities: list
    coordinates: Optional[np.ndarray] = None

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_routes(self) -> int:
        return len(self.routes)


@dataclass
class IncidenceMatrices:
    """Dense incidence data derived from a Network.

    Attributes:
        node_link: (n_nodes, n_links); +1 at the head of a link, -1 at the
            tail, so node_link @ y is the net inflow at each node.
        link_route: (n_links, n_routes) 0/1; link k is on route r.
        community_route: (n_communities, n_routes) 0/1; route r serves
            community i, so community_route @ z aggregates allocations.
        node_inflow: (n_nodes, n_links) 0/1, the positive part of node_link;
            node_inflow @ y counts arrivals and is what node capacity caps.
    """

    node_link: np.ndarray
    link_route: np.ndarray
    community_route: np.ndarray
    node_inflow: np.ndarray


def build_incidence(net: Network) -> IncidenceMatrices:
    """Builds the four dense incidence matrices for a validated network."""
    e = np.zeros((net.n_nodes, net.n_links))
    for k, (tail, head) in enumerate(net.links):
        e[tail, k] -= 1.0
        e[head, k] += 1.0
    f = np.zeros((net.n_links, net.n_routes))
    for r, route in enumerate(net.routes):
        f[route, r] = 1.0
    h = np.zeros((net.n_communities, net.n_routes))
    for r, comms in enumerate(net.route_communities):
        h[comms, r] = 1.0
    k_pos = np.maximum(e, 0.0)
    return IncidenceMatrices(e, f, h, k_pos)


def residual_balance(node_link: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Net inflow per node for link flows y; zero for balanced flow."""
    y = np.asarray(y, dtype=float)
    if y.shape != (node_link.shape[1],):
        raise ValueError(f"flow has shape {y.shape}, expected ({node_link.shape[1]},)")
    return node_link @ y


def validate_network(net: Network) -> list[str]:
    """Returns a list of human-readable violations; empty means valid."""
    out = []
    if net.n_nodes < 1:
        out.append("node count must be at least 1")
    if net.n_communities < 1:
        out.append("community count must be at least 1")
    for k, (tail, head) in enumerate(net.links):
        if tail == head:
            out.append(f"link {k + 1}: self-loop link ({tail + 1} -> {head + 1})")
        for label, v in (("tail", tail), ("head", head)):
            if not 0 <= v < net.n_nodes:
                out.append(f"link {k + 1}: {label} node {v + 1} out of range")
    served = np.zeros(net.n_communities, dtype=bool)
    for r, route in enumerate(net.routes):
        if len(route) == 0:
            out.append(f"route {r + 1}: empty route")
            continue
        bad_ref = False
        for pos, k in enumerate(route):
            if not 0 <= k < net.n_links:
                out.append(f"route {r + 1}: unknown link {k + 1} at position {pos + 1}")
                bad_ref = True
        if bad_ref:
            continue
        for pos in range(1, len(route)):
            prev_head = net.links[route[pos - 1]][1]
            cur_tail = net.links[route[pos]][0]
            if prev_head != cur_tail:
                out.append(f"route {r + 1}: route not head-to-tail at position {pos + 1}")
    for r, comms in enumerate(net.route_communities):
        if len(comms) == 0:
            out.append(f"route {r + 1}: serves no community")
        for i in comms:
            if not 0 <= i < net.n_communities:
                out.append(f"route {r + 1}: unknown community {i + 1}")
            else:
                served[i] = True
    for i in np.flatnonzero(~served):
        out.append(f"community {i + 1}: served by no route")
    if len(net.route_communities) != net.n_routes:
        out.append("route_communities length does not match route count")
    if net.coordinates is not None and net.coordinates.shape != (net.n_nodes, 2):
        out.append("coordinates shape does not match node count")
    return out


def _expect(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise InputFormatError(f"{where}: {msg}")


def network_from_dict(raw: dict, where: str = "network") -> Network:
    """Parses and range-checks the JSON structure; raises InputFormatError."""
    _expect(isinstance(raw, dict), where, "top level must be an object")
    version = raw.get("format_version")
    _expect(version == FORMAT_VERSION, where,
            f"format_version must be {FORMAT_VERSION}, got {version!r}")
    nodes = raw.get("nodes")
    _expect(isinstance(nodes, dict) and isinstance(nodes.get("count"), int),
            f"{where}.nodes", "need an object with an integer 'count'")
    n_nodes = nodes["count"]
    _expect(n_nodes >= 1, f"{where}.nodes.count", "must be at least 1")

    coords = None
    if nodes.get("coordinates") is not None:
        try:
            coords = np.asarray(nodes["coordinates"], dtype=float)
        except (TypeError, ValueError):
            raise InputFormatError(f"{where}.nodes.coordinates: not numeric")
        _expect(coords.shape == (n_nodes, 2), f"{where}.nodes.coordinates",
                f"expected shape ({n_nodes}, 2), got {coords.shape}")

    links_raw = raw.get("links")
    _expect(isinstance(links_raw, list) and len(links_raw) >= 1,
            f"{where}.links", "need a non-empty list of [tail, head] pairs")
    links = np.zeros((len(links_raw), 2), dtype=int)
    for k, pair in enumerate(links_raw):
        _expect(isinstance(pair, list) and len(pair) == 2
                and all(isinstance(v, int) for v in pair),
                f"{where}.links[{k}]", "must be a pair of integers")
        _expect(all(1 <= v <= n_nodes for v in pair),
                f"{where}.links[{k}]", f"node ids must lie in [1, {n_nodes}]")
        links[k] = (pair[0] - 1, pair[1] - 1)

    routes_raw = raw.get("routes")
    _expect(isinstance(routes_raw, list) and len(routes_raw) >= 1,
            f"{where}.routes", "need a non-empty list of link-id lists")
    routes = []
    for r, seq in enumerate(routes_raw):
        _expect(isinstance(seq, list) and len(seq) >= 1
                and all(isinstance(v, int) for v in seq),
                f"{where}.routes[{r}]", "must be a non-empty list of integers")
        _expect(all(1 <= v <= len(links) for v in seq),
                f"{where}.routes[{r}]", f"link ids must lie in [1, {len(links)}]")
        routes.append(np.array([v - 1 for v in seq], dtype=int))

    n_comm = raw.get("communities")
    _expect(isinstance(n_comm, int) and n_comm >= 1,
            f"{where}.communities", "must be a positive integer")

    rc_raw = raw.get("route_communities")
    _expect(isinstance(rc_raw, list) and len(rc_raw) == len(routes),
            f"{where}.route_communities", f"need one list per route ({len(routes)})")
    route_comms = []
    for r, seq in enumerate(rc_raw):
        _expect(isinstance(seq, list) and all(isinstance(v, int) for v in seq),
                f"{where}.route_communities[{r}]", "must be a list of integers")
        _expect(all(1 <= v <= n_comm for v in seq),
                f"{where}.route_communities[{r}]",
                f"community ids must lie in [1, {n_comm}]")
        route_comms.append(np.array([v - 1 for v in seq], dtype=int))

    return Network(n_nodes=n_nodes, links=links, routes=routes,
                   n_communities=n_comm, route_communities=route_comms,
                   coordinates=coords)


def network_to_dict(net: Network, provenance: Optional[dict] = None) -> dict:
    nodes: dict = {"count": int(net.n_nodes)}
    if net.coordinates is not None:
        nodes["coordinates"] = [[float(a), float(b)] for a, b in net.coordinates]
    out = {
        "format_version": FORMAT_VERSION,
        "nodes": nodes,
        "links": [[int(t) + 1, int(h) + 1] for t, h in net.links],
        "routes": [[int(k) + 1 for k in route] for route in net.routes],
        "communities": int(net.n_communities),
        "route_communities": [[int(i) + 1 for i in c] for c in net.route_communities],
    }
    if provenance is not None:
        out["provenance"] = provenance
    return out


def load_network(path) -> Network:
    """Loads a network file; format problems raise InputFormatError with the
    file name and, for syntax errors, the line/column of the failure."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return network_from_dict(raw, where=str(path))


def save_network(net: Network, path, provenance: Optional[dict] = None) -> None:
    payload = network_to_dict(net, provenance)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
