"""Graph metrics and community detection, written as node attributes.

Betweenness uses Brandes' dependency accumulation over single-source
shortest paths (BFS unweighted, Dijkstra weighted). Closeness uses the
reachable-set variant (reachable-1)/sum(d) so disconnected graphs stay
finite; eccentricity is the maximum finite distance (null for nodes with
no reachable peers). Louvain runs with a fixed node visitation order
(node array order) so results are deterministic for a given network.
"""

from __future__ import annotations

import heapq
from collections import deque
from typing import Mapping

from .errors import NetworkError
from .network import Link, Network, Node

METRICS = ("degree", "inDegree", "outDegree", "betweenness", "closeness", "eccentricity")


def _edge_weight(link: Link, weight_field: str | None) -> float:
    if weight_field is None:
        return 1.0
    w = link.attributes.get(weight_field)
    if w is None or isinstance(w, bool) or not isinstance(w, (int, float)):
        raise NetworkError(f"weight field {weight_field!r} missing or non-numeric on link {link.id!r}")
    if w <= 0:
        raise NetworkError(f"weight field {weight_field!r} must be positive (link {link.id!r} has {w})")
    return float(w)


def _traversal_adjacency(network: Network, weight_field: str | None):
    """Per-node out-neighbor list [(neighbor index, weight)], honoring
    direction. Self-loops are skipped: they never lie on a shortest path."""
    index = {n.id: i for i, n in enumerate(network.nodes)}
    adj: list[list[tuple[int, float]]] = [[] for _ in network.nodes]
    for link in network.links:
        if link.source == link.target:
            continue
        w = _edge_weight(link, weight_field)
        s, t = index[link.source], index[link.target]
        adj[s].append((t, w))
        if not network.directed:
            adj[t].append((s, w))
    return adj


def _single_source(adj, source: int, weighted: bool):
    """Shortest-path tree from `source`: returns (visit order, distance,
    path counts sigma, predecessor lists)."""
    n = len(adj)
    dist = [float("inf")] * n
    sigma = [0.0] * n
    preds: list[list[int]] = [[] for _ in range(n)]
    order: list[int] = []
    dist[source] = 0.0
    sigma[source] = 1.0

    if not weighted:
        queue = deque([source])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w, _ in adj[v]:
                if dist[w] == float("inf"):
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        return order, dist, sigma, preds

    heap = [(0.0, source, source)]
    seen = [False] * n
    while heap:
        d, _, v = heapq.heappop(heap)
        if seen[v]:
            continue
        seen[v] = True
        order.append(v)
        for w, weight in adj[v]:
            nd = d + weight
            if nd < dist[w] - 1e-12:
                dist[w] = nd
                sigma[w] = sigma[v]
                preds[w] = [v]
                heapq.heappush(heap, (nd, w, w))
            elif abs(nd - dist[w]) <= 1e-12 and not seen[w]:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, dist, sigma, preds


def compute_metric(network: Network, spec: Mapping) -> Network:
    """Write one metric as a node attribute on every node."""
    metric = spec.get("metric")
    if metric not in METRICS:
        raise NetworkError(f"unknown metric {metric!r}")
    output = spec.get("output", metric)
    normalized = bool(spec.get("normalized", False))
    weight_field = spec.get("weightField")

    if metric in ("inDegree", "outDegree") and not network.directed:
        raise NetworkError(f"{metric} requires a directed network")

    n = len(network.nodes)
    values: list[float | None]
    if metric == "degree":
        counts = {node.id: 0 for node in network.nodes}
        for link in network.links:
            counts[link.source] += 1
            counts[link.target] += 1  # self-loop counts twice
        values = [counts[node.id] for node in network.nodes]
    elif metric == "inDegree":
        counts = {node.id: 0 for node in network.nodes}
        for link in network.links:
            counts[link.target] += 1
        values = [counts[node.id] for node in network.nodes]
    elif metric == "outDegree":
        counts = {node.id: 0 for node in network.nodes}
        for link in network.links:
            counts[link.source] += 1
        values = [counts[node.id] for node in network.nodes]
    elif metric == "betweenness":
        values = _betweenness(network, weight_field)
        if normalized and n > 2:
            scale = (n - 1) * (n - 2) if network.directed else (n - 1) * (n - 2) / 2
            values = [v / scale for v in values]
    elif metric == "closeness":
        adj = _traversal_adjacency(network, weight_field)
        weighted = weight_field is not None
        values = []
        for i in range(n):
            _, dist, _, _ = _single_source(adj, i, weighted)
            reachable = [d for d in dist if d != float("inf")]
            if len(reachable) <= 1:
                values.append(0.0)
                continue
            c = (len(reachable) - 1) / sum(reachable)
            if normalized and n > 1:
                c *= (len(reachable) - 1) / (n - 1)
            values.append(c)
    else:  # eccentricity
        adj = _traversal_adjacency(network, weight_field)
        weighted = weight_field is not None
        values = []
        for i in range(n):
            _, dist, _, _ = _single_source(adj, i, weighted)
            finite = [d for j, d in enumerate(dist) if j != i and d != float("inf")]
            values.append(max(finite) if finite else None)

    nodes = [
        Node(node.id, {**node.attributes, output: value})
        for node, value in zip(network.nodes, values)
    ]
    links = [Link(l.id, l.source, l.target, dict(l.attributes)) for l in network.links]
    return network.replaced(nodes=nodes, links=links)


def _betweenness(network: Network, weight_field: str | None) -> list[float]:
    adj = _traversal_adjacency(network, weight_field)
    weighted = weight_field is not None
    n = len(adj)
    centrality = [0.0] * n
    for s in range(n):
        order, _, sigma, preds = _single_source(adj, s, weighted)
        delta = [0.0] * n
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += (sigma[v] / sigma[w]) * (1 + delta[w])
            if w != s:
                centrality[w] += delta[w]
    if not network.directed:
        centrality = [c / 2 for c in centrality]
    return centrality


# --- Louvain community detection -----------------------------------------

_GAIN_EPS = 1e-9


def _weighted_undirected(network: Network, weight_field: str | None):
    """Symmetric weighted adjacency: {node index: {neighbor index: weight}}
    with parallel links summed. Directed networks are symmetrized.
    Self-loop weight is stored once under the node's own key."""
    index = {n.id: i for i, n in enumerate(network.nodes)}
    adj: list[dict[int, float]] = [{} for _ in network.nodes]
    for link in network.links:
        w = _edge_weight(link, weight_field)
        s, t = index[link.source], index[link.target]
        adj[s][t] = adj[s].get(t, 0.0) + w
        if s != t:
            adj[t][s] = adj[t].get(s, 0.0) + w
    return adj


def modularity(adj: list[dict[int, float]], assignment: list[int]) -> float:
    """Newman modularity Q of a partition over a symmetric weighted
    adjacency (self-loop weight stored once in adj, counted twice in
    degree; A_ii = 2w by the usual convention)."""
    degree = [sum(nbrs.values()) + nbrs.get(i, 0.0) for i, nbrs in enumerate(adj)]
    m2 = sum(degree)
    if m2 == 0:
        return 0.0
    internal = 0.0  # sum of A_ij over ordered same-community pairs
    for i, nbrs in enumerate(adj):
        for j, w in nbrs.items():
            if assignment[i] == assignment[j]:
                internal += 2.0 * w if i == j else w
    comm_degree: dict[int, float] = {}
    for i, d in enumerate(degree):
        comm_degree[assignment[i]] = comm_degree.get(assignment[i], 0.0) + d
    expected = sum(d * d for d in comm_degree.values())
    return internal / m2 - expected / (m2 * m2)


def network_modularity(network: Network, assignment_field: str,
                       weight_field: str | None = None) -> float:
    """Recompute Q directly from a node attribute holding community ids."""
    adj = _weighted_undirected(network, weight_field)
    labels: dict = {}
    assignment = []
    for node in network.nodes:
        key = node.attributes.get(assignment_field)
        assignment.append(labels.setdefault(key, len(labels)))
    return modularity(adj, assignment)


def louvain_partition(network: Network, weight_field: str | None = None,
                      seed: int = 0) -> tuple[list[int], float]:
    """Louvain modularity maximization. Returns (community id per node in
    node array order, renumbered 0-based by first appearance; Q of the
    partition). `seed` is accepted for interface stability; the
    implementation is fully deterministic and never draws from it."""
    base_adj = _weighted_undirected(network, weight_field)
    n = len(base_adj)
    if n == 0:
        return [], 0.0

    mapping = list(range(n))  # original node -> current community label
    adj = base_adj

    while True:
        assignment = _one_level(adj)
        n_comms = len(set(assignment))
        if n_comms == len(adj):
            break  # no merge happened at this level
        mapping = [assignment[c] for c in mapping]
        adj = _aggregate(adj, assignment, n_comms)

    relabel: dict[int, int] = {}
    final = []
    for c in mapping:
        final.append(relabel.setdefault(c, len(relabel)))
    return final, modularity(base_adj, final)


def _one_level(adj: list[dict[int, float]]) -> list[int]:
    """One local-moving phase; returns dense community labels."""
    n = len(adj)
    degree = [sum(nbrs.values()) + nbrs.get(i, 0.0) for i, nbrs in enumerate(adj)]
    m2 = sum(degree)
    if m2 == 0:
        return list(range(n))
    community = list(range(n))
    comm_total = degree[:]  # sum of degrees per community

    moved = True
    while moved:
        moved = False
        for i in range(n):
            ci = community[i]
            ki = degree[i]
            # weights from i to each neighboring community (self-loops excluded)
            to_comm: dict[int, float] = {}
            for j, w in adj[i].items():
                if j != i:
                    to_comm[community[j]] = to_comm.get(community[j], 0.0) + w
            comm_total[ci] -= ki
            base = to_comm.get(ci, 0.0) - comm_total[ci] * ki / m2
            best_comm, best_gain = ci, 0.0
            for cj in sorted(to_comm):
                if cj == ci:
                    continue
                gain = (to_comm[cj] - comm_total[cj] * ki / m2) - base
                if gain > best_gain + _GAIN_EPS:
                    best_comm, best_gain = cj, gain
            comm_total[best_comm] += ki
            if best_comm != ci:
                community[i] = best_comm
                moved = True

    dense: dict[int, int] = {}
    return [dense.setdefault(c, len(dense)) for c in community]


def _aggregate(adj: list[dict[int, float]], assignment: list[int], n_comms: int):
    """Collapse communities into super-nodes. Internal edges (and member
    self-loops) become a self-loop stored once; cross weights accumulate
    symmetrically (each direction sees each unordered pair once)."""
    new_adj: list[dict[int, float]] = [{} for _ in range(n_comms)]
    for i, nbrs in enumerate(adj):
        ci = assignment[i]
        for j, w in nbrs.items():
            cj = assignment[j]
            if i == j:
                new_adj[ci][ci] = new_adj[ci].get(ci, 0.0) + w
            elif ci == cj:
                if i < j:
                    new_adj[ci][ci] = new_adj[ci].get(ci, 0.0) + w
            else:
                new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
    return new_adj


def compute_clustering(network: Network, output: str = "cluster",
                       weight_field: str | None = None, seed: int = 0) -> Network:
    """Louvain clustering written as an integer node attribute."""
    assignment, _ = louvain_partition(network, weight_field, seed)
    nodes = [
        Node(node.id, {**node.attributes, output: c})
        for node, c in zip(network.nodes, assignment)
    ]
    links = [Link(l.id, l.source, l.target, dict(l.attributes)) for l in network.links]
    return network.replaced(nodes=nodes, links=links)
