"""Orderings: attribute sorts and matrix seriation.

An ordering is a dense map id -> ordinal. Seriation works on the
symmetrized adjacency structure of a network; the four methods are
reverse Cuthill-McKee (bandwidth-reduction), iterative barycentre
averaging, a PCA projection of adjacency rows (seeded power iteration),
and average-linkage clustering with Bar-Joseph optimal leaf ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage, optimal_leaf_ordering
from scipy.spatial.distance import squareform

from .errors import ExprEvalError, OrderingError, Warnings
from .expr import EvalScope, eval_expression, parse_expression
from .network import Network

SERIATION_METHODS = ("optimal-leaf-order", "barycentre", "bandwidth-reduction", "pca")
DISTANCES = ("euclidean", "manhattan", "minkowski", "chebyshev", "hamming", "jaccard", "braycurtis")


@dataclass
class Ordering:
    name: str
    map: dict[str, int]

    def ordinal(self, element_id: str) -> int:
        try:
            return self.map[element_id]
        except KeyError:
            raise OrderingError(f"ordering {self.name!r} does not cover id {element_id!r}") from None

    def size(self) -> int:
        return max(self.map.values()) + 1 if self.map else 0

    def ids_in_order(self) -> list[str]:
        return [i for i, _ in sorted(self.map.items(), key=lambda kv: (kv[1], kv[0]))]


# --- Attribute sort -------------------------------------------------------


def compute_sort_ordering(
    spec: Mapping,
    elements: list[tuple[str, dict]],
    warnings: Warnings,
    parameters: Mapping | None = None,
) -> Ordering:
    """Stable sort by a field or expression. Ties resolve by id unless
    allowTies, in which case tied elements share their tie-class rank."""
    name = spec["name"]
    order_by = spec["orderBy"]
    parameters = parameters or {}

    keys: list[tuple[str, Any]] = []
    for element_id, record in elements:
        if isinstance(order_by, Mapping) and "expression" in order_by:
            expr = parse_expression(order_by["expression"])
            try:
                key = eval_expression(expr, EvalScope(datum=record, parameters=parameters))
            except ExprEvalError as e:
                raise OrderingError(f"ordering {name!r}: {e}") from None
        else:
            if order_by not in record:
                raise OrderingError(f"ordering {name!r}: field {order_by!r} missing on id {element_id!r}")
            key = record[order_by]
        if key is None:
            raise OrderingError(f"ordering {name!r}: null sort key on id {element_id!r}")
        keys.append((element_id, key))

    kinds = {("number" if isinstance(k, (int, float)) and not isinstance(k, bool) else type(k).__name__)
             for _, k in keys}
    if len(kinds) > 1:
        raise OrderingError(f"ordering {name!r}: mixed sort key types {sorted(kinds)}")

    descending = spec.get("direction", "asc") == "desc"
    ranked = sorted(keys, key=lambda kv: kv[0])  # id tiebreak first
    ranked.sort(key=lambda kv: kv[1], reverse=descending)  # stable

    mapping: dict[str, int] = {}
    if spec.get("allowTies", False):
        ordinal = -1
        previous: Any = object()
        for element_id, key in ranked:
            if key != previous:
                ordinal += 1
                previous = key
            mapping[element_id] = ordinal
    else:
        for ordinal, (element_id, _) in enumerate(ranked):
            mapping[element_id] = ordinal
    return Ordering(name, mapping)


# --- Distance matrices -----------------------------------------------------


def adjacency_matrix(network: Network, weight_field: str | None = None) -> np.ndarray:
    """Symmetrized dense adjacency; parallel links sum their weights."""
    index = {n.id: i for i, n in enumerate(network.nodes)}
    n = len(network.nodes)
    matrix = np.zeros((n, n))
    for link in network.links:
        w = 1.0
        if weight_field is not None:
            value = link.attributes.get(weight_field)
            if value is None or isinstance(value, bool) or not isinstance(value, (int, float)):
                raise OrderingError(f"weight field {weight_field!r} missing or non-numeric on link {link.id!r}")
            w = float(value)
        s, t = index[link.source], index[link.target]
        matrix[s, t] += w
        if s != t:
            matrix[t, s] += w
    return matrix


def distance_matrix(rows: np.ndarray, distance: str, p: float = 3.0) -> np.ndarray:
    """Pairwise distances between row vectors under a named metric."""
    if distance not in DISTANCES:
        raise OrderingError(f"unknown distance {distance!r}")
    n = rows.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        diff = np.abs(rows - rows[i])
        if distance == "euclidean":
            d = np.sqrt((diff ** 2).sum(axis=1))
        elif distance == "manhattan":
            d = diff.sum(axis=1)
        elif distance == "minkowski":
            d = (diff ** p).sum(axis=1) ** (1.0 / p)
        elif distance == "chebyshev":
            d = diff.max(axis=1) if rows.shape[1] else np.zeros(n)
        elif distance == "hamming":
            d = (rows != rows[i]).sum(axis=1).astype(float)
        elif distance == "jaccard":
            a = rows[i] != 0
            b = rows != 0
            union = (a | b).sum(axis=1)
            inter = (a & b).sum(axis=1)
            with np.errstate(invalid="ignore"):
                d = np.where(union > 0, 1.0 - inter / np.maximum(union, 1), 0.0)
        else:  # braycurtis
            denom = (np.abs(rows) + np.abs(rows[i])).sum(axis=1)
            d = np.where(denom > 0, diff.sum(axis=1) / np.maximum(denom, 1e-300), 0.0)
        out[i] = d
    np.fill_diagonal(out, 0.0)
    return (out + out.T) / 2.0  # enforce exact symmetry


# --- Seriation --------------------------------------------------------------


def compute_seriation(spec: Mapping, network: Network, warnings: Warnings) -> Ordering:
    name = spec["name"]
    method = spec["method"]
    if method not in SERIATION_METHODS:
        raise OrderingError(f"ordering {name!r}: unknown seriation method {method!r}")
    ids = [n.id for n in network.nodes]
    if not ids:
        raise OrderingError(f"ordering {name!r}: network {network.name!r} is empty")
    distance = spec.get("distance", "euclidean")
    weight_field = spec.get("weightField")

    if method in ("barycentre", "bandwidth-reduction") and "distance" in spec:
        warnings.warn(f"ordering {name!r}: distance is ignored by method {method!r}")

    if method == "bandwidth-reduction":
        order = reverse_cuthill_mckee(network)
    elif method == "barycentre":
        order = barycentre_order(network)
    elif method == "pca":
        adjacency = adjacency_matrix(network, weight_field)
        order = [ids[i] for i in pca_order(adjacency, seed=spec.get("seed", 0))]
        # tie direction to ids so relabeled-but-isomorphic inputs stay comparable
    else:  # optimal-leaf-order
        adjacency = adjacency_matrix(network, weight_field)
        dist = distance_matrix(adjacency, distance, p=spec.get("p", 3.0))
        order = [ids[i] for i in optimal_leaf_order(dist)]
    return Ordering(name, {element_id: i for i, element_id in enumerate(order)})


def bandwidth(order_map: Mapping[str, int], network: Network) -> int:
    """max |ord(u) - ord(v)| over links; the quantity RCM minimizes."""
    best = 0
    for link in network.links:
        if link.source == link.target:
            continue
        best = max(best, abs(order_map[link.source] - order_map[link.target]))
    return best


def reverse_cuthill_mckee(network: Network) -> list[str]:
    """RCM on the undirected view. Start node: minimum degree, ties by id;
    neighbors visited in (degree, id) order; final order reversed."""
    degree = {n.id: 0 for n in network.nodes}
    neighbors: dict[str, list[str]] = {n.id: [] for n in network.nodes}
    for link in network.links:
        if link.source == link.target:
            continue
        neighbors[link.source].append(link.target)
        neighbors[link.target].append(link.source)
        degree[link.source] += 1
        degree[link.target] += 1

    visited: set[str] = set()
    order: list[str] = []
    remaining = sorted(degree, key=lambda i: (degree[i], i))
    for start in remaining:
        if start in visited:
            continue
        queue = [start]
        visited.add(start)
        while queue:
            node = queue.pop(0)
            order.append(node)
            nxt = sorted(
                (v for v in neighbors[node] if v not in visited),
                key=lambda i: (degree[i], i),
            )
            for v in nxt:
                visited.add(v)
                queue.append(v)
    order.reverse()
    return order


_BARYCENTRE_SWEEPS = 100


def barycentre_order(network: Network) -> list[str]:
    """Repeatedly re-rank nodes by the mean ordinal of their neighbors
    until a sweep changes nothing (or the sweep budget runs out)."""
    ids = [n.id for n in network.nodes]
    neighbors: dict[str, list[str]] = {i: [] for i in ids}
    for link in network.links:
        if link.source == link.target:
            continue
        neighbors[link.source].append(link.target)
        neighbors[link.target].append(link.source)

    ordinal = {element_id: i for i, element_id in enumerate(sorted(ids))}
    for _ in range(_BARYCENTRE_SWEEPS):
        centers = {}
        for element_id in ids:
            nbrs = neighbors[element_id]
            if nbrs:
                centers[element_id] = sum(ordinal[v] for v in nbrs) / len(nbrs)
            else:
                centers[element_id] = float(ordinal[element_id])
        ranked = sorted(ids, key=lambda i: (centers[i], i))
        new_ordinal = {element_id: i for i, element_id in enumerate(ranked)}
        if new_ordinal == ordinal:
            break
        ordinal = new_ordinal
    return sorted(ids, key=lambda i: ordinal[i])


_POWER_ITERATIONS = 200
_POWER_TOL = 1e-10


def pca_order(adjacency: np.ndarray, seed: int = 0) -> list[int]:
    """Order rows by their projection onto the first principal component
    of the (column-centered) adjacency, via seeded power iteration."""
    n = adjacency.shape[0]
    if n == 1:
        return [0]
    centered = adjacency - adjacency.mean(axis=0, keepdims=True)
    cov = centered.T @ centered
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(n)
    norm = np.linalg.norm(v)
    v = v / norm if norm > 0 else np.ones(n) / np.sqrt(n)
    for _ in range(_POWER_ITERATIONS):
        nxt = cov @ v
        norm = np.linalg.norm(nxt)
        if norm < 1e-300:
            break  # zero matrix: any direction works
        nxt = nxt / norm
        if np.linalg.norm(nxt - v) < _POWER_TOL:
            v = nxt
            break
        v = nxt
    scores = centered @ v
    # canonical orientation: first nonzero score positive
    for s in scores:
        if abs(s) > 1e-12:
            if s < 0:
                scores = -scores
            break
    return sorted(range(n), key=lambda i: (scores[i], i))


def optimal_leaf_order(dist: np.ndarray) -> list[int]:
    """UPGMA dendrogram + Bar-Joseph leaf ordering on a full distance
    matrix; returns row indices in optimized leaf order."""
    n = dist.shape[0]
    if n <= 2:
        return list(range(n))
    condensed = squareform(dist, checks=False)
    z = linkage(condensed, method="average")
    z_opt = optimal_leaf_ordering(z, condensed)
    return [int(i) for i in leaves_list(z_opt)]


def dendrogram_order(dist: np.ndarray) -> list[int]:
    """Unoptimized UPGMA leaf order (baseline for the OLO objective)."""
    n = dist.shape[0]
    if n <= 2:
        return list(range(n))
    condensed = squareform(dist, checks=False)
    return [int(i) for i in leaves_list(linkage(condensed, method="average"))]


def leaf_order_objective(order: list[int], dist: np.ndarray) -> float:
    """Sum of distances between adjacent leaves."""
    return float(sum(dist[order[i], order[i + 1]] for i in range(len(order) - 1)))
