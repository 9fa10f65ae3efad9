"""Network construction from tables/graph documents, network transforms,
and groupings.

Networks are value objects: every transform returns a new Network with a
freshly built adjacency index, so re-evaluation never sees stale state.
Node ids are coerced to strings at construction time so that endpoint
values coming from different tables (e.g. 1 vs "1") always match; link
records expose canonical `source`/`target` fields holding those ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .dataio import DataTable
from .errors import ExprEvalError, NetworkError, Warnings
from .expr import EvalScope, eval_expression, parse_expression
from .graphformats import GraphDocument

UNSUPPORTED_TRANSFORMS = frozenset(
    {"connect", "swapNodesAndEdges", "promote", "connectivityBasedAttribute"}
)


@dataclass
class Node:
    id: str
    attributes: dict[str, Any] = field(default_factory=dict)

    def record(self) -> dict:
        return {"id": self.id, **self.attributes}


@dataclass
class Link:
    id: str
    source: str
    target: str
    attributes: dict[str, Any] = field(default_factory=dict)

    def record(self) -> dict:
        return {"id": self.id, "source": self.source, "target": self.target,
                **{k: v for k, v in self.attributes.items() if k not in ("id", "source", "target")}}


@dataclass
class Network:
    name: str
    directed: bool
    nodes: list[Node]
    links: list[Link]
    adjacency: dict[str, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.adjacency:
            self.adjacency = build_adjacency(self.nodes, self.links)

    def node_by_id(self, node_id: str) -> Node:
        try:
            return self._node_index[node_id]
        except AttributeError:
            self._node_index = {n.id: n for n in self.nodes}
            return self._node_index[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self.adjacency

    def neighbors(self, node_id: str) -> list[str]:
        """Adjacent node ids (union of in/out for directed), deduplicated,
        in incident-link order."""
        seen: dict[str, None] = {}
        for li in self.adjacency.get(node_id, []):
            link = self.links[li]
            other = link.target if link.source == node_id else link.source
            if other != node_id:
                seen.setdefault(other, None)
        return list(seen)

    def incident_links(self, node_id: str) -> list[Link]:
        return [self.links[i] for i in self.adjacency.get(node_id, [])]

    def replaced(self, nodes: list[Node] | None = None, links: list[Link] | None = None,
                 directed: bool | None = None) -> "Network":
        return Network(
            self.name,
            self.directed if directed is None else directed,
            self.nodes if nodes is None else nodes,
            self.links if links is None else links,
        )


def build_adjacency(nodes: list[Node], links: list[Link]) -> dict[str, list[int]]:
    adjacency: dict[str, list[int]] = {n.id: [] for n in nodes}
    for i, link in enumerate(links):
        for endpoint in (link.source, link.target):
            if endpoint not in adjacency:
                raise NetworkError(f"link {link.id!r} references missing node {endpoint!r}")
        adjacency[link.source].append(i)
        if link.target != link.source:
            adjacency[link.target].append(i)
    return adjacency


def _id_str(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


# --- Construction -------------------------------------------------------


def construct_network(
    schema: Mapping,
    sources: Mapping[str, DataTable | GraphDocument],
    warnings: Warnings,
) -> Network:
    """Build a Network from its schema and the named data sources."""
    name = schema["name"]
    directed = bool(schema.get("directed", False))
    if "parts" in schema:
        raise NetworkError(f"network {name!r}: option \"parts\" is unsupported")

    if "data" in schema:  # graph-format source (GraphML / Pajek)
        doc = _get_source(sources, schema["data"], name)
        if not isinstance(doc, GraphDocument):
            raise NetworkError(
                f"network {name!r}: source {schema['data']!r} is a table, not a graph document"
            )
        return _from_graphdoc(name, doc, schema, warnings)

    if "yieldNodes" in schema or "yieldLinks" in schema:
        return _from_yields(name, directed, schema, sources, warnings)

    if "links" not in schema:
        raise NetworkError(
            f"network {name!r}: needs \"links\", \"yieldLinks\", or a graph-format \"data\" source"
        )
    return _from_tables(name, directed, schema, sources, warnings)


def _get_source(sources, source_name, network_name):
    src = sources.get(source_name)
    if src is None:
        raise NetworkError(f"network {network_name!r}: unknown data source {source_name!r}")
    return src


def _require_table(src, source_name, network_name) -> DataTable:
    if isinstance(src, GraphDocument):
        raise NetworkError(
            f"network {network_name!r}: source {source_name!r} is a graph document, not a table"
        )
    return src


def _from_graphdoc(name, doc, schema, warnings) -> Network:
    directed = bool(schema.get("directed", doc.directed))
    nodes = []
    seen = set()
    for raw in doc.nodes:
        nid = _id_str(raw["id"])
        if nid in seen:
            raise NetworkError(f"network {name!r}: duplicate node id {nid!r}")
        seen.add(nid)
        nodes.append(Node(nid, {k: v for k, v in raw.items() if k != "id"}))
    links = []
    for i, raw in enumerate(doc.links):
        src, tgt = _id_str(raw["source"]), _id_str(raw["target"])
        for endpoint in (src, tgt):
            if endpoint not in seen:
                seen.add(endpoint)
                nodes.append(Node(endpoint, {}))
        attrs = {k: v for k, v in raw.items() if k not in ("source", "target")}
        attrs["source"], attrs["target"] = src, tgt
        links.append(Link(f"e{i}", src, tgt, attrs))
    return Network(name, directed, nodes, links)


def _from_tables(name, directed, schema, sources, warnings) -> Network:
    link_table = _require_table(_get_source(sources, schema["links"], name), schema["links"], name)
    source_field = schema.get("source_node", "source")
    target_field = schema.get("target_node", "target")
    for fld in (source_field, target_field):
        if fld not in link_table.field_types:
            raise NetworkError(
                f"network {name!r}: link table {link_table.name!r} has no field {fld!r}"
            )

    nodes: list[Node] = []
    by_id: dict[str, Node] = {}

    implicit = schema.get("implicitNodes", True)

    if "nodes" in schema:
        node_table = _require_table(_get_source(sources, schema["nodes"], name), schema["nodes"], name)
        id_field = schema.get("id_field", "id")
        if id_field not in node_table.field_types:
            raise NetworkError(
                f"network {name!r}: node table {node_table.name!r} has no field {id_field!r}"
            )
        for row in node_table.rows:
            nid = _id_str(row[id_field])
            if nid in by_id:
                raise NetworkError(f"network {name!r}: duplicate node id {nid!r}")
            node = Node(nid, {k: v for k, v in row.items() if k != id_field})
            by_id[nid] = node
            nodes.append(node)

    links: list[Link] = []
    for i, row in enumerate(link_table.rows):
        endpoints = []
        for fld in (source_field, target_field):
            value = row[fld]
            if value is None:
                raise NetworkError(f"network {name!r}: link row {i} has null {fld!r}")
            nid = _id_str(value)
            if nid not in by_id:
                if "nodes" in schema and not implicit:
                    raise NetworkError(
                        f"network {name!r}: endpoint {nid!r} not found in node table "
                        f"(implicit node creation disabled)"
                    )
                node = Node(nid, {})
                by_id[nid] = node
                nodes.append(node)
            endpoints.append(nid)
        attrs = dict(row)
        attrs["source"], attrs["target"] = endpoints[0], endpoints[1]
        links.append(Link(f"e{i}", endpoints[0], endpoints[1], attrs))
    return Network(name, directed, nodes, links)


def _from_yields(name, directed, schema, sources, warnings) -> Network:
    if "id_field" in schema:
        warnings.warn(f"network {name!r}: id_field ignored because yieldNodes/yieldLinks are given")
    nodes: list[Node] = []
    by_id: dict[str, Node] = {}

    for spec in schema.get("yieldNodes", []):
        table = _require_table(_get_source(sources, spec["table"], name), spec["table"], name)
        id_field = spec.get("id_field", "id")
        if id_field not in table.field_types:
            raise NetworkError(
                f"network {name!r}: yieldNodes table {spec['table']!r} has no field {id_field!r}"
            )
        data_fields = spec.get("data", [])
        node_type = spec.get("type")
        for row in table.rows:
            nid = _id_str(row[id_field])
            attrs = {f: row.get(f) for f in data_fields}
            if node_type is not None:
                attrs["type"] = node_type
            existing = by_id.get(nid)
            if existing is not None:
                for k, v in attrs.items():
                    if k in existing.attributes and existing.attributes[k] != v:
                        raise NetworkError(
                            f"network {name!r}: node {nid!r} yielded twice with "
                            f"conflicting attribute {k!r}"
                        )
                    existing.attributes[k] = v
            else:
                node = Node(nid, attrs)
                by_id[nid] = node
                nodes.append(node)

    links: list[Link] = []
    counter = 0
    for spec in schema.get("yieldLinks", []):
        table = _require_table(_get_source(sources, spec["table"], name), spec["table"], name)
        src_field = spec.get("source_node_id", spec.get("source_node", "source"))
        tgt_field = spec.get("target_node_id", spec.get("target_node", "target"))
        for fld in (src_field, tgt_field):
            if fld not in table.field_types:
                raise NetworkError(
                    f"network {name!r}: yieldLinks table {spec['table']!r} has no field {fld!r}"
                )
        data_fields = spec.get("data")
        for row in table.rows:
            src, tgt = _id_str(row[src_field]), _id_str(row[tgt_field])
            for nid, ntype in ((src, spec.get("source_node_type")), (tgt, spec.get("target_node_type"))):
                if nid not in by_id:
                    attrs = {"type": ntype} if ntype is not None else {}
                    node = Node(nid, attrs)
                    by_id[nid] = node
                    nodes.append(node)
            if data_fields is None:
                attrs = {k: v for k, v in row.items() if k not in (src_field, tgt_field)}
            else:
                attrs = {f: row.get(f) for f in data_fields}
            attrs["source"], attrs["target"] = src, tgt
            links.append(Link(f"e{counter}", src, tgt, attrs))
            counter += 1
    return Network(name, directed, nodes, links)


# --- Transforms ----------------------------------------------------------

NEIGHBOR_FUNCTIONS = frozenset({"neighborMean", "neighborSum"})


def apply_network_transform(
    network: Network,
    step: Mapping,
    warnings: Warnings,
    parameters: Mapping | None = None,
) -> Network:
    kind = step.get("type")
    if kind in UNSUPPORTED_TRANSFORMS:
        raise NetworkError(f"network transform {kind!r} is unsupported")
    handler = _NETWORK_TRANSFORMS.get(kind)
    if handler is None:
        raise NetworkError(f"unknown network transform {kind!r}")
    return handler(network, step, warnings, parameters or {})


def _nt_filter_nodes(network, step, warnings, parameters):
    expr = parse_expression(step["expression"])
    kept_nodes = []
    kept_ids = set()
    for node in network.nodes:
        try:
            keep = eval_expression(expr, EvalScope(datum=node.record(), parameters=parameters))
        except ExprEvalError as e:
            raise NetworkError(f"filterNodes: {e}") from None
        if not isinstance(keep, bool):
            raise NetworkError("filterNodes: expression must evaluate to a boolean")
        if keep:
            kept_nodes.append(Node(node.id, dict(node.attributes)))
            kept_ids.add(node.id)
    kept_links = [
        Link(l.id, l.source, l.target, dict(l.attributes))
        for l in network.links
        if l.source in kept_ids and l.target in kept_ids
    ]
    return network.replaced(nodes=kept_nodes, links=kept_links)


def _nt_filter_edges(network, step, warnings, parameters):
    expr = parse_expression(step["expression"])
    kept = []
    for link in network.links:
        try:
            keep = eval_expression(expr, EvalScope(datum=link.record(), parameters=parameters))
        except ExprEvalError as e:
            raise NetworkError(f"filterEdges: {e}") from None
        if not isinstance(keep, bool):
            raise NetworkError("filterEdges: expression must evaluate to a boolean")
        if keep:
            kept.append(Link(link.id, link.source, link.target, dict(link.attributes)))
    return network.replaced(nodes=[Node(n.id, dict(n.attributes)) for n in network.nodes], links=kept)


def _nt_remove_isolated(network, step, warnings, parameters):
    kept = [
        Node(n.id, dict(n.attributes))
        for n in network.nodes
        if network.adjacency.get(n.id)
    ]
    links = [Link(l.id, l.source, l.target, dict(l.attributes)) for l in network.links]
    return network.replaced(nodes=kept, links=links)


def _neighbor_funcs(network: Network, node_id: str) -> dict[str, Callable]:
    def _values(fld: str) -> list[float]:
        values = []
        for other_id in network.neighbors(node_id):
            v = network.node_by_id(other_id).attributes.get(fld)
            if v is None:
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ExprEvalError(f"neighbor aggregate: non-numeric field {fld!r}")
            values.append(v)
        return values

    def neighbor_mean(fld):
        values = _values(fld)
        return sum(values) / len(values) if values else None

    def neighbor_sum(fld):
        return sum(_values(fld))

    return {"neighborMean": neighbor_mean, "neighborSum": neighbor_sum}


def _nt_calculate(network, step, warnings, parameters):
    target = step.get("target", "nodes")
    output = step.get("output")
    if not output:
        raise NetworkError("network calculate: missing \"output\"")
    if target == "nodes":
        expr = parse_expression(step["expression"], extra_functions=NEIGHBOR_FUNCTIONS)
        nodes = []
        for node in network.nodes:
            scope = EvalScope(
                datum=node.record(), parameters=parameters,
                functions=_neighbor_funcs(network, node.id),
            )
            try:
                value = eval_expression(expr, scope)
            except ExprEvalError as e:
                raise NetworkError(f"calculate {output!r}: {e}") from None
            nodes.append(Node(node.id, {**node.attributes, output: value}))
        links = [Link(l.id, l.source, l.target, dict(l.attributes)) for l in network.links]
        return network.replaced(nodes=nodes, links=links)
    if target == "links":
        expr = parse_expression(step["expression"])
        links = []
        for link in network.links:
            try:
                value = eval_expression(expr, EvalScope(datum=link.record(), parameters=parameters))
            except ExprEvalError as e:
                raise NetworkError(f"calculate {output!r}: {e}") from None
            links.append(Link(link.id, link.source, link.target, {**link.attributes, output: value}))
        return network.replaced(nodes=[Node(n.id, dict(n.attributes)) for n in network.nodes], links=links)
    raise NetworkError(f"network calculate: unknown target {target!r}")


def _nt_metric(network, step, warnings, parameters):
    from . import analysis

    return analysis.compute_metric(network, step)


def _nt_cluster(network, step, warnings, parameters):
    from . import analysis

    return analysis.compute_clustering(
        network,
        output=step.get("output", "cluster"),
        weight_field=step.get("weightField"),
        seed=step.get("seed", 0),
    )


_REDUCERS = ("sum", "mean", "count", "first", "min", "max")


def _reduce_values(op: str, values: list):
    numeric = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)]
    if op == "count":
        return len(values)
    if op == "first":
        return values[0] if values else None
    if any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in values if v is not None):
        raise NetworkError(f"reducer {op!r} applied to non-numeric values")
    if not numeric:
        return None
    if op == "sum":
        return sum(numeric)
    if op == "mean":
        return sum(numeric) / len(numeric)
    if op == "min":
        return min(numeric)
    if op == "max":
        return max(numeric)
    raise NetworkError(f"unknown reducer {op!r}")


def _nt_project(network, step, warnings, parameters):
    removed_type = step.get("removedNodeType")
    remaining_type = step.get("remainingNodeType")
    if removed_type is None or remaining_type is None:
        raise NetworkError("project: removedNodeType and remainingNodeType are required")
    type_field = step.get("typeField", "type")
    reducer = step.get("linkDataReducer", "count")
    if reducer not in _REDUCERS:
        raise NetworkError(f"project: unknown linkDataReducer {reducer!r}")

    def node_type(nid):
        return network.node_by_id(nid).attributes.get(type_field)

    kept_nodes = [
        Node(n.id, dict(n.attributes))
        for n in network.nodes
        if n.attributes.get(type_field) != removed_type
    ]
    kept_ids = {n.id for n in kept_nodes}
    kept_links = [
        Link(l.id, l.source, l.target, dict(l.attributes))
        for l in network.links
        if l.source in kept_ids and l.target in kept_ids
    ]

    # Pairs of 2-paths through each removed node, in deterministic order.
    merged: dict[tuple[str, str], list[Link]] = {}
    for node in network.nodes:
        if node.attributes.get(type_field) != removed_type:
            continue
        incident = [network.links[i] for i in network.adjacency.get(node.id, [])]
        if network.directed:
            in_links = [l for l in incident if l.target == node.id]
            out_links = [l for l in incident if l.source == node.id]
            for a in in_links:
                for b in out_links:
                    u, w = a.source, b.target
                    if u == node.id or w == node.id:
                        continue  # self-loop on the removed node
                    if node_type(u) == remaining_type and node_type(w) == remaining_type:
                        merged.setdefault((u, w), []).extend([a, b])
        else:
            seen_pairs = []
            for ai in range(len(incident)):
                for bi in range(ai + 1, len(incident)):
                    a, b = incident[ai], incident[bi]
                    u = a.target if a.source == node.id else a.source
                    w = b.target if b.source == node.id else b.source
                    if node_type(u) != remaining_type or node_type(w) != remaining_type:
                        continue
                    key = (u, w) if u <= w else (w, u)
                    seen_pairs.append((key, a, b))
            for key, a, b in seen_pairs:
                merged.setdefault(key, []).extend([a, b])

    counter = 0
    for (u, w), constituents in merged.items():
        n_paths = len(constituents) // 2
        attrs: dict[str, Any] = {}
        if reducer == "count":
            attrs["count"] = n_paths
        elif reducer == "first":
            attrs = {k: v for k, v in constituents[0].attributes.items()
                     if k not in ("source", "target")}
        else:
            fields: dict[str, None] = {}
            for link in constituents:
                for k in link.attributes:
                    if k not in ("source", "target"):
                        fields.setdefault(k, None)
            for fld in fields:
                values = [l.attributes[fld] for l in constituents if fld in l.attributes]
                try:
                    attrs[fld] = _reduce_values(reducer, values)
                except NetworkError:
                    continue  # skip non-numeric fields under numeric reducers
        attrs["source"], attrs["target"] = u, w
        kept_links.append(Link(f"p{counter}", u, w, attrs))
        counter += 1
    return network.replaced(nodes=kept_nodes, links=kept_links)


def _group_key(element_record, step, parameters, what):
    if "expression" in step:
        expr = parse_expression(step["expression"])
        try:
            return eval_expression(expr, EvalScope(datum=element_record, parameters=parameters))
        except ExprEvalError as e:
            raise NetworkError(f"{what}: {e}") from None
    key_field = step.get("key")
    if key_field is None:
        raise NetworkError(f"{what}: needs \"key\" field or \"expression\"")
    if key_field not in element_record:
        raise NetworkError(f"{what}: unknown field {key_field!r}")
    return element_record[key_field]


def _nt_aggregate_nodes(network, step, warnings, parameters):
    reducers = step.get("reducers", [])
    groups: dict[str, dict] = {}
    node_to_meta: dict[str, str] = {}
    for node in network.nodes:
        key = _group_key(node.record(), step, parameters, "aggregateNodes")
        meta_id = "∅" if key is None else _id_str(key)
        g = groups.setdefault(meta_id, {"key": key, "members": []})
        g["members"].append(node)
        node_to_meta[node.id] = meta_id

    meta_nodes = []
    for meta_id, g in groups.items():
        attrs: dict[str, Any] = {
            "count": len(g["members"]),
            "members": [n.id for n in g["members"]],
        }
        if g["key"] is not None or "expression" in step or "key" in step:
            attrs["key"] = g["key"]
        for r in reducers:
            values = [n.attributes.get(r["field"]) for n in g["members"]]
            values = [v for v in values if v is not None]
            attrs[r.get("output", f"{r['op']}_{r['field']}")] = _reduce_values(r["op"], values)
        meta_nodes.append(Node(meta_id, attrs))

    links = []
    for link in network.links:
        src, tgt = node_to_meta[link.source], node_to_meta[link.target]
        attrs = dict(link.attributes)
        attrs["source"], attrs["target"] = src, tgt
        links.append(Link(link.id, src, tgt, attrs))
    return network.replaced(nodes=meta_nodes, links=links)


def _nt_aggregate_edges(network, step, warnings, parameters):
    reducers = step.get("reducers", [])
    merged: dict[tuple, list[Link]] = {}
    for link in network.links:
        if network.directed:
            key = (link.source, link.target)
        else:
            key = (link.source, link.target) if link.source <= link.target else (link.target, link.source)
        merged.setdefault(key, []).append(link)

    links = []
    for (u, w), members in merged.items():
        first = members[0]
        attrs: dict[str, Any] = {"count": len(members)}
        for r in reducers:
            values = [m.attributes.get(r["field"]) for m in members]
            values = [v for v in values if v is not None]
            attrs[r.get("output", f"{r['op']}_{r['field']}")] = _reduce_values(r["op"], values)
        attrs["source"], attrs["target"] = first.source, first.target
        links.append(Link(first.id, first.source, first.target, attrs))
    nodes = [Node(n.id, dict(n.attributes)) for n in network.nodes]
    return network.replaced(nodes=nodes, links=links)


def _nt_reverse_edges(network, step, warnings, parameters):
    links = []
    for link in network.links:
        attrs = dict(link.attributes)
        attrs["source"], attrs["target"] = link.target, link.source
        links.append(Link(link.id, link.target, link.source, attrs))
    nodes = [Node(n.id, dict(n.attributes)) for n in network.nodes]
    return network.replaced(nodes=nodes, links=links)


def _nt_set_directness(network, step, warnings, parameters):
    nodes = [Node(n.id, dict(n.attributes)) for n in network.nodes]
    links = [Link(l.id, l.source, l.target, dict(l.attributes)) for l in network.links]
    return network.replaced(nodes=nodes, links=links, directed=bool(step.get("directed", True)))


_NETWORK_TRANSFORMS = {
    "filterNodes": _nt_filter_nodes,
    "filterEdges": _nt_filter_edges,
    "removeIsolated": _nt_remove_isolated,
    "calculate": _nt_calculate,
    "metric": _nt_metric,
    "cluster": _nt_cluster,
    "project": _nt_project,
    "aggregateNodes": _nt_aggregate_nodes,
    "aggregateEdges": _nt_aggregate_edges,
    "reverseEdges": _nt_reverse_edges,
    "setDirectness": _nt_set_directness,
}

NETWORK_TRANSFORM_KINDS = frozenset(_NETWORK_TRANSFORMS)


# --- Groupings ------------------------------------------------------------


@dataclass
class Group:
    id: str
    key: Any
    members: list[str]  # element ids

    def record(self) -> dict:
        return {"id": self.id, "key": self.key, "count": len(self.members)}


@dataclass
class Grouping:
    name: str
    network: str
    base: str  # "nodes" | "links"
    groups: list[Group]


def compute_grouping(spec: Mapping, network: Network, warnings: Warnings,
                     parameters: Mapping | None = None) -> Grouping:
    """Partition a network's nodes or links by a key field or expression.
    Groups are ordered by first appearance; null keys collect in "∅"."""
    name = spec["name"]
    data = spec.get("data", "")
    base = data.split(".")[-1] if "." in data else data
    if base not in ("nodes", "links"):
        raise NetworkError(f"grouping {name!r}: data must end in .nodes or .links")
    elements = network.nodes if base == "nodes" else network.links
    parameters = parameters or {}

    key_step = {"key": spec.get("common"), "expression": spec.get("expression")}
    key_step = {k: v for k, v in key_step.items() if v is not None}
    if not key_step:
        raise NetworkError(f"grouping {name!r}: needs \"common\" field or \"expression\"")

    groups: dict[str, Group] = {}
    warned_null = False
    for element in elements:
        key = _group_key(element.record(), key_step, parameters, f"grouping {name!r}")
        if key is None and not warned_null:
            warnings.warn(f"grouping {name!r}: null key; elements placed in \"∅\" group")
            warned_null = True
        gid = "∅" if key is None else _id_str(key)
        group = groups.setdefault(gid, Group(gid, key, []))
        group.members.append(element.id)
    return Grouping(name, network.name, base, list(groups.values()))
