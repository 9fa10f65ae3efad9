"""Specification parsing, validation, and evaluation planning.

A specification is JSONC text holding arrays of named constructs. Because
constructs reference each other by name, declaration order carries no
meaning: resolve_dependencies() topologically sorts the reference graph
into an EvaluationPlan, with deterministic (category rank, name)
tie-breaking so the plan itself is reproducible.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from . import jsonc
from .dataio import TRANSFORM_KINDS
from .errors import DependencyError, SpecValidationError, Warnings
from .network import NETWORK_TRANSFORM_KINDS, UNSUPPORTED_TRANSFORMS

DEFAULT_CANVAS = {"width": 800, "height": 600}

#: category -> plan rank; parameters first so everything may read them.
CATEGORIES = (
    "parameters", "data", "networks", "groupings", "orderings",
    "tables", "layouts", "scales", "selections", "vis",
)

_KNOWN_FIELDS: dict[str, set[str]] = {
    "parameters": {"name", "value", "options", "min", "max", "step", "bind"},
    "data": {"name", "values", "url", "cache", "format", "transform"},
    "networks": {
        "name", "nodes", "links", "directed", "source_node", "target_node",
        "id_field", "implicitNodes", "yieldNodes", "yieldLinks", "data", "transform",
    },
    "groupings": {"name", "data", "common", "expression"},
    "orderings": {
        "name", "data", "orderBy", "direction", "allowTies",
        "method", "distance", "weightField", "seed", "p",
    },
    "tables": {
        "name", "data", "rowField", "colField", "rowOrder", "colOrder",
        "symmetric", "fullGrid", "dragToReorder", "x", "y", "width", "height",
    },
    "layouts": {
        "name", "data", "pattern", "order", "shape", "x", "y", "angle", "radius",
        "curve", "orientation", "turns", "innerRadius", "numSegments", "seed",
        "root", "base", "rule", "t", "transforms",
    },
    "scales": {"name", "type", "domain", "range", "scheme", "clamp", "padding"},
    "selections": {"name", "base", "transform", "network"},
    "vis": {
        "name", "entries", "layout", "table", "mark", "rowLabels", "colLabels",
        "drawAxes", "border", "tooltip", "selectable", "vis",
    },
}

SELECTION_TRANSFORMS = ("neighbors", "addNeighbors", "incidentLinks", "invert")


@dataclass
class SpecDocument:
    canvas: dict[str, float]
    constructs: dict[str, list[dict]]  # category -> normalized construct specs
    warnings: Warnings = field(default_factory=Warnings)

    def by_name(self, category: str) -> dict[str, dict]:
        return {c["name"]: c for c in self.constructs.get(category, [])}

    def get(self, category: str, name: str) -> dict:
        for c in self.constructs.get(category, []):
            if c["name"] == name:
                return c
        raise SpecValidationError(f"unknown {category} construct {name!r}", name)

    def normalized(self) -> dict:
        out: dict[str, Any] = {"canvasSize": dict(self.canvas)}
        for category in CATEGORIES:
            if self.constructs.get(category):
                out[category] = [dict(c) for c in self.constructs[category]]
        return out


@dataclass
class EvaluationPlan:
    steps: list[tuple[str, str]]  # (category, name) in evaluation order


def parse_spec(text: str) -> SpecDocument:
    """Parse and validate JSONC specification text."""
    raw = jsonc.loads(text)
    if not isinstance(raw, Mapping):
        raise SpecValidationError("specification must be a JSON object")
    return validate_spec(raw)


def serialize_spec(doc: SpecDocument) -> str:
    """Serialize a document back to JSON (defaults filled); reparsing
    yields a structurally equal document."""
    return json.dumps(doc.normalized(), indent=2, sort_keys=False)


def validate_spec(raw: Mapping) -> SpecDocument:
    warnings = Warnings()
    canvas = dict(DEFAULT_CANVAS)
    size = raw.get("canvasSize")
    if isinstance(size, Mapping):
        canvas["width"] = float(size.get("width", canvas["width"]))
        canvas["height"] = float(size.get("height", canvas["height"]))

    for key in raw:
        if key not in CATEGORIES and key != "canvasSize":
            warnings.warn(f"unknown top-level key {key!r}")

    constructs: dict[str, list[dict]] = {}
    for category in CATEGORIES:
        items = raw.get(category, [])
        if not isinstance(items, list):
            raise SpecValidationError(f"{category} must be an array", category)
        normalized = []
        seen_names: set[str] = set()
        for i, item in enumerate(items):
            if not isinstance(item, Mapping):
                raise SpecValidationError(f"{category}[{i}] must be an object", category)
            spec = dict(item)
            if category == "vis" and "name" not in spec:
                spec["name"] = f"vis{i}"
            name = spec.get("name")
            if not isinstance(name, str) or not name:
                raise SpecValidationError(f"{category}[{i}] missing name", category)
            if name in seen_names:
                raise SpecValidationError(f"duplicate {category} name {name!r}", name)
            seen_names.add(name)
            for key in spec:
                if key not in _KNOWN_FIELDS[category]:
                    warnings.warn(f"{category} {name!r}: unknown field {key!r}")
            _validate_construct(category, spec)
            normalized.append(spec)
        constructs[category] = normalized

    doc = SpecDocument(canvas, constructs, warnings)
    _validate_references(doc)
    return doc


def _err(category: str, name: str, message: str):
    raise SpecValidationError(f"{category} {name!r}: {message}", name)


def _validate_construct(category: str, spec: dict) -> None:
    name = spec["name"]
    if category == "data":
        sources = [k for k in ("values", "url", "cache") if k in spec]
        if len(sources) != 1:
            _err(category, name, "needs exactly one of values/url/cache")
        for step in spec.get("transform", []):
            kind = step.get("type")
            if kind not in TRANSFORM_KINDS:
                _err(category, name, f"unknown transform {kind!r}")
    elif category == "networks":
        if "parts" in spec:
            _err(category, name, 'option "parts" is unsupported')
        if not any(k in spec for k in ("links", "yieldLinks", "data")):
            _err(category, name, "needs links, yieldLinks, or a graph-format data source")
        for step in spec.get("transform", []):
            kind = step.get("type")
            if kind in UNSUPPORTED_TRANSFORMS:
                _err(category, name, f"transform {kind!r} is unsupported")
            if kind not in NETWORK_TRANSFORM_KINDS:
                _err(category, name, f"unknown transform {kind!r}")
    elif category == "groupings":
        if "data" not in spec:
            _err(category, name, "missing data")
        if not ("common" in spec or "expression" in spec):
            _err(category, name, "needs common field or expression")
    elif category == "orderings":
        has_sort = "orderBy" in spec
        has_method = "method" in spec
        if has_sort == has_method:
            _err(category, name, "needs exactly one of orderBy / method")
        if "data" not in spec:
            _err(category, name, "missing data")
    elif category == "tables":
        for required in ("data", "rowOrder", "colOrder"):
            if required not in spec:
                _err(category, name, f"missing {required}")
    elif category == "layouts":
        for required in ("data", "pattern"):
            if required not in spec and spec.get("pattern") != "induced":
                _err(category, name, f"missing {required}")
        if spec.get("pattern") == "induced" and "base" not in spec:
            _err(category, name, "induced layout needs a base layout")
    elif category == "scales":
        if "domain" not in spec and spec.get("type", "linear") != "sequential":
            _err(category, name, "missing domain")
        if "range" not in spec and "scheme" not in spec:
            _err(category, name, "missing range")
    elif category == "parameters":
        if "value" not in spec:
            if "options" in spec and spec["options"]:
                spec["value"] = spec["options"][0]
            elif "min" in spec:
                spec["value"] = spec["min"]
            else:
                _err(category, name, "missing value")
        if "options" in spec and spec["value"] not in spec["options"]:
            _err(category, name, f"value {spec['value']!r} not in options")
        if "min" in spec and "max" in spec:
            if not (spec["min"] <= spec["value"] <= spec["max"]):
                _err(category, name, f"value {spec['value']!r} outside [min, max]")
    elif category == "selections":
        if "transform" in spec:
            if spec["transform"] not in SELECTION_TRANSFORMS:
                _err(category, name, f"unknown selection transform {spec['transform']!r}")
            if "base" not in spec:
                _err(category, name, "derived selection needs a base")
            if "network" not in spec:
                _err(category, name, "derived selection needs a network")
    elif category == "vis":
        if "entries" not in spec and "table" not in spec and "layout" not in spec:
            _err(category, name, "needs entries, table, or layout")
        if "mark" not in spec and "vis" not in spec and "table" not in spec and "layout" not in spec:
            _err(category, name, "needs a mark or nested vis blocks")


# --- Reference graph -------------------------------------------------------


def _source_prefix(path) -> str | None:
    if isinstance(path, str) and "." in path:
        return path.rsplit(".", 1)[0]
    return path if isinstance(path, str) else None


def _expr_parameter_refs(doc: SpecDocument, text: str) -> list[tuple[str, str]]:
    from .expr import collect_references, parse_expression
    try:
        names = collect_references(parse_expression(text).ast)
    except Exception:
        return []
    params = doc.by_name("parameters")
    return [("parameters", n) for n in names if n in params]


def _channel_refs(doc: SpecDocument, channel) -> list[tuple[str, str]]:
    refs: list[tuple[str, str]] = []
    if isinstance(channel, Mapping):
        if "scale" in channel and channel["scale"] in doc.by_name("scales"):
            refs.append(("scales", channel["scale"]))
        if "parameter" in channel and channel["parameter"] in doc.by_name("parameters"):
            refs.append(("parameters", channel["parameter"]))
        if "expression" in channel:
            refs.extend(_expr_parameter_refs(doc, channel["expression"]))
    elif isinstance(channel, str):
        refs.extend(_expr_parameter_refs(doc, channel))
    return refs


def _reference_through_parameter(doc: SpecDocument, value, target_category: str,
                                 referrer: str) -> list[tuple[str, str]]:
    """A construct reference that may be a literal name or a
    {"parameter": p} indirection; in the latter case depend on the
    parameter and on every option that names a construct."""
    if isinstance(value, str):
        return [(target_category, value)]
    if isinstance(value, Mapping) and "parameter" in value:
        pname = value["parameter"]
        params = doc.by_name("parameters")
        if pname not in params:
            raise DependencyError(f"{referrer} references unknown parameter {pname!r}", referrer)
        options = params[pname].get("options")
        if not options:
            raise DependencyError(
                f"{referrer}: parameter {pname!r} used as a {target_category} reference needs options",
                referrer,
            )
        refs: list[tuple[str, str]] = [("parameters", pname)]
        targets = doc.by_name(target_category)
        for option in options:
            if option not in targets:
                raise DependencyError(
                    f"{referrer}: option {option!r} of parameter {pname!r} is not a {target_category} construct",
                    referrer,
                )
            refs.append((target_category, option))
        return refs
    raise DependencyError(f"{referrer}: invalid {target_category} reference {value!r}", referrer)


def _element_source_refs(doc: SpecDocument, path, referrer: str) -> list[tuple[str, str]]:
    """References implied by an element path like net.nodes / g.groups."""
    prefix = _source_prefix(path)
    if prefix is None:
        return []
    if prefix == "group":  # nested scope, not a construct
        return []
    for category in ("networks", "groupings", "tables", "data"):
        if prefix in doc.by_name(category):
            return [(category, prefix)]
    raise DependencyError(f"{referrer} references unknown source {prefix!r}", referrer)


def construct_references(doc: SpecDocument, category: str, spec: dict) -> list[tuple[str, str]]:
    name = spec["name"]
    referrer = f"{category} {name!r}"
    refs: list[tuple[str, str]] = []

    if category == "data":
        for step in spec.get("transform", []):
            if step.get("type") == "lookup":
                other = step.get("from")
                if other not in doc.by_name("data"):
                    raise DependencyError(f"{referrer} lookup references unknown table {other!r}", name)
                refs.append(("data", other))
            if "expression" in step:
                refs.extend(_expr_parameter_refs(doc, step["expression"]))
    elif category == "networks":
        datasets = doc.by_name("data")
        for key in ("nodes", "links", "data"):
            if key in spec:
                if spec[key] not in datasets:
                    raise DependencyError(f"{referrer} references unknown data {spec[key]!r}", name)
                refs.append(("data", spec[key]))
        for yield_spec in list(spec.get("yieldNodes", [])) + list(spec.get("yieldLinks", [])):
            table = yield_spec.get("table")
            if table not in datasets:
                raise DependencyError(f"{referrer} references unknown data {table!r}", name)
            refs.append(("data", table))
        for step in spec.get("transform", []):
            if "expression" in step:
                refs.extend(_expr_parameter_refs(doc, step["expression"]))
    elif category in ("groupings", "orderings"):
        refs.extend(_element_source_refs(doc, spec.get("data"), referrer))
        if "expression" in spec:
            refs.extend(_expr_parameter_refs(doc, spec["expression"]))
        if isinstance(spec.get("orderBy"), Mapping) and "expression" in spec["orderBy"]:
            refs.extend(_expr_parameter_refs(doc, spec["orderBy"]["expression"]))
    elif category == "tables":
        refs.extend(_element_source_refs(doc, spec.get("data"), referrer))
        for key in ("rowOrder", "colOrder"):
            refs.extend(_reference_through_parameter(doc, spec[key], "orderings", referrer))
    elif category == "layouts":
        if spec.get("pattern") == "induced":
            base = spec.get("base")
            if base not in doc.by_name("layouts"):
                raise DependencyError(f"{referrer} references unknown base layout {base!r}", name)
            refs.append(("layouts", base))
        refs.extend(_element_source_refs(doc, spec.get("data"), referrer))
        if "order" in spec:
            refs.extend(_reference_through_parameter(doc, spec["order"], "orderings", referrer))
        for key in ("x", "y", "angle", "radius"):
            if key in spec:
                refs.extend(_channel_refs(doc, spec[key]))
    elif category == "scales":
        domain = spec.get("domain")
        if isinstance(domain, Mapping) and "data" in domain:
            refs.extend(_element_source_refs(doc, domain["data"], referrer))
    elif category == "selections":
        if "base" in spec:
            if spec["base"] not in doc.by_name("selections"):
                raise DependencyError(f"{referrer} references unknown selection {spec['base']!r}", name)
            refs.append(("selections", spec["base"]))
        if "network" in spec:
            if spec["network"] not in doc.by_name("networks"):
                raise DependencyError(f"{referrer} references unknown network {spec['network']!r}", name)
            refs.append(("networks", spec["network"]))
    elif category == "vis":
        refs.extend(_vis_references(doc, spec, referrer))
    return refs


def _vis_references(doc: SpecDocument, spec: Mapping, referrer: str) -> list[tuple[str, str]]:
    refs: list[tuple[str, str]] = []
    if "entries" in spec:
        refs.extend(_element_source_refs(doc, spec["entries"], referrer))
    if "table" in spec:
        if spec["table"] not in doc.by_name("tables"):
            raise DependencyError(f"{referrer} references unknown table {spec['table']!r}", referrer)
        refs.append(("tables", spec["table"]))
    layout_ref = spec.get("layout")
    if isinstance(layout_ref, str):
        if layout_ref in doc.by_name("layouts"):
            refs.append(("layouts", layout_ref))
        elif layout_ref in doc.by_name("tables"):
            refs.append(("tables", layout_ref))
        else:
            raise DependencyError(f"{referrer} references unknown layout {layout_ref!r}", referrer)
    elif isinstance(layout_ref, Mapping):  # inline nested layout
        if "order" in layout_ref:
            refs.extend(_reference_through_parameter(doc, layout_ref["order"], "orderings", referrer))
        for key in ("x", "y", "angle", "radius"):
            if key in layout_ref:
                refs.extend(_channel_refs(doc, layout_ref[key]))

    marks = spec.get("mark", [])
    if isinstance(marks, Mapping):
        marks = [marks]
    for mark in marks:
        for value in mark.values():
            refs.extend(_channel_refs(doc, value))
        for branch_key in ("if", "ifInSelection"):
            branches = mark.get(branch_key)
            if isinstance(branches, Mapping):
                branches = [branches]
            if isinstance(branches, list):
                for branch in branches:
                    sel = branch.get("selection")
                    if branch_key == "ifInSelection":
                        if sel not in doc.by_name("selections"):
                            raise DependencyError(
                                f"{referrer} references unknown selection {sel!r}", referrer)
                        refs.append(("selections", sel))
                    for value in branch.values():
                        refs.extend(_channel_refs(doc, value))
    for side in ("rowLabels", "colLabels"):
        if isinstance(spec.get(side), Mapping):
            for value in spec[side].values():
                refs.extend(_channel_refs(doc, value))
    for inner in spec.get("vis", []) or []:
        refs.extend(_vis_references(doc, inner, referrer))
    return refs


def resolve_dependencies(doc: SpecDocument) -> EvaluationPlan:
    """Topological sort of the construct reference graph with
    deterministic (category rank, name) tie-breaking."""
    rank = {category: i for i, category in enumerate(CATEGORIES)}
    nodes: list[tuple[str, str]] = []
    for category in CATEGORIES:
        for spec in doc.constructs.get(category, []):
            nodes.append((category, spec["name"]))
    node_set = set(nodes)

    dependencies: dict[tuple[str, str], set[tuple[str, str]]] = {n: set() for n in nodes}
    dependents: dict[tuple[str, str], set[tuple[str, str]]] = {n: set() for n in nodes}
    for category, name in nodes:
        spec = doc.get(category, name)
        for ref in construct_references(doc, category, spec):
            if ref not in node_set:
                raise DependencyError(
                    f"{category} {name!r} references unknown {ref[0]} {ref[1]!r}", name)
            if ref == (category, name):
                raise DependencyError(f"{category} {name!r} references itself", name)
            dependencies[(category, name)].add(ref)
            dependents[ref].add((category, name))

    heap = [
        (rank[c], n, (c, n))
        for (c, n) in nodes
        if not dependencies[(c, n)]
    ]
    heapq.heapify(heap)
    steps: list[tuple[str, str]] = []
    remaining = {n: set(deps) for n, deps in dependencies.items()}
    while heap:
        _, _, node = heapq.heappop(heap)
        steps.append(node)
        for dependent in sorted(dependents[node]):
            remaining[dependent].discard(node)
            if not remaining[dependent]:
                heapq.heappush(heap, (rank[dependent[0]], dependent[1], dependent))

    if len(steps) != len(nodes):
        placed = set(steps)
        cycle = sorted(n for n, deps in remaining.items() if deps and n not in placed)
        names = ", ".join(f"{c}:{n}" for c, n in cycle)
        raise DependencyError(f"cyclic references between constructs: {names}")
    return EvaluationPlan(steps)
