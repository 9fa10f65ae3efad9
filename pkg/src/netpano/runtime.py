"""Full-document evaluation and interaction state.

evaluate_spec() executes the EvaluationPlan end to end (skipping
constructs not reachable from any vis block), renders the scene to SVG,
and returns a manifest describing parameters, selections, and selectable
marks. Interaction is modeled as replayable events: apply_event() folds
one event into an immutable-state snapshot, and passing an event log to
evaluate_spec() replays it from the initial state, so identical inputs
always produce byte-identical SVG.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from . import speccore
from .dataio import CacheStore, DataTable, FileFetcher, load_data
from .encode import SceneContext, build_scene, iter_marks
from .errors import (
    EventError, NetpanoError, RuntimeEvalError, SpecValidationError, Warnings,
)
from .expr import EvalScope, eval_expression, parse_expression
from .graphformats import GraphDocument
from .layout import (
    Box, GEOMETRIC_PATTERNS, PROCEDURAL_PATTERNS, apply_layout_transform,
    apply_manual_positions, compute_geometric_layout, compute_induced_layout,
    compute_procedural_layout, compute_table_layout, custom_layouts,
)
from .network import apply_network_transform, compute_grouping, construct_network
from .ordering import Ordering, compute_seriation, compute_sort_ordering
from .speccore import EvaluationPlan, SpecDocument
from .svgrender import SvgOutput, render_svg


@dataclass(frozen=True)
class EngineState:
    """Immutable snapshot of interaction state."""

    selections: Mapping[str, frozenset] = field(default_factory=dict)
    positions: Mapping[str, Mapping] = field(default_factory=dict)  # layout -> {spec, overrides}
    order_swaps: Mapping[str, tuple] = field(default_factory=dict)  # ordering -> ((id, ordinal), ...)

    @staticmethod
    def initial() -> "EngineState":
        return EngineState({}, {}, {})


@dataclass
class Manifest:
    parameters: list[dict]
    selections: list[str]
    selectable_marks: list[str]
    mark_elements: dict[str, str]
    warnings: list[str]

    def as_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "selections": self.selections,
            "selectableMarks": self.selectable_marks,
            "markElements": self.mark_elements,
            "warnings": self.warnings,
        }


def _parameter_values(doc: SpecDocument, overrides: Mapping | None) -> dict:
    values = {}
    specs = doc.by_name("parameters")
    for name, spec in specs.items():
        values[name] = spec["value"]
    for name, value in (overrides or {}).items():
        if name not in specs:
            raise RuntimeEvalError(f"unknown parameter {name!r}", name)
        spec = specs[name]
        if "options" in spec and value not in spec["options"]:
            raise RuntimeEvalError(
                f"parameter {name!r}: value {value!r} not in options {spec['options']}", name)
        if "min" in spec and "max" in spec and not (spec["min"] <= value <= spec["max"]):
            raise RuntimeEvalError(
                f"parameter {name!r}: value {value!r} outside [{spec['min']}, {spec['max']}]", name)
        values[name] = value
    return values


def _reachable_from_vis(doc: SpecDocument) -> set[tuple[str, str]]:
    """Constructs reachable from any vis block (ancestors in the
    reference graph); everything else is skipped during evaluation."""
    reachable: set[tuple[str, str]] = set()
    stack = [("vis", v["name"]) for v in doc.constructs.get("vis", [])]
    while stack:
        node = stack.pop()
        if node in reachable:
            continue
        reachable.add(node)
        spec = doc.get(*node)
        for ref in speccore.construct_references(doc, node[0], spec):
            stack.append(ref)
    return reachable


def _resolve_name_or_parameter(value, parameters: Mapping, what: str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, Mapping) and "parameter" in value:
        return parameters[value["parameter"]]
    raise RuntimeEvalError(f"{what}: invalid reference {value!r}")


@dataclass
class _Evaluation:
    """Mutable working set for a single evaluation pass."""

    tables: dict[str, DataTable | GraphDocument] = field(default_factory=dict)
    ctx: SceneContext = field(default_factory=SceneContext)
    vis_specs: list[Mapping] = field(default_factory=list)


def evaluate_document(
    doc: SpecDocument,
    params: Mapping | None = None,
    state: EngineState | None = None,
    seed: int = 0,
    asset_root: str = ".",
    fetcher=None,
    cache: CacheStore | None = None,
    geocoder=None,
    sandboxed: bool = False,
) -> tuple[SvgOutput, Manifest, EngineState]:
    """One full evaluation pass (no events)."""
    state = state or EngineState.initial()
    plan = speccore.resolve_dependencies(doc)
    parameters = _parameter_values(doc, params)
    warnings = Warnings()
    warnings.messages.extend(doc.warnings.messages)
    fetcher = fetcher or FileFetcher(asset_root, sandboxed=sandboxed)
    cache = cache or CacheStore(asset_root)
    reachable = _reachable_from_vis(doc)

    ev = _Evaluation()
    ev.ctx.parameters = parameters
    ev.ctx.canvas = Box(0, 0, doc.canvas["width"], doc.canvas["height"])
    ev.ctx.warnings = warnings
    ev.ctx.seed = seed
    canvas = ev.ctx.canvas

    new_positions: dict[str, dict] = {}

    for category, name in plan.steps:
        if category == "parameters":
            continue  # already folded into `parameters`
        if (category, name) not in reachable:
            continue
        spec = doc.get(category, name)
        try:
            if category == "data":
                ev.tables[name] = load_data(
                    spec, fetcher, cache, warnings,
                    parameters=parameters, geocoder=geocoder,
                    tables={k: v for k, v in ev.tables.items() if isinstance(v, DataTable)},
                )
            elif category == "networks":
                network = construct_network(spec, ev.tables, warnings)
                for step in spec.get("transform", []):
                    network = apply_network_transform(network, step, warnings, parameters)
                ev.ctx.networks[name] = network
            elif category == "groupings":
                network = _network_for(doc, ev, spec.get("data"), name)
                ev.ctx.groupings[name] = compute_grouping(spec, network, warnings, parameters)
            elif category == "orderings":
                ev.ctx.orderings[name] = _evaluate_ordering(spec, doc, ev, warnings, parameters, state)
            elif category == "tables":
                row_name = _resolve_name_or_parameter(spec["rowOrder"], parameters, f"table {name!r}")
                col_name = _resolve_name_or_parameter(spec["colOrder"], parameters, f"table {name!r}")
                elements = _elements_for(doc, ev, spec["data"], name)
                table = compute_table_layout(
                    spec, elements, ev.ctx.orderings[row_name], ev.ctx.orderings[col_name],
                    canvas, warnings)
                ev.ctx.tables[name] = table
            elif category == "layouts":
                layout = _evaluate_layout(spec, doc, ev, warnings, parameters, seed)
                layout = _apply_position_state(layout, spec, state, new_positions, warnings)
                ev.ctx.layouts[name] = layout
            elif category == "scales":
                _collect_scale_data(spec, ev)
                ev.ctx.scale_specs[name] = spec
            elif category == "selections":
                ev.ctx.selections[name] = _evaluate_selection(spec, ev, state)
            elif category == "vis":
                ev.vis_specs.append(spec)
        except NetpanoError as e:
            if isinstance(e, RuntimeEvalError):
                raise
            raise RuntimeEvalError(f"{category} {name!r}: {e}", name) from e

    scene = build_scene(ev.vis_specs, ev.ctx)
    svg = render_svg(scene, canvas.width, canvas.height)

    selectable = [m.id for m in iter_marks(scene) if m.meta.get("selectable")]
    manifest = Manifest(
        parameters=[_manifest_parameter(p, parameters) for p in doc.constructs.get("parameters", [])],
        selections=[s["name"] for s in doc.constructs.get("selections", [])],
        selectable_marks=selectable,
        mark_elements=svg.mark_elements,
        warnings=list(warnings),
    )
    next_state = replace(state, positions=new_positions)
    return svg, manifest, next_state


def _manifest_parameter(spec: Mapping, values: Mapping) -> dict:
    out = {"name": spec["name"], "value": values[spec["name"]]}
    binding = spec.get("bind")
    if binding is None:
        if "options" in spec:
            binding = "select"
        elif "min" in spec and "max" in spec:
            binding = "slider"
        elif isinstance(spec["value"], bool):
            binding = "checkbox"
        else:
            binding = "none"
    out["bind"] = binding
    for key in ("options", "min", "max", "step"):
        if key in spec:
            out[key] = spec[key]
    return out


def _network_for(doc: SpecDocument, ev: _Evaluation, path: str, referrer: str):
    prefix = path.split(".")[0] if isinstance(path, str) else None
    network = ev.ctx.networks.get(prefix)
    if network is None:
        raise RuntimeEvalError(f"{referrer}: unknown network in data path {path!r}", referrer)
    return network


def _elements_for(doc: SpecDocument, ev: _Evaluation, path: str, referrer: str):
    if not isinstance(path, str) or "." not in path:
        raise RuntimeEvalError(f"{referrer}: invalid data path {path!r}", referrer)
    source, kind = path.rsplit(".", 1)
    if kind == "groups":
        grouping = ev.ctx.groupings.get(source)
        if grouping is None:
            raise RuntimeEvalError(f"{referrer}: unknown grouping {source!r}", referrer)
        return [(g.id, g.record()) for g in grouping.groups]
    if kind in ("nodes", "links"):
        network = ev.ctx.networks.get(source)
        if network is None:
            raise RuntimeEvalError(f"{referrer}: unknown network {source!r}", referrer)
        elements = network.nodes if kind == "nodes" else network.links
        return [(e.id, e.record()) for e in elements]
    if kind == "cells":
        table = ev.ctx.tables.get(source)
        if table is None:
            raise RuntimeEvalError(f"{referrer}: unknown table {source!r}", referrer)
        return [(c["id"], c) for c in table.cells]
    raise RuntimeEvalError(f"{referrer}: invalid data path {path!r}", referrer)


def _evaluate_ordering(spec, doc, ev, warnings, parameters, state: EngineState) -> Ordering:
    name = spec["name"]
    if "method" in spec:
        path = spec["data"]
        if not path.endswith(".nodes"):
            raise RuntimeEvalError(f"ordering {name!r}: seriation requires a .nodes data path", name)
        network = _network_for(doc, ev, path, f"ordering {name!r}")
        ordering = compute_seriation(spec, network, warnings)
    else:
        elements = _elements_for(doc, ev, spec["data"], f"ordering {name!r}")
        ordering = compute_sort_ordering(spec, elements, warnings, parameters)
    for element_id, new_ordinal in state.order_swaps.get(name, ()):  # dragReorder replay
        ordering = _swap_ordinal(ordering, element_id, new_ordinal, warnings)
    return ordering


def _swap_ordinal(ordering: Ordering, element_id: str, new_ordinal: int, warnings) -> Ordering:
    mapping = dict(ordering.map)
    if element_id not in mapping:
        warnings.warn(f"ordering {ordering.name!r}: dragReorder id {element_id!r} no longer present")
        return ordering
    old = mapping[element_id]
    holder = next((i for i, o in mapping.items() if o == new_ordinal), None)
    if holder is None:
        warnings.warn(f"ordering {ordering.name!r}: dragReorder ordinal {new_ordinal} out of range")
        return ordering
    mapping[element_id], mapping[holder] = new_ordinal, old
    return Ordering(ordering.name, mapping)


def _evaluate_layout(spec, doc, ev, warnings, parameters, seed):
    name = spec["name"]
    pattern = spec.get("pattern")
    canvas = ev.ctx.canvas
    if pattern == "induced":
        base = ev.ctx.layouts.get(spec["base"])
        if base is None:
            raise RuntimeEvalError(f"layout {name!r}: unknown base layout {spec['base']!r}", name)
        elements = _elements_for(doc, ev, spec["data"], f"layout {name!r}")
        layout = compute_induced_layout(spec, base, elements)
    elif pattern in GEOMETRIC_PATTERNS:
        elements = _elements_for(doc, ev, spec["data"], f"layout {name!r}")
        ordering = None
        if "order" in spec:
            order_name = _resolve_name_or_parameter(spec["order"], parameters, f"layout {name!r}")
            ordering = ev.ctx.orderings.get(order_name)
            if ordering is None:
                raise RuntimeEvalError(f"layout {name!r}: unknown ordering {order_name!r}", name)
        scales = ev.ctx.scales_for(None)
        layout = compute_geometric_layout(spec, elements, ordering, canvas, scales, parameters)
    elif pattern in PROCEDURAL_PATTERNS or pattern in custom_layouts:
        network = _network_for(doc, ev, spec["data"], f"layout {name!r}")
        layout = compute_procedural_layout(spec, network, canvas, warnings, seed)
    else:
        raise RuntimeEvalError(f"layout {name!r}: unknown pattern {pattern!r}", name)

    for step in spec.get("transforms", []):
        layout = apply_layout_transform(layout, step, seed)
    return layout


def _layout_identity(spec: Mapping) -> str:
    return json.dumps(spec, sort_keys=True, default=str)


def _apply_position_state(layout, spec, state: EngineState, new_positions, warnings):
    name = spec["name"]
    stored = state.positions.get(name)
    if not stored:
        return layout
    if stored.get("spec") != _layout_identity(spec):
        warnings.warn(f"layout {name!r}: options changed; dropping manual positions")
        return layout
    new_positions[name] = stored
    overrides = {k: tuple(v) for k, v in stored.get("overrides", {}).items()}
    return apply_manual_positions(layout, overrides)


def _collect_scale_data(spec, ev: _Evaluation) -> None:
    domain = spec.get("domain")
    if not isinstance(domain, Mapping) or "data" not in domain:
        return
    path, fld = domain["data"], domain["field"]
    key = f"{path}.{fld}"
    if key in ev.ctx.scale_data:
        return
    if "." in path:
        elements = _elements_for(None, ev, path, f"scale {spec['name']!r}")
        ev.ctx.scale_data[key] = [record.get(fld) for _, record in elements]
    else:
        table = ev.tables.get(path)
        if not isinstance(table, DataTable):
            raise RuntimeEvalError(f"scale {spec['name']!r}: unknown data source {path!r}", spec["name"])
        ev.ctx.scale_data[key] = [row.get(fld) for row in table.rows]


def _evaluate_selection(spec, ev: _Evaluation, state: EngineState) -> set[str]:
    name = spec["name"]
    if "transform" not in spec:
        return set(state.selections.get(name, frozenset()))
    base = set(ev.ctx.selections.get(spec["base"], set()))
    network = ev.ctx.networks.get(spec["network"])
    if network is None:
        raise RuntimeEvalError(f"selection {name!r}: unknown network {spec['network']!r}", name)
    transform = spec["transform"]
    if transform == "neighbors":
        out: set[str] = set()
        for element_id in base:
            if network.has_node(element_id):
                out.update(network.neighbors(element_id))
        return out - base
    if transform == "addNeighbors":
        out = set(base)
        for element_id in base:
            if network.has_node(element_id):
                out.update(network.neighbors(element_id))
        return out
    if transform == "incidentLinks":
        out = set()
        for element_id in base:
            if network.has_node(element_id):
                out.update(l.id for l in network.incident_links(element_id))
        return out
    if transform == "invert":
        universe = {n.id for n in network.nodes} | {l.id for l in network.links}
        return universe - base
    raise RuntimeEvalError(f"selection {name!r}: unknown transform {transform!r}", name)


# --- Events -----------------------------------------------------------------

EVENT_TYPES = ("click", "lassoSelect", "dragNode", "dragReorder", "hover")


def apply_event(doc: SpecDocument, state: EngineState, event: Mapping,
                svg: SvgOutput, params: Mapping | None = None) -> EngineState:
    """Fold one interaction event into the state. Marks referenced by the
    event resolve through the given render's mark index."""
    etype = event.get("type")
    if etype not in EVENT_TYPES:
        raise EventError(f"unknown event type {etype!r}")
    if etype == "hover":
        return state  # tooltips are client-side; nothing to fold in

    if etype in ("click", "lassoSelect"):
        sel_name = event.get("selection")
        sel_specs = doc.by_name("selections")
        if sel_name not in sel_specs:
            raise EventError(f"unknown selection {sel_name!r}")
        if "transform" in sel_specs[sel_name]:
            raise EventError(f"selection {sel_name!r} is derived and cannot be edited directly")
        elements = _event_elements(event, svg)
        mode = event.get("mode", "toggle")
        members = set(state.selections.get(sel_name, frozenset()))
        if mode == "add":
            members |= elements
        elif mode == "remove":
            members -= elements
        elif mode == "toggle":
            members ^= elements
        else:
            raise EventError(f"unknown selection mode {mode!r}")
        selections = dict(state.selections)
        selections[sel_name] = frozenset(members)
        return replace(state, selections=selections)

    if etype == "dragNode":
        targets = _event_targets(event)
        position = event.get("position")
        if (not isinstance(position, (list, tuple))) or len(position) != 2:
            raise EventError("dragNode needs a position [x, y]")
        positions = {k: dict(v) for k, v in state.positions.items()}
        for mark_id in targets:
            element = svg.mark_elements.get(mark_id)
            layout_name = svg.mark_layouts.get(mark_id)
            if element is None or layout_name is None:
                raise EventError(f"mark {mark_id!r} is not draggable (no layout)")
            layout_spec = doc.get("layouts", layout_name)
            entry = positions.setdefault(
                layout_name, {"spec": _layout_identity(layout_spec), "overrides": {}})
            entry["overrides"] = {**entry.get("overrides", {}),
                                  element: [float(position[0]), float(position[1])]}
        return replace(state, positions=positions)

    # dragReorder
    table_name = event.get("table")
    tables = doc.by_name("tables")
    if table_name not in tables:
        raise EventError(f"unknown table {table_name!r}")
    table_spec = tables[table_name]
    if not table_spec.get("dragToReorder", False):
        raise EventError(f"table {table_name!r} does not enable dragToReorder")
    axis = event.get("axis", "row")
    order_ref = table_spec["rowOrder"] if axis == "row" else table_spec["colOrder"]
    values = _parameter_values(doc, params)
    ordering_name = _resolve_name_or_parameter(order_ref, values, f"table {table_name!r}")
    element_id = event.get("id")
    ordinal = event.get("ordinal")
    if element_id is None or not isinstance(ordinal, int):
        raise EventError("dragReorder needs an id and an integer ordinal")
    swaps = dict(state.order_swaps)
    swaps[ordering_name] = tuple(swaps.get(ordering_name, ())) + ((element_id, ordinal),)
    return replace(state, order_swaps=swaps)


def _event_targets(event: Mapping) -> list[str]:
    if "targets" in event:
        targets = event["targets"]
        if not isinstance(targets, list):
            raise EventError("targets must be a list of mark ids")
        return targets
    target = event.get("target")
    if target is None:
        raise EventError("event needs a target mark id")
    return [target]


def _event_elements(event: Mapping, svg: SvgOutput) -> set[str]:
    elements = set()
    for mark_id in _event_targets(event):
        element = svg.mark_elements.get(mark_id)
        if element is None:
            raise EventError(f"unknown mark {mark_id!r}")
        elements.add(element)
    return elements


# --- Top-level API -----------------------------------------------------------


def evaluate_spec(
    spec_text_or_doc: str | SpecDocument,
    params: Mapping | None = None,
    events: list[Mapping] | None = None,
    seed: int = 0,
    asset_root: str = ".",
    fetcher=None,
    cache: CacheStore | None = None,
    geocoder=None,
    sandboxed: bool = False,
) -> tuple[SvgOutput, Manifest]:
    """Parse (if needed), replay the event log from the initial state,
    and return the final render plus its manifest."""
    if isinstance(spec_text_or_doc, SpecDocument):
        doc = spec_text_or_doc
    else:
        doc = speccore.parse_spec(spec_text_or_doc)

    kwargs = dict(params=params, seed=seed, asset_root=asset_root, fetcher=fetcher,
                  cache=cache, geocoder=geocoder, sandboxed=sandboxed)
    state = EngineState.initial()
    svg, manifest, state = evaluate_document(doc, state=state, **kwargs)
    for event in events or []:
        state = apply_event(doc, state, event, svg, params=params)
        svg, manifest, state = evaluate_document(doc, state=state, **kwargs)
    return svg, manifest
