"""Scene-graph construction: vis blocks -> positioned, styled marks.

Each vis block produces one mark per visible element (or per table cell),
with channels resolved against the element record, optional conditions
(`if` gates or style branches, `ifInSelection` overrides), tooltip
templates, matrix row/column labels, axes, and nested vis blocks for
small multiples. Everything here is pure: the same context always yields
a structurally identical scene.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import EncodingError, ExprEvalError, LayoutError, ScaleError, Warnings
from .expr import EvalScope, collect_references, eval_expression, parse_expression
from .layout import Box, Layout, TableLayout, resolve_channel
from .layout import compute_geometric_layout, compute_procedural_layout
from .network import Grouping, Network, Node, Link
from .ordering import Ordering
from .scales import resolve_scale, scale_is_parent_relative

MARK_KINDS = ("symbol", "rect", "text", "line", "area", "linkPath", "glyphSeries")
LINK_SHAPES = ("line", "orthogonal", "arc", "curve", "sigmoid", "squiggle", "wedge")
DIRECTIONS = ("none", "arrowhead", "gradient", "wedge", "halfLine", "asymmetricCurve", "glyphSeries")

STYLE_CHANNELS = ("fill", "stroke", "strokeWidth", "strokeDash", "opacity", "fontSize")


@dataclass
class Mark:
    id: str
    element: str
    kind: str
    geometry: dict
    style: dict
    meta: dict = field(default_factory=dict)


@dataclass
class SceneGroup:
    id: str
    children: list = field(default_factory=list)
    translate: tuple[float, float] | None = None


@dataclass
class SceneContext:
    """Named artifacts visible while encoding one document."""

    networks: dict[str, Network] = field(default_factory=dict)
    groupings: dict[str, Grouping] = field(default_factory=dict)
    orderings: dict[str, Ordering] = field(default_factory=dict)
    layouts: dict[str, Layout] = field(default_factory=dict)
    tables: dict[str, TableLayout] = field(default_factory=dict)
    scale_specs: dict[str, Mapping] = field(default_factory=dict)
    scale_data: dict[str, list] = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    selections: dict[str, set] = field(default_factory=dict)
    canvas: Box = field(default_factory=lambda: Box(0, 0, 800, 600))
    warnings: Warnings = field(default_factory=Warnings)
    seed: int = 0

    def scales_for(self, bounds: Mapping | None):
        resolved = {}
        for name, spec in self.scale_specs.items():
            if scale_is_parent_relative(spec) and bounds is None:
                continue  # only usable inside a nested vis
            try:
                resolved[name] = resolve_scale(spec, self.scale_data, self.warnings, bounds)
            except ScaleError:
                if scale_is_parent_relative(spec):
                    continue
                raise
        return resolved


def _bounds_record(box: Box) -> dict:
    return {"x": box.x, "y": box.y, "width": box.width, "height": box.height}


# --- Entry resolution -----------------------------------------------------


def element_records(network: Network, base: str) -> list[tuple[str, dict]]:
    if base == "nodes":
        return [(n.id, n.record()) for n in network.nodes]
    return [(l.id, l.record()) for l in network.links]


def resolve_entries(path: str, ctx: SceneContext, group_scope: Mapping | None):
    """Resolve an entries path ("net.nodes", "net.links", "grouping.groups",
    or "group.nodes"/"group.links" inside nesting) to [(id, record), ...]."""
    if "." not in path:
        raise EncodingError(f"entries {path!r} must be of the form source.kind")
    source, kind = path.rsplit(".", 1)
    if source == "group":
        if group_scope is None:
            raise EncodingError("entries \"group.*\" are only available inside a nested vis")
        if kind not in group_scope:
            raise EncodingError(f"unknown group entries {path!r}")
        return group_scope[kind]
    if kind == "groups":
        grouping = ctx.groupings.get(source)
        if grouping is None:
            raise EncodingError(f"unknown grouping {source!r} in entries {path!r}")
        return [(g.id, g.record()) for g in grouping.groups]
    if kind in ("nodes", "links"):
        network = ctx.networks.get(source)
        if network is None:
            raise EncodingError(f"unknown network {source!r} in entries {path!r}")
        return element_records(network, kind)
    if kind == "cells":
        table = ctx.tables.get(source)
        if table is None:
            raise EncodingError(f"unknown table {source!r} in entries {path!r}")
        return [(c["id"], c) for c in table.cells]
    raise EncodingError(f"unknown entries kind {kind!r} in {path!r}")


# --- Channel/condition helpers ---------------------------------------------


def _scope(record, bounds, ctx: SceneContext) -> EvalScope:
    return EvalScope(datum=record, bounds=bounds, parameters=ctx.parameters)


def _eval_test(test: str, record, bounds, ctx) -> bool:
    expr = parse_expression(test)
    try:
        value = eval_expression(expr, _scope(record, bounds, ctx))
    except ExprEvalError as e:
        raise EncodingError(f"condition {test!r}: {e}") from None
    if not isinstance(value, bool):
        raise EncodingError(f"condition {test!r} must evaluate to a boolean")
    return value


_TEMPLATE_RE = re.compile(r"\{([^{}]+)\}")


def render_template(template: str, record, bounds, ctx) -> str:
    """Tooltip/text templates: {expression} placeholders are evaluated in
    the element scope; everything else is literal text."""

    def substitute(m):
        expr = parse_expression(m.group(1))
        try:
            value = eval_expression(expr, _scope(record, bounds, ctx))
        except ExprEvalError as e:
            raise EncodingError(f"template {template!r}: {e}") from None
        if isinstance(value, float) and value.is_integer():
            return str(int(value))
        return "" if value is None else str(value)

    return _TEMPLATE_RE.sub(substitute, template)


def _mark_style(mark_spec, record, bounds, ctx, scales, element_id) -> dict:
    style = {}
    for channel in STYLE_CHANNELS:
        if channel in mark_spec:
            style[channel] = _resolve(mark_spec[channel], record, scales, ctx, bounds)

    # `if` style branches (a gate is handled by the caller)
    branches = mark_spec.get("if")
    if isinstance(branches, Mapping):
        branches = [branches]
    if isinstance(branches, list):
        for branch in branches:
            if _eval_test(branch["test"], record, bounds, ctx):
                for channel in STYLE_CHANNELS:
                    if channel in branch:
                        style[channel] = _resolve(branch[channel], record, scales, ctx, bounds)
                break

    # selection overrides win over everything
    sel_branches = mark_spec.get("ifInSelection")
    if isinstance(sel_branches, Mapping):
        sel_branches = [sel_branches]
    if isinstance(sel_branches, list):
        for branch in sel_branches:
            sel_name = branch.get("selection")
            if sel_name not in ctx.selections:
                raise EncodingError(f"ifInSelection references unknown selection {sel_name!r}")
            if element_id in ctx.selections[sel_name]:
                for channel in STYLE_CHANNELS:
                    if channel in branch:
                        style[channel] = _resolve(branch[channel], record, scales, ctx, bounds)
                break
    return style


def _resolve(channel, record, scales, ctx, bounds):
    try:
        return resolve_channel(channel, record, scales, ctx.parameters,
                               bounds=_bounds_dict(bounds))
    except LayoutError as e:
        raise EncodingError(str(e)) from None


def _bounds_dict(bounds):
    if bounds is None:
        return None
    if isinstance(bounds, Box):
        return _bounds_record(bounds)
    return bounds


def _is_parameter_sensitive(mark_spec: Mapping) -> bool:
    def uses_parameters(value) -> bool:
        if isinstance(value, Mapping):
            if "parameter" in value:
                return True
            if "expression" in value:
                try:
                    return bool(collect_references(parse_expression(value["expression"]).ast))
                except Exception:
                    return False
            return any(uses_parameters(v) for v in value.values())
        if isinstance(value, list):
            return any(uses_parameters(v) for v in value)
        if isinstance(value, str):
            return "parameters." in value
        return False

    return uses_parameters(dict(mark_spec))


# --- linkPath geometry -------------------------------------------------------


def build_link_path(p0: tuple[float, float], p1: tuple[float, float], shape: str,
                    options: Mapping | None = None) -> list[tuple]:
    """Path commands for a link between two points.

    Shapes: line, orthogonal (H then V), arc (semicircle bulging left of
    the travel direction), curve (cubic, 30%-chord perpendicular control
    offsets; "asymmetric": true offsets only the source side), sigmoid
    (S-curve with opposite perpendicular offsets), squiggle (sinusoid
    polyline along the chord), wedge (filled triangle, wide at source).
    A zero-length chord degenerates to a self-loop circle.
    """
    options = options or {}
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = x1 - x0, y1 - y0
    chord = math.hypot(dx, dy)
    if chord < 1e-9 and shape != "line":
        r = float(options.get("selfLoopRadius", 6.0))
        return [("M", x0 + r, y0),
                ("A", r, r, 0, 1, 1, x0 - r, y0),
                ("A", r, r, 0, 1, 1, x0 + r, y0)]

    if shape == "line":
        return [("M", x0, y0), ("L", x1, y1)]
    if shape == "orthogonal":
        return [("M", x0, y0), ("L", x1, y0), ("L", x1, y1)]
    if shape == "arc":
        r = chord / 2
        return [("M", x0, y0), ("A", r, r, 0, 0, 1, x1, y1)]

    # unit chord direction and left normal (y-down screen coordinates)
    ux, uy = dx / chord, dy / chord
    nx, ny = uy, -ux

    if shape == "curve":
        offset = 0.3 * chord
        asymmetric = bool(options.get("asymmetric", False))
        c1 = (x0 + 0.3 * dx + nx * offset, y0 + 0.3 * dy + ny * offset)
        if asymmetric:
            c2 = (x0 + 0.7 * dx, y0 + 0.7 * dy)
        else:
            c2 = (x0 + 0.7 * dx + nx * offset, y0 + 0.7 * dy + ny * offset)
        return [("M", x0, y0), ("C", c1[0], c1[1], c2[0], c2[1], x1, y1)]
    if shape == "sigmoid":
        offset = 0.25 * chord
        c1 = (x0 + 0.3 * dx + nx * offset, y0 + 0.3 * dy + ny * offset)
        c2 = (x0 + 0.7 * dx - nx * offset, y0 + 0.7 * dy - ny * offset)
        return [("M", x0, y0), ("C", c1[0], c1[1], c2[0], c2[1], x1, y1)]
    if shape == "squiggle":
        period = float(options.get("period", max(chord / 4, 1e-6)))
        amplitude = float(options.get("amplitude", 0.1 * chord))
        n_samples = max(8, int(math.ceil(chord / period)) * 8)
        commands: list[tuple] = [("M", x0, y0)]
        envelope = options.get("envelope")  # "source" tapers toward target
        for i in range(1, n_samples + 1):
            t = i / n_samples
            wave = amplitude * math.sin(2 * math.pi * (t * chord) / period)
            if envelope == "taper":
                wave *= 1 - t
            px = x0 + t * dx + nx * wave
            py = y0 + t * dy + ny * wave
            commands.append(("L", px, py))
        return commands
    if shape == "wedge":
        half = float(options.get("wedgeWidth", 6.0)) / 2
        return [("M", x0 + nx * half, y0 + ny * half),
                ("L", x0 - nx * half, y0 - ny * half),
                ("L", x1, y1), ("Z",)]
    raise EncodingError(f"unknown linkPath shape {shape!r}")


def path_polyline(commands: list[tuple], samples_per_segment: int = 32) -> list[tuple[float, float]]:
    """Polyline approximation of path commands (for glyph placement)."""
    points: list[tuple[float, float]] = []
    current = (0.0, 0.0)
    start = (0.0, 0.0)
    for cmd in commands:
        op = cmd[0]
        if op == "M":
            current = (cmd[1], cmd[2])
            start = current
            points.append(current)
        elif op == "L":
            current = (cmd[1], cmd[2])
            points.append(current)
        elif op == "C":
            p0 = current
            c1, c2, p3 = (cmd[1], cmd[2]), (cmd[3], cmd[4]), (cmd[5], cmd[6])
            for i in range(1, samples_per_segment + 1):
                t = i / samples_per_segment
                mt = 1 - t
                x = (mt ** 3) * p0[0] + 3 * (mt ** 2) * t * c1[0] + 3 * mt * t * t * c2[0] + (t ** 3) * p3[0]
                y = (mt ** 3) * p0[1] + 3 * (mt ** 2) * t * c1[1] + 3 * mt * t * t * c2[1] + (t ** 3) * p3[1]
                points.append((x, y))
            current = p3
        elif op == "A":
            # circular arc: recover center from endpoints + radius + flags
            rx, large, sweep = cmd[1], cmd[4], cmd[5]
            p3 = (cmd[6], cmd[7])
            points.extend(_arc_points(current, p3, rx, large, sweep, samples_per_segment))
            current = p3
        elif op == "Z":
            points.append(start)
            current = start
    return points


def _arc_points(p0, p1, r, large, sweep, samples):
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = x1 - x0, y1 - y0
    d = math.hypot(dx, dy)
    if d < 1e-12:
        # full circle (self-loop halves use d=2r); approximate around p0
        return [p0] * samples
    h_sq = max(r * r - (d / 2) ** 2, 0.0)
    h = math.sqrt(h_sq)
    mx, my = (x0 + x1) / 2, (y0 + y1) / 2
    # two candidate centers; choose by sweep/large flags
    nx, ny = -dy / d, dx / d
    if (sweep == 1) != (large == 1):
        cx, cy = mx + nx * h, my + ny * h
    else:
        cx, cy = mx - nx * h, my - ny * h
    a0 = math.atan2(y0 - cy, x0 - cx)
    a1 = math.atan2(y1 - cy, x1 - cx)
    if sweep == 1:
        while a1 < a0:
            a1 += 2 * math.pi
    else:
        while a1 > a0:
            a1 -= 2 * math.pi
    out = []
    for i in range(1, samples + 1):
        t = a0 + (a1 - a0) * i / samples
        out.append((cx + r * math.cos(t), cy + r * math.sin(t)))
    return out


def glyph_positions(commands: list[tuple], separation: float) -> list[tuple[float, float]]:
    """Points every `separation` px of arc length along the path,
    starting at the path start (count = floor(L/sep)+1 on straight chords)."""
    if separation <= 0:
        raise EncodingError("glyphSeries separation must be positive")
    polyline = path_polyline(commands)
    if len(polyline) < 2:
        return polyline
    out = [polyline[0]]
    walked = 0.0
    next_at = separation
    for i in range(1, len(polyline)):
        ax, ay = polyline[i - 1]
        bx, by = polyline[i]
        seg = math.hypot(bx - ax, by - ay)
        while seg > 0 and walked + seg >= next_at - 1e-9:
            t = (next_at - walked) / seg
            out.append((ax + (bx - ax) * t, ay + (by - ay) * t))
            next_at += separation
        walked += seg
    return out


# --- Scene building ----------------------------------------------------------


def build_scene(vis_specs: list[Mapping], ctx: SceneContext) -> SceneGroup:
    """Evaluate all vis blocks into a single scene tree (in spec order)."""
    root = SceneGroup("root")
    for vi, vis in enumerate(vis_specs):
        vis_id = vis.get("name", f"vis{vi}")
        root.children.append(_build_vis(vis, vis_id, ctx, bounds=None, group_scope=None))
    return root


def _build_vis(vis: Mapping, vis_id: str, ctx: SceneContext,
               bounds: Box | None, group_scope: Mapping | None) -> SceneGroup:
    group = SceneGroup(vis_id)
    scales = ctx.scales_for(_bounds_dict(bounds))
    canvas = bounds if bounds is not None else ctx.canvas

    table = ctx.tables.get(vis["table"]) if "table" in vis else None
    layout = None
    if "layout" in vis and isinstance(vis["layout"], str):
        layout = ctx.layouts.get(vis["layout"])
        if layout is None and vis["layout"] in ctx.tables:
            table = ctx.tables[vis["layout"]]
        elif layout is None:
            raise EncodingError(f"vis {vis_id!r}: unknown layout {vis['layout']!r}")
    elif "layout" in vis and isinstance(vis["layout"], Mapping):
        layout = _inline_layout(vis["layout"], vis_id, ctx, canvas, group_scope)

    if table is not None and layout is None:
        layout = table.layout

    # entries default to the table's cells
    if "entries" in vis:
        elements = resolve_entries(vis["entries"], ctx, group_scope)
    elif table is not None:
        elements = [(c["id"], c) for c in table.cells]
    else:
        raise EncodingError(f"vis {vis_id!r}: needs \"entries\" or \"table\"")

    if "border" in vis and vis["border"]:
        group.children.append(Mark(
            id=f"{vis_id}:border", element=f"{vis_id}:border", kind="rect",
            geometry={"x": canvas.x, "y": canvas.y, "width": canvas.width, "height": canvas.height},
            style={"fill": "none", "stroke": vis["border"] if isinstance(vis["border"], str) else "#cccccc",
                   "strokeWidth": 1},
        ))

    mark_specs = vis.get("mark", [])
    if isinstance(mark_specs, Mapping):
        mark_specs = [mark_specs]
    nested = vis.get("vis")

    if not mark_specs and not nested and table is None:
        raise EncodingError(f"vis {vis_id!r}: needs a \"mark\" (or nested \"vis\" blocks)")

    for mi, mark_spec in enumerate(mark_specs):
        prefix = vis_id if len(mark_specs) == 1 else f"{vis_id}:{mi}"
        for element_id, record in elements:
            mark = _build_mark(mark_spec, prefix, element_id, record, layout, table,
                               ctx, scales, bounds, vis)
            if mark is not None:
                group.children.append(mark)

    if table is not None:
        _add_table_labels(group, vis, vis_id, table, ctx, scales, bounds)

    if vis.get("drawAxes") and layout is not None:
        _add_axes(group, vis_id, layout, canvas)

    if nested:
        for element_id, record in elements:
            if layout is None:
                raise EncodingError(f"vis {vis_id!r}: nested vis needs a layout for its groups")
            sub_bounds = layout.box(element_id)
            sub_scope = _group_scope_for(element_id, record, vis, ctx, group_scope)
            for ni, inner in enumerate(nested):
                inner_id = f"{vis_id}:{element_id}/{inner.get('name', f'vis{ni}')}"
                group.children.append(_build_vis(inner, inner_id, ctx, sub_bounds, sub_scope))
    return group


def _inline_layout(spec: Mapping, vis_id: str, ctx: SceneContext, canvas: Box,
                   group_scope: Mapping | None) -> Layout:
    """Anonymous per-group layout inside a nested vis."""
    from .layout import GEOMETRIC_PATTERNS, PROCEDURAL_PATTERNS, custom_layouts

    spec = {"name": f"{vis_id}:layout", **spec}
    pattern = spec.get("pattern")
    entries = spec.get("data", "group.nodes")
    elements = resolve_entries(entries, ctx, group_scope)
    if pattern in GEOMETRIC_PATTERNS:
        ordering = ctx.orderings.get(spec["order"]) if "order" in spec else None
        return compute_geometric_layout(spec, elements, ordering, canvas,
                                        ctx.scales_for(_bounds_record(canvas)), ctx.parameters)
    if pattern in PROCEDURAL_PATTERNS or pattern in custom_layouts:
        network = group_scope.get("network") if group_scope else None
        if network is None:
            raise EncodingError(f"vis {vis_id!r}: inline procedural layout needs a group network")
        return compute_procedural_layout(spec, network, canvas, ctx.warnings, ctx.seed)
    raise EncodingError(f"vis {vis_id!r}: unknown inline layout pattern {pattern!r}")


def _group_scope_for(group_id: str, record: Mapping, vis: Mapping, ctx: SceneContext,
                     outer_scope: Mapping | None) -> Mapping:
    """Build the group.* entry scope for a nested vis evaluation."""
    entries = vis.get("entries", "")
    source = entries.split(".")[0] if "." in entries else None
    grouping = ctx.groupings.get(source) if source else None
    if grouping is None:
        return outer_scope or {}
    network = ctx.networks[grouping.network]
    members = next((g.members for g in grouping.groups if g.id == group_id), [])
    member_set = set(members)
    if grouping.base == "links":
        links = [l for l in network.links if l.id in member_set]
        node_ids = {l.source for l in links} | {l.target for l in links}
        nodes = [n for n in network.nodes if n.id in node_ids]
    else:
        nodes = [n for n in network.nodes if n.id in member_set]
        node_ids = {n.id for n in nodes}
        links = [l for l in network.links if l.source in node_ids and l.target in node_ids]
    sub = Network(f"{network.name}:{group_id}", network.directed,
                  [Node(n.id, dict(n.attributes)) for n in nodes],
                  [Link(l.id, l.source, l.target, dict(l.attributes)) for l in links])
    return {
        "nodes": [(n.id, n.record()) for n in sub.nodes],
        "links": [(l.id, l.record()) for l in sub.links],
        "network": sub,
    }


def _build_mark(mark_spec: Mapping, prefix: str, element_id: str, record: Mapping,
                layout: Layout | None, table: TableLayout | None,
                ctx: SceneContext, scales, bounds: Box | None, vis: Mapping) -> Mark | None:
    # `if` as a plain string gates the mark
    gate = mark_spec.get("if")
    if isinstance(gate, str) and not _eval_test(gate, record, _bounds_dict(bounds), ctx):
        return None

    kind = mark_spec.get("type", "symbol")
    if kind not in MARK_KINDS:
        raise EncodingError(f"unknown mark type {kind!r}")

    box = layout.box(element_id) if layout is not None else (bounds or ctx.canvas)
    bdict = _bounds_dict(bounds)
    style = _mark_style(mark_spec, record, bdict, ctx, scales, element_id)
    dx = _resolve(mark_spec.get("dx", 0), record, scales, ctx, bounds) or 0
    dy = _resolve(mark_spec.get("dy", 0), record, scales, ctx, bounds) or 0

    geometry: dict
    if kind == "symbol":
        size = _resolve(mark_spec.get("size", 5), record, scales, ctx, bounds)
        geometry = {"shape": mark_spec.get("shape", "circle"),
                    "cx": box.cx + dx, "cy": box.cy + dy, "r": float(size)}
        style.setdefault("fill", "#1f77b4")
    elif kind == "rect":
        width = _resolve(mark_spec["width"], record, scales, ctx, bounds) if "width" in mark_spec else box.width
        height = _resolve(mark_spec["height"], record, scales, ctx, bounds) if "height" in mark_spec else box.height
        x = box.cx - width / 2 if "width" in mark_spec else box.x
        y = box.cy - height / 2 if "height" in mark_spec else box.y
        geometry = {"x": x + dx, "y": y + dy, "width": float(width), "height": float(height)}
        style.setdefault("fill", "#1f77b4")
    elif kind == "text":
        template = mark_spec.get("text", "{datum.id}")
        text = render_template(template, record, bdict, ctx) if "{" in template else template
        geometry = {"x": box.cx + dx, "y": box.cy + dy, "text": text,
                    "anchor": mark_spec.get("align", "middle"),
                    "rotate": mark_spec.get("rotate", 0)}
        style.setdefault("fill", "#000000")
        style.setdefault("fontSize", 11)
    elif kind == "line":
        geometry = {"x1": box.x + dx, "y1": box.y + dy,
                    "x2": box.x + box.width + dx, "y2": box.y + box.height + dy}
        style.setdefault("stroke", "#999999")
    elif kind == "area":
        points = _resolve(mark_spec.get("points"), record, scales, ctx, bounds)
        if not isinstance(points, list):
            raise EncodingError("area mark needs a \"points\" channel resolving to a list of [x, y]")
        origin_x, origin_y = box.x, box.y
        geometry = {"points": [(origin_x + float(p[0]) + dx, origin_y + float(p[1]) + dy) for p in points]}
        style.setdefault("fill", "#1f77b4")
    elif kind in ("linkPath", "glyphSeries"):
        endpoints = _link_endpoints(mark_spec, record, layout, table, ctx, element_id)
        geometry = _link_geometry(mark_spec, endpoints, record, scales, ctx, bounds, style)
        if geometry.get("kind") == "glyphSeries":
            kind = "glyphSeries"
        geometry.pop("kind", None)
    else:  # pragma: no cover
        raise EncodingError(f"unhandled mark type {kind!r}")

    meta: dict = {}
    tooltip = mark_spec.get("tooltip", vis.get("tooltip"))
    if tooltip:
        meta["tooltip"] = render_template(tooltip, record, bdict, ctx)
    if mark_spec.get("selectable", vis.get("selectable", False)):
        meta["selectable"] = True
    if _is_parameter_sensitive(mark_spec):
        meta["parameterSensitive"] = True
    if layout is not None:
        meta["layout"] = layout.name

    return Mark(id=f"{prefix}:{element_id}", element=element_id, kind=kind,
                geometry=geometry, style=style, meta=meta)


def _link_endpoints(mark_spec, record, layout: Layout | None, table: TableLayout | None,
                    ctx: SceneContext, element_id: str):
    if layout is None:
        raise EncodingError(f"linkPath mark for {element_id!r} needs a layout")
    source = record.get("source")
    target = record.get("target")
    if source is None or target is None:
        raise EncodingError(f"linkPath mark for {element_id!r}: element has no source/target")
    a = layout.box(str(source))
    b = layout.box(str(target))
    return (a.cx, a.cy), (b.cx, b.cy)


def _link_geometry(mark_spec, endpoints, record, scales, ctx, bounds, style) -> dict:
    p0, p1 = endpoints
    start = float(_resolve(mark_spec.get("start", 0.0), record, scales, ctx, bounds))
    end = float(_resolve(mark_spec.get("end", 1.0), record, scales, ctx, bounds))
    if (start, end) != (0.0, 1.0):
        dx, dy = p1[0] - p0[0], p1[1] - p0[1]
        p0, p1 = ((p0[0] + dx * start, p0[1] + dy * start),
                  (p0[0] + dx * end, p0[1] + dy * end))

    shape = mark_spec.get("shape", "line")
    direction = mark_spec.get("direction", "none")
    if direction not in DIRECTIONS:
        raise EncodingError(f"unknown direction encoding {direction!r}")
    if direction == "wedge":
        shape = "wedge"
    options = {k: mark_spec[k] for k in
               ("selfLoopRadius", "period", "amplitude", "wedgeWidth", "envelope")
               if k in mark_spec}
    if direction == "asymmetricCurve":
        shape = "curve"
        options["asymmetric"] = True
    if direction == "halfLine":
        p1 = (p0[0] + (p1[0] - p0[0]) * 0.6, p0[1] + (p1[1] - p0[1]) * 0.6)
    if shape not in LINK_SHAPES:
        raise EncodingError(f"unknown linkPath shape {shape!r}")

    commands = build_link_path(p0, p1, shape, options)

    if direction == "glyphSeries" or mark_spec.get("type") == "glyphSeries":
        separation = float(_resolve(mark_spec.get("separation", 10), record, scales, ctx, bounds))
        size = float(_resolve(mark_spec.get("glyphSize", mark_spec.get("size", 2)), record, scales, ctx, bounds))
        points = glyph_positions(commands, separation)
        style.setdefault("fill", "#1f77b4")
        return {"kind": "glyphSeries", "points": points,
                "glyphShape": mark_spec.get("glyphShape", "circle"), "size": size}

    geometry: dict = {"path": commands}
    if shape == "wedge":
        style.setdefault("fill", style.get("stroke", "#999999"))
        style.setdefault("stroke", "none")
    else:
        style.setdefault("fill", "none")
        style.setdefault("stroke", "#999999")
    if direction == "arrowhead":
        geometry["markerEnd"] = True
    elif direction == "gradient":
        c0 = mark_spec.get("sourceColor", "#1f77b4")
        c1 = mark_spec.get("targetColor", "#d62728")
        geometry["gradient"] = {"x1": p0[0], "y1": p0[1], "x2": p1[0], "y2": p1[1],
                                "from": c0, "to": c1}
    return geometry


def _add_table_labels(group: SceneGroup, vis: Mapping, vis_id: str, table: TableLayout,
                      ctx: SceneContext, scales, bounds):
    ox, oy = table.origin
    cw, ch = table.cell_size
    for side, ids in (("rowLabels", table.row_ids), ("colLabels", table.col_ids)):
        spec = vis.get(side)
        if not spec:
            continue
        spec = spec if isinstance(spec, Mapping) else {}
        network = _table_network(table, ctx)
        for k, node_id in enumerate(ids):
            record = {"id": node_id}
            if network is not None and network.has_node(node_id):
                record = network.node_by_id(node_id).record()
            style = {"fontSize": spec.get("fontSize", 10), "fill": "#000000"}
            if "fill" in spec:
                style["fill"] = _resolve(spec["fill"], record, scales, ctx, bounds)
            text = spec.get("text", "{datum.id}")
            text = render_template(text, record, _bounds_dict(bounds), ctx) if "{" in text else text
            if side == "rowLabels":
                geometry = {"x": ox - 4, "y": oy + (k + 0.5) * ch, "text": text,
                            "anchor": "end", "rotate": 0}
            else:
                geometry = {"x": ox + (k + 0.5) * cw, "y": oy - 4, "text": text,
                            "anchor": "start", "rotate": -90}
            group.children.append(Mark(
                id=f"{vis_id}:{side}:{node_id}", element=node_id, kind="text",
                geometry=geometry, style=style, meta={}))


def _table_network(table: TableLayout, ctx: SceneContext) -> Network | None:
    for network in ctx.networks.values():
        if all(network.has_node(i) for i in table.row_ids):
            return network
    return None


_AXIS_TICKS = 5


def _add_axes(group: SceneGroup, vis_id: str, layout: Layout, canvas: Box):
    """Axis lines + ticks along the left and bottom edges of the layout's
    extent; tick labels interpolate the layout's data domain if known."""
    if not layout.boxes:
        return
    xs = [b.cx for b in layout.boxes.values()]
    ys = [b.cy for b in layout.boxes.values()]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    axis_y = y_hi + 10
    axis_x = x_lo - 10
    meta = getattr(layout, "meta", {}) or {}

    def tick_label(domain, t):
        if not domain:
            return None
        lo, hi = domain
        value = lo + (hi - lo) * t
        return f"{value:g}"

    marks: list[Mark] = [
        Mark(f"{vis_id}:axis:x", f"{vis_id}:axis:x", "line",
             {"x1": x_lo, "y1": axis_y, "x2": x_hi, "y2": axis_y},
             {"stroke": "#333333", "strokeWidth": 1}),
        Mark(f"{vis_id}:axis:y", f"{vis_id}:axis:y", "line",
             {"x1": axis_x, "y1": y_lo, "x2": axis_x, "y2": y_hi},
             {"stroke": "#333333", "strokeWidth": 1}),
    ]
    for i in range(_AXIS_TICKS):
        t = i / (_AXIS_TICKS - 1)
        tx = x_lo + (x_hi - x_lo) * t
        ty = y_lo + (y_hi - y_lo) * t
        marks.append(Mark(f"{vis_id}:axis:xt{i}", f"{vis_id}:axis:xt{i}", "line",
                          {"x1": tx, "y1": axis_y, "x2": tx, "y2": axis_y + 4},
                          {"stroke": "#333333", "strokeWidth": 1}))
        marks.append(Mark(f"{vis_id}:axis:yt{i}", f"{vis_id}:axis:yt{i}", "line",
                          {"x1": axis_x - 4, "y1": ty, "x2": axis_x, "y2": ty},
                          {"stroke": "#333333", "strokeWidth": 1}))
        x_label = tick_label(meta.get("x_domain"), t)
        if x_label is not None:
            marks.append(Mark(f"{vis_id}:axis:xl{i}", f"{vis_id}:axis:xl{i}", "text",
                              {"x": tx, "y": axis_y + 14, "text": x_label, "anchor": "middle", "rotate": 0},
                              {"fill": "#333333", "fontSize": 9}))
        y_label = tick_label(meta.get("y_domain"), t)  # y-down: low values at top
        if y_label is not None:
            marks.append(Mark(f"{vis_id}:axis:yl{i}", f"{vis_id}:axis:yl{i}", "text",
                              {"x": axis_x - 6, "y": ty, "text": y_label, "anchor": "end", "rotate": 0},
                              {"fill": "#333333", "fontSize": 9}))
    group.children.extend(marks)


def iter_marks(scene: SceneGroup):
    for child in scene.children:
        if isinstance(child, SceneGroup):
            yield from iter_marks(child)
        else:
            yield child
