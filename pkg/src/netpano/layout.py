"""Layouts: geometric, table, procedural, induced, plus overlap-removal
transforms.

Every layout maps element ids to bounding boxes in canvas pixels (y grows
downward, as in SVG). Angles follow the circular-figure convention: 0 at
12 o'clock, clockwise positive. Procedural layouts are seeded and fully
deterministic; custom procedures can be registered at host level and
addressed by pattern name from specs.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .errors import ExprEvalError, LayoutError, Warnings
from .expr import EvalScope, eval_expression, parse_expression
from .network import Network
from .ordering import Ordering

GEOMETRIC_PATTERNS = ("straight", "grid", "circular", "cartesian", "polar")
PROCEDURAL_PATTERNS = ("force", "tree", "biofabric")


@dataclass
class Box:
    x: float
    y: float
    width: float = 0.0
    height: float = 0.0

    @property
    def cx(self) -> float:
        return self.x + self.width / 2

    @property
    def cy(self) -> float:
        return self.y + self.height / 2

    def moved_center(self, cx: float, cy: float) -> "Box":
        return Box(cx - self.width / 2, cy - self.height / 2, self.width, self.height)

    def as_record(self) -> dict:
        return {"x": self.x, "y": self.y, "width": self.width, "height": self.height}


@dataclass
class Layout:
    name: str
    boxes: dict[str, Box]
    meta: dict = field(default_factory=dict)  # e.g. axis domains for drawAxes

    def box(self, element_id: str) -> Box:
        try:
            return self.boxes[element_id]
        except KeyError:
            raise LayoutError(f"layout {self.name!r} has no box for id {element_id!r}") from None


# --- Channel resolution (shared with encode via this helper) -------------


def resolve_channel(
    channel,
    record: Mapping,
    scales: Mapping[str, Callable],
    parameters: Mapping,
    bounds: Mapping | None = None,
):
    """Resolve a channel descriptor to a value.

    Channels are a constant, {"field": f}, {"expression": e},
    {"parameter": p}, or {"value": v}, each optionally passed through
    {"scale": s}.
    """
    if not isinstance(channel, Mapping):
        return channel
    if "field" in channel:
        if channel["field"] not in record:
            raise LayoutError(f"unknown field {channel['field']!r} in channel")
        value = record[channel["field"]]
    elif "expression" in channel:
        expr = parse_expression(channel["expression"])
        try:
            value = eval_expression(expr, EvalScope(datum=record, bounds=bounds, parameters=parameters))
        except ExprEvalError as e:
            raise LayoutError(f"channel expression {channel['expression']!r}: {e}") from None
    elif "parameter" in channel:
        if channel["parameter"] not in parameters:
            raise LayoutError(f"unknown parameter {channel['parameter']!r} in channel")
        value = parameters[channel["parameter"]]
    elif "value" in channel:
        value = channel["value"]
    else:
        raise LayoutError(f"channel {channel!r} needs field/expression/parameter/value")
    if "scale" in channel:
        scale = scales.get(channel["scale"])
        if scale is None:
            raise LayoutError(f"unknown scale {channel['scale']!r} in channel")
        value = scale(value)
    return value


# --- Space-filling curves -------------------------------------------------


def hilbert_d2xy(side: int, d: int) -> tuple[int, int]:
    """Position of step d on a Hilbert curve over a side×side grid
    (side must be a power of two)."""
    x = y = 0
    t = d
    s = 1
    while s < side:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


def z_d2xy(side: int, d: int) -> tuple[int, int]:
    """Morton (z-curve) position: x from even bits, y from odd bits."""
    x = y = 0
    bit = 0
    while d:
        x |= (d & 1) << bit
        d >>= 1
        y |= (d & 1) << bit
        d >>= 1
        bit += 1
    return x, y


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


# --- Geometric layouts ------------------------------------------------------


def _ordered_ids(element_ids: list[str], ordering: Ordering | None, layout_name: str) -> list[str]:
    if ordering is None:
        return element_ids
    for element_id in element_ids:
        if element_id not in ordering.map:
            raise LayoutError(
                f"layout {layout_name!r}: ordering {ordering.name!r} does not cover {element_id!r}"
            )
    return sorted(element_ids, key=lambda i: (ordering.map[i], i))


def compute_geometric_layout(
    spec: Mapping,
    elements: list[tuple[str, dict]],
    ordering: Ordering | None,
    canvas: Box,
    scales: Mapping[str, Callable],
    parameters: Mapping,
) -> Layout:
    name = spec["name"]
    pattern = spec["pattern"]
    ids = [e[0] for e in elements]
    records = dict(elements)
    ids = _ordered_ids(ids, ordering, name)
    m = len(ids)
    boxes: dict[str, Box] = {}

    if pattern == "straight":
        vertical = spec.get("orientation", "horizontal") == "vertical"
        for k, element_id in enumerate(ids):
            t = 0.5 if m == 1 else k / (m - 1)
            if vertical:
                boxes[element_id] = Box(canvas.x + canvas.width / 2, canvas.y + t * canvas.height)
            else:
                boxes[element_id] = Box(canvas.x + t * canvas.width, canvas.y + canvas.height / 2)

    elif pattern == "grid":
        curve = spec.get("curve", "row-major")
        if curve not in ("row-major", "hilbert", "z"):
            raise LayoutError(f"layout {name!r}: unknown grid curve {curve!r}")
        side = max(1, math.ceil(math.sqrt(m)))
        if curve in ("hilbert", "z"):
            side = _next_pow2(side)
        cw, ch = canvas.width / side, canvas.height / side
        for k, element_id in enumerate(ids):
            if curve == "row-major":
                gx, gy = k % side, k // side
            elif curve == "hilbert":
                gx, gy = hilbert_d2xy(side, k)
            else:
                gx, gy = z_d2xy(side, k)
            boxes[element_id] = Box(canvas.x + gx * cw, canvas.y + gy * ch, cw, ch)

    elif pattern == "circular":
        shape = spec.get("shape", "single")
        cx, cy = canvas.cx, canvas.cy
        radius = spec.get("radius", 0.4 * min(canvas.width, canvas.height))
        if shape == "single":
            for k, element_id in enumerate(ids):
                theta = -math.pi / 2 + 2 * math.pi * k / m
                boxes[element_id] = Box(cx + radius * math.cos(theta), cy + radius * math.sin(theta))
        elif shape == "spiral":
            turns = spec.get("turns", 2)
            inner = spec.get("innerRadius", 0.1 * radius)
            for k, element_id in enumerate(ids):
                t = 0.0 if m == 1 else k / (m - 1)
                theta = -math.pi / 2 + 2 * math.pi * turns * t
                r = inner + (radius - inner) * t
                boxes[element_id] = Box(cx + r * math.cos(theta), cy + r * math.sin(theta))
        elif shape == "sectors":
            rings = spec.get("numSegments", 2)
            capacity = math.ceil(m / rings)
            for k, element_id in enumerate(ids):
                ring, slot = divmod(k, capacity)
                in_ring = min(capacity, m - ring * capacity)
                r = radius * (ring + 1) / rings
                theta = -math.pi / 2 + 2 * math.pi * slot / max(in_ring, 1)
                boxes[element_id] = Box(cx + r * math.cos(theta), cy + r * math.sin(theta))
        else:
            raise LayoutError(f"layout {name!r}: unknown circular shape {shape!r}")

    elif pattern == "cartesian":
        xs, x_explicit = _channel_positions(spec, "x", ids, records, scales, parameters, name)
        ys, y_explicit = _channel_positions(spec, "y", ids, records, scales, parameters, name)
        meta: dict[str, Any] = {}
        if not x_explicit and xs:
            meta["x_domain"] = (min(xs.values()), max(xs.values()))
        if not y_explicit and ys:
            meta["y_domain"] = (min(ys.values()), max(ys.values()))
        xs = _fit_axis(xs, canvas.x, canvas.width, explicit=x_explicit)
        ys = _fit_axis(ys, canvas.y, canvas.height, explicit=y_explicit)
        for element_id in ids:
            boxes[element_id] = Box(xs[element_id], ys[element_id])
        _check_finite(boxes, name)
        return Layout(name, boxes, meta)

    elif pattern == "polar":
        angles, _ = _channel_positions(spec, "angle", ids, records, scales, parameters, name,
                                       categorical_span=360.0)
        radii, _ = _channel_positions(spec, "radius", ids, records, scales, parameters, name,
                                      categorical_span=0.4 * min(canvas.width, canvas.height))
        cx, cy = canvas.cx, canvas.cy
        for element_id in ids:
            theta = math.radians(angles[element_id]) - math.pi / 2
            r = radii[element_id]
            boxes[element_id] = Box(cx + r * math.cos(theta), cy + r * math.sin(theta))

    else:
        raise LayoutError(f"layout {name!r}: unknown pattern {pattern!r}")

    _check_finite(boxes, name)
    return Layout(name, boxes)


def _channel_positions(spec, channel_name, ids, records, scales, parameters, layout_name,
                       categorical_span: float | None = None) -> tuple[dict, bool]:
    """Resolve a positional channel for every element.

    Returns (id -> number, explicit). `explicit` means the values are
    already in pixel space (a scale was applied, or the channel is a
    constant) and must not be auto-rescaled. Categorical values map to
    evenly spaced positions in first-appearance order.
    """
    channel = spec.get(channel_name)
    if channel is None:
        raise LayoutError(f"layout {layout_name!r}: pattern requires channel {channel_name!r}")
    values = {}
    for element_id in ids:
        try:
            values[element_id] = resolve_channel(channel, records[element_id], scales, parameters)
        except LayoutError as e:
            raise LayoutError(f"layout {layout_name!r}: {e}") from None

    if any(v is None for v in values.values()):
        raise LayoutError(f"layout {layout_name!r}: null value in channel {channel_name!r}")
    explicit = not isinstance(channel, Mapping) or "scale" in channel
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values.values()):
        return values, explicit
    # categorical: distinct values in first-appearance order, evenly spaced
    seen: dict[Any, int] = {}
    for element_id in ids:
        if not isinstance(values[element_id], str):
            raise LayoutError(
                f"layout {layout_name!r}: channel {channel_name!r} mixes numbers and non-numbers"
            )
        seen.setdefault(values[element_id], len(seen))
    k = len(seen)
    out = {}
    for element_id in ids:
        i = seen[values[element_id]]
        if categorical_span is None:
            out[element_id] = float(i)  # ordinal index; _fit_axis spreads it
        elif channel_name == "angle":
            out[element_id] = categorical_span * i / max(k, 1)
        else:
            out[element_id] = categorical_span * (i + 1) / k
    return out, categorical_span is not None


def _fit_axis(values: dict, origin: float, extent: float, explicit: bool) -> dict:
    if explicit:
        return values
    numbers = [float(v) for v in values.values()]
    lo, hi = min(numbers), max(numbers)
    margin = 0.05 * extent
    if hi == lo:
        return {k: origin + extent / 2 for k in values}
    return {
        k: origin + margin + (float(v) - lo) / (hi - lo) * (extent - 2 * margin)
        for k, v in values.items()
    }


def _check_finite(boxes: dict[str, Box], name: str) -> None:
    for element_id, box in boxes.items():
        if not all(math.isfinite(v) for v in (box.x, box.y, box.width, box.height)):
            raise LayoutError(f"layout {name!r}: non-finite box for {element_id!r}")


# --- Table layout ------------------------------------------------------------


@dataclass
class TableLayout:
    """An adjacency-matrix style layout plus its implicit cell grouping."""

    name: str
    layout: Layout
    cells: list[dict]  # cell records, one per (row,col) pair
    row_ids: list[str]
    col_ids: list[str]
    origin: tuple[float, float]
    cell_size: tuple[float, float]


def cell_id(row_key: str, col_key: str) -> str:
    return f"{row_key}|{col_key}"


def compute_table_layout(
    spec: Mapping,
    link_elements: list[tuple[str, dict]],
    row_order: Ordering,
    col_order: Ordering,
    canvas: Box,
    warnings: Warnings,
) -> TableLayout:
    name = spec["name"]
    if spec.get("symmetric", False) and row_order.name != col_order.name:
        raise LayoutError(f"table {name!r}: symmetric tables need rowOrder == colOrder")

    row_field = spec.get("rowField", "source")
    col_field = spec.get("colField", "target")
    origin_x = spec.get("x", canvas.x)
    origin_y = spec.get("y", canvas.y)
    width = spec.get("width", canvas.width - (origin_x - canvas.x))
    height = spec.get("height", canvas.height - (origin_y - canvas.y))

    row_ids = row_order.ids_in_order()
    col_ids = col_order.ids_in_order()
    n_rows, n_cols = len(row_ids), len(col_ids)
    if n_rows == 0 or n_cols == 0:
        raise LayoutError(f"table {name!r}: empty row/col ordering")
    cw, ch = width / n_cols, height / n_rows

    grouped: dict[tuple[str, str], list[dict]] = {}
    for link_id, record in link_elements:
        row_key = record.get(row_field)
        col_key = record.get(col_field)
        if row_key is None or col_key is None:
            raise LayoutError(f"table {name!r}: link {link_id!r} missing {row_field!r}/{col_field!r}")
        row_key, col_key = str(row_key), str(col_key)
        if row_key not in row_order.map:
            raise LayoutError(f"table {name!r}: endpoint {row_key!r} missing from ordering {row_order.name!r}")
        if col_key not in col_order.map:
            raise LayoutError(f"table {name!r}: endpoint {col_key!r} missing from ordering {col_order.name!r}")
        grouped.setdefault((row_key, col_key), []).append(record)

    cells: list[dict] = []
    boxes: dict[str, Box] = {}

    def add_cell(row_key: str, col_key: str, members: list[dict]):
        i = row_order.map[row_key]
        j = col_order.map[col_key]
        cid = cell_id(row_key, col_key)
        box = Box(origin_x + j * cw, origin_y + i * ch, cw, ch)
        boxes[cid] = box
        record = {
            "id": cid,
            "row": row_key,
            "col": col_key,
            "rowIndex": i,
            "colIndex": j,
            "count": len(members),
        }
        if members:
            for k, v in members[0].items():
                record.setdefault(k, v)
            record["id"] = cid
        cells.append(record)

    if spec.get("fullGrid", False):
        for row_key in row_ids:
            for col_key in col_ids:
                add_cell(row_key, col_key, grouped.get((row_key, col_key), []))
    else:
        for (row_key, col_key), members in grouped.items():
            add_cell(row_key, col_key, members)

    return TableLayout(
        name=name,
        layout=Layout(name, boxes),
        cells=cells,
        row_ids=row_ids,
        col_ids=col_ids,
        origin=(origin_x, origin_y),
        cell_size=(cw, ch),
    )


# --- Procedural layouts --------------------------------------------------------

_FORCE_ITERATIONS = 300

custom_layouts: dict[str, Callable] = {}


def register_layout(pattern: str, fn: Callable) -> None:
    """Host-level escape hatch: registers fn(network, canvas, options,
    seed) -> {node id: (x, y)} under a new pattern name."""
    custom_layouts[pattern] = fn


def compute_procedural_layout(
    spec: Mapping,
    network: Network,
    canvas: Box,
    warnings: Warnings,
    seed: int = 0,
) -> Layout:
    name = spec["name"]
    pattern = spec["pattern"]
    seed = spec.get("seed", seed)
    if pattern == "force":
        boxes = _force_layout(network, canvas, seed)
    elif pattern == "tree":
        boxes = _tree_layout(network, canvas, spec.get("root"), warnings)
    elif pattern == "biofabric":
        boxes = _biofabric_layout(network, canvas)
    elif pattern in custom_layouts:
        raw = custom_layouts[pattern](network, canvas, dict(spec), seed)
        boxes = {
            element_id: (pos if isinstance(pos, Box) else Box(pos[0], pos[1]))
            for element_id, pos in raw.items()
        }
    else:
        raise LayoutError(f"layout {name!r}: unknown procedural pattern {pattern!r}")
    _check_finite(boxes, name)
    return Layout(name, boxes)


def _force_layout(network: Network, canvas: Box, seed: int) -> dict[str, Box]:
    """Fruchterman-Reingold with a linear cooling schedule, rescaled into
    the canvas with a 5% margin."""
    ids = [n.id for n in network.nodes]
    n = len(ids)
    if n == 0:
        return {}
    index = {element_id: i for i, element_id in enumerate(ids)}
    rng = np.random.Generator(np.random.PCG64(seed))
    pos = rng.random((n, 2)) * [canvas.width, canvas.height]
    if n == 1:
        return {ids[0]: Box(canvas.cx, canvas.cy)}

    edges = [
        (index[l.source], index[l.target])
        for l in network.links
        if l.source != l.target
    ]
    area = canvas.width * canvas.height
    k = math.sqrt(area / n)
    t0 = 0.1 * math.hypot(canvas.width, canvas.height)

    for it in range(_FORCE_ITERATIONS):
        t = t0 * (1 - it / _FORCE_ITERATIONS)
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((delta ** 2).sum(axis=2))
        np.fill_diagonal(dist, 1.0)
        dist = np.maximum(dist, 0.01)
        # repulsion k^2/d between all pairs
        force = (k * k) / dist
        np.fill_diagonal(force, 0.0)
        disp = (delta / dist[:, :, None] * force[:, :, None]).sum(axis=1)
        # attraction d^2/k along links
        for s, u in edges:
            d_vec = pos[s] - pos[u]
            d_len = max(math.hypot(*d_vec), 0.01)
            pull = (d_len * d_len / k) * (d_vec / d_len)
            disp[s] -= pull
            disp[u] += pull
        lengths = np.sqrt((disp ** 2).sum(axis=1))
        lengths = np.maximum(lengths, 1e-12)
        capped = np.minimum(lengths, t)
        pos = pos + disp / lengths[:, None] * capped[:, None]

    return _rescaled_points(ids, pos, canvas)


def _rescaled_points(ids, pos, canvas: Box) -> dict[str, Box]:
    lo = pos.min(axis=0)
    hi = pos.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    margin = 0.05
    scaled = (pos - lo) / span
    xs = canvas.x + (margin + scaled[:, 0] * (1 - 2 * margin)) * canvas.width
    ys = canvas.y + (margin + scaled[:, 1] * (1 - 2 * margin)) * canvas.height
    return {element_id: Box(float(x), float(y)) for element_id, x, y in zip(ids, xs, ys)}


def _tree_layout(network: Network, canvas: Box, root: str | None, warnings: Warnings) -> dict[str, Box]:
    ids = [n.id for n in network.nodes]
    if not ids:
        return {}
    neighbors: dict[str, list[str]] = {i: [] for i in ids}
    n_links = 0
    for link in network.links:
        if link.source == link.target:
            continue
        neighbors[link.source].append(link.target)
        neighbors[link.target].append(link.source)
        n_links += 1

    depth: dict[str, int] = {}
    order: list[str] = []
    roots = [root] if root is not None and root in neighbors else []
    visited: set[str] = set()
    for start in roots + sorted(ids):
        if start in visited:
            continue
        depth[start] = 0
        visited.add(start)
        queue = deque([start])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in sorted(neighbors[v]):
                if w not in visited:
                    visited.add(w)
                    depth[w] = depth[v] + 1
                    queue.append(w)

    if n_links > len(ids) - 1:
        warnings.warn("tree layout: graph has cycles; using BFS spanning tree")

    max_depth = max(depth.values())
    by_depth: dict[int, list[str]] = {}
    for element_id in order:
        by_depth.setdefault(depth[element_id], []).append(element_id)
    boxes = {}
    for d, layer in by_depth.items():
        y = canvas.y + (d + 0.5) * canvas.height / (max_depth + 1)
        m = len(layer)
        for k, element_id in enumerate(layer):
            x = canvas.x + (k + 0.5) * canvas.width / m
            boxes[element_id] = Box(x, y)
    return boxes


def _biofabric_layout(network: Network, canvas: Box) -> dict[str, Box]:
    """Nodes as horizontal lines on degree-ordered rows; links as vertical
    segments on columns ordered by (top endpoint row, bottom endpoint row)."""
    degree = {n.id: 0 for n in network.nodes}
    for link in network.links:
        degree[link.source] += 1
        degree[link.target] += 1
    rows = sorted(degree, key=lambda i: (-degree[i], i))
    row_of = {element_id: r for r, element_id in enumerate(rows)}
    n_rows = len(rows)

    links = [l for l in network.links]
    links.sort(key=lambda l: (min(row_of[l.source], row_of[l.target]),
                              max(row_of[l.source], row_of[l.target]), l.id))
    n_cols = max(len(links), 1)

    row_y = {element_id: canvas.y + (r + 0.5) * canvas.height / max(n_rows, 1)
             for element_id, r in row_of.items()}
    col_x = [canvas.x + (c + 0.5) * canvas.width / n_cols for c in range(len(links))]

    node_cols: dict[str, list[float]] = {element_id: [] for element_id in rows}
    boxes: dict[str, Box] = {}
    for c, link in enumerate(links):
        y_top = min(row_y[link.source], row_y[link.target])
        y_bot = max(row_y[link.source], row_y[link.target])
        boxes[link.id] = Box(col_x[c], y_top, 0.0, y_bot - y_top)
        node_cols[link.source].append(col_x[c])
        node_cols[link.target].append(col_x[c])
    for element_id in rows:
        cols = node_cols[element_id]
        if cols:
            boxes[element_id] = Box(min(cols), row_y[element_id], max(cols) - min(cols), 0.0)
        else:
            boxes[element_id] = Box(canvas.x, row_y[element_id], 0.0, 0.0)
    return boxes


# --- Induced layouts --------------------------------------------------------


def compute_induced_layout(
    spec: Mapping,
    base: Layout,
    link_elements: list[tuple[str, dict]],
) -> Layout:
    """Derive positions from another layout, e.g. link midpoints for
    placing glyphs along edges."""
    name = spec["name"]
    rule = spec.get("rule", "midpoint")
    if rule == "midpoint":
        t = 0.5
    elif rule == "source":
        t = 0.0
    elif rule == "target":
        t = 1.0
    elif rule == "fraction":
        t = float(spec.get("t", 0.5))
    else:
        raise LayoutError(f"layout {name!r}: unknown induced rule {rule!r}")

    boxes = {}
    for link_id, record in link_elements:
        source, target = record.get("source"), record.get("target")
        if source not in base.boxes or target not in base.boxes:
            raise LayoutError(f"layout {name!r}: link {link_id!r} endpoint missing from base layout")
        a, b = base.boxes[source], base.boxes[target]
        boxes[link_id] = Box(a.cx + (b.cx - a.cx) * t, a.cy + (b.cy - a.cy) * t)
    return Layout(name, boxes)


# --- Layout transforms --------------------------------------------------------


def apply_layout_transform(layout: Layout, step: Mapping, seed: int = 0) -> Layout:
    kind = step.get("type")
    if kind == "offset":
        return _lt_offset(layout, step)
    if kind == "jitter":
        return _lt_jitter(layout, step, seed)
    if kind == "beeswarm":
        return _lt_beeswarm(layout, step)
    raise LayoutError(f"unknown layout transform {kind!r}")


def _lt_offset(layout: Layout, step: Mapping) -> Layout:
    axis = step.get("axis", "y")
    gap = float(step.get("gap", 5.0))
    seen: dict[tuple[float, float], int] = {}
    boxes = {}
    for element_id, box in layout.boxes.items():
        key = (round(box.cx, 9), round(box.cy, 9))
        k = seen.get(key, 0)
        seen[key] = k + 1
        dx, dy = (gap * k, 0.0) if axis == "x" else (0.0, gap * k)
        boxes[element_id] = Box(box.x + dx, box.y + dy, box.width, box.height)
    return Layout(layout.name, boxes)


def _lt_jitter(layout: Layout, step: Mapping, seed: int) -> Layout:
    axis = step.get("axis", "both")
    amplitude = float(step.get("amplitude", 5.0))
    rng = random.Random(step.get("seed", seed))
    boxes = {}
    for element_id, box in layout.boxes.items():
        dx = rng.uniform(-amplitude, amplitude) if axis in ("x", "both") else 0.0
        dy = rng.uniform(-amplitude, amplitude) if axis in ("y", "both") else 0.0
        boxes[element_id] = Box(box.x + dx, box.y + dy, box.width, box.height)
    return Layout(layout.name, boxes)


def _lt_beeswarm(layout: Layout, step: Mapping) -> Layout:
    """Greedy swarm: preserve the ordered axis, push along the free axis
    until circles of the given radius no longer overlap."""
    axis = step.get("axis", "x")  # the preserved axis
    radius = float(step.get("radius", 5.0))
    items = sorted(layout.boxes.items(), key=lambda kv: (kv[1].cx if axis == "x" else kv[1].cy, kv[0]))
    placed: list[tuple[float, float]] = []
    boxes = {}
    for element_id, box in items:
        keep = box.cx if axis == "x" else box.cy
        base = box.cy if axis == "x" else box.cx
        k = 0
        while True:
            # candidate offsets: 0, +r, -r, +2r, -2r, ...
            offset = 0.0 if k == 0 else ((k + 1) // 2) * radius * (1 if k % 2 == 1 else -1)
            free = base + offset
            point = (keep, free) if axis == "x" else (free, keep)
            if all(math.hypot(point[0] - p[0], point[1] - p[1]) >= 2 * radius - 1e-9 for p in placed):
                break
            k += 1
        placed.append(point)
        if axis == "x":
            boxes[element_id] = box.moved_center(keep, free)
        else:
            boxes[element_id] = box.moved_center(free, keep)
    return Layout(layout.name, boxes)


def apply_manual_positions(layout: Layout, overrides: Mapping[str, tuple[float, float]]) -> Layout:
    """Apply drag overrides: each box is re-centered on its stored position."""
    if not overrides:
        return layout
    boxes = dict(layout.boxes)
    for element_id, (cx, cy) in overrides.items():
        if element_id in boxes:
            boxes[element_id] = boxes[element_id].moved_center(cx, cy)
    return Layout(layout.name, boxes)
