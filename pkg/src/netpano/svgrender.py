"""Deterministic SceneGraph -> SVG serialization.

Numbers use fixed 3-decimal formatting with a '.' separator, attributes
are emitted in a fixed order, and defs (gradients, the arrowhead marker)
get sequential ids assigned in document order, so an identical scene
always serializes to byte-identical text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

from .encode import Mark, SceneGroup

SVG_NS = "http://www.w3.org/2000/svg"


@dataclass
class SvgOutput:
    text: str
    width: float
    height: float
    mark_index: dict[str, str] = field(default_factory=dict)  # mark id -> XML element id
    mark_elements: dict[str, str] = field(default_factory=dict)  # mark id -> data element id
    mark_layouts: dict[str, str] = field(default_factory=dict)  # mark id -> layout name


def fmt(value: float) -> str:
    v = float(value)
    if v == 0:
        v = 0.0  # normalize -0.0
    return f"{v:.3f}"


def _fmt_style_value(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return fmt(value)
    return str(value)


_STYLE_ATTRS = (
    ("fill", "fill"),
    ("stroke", "stroke"),
    ("strokeWidth", "stroke-width"),
    ("strokeDash", "stroke-dasharray"),
    ("opacity", "opacity"),
)


def path_data(commands: list[tuple]) -> str:
    parts = []
    for cmd in commands:
        op = cmd[0]
        if op == "Z":
            parts.append("Z")
        else:
            parts.append(op + " " + " ".join(
                fmt(v) if isinstance(v, float) else str(v) for v in cmd[1:]
            ))
    return " ".join(parts)


class _Serializer:
    def __init__(self):
        self.lines: list[str] = []
        self.defs: list[str] = []
        self.mark_index: dict[str, str] = {}
        self.mark_elements: dict[str, str] = {}
        self.mark_layouts: dict[str, str] = {}
        self._counter = 0
        self._gradient_counter = 0
        self._needs_arrow = False

    def next_id(self) -> str:
        xml_id = f"m{self._counter}"
        self._counter += 1
        return xml_id

    def common_attrs(self, mark: Mark, xml_id: str) -> str:
        attrs = [f'id="{xml_id}"', f"data-id={quoteattr(mark.id)}"]
        if mark.meta.get("tooltip") is not None:
            attrs.append(f"data-tooltip={quoteattr(str(mark.meta['tooltip']))}")
        if mark.meta.get("selectable"):
            attrs.append('data-selectable="true"')
        return " ".join(attrs)

    def style_attrs(self, style: dict, skip: tuple = ()) -> str:
        parts = []
        for key, attr in _STYLE_ATTRS:
            if key in skip:
                continue
            if key in style and style[key] is not None:
                parts.append(f"{attr}={quoteattr(_fmt_style_value(key, style[key]))}")
        return " ".join(parts)

    def emit_mark(self, mark: Mark, indent: str) -> None:
        xml_id = self.next_id()
        self.mark_index[mark.id] = xml_id
        self.mark_elements[mark.id] = mark.element
        if mark.meta.get("layout"):
            self.mark_layouts[mark.id] = mark.meta["layout"]
        common = self.common_attrs(mark, xml_id)
        style = self.style_attrs(mark.style)
        g = mark.geometry

        if mark.kind == "symbol":
            if g.get("shape") == "square":
                r = g["r"]
                self.lines.append(
                    f'{indent}<rect {common} x="{fmt(g["cx"] - r)}" y="{fmt(g["cy"] - r)}" '
                    f'width="{fmt(2 * r)}" height="{fmt(2 * r)}" {style}/>'
                )
            else:
                self.lines.append(
                    f'{indent}<circle {common} cx="{fmt(g["cx"])}" cy="{fmt(g["cy"])}" '
                    f'r="{fmt(g["r"])}" {style}/>'
                )
        elif mark.kind == "rect":
            self.lines.append(
                f'{indent}<rect {common} x="{fmt(g["x"])}" y="{fmt(g["y"])}" '
                f'width="{fmt(g["width"])}" height="{fmt(g["height"])}" {style}/>'
            )
        elif mark.kind == "text":
            transform = ""
            if g.get("rotate"):
                transform = (f' transform="rotate({fmt(g["rotate"])} '
                             f'{fmt(g["x"])} {fmt(g["y"])})"')
            font_size = mark.style.get("fontSize", 11)
            self.lines.append(
                f'{indent}<text {common} x="{fmt(g["x"])}" y="{fmt(g["y"])}" '
                f'text-anchor="{g.get("anchor", "middle")}" dominant-baseline="middle" '
                f'font-size="{fmt(font_size)}" font-family="monospace"{transform} '
                f'{self.style_attrs(mark.style)}>{escape(str(g["text"]))}</text>'
            )
        elif mark.kind == "line":
            self.lines.append(
                f'{indent}<line {common} x1="{fmt(g["x1"])}" y1="{fmt(g["y1"])}" '
                f'x2="{fmt(g["x2"])}" y2="{fmt(g["y2"])}" {style}/>'
            )
        elif mark.kind == "area":
            d = "M " + " L ".join(f"{fmt(x)} {fmt(y)}" for x, y in g["points"]) + " Z"
            self.lines.append(f'{indent}<path {common} d="{d}" {style}/>')
        elif mark.kind == "linkPath":
            stroke_override = None
            extra = ""
            if "gradient" in g:
                grad = g["gradient"]
                grad_id = f"grad{self._gradient_counter}"
                self._gradient_counter += 1
                self.defs.append(
                    f'  <linearGradient id="{grad_id}" gradientUnits="userSpaceOnUse" '
                    f'x1="{fmt(grad["x1"])}" y1="{fmt(grad["y1"])}" '
                    f'x2="{fmt(grad["x2"])}" y2="{fmt(grad["y2"])}">'
                    f'<stop offset="0" stop-color="{grad["from"]}"/>'
                    f'<stop offset="1" stop-color="{grad["to"]}"/></linearGradient>'
                )
                stroke_override = f"url(#{grad_id})"
            if g.get("markerEnd"):
                self._needs_arrow = True
                extra = ' marker-end="url(#arrow)"'
            style_txt = self.style_attrs(mark.style, skip=("stroke",) if stroke_override else ())
            stroke_txt = f' stroke="{stroke_override}"' if stroke_override else ""
            self.lines.append(
                f'{indent}<path {common} d="{path_data(g["path"])}"{stroke_txt} {style_txt}{extra}/>'
            )
        elif mark.kind == "glyphSeries":
            inner = []
            size = g.get("size", 2)
            for x, y in g["points"]:
                if g.get("glyphShape") == "square":
                    inner.append(f'<rect x="{fmt(x - size)}" y="{fmt(y - size)}" '
                                 f'width="{fmt(2 * size)}" height="{fmt(2 * size)}"/>')
                else:
                    inner.append(f'<circle cx="{fmt(x)}" cy="{fmt(y)}" r="{fmt(size)}"/>')
            self.lines.append(
                f'{indent}<g {common} {style}>' + "".join(inner) + "</g>"
            )
        else:
            raise ValueError(f"unknown mark kind {mark.kind!r}")

    def emit_group(self, group: SceneGroup, indent: str) -> None:
        transform = ""
        if group.translate:
            tx, ty = group.translate
            transform = f' transform="translate({fmt(tx)} {fmt(ty)})"'
        self.lines.append(f"{indent}<g data-group={quoteattr(group.id)}{transform}>")
        for child in group.children:
            if isinstance(child, SceneGroup):
                self.emit_group(child, indent + "  ")
            else:
                self.emit_mark(child, indent + "  ")
        self.lines.append(f"{indent}</g>")


def render_svg(scene: SceneGroup, width: float, height: float) -> SvgOutput:
    ser = _Serializer()
    for child in scene.children:
        if isinstance(child, SceneGroup):
            ser.emit_group(child, "  ")
        else:
            ser.emit_mark(child, "  ")

    head = [
        f'<svg xmlns="{SVG_NS}" width="{fmt(width)}" height="{fmt(height)}" '
        f'viewBox="0 0 {fmt(width)} {fmt(height)}">'
    ]
    defs = list(ser.defs)
    if ser._needs_arrow:
        defs.insert(0, (
            '  <marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" '
            'markerWidth="6" markerHeight="6" orient="auto-start-reverse">'
            '<path d="M 0 0 L 10 5 L 0 10 Z"/></marker>'
        ))
    body = []
    if defs:
        body.append("  <defs>")
        body.extend("  " + d for d in defs)
        body.append("  </defs>")
    body.extend(ser.lines)
    text = "\n".join(head + body + ["</svg>"]) + "\n"
    return SvgOutput(
        text=text, width=width, height=height,
        mark_index=ser.mark_index,
        mark_elements=ser.mark_elements,
        mark_layouts=ser.mark_layouts,
    )
