"""Parsers for graph file formats that carry explicit node/link structure.

GraphML (nodes/edges plus <key>/<data> attributes) and Pajek .net
(*Vertices / *Edges / *Arcs sections). Both produce a GraphDocument that
network construction maps directly onto a Network.
"""

from __future__ import annotations

import shlex
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .errors import DataError


@dataclass
class GraphDocument:
    """Raw graph structure decoded from a file, before schema application."""

    nodes: list[dict] = field(default_factory=list)  # each has "id" plus attributes
    links: list[dict] = field(default_factory=list)  # each has "source"/"target" plus attributes
    directed: bool = False


_GRAPHML_NS = "{http://graphml.graphdrawing.org/xmlns}"


def parse_graphml(text: str) -> GraphDocument:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise DataError(f"malformed GraphML: {e}") from None

    ns = _GRAPHML_NS if root.tag.startswith(_GRAPHML_NS) else ""
    graph = root.find(f"{ns}graph")
    if graph is None:
        raise DataError("GraphML file has no <graph> element")

    keys: dict[str, tuple[str, str]] = {}  # key id -> (attr name, attr type)
    for key in root.iter(f"{ns}key"):
        keys[key.get("id", "")] = (key.get("attr.name", key.get("id", "")), key.get("attr.type", "string"))

    def data_attrs(el) -> dict:
        attrs = {}
        for d in el.findall(f"{ns}data"):
            name, typ = keys.get(d.get("key", ""), (d.get("key", ""), "string"))
            raw = (d.text or "").strip()
            if typ in ("int", "long"):
                attrs[name] = int(raw)
            elif typ in ("float", "double"):
                attrs[name] = float(raw)
            elif typ == "boolean":
                attrs[name] = raw.lower() == "true"
            else:
                attrs[name] = raw
        return attrs

    doc = GraphDocument(directed=graph.get("edgedefault", "undirected") == "directed")
    for node in graph.findall(f"{ns}node"):
        nid = node.get("id")
        if nid is None:
            raise DataError("GraphML node without id")
        doc.nodes.append({"id": nid, **data_attrs(node)})
    for edge in graph.findall(f"{ns}edge"):
        src, tgt = edge.get("source"), edge.get("target")
        if src is None or tgt is None:
            raise DataError("GraphML edge without source/target")
        doc.links.append({"source": src, "target": tgt, **data_attrs(edge)})
    return doc


def parse_pajek(text: str) -> GraphDocument:
    doc = GraphDocument()
    section = None
    id_to_label: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if low.startswith("*vertices"):
            section = "vertices"
            continue
        if low.startswith("*edges"):
            section = "edges"
            continue
        if low.startswith("*arcs"):
            section = "arcs"
            doc.directed = True
            continue
        if line.startswith("*"):
            section = None  # unsupported section (e.g. *Matrix); skip its body
            continue
        try:
            parts = shlex.split(line)
        except ValueError:
            raise DataError(f"malformed Pajek line {lineno}: {raw!r}") from None
        if section == "vertices":
            vid = parts[0]
            label = parts[1] if len(parts) > 1 else vid
            id_to_label[vid] = label
            doc.nodes.append({"id": label})
        elif section in ("edges", "arcs"):
            if len(parts) < 2:
                raise DataError(f"malformed Pajek line {lineno}: {raw!r}")
            src = id_to_label.get(parts[0], parts[0])
            tgt = id_to_label.get(parts[1], parts[1])
            link = {"source": src, "target": tgt}
            if len(parts) > 2:
                try:
                    link["weight"] = float(parts[2])
                except ValueError:
                    raise DataError(f"non-numeric Pajek edge weight on line {lineno}") from None
            doc.links.append(link)
    if not doc.nodes and not doc.links:
        raise DataError("Pajek file has no *Vertices/*Edges/*Arcs content")
    return doc
