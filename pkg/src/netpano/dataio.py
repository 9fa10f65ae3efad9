"""Data loading and table transforms.

Tables are ordered lists of records. Loading normalizes every row onto the
table's field universe (missing fields become explicit nulls), infers
column types, and then applies the spec's transform steps in order. All
transforms are copy-on-write: the input table is never mutated, so full
re-evaluation of a pipeline is always safe.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import random
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from . import jsonc
from .errors import DataError, ExprEvalError, Warnings
from .expr import EvalScope, eval_expression, parse_expression
from .graphformats import GraphDocument, parse_graphml, parse_pajek

CACHE_FILENAME = ".netpano-cache.json"
CACHE_DIR_ENV = "NETPANO_CACHE_DIR"

_INT_RE = re.compile(r"[+-]?\d+")


@dataclass
class DataTable:
    name: str
    rows: list[dict[str, Any]]
    field_types: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.field_types:
            self.rows = _normalize_rows(self.rows)
            self.field_types = infer_field_types(self.rows)

    @property
    def fields(self) -> list[str]:
        return list(self.field_types)

    def with_rows(self, rows: list[dict[str, Any]]) -> "DataTable":
        return DataTable(self.name, rows, field_types={})  # re-normalize + re-infer


def _normalize_rows(rows: list[dict]) -> list[dict]:
    universe: dict[str, None] = {}
    for row in rows:
        for key in row:
            universe.setdefault(key, None)
    return [{key: row.get(key) for key in universe} for row in rows]


def infer_field_types(rows: list[dict]) -> dict[str, str]:
    """Column-global inference: number if every non-null value is numeric,
    boolean if every non-null value is boolean, otherwise string."""
    types: dict[str, str] = {}
    for row in rows:
        for key, value in row.items():
            if value is None:
                types.setdefault(key, "null")
                continue
            if isinstance(value, bool):
                t = "boolean"
            elif isinstance(value, (int, float)):
                t = "number"
            elif isinstance(value, str):
                t = "string"
            else:
                t = "object"
            prev = types.get(key)
            if prev is None or prev == "null":
                types[key] = t
            elif prev != t:
                types[key] = "string"
    return types


# --- Fetching ----------------------------------------------------------


class FileFetcher:
    """Resolves data URLs against a root directory.

    With `sandboxed=True` (the HTTP service), absolute paths and paths that
    escape the root are rejected.
    """

    def __init__(self, root: str | Path = ".", sandboxed: bool = False):
        self.root = Path(root).resolve()
        self.sandboxed = sandboxed

    def __call__(self, url: str) -> str:
        path = Path(url)
        if path.is_absolute():
            if self.sandboxed:
                raise DataError(f"absolute data paths are not allowed: {url}")
            target = path
        else:
            target = (self.root / path).resolve()
            if self.sandboxed and self.root not in target.parents and target != self.root:
                raise DataError(f"data path escapes the asset root: {url}")
        try:
            return target.read_text(encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot read {url!r}: {e}") from None


# --- Cache store (stand-in for browser LocalStorage) --------------------


class CacheStore:
    """Single-file key→value store in the working directory.

    Writes are serialized by a lock and performed atomically (tmp + rename)
    so concurrent loads never observe a torn file.
    """

    def __init__(self, directory: str | Path | None = None):
        base = Path(directory or os.environ.get(CACHE_DIR_ENV) or ".")
        self.path = base / CACHE_FILENAME
        self._lock = threading.Lock()

    def _read_all(self) -> dict:
        try:
            return json.loads(self.path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return {}
        except json.JSONDecodeError:
            raise DataError(f"corrupt cache file {self.path}") from None

    def get(self, key: str):
        return self._read_all().get(key)

    def set(self, key: str, value) -> None:
        with self._lock:
            data = self._read_all()
            data[key] = value
            tmp = self.path.with_suffix(".tmp")
            tmp.write_text(json.dumps(data, sort_keys=True, indent=1), encoding="utf-8")
            tmp.replace(self.path)


# --- Geocoding ----------------------------------------------------------

# Offline fixture: place name -> (lat, lon). Deliberately small; users plug
# in their own provider for real lookups.
FIXTURE_PLACES: dict[str, tuple[float, float]] = {
    "london": (51.5074, -0.1278),
    "edinburgh": (55.9533, -3.1883),
    "paris": (48.8566, 2.3522),
    "berlin": (52.52, 13.405),
    "new york": (40.7128, -74.006),
    "tokyo": (35.6762, 139.6503),
    "sydney": (-33.8688, 151.2093),
    "nairobi": (-1.2921, 36.8219),
    "sao paulo": (-23.5505, -46.6333),
    "reykjavik": (64.1466, -21.9426),
}


class FixtureGeocoder:
    """Offline place→coordinates provider backed by a literal table."""

    def __init__(self, table: Mapping[str, tuple[float, float]] | None = None):
        self.table = {k.lower(): v for k, v in (table or FIXTURE_PLACES).items()}

    def resolve(self, place: str) -> tuple[float, float] | None:
        return self.table.get(place.strip().lower())


# --- Loading ------------------------------------------------------------

_FORMAT_BY_EXT = {
    ".json": "json",
    ".csv": "csv",
    ".graphml": "graphml",
    ".net": "pajek",
    ".paj": "pajek",
}


def load_data(
    spec: Mapping,
    fetcher: Callable[[str], str],
    cache: CacheStore,
    warnings: Warnings,
    parameters: Mapping | None = None,
    geocoder=None,
    tables: Mapping[str, DataTable] | None = None,
) -> DataTable | GraphDocument:
    """Evaluate one data construct into a DataTable (or a GraphDocument
    for graph file formats, which network construction consumes directly)."""
    name = spec["name"]
    sources = [k for k in ("values", "url", "cache") if k in spec]
    if len(sources) != 1:
        raise DataError(f"data {name!r} must have exactly one of values/url/cache")
    source = sources[0]

    if source == "values":
        rows = spec["values"]
        if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
            raise DataError(f"data {name!r}: inline values must be a list of objects")
        fmt = spec.get("format", "json")
        if fmt != "json":
            raise DataError(f"data {name!r}: inline values only support json format")
        table: DataTable | GraphDocument = DataTable(name, [dict(r) for r in rows])
    elif source == "cache":
        key = spec["cache"]
        rows = cache.get(key)
        if rows is None:
            raise DataError(f"data {name!r}: cache key {key!r} not found")
        table = DataTable(name, [dict(r) for r in rows])
    else:
        url = spec["url"]
        fmt = spec.get("format")
        if fmt is None:
            fmt = _FORMAT_BY_EXT.get(Path(url).suffix.lower())
        if fmt is None:
            raise DataError(f"data {name!r}: cannot infer format of {url!r}; set \"format\"")
        text = fetcher(url)
        if fmt == "json":
            rows = jsonc.loads(text)
            if not isinstance(rows, list):
                raise DataError(f"data {name!r}: JSON source must be an array of objects")
            table = DataTable(name, rows)
        elif fmt == "csv":
            table = DataTable(name, parse_csv(text))
        elif fmt == "graphml":
            table = parse_graphml(text)
        elif fmt == "pajek":
            table = parse_pajek(text)
        else:
            raise DataError(f"data {name!r}: unknown format {fmt!r}")

    steps = spec.get("transform", [])
    if steps and isinstance(table, GraphDocument):
        raise DataError(f"data {name!r}: transforms do not apply to graph-format sources")
    for step in steps:
        table = apply_transform(
            table, step, warnings,
            parameters=parameters, cache=cache, geocoder=geocoder, tables=tables,
        )
    return table


def parse_csv(text: str) -> list[dict]:
    """RFC-4180 subset: comma separator, double-quote quoting, header row.
    All-numeric columns are converted to numbers; empty cells become null."""
    reader = csv.reader(io.StringIO(text))
    try:
        rows = list(reader)
    except csv.Error as e:
        raise DataError(f"malformed CSV: {e}") from None
    if not rows:
        raise DataError("empty CSV input")
    header = rows[0]
    records: list[dict] = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"ragged CSV row {i}: expected {len(header)} cells, got {len(row)}")
        records.append(dict(zip(header, row)))

    # Column-global numeric conversion.
    for col in header:
        parsed = []
        numeric = True
        for rec in records:
            raw = rec[col]
            if raw == "":
                parsed.append(None)
                continue
            try:
                value = int(raw) if _INT_RE.fullmatch(raw.strip()) else float(raw)
            except ValueError:
                numeric = False
                break
            parsed.append(value)
        if numeric:
            for rec, value in zip(records, parsed):
                rec[col] = value
        else:
            for rec in records:
                if rec[col] == "":
                    rec[col] = None
    return records


# --- Transforms ---------------------------------------------------------


def apply_transform(
    table: DataTable,
    step: Mapping,
    warnings: Warnings,
    parameters: Mapping | None = None,
    cache: CacheStore | None = None,
    geocoder=None,
    tables: Mapping[str, DataTable] | None = None,
) -> DataTable:
    kind = step.get("type")
    handler = _TRANSFORMS.get(kind)
    if handler is None:
        raise DataError(f"unknown data transform {kind!r}")
    ctx = _TransformContext(warnings, parameters or {}, cache, geocoder, tables or {})
    return handler(table, step, ctx)


@dataclass
class _TransformContext:
    warnings: Warnings
    parameters: Mapping
    cache: CacheStore | None
    geocoder: Any
    tables: Mapping[str, DataTable]


def _scope(row: dict, ctx: _TransformContext) -> EvalScope:
    return EvalScope(datum=row, parameters=ctx.parameters)


def _require_field(table: DataTable, name: str, step_kind: str) -> None:
    if name not in table.field_types:
        raise DataError(f"{step_kind}: field {name!r} not in table {table.name!r}")


def _t_add_index(table, step, ctx):
    output = step.get("output", "index")
    rows = [{**row, output: i} for i, row in enumerate(table.rows)]
    return table.with_rows(rows)


def _t_calculate(table, step, ctx):
    output = step.get("output")
    if not output:
        raise DataError("calculate: missing \"output\" field name")
    expr = parse_expression(step["expression"])
    rows = []
    for row in table.rows:
        try:
            value = eval_expression(expr, _scope(row, ctx))
        except ExprEvalError as e:
            raise DataError(f"calculate {output!r}: {e}") from None
        rows.append({**row, output: value})
    return table.with_rows(rows)


def _t_filter(table, step, ctx):
    expr = parse_expression(step["expression"])
    rows = []
    for row in table.rows:
        try:
            keep = eval_expression(expr, _scope(row, ctx))
        except ExprEvalError as e:
            raise DataError(f"filter: {e}") from None
        if not isinstance(keep, bool):
            raise DataError("filter: expression must evaluate to a boolean")
        if keep:
            rows.append(dict(row))
    return table.with_rows(rows)


def _t_bin(table, step, ctx):
    fld = step["field"]
    _require_field(table, fld, "bin")
    width = step.get("step")
    if not isinstance(width, (int, float)) or isinstance(width, bool) or width <= 0:
        raise DataError("bin: \"step\" must be a positive number")
    base = step.get("base", 0)
    rows = []
    for row in table.rows:
        value = row[fld]
        if value is None:
            rows.append({**row, "binStart": None, "binEnd": None})
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DataError(f"bin: non-numeric value {value!r} in field {fld!r}")
        k = math.floor((value - base) / width)
        rows.append({**row, "binStart": base + k * width, "binEnd": base + (k + 1) * width})
    return table.with_rows(rows)


def _t_sample(table, step, ctx):
    size = step.get("size")
    if not isinstance(size, int) or isinstance(size, bool) or size < 0:
        raise DataError("sample: \"size\" must be a non-negative integer")
    seed = step.get("seed", 0)
    if size >= len(table.rows):
        return table.with_rows([dict(r) for r in table.rows])
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(table.rows)), size))
    return table.with_rows([dict(table.rows[i]) for i in picked])


_AGG_OPS = ("sum", "mean", "min", "max", "count")


def _t_aggregate(table, step, ctx):
    group_by = step.get("groupBy", [])
    if isinstance(group_by, str):
        group_by = [group_by]
    for g in group_by:
        _require_field(table, g, "aggregate")
    ops = step.get("ops", [{"op": "count"}])
    groups: dict[tuple, list[dict]] = {}
    for row in table.rows:
        key = tuple(_hashable(row[g]) for g in group_by)
        groups.setdefault(key, []).append(row)
    out_rows = []
    for key, members in groups.items():
        out = {g: members[0][g] for g in group_by}
        for op_spec in ops:
            op = op_spec.get("op")
            if op not in _AGG_OPS:
                raise DataError(f"aggregate: unknown op {op!r}")
            if op == "count":
                out[op_spec.get("output", "count")] = len(members)
                continue
            fld = op_spec.get("field")
            if fld is None:
                raise DataError(f"aggregate: op {op!r} requires a field")
            _require_field(table, fld, "aggregate")
            values = []
            for m in members:
                v = m[fld]
                if v is None:
                    continue
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise DataError(f"aggregate: non-numeric value {v!r} in field {fld!r}")
                values.append(v)
            output = op_spec.get("output", f"{op}_{fld}")
            if not values:
                out[output] = None
            elif op == "sum":
                out[output] = sum(values)
            elif op == "mean":
                out[output] = sum(values) / len(values)
            elif op == "min":
                out[output] = min(values)
            elif op == "max":
                out[output] = max(values)
        out_rows.append(out)
    return table.with_rows(out_rows)


def _hashable(v):
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def _t_flatten(table, step, ctx):
    fld = step["field"]
    _require_field(table, fld, "flatten")
    rows = []
    for row in table.rows:
        value = row[fld]
        if isinstance(value, list):
            for item in value:
                rows.append({**row, fld: item})
        else:
            rows.append(dict(row))
    return table.with_rows(rows)


def _t_fold(table, step, ctx):
    fields = step.get("fields")
    if not fields:
        raise DataError("fold: missing \"fields\" list")
    for f in fields:
        _require_field(table, f, "fold")
    key_out = step.get("keyOutput", "key")
    value_out = step.get("valueOutput", "value")
    rows = []
    for row in table.rows:
        rest = {k: v for k, v in row.items() if k not in fields}
        for f in sorted(fields, key=str):
            rows.append({**rest, key_out: _parse_key(f), value_out: row[f]})
    return table.with_rows(rows)


def _parse_key(text: str):
    # Pivot stringifies keys into column names; fold re-infers numbers so
    # that fold∘pivot round-trips numeric keys.
    if isinstance(text, str):
        if _INT_RE.fullmatch(text):
            return int(text)
        try:
            return float(text)
        except ValueError:
            return text
    return text


def _t_pivot(table, step, ctx):
    key_field = step["key"]
    value_field = step["value"]
    _require_field(table, key_field, "pivot")
    _require_field(table, value_field, "pivot")
    group_fields = [f for f in table.fields if f not in (key_field, value_field)]
    groups: dict[tuple, dict] = {}
    key_columns: dict[str, None] = {}
    for row in table.rows:
        gkey = tuple(_hashable(row[f]) for f in group_fields)
        out = groups.setdefault(gkey, {f: row[f] for f in group_fields})
        column = str(row[key_field])
        if column in out:
            raise DataError(
                f"pivot: duplicate key {row[key_field]!r} within a group of table {table.name!r}"
            )
        key_columns.setdefault(column, None)
        out[column] = row[value_field]
    # Stable column order: sorted key columns appended after group fields.
    columns = group_fields + sorted(key_columns)
    rows = [{c: g.get(c) for c in columns} for g in groups.values()]
    return table.with_rows(rows)


def _t_lookup(table, step, ctx):
    other_name = step["from"]
    other = ctx.tables.get(other_name)
    if other is None:
        raise DataError(f"lookup: unknown table {other_name!r}")
    key = step["key"]
    _require_field(other, key, "lookup")
    on = step.get("on", key)
    _require_field(table, on, "lookup")
    fields = step.get("fields")
    if not fields:
        raise DataError("lookup: missing \"fields\" list")
    for f in fields:
        _require_field(other, f, "lookup")
    index: dict[Any, list[dict]] = {}
    for row in other.rows:
        index.setdefault(_hashable(row[key]), []).append(row)
    rows = []
    warned = False
    for row in table.rows:
        matches = index.get(_hashable(row[on]), [])
        if len(matches) > 1 and not warned:
            ctx.warnings.warn(
                f"lookup into {other_name!r}: multiple matches for some keys; using the first"
            )
            warned = True
        match = matches[0] if matches else {}
        rows.append({**row, **{f: match.get(f) for f in fields}})
    return table.with_rows(rows)


def _t_geocode(table, step, ctx):
    fld = step["field"]
    _require_field(table, fld, "geocode")
    lat_out = step.get("latOutput", "lat")
    lon_out = step.get("lonOutput", "lon")
    provider = ctx.geocoder or FixtureGeocoder()
    rows = []
    for row in table.rows:
        place = row[fld]
        lat = lon = None
        if isinstance(place, str) and place:
            cache_key = f"geocode:{place.strip().lower()}"
            cached = ctx.cache.get(cache_key) if ctx.cache else None
            if cached is not None:
                lat, lon = cached
            else:
                coords = provider.resolve(place)
                if coords is not None:
                    lat, lon = coords
                    if ctx.cache:
                        ctx.cache.set(cache_key, [lat, lon])
                else:
                    ctx.warnings.warn(f"geocode: no coordinates for {place!r}")
        rows.append({**row, lat_out: lat, lon_out: lon})
    return table.with_rows(rows)


_TRANSFORMS = {
    "addIndex": _t_add_index,
    "calculate": _t_calculate,
    "filter": _t_filter,
    "bin": _t_bin,
    "sample": _t_sample,
    "aggregate": _t_aggregate,
    "flatten": _t_flatten,
    "fold": _t_fold,
    "pivot": _t_pivot,
    "lookup": _t_lookup,
    "geocode": _t_geocode,
}

TRANSFORM_KINDS = frozenset(_TRANSFORMS)
