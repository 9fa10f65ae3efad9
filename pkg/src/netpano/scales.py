"""Scales: map data values to visual values (positions, sizes, colors).

Color schemes are embedded as literal hex lists so output never depends
on an external palette package. Ranges may be written relative to the
parent bounding box ("parent.width" / "parent.height") for nested vis
blocks; those scales are instantiated per parent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .errors import ScaleError, Warnings

# d3's classic categorical palette (public-domain color values).
CATEGORY10 = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]

# Two perceptually ordered sequential ramps.
BLUES = ["#f7fbff", "#c6dbef", "#6baed6", "#2171b5", "#08306b"]
VIRIDIS = ["#440154", "#414487", "#2a788e", "#22a884", "#7ad151", "#fde725"]

SCHEMES: dict[str, list[str]] = {
    "category10": CATEGORY10,
    "blues": BLUES,
    "viridis": VIRIDIS,
}

_HEX_RE = re.compile(r"#([0-9a-fA-F]{6})$")
_PARENT_RE = re.compile(r"parent\.(width|height)$")


def _parse_color(text: str) -> tuple[int, int, int]:
    m = _HEX_RE.match(text)
    if not m:
        raise ScaleError(f"invalid color {text!r} (expected #rrggbb)")
    raw = m.group(1)
    return int(raw[0:2], 16), int(raw[2:4], 16), int(raw[4:6], 16)


def _format_color(rgb: tuple[float, float, float]) -> str:
    r, g, b = (max(0, min(255, int(round(c)))) for c in rgb)
    return f"#{r:02x}{g:02x}{b:02x}"


def interpolate_colors(stops: Sequence[str], t: float) -> str:
    """Piecewise-linear RGB interpolation through `stops` at t in [0,1]."""
    colors = [_parse_color(s) for s in stops]
    if len(colors) == 1:
        return _format_color(colors[0])
    t = min(1.0, max(0.0, t))
    scaled = t * (len(colors) - 1)
    i = min(int(scaled), len(colors) - 2)
    frac = scaled - i
    a, b = colors[i], colors[i + 1]
    return _format_color(tuple(a[k] + (b[k] - a[k]) * frac for k in range(3)))


@dataclass
class ScaleFn:
    """A resolved, pure value->value mapping."""

    name: str
    kind: str  # linear | ordinal | band | sequential
    domain: list
    range: list
    clamp: bool = False
    padding: float = 0.05

    def __call__(self, value):
        if self.kind in ("linear", "sequential"):
            return self._continuous(value)
        if self.kind == "ordinal":
            return self._ordinal(value)
        return self._band(value)

    # position within [0,1] of the linear domain
    def _t(self, value) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScaleError(f"scale {self.name!r}: expected a number, got {value!r}")
        lo, hi = self.domain
        t = (value - lo) / (hi - lo)
        if self.clamp:
            t = min(1.0, max(0.0, t))
        return t

    def _continuous(self, value):
        t = self._t(value)
        if self.kind == "sequential" or isinstance(self.range[0], str):
            return interpolate_colors(self.range, t)
        lo, hi = self.range
        return lo + t * (hi - lo)

    def _ordinal(self, value):
        try:
            i = self.domain.index(value)
        except ValueError:
            if self.clamp:
                i = len(self.domain) - 1
            else:
                raise ScaleError(f"scale {self.name!r}: value {value!r} not in ordinal domain") from None
        return self.range[i % len(self.range)]  # reuse warned at resolve time

    def _band(self, value):
        try:
            i = self.domain.index(value)
        except ValueError:
            raise ScaleError(f"scale {self.name!r}: value {value!r} not in band domain") from None
        lo, hi = self.range
        return lo + (hi - lo) * (i + self.padding) / len(self.domain)

    @property
    def bandwidth(self) -> float:
        if self.kind != "band":
            raise ScaleError(f"scale {self.name!r} is not a band scale")
        lo, hi = self.range
        step = (hi - lo) / len(self.domain)
        return step * (1 - 2 * self.padding)


def resolve_scale(
    spec: Mapping,
    data_values: Mapping[str, list] | None,
    warnings: Warnings,
    parent_bounds: Mapping[str, float] | None = None,
) -> ScaleFn:
    """Instantiate a scale spec into a pure function.

    `data_values` maps "source.field" keys to the column values used for
    data-derived domains (provided by the runtime).
    """
    name = spec["name"]
    kind = spec.get("type", "linear")
    if kind not in ("linear", "ordinal", "band", "sequential"):
        raise ScaleError(f"scale {name!r}: unknown type {kind!r}")

    domain = spec.get("domain")
    if isinstance(domain, Mapping):
        key = f"{domain['data']}.{domain['field']}"
        values = (data_values or {}).get(key)
        if values is None:
            raise ScaleError(f"scale {name!r}: no data for domain {key!r}")
        values = [v for v in values if v is not None]
        if not values:
            raise ScaleError(f"scale {name!r}: empty derived domain from {key!r}")
        if kind in ("linear", "sequential"):
            numeric = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)]
            if len(numeric) != len(values):
                raise ScaleError(f"scale {name!r}: non-numeric values in derived domain {key!r}")
            domain = [min(numeric), max(numeric)]
        else:
            seen: dict[Any, None] = {}
            for v in values:
                seen.setdefault(v, None)
            domain = list(seen)
    elif domain is None:
        raise ScaleError(f"scale {name!r}: missing domain")

    if kind in ("linear", "sequential"):
        if len(domain) != 2 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in domain
        ):
            raise ScaleError(f"scale {name!r}: linear domain must be [min, max]")
        if domain[0] == domain[1]:
            domain = [domain[0], domain[0] + 1]  # degenerate: avoid div by zero
        elif domain[0] > domain[1]:
            raise ScaleError(f"scale {name!r}: domain min must be < max")
    else:
        if len(set(map(str, domain))) != len(domain):
            raise ScaleError(f"scale {name!r}: ordinal domain values must be unique")

    rng = spec.get("range")
    if kind == "sequential" and rng is None:
        rng = spec.get("scheme", "viridis")
    if isinstance(rng, str):
        parent_match = _PARENT_RE.match(rng)
        if parent_match:
            if parent_bounds is None:
                raise ScaleError(f"scale {name!r}: parent-relative range without a parent")
            rng = [0.0, float(parent_bounds[parent_match.group(1)])]
        elif rng in SCHEMES:
            rng = list(SCHEMES[rng])
        else:
            raise ScaleError(f"scale {name!r}: unknown range {rng!r}")
    if rng is None or not isinstance(rng, list) or not rng:
        raise ScaleError(f"scale {name!r}: missing range")

    if kind == "ordinal" and len(rng) < len(domain):
        warnings.warn(f"scale {name!r}: domain size {len(domain)} exceeds range size {len(rng)}")

    return ScaleFn(
        name=name,
        kind=kind,
        domain=list(domain),
        range=list(rng),
        clamp=bool(spec.get("clamp", False)),
        padding=float(spec.get("padding", 0.05)),
    )


def scale_is_parent_relative(spec: Mapping) -> bool:
    rng = spec.get("range")
    return isinstance(rng, str) and bool(_PARENT_RE.match(rng))
