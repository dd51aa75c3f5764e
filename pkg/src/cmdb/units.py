"""Unit normalization and physically-plausible scale resolution.

Supports a small closed grammar: SI prefixes on the atoms Pa, N, m, s, g,
K (plus ``%`` and ``dimensionless``), combined with products (``·``, ``*``,
``.`` or whitespace) and quotients (``/``), and integer exponents
(``m^2``, ``s^-1``, ``m³``). Anything outside the grammar raises
:class:`UnsupportedUnit` so callers can pass the raw value through flagged
for review. Full dimensional analysis is out of scope: derived atoms like
Pa and N are kept as-is rather than decomposed into base units.

Scale resolution handles the notationally ambiguous table header
``X ×10^k``: the printed value may need multiplying by 10^k or by 10^-k
depending on the author's convention. :func:`resolve_scaled_value` keeps
whichever candidate falls inside a physical plausibility band, and falls
back to the literal reading flagged ``ambiguous`` when the band cannot
decide.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable


class UnsupportedUnit(ValueError):
    """Unit string outside the supported grammar."""


class BadScaleNotation(ValueError):
    """Scale notation that does not parse to ×10^k."""


SI_PREFIXES = {
    "Y": 1e24, "Z": 1e21, "E": 1e18, "P": 1e15, "T": 1e12, "G": 1e9,
    "M": 1e6, "k": 1e3, "h": 1e2, "da": 1e1, "d": 1e-1, "c": 1e-2,
    "m": 1e-3, "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "n": 1e-9, "p": 1e-12,
    "f": 1e-15, "a": 1e-18,
}

# atom -> (factor to SI, canonical SI symbol); gram folds into kg.
_ATOMS = {
    "Pa": (1.0, "Pa"),
    "N": (1.0, "N"),
    "m": (1.0, "m"),
    "s": (1.0, "s"),
    "g": (1e-3, "kg"),
    "K": (1.0, "K"),
    "%": (1e-2, ""),
    "dimensionless": (1.0, ""),
    "-": (1.0, ""),
    "1": (1.0, ""),
}

_SUPERSCRIPTS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹⁻⁺", "0123456789-+")

_TERM_RE = re.compile(
    r"(?P<name>[A-Za-zµμ%]+|-|1)(?:\s*(?:\^|\*\*)\s*(?P<exp>[+-]?\d+))?"
)
_SEP_RE = re.compile(r"\s*(?P<sep>[·⋅*./])\s*|(?P<ws>\s+)")


def _parse_term(term: str) -> tuple[float, str]:
    """Resolve one prefixed atom: returns (si_factor, si_symbol)."""
    if term in _ATOMS:
        return _ATOMS[term]
    for plen in (2, 1):  # try 'da' before single-letter prefixes
        prefix, rest = term[:plen], term[plen:]
        if prefix in SI_PREFIXES and rest in _ATOMS:
            factor, symbol = _ATOMS[rest]
            return SI_PREFIXES[prefix] * factor, symbol
    raise UnsupportedUnit(f"unknown unit atom {term!r}")


def parse_unit(unit_raw: str) -> tuple[float, str]:
    """Parse a unit string; returns (conversion factor to SI, canonical
    SI unit string). Raises :class:`UnsupportedUnit` outside the grammar."""
    if unit_raw is None:
        raise UnsupportedUnit("unit is None")
    s = unit_raw.strip().translate(_SUPERSCRIPTS)
    if not s:
        return 1.0, "dimensionless"
    # normalize unicode superscript exponents like m³ -> m^3 (translate
    # above turned them into plain digits glued to the atom)
    s = re.sub(r"([A-Za-zµμ%])(-?\d+)(?=$|[·⋅*./\s])", r"\1^\2", s)

    factor = 1.0
    exponents: dict[str, int] = {}
    order: list[str] = []
    pos = 0
    sign = 1
    expect_term = True
    while pos < len(s):
        if expect_term:
            m = _TERM_RE.match(s, pos)
            if not m:
                raise UnsupportedUnit(f"cannot parse unit {unit_raw!r} at {s[pos:]!r}")
            exp = int(m.group("exp") or 1)
            term_factor, symbol = _parse_term(m.group("name"))
            factor *= term_factor ** (sign * exp)
            if symbol:
                if symbol not in exponents:
                    exponents[symbol] = 0
                    order.append(symbol)
                exponents[symbol] += sign * exp
            pos = m.end()
            expect_term = False
        else:
            m = _SEP_RE.match(s, pos)
            if not m:
                raise UnsupportedUnit(f"cannot parse unit {unit_raw!r} at {s[pos:]!r}")
            sign = -1 if m.group("sep") == "/" else sign
            pos = m.end()
            expect_term = True
    if expect_term:
        raise UnsupportedUnit(f"dangling separator in unit {unit_raw!r}")

    parts = []
    for symbol in order:
        exp = exponents[symbol]
        if exp == 0:
            continue
        parts.append(symbol if exp == 1 else f"{symbol}^{exp}")
    return factor, "·".join(parts) if parts else "dimensionless"


def normalize_unit(value: float, unit_raw: str) -> tuple[float, str]:
    """Convert a value in ``unit_raw`` to SI.

    >>> normalize_unit(30, "MPa")
    (30000000.0, 'Pa')
    """
    factor, unit_si = parse_unit(unit_raw)
    return value * factor, unit_si


def si_conversion_factor(unit_raw: str) -> float:
    """Multiplier taking a value in ``unit_raw`` to SI (inverse gives the
    round trip back)."""
    return parse_unit(unit_raw)[0]


# --------------------------------------------------------------------------
# Scaled-value resolution
# --------------------------------------------------------------------------

_SCALE_RE = re.compile(
    r"^\s*[×x*]?\s*10\s*(?:\^|\*\*)?\s*\{?\s*(?P<exp>[+-]?\d+)\s*\}?\s*$"
)
_SCALE_E_RE = re.compile(r"^\s*[eE](?P<exp>[+-]?\d+)\s*$")


def parse_scale_notation(notation: str) -> int:
    """Exponent k of a ``×10^k`` style annotation.

    Accepts ``×10^3``, ``x10^-3``, ``*10^{3}``, ``10³``, ``e3``.
    """
    s = notation.strip().translate(_SUPERSCRIPTS)
    m = _SCALE_RE.match(s) or _SCALE_E_RE.match(s)
    if not m:
        raise BadScaleNotation(f"cannot parse scale notation {notation!r}")
    return int(m.group("exp"))


@dataclass(frozen=True)
class ResolvedValue:
    value_si: float
    resolution_flag: str  # as_printed | scale_resolved | ambiguous


def resolve_scaled_value(
    value_raw: float,
    scale_notation: str | None,
    quantity_kind: str,
    plausibility_band: tuple[float, float],
) -> ResolvedValue:
    """Disambiguate a scaled table value against a physical band.

    ``value_raw`` must already be in SI units of the band. With notation
    ``×10^k`` the candidates are {v·10^k, v·10^-k, v}; exactly one inside
    ``[lo, hi]`` resolves the scale, otherwise the literal v·10^k is kept
    and flagged ``ambiguous`` so a reviewer decides. Never invents digits:
    the result is always one of the three candidates.
    """
    lo, hi = plausibility_band
    if not lo < hi:
        raise ValueError(
            f"plausibility band for {quantity_kind!r} must have lo < hi, got {lo!r} >= {hi!r}"
        )
    if scale_notation is None or not str(scale_notation).strip():
        return ResolvedValue(value_raw, "as_printed")
    k = parse_scale_notation(scale_notation)
    candidates: list[float] = []
    for c in (value_raw * 10.0 ** k, value_raw * 10.0 ** (-k), value_raw):
        if c not in candidates:
            candidates.append(c)
    in_band = [c for c in candidates if lo <= c <= hi]
    if len(in_band) == 1:
        return ResolvedValue(in_band[0], "scale_resolved")
    return ResolvedValue(value_raw * 10.0 ** k, "ambiguous")


# --------------------------------------------------------------------------
# Plausibility band table
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlausibilityBand:
    lo: float
    hi: float
    unit_si: str


class PlausibilityTable:
    """quantity_kind -> physical band, loaded from a versioned JSON file."""

    def __init__(self, bands: dict[str, PlausibilityBand], version: str = "custom"):
        self.bands = bands
        self.version = version

    @classmethod
    def from_json(cls, text: str) -> "PlausibilityTable":
        raw = json.loads(text)
        version = raw.pop("_version", "custom") if isinstance(raw, dict) else "custom"
        bands = {
            kind: PlausibilityBand(float(spec["lo"]), float(spec["hi"]), spec["unit_si"])
            for kind, spec in raw.items()
        }
        return cls(bands, version)

    @classmethod
    def from_file(cls, path) -> "PlausibilityTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    @classmethod
    def default(cls) -> "PlausibilityTable":
        text = resources.files("cmdb").joinpath("data/plausibility.json").read_text("utf-8")
        return cls.from_json(text)

    def band(self, quantity_kind: str) -> tuple[float, float] | None:
        entry = self.bands.get(quantity_kind)
        if entry is None:
            return None
        return entry.lo, entry.hi

    def kinds(self) -> Iterable[str]:
        return self.bands.keys()

    def match_definition(self, definition: str) -> str | None:
        """Best quantity kind for a symbol definition: the most specific
        kind (most words) whose every word occurs in the definition."""
        words = set(re.findall(r"[a-z]+", definition.casefold()))
        best: str | None = None
        best_rank = (0, 0)
        for kind in self.bands:
            kind_words = re.findall(r"[a-z]+", kind.casefold())
            if kind_words and all(w in words for w in kind_words):
                rank = (len(kind_words), len(kind))
                if rank > best_rank:
                    best, best_rank = kind, rank
        return best

    def resolve(
        self, value_raw: float, scale_notation: str | None, quantity_kind: str
    ) -> ResolvedValue:
        """Table-driven wrapper over :func:`resolve_scaled_value`; unknown
        quantity kinds fall back to the literal reading flagged ambiguous."""
        band = self.band(quantity_kind)
        if band is None:
            if scale_notation is None or not str(scale_notation).strip():
                return ResolvedValue(value_raw, "as_printed")
            k = parse_scale_notation(scale_notation)
            return ResolvedValue(value_raw * 10.0 ** k, "ambiguous")
        return resolve_scaled_value(value_raw, scale_notation, quantity_kind, band)
