"""Name canonicalization and numeric value parsing.

Canonical ids are the join key between both graph views, so the rules here
are deliberately conservative: lowercase, drop a tiny stop-word list, strip
obvious plural suffixes on multi-word names, squash everything else to
underscores. Raw value strings are never discarded; quantity parsing only
adds typed annotations next to them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

STOP_WORDS = frozenset({"the", "a", "an", "of", "for", "with"})

_NON_ALNUM = re.compile(r"[^a-z0-9]+")

# Number with optional comma grouping ("1,099") and decimal point.
_NUM = r"\d[\d,]*(?:\.\d+)?"
_NUM_RE = re.compile(rf"(?<![A-Za-z0-9.]){_NUM}")
_DIMS_RE = re.compile(
    rf"(?<![A-Za-z0-9.])({_NUM})\s*[x×X]\s*({_NUM})(?:\s*[x×X]\s*({_NUM}))?(?![\d.])"
)
_CURRENCY_RE = re.compile(rf"(?:£|\bGBP\b)\s*({_NUM})", re.IGNORECASE)
_UNIT_RE = re.compile(r"[ \t]*([A-Za-z£%°\"']+)")
_NOT_UNITS = frozenset({"x", "by", "to", "and", "or"})


class CanonicalError(ValueError):
    """Raised when a name normalizes to nothing usable."""


def _light_stem(token: str) -> str:
    # Plural stripping only; anything heavier over-merges product names.
    if len(token) > 4 and token.endswith("ies"):
        return token[:-3] + "y"
    if len(token) > 4 and token.endswith("es") and (
        token[-3] in "xz" or token[-4:-2] in ("ch", "sh")
    ):
        return token[:-2]
    if len(token) > 3 and token.endswith("s") and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    return token


def canonical_id(name: str) -> str:
    """Map a display name to a stable lowercase [a-z0-9_] identifier.

    Idempotent: canonical_id(canonical_id(x)) == canonical_id(x).
    Raises CanonicalError when nothing survives normalization.
    """
    lowered = name.strip().lower()
    tokens = [t for t in _NON_ALNUM.split(lowered) if t]
    tokens = [t for t in tokens if t not in STOP_WORDS]
    if len(tokens) >= 2:
        tokens = [_light_stem(t) for t in tokens]
    ident = "_".join(tokens)
    if not ident:
        raise CanonicalError(f"empty identifier: {name!r}")
    return ident


@dataclass(frozen=True)
class Quantity:
    """A parsed numeric reading of a raw value string.

    Exactly one of ``value`` (scalar) or ``dims`` (2 or 3 joint components,
    e.g. a display resolution) is set. The original string is always kept.
    """

    raw: str
    value: float | None = None
    dims: tuple[float, ...] | None = None
    unit: str | None = None


def _to_float(text: str) -> float:
    return float(text.replace(",", ""))


def _unit_after(raw: str, pos: int, aliases: dict[str, str] | None) -> str | None:
    m = _UNIT_RE.match(raw, pos)
    if not m:
        return None
    unit = m.group(1)
    if unit.lower() in _NOT_UNITS:
        return None
    return normalize_unit(unit, aliases)


def parse_quantity(raw: str, aliases: dict[str, str] | None = None) -> Quantity | None:
    """Detect a scalar or NxM / NxMxK dimensional quantity inside raw text.

    Returns None when no number is found ("Included", "Li-ion", ...).
    """
    dims_m = _DIMS_RE.search(raw)
    if dims_m:
        parts = tuple(_to_float(g) for g in dims_m.groups() if g is not None)
        unit = _unit_after(raw, dims_m.end(), aliases)
        return Quantity(raw=raw, dims=parts, unit=unit)
    cur_m = _CURRENCY_RE.search(raw)
    if cur_m:
        return Quantity(raw=raw, value=_to_float(cur_m.group(1)), unit="gbp")
    num_m = _NUM_RE.search(raw)
    if num_m:
        unit = _unit_after(raw, num_m.end(), aliases)
        return Quantity(raw=raw, value=_to_float(num_m.group(0)), unit=unit)
    return None


_DEFAULT_ALIASES: dict[str, str] | None = None


def load_unit_aliases(path: str | None = None) -> dict[str, str]:
    """Load the unit alias table: one ``alias=canonical`` pair per line."""
    if path is None:
        text = resources.files("specgraph.data").joinpath("units.cfg").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        alias, _, canonical = line.partition("=")
        table[alias.strip().lower()] = canonical.strip().lower()
    return table


def default_unit_aliases() -> dict[str, str]:
    global _DEFAULT_ALIASES
    if _DEFAULT_ALIASES is None:
        _DEFAULT_ALIASES = load_unit_aliases()
    return _DEFAULT_ALIASES


def set_default_unit_aliases(table: dict[str, str]) -> None:
    """Replace the process-wide alias table (CLI --units override)."""
    global _DEFAULT_ALIASES
    _DEFAULT_ALIASES = dict(table)


def normalize_unit(unit: str, aliases: dict[str, str] | None = None) -> str:
    """Lowercase a unit string and resolve it through the alias table."""
    if aliases is None:
        aliases = default_unit_aliases()
    lowered = unit.strip().lower()
    return aliases.get(lowered, lowered)
