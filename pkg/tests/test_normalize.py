"""Canonicalization and quantity parsing tests."""

from __future__ import annotations

import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specgraph.normalize import (
    CanonicalError,
    Quantity,
    canonical_id,
    load_unit_aliases,
    normalize_unit,
    parse_quantity,
)

# (raw, value, dims, unit) — the hand-built parsing table.
QUANTITY_CASES = [
    ("2160x1856 (QXGA+)", None, (2160.0, 1856.0), None),
    ("5000 mAh", 5000.0, None, "mah"),
    ("Included", None, None, None),
    ("Li-ion", None, None, None),
    ("120 Hz", 120.0, None, "hz"),
    ("120Hz", 120.0, None, "hz"),
    ("£1,099.00", 1099.0, None, "gbp"),
    ("GBP 300", 300.0, None, "gbp"),
    ("£49", 49.0, None, "gbp"),
    ("up to 45W", 45.0, None, "w"),
    ("45 W", 45.0, None, "w"),
    ("256GB", 256.0, None, "gb"),
    ("1 TB", 1.0, None, "tb"),
    ("159.3 x 75.9 x 7.2 mm", None, (159.3, 75.9, 7.2), "mm"),
    ("3120x1440", None, (3120.0, 1440.0), None),
    ("1,920 x 1,080", None, (1920.0, 1080.0), None),
    ("6.7\"", 6.7, None, "in"),
    ("195 g", 195.0, None, "g"),
    ("2.5 kg", 2.5, None, "kg"),
    ("50 MP", 50.0, None, "mp"),
    ("8K at 30fps", 8.0, None, "k"),
    ("30 fps", 30.0, None, "fps"),
    ("IP68", None, None, None),
    ("Yes", None, None, None),
    ("No", None, None, None),
    ("USB-C", None, None, None),
    ("5G Sub6 FDD", 5.0, None, "g"),
    ("4000", 4000.0, None, None),
    ("1.5 L", 1.5, None, "l"),
    ("Wi-Fi 7", 7.0, None, None),
]

UNIT_CASES = [
    ("L", "l"),
    ("l", "l"),
    ("mAh", "mah"),
    ("GB", "gb"),
    ("W", "w"),
    ("£", "gbp"),
    ("GBP", "gbp"),
    ("Hz", "hz"),
    ("nits", "nits"),
    ("%", "percent"),
]


@pytest.mark.parametrize("raw,value,dims,unit", QUANTITY_CASES)
def test_quantity_table(raw, value, dims, unit):
    q = parse_quantity(raw)
    if value is None and dims is None:
        assert q is None
        return
    assert q is not None
    assert q.raw == raw
    assert q.value == value
    assert q.dims == dims
    assert q.unit == unit


@pytest.mark.parametrize("alias,canonical", UNIT_CASES)
def test_unit_aliases(alias, canonical):
    assert normalize_unit(alias) == canonical
    # idempotent and case-insensitive
    assert normalize_unit(canonical) == canonical
    assert normalize_unit(alias.upper()) == normalize_unit(alias.lower())


def test_unit_alias_file_roundtrip(tmp_path):
    path = tmp_path / "units.cfg"
    path.write_text("FOO=bar\n# comment\nbar=bar\n", "utf-8")
    table = load_unit_aliases(path)
    assert normalize_unit("FOO", table) == "bar"
    assert normalize_unit("bar", table) == "bar"
    assert normalize_unit("unknownUnit", table) == "unknownunit"


def test_canonical_examples():
    assert canonical_id("8K Recording Support") == "8k_recording_support"
    assert canonical_id("  Galaxy S25 FE ") == "galaxy_s25_fe"
    assert canonical_id("Specifications") == "specifications"
    assert canonical_id("S Pen Support") == "s_pen_support"
    assert canonical_id("The Galaxy of Watches") == "galaxy_watch"
    assert canonical_id("Video Recording Resolution") == "video_recording_resolution"
    assert canonical_id("Yes") == "yes"


def test_canonical_all_stop_words_rejected():
    with pytest.raises(CanonicalError):
        canonical_id("The")
    with pytest.raises(CanonicalError):
        canonical_id("  of a  ")
    with pytest.raises(CanonicalError):
        canonical_id("!!!")


def test_canonical_idempotent_random():
    rng = random.Random(42)
    alphabet = string.ascii_letters + string.digits + " -_.,()/+£é "
    for _ in range(1000):
        raw = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 24)))
        try:
            once = canonical_id(raw)
        except CanonicalError:
            continue
        assert canonical_id(once) == once


@given(st.text(min_size=1, max_size=40))
@settings(max_examples=300, deadline=None)
def test_canonical_idempotent_hypothesis(raw):
    try:
        once = canonical_id(raw)
    except CanonicalError:
        return
    assert canonical_id(once) == once
    assert once == once.strip("_")
    assert all(c.islower() or c.isdigit() or c == "_" for c in once)


@given(st.integers(min_value=0, max_value=10**9), st.sampled_from(["mAh", "W", "GB", "", "Hz"]))
@settings(max_examples=200, deadline=None)
def test_quantity_preserves_digits(number, unit):
    raw = f"{number} {unit}".strip()
    q = parse_quantity(raw)
    assert q is not None
    assert q.raw == raw
    assert str(number) in q.raw.replace(",", "")
    assert q.value == float(number)


def test_quantity_thousands_and_decimal():
    assert parse_quantity("1,234,567").value == 1234567.0
    assert parse_quantity("3.14 W").value == 3.14
    # grouping commas are consumed inside one number, not treated as a split
    assert parse_quantity("12,5").value == 125.0


def test_quantity_is_frozen():
    q = Quantity(raw="5 W", value=5.0, unit="w")
    with pytest.raises(AttributeError):
        q.value = 6.0  # type: ignore[misc]
