"""Deterministic synthetic corpus generator in the snapshot directory layout.

Desk-scale stand-in for a scraped shop snapshot: same directory format, same
record shape, but generated from seeded pools so tests get a byte-identical
tree for a fixed (n_products, seed) pair.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from specgraph.corpus import Corpus, load_corpus
from specgraph.normalize import canonical_id

_RANGES = [
    ("Orbit S25", "Smartphones", 2),
    ("Pulse A17", "Smartphones", 1),
    ("Orbit Z Fold7", "Smartphones", 2),
    ("Halcyon Tab X", "Tablets", 1),
    ("Umbra Buds Pro", "Audio", 1),
    ("Orbit S24 FE", "Smartphones", 2),
    ("Pulse M15", "Smartphones", 1),
    ("Vista Frame 55", "TVs", 1),
    ("Halcyon Book 4", "Laptops", 1),
    ("Umbra Watch 8", "Wearables", 1),
    ("Orbit XCover 8", "Smartphones", 1),
    ("Pulse Tab Lite", "Tablets", 2),
]

_STORAGE = ["128GB", "256GB", "512GB"]
_BATTERIES = [4000, 4200, 4500, 5000, 5500, 6000]
_REFRESH = [60, 120]
_RESOLUTIONS = ["2160x1856 (QXGA+)", "2340x1080 (FHD+)", "3120x1440 (QHD+)"]
_NETWORKS = [
    "5G Sub6 FDD, 5G Sub6 TDD",
    "5G Sub6 FDD",
    "4G LTE FDD, 4G LTE TDD",
]
_VIDEO = ["8K at 30fps", "4K at 60fps", "FHD at 30fps"]
_WATER = ["IP68", "IP67", "Not rated"]
_CONNECTIVITY = [
    "Bluetooth 5.3, Wi-Fi 6E, NFC",
    "Bluetooth 5.2, Wi-Fi 6",
    "Bluetooth 5.3, Wi-Fi 7, NFC, UWB",
]
_SPEAKERS = ["Stereo", "Mono", "Quad"]


def gen_fixture_corpus(n_products: int, seed: int, out: str | Path) -> Corpus:
    """Write n_products synthetic product pages under out and load them back."""
    if n_products < 1:
        raise ValueError("n_products must be >= 1")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    produced = 0
    slot = 0
    while produced < n_products:
        range_name, category, n_variants = _RANGES[slot % len(_RANGES)]
        if slot >= len(_RANGES):
            range_name = f"{range_name} Mk{slot // len(_RANGES) + 1}"
        slot += 1
        for v in range(n_variants):
            if produced >= n_products:
                break
            if n_variants > 1:
                name = f"{range_name} {_STORAGE[v % len(_STORAGE)]}"
            else:
                name = range_name
            _write_product(out, rng, name, range_name, category)
            produced += 1
    return load_corpus(out)


def _write_product(
    out: Path, rng: random.Random, name: str, range_name: str, category: str
) -> None:
    page = canonical_id(name)
    page_dir = out / page
    page_dir.mkdir(parents=True, exist_ok=True)

    battery = rng.choice(_BATTERIES)
    refresh = rng.choice(_REFRESH)
    resolution = rng.choice(_RESOLUTIONS)
    s_pen = rng.choice(["Yes", "No", "No"])
    network = rng.choice(_NETWORKS)
    video = rng.choice(_VIDEO)
    water = rng.choice(_WATER)
    connectivity = rng.choice(_CONNECTIVITY)
    speaker = rng.choice(_SPEAKERS)
    height = round(rng.uniform(140.0, 170.0), 1)
    width = round(rng.uniform(65.0, 80.0), 1)
    depth = round(rng.uniform(6.5, 9.5), 1)
    weight = rng.randrange(160, 245, 5)
    price = float(rng.randrange(199, 1400, 50))

    record = {
        "name": name,
        "range": range_name,
        "categories": [category],
        "price": price,
        "Display, Resolution (Main Display)": resolution,
        "Display, Refresh Rate": f"{refresh} Hz",
        "Specifications, Battery Capacity": f"{battery} mAh",
        "Specifications, Battery Type": "Li-ion",
        "Specifications, S Pen Support": s_pen,
        "Specifications, Water Resistance": water,
        "Network, 5G Standard": network,
        "Camera, Video Recording Resolution": video,
        "Connectivity, Ports": connectivity,
        "Physical Specification, Dimensions (HxWxD)": f"{height} x {width} x {depth} mm",
        "Physical Specification, Weight": f"{weight} g",
        "Audio.Speaker Type": speaker,
    }

    md = _render_markdown(name, range_name, category, record)
    (page_dir / f"{page}.md").write_text(md, encoding="utf-8")
    (page_dir / f"{page}_specs.json").write_text(
        json.dumps([record], indent=2) + "\n", encoding="utf-8"
    )
    meta = {
        "page": page,
        "title": name,
        "url": f"https://shop.example/{page}",
        "content": f"{page}.md",
        "prescience": f"{page}_specs.json",
    }
    (page_dir / f"file-{page}.json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8"
    )


def _render_markdown(name: str, range_name: str, category: str, record: dict) -> str:
    battery = record["Specifications, Battery Capacity"]
    resolution = record["Display, Resolution (Main Display)"]
    refresh = record["Display, Refresh Rate"]
    lines = [
        f"# {name}",
        "",
        f"The {name} is part of the {range_name} range in our {category} catalog.",
        f"It ships with a {battery} battery and a {resolution} display.",
        "",
        "## Design",
        "",
        f"The {name} keeps the slim profile of the {range_name} family while",
        f"adding a {record['Specifications, Water Resistance']} rating for peace of mind.",
        "",
        "## Performance",
        "",
        f"A {refresh} panel and {record['Connectivity, Ports']} connectivity make the",
        f"{name} a dependable daily driver for {category.lower()} users.",
        "",
        "## Specifications",
        "",
    ]
    for key, value in record.items():
        if key in ("name", "range", "categories"):
            continue
        lines.append(f"- {key}: {value}")
    return "\n".join(lines) + "\n"
