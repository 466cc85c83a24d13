"""Debug-data size accounting for a linked image.

Every byte of debug data lands in exactly one category:

  * identifiers: symbol names, record/enum tags, member names
  * symbols: symbol items minus their embedded names and coordinates
  * types: type items minus their embedded identifiers
  * source coordinates: every serialized coordinate, spoints included
  * module records: pickle framing (magic, unit header, counts, checksum)
    plus the in-image record headers and their terminator
  * address vectors: the in-image address slots
  * breakpoint flags: the flag array the image reserves

so the category total equals symbol-file bytes plus in-image debug bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .image import ExecutableImage
from .sympickle import load_symfile, measure_module

CATEGORIES = (
    "identifiers", "symbols", "types", "source coordinates",
    "module records", "address vectors", "breakpoint flags",
)

_METER_MAP = {
    "identifiers": "identifiers",
    "symbols": "symbols",
    "types": "types",
    "coordinates": "source coordinates",
    "module": "module records",
}


@dataclass
class UnitStats:
    uname: int
    symfile: str
    present: bool
    symfile_bytes: int = 0
    by_category: dict = field(default_factory=dict)


@dataclass
class StatsReport:
    units: list[UnitStats]
    by_category: dict
    total: int

    def render(self) -> str:
        lines = []
        for u in self.units:
            if u.present:
                lines.append(f"unit {u.uname:#010x} {u.symfile}: {u.symfile_bytes} bytes")
            else:
                lines.append(f"unit {u.uname:#010x} {u.symfile}: absent")
        width = max(len(c) for c in CATEGORIES)
        for cat in CATEGORIES:
            lines.append(f"{cat:<{width}}  {self.by_category.get(cat, 0):>8}")
        lines.append(f"{'total':<{width}}  {self.total:>8}")
        return "\n".join(lines)


def _record_region_sizes(img: ExecutableImage) -> tuple[int, int]:
    """(record header bytes, address vector bytes) of the space-2 blob."""
    import struct
    blob = img.records
    headers = 0
    vectors = 0
    pos = 0
    while pos + 4 <= len(blob):
        (uname,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        headers += 4
        if uname == 0:
            break
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4 + 4 * count
        headers += 4
        vectors += 4 * count
    return headers, vectors


def stats_report(img: ExecutableImage, image_dir: str | Path = ".") -> StatsReport:
    image_dir = Path(image_dir)
    totals = {cat: 0 for cat in CATEGORIES}
    units = []
    for uname, symfile in img.manifest:
        path = image_dir / symfile
        unit = UnitStats(uname, symfile, present=path.exists())
        if unit.present:
            module = load_symfile(path)
            meter = measure_module(module)
            unit.symfile_bytes = meter.total()
            for meter_cat, count in meter.by_category.items():
                cat = _METER_MAP[meter_cat]
                unit.by_category[cat] = unit.by_category.get(cat, 0) + count
                totals[cat] += count
        units.append(unit)
    headers, vectors = _record_region_sizes(img)
    totals["module records"] += headers
    totals["address vectors"] += vectors
    totals["breakpoint flags"] += img.bpflags_len
    return StatsReport(units, totals, sum(totals.values()))
