"""Tabular reports built from the probability calculators.

Each report renders as aligned text or as comma-separated rows with a
header line.  Probabilities appear in both ``1.46936e-27`` and
``2^-89.14`` notation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from castore import probability as prob
from castore.naming import MAX_CONTENT_BYTES

_UNITS = ("Byte", "Kilobyte", "Megabyte", "Gigabyte", "Terabyte", "Petabyte", "Exabyte", "Zettabyte")


@dataclass
class Report:
    title: str
    header: tuple[str, ...]
    rows: list[tuple[str, ...]] = field(default_factory=list)

    def to_text(self) -> str:
        table = [self.header, *self.rows]
        widths = [max(len(r[i]) for r in table) for i in range(len(self.header))]
        lines = [self.title, ""]
        for n, r in enumerate(table):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def to_rows(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    def render(self, fmt: str = "text") -> str:
        if fmt == "text":
            return self.to_text()
        if fmt == "rows":
            return self.to_rows()
        raise ValueError(f"unknown report format {fmt!r}")


def human_bytes(n: int) -> str:
    """Decimal capacity, e.g. ``10 Megabyte``; ``n`` must be a power of ten."""
    unit = 0
    while n >= 1000 and unit < len(_UNITS) - 1 and n % 1000 == 0:
        n //= 1000
        unit += 1
    return f"{n} {_UNITS[unit]}"


TABLE1_OBJECT_EXPONENTS = range(6, 16)
TABLE1_FILE_SIZES = (10, 1000)


def table1_rows() -> list[tuple[int, prob.Probability]]:
    return [(10**e, prob.m_collision(10**e)) for e in TABLE1_OBJECT_EXPONENTS]


def emit_table1() -> Report:
    report = Report(
        title="Collision probability under the M naming scheme",
        header=(
            "objects",
            "capacity_at_10_bytes",
            "capacity_at_1KB",
            "m_collision",
            "m_collision_log2",
        ),
    )
    for objects, p in table1_rows():
        report.rows.append(
            (
                f"{objects:.0e}",
                *(human_bytes(objects * size) for size in TABLE1_FILE_SIZES),
                p.decimal(),
                p.power_of_two(),
            )
        )
    return report


@dataclass(frozen=True)
class SchemeStrength:
    scheme: str
    collision_threshold: str
    forge_collision: str
    forge_second_preimage: str


def _pow2(e: float) -> str:
    return f"2^{e:g}"


def table2_rows() -> list[SchemeStrength]:
    # Collisions become likely around sqrt(N) files.
    m_threshold = prob.M_BUCKETS_LOG2 / 2
    mpp_threshold = prob.MPP_BUCKETS_LOG2 / 2
    k = prob.block_count_exponent(MAX_CONTENT_BYTES)
    m_preimage = prob.second_preimage_cost(prob.M_BUCKETS_LOG2, k).log2_dominant
    not_possible = "Not possible"
    return [
        SchemeStrength(
            "M",
            f"{_pow2(m_threshold)} files stored",
            "O(1)",  # practical MD5 collision attacks assumed available
            f"O({_pow2(m_preimage)})",
        ),
        SchemeStrength("GM", not_possible, not_possible, not_possible),
        SchemeStrength(
            "M++",
            f"{_pow2(mpp_threshold)} files stored",
            f"O({_pow2(prob.MPP_FORGE_COLLISION_LOG2)})",
            _pow2(prob.MPP_SECOND_PREIMAGE_LOG2),
        ),
    ]


def emit_table2() -> Report:
    report = Report(
        title="Summary of naming schemes",
        header=("scheme", "collisions_likely_beyond", "work_to_forge_collision", "work_to_forge_second_preimage"),
    )
    for row in table2_rows():
        report.rows.append((row.scheme, row.collision_threshold, row.forge_collision, row.forge_second_preimage))
    return report
