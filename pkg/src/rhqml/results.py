"""Results tables: deterministic CSV + Markdown emission.

Cells are formatted once, at insertion time (reals to 3 decimals,
percentages to 1 decimal), so the CSV round-trips exactly and re-runs are
byte-identical. Footers carry provenance (seeds, parameter counts, config)
as '#'-prefixed trailing lines that the parser reads back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


def fmt_real(x: float) -> str:
    return f"{float(x):.3f}"


def fmt_pct(x: float) -> str:
    """Fraction in [0,1] -> percentage with one decimal."""
    return f"{100.0 * float(x):.1f}"


def fmt_mean_std(values) -> str:
    import numpy as np

    arr = np.asarray(values, dtype=float)
    return f"{100.0 * arr.mean():.1f}+-{100.0 * arr.std():.1f}"


@dataclass
class ResultsTable:
    name: str
    columns: list[str]
    rows: list[list[str]] = field(default_factory=list)
    footer: dict[str, str] = field(default_factory=dict)

    def add_row(self, *cells) -> None:
        if len(cells) != len(self.columns):
            raise ValueError(f"row width {len(cells)} != {len(self.columns)} columns")
        self.rows.append([str(c) for c in cells])

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(row) for row in self.rows]
        for key in sorted(self.footer):
            lines.append(f"# {key}: {self.footer[key]}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        head = "| " + " | ".join(self.columns) + " |"
        sep = "|" + "|".join([" --- "] * len(self.columns)) + "|"
        body = ["| " + " | ".join(row) + " |" for row in self.rows]
        foot = [f"- {key}: {self.footer[key]}" for key in sorted(self.footer)]
        parts = [head, sep, *body]
        if foot:
            parts += ["", *foot]
        return "\n".join(parts) + "\n"


def emit_table(table: ResultsTable, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{table.name}.csv"
    md_path = out_dir / f"{table.name}.md"
    csv_path.write_text(table.to_csv())
    md_path.write_text(table.to_markdown())
    return csv_path, md_path


def parse_table_csv(path: str | Path) -> ResultsTable:
    lines = Path(path).read_text().splitlines()
    columns = lines[0].split(",")
    rows, footer = [], {}
    for line in lines[1:]:
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            footer[key.strip()] = value.strip()
        else:
            rows.append(line.split(","))
    name = Path(path).stem
    return ResultsTable(name, columns, rows, footer)
