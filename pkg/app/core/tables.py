# app/core/tables.py
"""
Tabelas de resultado e o contrato textual dos CSVs:

    # tool: wpt-harvest-sim 0.1.0
    # scenario: <nome>
    # scenario_sha256: <hex>
    coluna_a,coluna_b
    unidade_a,unidade_b
    ...

Vírgula como separador, ponto decimal, 9 algarismos significativos.
"""
import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from app.core.errors import EmptyTableError, MissingColumnError, ScenarioError

HASH_KEY = "scenario_sha256"


def scenario_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.9g}"
    if hasattr(value, "item"):
        return _format_cell(value.item())
    return str(value)


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class ResultTable:
    name: str
    columns: list[str]
    units: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.columns) != len(self.units):
            raise ScenarioError(f"Tabela {self.name}: {len(self.columns)} colunas e {len(self.units)} unidades")

    def add_row(self, row: Iterable[Any]) -> None:
        row = list(row)
        if len(row) != len(self.columns):
            raise ScenarioError(
                f"Tabela {self.name}: linha com {len(row)} células, esperado {len(self.columns)}"
            )
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def require(self, names: Iterable[str]) -> None:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise MissingColumnError(f"Tabela {self.name} sem as colunas {missing}", {"missing": missing})

    def column(self, name: str) -> list[Any]:
        self.require([name])
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def unit(self, name: str) -> str:
        self.require([name])
        return self.units[self.columns.index(name)]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        for key, value in self.provenance.items():
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerow(self.units)
        for row in self.rows:
            writer.writerow([_format_cell(v) for v in row])
        return buf.getvalue()

    def write_csv(self, path: Path) -> Path:
        if not self.rows:
            raise EmptyTableError(f"Tabela {self.name} vazia; nada escrito")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_csv_text().encode("utf-8"))
        return path

    @classmethod
    def read_csv(cls, path: Path, name: Optional[str] = None) -> "ResultTable":
        text = Path(path).read_text(encoding="utf-8")
        provenance: dict[str, str] = {}
        body = []
        for line in text.splitlines():
            if line.startswith("# ") and not body:
                key, _, value = line[2:].partition(": ")
                provenance[key] = value
            else:
                body.append(line)
        rows = list(csv.reader(body))
        if len(rows) < 2:
            raise EmptyTableError(f"{path}: sem cabeçalho/unidades")
        table = cls(name or Path(path).stem, rows[0], rows[1], provenance=provenance)
        for row in rows[2:]:
            table.add_row(_parse_cell(c) for c in row)
        return table


def embedded_hash(path: Path) -> Optional[str]:
    """Hash do cenário gravado no cabeçalho de um CSV (ou None)."""
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            if key == HASH_KEY:
                return value
    return None
