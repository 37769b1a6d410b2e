# app/scenarios/plots.py
"""SVG estático das tabelas de resultado (matplotlib, backend Agg, bytes determinísticos)."""
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")  # sem display; também evita problemas com o pool de workers
import matplotlib.pyplot as plt  # noqa: E402

from app import TOOL_NAME  # noqa: E402
from app.core.errors import EmptyTableError  # noqa: E402
from app.core.tables import ResultTable  # noqa: E402

# salt fixo: ids internos do SVG não mudam entre execuções
plt.rcParams.update({
    "svg.hashsalt": TOOL_NAME,
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.linestyle": ":",
})


@dataclass(frozen=True)
class PlotSpec:
    x: str
    ys: list[str]
    title: str = ""
    percent: bool = False        # eixo y em % de 0 a 100
    step: bool = False           # degraus (trace da partida a frio)
    log_x: bool = False
    x_scale: float = 1.0         # ex.: 1e-9 para Hz → GHz
    x_label: Optional[str] = None
    markers: list[tuple[str, float]] = field(default_factory=list)  # (rótulo, x)


def _label(table: ResultTable, column: str, scale: float = 1.0, percent: bool = False) -> str:
    if percent:
        return f"{column} [%]"
    unit = table.unit(column)
    if scale == 1e-9 and unit == "Hz":
        unit = "GHz"
    return f"{column} [{unit}]" if unit else column


def _numeric(values: list) -> list[float]:
    return [float(v) if isinstance(v, (int, float)) and v is not None else math.nan for v in values]


def render_svg(table: ResultTable, spec: PlotSpec) -> bytes:
    """Documento SVG da tabela; valida colunas e conteúdo antes de desenhar."""
    if not table.rows:
        raise EmptyTableError(f"Tabela {table.name} vazia; nada a desenhar")
    table.require([spec.x, *spec.ys])

    x = [v * spec.x_scale for v in _numeric(table.column(spec.x))]
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    try:
        for name in spec.ys:
            y = _numeric(table.column(name))
            if spec.percent:
                y = [100.0 * v for v in y]
            if spec.step:
                ax.step(x, y, where="post", label=name, linewidth=1.2)
            else:
                ax.plot(x, y, "-", label=name, linewidth=1.2)
        for text, pos in spec.markers:
            ax.axvline(pos * spec.x_scale, color="0.4", linestyle="--", linewidth=0.8)
            ax.annotate(text, (pos * spec.x_scale, 1.0), xycoords=("data", "axes fraction"),
                        rotation=90, va="top", ha="right", fontsize=7)
        if spec.percent:
            ax.set_ylim(0.0, 100.0)
        if spec.log_x:
            ax.set_xscale("log")
        ax.set_xlabel(spec.x_label or _label(table, spec.x, spec.x_scale))
        ax.set_ylabel(_label(table, spec.ys[0], percent=spec.percent))
        if spec.title:
            ax.set_title(spec.title)
        if len(spec.ys) > 1:
            ax.legend(loc="best")
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": TOOL_NAME})
    finally:
        plt.close(fig)
    return buf.getvalue()


def emit_svg(table: ResultTable, spec: PlotSpec, path: Path) -> Path:
    """Escreve o SVG só depois de renderizado com sucesso (erro → nenhum arquivo)."""
    data = render_svg(table, spec)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return path
