# ============================================================
# app/harness/plots.py — Scripts de gnuplot a partir de un resumen
# ============================================================
# No se renderiza nada: se escribe un archivo de datos (un bloque
# `index` por curva, separados por dos líneas en blanco) y un script
# .gp que lo lee. Una curva por ley de filas (y por las demás claves
# que varíen fuera del eje x).
# ============================================================

import logging
from pathlib import Path
from typing import Dict, List, Tuple

import pandas as pd

from app.onebit.errors import InvalidParameterError
from app.utils.file_utils import write_text

logger = logging.getLogger(__name__)

# kind → (columna x, columna y, con cuartiles, etiqueta y, escala log en x)
PLOT_KINDS: Dict[str, Tuple[str, str, bool, str, bool]] = {
    "error_vs_m": ("m", "median", True, "error mediano ||x# - x||_2", True),
    "success_vs_m": ("m", "success_rate", False, "tasa de éxito (error <= rho)", True),
    "error_vs_beta": ("beta", "median", True, "error mediano ||x# - x||_2", False),
}
CURVE_KEYS = ("law", "m", "beta", "sigma", "solver", "param")


def _curves(summary: pd.DataFrame, x: str) -> List[Tuple[str, pd.DataFrame]]:
    keys = [k for k in CURVE_KEYS if k != x and k in summary.columns
            and summary[k].nunique(dropna=False) > 1]
    if not keys:
        return [(str(summary["law"].iloc[0]) if "law" in summary.columns else "datos", summary)]
    curves = []
    for values, group in summary.groupby(keys, dropna=False, sort=True):
        values = values if isinstance(values, tuple) else (values,)
        label = ", ".join(f"{k}={v}" if k != "law" else str(v) for k, v in zip(keys, values))
        curves.append((label, group))
    return curves


def render_plot(summary: pd.DataFrame, kind: str, stem: str) -> Tuple[str, str]:
    """Devuelve (texto del script, texto de datos), ambos deterministas."""
    if kind not in PLOT_KINDS:
        raise InvalidParameterError(f"Tipo de gráfico no soportado: {kind} (opciones: {', '.join(PLOT_KINDS)}).")
    if summary is None or summary.empty:
        raise InvalidParameterError("Resumen vacío: nada que graficar.")
    x, y, quartiles, ylabel, logx = PLOT_KINDS[kind]

    blocks, plots = [], []
    for index, (label, group) in enumerate(_curves(summary, x)):
        group = group.sort_values(x)
        lines = [f"# {label}"]
        for _, row in group.iterrows():
            values = [row[x], row[y]] + ([row["q1"], row["q3"]] if quartiles else [])
            lines.append(" ".join(f"{float(v):.10g}" for v in values))
        blocks.append("\n".join(lines))
        style = "using 1:2:3:4 with yerrorlines" if quartiles else "using 1:2 with linespoints"
        plots.append(f"'{stem}.dat' index {index} {style} title '{label}'")

    script = "\n".join([
        "set terminal pngcairo size 800,600",
        f"set output '{stem}.png'",
        f"set xlabel '{x}'",
        f"set ylabel '{ylabel}'",
        "set logscale x" if logx else "unset logscale x",
        "set grid",
        "set key top right",
        "plot " + ", \\\n     ".join(plots),
        "",
    ])
    return script, "\n\n\n".join(blocks) + "\n"


def emit_plots(summary: pd.DataFrame, kind: str, out_dir: str, stem: str = "") -> Tuple[Path, Path]:
    """Escribe <stem>.gp y <stem>.dat en out_dir."""
    stem = stem or kind
    script, data = render_plot(summary, kind, stem)
    out = Path(out_dir)
    data_path = write_text(out / f"{stem}.dat", data)
    script_path = write_text(out / f"{stem}.gp", script)
    logger.info("Gráfico %s: %s", kind, script_path)
    return script_path, data_path
