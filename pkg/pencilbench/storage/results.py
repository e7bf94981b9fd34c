"""Experiment Outputs

CSV tables with 17-significant-digit scientific notation, a run manifest
next to every CSV, and gnuplot scripts that plot a sibling CSV.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from pydantic import BaseModel, Field

from ..errors import InputError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.16e"
MANIFEST_SUFFIX = ".manifest.json"


class RunManifest(BaseModel):
    """Provenance for one output file"""
    command: str
    config: Dict[str, Any] = Field(default_factory=dict)
    master_seed: Optional[int] = None
    version: str
    wall_time: float  # seconds
    outputs: List[str] = Field(default_factory=list)


def format_value(value: Any) -> str:
    """Render one CSV cell; floats in %.16e, non-finite as inf/-inf/nan"""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return FLOAT_FORMAT % x


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write a headed CSV table; returns the number of data rows"""
    count = 0
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise InputError(f"row has {len(row)} cells, header has {len(header)}")
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return count


def manifest_path(csv_path: PathLike) -> Path:
    """fig3.csv -> fig3.manifest.json, fig2b.raw.csv -> fig2b.raw.manifest.json"""
    path = Path(csv_path)
    return path.with_name(path.stem + MANIFEST_SUFFIX)


def write_manifest(csv_path: PathLike, manifest: RunManifest) -> Path:
    target = manifest_path(csv_path)
    target.write_text(manifest.model_dump_json(indent=2) + "\n")
    return target


def read_manifest(path: PathLike) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text())


# ============================================
# GNUPLOT SCRIPTS
# ============================================

_PREAMBLE = """set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,650
set output '{png}'
"""

_LOG_AXES = """set logscale {axes}
set format {axes} '10^{{%L}}'
"""


def _preamble(csv_name: str, axes: str = "") -> str:
    png = csv_name[:-len(".csv")] + ".png" if csv_name.endswith(".csv") else csv_name + ".png"
    text = _PREAMBLE.format(png=png)
    if axes:
        text += _LOG_AXES.format(axes=axes)
    return text + "set grid\n"


def sweep_script(csv_name: str, coefficient: Optional[float] = None, exponent: Optional[float] = None) -> str:
    """Forward error against epsilon for the adversarial sweep"""
    lines = [
        _preamble(csv_name, "xy"),
        "set xlabel 'epsilon'",
        "set ylabel 'forward error'",
        "set key top right",
    ]
    plots = [
        f"'{csv_name}' using 2:3 with points pt 7 title 'PBA'",
        f"'{csv_name}' using 2:4 with points pt 5 title 'PBA + ALS'",
    ]
    if coefficient is not None and exponent is not None:
        plots.append(f"{coefficient!r} * x**({exponent!r}) with lines dt 2 title 'fit'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def kappa_ccdf_script(csv_name: str, m3: int) -> str:
    """Empirical ccdf of kappa in alpha units next to the limiting bound"""
    return "\n".join([
        _preamble(csv_name, "xy"),
        "set xlabel 'alpha = kappa / r^(2/(m3-1))'",
        "set ylabel 'P[kappa > x]'",
        "set yrange [*:1]",
        f"plot '{csv_name}' using 2:3 with steps title 'empirical (m3 = {m3})', \\",
        f"     '{csv_name}' using 2:4 with lines dt 2 title 'limiting bound'",
    ]) + "\n"


def error_ccdf_script(csv_name: str, quantity: str) -> str:
    """Empirical ccdf of a forward error or excess factor series"""
    return "\n".join([
        _preamble(csv_name, "xy"),
        f"set xlabel '{quantity}'",
        f"set ylabel 'P[{quantity} > x]'",
        "set yrange [*:1]",
        f"plot '{csv_name}' using 1:2 with steps title '{quantity}'",
    ]) + "\n"


def decompose_script(csv_name: str) -> str:
    """Residuals and forward errors of one decomposition run as bars"""
    bars = [(2, "backward residual"), (4, "refined residual"), (5, "PBA forward error"), (6, "refined forward error")]
    plots = [f"'{csv_name}' using ({i}):{column} with boxes title '{label}'" for i, (column, label) in enumerate(bars)]
    return "\n".join([
        _preamble(csv_name, "y"),
        "set style fill solid 0.6",
        "set boxwidth 0.6",
        "set xrange [-0.5:3.5]",
        "unset xtics",
        "plot " + ", \\\n     ".join(plots),
    ]) + "\n"


def condition_script(csv_name: str) -> str:
    """Condition number next to its pairwise lower bound"""
    return "\n".join([
        _preamble(csv_name, "y"),
        "set style fill solid 0.6",
        "set boxwidth 0.6",
        "set xrange [-0.5:1.5]",
        "unset xtics",
        f"plot '{csv_name}' using (0):1 with boxes title 'kappa', \\",
        f"     '{csv_name}' using (1):3 with boxes title 'pair lower bound'",
    ]) + "\n"


def properties_script(csv_name: str) -> str:
    """Violation rate of each randomized check"""
    return "\n".join([
        _preamble(csv_name),
        "set style fill solid 0.6",
        "set boxwidth 0.6",
        "set ylabel 'violations / trials'",
        "set yrange [0:*]",
        f"plot '{csv_name}' using 0:($3/$2):xtic(1) with boxes title 'violation rate'",
    ]) + "\n"


def write_script(path: PathLike, script: str) -> None:
    Path(path).write_text(script)
    logger.debug(f"Wrote gnuplot script {path}")
