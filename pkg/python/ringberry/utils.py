"""
Output helpers: CSV tables, gnuplot data blocks and the run manifest.
"""

import hashlib
import json
import os
import platform
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
import scipy

from .core import ConfigError

FLOAT_FORMAT = "%.12g"


def save_table(table: pd.DataFrame, path: str) -> str:
    """
    Write a table as CSV. Failed numeric cells stay empty, never "NaN".

    Args:
        table: Rows to write; column names should carry their unit.
        path: Destination file.

    Returns:
        The path written.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return path


def _format_cell(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "?"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def emit_plot_data(table: pd.DataFrame, path: str, style: str = "csv",
                   series: Optional[str] = None,
                   columns: Optional[List[str]] = None) -> str:
    """
    Write plot data either as CSV or as gnuplot blocks, one block per value of
    ``series`` separated by two blank lines (addressable with ``index``).
    """
    if table.empty:
        raise ConfigError(["nothing to plot: empty table"], path)
    if style == "csv":
        return save_table(table if columns is None else table[columns], path)
    if style != "gnuplot-block":
        raise ValueError(f"unknown plot style {style!r}")

    columns = list(columns or [c for c in table.columns if c != series])
    groups = [(None, table)] if series is None else list(table.groupby(series, sort=False))
    blocks = []
    for key, rows in groups:
        lines = []
        if series is not None:
            lines.append(f"# {series} = {_format_cell(key)}")
        lines.append("# " + " ".join(columns))
        for values in rows[columns].itertuples(index=False):
            lines.append(" ".join(_format_cell(v) for v in values))
        blocks.append("\n".join(lines))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n\n\n".join(blocks) + "\n")
    return path


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def library_versions() -> Dict[str, str]:
    from . import __version__
    return {
        "ringberry": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "python": platform.python_version(),
    }


def write_manifest(out_dir: str, subcommand: str, config_path: Optional[str],
                   config_digest: Optional[str], seed: int, wall_time: float,
                   files: Iterable[str], status: str = "ok",
                   error: Optional[str] = None) -> str:
    """Record what produced the files in ``out_dir`` as run_manifest.json."""
    manifest = {
        "subcommand": subcommand,
        "config": config_path,
        "config_sha256": config_digest,
        "seed": seed,
        "versions": library_versions(),
        "wall_time_s": round(wall_time, 6),
        "files": {os.path.basename(f): file_sha256(f) for f in sorted(files)},
        "status": status,
    }
    if error:
        manifest["error"] = error
    path = os.path.join(out_dir, "run_manifest.json")
    os.makedirs(out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
