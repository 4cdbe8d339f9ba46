"""
CSV and JSON writers for CLI data outputs.

CSV files start with `# ` comment lines carrying the RunConfig as JSON,
followed by a header row. JSON documents carry the RunConfig under a
top-level "config" key. Output goes to a file or, when no path is given,
to standard output.
"""

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, TextIO

import mpmath
import structlog
from pydantic import BaseModel

from models import RunConfig

logger = structlog.get_logger()

SCIENTIFIC_BELOW = 1e-4


def format_number(value: Any, digits: Optional[int] = None, scientific: bool = False) -> str:
    """
    Render a cell: '.' decimal separator, scientific notation for |x| < 1e-4.

    With scientific=True every real is written as mantissa and exponent with
    `digits` significant digits.
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, mpmath.mpf):
        n = digits or mpmath.mp.dps
        if scientific or (value != 0 and abs(value) < SCIENTIFIC_BELOW):
            return mpmath.nstr(value, n, min_fixed=0, max_fixed=0, strip_zeros=False, show_zero_exponent=True)
        return mpmath.nstr(value, n, strip_zeros=False)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return str(value)
        if scientific:
            return f"{value:.{(digits or 17) - 1}e}"
        if value != 0.0 and abs(value) < SCIENTIFIC_BELOW:
            return f"{value:.16e}"
        return repr(value)
    return str(value)


def config_comment_lines(config: RunConfig) -> list[str]:
    return ["# config: " + config.model_dump_json()]


def render_csv(
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: Optional[RunConfig] = None,
    digits: Optional[int] = None,
    scientific: bool = False,
) -> str:
    buffer = io.StringIO()
    if config is not None:
        for line in config_comment_lines(config):
            buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v, digits, scientific) for v in row])
    return buffer.getvalue()


def render_json(payload: dict, config: Optional[RunConfig] = None) -> str:
    document = dict(payload)
    if config is not None:
        document = {"config": config.model_dump(mode="json"), **document}
    return json.dumps(document, indent=2, default=str) + "\n"


def emit(text: str, path: Optional[str], stream: Optional[TextIO] = None) -> Optional[Path]:
    """Write text to `path`, or to stdout when path is None or '-'."""
    if path is None or path == "-":
        (stream or sys.stdout).write(text)
        return None
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    logger.info("output_written", path=str(target), bytes=len(text))
    return target


def write_csv(
    path: Optional[str],
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: Optional[RunConfig] = None,
    digits: Optional[int] = None,
    scientific: bool = False,
) -> Optional[Path]:
    return emit(render_csv(header, rows, config, digits, scientific), path)


def write_text(path: Optional[str], lines: Sequence[str], config: Optional[RunConfig] = None) -> Optional[Path]:
    """Plain-text report, preceded by the RunConfig comment lines."""
    head = config_comment_lines(config) if config is not None else []
    return emit("\n".join(head + list(lines)) + "\n", path)


def write_json(path: Optional[str], payload: dict, config: Optional[RunConfig] = None) -> Optional[Path]:
    return emit(render_json(payload, config), path)


def read_csv_rows(path: str) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by write_csv, skipping comment lines."""
    lines = [
        line for line in Path(path).read_text(encoding="utf-8").splitlines()
        if not line.startswith("#")
    ]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def write_model(path: Optional[str], document: BaseModel) -> Optional[Path]:
    """Write a pydantic output document (config key first) as JSON."""
    payload = document.model_dump(mode="json", by_alias=True)
    return emit(json.dumps(payload, indent=2) + "\n", path)
