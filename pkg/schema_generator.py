"""
Generate JSON Schemas for the CLI's JSON outputs from the pydantic models.

The files in docs/schemas are the contract that `simulate` and `maximize`
JSON documents validate against. Regenerate them after changing models.py:

    python cli.py schema --out docs/schemas
"""

import json
from pathlib import Path
from typing import Optional

import structlog

from models import MaximizeOutput, SimulateOutput

logger = structlog.get_logger()

DEFAULT_SCHEMA_DIR = Path("docs/schemas")

SCHEMA_MODELS = {
    "simulate": SimulateOutput,
    "maximize": MaximizeOutput,
}


def build_schema(name: str) -> dict:
    """
    JSON Schema of one output document.

    Args:
        name: Output name (key of SCHEMA_MODELS)

    Returns:
        dict: Draft 2020-12 schema in serialization mode (wire field names)
    """
    model = SCHEMA_MODELS[name]
    schema = model.model_json_schema(by_alias=True, mode="serialization")
    schema["$schema"] = "https://json-schema.org/draft/2020-12/schema"
    schema["$id"] = f"{name}.schema.json"
    return schema


def save_schemas(output_dir: Optional[str] = None) -> list[Path]:
    """
    Write every output schema to `<output_dir>/<name>.schema.json`.

    Returns:
        list: Paths written
    """
    target = Path(output_dir) if output_dir else DEFAULT_SCHEMA_DIR
    target.mkdir(parents=True, exist_ok=True)

    written = []
    for name in SCHEMA_MODELS:
        path = target / f"{name}.schema.json"
        path.write_text(json.dumps(build_schema(name), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
        logger.info("schema_written", name=name, path=str(path))
    return written


def load_schema(name: str, schema_dir: Optional[str] = None) -> dict:
    """Load a shipped schema; empty dict if it has not been generated."""
    path = Path(schema_dir or DEFAULT_SCHEMA_DIR) / f"{name}.schema.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        logger.warning("schema_missing", name=name, path=str(path))
        return {}
