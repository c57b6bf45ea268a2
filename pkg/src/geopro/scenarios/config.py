"""Config resolution: catalog defaults, file merge, dotted overrides and schema checks."""

from __future__ import annotations

import copy
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from ..errors import ConfigError
from .catalog import CATALOG, default_config

SECTIONS = ("scenario", "model", "geometry", "behaviors", "cost", "solver", "output")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("geopro").joinpath("schemas", name).read_text()
    return json.loads(text)


def deep_merge(base: dict, extra: dict) -> dict:
    """Recursive dict merge; lists and scalars in ``extra`` replace those in ``base``."""
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_value(text: str):
    """JSON literal when it parses, otherwise the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError("overrides must look like key=value", item)
    key, value = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError("empty override key", item)
    return key, parse_value(value)


def apply_override(cfg: dict, key: str, value) -> None:
    """Set an existing dotted path; unknown keys are rejected."""
    parts = key.split(".")
    node = cfg
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        where = ".".join(parts[: i + 1])
        if isinstance(node, list):
            try:
                idx = int(part)
            except ValueError:
                raise ConfigError("list entries are addressed by index", where) from None
            if not -len(node) <= idx < len(node):
                raise ConfigError("unknown override key (index out of range)", where)
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if part not in node:
                raise ConfigError("unknown override key", where)
            if last:
                node[part] = value
            else:
                node = node[part]
        else:
            raise ConfigError("cannot descend into a scalar", where)


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    items = overrides.items() if isinstance(overrides, dict) else [parse_override(o) if isinstance(o, str) else o
                                                                    for o in (overrides or [])]
    for key, value in items:
        apply_override(cfg, key, value)
    return cfg


def _line_of(text: str | None, path) -> int | None:
    """Best-effort line number of a JSON path in ``text``."""
    if not text:
        return None
    pos = 0
    found = None
    for part in path:
        if isinstance(part, int):
            continue
        j = text.find(f'"{part}"', pos)
        if j < 0:
            break
        pos, found = j, j
    return None if found is None else text.count("\n", 0, found) + 1


def validate(cfg: dict, text: str | None = None, partial: bool = False) -> None:
    """Raise ``ConfigError`` naming the path (and line, for file input) of the first violation.

    ``partial`` accepts missing top-level sections (a file to be merged onto
    catalog defaults); sections that are present must still be complete.
    """
    schema = load_schema("config.schema.json")
    if partial:
        schema = {k: v for k, v in schema.items() if k != "required"}
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), str(list(e.absolute_path))))
    if not errors:
        return
    e = errors[0]
    path = list(e.absolute_path)
    if e.validator == "required":
        missing = [r for r in e.validator_value if isinstance(e.instance, dict) and r not in e.instance]
        if missing:
            path = path + [missing[0]]
    dotted = ".".join(str(p) for p in path) or "<root>"
    line = _line_of(text, list(e.absolute_path))
    msg = e.message + (f" (line {line})" if line else "")
    raise ConfigError(msg, dotted)


def resolve_config(scenario: str | None = None, config: dict | None = None, overrides=None,
                   text: str | None = None) -> dict:
    """Catalog defaults for the named scenario, merged with ``config`` and then ``overrides``."""
    config = copy.deepcopy(config or {})
    if config:
        validate(config, text, partial=True)
    name = scenario or config.get("scenario", {}).get("name")
    if name is None:
        raise ConfigError("no scenario name given", "scenario.name")
    if name in CATALOG:
        base = default_config(name)
        run = config.pop("run", None)
        merged = deep_merge(base, config)
        if run is not None:
            merged["run"] = run
    elif all(s in config for s in SECTIONS):
        merged = config
    else:
        raise ConfigError(f"unknown scenario {name!r}; available: {', '.join(sorted(CATALOG))}", "scenario.name")
    merged.setdefault("scenario", {})["name"] = name
    validate(merged, text)
    file_overrides = merged.get("run", {}).get("overrides", {})
    if file_overrides:
        merged = apply_overrides(merged, file_overrides)
    if overrides:
        merged = apply_overrides(merged, overrides)
    validate(merged, text)
    return merged


def load_config_file(path) -> tuple[dict, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(p)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", str(p)) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", str(p))
    return data, text
