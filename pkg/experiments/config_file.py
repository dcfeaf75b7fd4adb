"""
Experiment config files.

Grammar:
    # comment
    experiment = outcomes
    pulse.family = SeparatedGaussians
    pulse.n_photons = 2
    sweep.delta_gamma = 0.3, 1, 3

One `key = value` per line; `#` starts a comment and blank lines are ignored.
Keys are `section.field` (only `experiment` is top-level). List fields take
comma-separated values, booleans are true/false, and every value is then
validated by the pydantic model of its section. Problems are reported as
`line N: key: message`.
"""

import typing
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ValidationError

from models.schemas import ExperimentConfig
from utils.errors import ConfigError

SECTIONS = ("pulse", "detector", "sweep", "trajectory", "grid", "correlate", "linear", "quadrature", "output")


def _section_model(section: str) -> type:
    annotation = ExperimentConfig.model_fields[section].annotation
    for candidate in typing.get_args(annotation) or (annotation,):
        if isinstance(candidate, type) and issubclass(candidate, BaseModel):
            return candidate
    raise KeyError(section)


def _is_sequence(model: type, field: str) -> bool:
    origin = typing.get_origin(model.model_fields[field].annotation)
    return origin in (list, tuple, List, Tuple)


def _parse_value(raw: str, sequence: bool) -> Union[str, List[str]]:
    if sequence:
        return [item.strip() for item in raw.split(",") if item.strip()]
    return raw


def parse_config_text(text: str, source: Optional[str] = None, experiment: Optional[str] = None) -> ExperimentConfig:
    """
    Parse config text into an ExperimentConfig.

    `experiment` fills in the experiment when the file does not name one and
    must agree with it when it does.

    Raises:
        ConfigError: with one diagnostic per problem
    """
    diagnostics: List[str] = []
    lines: Dict[str, int] = {}
    data: Dict[str, Any] = {}

    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            diagnostics.append(f"line {number}: expected 'key = value', got '{content}'")
            continue
        key, raw = (part.strip() for part in content.split("=", 1))
        if key in lines:
            diagnostics.append(f"line {number}: {key}: duplicate key (first set on line {lines[key]})")
            continue
        lines[key] = number

        if key == "experiment":
            data["experiment"] = raw
            continue
        section, _, field = key.partition(".")
        if section not in SECTIONS or not field or "." in field:
            diagnostics.append(f"line {number}: {key}: unknown key")
            continue
        model = _section_model(section)
        if field not in model.model_fields:
            diagnostics.append(f"line {number}: {key}: unknown field of section '{section}'")
            continue
        data.setdefault(section, {})[field] = _parse_value(raw, _is_sequence(model, field))

    if experiment is not None:
        if "experiment" not in data:
            data["experiment"] = experiment
        elif data["experiment"] != experiment:
            diagnostics.append(
                f"line {lines['experiment']}: experiment: file describes '{data['experiment']}', not '{experiment}'"
            )
    if "experiment" not in data:
        diagnostics.append("experiment: missing")

    if diagnostics:
        raise ConfigError(diagnostics, source)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError([_describe(error, lines) for error in e.errors()], source) from e


def _describe(error: Dict[str, Any], lines: Dict[str, int]) -> str:
    location = [str(part) for part in error.get("loc", ())]
    key = ".".join(location[:2]) if location else "config"
    line = lines.get(key)
    prefix = f"line {line}: " if line is not None else ""
    return f"{prefix}{key}: {error.get('msg', 'invalid value')}"


def load_config(path: Union[str, Path], experiment: Optional[str] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"{path}: no such config file"], str(path))
    return parse_config_text(path.read_text(encoding="utf-8"), str(path), experiment)


def flatten_config(config: ExperimentConfig) -> List[Tuple[str, str]]:
    """Dotted `key = value` pairs echoing a config, in a stable order."""
    pairs = []
    dumped = config.model_dump(mode="json")
    pairs.append(("experiment", str(dumped.pop("experiment"))))
    for section in SECTIONS:
        values = dumped.get(section)
        if values is None:
            continue
        for field in sorted(values):
            value = values[field]
            if isinstance(value, list):
                text = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            elif value is None:
                continue
            else:
                text = str(value)
            pairs.append((f"{section}.{field}", text))
    return pairs


def render_config(config: ExperimentConfig) -> str:
    """Config text that parses back to the same config."""
    return "".join(f"{key} = {value}\n" for key, value in flatten_config(config))
