"""Experiment configuration: a plain nested key-value text format.

One ``dotted.key = value`` assignment per line, ``#`` comments, values
parsed as int, float, bool, bare string, or comma-separated list.  Unknown
keys are rejected with line diagnostics; every experiment kind declares
the keys it accepts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KINDS = ("ann-bench", "reg-bench", "attack", "match-demo", "dist-check", "synth")

_TOP_KEYS = {"kind", "seeds", "trials", "out", "check"}
_INSTANCE_KEYS = {
    "n", "d", "c", "r", "kappa", "alpha", "beta", "T", "s", "lam",
    "metric", "steps", "updates", "queries", "arrivals", "synth_kind", "ops",
}
_CONSTANT_KEYS = {
    "c_l", "c_tables", "c_probe", "c_width", "c_r", "c_m", "c_p", "c_pre", "c_a",
    "theta", "k", "l", "s_med", "r_rows", "m_rows", "eps_dp",
    "grid_tau", "grid_min", "grid_max", "reserve", "proj_scale",
}


class ConfigError(ValueError):
    """Malformed or out-of-schema configuration."""


@dataclass
class ExperimentConfig:
    kind: str
    seeds: list[int] = field(default_factory=lambda: [0])
    trials: int | None = None
    out: str | None = None
    check: bool = False
    instance: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    raw_text: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")


def _parse_scalar(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(part) for part in text.split(",") if part.strip()]
    return _parse_scalar(text)


def parse_config_text(text: str) -> ExperimentConfig:
    kind = None
    top: dict = {}
    instance: dict = {}
    constants: dict = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, value_text = (part.strip() for part in line.split("=", 1))
        value = _parse_value(value_text)
        if "." in key:
            group, sub = key.split(".", 1)
            if group == "instance":
                if sub not in _INSTANCE_KEYS:
                    raise ConfigError(f"line {line_no}: unknown instance key {sub!r}")
                instance[sub] = value
            elif group == "constants":
                if sub not in _CONSTANT_KEYS:
                    raise ConfigError(f"line {line_no}: unknown constants key {sub!r}")
                constants[sub] = value
            else:
                raise ConfigError(f"line {line_no}: unknown group {group!r}")
        else:
            if key not in _TOP_KEYS:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            if key == "kind":
                kind = str(value)
            elif key == "seeds":
                top["seeds"] = [int(v) for v in (value if isinstance(value, list) else [value])]
            elif key == "trials":
                top["trials"] = int(value)
            elif key == "check":
                top["check"] = bool(value)
            else:
                top["out"] = str(value)
    if kind is None:
        raise ConfigError("config is missing the 'kind' key")
    return ExperimentConfig(
        kind=kind, instance=instance, constants=constants, raw_text=text, **top
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
