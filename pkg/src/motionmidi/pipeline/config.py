"""Key-value configuration files.

Format: one ``key = value`` per line, ``#`` starts a comment. Values are
coerced to int, then float, then bool (true/false), falling back to string.
Command-line flags override file values, which override built-in defaults.
"""
from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def _coerce(text: str):
    text = text.strip()
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def load_config(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        values[key] = _coerce(value)
    return values


def merged(defaults: dict, config: dict | None = None, overrides: dict | None = None) -> dict:
    out = dict(defaults)
    for layer in (config, overrides):
        if layer:
            for key, value in layer.items():
                if value is not None:
                    out[key] = value
    return out
