"""Flat sectioned key-value config files.

Syntax: ``[section]`` headers, ``key = value`` lines, ``#`` comments.
Parsing is schema-driven and rejects unknown sections and keys outright so
experiment-config typos fail loudly instead of silently using defaults.
"""

from .errors import ConfigError


def parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def parse_config(text: str, schema: dict) -> dict:
    """Parse into {section: {key: typed value}} per the schema.

    The schema maps section name -> {key: converter}. Every section in the
    schema appears in the result (possibly empty).
    """
    result = {section: {} for section in schema}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in schema:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in schema[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        if len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        try:
            result[section][key] = schema[section][key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return result


def load_config(path, schema: dict) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), schema)


def dump_config(values: dict) -> str:
    """Render {section: {key: value}} back to config text (echo files)."""
    lines = []
    for section, entries in values.items():
        lines.append(f"[{section}]")
        for key, value in entries.items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def save_config(path, values: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(values))
