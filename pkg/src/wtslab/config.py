"""Flat ``key = value`` config files: one pair per line, ``#`` comments."""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


class ConfigView:
    """Typed accessors over a parsed config, tracking which keys were read."""

    def __init__(self, values: dict[str, str], source: str = "<config>"):
        self.values = values
        self.source = source

    def _raw(self, key: str, default=None, required: bool = False) -> str | None:
        if key in self.values:
            return self.values[key]
        if required:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        return default

    def get_str(self, key: str, default: str | None = None, required: bool = False):
        return self._raw(key, default, required)

    def get_int(self, key: str, default: int | None = None, required: bool = False):
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{self.source}: key {key!r} must be an integer, got {raw!r}") from exc

    def get_float(self, key: str, default: float | None = None, required: bool = False):
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{self.source}: key {key!r} must be a number, got {raw!r}") from exc

    def get_bool(self, key: str, default: bool | None = None, required: bool = False):
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{self.source}: key {key!r} must be a boolean, got {raw!r}")

    def get_list(self, key: str, conv, default=None, required: bool = False):
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        items = [tok.strip() for tok in raw.split(",") if tok.strip()]
        try:
            return [conv(tok) for tok in items]
        except ValueError as exc:
            raise ConfigError(f"{self.source}: key {key!r} has a malformed list entry") from exc
