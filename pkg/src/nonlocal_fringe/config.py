"""INI run configuration with line-numbered errors and ``key=value`` overrides."""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import InputError

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_OPTION = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


class ConfigError(InputError):
    pass


def default_config_path() -> Path:
    return Path(str(resources.files("nonlocal_fringe") / "data" / "paper.cfg"))


@dataclass
class RunConfig:
    """Parsed config file plus provenance (file name, line of every key)."""

    parser: configparser.ConfigParser
    source: str = "<string>"
    lines: dict[tuple[str, str], int] = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.ParsingError as exc:
            no, line = exc.errors[0]
            raise ConfigError(f"{source}:{no}: cannot parse {line.strip()!r}") from None
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"{source}:{exc.lineno}: duplicate key {exc.option!r} in [{exc.section}]") from None
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"{source}:{exc.lineno}: duplicate section [{exc.section}]") from None
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError(f"{source}:{exc.lineno}: key outside of any [section]") from None
        lines: dict[tuple[str, str], int] = {}
        section = None
        for no, raw in enumerate(text.splitlines(), start=1):
            if m := _SECTION.match(raw):
                section = m.group(1).strip()
            elif section and (m := _OPTION.match(raw)) and not raw[:1].isspace():
                lines[(section, m.group(1).strip())] = no
        return cls(parser, source, lines)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RunConfig":
        p = Path(path) if path is not None else default_config_path()
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        return cls.from_text(text, str(p))

    def where(self, section: str, key: str) -> str:
        no = self.lines.get((section, key))
        return f"{self.source}:{no}" if no else f"{self.source} [{section}] {key}"

    def sections(self, prefix: str = "") -> list[str]:
        return [s for s in self.parser.sections() if s == prefix or s.startswith(prefix + ".")]

    def apply_overrides(self, overrides: list[str], default_sections: list[str]) -> None:
        """``section.key=value`` sets one key; a bare ``key=value`` sets it in every default section."""
        known = self.parser.sections()
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, value = (s.strip() for s in item.split("=", 1))
            targets = None
            for sec in sorted(known, key=len, reverse=True):
                if key.startswith(sec + "."):
                    targets, key = [sec], key[len(sec) + 1 :]
                    break
            if targets is None:
                targets = default_sections
            if not key:
                raise ConfigError(f"override {item!r} has an empty key")
            for sec in targets:
                if not self.parser.has_section(sec):
                    self.parser.add_section(sec)
                self.parser.set(sec, key, value)
                self.lines.pop((sec, key), None)

    # typed getters ----------------------------------------------------------

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str) -> str:
        if not self.parser.has_section(section):
            raise ConfigError(f"{self.source}: missing section [{section}]")
        if not self.parser.has_option(section, key):
            raise ConfigError(f"{self.source}: [{section}] is missing required key {key!r}")
        return self.parser.get(section, key)

    def float(self, section: str, key: str, default: float | None = None) -> float:
        if default is not None and not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: {key} expects a number, got {text!r}") from None

    def opt_float(self, section: str, key: str) -> float | None:
        return self.float(section, key) if self.has(section, key) else None

    def int(self, section: str, key: str, default: int | None = None) -> int:
        if default is not None and not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            val = float(text)
            if not val.is_integer():
                raise ValueError(text)
            return int(val)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: {key} expects an integer, got {text!r}") from None

    def floats(self, section: str, key: str, default: list[float] | None = None) -> list[float]:
        if default is not None and not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            return [float(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: {key} expects comma-separated numbers") from None

    def strings(self, section: str, key: str, default: list[str] | None = None) -> list[str]:
        if default is not None and not self.has(section, key):
            return default
        return [t.strip() for t in self.raw(section, key).split(",") if t.strip()]

    def str(self, section: str, key: str, default: str | None = None) -> str:
        if default is not None and not self.has(section, key):
            return default
        return self.raw(section, key).strip()

    def bool(self, section: str, key: str, default: bool | None = None) -> bool:
        if default is not None and not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: {key} expects true/false") from None
