"""Line-oriented `directive key=value ...` documents.

Scene build files and edit scripts share this grammar: one directive per
line, `#` starts a comment, values are scalars or comma-separated vectors.
Errors carry the 1-based line and column they were found at.
"""

from __future__ import annotations

from dataclasses import dataclass


class ManifestError(ValueError):
    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Directive:
    name: str
    args: dict[str, str]
    line: int

    def require(self, *keys: str) -> None:
        for k in keys:
            if k not in self.args:
                raise ManifestError(f"{self.name!r} requires {k}=", self.line)

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.args:
            if default is None:
                raise ManifestError(f"{self.name!r} requires {key}=", self.line)
            return default
        try:
            return float(self.args[key])
        except ValueError:
            raise ManifestError(f"{key}= is not a number: {self.args[key]!r}", self.line) from None

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.args:
            if default is None:
                raise ManifestError(f"{self.name!r} requires {key}=", self.line)
            return default
        try:
            return int(self.args[key])
        except ValueError:
            raise ManifestError(f"{key}= is not an integer: {self.args[key]!r}", self.line) from None

    def get_vec(self, key: str, size: int, default=None):
        if key not in self.args:
            if default is None:
                raise ManifestError(f"{self.name!r} requires {key}=", self.line)
            return list(default)
        parts = self.args[key].split(",")
        if len(parts) != size:
            raise ManifestError(
                f"{key}= needs {size} comma-separated numbers, got {self.args[key]!r}", self.line
            )
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise ManifestError(f"{key}= is not numeric: {self.args[key]!r}", self.line) from None

    def get_str(self, key: str, default: str | None = None) -> str:
        if key not in self.args:
            if default is None:
                raise ManifestError(f"{self.name!r} requires {key}=", self.line)
            return default
        return self.args[key]


def parse_manifest(text: str) -> list[Directive]:
    """Tokenize a manifest document into directives, validating the
    `name key=value ...` shape of every line."""
    out: list[Directive] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        tokens = line.split()
        name = tokens[0]
        if "=" in name:
            raise ManifestError(f"expected a directive name, got {name!r}", lineno,
                                raw.index(name) + 1)
        args: dict[str, str] = {}
        for tok in tokens[1:]:
            col = raw.index(tok) + 1
            if "=" not in tok:
                raise ManifestError(f"expected key=value, got {tok!r}", lineno, col)
            key, _, value = tok.partition("=")
            if not key or not value:
                raise ManifestError(f"malformed key=value: {tok!r}", lineno, col)
            if key in args:
                raise ManifestError(f"duplicate key {key!r}", lineno, col)
            args[key] = value
        out.append(Directive(name=name, args=args, line=lineno))
    return out
