"""Deterministic tabular output.

Tables carry their configuration in the header (echo + content hash) so any
output file can be reproduced exactly; numbers are serialized with 17
significant digits, making CSV round trips bit-exact.  No timestamps: equal
configs must give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


def config_hash(config: dict) -> str:
    """Git-style content hash (sha1 over a canonical blob) of a config tree."""
    payload = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(payload) + payload).hexdigest()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


@dataclass
class OutputTable:
    """Named columns, row-major records, '#'-prefixed header metadata."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add_row(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"row has {len(values)} fields, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def to_csv(self) -> str:
        lines = [f"# {k}: {v}" for k, v in self.meta.items()]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {"meta": self.meta, "columns": self.columns, "rows": self.rows}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}")
