from __future__ import annotations

import json

import pytest

from tracescore.tables import Table


@pytest.fixture
def demo_table() -> Table:
    return Table(headers=("name", "wins"), rows=(("alpha", "15"), ("beta", "12")))


@pytest.fixture
def write_jsonl(tmp_path):
    """Write dicts as one-per-line JSON under tmp_path; returns the path."""

    def _write(name: str, rows):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        return path

    return _write
