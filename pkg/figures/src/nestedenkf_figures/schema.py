"""Readers for the harness's flat-file interface.

Every harness CSV starts with a magic comment ``# nestedenkf-csv-v<N> <kind>``
followed by a header row; the JSON summary carries ``schema_version``.  All
readers here fail loudly — naming the file and what is wrong — instead of
parsing unexpected input into a misleading plot.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
MAGIC_PREFIX = "# nestedenkf-csv-v"


class SchemaError(ValueError):
    """An input file does not match the documented harness schema."""


def read_table(path, kind, required=()):
    """Read a harness CSV into ``(header, float ndarray)``.

    Checks the magic line, schema version, csv kind, the presence of every
    column named in ``required``, and that at least one data row exists.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if not magic.startswith(MAGIC_PREFIX):
            raise SchemaError(f"{path}: not a nestedenkf CSV "
                              "(missing magic header line)")
        words = magic.split()
        got_version = int(words[1].rsplit("-v", 1)[1])
        if got_version != SCHEMA_VERSION:
            raise SchemaError(f"{path}: schema v{got_version}, this reader "
                              f"understands v{SCHEMA_VERSION}")
        got_kind = words[2]
        if got_kind != kind:
            raise SchemaError(f"{path}: csv kind {got_kind!r}, "
                              f"expected {kind!r}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise SchemaError(f"{path}: missing header row")
        missing = [name for name in required if name not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) "
                              f"{', '.join(repr(m) for m in missing)}")
        try:
            data = np.array([[float(v) for v in row]
                             for row in reader if row], dtype=float)
        except ValueError as err:
            raise SchemaError(f"{path}: non-numeric cell ({err})") from err
    if data.size == 0:
        raise SchemaError(f"{path}: no data rows")
    if data.shape[1] != len(header):
        raise SchemaError(f"{path}: rows have {data.shape[1]} cells but the "
                          f"header has {len(header)} columns")
    return header, data


def read_summary(path, required=()):
    """Read a harness JSON summary, checking schema version and keys."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as err:
            raise SchemaError(f"{path}: not valid JSON ({err})") from err
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: summary must be a JSON object")
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema_version "
                          f"{payload.get('schema_version')!r}, expected "
                          f"{SCHEMA_VERSION}")
    missing = [k for k in required if k not in payload]
    if missing:
        raise SchemaError(f"{path}: missing key(s) "
                          f"{', '.join(repr(m) for m in missing)}")
    return payload


def parameter_columns(header, suffix):
    """Names of the ``<parameter>_<suffix>`` columns, in header order."""
    tail = f"_{suffix}"
    return [name[:-len(tail)] for name in header if name.endswith(tail)]
