"""File output for the command line: atomic writes, scan CSVs and run summaries.

CSV headers by scan kind::

    omega   sample,omega,fom,fom_norm,beta_int,status
    cqho    num_states,sample,omega,fom,fom_norm,beta_int,status
    search  rank,trial,fom,fom_norm,beta_int,target_beta_int,status
    power   eta,beta_int

Floats are written with 17 significant digits; a missing ``beta_int`` (any
non-ok status) is an empty field and an unbounded FOM is ``inf``.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .pipelines import ScanRecord

HEADERS = {
    "omega": ["sample", "omega", "fom", "fom_norm", "beta_int", "status"],
    "cqho": ["num_states", "sample", "omega", "fom", "fom_norm", "beta_int", "status"],
    "search": ["rank", "trial", "fom", "fom_norm", "beta_int", "target_beta_int", "status"],
    "power": ["eta", "beta_int"],
}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


@contextlib.contextmanager
def atomic_path(path) -> Iterator[Path]:
    """Yield a temporary sibling of ``path``; rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(fd)
    tmp = Path(tmp)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def write_text_atomic(path, text: str) -> None:
    with atomic_path(path) as tmp:
        tmp.write_text(text, encoding="utf-8")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no infinities; keep them readable as strings
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json_atomic(path, doc: dict) -> None:
    # repr-based float output is the shortest string that round-trips exactly
    write_text_atomic(path, json.dumps(_json_safe(doc), indent=2, allow_nan=False) + "\n")


def csv_text(header: list[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def record_rows(kind: str, records: list[ScanRecord]) -> list[list]:
    if kind == "omega":
        return [[r.sample, r.omega, r.fom, r.fom_norm, r.beta_int, r.status] for r in records]
    if kind == "cqho":
        return [[r.num_states, r.sample, r.omega, r.fom, r.fom_norm, r.beta_int, r.status] for r in records]
    if kind == "search":
        return [
            [rank, r.sample, r.fom, r.fom_norm, r.beta_int, r.target_beta_int, r.status]
            for rank, r in enumerate(records, start=1)
        ]
    raise ValueError(f"unknown record kind {kind!r}")


def write_records_csv(path, kind: str, records: list[ScanRecord]) -> None:
    write_text_atomic(path, csv_text(HEADERS[kind], record_rows(kind, records)))


def write_power_csv(path, curve: list[tuple[float, float]]) -> None:
    write_text_atomic(path, csv_text(HEADERS["power"], curve))


def write_potential_csv(path, potential, x: np.ndarray) -> None:
    """Sample a potential on ``x`` as a two-column ``x,V`` CSV."""
    write_text_atomic(path, csv_text(["x", "V"], zip(x, potential(x))))


def write_wavefunctions(path, sol) -> None:
    from .eigensolver import write_wavefunctions_csv

    with atomic_path(path) as tmp:
        write_wavefunctions_csv(sol, tmp)


def summary_document(kind: str, config: dict, seed, best, timings: dict, extra: dict | None = None) -> dict:
    doc = {"kind": kind, "seed": seed, "config": config, "best": best, "timings": timings}
    if extra:
        doc.update(extra)
    return doc
