"""JSON-lines, CSV and flat binary output."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .sheet_sim import Skeleton


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(record: dict) -> str:
    return json.dumps(record, default=_plain, sort_keys=False)


def write_jsonl(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r in records:
            fh.write(dumps(r) + "\n")
    return path


def read_jsonl(path) -> list:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path, rows, columns=None) -> Path:
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = columns or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: _plain(v) if isinstance(v, (np.generic, np.ndarray, tuple)) else v for k, v in r.items()})
    return path


def skeleton_metadata(sk: Skeleton) -> dict:
    return {"record": "skeleton", "d": sk.dim, "T": list(sk.T), "dt": list(sk.dt), "cells": list(sk.cells),
            "seed": sk.seed, "eps": sk.eps, "n_bands": sk.n_bands, "neglected_variance": sk.neglected_var,
            "compensator_rate": sk.comp_rate, "large_jumps": int(len(sk.jump_size)),
            "small_jumps": int(len(sk.small_size)), "triplet": sk.triplet.to_dict()}


def export_skeleton(sk: Skeleton, out_dir, stem: str = "skeleton") -> dict:
    """Write the event list, grids and metadata of a skeleton.

    ``<stem>.events.csv`` holds one row per jump (``kind``, ``band``,
    ``t0..t{d-1}``, ``size``). For ``d = 1`` the grid goes to
    ``<stem>.grid.csv`` (``t``, standard Brownian ``W``, ``X``); otherwise the
    standard Brownian sheet is written C-ordered little-endian float64 to
    ``<stem>.W.bin``. ``<stem>.jsonl`` starts with the metadata record and
    lists one descriptor per binary array.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = sk.dim
    cols = ["kind", "band"] + [f"t{i}" for i in range(d)] + ["size"]
    rows = []
    for p, y in zip(sk.jump_pos, sk.jump_size):
        rows.append({"kind": "large", "band": -1, **{f"t{i}": p[i] for i in range(d)}, "size": y})
    for p, y, b in zip(sk.small_pos, sk.small_size, sk.small_band):
        rows.append({"kind": "small", "band": int(b), **{f"t{i}": p[i] for i in range(d)}, "size": y})
    files = {"events": write_csv(out / f"{stem}.events.csv", rows, cols)}
    records = [skeleton_metadata(sk)]
    if d == 1:
        t = sk.axes()[0]
        W = sk.W if sk.W is not None else np.zeros_like(t)
        X = sk.evaluate(t[:, None])
        files["grid"] = write_csv(out / f"{stem}.grid.csv",
                                  ({"t": a, "W": b, "X": c} for a, b, c in zip(t, W, X)), ["t", "W", "X"])
    elif sk.W is not None:
        p = out / f"{stem}.W.bin"
        np.ascontiguousarray(sk.W, dtype="<f8").tofile(p)
        files["W"] = p
        records.append({"record": "array", "name": "W", "file": p.name, "dtype": "<f8", "order": "C",
                        "shape": list(sk.W.shape), "dt": list(sk.dt), "seed": sk.seed})
    files["meta"] = write_jsonl(out / f"{stem}.jsonl", records)
    return files


def load_array(descriptor: dict, base_dir) -> np.ndarray:
    """Read a binary grid described by an ``array`` record."""
    a = np.fromfile(Path(base_dir) / descriptor["file"], dtype=descriptor["dtype"])
    return a.reshape(descriptor["shape"], order=descriptor["order"])
