"""Flat-file interchange formats.

All multi-record files are UTF-8 JSON lines:

  embeddings:    {"id": str, "vec": [float, ...]}        one record per item
  topic catalog: {"topic": str, "items": [str, ...]}     one record per topic
  interactions:  {"impression": str, "user": str, "item": str, "label": 0|1}

A trained simulator is a single JSON document with dims, vectors, threshold,
flip probability and seed. ``validate_*`` helpers raise SchemaError with the
offending line number so ingestion failures are actionable.
"""

from __future__ import annotations

import json

import numpy as np

from banditrec.simulator import GroundTruthModel, LoggedInteraction


class SchemaError(ValueError):
    pass


def _iter_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc


# -- embedding table ---------------------------------------------------------


def read_embeddings(path) -> dict:
    """Load an item (or topic) embedding table; vectors must share one length."""
    table: dict = {}
    width = None
    for lineno, rec in _iter_jsonl(path):
        if not isinstance(rec, dict) or "id" not in rec or "vec" not in rec:
            raise SchemaError(f"{path}:{lineno}: expected keys 'id' and 'vec'")
        if not isinstance(rec["id"], str):
            raise SchemaError(f"{path}:{lineno}: 'id' must be a string")
        vec = rec["vec"]
        if not isinstance(vec, list) or not all(isinstance(v, (int, float)) for v in vec):
            raise SchemaError(f"{path}:{lineno}: 'vec' must be a list of numbers")
        if width is None:
            width = len(vec)
        elif len(vec) != width:
            raise SchemaError(f"{path}:{lineno}: vector length {len(vec)} != {width}")
        if rec["id"] in table:
            raise SchemaError(f"{path}:{lineno}: duplicate id {rec['id']!r}")
        table[rec["id"]] = np.asarray(vec, dtype=float)
    if not table:
        raise SchemaError(f"{path}: no embedding records")
    return table


def write_embeddings(table: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in sorted(table):
            fh.write(json.dumps({"id": item, "vec": [float(v) for v in table[item]]}) + "\n")


def validate_embeddings(path) -> int:
    """Return the record count, raising SchemaError on any malformed line."""
    return len(read_embeddings(path))


# -- topic catalog -----------------------------------------------------------


def validate_catalog(path) -> int:
    count = 0
    seen = set()
    for lineno, rec in _iter_jsonl(path):
        if not isinstance(rec, dict) or "topic" not in rec or "items" not in rec:
            raise SchemaError(f"{path}:{lineno}: expected keys 'topic' and 'items'")
        if not isinstance(rec["topic"], str):
            raise SchemaError(f"{path}:{lineno}: 'topic' must be a string")
        items = rec["items"]
        if not isinstance(items, list) or not items or not all(isinstance(i, str) for i in items):
            raise SchemaError(f"{path}:{lineno}: 'items' must be a non-empty list of strings")
        if rec["topic"] in seen:
            raise SchemaError(f"{path}:{lineno}: duplicate topic {rec['topic']!r}")
        seen.add(rec["topic"])
        count += 1
    if count == 0:
        raise SchemaError(f"{path}: no topic records")
    return count


# -- logged interactions -------------------------------------------------------


def read_logs(path) -> list:
    logs = []
    for lineno, rec in _iter_jsonl(path):
        if not isinstance(rec, dict) or set(rec) < {"impression", "user", "item", "label"}:
            raise SchemaError(f"{path}:{lineno}: expected keys impression/user/item/label")
        if rec["label"] not in (0, 1):
            raise SchemaError(f"{path}:{lineno}: label must be 0 or 1, got {rec['label']!r}")
        if not all(isinstance(rec[k], str) for k in ("impression", "user", "item")):
            raise SchemaError(f"{path}:{lineno}: impression/user/item must be strings")
        logs.append(LoggedInteraction(rec["impression"], rec["user"], rec["item"], int(rec["label"])))
    if not logs:
        raise SchemaError(f"{path}: no interaction records")
    return logs


def write_logs(logs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in logs:
            fh.write(
                json.dumps(
                    {"impression": rec.impression, "user": rec.user, "item": rec.item, "label": int(rec.label)}
                )
                + "\n"
            )


def validate_logs(path) -> int:
    return len(read_logs(path))


# -- trained simulator ---------------------------------------------------------


def write_simulator(model: GroundTruthModel, path, seed: int = 0) -> None:
    doc = {
        "dim": len(next(iter(model.user_vecs.values()))),
        "threshold": model.threshold,
        "flip_prob": model.flip_prob,
        "seed": seed,
        "users": {u: [float(v) for v in vec] for u, vec in sorted(model.user_vecs.items())},
        "items": {i: [float(v) for v in vec] for i, vec in sorted(model.item_vecs.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_simulator(path) -> GroundTruthModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("dim", "threshold", "flip_prob", "users", "items"):
        if key not in doc:
            raise SchemaError(f"{path}: missing key {key!r}")
    dim = int(doc["dim"])
    users = {u: np.asarray(v, dtype=float) for u, v in doc["users"].items()}
    items = {i: np.asarray(v, dtype=float) for i, v in doc["items"].items()}
    for name, table in (("user", users), ("item", items)):
        for k, vec in table.items():
            if vec.shape != (dim,):
                raise SchemaError(f"{path}: {name} {k!r} has dim {vec.shape}, expected ({dim},)")
    return GroundTruthModel(
        user_vecs=users,
        item_vecs=items,
        threshold=float(doc["threshold"]),
        flip_prob=float(doc["flip_prob"]),
    )
