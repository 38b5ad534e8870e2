"""JSON Lines readers and writers for posteriors, phone hypotheses,
decoded hypotheses and correction reports.

Every file starts with one header record ``{"header": {...}}`` carrying the
config echo; all following lines are per-utterance records keyed by ``id``.
Floats are written with ``repr`` so they reload bit-exactly.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .ctc import FramePosteriors
from .lexicon import Vocab
from .lm.pcmlm import HashMismatch


class DataError(ValueError):
    """Malformed or inconsistent input file."""


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, allow_nan=False,
                      separators=(",", ":"))


def write_jsonl(path, records: Iterable[dict], header: dict | None = None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps({"header": header or {}}) + "\n")
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path) -> tuple[dict, list[dict]]:
    header: dict = {}
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataError(f"{path}:{lineno}: invalid JSON ({err.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            if "header" in obj and len(obj) == 1:
                if records or header:
                    raise DataError(f"{path}:{lineno}: header record must come first")
                header = obj["header"]
                continue
            if "id" not in obj:
                raise DataError(f"{path}:{lineno}: record without an 'id'")
            records.append(obj)
    ids = [r["id"] for r in records]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate utterance ids")
    return header, records


def write_json(path, obj: dict):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n",
                          encoding="utf-8")


# -- posteriors --------------------------------------------------------------

def posterior_record(post: FramePosteriors) -> dict:
    return {"id": post.id, "frame_sec": post.frame_sec, "vocab_hash": post.vocab_hash,
            "rows": post.rows.tolist()}


def parse_posteriors(rec: dict, vocab: Vocab | None = None) -> FramePosteriors:
    try:
        rows = np.asarray(rec["rows"], dtype=np.float64)
        post = FramePosteriors(rows, float(rec["frame_sec"]), str(rec["id"]),
                               str(rec["vocab_hash"]))
    except (KeyError, TypeError, ValueError) as err:
        raise DataError(f"utterance {rec.get('id')!r}: bad posterior record ({err})") from None
    if vocab is not None:
        if post.vocab_hash != vocab.hash:
            raise HashMismatch("vocab", post.vocab_hash, vocab.hash)
        if rows.shape[1] != len(vocab):
            raise DataError(f"utterance {post.id!r}: {rows.shape[1]} columns, "
                            f"vocab has {len(vocab)} entries")
    try:
        post.validate()
    except ValueError as err:
        raise DataError(str(err)) from None
    return post


def save_posteriors(path, posts: Iterable[FramePosteriors], header: dict | None = None):
    write_jsonl(path, (posterior_record(p) for p in posts), header)


def load_posteriors(path, vocab: Vocab | None = None) -> tuple[dict, list[FramePosteriors]]:
    header, recs = read_jsonl(path)
    return header, [parse_posteriors(r, vocab) for r in recs]


# -- token and phone sequences ---------------------------------------------

def load_sequences(path, key: str) -> tuple[dict, dict]:
    """Map utterance id -> list stored under ``key`` (``words``, ``phones``, ``tokens``)."""
    header, recs = read_jsonl(path)
    out = {}
    for r in recs:
        seq = r.get(key)
        if not isinstance(seq, list) or not all(isinstance(s, str) for s in seq):
            raise DataError(f"{path}: utterance {r['id']!r} lacks a string list {key!r}")
        out[r["id"]] = seq
    return header, out


def save_sequences(path, items: Iterable[tuple[str, list]], key: str, header: dict | None = None,
                   extra: dict | None = None):
    extra = extra or {}
    write_jsonl(path, ({"id": uid, key: list(seq), **extra.get(uid, {})} for uid, seq in items),
                header)


__all__ = ["DataError", "dumps", "write_jsonl", "read_jsonl", "write_json", "posterior_record",
           "parse_posteriors", "save_posteriors", "load_posteriors", "load_sequences",
           "save_sequences"]
