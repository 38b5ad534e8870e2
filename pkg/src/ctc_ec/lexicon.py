"""Vocabulary, pronunciation lexicon and corpus ingestion.

Word ids are dense and 0-based.  Corpus words come first, in first-appearance
order, followed by the reserved symbols ``UNK, MASK, NULL, BLANK``.  BLANK is
always the final id, so a posterior matrix over the full id axis has BLANK in
its last column.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

UNK = "<unk>"
MASK = "<mask>"
NULL = "<null>"
BLANK = "<blank>"
RESERVED = (UNK, MASK, NULL, BLANK)

PHONE_MASK = "<pmask>"


class LexiconError(ValueError):
    pass


class OOVError(LexiconError):
    def __init__(self, word, position):
        super().__init__(f"out-of-vocabulary word {word!r} at position {position}")
        self.word = word
        self.position = position


def _short_hash(obj) -> str:
    blob = json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Vocab:
    """Word vocabulary with reserved ids appended after the corpus words."""

    words: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)
    _hash: str = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise LexiconError("duplicate vocabulary entries")
        for w in self.words:
            if w in RESERVED or w == PHONE_MASK:
                raise LexiconError(f"reserved symbol {w!r} used as a vocabulary word")
        entries = self.words + RESERVED
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(entries)})
        object.__setattr__(self, "_hash", _short_hash(list(entries)))

    @property
    def entries(self) -> tuple[str, ...]:
        return self.words + RESERVED

    @property
    def num_words(self) -> int:
        return len(self.words)

    @property
    def unk(self) -> int:
        return self.num_words

    @property
    def mask(self) -> int:
        return self.num_words + 1

    @property
    def null(self) -> int:
        return self.num_words + 2

    @property
    def blank(self) -> int:
        return self.num_words + 3

    def __len__(self):
        return len(self.words) + len(RESERVED)

    def __contains__(self, word):
        return word in self._index

    def id_of(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise OOVError(word, None) from None

    def lookup(self, idx: int) -> str:
        return self.entries[idx]

    def encode(self, words: Sequence[str]) -> list[int]:
        out = []
        for pos, w in enumerate(words):
            if w not in self._index:
                raise OOVError(w, pos)
            out.append(self._index[w])
        return out

    def decode(self, ids: Iterable[int]) -> list[str]:
        entries = self.entries
        return [entries[i] for i in ids]

    @property
    def hash(self) -> str:
        return self._hash

    def to_json(self) -> dict:
        return {"words": list(self.words), "hash": self.hash}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        vocab = cls(tuple(obj["words"]))
        if "hash" in obj and obj["hash"] != vocab.hash:
            raise LexiconError(f"vocab hash mismatch: file {obj['hash']} vs computed {vocab.hash}")
        return vocab

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class Lexicon:
    """Single-pronunciation word -> phone mapping with its own phone id space.

    The phone inventory is in first-appearance order; ``PHONE_MASK`` is
    appended as the last phone id.
    """

    prons: dict
    phones: tuple[str, ...]

    def __post_init__(self):
        inventory = set(self.phones)
        if PHONE_MASK in inventory:
            raise LexiconError("PHONE_MASK cannot be part of the phone inventory")
        for word, pron in self.prons.items():
            if not pron:
                raise LexiconError(f"empty pronunciation for {word!r}")
            for p in pron:
                if p not in inventory:
                    raise LexiconError(f"phone {p!r} of {word!r} missing from inventory")
        object.__setattr__(self, "_mean_len",
                           sum(len(p) for p in self.prons.values()) / max(len(self.prons), 1))
        object.__setattr__(self, "_phone_ids", {p: i for i, p in enumerate(self.phones)})
        object.__setattr__(self, "_hash",
                           _short_hash([[w, list(p)] for w, p in self.prons.items()]))

    @classmethod
    def from_prons(cls, prons: dict) -> "Lexicon":
        seen: dict[str, None] = {}
        frozen = {}
        for word, pron in prons.items():
            frozen[word] = tuple(pron)
            for p in pron:
                seen.setdefault(p, None)
        return cls(frozen, tuple(seen))

    @property
    def phone_inventory(self) -> tuple[str, ...]:
        return self.phones + (PHONE_MASK,)

    @property
    def phone_mask_id(self) -> int:
        return len(self.phones)

    def __contains__(self, word):
        return word in self.prons

    def __getitem__(self, word) -> tuple[str, ...]:
        return self.prons[word]

    def __len__(self):
        return len(self.prons)

    def mean_pron_length(self) -> float:
        return self._mean_len

    @property
    def phone_ids(self) -> dict:
        return self._phone_ids

    @property
    def hash(self) -> str:
        return self._hash

    def save(self, path, header: str | None = None):
        lines = []
        if header:
            lines.extend("# " + h for h in header.splitlines())
        lines.extend(f"{w}\t{' '.join(p)}" for w, p in self.prons.items())
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_lexicon(path) -> Lexicon:
    """Parse a ``word<TAB>phone phone ...`` file; ``#`` lines are comments."""
    prons: dict[str, tuple[str, ...]] = {}
    first_line: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if line.count("\t") != 1:
                raise LexiconError(f"{path}:{lineno}: malformed line, expected word<TAB>phones")
            word, phones = line.split("\t")
            word = word.strip()
            if not word or len(word.split()) != 1:
                raise LexiconError(f"{path}:{lineno}: malformed word field {word!r}")
            pron = tuple(phones.split())
            if not pron:
                raise LexiconError(f"{path}:{lineno}: empty pronunciation for {word!r}")
            if word in prons:
                raise LexiconError(
                    f"{path}: duplicate entry for {word!r} on lines {first_line[word]} and {lineno}")
            prons[word] = pron
            first_line[word] = lineno
    return Lexicon.from_prons(prons)


def words_to_phones(words: Sequence[str], lex: Lexicon) -> list[str]:
    out: list[str] = []
    for pos, w in enumerate(words):
        try:
            out.extend(lex.prons[w])
        except KeyError:
            raise OOVError(w, pos) from None
    return out


def check_utterance(words: Sequence[str]):
    if not words:
        raise LexiconError("empty utterance")
    for w in words:
        if w in RESERVED or w == PHONE_MASK:
            raise LexiconError(f"reserved symbol {w!r} in corpus")


def load_corpus(path) -> list[list[str]]:
    corpus = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            words = raw.split()
            if not words:
                continue
            try:
                check_utterance(words)
            except LexiconError as err:
                raise LexiconError(f"{path}:{lineno}: {err}") from None
            corpus.append(words)
    return corpus


def save_corpus(corpus: Iterable[Sequence[str]], path):
    Path(path).write_text("".join(" ".join(u) + "\n" for u in corpus), encoding="utf-8")


def build_vocab(corpus: Iterable[Sequence[str]]) -> Vocab:
    seen: dict[str, None] = {}
    n = 0
    for utt in corpus:
        check_utterance(utt)
        n += 1
        for w in utt:
            seen.setdefault(w, None)
    if n == 0:
        raise LexiconError("cannot build a vocabulary from an empty corpus")
    return Vocab(tuple(seen))
