"""Autoregressive n-gram LM with additive smoothing that backs off to
shorter histories.

``P(w | h) = (c(h, w) + delta * K * P(w | h')) / (c(h) + delta * K)`` where
``h'`` drops the oldest history word and ``K`` is the output alphabet size
(words, UNK, EOS).  The recursion bottoms out in the uniform distribution, so
every conditional is a proper distribution and every token gets non-zero mass.
"""
from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from ..lexicon import UNK, LexiconError

BOS = "<s>"
EOS = "</s>"


class NGramLM:
    def __init__(self, order: int = 3, delta: float = 0.1, words: Iterable[str] = ()):
        if order < 1:
            raise ValueError("n-gram order must be >= 1")
        if delta <= 0:
            raise ValueError("delta must be > 0")
        self.order = order
        self.delta = delta
        self.words = list(dict.fromkeys(words))
        # counts[k][history of length k] -> Counter of next tokens
        self.counts = [defaultdict(Counter) for _ in range(order)]
        self._totals = None

    @property
    def outputs(self) -> list[str]:
        return self.words + [UNK, EOS]

    def _map(self, token):
        return token if token in self._known else UNK

    def _finalize(self):
        self._known = set(self.words)
        self._totals = [{h: sum(c.values()) for h, c in level.items()} for level in self.counts]

    def fit(self, corpus: Iterable[Sequence[str]]) -> "NGramLM":
        corpus = [list(u) for u in corpus]
        if not corpus:
            raise LexiconError("cannot train an n-gram LM on an empty corpus")
        seen = dict.fromkeys(self.words)
        for utt in corpus:
            seen.update(dict.fromkeys(utt))
        self.words = list(seen)
        for utt in corpus:
            padded = [BOS] * (self.order - 1) + utt + [EOS]
            for t in range(self.order - 1, len(padded)):
                for k in range(self.order):
                    hist = tuple(padded[t - k:t])
                    self.counts[k][hist][padded[t]] += 1
        self._finalize()
        return self

    def prob(self, history: Sequence[str], token: str) -> float:
        if self._totals is None:
            self._finalize()
        hist = [BOS] * (self.order - 1) + [self._map(h) if h != BOS else h for h in history]
        hist = tuple(hist[len(hist) - (self.order - 1):]) if self.order > 1 else ()
        token = token if token == EOS else self._map(token)
        K = len(self.words) + 2
        p = 1.0 / K
        dk = self.delta * K
        for k in range(self.order):
            h = hist[len(hist) - k:] if k else ()
            total = self._totals[k].get(h, 0)
            if total:
                p = (self.counts[k][h].get(token, 0) + dk * p) / (total + dk)
        return p

    def next_logprob(self, history: Sequence[str], token: str) -> float:
        return math.log(self.prob(history, token))

    def end_logprob(self, history: Sequence[str]) -> float:
        return math.log(self.prob(history, EOS))

    def logprob(self, tokens: Sequence[str]) -> float:
        tokens = list(tokens)
        total = 0.0
        for i, tok in enumerate(tokens):
            total += self.next_logprob(tokens[:i], tok)
        return total + self.end_logprob(tokens)

    def to_json(self) -> dict:
        return {
            "format": "ngram",
            "version": 1,
            "order": self.order,
            "delta": self.delta,
            "words": self.words,
            "counts": [{"\t".join(h): dict(sorted(c.items())) for h, c in sorted(level.items())}
                       for level in self.counts],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NGramLM":
        if obj.get("format") != "ngram":
            raise ValueError("not an n-gram model file")
        lm = cls(obj["order"], obj["delta"], obj["words"])
        for k, level in enumerate(obj["counts"]):
            for h, c in level.items():
                lm.counts[k][tuple(h.split("\t")) if k else ()].update(c)
        lm._finalize()
        return lm

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "NGramLM":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_ngram(corpus, order: int = 3, delta: float = 0.1, words: Iterable[str] = ()) -> NGramLM:
    return NGramLM(order, delta, words).fit(corpus)


def ar_logprob(lm: NGramLM, tokens: Sequence[str]) -> float:
    return lm.logprob(tokens)
