"""Count-based masked LMs: plain MLM, phone-conditioned MLM and its
deletable variant.

The context model scores a masked slot from its nearest unmasked neighbours
``(L, R)``.  A bidirectional bigram estimate ``P(v|L) P(R|v)`` (renormalised
over the candidates) acts as the Dirichlet prior for the joint ``(L, R) -> v``
counts; every count table is additively smoothed with ``delta``.  The phone
term multiplies in ``exp(-gamma * editdist(gap, lex(v)))``.
"""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..lexicon import NULL, PHONE_MASK, Lexicon, LexiconError, Vocab
from .data import (MaskedSequence, gen_deletable_example, gen_mlm_example, gen_phone_input,
                   poisson_cdf_table)
from .phones import align_phone_gaps, edit_distances

BOS = "<s>"
EOS = "</s>"
FORMAT_VERSION = 1


class HashMismatch(ValueError):
    def __init__(self, what, expected, got):
        super().__init__(f"{what} hash mismatch: expected {expected}, got {got}")
        self.what = what
        self.expected = expected
        self.got = got


@dataclass
class PcMlmConfig:
    delta: float = 0.1
    gamma: float = 1.0
    deletable: bool = False
    mask_rate: float = 0.15
    insert_lambda: float = 0.2
    phone_mask_rate: float = 0.2
    passes: int = 1
    gap_weight: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")


@dataclass
class PcMlmModel:
    vocab: Vocab
    lexicon: Lexicon
    config: PcMlmConfig
    left: dict = field(default_factory=lambda: defaultdict(Counter))
    right: dict = field(default_factory=lambda: defaultdict(Counter))
    joint: dict = field(default_factory=lambda: defaultdict(Counter))

    def __post_init__(self):
        self._dense = None

    @property
    def deletable(self) -> bool:
        return self.config.deletable

    def add(self, left: str, right: str, target: str, count: int = 1):
        self.left[left][target] += count
        self.right[target][right] += count
        self.joint[(left, right)][target] += count
        self._dense = None

    def null_count(self) -> float:
        return sum(c[NULL] for c in self.left.values())

    # -- dense tables ----------------------------------------------------

    def _tables(self):
        if self._dense is not None:
            return self._dense
        words = self.vocab.words
        nw = len(words)
        # candidate index: words then NULL
        cand = {w: i for i, w in enumerate(words)}
        cand[NULL] = nw
        ctx_index = {w: i for i, w in enumerate(words)}
        ctx_index[BOS] = nw
        ctx_index[EOS] = nw
        left = np.zeros((nw + 1, nw + 1))
        for ctx, counter in self.left.items():
            for tok, c in counter.items():
                left[ctx_index[ctx], cand[tok]] += c
        right = np.zeros((nw + 1, nw + 1))
        for tok, counter in self.right.items():
            for ctx, c in counter.items():
                right[cand[tok], ctx_index[ctx]] += c
        lex = self.lexicon
        phone_ids = {p: i for i, p in enumerate(lex.phones)}
        lengths = np.array([len(lex[w]) for w in words], dtype=np.int64)
        prons = np.full((nw, max(lengths.max(initial=1), 1)), -1, dtype=np.int64)
        for i, w in enumerate(words):
            prons[i, :lengths[i]] = [phone_ids[p] for p in lex[w]]
        self._dense = dict(cand=cand, ctx=ctx_index, left=left, right=right,
                           phone_ids=phone_ids, prons=prons, lengths=lengths)
        return self._dense

    # -- scoring -----------------------------------------------------------

    def context_dist(self, left: str, right: str, with_null: bool | None = None) -> np.ndarray:
        """Smoothed ``P(v | L, R)`` over words (+ NULL), indexed like the candidates."""
        if with_null is None:
            with_null = self.deletable
        tab = self._tables()
        nw = self.vocab.num_words
        K = nw + 1 if with_null else nw
        d = self.config.delta
        li, ri = tab["ctx"][left], tab["ctx"][right]
        lrow = tab["left"][li, :K]
        p_left = (lrow + d) / (lrow.sum() + d * K)
        rmat = tab["right"][:K]
        # right contexts: every word plus EOS
        p_right = (rmat[:, ri] + d) / (rmat.sum(axis=1) + d * (nw + 1))
        bi = p_left * p_right
        bi /= bi.sum()
        counts = np.zeros(K)
        jc = self.joint.get((left, right))
        if jc:
            cand = tab["cand"]
            for tok, c in jc.items():
                if cand[tok] < K:
                    counts[cand[tok]] += c
        kappa = d * K
        return (counts + kappa * bi) / (counts.sum() + kappa)

    def phone_likelihood(self, gap: Sequence[str], with_null: bool) -> np.ndarray:
        tab = self._tables()
        ids = [(-2 if p == PHONE_MASK else tab["phone_ids"].get(p, -3)) for p in gap]
        dist = edit_distances(ids, tab["prons"], tab["lengths"]).astype(np.float64)
        if with_null:
            dist = np.append(dist, len(gap))
        return np.exp(-self.config.gamma * dist)

    def _to_vocab_axis(self, cand_probs: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.vocab))
        nw = self.vocab.num_words
        out[:nw] = cand_probs[:nw]
        if len(cand_probs) > nw:
            out[self.vocab.null] = cand_probs[nw]
        return out

    def score_masked(self, phones, masked: MaskedSequence, i: int, gap=None) -> np.ndarray:
        """Distribution over the vocab id axis for masked position ``i``."""
        if i not in masked.masked:
            raise ValueError(f"position {i} is not masked")
        left, right = masked.neighbors(i, BOS, EOS)
        ctx = self.context_dist(left, right)
        if gap is None:
            gaps = align_phone_gaps(phones, masked, self.lexicon, self.config.gap_weight)
            gap = gaps[masked.masked.index(i)]
        p = ctx * self.phone_likelihood(gap, self.deletable)
        total = p.sum()
        p = p / total if total > 0 else ctx
        return self._to_vocab_axis(p)

    def score_masked_mlm(self, masked: MaskedSequence, i: int) -> np.ndarray:
        if i not in masked.masked:
            raise ValueError(f"position {i} is not masked")
        left, right = masked.neighbors(i, BOS, EOS)
        return self._to_vocab_axis(self.context_dist(left, right, with_null=False))

    # -- serialisation -----------------------------------------------------

    def to_json(self) -> dict:
        def table(t, key=str):
            return {key(k): dict(sorted(c.items())) for k, c in sorted(t.items()) if c}
        return {
            "format": "pcmlm",
            "version": FORMAT_VERSION,
            "config": asdict(self.config),
            "vocab_hash": self.vocab.hash,
            "lexicon_hash": self.lexicon.hash,
            "left": table(self.left),
            "right": table(self.right),
            "joint": table(self.joint, key=lambda k: f"{k[0]}\t{k[1]}"),
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    @classmethod
    def from_json(cls, obj: dict, vocab: Vocab, lexicon: Lexicon) -> "PcMlmModel":
        if obj.get("format") != "pcmlm" or obj.get("version") != FORMAT_VERSION:
            raise ValueError("not a version-1 pcmlm model file")
        if obj["vocab_hash"] != vocab.hash:
            raise HashMismatch("vocab", obj["vocab_hash"], vocab.hash)
        if obj["lexicon_hash"] != lexicon.hash:
            raise HashMismatch("lexicon", obj["lexicon_hash"], lexicon.hash)
        model = cls(vocab, lexicon, PcMlmConfig(**obj["config"]))
        for k, c in obj["left"].items():
            model.left[k].update(c)
        for k, c in obj["right"].items():
            model.right[k].update(c)
        for k, c in obj["joint"].items():
            left, right = k.split("\t")
            model.joint[(left, right)].update(c)
        return model

    @classmethod
    def load(cls, path, vocab: Vocab, lexicon: Lexicon) -> "PcMlmModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")), vocab, lexicon)


def train_pcmlm(corpus: Sequence[Sequence[str]], lex: Lexicon, vocab: Vocab,
                config: PcMlmConfig | None = None) -> PcMlmModel:
    """Accumulate context counts from generated masking examples.

    Each pass draws one example per utterance from a generator seeded with
    ``(seed, pass, index)``.
    """
    config = config or PcMlmConfig()
    if not corpus:
        raise LexiconError("cannot train on an empty corpus")
    for w in vocab.words:
        if w not in lex:
            raise LexiconError(f"vocabulary word {w!r} has no pronunciation")
    model = PcMlmModel(vocab, lex, config)
    table = poisson_cdf_table(config.insert_lambda) if config.deletable else None
    for p in range(config.passes):
        for idx, words in enumerate(corpus):
            rng = np.random.default_rng([config.seed, p, idx])
            if config.deletable:
                ex = gen_deletable_example(words, config.mask_rate, config.insert_lambda, rng, table)
            else:
                ex = gen_mlm_example(words, config.mask_rate, rng)
            # phone dropout is drawn to keep example generation complete; the
            # count model's phone term has no trainable parameters
            ex.phones = gen_phone_input(words, lex, config.phone_mask_rate, rng)
            for pos, target in ex.targets.items():
                left, right = ex.masked.neighbors(pos, BOS, EOS)
                model.add(left, right, target)
    return model
