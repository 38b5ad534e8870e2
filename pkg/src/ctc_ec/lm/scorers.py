"""Scorer adaptors used by the correction pipeline and rescoring.

A scorer fills masked positions: ``score(phones, masked, i)`` returns a
distribution over the vocab id axis, ``score_all`` returns one per masked
position.  Every distribution sums to one; NULL mass is zero unless the
scorer is deletable.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..lexicon import MASK, Vocab
from .data import MaskedSequence
from .pcmlm import PcMlmModel
from .phones import align_phone_gaps


class PcMlmScorer:
    """Phone-conditioned scorer (deletable when the model is)."""

    uses_phones = True

    def __init__(self, model: PcMlmModel):
        self.model = model
        self.vocab = model.vocab
        self.deletable = model.deletable
        self.calls = 0

    def score(self, phones, masked: MaskedSequence, i: int) -> np.ndarray:
        self.calls += 1
        return self.model.score_masked(phones, masked, i)

    def align(self, phones, masked: MaskedSequence) -> list:
        return align_phone_gaps(phones, masked, self.model.lexicon, self.model.config.gap_weight)

    def score_all(self, phones, masked: MaskedSequence, gaps=None) -> dict:
        if gaps is None:
            gaps = self.align(phones, masked)
        self.calls += len(masked.masked)
        return {i: self.model.score_masked(phones, masked, i, gap=g)
                for i, g in zip(masked.masked, gaps)}


class MlmScorer:
    """Context-only scorer; ignores phones and never predicts NULL."""

    uses_phones = False
    deletable = False

    def __init__(self, model: PcMlmModel):
        self.model = model
        self.vocab = model.vocab
        self.calls = 0

    def score(self, phones, masked: MaskedSequence, i: int) -> np.ndarray:
        self.calls += 1
        return self.model.score_masked_mlm(masked, i)

    def score_all(self, phones, masked: MaskedSequence, gaps=None) -> dict:
        return {i: self.score(phones, masked, i) for i in masked.masked}


class OracleScorer:
    """Test instrument that knows the reference.

    ``hypothesis`` positions are aligned to ``reference`` with the WER
    alignment; a masked position gets a one-hot on its aligned reference
    token.  Hypothesis positions aligned as insertions get NULL when
    ``deletable``; a non-deletable oracle leaves them as the hypothesis token.
    ``origin`` (reference index or None per hypothesis token, e.g. from a
    corruption record) overrides the alignment, which is ambiguous around
    repeated words.
    """

    uses_phones = False

    def __init__(self, vocab: Vocab, reference: Sequence[str], hypothesis: Sequence[str],
                 deletable: bool = False, origin: Sequence[int | None] | None = None):
        from ..sim.metrics import wer

        self.vocab = vocab
        self.deletable = deletable
        self.reference = list(reference)
        self.hypothesis = list(hypothesis)
        self.calls = 0
        self.target: dict[int, str | None] = {}
        if origin is not None:
            if len(origin) != len(self.hypothesis):
                raise ValueError("origin must give one entry per hypothesis token")
            self.target = {h: None if r is None else self.reference[r]
                           for h, r in enumerate(origin)}
            return
        for op, ri, hi in wer(self.reference, self.hypothesis).alignment:
            if hi is None:
                continue
            self.target[hi] = self.reference[ri] if op in ("match", "sub") else None

    def _one_hot(self, idx):
        out = np.zeros(len(self.vocab))
        out[idx] = 1.0
        return out

    def score(self, phones, masked: MaskedSequence, i: int) -> np.ndarray:
        if i not in masked.masked:
            raise ValueError(f"position {i} is not masked")
        if len(masked) != len(self.hypothesis):
            raise ValueError("masked sequence does not match the oracle's hypothesis")
        if not self.deletable and len(masked.masked) > len(self.reference):
            raise ValueError(f"{len(masked.masked)} masked positions exceed reference "
                             f"length {len(self.reference)}")
        self.calls += 1
        tok = self.target[i]
        if tok is None:
            if self.deletable:
                return self._one_hot(self.vocab.null)
            tok = self.hypothesis[i]
        return self._one_hot(self.vocab.id_of(tok))

    def score_all(self, phones, masked: MaskedSequence, gaps=None) -> dict:
        return {i: self.score(phones, masked, i) for i in masked.masked}


def pll_score(scorer, tokens: Sequence[str], phones=None) -> float:
    """Pseudo-log-likelihood: one masked call per position."""
    tokens = list(tokens)
    if not tokens:
        raise ValueError("pseudo-log-likelihood of an empty sequence")
    vocab = scorer.vocab
    total = 0.0
    for i in range(len(tokens)):
        masked = MaskedSequence.from_tokens(tokens[:i] + [MASK] + tokens[i + 1:])
        p = scorer.score(phones, masked, i)[vocab.id_of(tokens[i])]
        total += math.log(p) if p > 0 else -math.inf
    return total
