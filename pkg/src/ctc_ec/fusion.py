"""Baseline LM integration: n-best rescoring, shallow fusion and the
forced-alignment distillation loss."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ctc import Alignment, Hypothesis, _rows, prefix_beam_search
from .lexicon import Vocab
from .lm.ngram import NGramLM
from .lm.scorers import pll_score


@dataclass
class RescoreConfig:
    n: int = 5
    weight: float = 0.5
    kind: str = "ar"  # "ar" (autoregressive n-gram) or "pll" (masked-LM pseudo-likelihood)
    length_norm: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.weight < 0:
            raise ValueError("LM weight must be >= 0")
        if self.kind not in ("ar", "pll"):
            raise ValueError(f"unknown rescoring kind {self.kind!r}")


class IdLM:
    """Expose a word-level n-gram LM on token ids for the beam-search hook."""

    def __init__(self, lm: NGramLM, vocab: Vocab):
        self.lm = lm
        self.entries = vocab.entries

    def next_logprob(self, context, token):
        e = self.entries
        return self.lm.next_logprob([e[c] for c in context[-(self.lm.order - 1):]]
                                    if self.lm.order > 1 else [], e[token])

    def end_logprob(self, context):
        e = self.entries
        return self.lm.end_logprob([e[c] for c in context[-(self.lm.order - 1):]]
                                   if self.lm.order > 1 else [])


def lm_score(lm, words: Sequence[str], kind: str = "ar") -> float:
    if kind == "ar":
        return lm.logprob(words)
    if not words:
        return 0.0
    return pll_score(lm, words)


def rescore_nbest(hyps: Sequence[Hypothesis], lm, weight: float, vocab: Vocab,
                  kind: str = "ar", length_norm: bool = False) -> Hypothesis:
    """Pick the hypothesis maximising ``ctc_score + weight * lm_score``.

    Ties keep the better original rank.
    """
    if not hyps:
        raise ValueError("no hypotheses to rescore")
    if weight == 0:
        return hyps[0]
    best, best_score = None, -math.inf
    for h in hyps:
        words = vocab.decode(h.tokens)
        s = lm_score(lm, words, kind)
        if length_norm:
            s /= len(words) + 1
        total = h.ctc_score + weight * s
        if best is None or total > best_score:
            best, best_score = h, total
    return Hypothesis(tokens=best.tokens, score=best_score, ctc_score=best.ctc_score,
                      lm_score=(best_score - best.ctc_score) / weight, elapsed=best.elapsed)


def shallow_fusion(post, lm: NGramLM, weight: float, vocab: Vocab, beam: int = 5) -> list[Hypothesis]:
    return prefix_beam_search(post, beam, IdLM(lm, vocab), weight)


def kd_loss(mlm_dists, post, align: Alignment) -> float:
    """Cross-entropy from per-token teacher distributions to the CTC rows of
    the frames aligned to each token, averaged over aligned frames.

    ``mlm_dists`` is ``(L, V)`` or ``(L, V+1)`` over the posterior's token
    columns; a trailing blank column is ignored.  Returns ``inf`` when a frame
    assigns zero probability to a token the teacher supports.
    """
    rows = _rows(post)
    V = rows.shape[1] - 1
    mlm = np.asarray(mlm_dists, dtype=np.float64)
    if mlm.ndim != 2 or mlm.shape[0] != len(align.tokens):
        raise ValueError(f"expected {len(align.tokens)} teacher distributions, got {mlm.shape}")
    if mlm.shape[1] not in (V, V + 1):
        raise ValueError(f"teacher width {mlm.shape[1]} does not match {V} token columns")
    mlm = mlm[:, :V]
    total, frames = 0.0, 0
    for i in range(len(align.tokens)):
        p = mlm[i]
        support = p > 0
        for t in align.frames(i):
            q = rows[t, :V]
            if np.any(q[support] <= 0):
                return math.inf
            total -= float(np.dot(p[support], np.log(q[support])))
            frames += 1
    if frames == 0:
        raise ValueError("alignment has no aligned frames")
    return total / frames


__all__ = ["RescoreConfig", "IdLM", "rescore_nbest", "shallow_fusion", "kd_loss", "lm_score"]
