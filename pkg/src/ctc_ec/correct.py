"""Confidence-masked, non-autoregressive error correction of greedy CTC output."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ctc import FramePosteriors, Hypothesis, greedy_decode
from .lexicon import Vocab
from .lm.data import MaskedSequence
from .lm.pcmlm import HashMismatch


@dataclass
class CorrectionConfig:
    beta: float = 0.8
    alpha: float = 0.5
    # honour NULL predictions from a deletable scorer
    deletable: bool = True
    # interpolate at every position instead of only the masked ones
    all_positions: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass
class CorrectionResult:
    tokens: list
    provenance: list
    masked: tuple
    original: list
    timings: dict = field(default_factory=dict)
    scorer_calls: int = 0

    def to_json(self, utt_id: str = "") -> dict:
        return {
            "id": utt_id,
            "tokens": self.tokens,
            "greedy": self.original,
            "masked": list(self.masked),
            "provenance": [list(p) for p in self.provenance],
            "scorer_calls": self.scorer_calls,
        }


def mask_by_confidence(hyp: Hypothesis, beta: float, vocab: Vocab) -> MaskedSequence:
    words = vocab.decode(hyp.tokens)
    low = [i for i, c in enumerate(hyp.confidences) if c < beta]
    return MaskedSequence.mask(words, low)


def _interpolate(ctc_row, scorer_row, alpha, vocab, allow_null):
    ctc = np.array(ctc_row, dtype=np.float64, copy=True)
    # NULL stands for "no token here", whose CTC counterpart is blank
    ctc[vocab.null] = ctc[vocab.blank] if allow_null else 0.0
    ctc[vocab.blank] = 0.0
    ctc[vocab.mask] = 0.0
    ctc[vocab.unk] = 0.0
    lm = np.asarray(scorer_row, dtype=np.float64)
    if not allow_null:
        lm = lm.copy()
        lm[vocab.null] = 0.0
    return (1.0 - alpha) * ctc + alpha * lm


def fill_masks(masked: MaskedSequence, ctc_rows, scorer_dists: dict, alpha: float, vocab: Vocab,
               original: Sequence[str] | None = None, allow_null: bool = True,
               all_positions: bool = False) -> CorrectionResult:
    """Resolve every masked position independently by the interpolated argmax.

    Positions resolving to NULL are removed.  Ties go to the lower token id.
    With ``all_positions`` the interpolation also runs on unmasked positions,
    which then need scorer distributions too.
    """
    original = list(original) if original is not None else list(masked.tokens)
    targets = set(range(len(masked))) if all_positions else set(masked.masked)
    if set(scorer_dists) != targets:
        missing = sorted(targets - set(scorer_dists))
        extra = sorted(set(scorer_dists) - targets)
        raise ValueError(f"scorer distributions mismatch: missing {missing}, surplus {extra}")
    ctc_rows = np.asarray(ctc_rows)
    tokens, prov = [], []
    for i, tok in enumerate(masked.tokens):
        if i not in targets:
            tokens.append(tok)
            prov.append(("kept", tok))
            continue
        score = _interpolate(ctc_rows[i], scorer_dists[i], alpha, vocab, allow_null)
        best = int(np.argmax(score))
        if best == vocab.null:
            prov.append(("deleted", original[i]))
            continue
        word = vocab.lookup(best)
        tokens.append(word)
        prov.append(("kept", word) if word == original[i] else ("corrected", original[i], word))
    return CorrectionResult(tokens=tokens, provenance=prov, masked=masked.masked,
                            original=original)


def correct_pipeline(post: FramePosteriors, phones: Sequence[str], scorer, cfg: CorrectionConfig,
                     vocab: Vocab | None = None) -> CorrectionResult:
    """Greedy decode, mask low-confidence tokens, fill them in parallel."""
    vocab = vocab or scorer.vocab
    if isinstance(post, FramePosteriors) and post.vocab_hash and post.vocab_hash != vocab.hash:
        raise HashMismatch("vocab", post.vocab_hash, vocab.hash)
    if scorer.vocab.hash != vocab.hash:
        raise HashMismatch("vocab", scorer.vocab.hash, vocab.hash)
    rows = post.rows if isinstance(post, FramePosteriors) else np.asarray(post)
    if rows.shape[1] != len(vocab):
        raise ValueError(f"posterior width {rows.shape[1]} != vocab size {len(vocab)}")

    t0 = time.perf_counter()
    _, hyp = greedy_decode(rows)
    t1 = time.perf_counter()
    masked = mask_by_confidence(hyp, cfg.beta, vocab)
    original = vocab.decode(hyp.tokens)
    if not masked.masked and not cfg.all_positions:
        result = CorrectionResult(tokens=original, provenance=[("kept", w) for w in original],
                                  masked=(), original=original)
        result.timings = {"decode": t1 - t0, "score": 0.0, "total": time.perf_counter() - t0}
        return result
    calls_before = scorer.calls
    gaps = None
    if masked.masked and getattr(scorer, "uses_phones", False):
        gaps = scorer.align(phones, masked)
    ta = time.perf_counter()
    dists = scorer.score_all(phones, masked, gaps) if masked.masked else {}
    if cfg.all_positions:
        for i in range(len(masked)):
            if i not in dists:
                dists[i] = scorer.score(phones, masked.with_masked(i), i)
    t2 = time.perf_counter()
    result = fill_masks(masked, hyp.rows, dists, cfg.alpha, vocab, original,
                        allow_null=cfg.deletable and scorer.deletable,
                        all_positions=cfg.all_positions)
    t3 = time.perf_counter()
    result.scorer_calls = scorer.calls - calls_before
    result.timings = {"decode": t1 - t0, "align": ta - t1, "score": t2 - ta, "fill": t3 - t2,
                      "total": t3 - t0}
    return result


__all__ = ["CorrectionConfig", "CorrectionResult", "mask_by_confidence", "fill_masks",
           "correct_pipeline"]
