"""CTC path algebra: collapse, greedy and prefix beam decoding, sequence
likelihood, forced alignment and frame-to-token confidence aggregation.

All routines take a ``(T, C)`` matrix of per-frame probabilities whose last
column is the blank symbol.  Token ids are column indices.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

NEG_INF = float("-inf")


class AlignmentError(ValueError):
    """The label sequence cannot be produced by any path of the given length."""


@dataclass
class FramePosteriors:
    rows: np.ndarray
    frame_sec: float = 0.01
    id: str = ""
    vocab_hash: str = ""

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[1] < 1:
            raise ValueError(f"posteriors must be a (T, C) matrix, got shape {self.rows.shape}")

    @property
    def num_frames(self) -> int:
        return self.rows.shape[0]

    @property
    def blank(self) -> int:
        return self.rows.shape[1] - 1

    @property
    def duration(self) -> float:
        return self.num_frames * self.frame_sec

    def validate(self, atol=1e-6):
        rows = self.rows
        if np.any(rows < 0) or np.any(rows > 1 + atol):
            raise ValueError(f"{self.id}: probabilities outside [0, 1]")
        sums = rows.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > atol)
        if bad.size:
            raise ValueError(f"{self.id}: row {bad[0]} sums to {sums[bad[0]]!r}")


@dataclass
class Hypothesis:
    """A decoded token sequence.

    ``confidences``/``rows``/``frames`` come from confidence aggregation and
    are ``None`` for beam-search hypotheses that were not aligned.
    """

    tokens: tuple
    confidences: np.ndarray | None = None
    rows: np.ndarray | None = None
    frames: tuple | None = None
    score: float = 0.0
    ctc_score: float = 0.0
    lm_score: float = 0.0
    elapsed: float = 0.0

    def __len__(self):
        return len(self.tokens)


@dataclass
class Alignment:
    path: np.ndarray
    tokens: tuple
    spans: list = field(default_factory=list)
    peak_frames: tuple = ()
    peak_probs: tuple = ()
    log_prob: float = NEG_INF

    def frames(self, i) -> range:
        start, stop = self.spans[i]
        return range(start, stop)


def _rows(post) -> np.ndarray:
    if isinstance(post, FramePosteriors):
        return post.rows
    rows = np.asarray(post, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("posteriors must be a (T, C) matrix")
    return rows


def _check_labels(y, num_classes):
    blank = num_classes - 1
    y = [int(v) for v in y]
    for pos, v in enumerate(y):
        if v < 0 or v >= blank:
            raise ValueError(f"label {v} at position {pos} is not a non-blank token id")
    return y


def collapse(path: Sequence[int], blank: int) -> list[int]:
    """Merge adjacent repeats, then drop blanks."""
    out = []
    prev = None
    for p in path:
        p = int(p)
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return out


def _segments(path, blank):
    """Yield ``(token, start, stop)`` for each maximal non-blank run."""
    start = None
    for t, p in enumerate(path):
        if start is not None and p != path[start]:
            yield int(path[start]), start, t
            start = None
        if start is None and p != blank:
            start = t
    if start is not None:
        yield int(path[start]), start, len(path)


def token_confidence(post, path) -> Hypothesis:
    """Aggregate frame posteriors into one row per collapsed token.

    For every run of frames emitting the same token, the representative frame
    is the one where that token is most probable (lowest frame on ties).
    """
    rows = _rows(post)
    path = np.asarray(path, dtype=np.int64)
    if path.shape[0] != rows.shape[0]:
        raise ValueError(f"path length {path.shape[0]} != frame count {rows.shape[0]}")
    blank = rows.shape[1] - 1
    tokens, frames = [], []
    for tok, start, stop in _segments(path, blank):
        tokens.append(tok)
        frames.append(start + int(np.argmax(rows[start:stop, tok])))
    frames_arr = np.asarray(frames, dtype=np.int64)
    picked = rows[frames_arr] if frames else np.zeros((0, rows.shape[1]))
    conf = picked[np.arange(len(tokens)), tokens] if tokens else np.zeros(0)
    return Hypothesis(tokens=tuple(tokens), confidences=conf, rows=picked, frames=tuple(frames))


def greedy_decode(post) -> tuple[np.ndarray, Hypothesis]:
    t0 = time.perf_counter()
    rows = _rows(post)
    path = np.argmax(rows, axis=1)
    hyp = token_confidence(rows, path)
    with np.errstate(divide="ignore"):
        hyp.ctc_score = hyp.score = float(np.log(rows[np.arange(len(path)), path]).sum())
    hyp.elapsed = time.perf_counter() - t0
    return path, hyp


def _extend(y, blank):
    ext = np.full(2 * len(y) + 1, blank, dtype=np.int64)
    ext[1::2] = y
    # a skip from s-2 to s is legal only onto a label differing from s-2
    skip = np.zeros(len(ext), dtype=bool)
    if len(y) > 1:
        skip[3::2] = ext[3::2] != ext[1:-2:2]
    return ext, skip


def ctc_log_prob(post, y: Sequence[int]) -> float:
    """log of the total probability of all paths collapsing to ``y``."""
    rows = _rows(post)
    T, C = rows.shape
    y = _check_labels(y, C)
    if T == 0:
        return 0.0 if not y else NEG_INF
    ext, skip = _extend(y, C - 1)
    S = len(ext)
    with np.errstate(divide="ignore"):
        logp = np.log(rows[:, ext])
    alpha = np.full(S, NEG_INF)
    alpha[0] = logp[0, 0]
    if S > 1:
        alpha[1] = logp[0, 1]
    for t in range(1, T):
        prev = alpha
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[skip] = np.logaddexp(acc[skip], prev[np.flatnonzero(skip) - 2])
        alpha = acc + logp[t]
    if S == 1:
        return float(alpha[0])
    return float(np.logaddexp(alpha[-1], alpha[-2]))


def forced_align(post, y: Sequence[int]) -> Alignment:
    """Viterbi path over the blank-interleaved lattice of ``y``."""
    rows = _rows(post)
    T, C = rows.shape
    y = _check_labels(y, C)
    blank = C - 1
    min_frames = len(y) + sum(1 for a, b in zip(y, y[1:]) if a == b)
    if T < min_frames:
        raise AlignmentError(f"{len(y)} labels need at least {min_frames} frames, got {T}")
    ext, skip = _extend(y, blank)
    S = len(ext)
    with np.errstate(divide="ignore"):
        logp = np.log(rows[:, ext])
    delta = np.full(S, NEG_INF)
    delta[0] = logp[0, 0]
    if S > 1:
        delta[1] = logp[0, 1]
    back = np.zeros((T, S), dtype=np.int64)
    skip_idx = np.flatnonzero(skip)
    for t in range(1, T):
        cand = np.full((3, S), NEG_INF)
        cand[0] = delta
        cand[1, 1:] = delta[:-1]
        cand[2, skip_idx] = delta[skip_idx - 2]
        choice = np.argmax(cand, axis=0)
        back[t] = choice
        delta = cand[choice, np.arange(S)] + logp[t]
    if S == 1:
        end = 0
    else:
        end = S - 1 if delta[S - 1] >= delta[S - 2] else S - 2
    best = float(delta[end])
    if best == NEG_INF:
        raise AlignmentError("no path with non-zero probability collapses to the labels")
    states = np.empty(T, dtype=np.int64)
    s = end
    for t in range(T - 1, -1, -1):
        states[t] = s
        s -= back[t, s]
    path = ext[states]
    spans, peaks, peak_probs = [], [], []
    for i, tok in enumerate(y):
        frames = np.flatnonzero(states == 2 * i + 1)
        start, stop = int(frames[0]), int(frames[-1]) + 1
        spans.append((start, stop))
        k = start + int(np.argmax(rows[start:stop, tok]))
        peaks.append(k)
        peak_probs.append(float(rows[k, tok]))
    return Alignment(path=path, tokens=tuple(y), spans=spans, peak_frames=tuple(peaks),
                     peak_probs=tuple(peak_probs), log_prob=best)


def align_confidence(post, tokens: Sequence[int]) -> Hypothesis:
    """Confidence aggregation for a hypothesis not produced by greedy decoding."""
    ali = forced_align(post, tokens)
    return token_confidence(post, ali.path)


class FusionLM(Protocol):
    def next_logprob(self, context: tuple, token: int) -> float: ...

    def end_logprob(self, context: tuple) -> float: ...


def _lse(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def prefix_beam_search(post, beam: int, lm: FusionLM | None = None, weight: float = 0.0,
                       nbest: int | None = None) -> list[Hypothesis]:
    """CTC prefix beam search with optional shallow fusion.

    Prefixes keep separate blank-ending and label-ending log scores.  The LM
    term is added once per newly emitted token, plus end-of-sentence at the
    end.  Pruning keeps the ``beam`` best prefixes by fused score per frame.
    """
    if beam < 1:
        raise ValueError(f"beam width must be >= 1, got {beam}")
    t0 = time.perf_counter()
    rows = _rows(post)
    T, C = rows.shape
    blank = C - 1
    fuse = lm is not None and weight != 0.0
    with np.errstate(divide="ignore"):
        logrows = np.log(rows)
    # prefix -> [log p ending in blank, log p ending in label]
    beams: dict[tuple, list] = {(): [0.0, NEG_INF]}
    lm_scores: dict[tuple, float] = {(): 0.0}

    def lm_of(prefix):
        score = lm_scores.get(prefix)
        if score is None:
            score = lm_scores[prefix[:-1]]
            if fuse:
                score += lm.next_logprob(prefix[:-1], prefix[-1])
            lm_scores[prefix] = score
        return score

    for t in range(T):
        lp = logrows[t]
        cands = [int(c) for c in np.flatnonzero(rows[t, :blank] > 0.0)]
        lp_blank = lp[blank]
        nxt: dict[tuple, list] = {}
        for prefix, (pb, pnb) in beams.items():
            total = _lse(pb, pnb)
            if lp_blank != NEG_INF:
                entry = nxt.setdefault(prefix, [NEG_INF, NEG_INF])
                entry[0] = _lse(entry[0], total + lp_blank)
            last = prefix[-1] if prefix else None
            for c in cands:
                lpc = lp[c]
                ext = prefix + (c,)
                entry = nxt.setdefault(ext, [NEG_INF, NEG_INF])
                if c == last:
                    entry[1] = _lse(entry[1], pb + lpc)
                    same = nxt.setdefault(prefix, [NEG_INF, NEG_INF])
                    same[1] = _lse(same[1], pnb + lpc)
                else:
                    entry[1] = _lse(entry[1], total + lpc)
        live = [kv for kv in nxt.items() if kv[1][0] != NEG_INF or kv[1][1] != NEG_INF]
        ranked = sorted(live,
                        key=lambda kv: -(_lse(kv[1][0], kv[1][1]) + weight * lm_of(kv[0])))
        beams = dict(ranked[:beam])
        if not beams:
            break

    hyps = []
    for prefix, (pb, pnb) in beams.items():
        ctc = _lse(pb, pnb)
        lm_score = lm_of(prefix)
        if fuse:
            lm_score += lm.end_logprob(prefix)
        hyps.append(Hypothesis(tokens=prefix, score=ctc + weight * lm_score, ctc_score=ctc,
                               lm_score=lm_score))
    hyps.sort(key=lambda h: -h.score)
    if nbest is not None:
        hyps = hyps[:nbest]
    elapsed = time.perf_counter() - t0
    for h in hyps:
        h.elapsed = elapsed
    return hyps
