"""Phone-level alignment helpers for the phone-conditioned scorer."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..lexicon import MASK, PHONE_MASK, Lexicon, OOVError
from .data import MaskedSequence

# integer costs: unit edit = _UNIT; the low bits carry total gap length so
# that equal-cost alignments prefer shorter gaps
_UNIT = 100
_SHIFT = 4096
_BIG = 1 << 50


def align_phone_gaps(phones: Sequence[str], masked: MaskedSequence, lex: Lexicon,
                     gap_weight: float = 0.5, expected_len: float | None = None) -> list[list[str]]:
    """Split a phone hypothesis into the stretches claimed by each masked slot.

    The pronunciations of unmasked tokens are aligned to ``phones`` with unit
    substitution/insertion/deletion costs; each masked position is a gap that
    absorbs any number of phones at cost ``gap_weight * |len - expected_len|``.
    PHONE_MASK in the hypothesis matches any phone for free.  Returns one phone
    list per masked position, in position order.
    """
    m = lex.mean_pron_length() if expected_len is None else expected_len
    elems = []  # phone string, or None for a gap slot
    for pos, tok in enumerate(masked.tokens):
        if tok == MASK:
            elems.append(None)
        else:
            try:
                elems.extend(lex.prons[tok])
            except KeyError:
                raise OOVError(tok, pos) from None
    phones = list(phones)
    n = len(phones)
    ar = np.arange(n + 1, dtype=np.int64)
    ids = lex.phone_ids
    hyp = np.array([ids.get(p, -1) for p in phones], dtype=np.int64)
    wild = np.array([p == PHONE_MASK for p in phones], dtype=bool)
    ins = _UNIT * _SHIFT
    gap_cost = np.rint(gap_weight * np.abs(ar - m) * _UNIT).astype(np.int64) * _SHIFT + ar
    diff = ar[None, :] - ar[:, None]
    gap_mat = np.where(diff >= 0, gap_cost[np.clip(diff, 0, n)], _BIG)
    sub_cache: dict[str, np.ndarray] = {}

    arins = ar * ins
    D = arins
    table = [D]  # D after each element; backpointers are recovered on the way back
    subs = []
    for el in elems:
        if el is None:
            # D'[k] = min_k' D[k'] + G(k - k')
            D = (D[:, None] + gap_mat).min(axis=0)
            subs.append(None)
        else:
            sub = sub_cache.get(el)
            if sub is None:
                sub = sub_cache[el] = np.where((hyp == ids.get(el, -2)) | wild, 0, ins)
            A = D + ins  # template phone deleted
            np.minimum(A[1:], D[:-1] + sub, out=A[1:])
            D = np.minimum.accumulate(A - arins) + arins  # hypothesis phones inserted
            subs.append(sub)
        table.append(D)

    gaps: list[list[str]] = []
    k = n
    for e in range(len(elems) - 1, -1, -1):
        prev, cur, sub = table[e], table[e + 1], subs[e]
        if sub is None:
            start = int(np.argmin(prev[: k + 1] + gap_mat[: k + 1, k]))
            gaps.append(phones[start:k])
            k = start
            continue
        while True:
            c = cur[k]
            if k and c == prev[k - 1] + sub[k - 1]:
                k -= 1
                break
            if c == prev[k] + ins:
                break
            k -= 1  # inserted hypothesis phone, stays on this element
    gaps.reverse()
    return gaps


def edit_distances(gap: Sequence[int], prons: np.ndarray, lengths: np.ndarray,
                   wildcard: int = -2) -> np.ndarray:
    """Levenshtein distance from ``gap`` to every padded pronunciation row.

    ``gap`` holds phone ids; ``wildcard`` entries match anything.
    """
    K, Lmax = prons.shape
    cols = np.arange(Lmax + 1)
    prev = np.broadcast_to(cols, (K, Lmax + 1))
    for i, a in enumerate(gap, start=1):
        cur = np.empty((K, Lmax + 1), dtype=np.int64)
        cur[:, 0] = i
        cost = 0 if a == wildcard else (prons != a)
        cur[:, 1:] = np.minimum(prev[:, 1:] + 1, prev[:, :-1] + cost)
        # insertions run left to right: cummin of cur[j] - j
        prev = np.minimum.accumulate(cur - cols, axis=1) + cols
    return prev[np.arange(K), lengths]
