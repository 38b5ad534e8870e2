"""Word error rate with a substitution/deletion/insertion breakdown."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence


@dataclass
class WerResult:
    wer: float
    sub: int
    dele: int
    ins: int
    ref_len: int
    # (op, ref index or None, hyp index or None), op in match/sub/del/ins
    alignment: list = field(default_factory=list)

    @property
    def errors(self) -> int:
        return self.sub + self.dele + self.ins


def edit_table(ref: Sequence, hyp: Sequence) -> list[list[int]]:
    m = len(hyp)
    D = [list(range(m + 1))]
    for i, r in enumerate(ref, start=1):
        prev = D[-1]
        row = [i] * (m + 1)
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + (r != hyp[j - 1]), prev[j] + 1, row[j - 1] + 1)
        D.append(row)
    return D


def wer(ref: Sequence, hyp: Sequence) -> WerResult:
    """Levenshtein alignment with unit costs.

    Backtrace prefers substitution (or match), then deletion, then insertion.
    With an empty reference the rate is the insertion count.
    """
    ref, hyp = list(ref), list(hyp)
    D = edit_table(ref, hyp)
    i, j = len(ref), len(hyp)
    ops = []
    while i > 0 or j > 0:
        if i > 0 and j > 0 and D[i][j] == D[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            ops.append(("match" if ref[i - 1] == hyp[j - 1] else "sub", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and D[i][j] == D[i - 1][j] + 1:
            ops.append(("del", i - 1, None))
            i -= 1
        else:
            ops.append(("ins", None, j - 1))
            j -= 1
    ops.reverse()
    s = sum(op == "sub" for op, _, _ in ops)
    d = sum(op == "del" for op, _, _ in ops)
    n_ins = sum(op == "ins" for op, _, _ in ops)
    rate = (s + d + n_ins) / len(ref) if ref else float(n_ins)
    return WerResult(rate, s, d, n_ins, len(ref), ops)


def corpus_wer(refs, hyps) -> WerResult:
    s = d = n_ins = n = 0
    for r, h in zip(refs, hyps, strict=True):
        res = wer(r, h)
        s, d, n_ins, n = s + res.sub, d + res.dele, n_ins + res.ins, n + res.ref_len
    rate = (s + d + n_ins) / n if n else float(n_ins)
    return WerResult(rate, s, d, n_ins, n)
