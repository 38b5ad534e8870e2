"""Training-example generation for masked LMs.

Random draws come from ``numpy.random.Generator``; pass a generator seeded
per utterance (e.g. ``np.random.default_rng([seed, index])``) to make data
generation reproducible and parallelisable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..lexicon import MASK, NULL, PHONE_MASK, Lexicon, words_to_phones


@dataclass(frozen=True)
class MaskedSequence:
    tokens: tuple
    masked: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "masked", tuple(sorted(self.masked)))
        expect = tuple(i for i, t in enumerate(self.tokens) if t == MASK)
        if expect != self.masked:
            raise ValueError(f"mask index set {self.masked} disagrees with MASK tokens at {expect}")

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "MaskedSequence":
        return cls(tuple(tokens), tuple(i for i, t in enumerate(tokens) if t == MASK))

    @classmethod
    def mask(cls, words: Sequence[str], positions) -> "MaskedSequence":
        positions = set(positions)
        return cls.from_tokens([MASK if i in positions else w for i, w in enumerate(words)])

    def __len__(self):
        return len(self.tokens)

    def with_masked(self, i: int) -> "MaskedSequence":
        toks = list(self.tokens)
        toks[i] = MASK
        return MaskedSequence.from_tokens(toks)

    def neighbors(self, i: int, bos: str, eos: str) -> tuple[str, str]:
        """Nearest unmasked tokens left and right of ``i``."""
        toks = self.tokens
        left = bos
        for j in range(i - 1, -1, -1):
            if toks[j] != MASK:
                left = toks[j]
                break
        right = eos
        for j in range(i + 1, len(toks)):
            if toks[j] != MASK:
                right = toks[j]
                break
        return left, right


@dataclass
class TrainingExample:
    masked: MaskedSequence
    targets: dict
    phones: list | None = None
    inserted: tuple = field(default_factory=tuple)


def poisson_cdf_table(lam: float, tail: float = 1e-16) -> np.ndarray:
    if lam < 0:
        raise ValueError("Poisson mean must be non-negative")
    pmf = math.exp(-lam)
    cdf = [pmf]
    k = 0
    while 1.0 - cdf[-1] > tail and k < 1000:
        k += 1
        pmf *= lam / k
        cdf.append(cdf[-1] + pmf)
    return np.asarray(cdf)


def sample_poisson(rng: np.random.Generator, lam: float, size, table=None) -> np.ndarray:
    """Inverse-CDF Poisson sampling from uniform draws."""
    cdf = poisson_cdf_table(lam) if table is None else table
    u = rng.random(size)
    return np.minimum(np.searchsorted(cdf, u, side="left"), len(cdf) - 1)


def _mask_positions(n, mask_rate, rng):
    picks = np.flatnonzero(rng.random(n) < mask_rate)
    if picks.size == 0:
        picks = np.array([rng.integers(n)])
    return picks


def gen_mlm_example(words: Sequence[str], mask_rate: float = 0.15,
                    rng: np.random.Generator | None = None) -> TrainingExample:
    """Mask each position with probability ``mask_rate``; at least one is masked."""
    if not words:
        raise ValueError("cannot mask an empty utterance")
    rng = np.random.default_rng() if rng is None else rng
    picks = _mask_positions(len(words), mask_rate, rng)
    masked = MaskedSequence.mask(words, picks.tolist())
    return TrainingExample(masked=masked, targets={int(i): words[i] for i in picks})


def gen_deletable_example(words: Sequence[str], mask_rate: float = 0.15, lam: float = 0.2,
                          rng: np.random.Generator | None = None,
                          poisson_table=None) -> TrainingExample:
    """MLM masking followed by Poisson-many MASK insertions in every gap.

    Gaps include both sentence boundaries; inserted positions target NULL.
    """
    rng = np.random.default_rng() if rng is None else rng
    base = gen_mlm_example(words, mask_rate, rng)
    if lam == 0:
        return base
    counts = sample_poisson(rng, lam, len(words) + 1, poisson_table)
    tokens, targets, inserted = [], {}, []
    for gap in range(len(words) + 1):
        for _ in range(int(counts[gap])):
            inserted.append(len(tokens))
            targets[len(tokens)] = NULL
            tokens.append(MASK)
        if gap < len(words):
            if gap in base.targets:
                targets[len(tokens)] = base.targets[gap]
            tokens.append(base.masked.tokens[gap])
    return TrainingExample(masked=MaskedSequence.from_tokens(tokens), targets=targets,
                           inserted=tuple(inserted))


def gen_phone_input(words: Sequence[str], lex: Lexicon, phone_mask_rate: float = 0.2,
                    rng: np.random.Generator | None = None) -> list[str]:
    """Pronunciation of ``words`` with random PHONE_MASK dropout."""
    rng = np.random.default_rng() if rng is None else rng
    phones = words_to_phones(words, lex)
    drop = rng.random(len(phones)) < phone_mask_rate
    return [PHONE_MASK if d else p for p, d in zip(phones, drop)]
