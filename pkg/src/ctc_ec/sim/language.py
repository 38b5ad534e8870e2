"""A small synthetic language: lexicon with phone-level confusable clusters,
and a sparse first-order Markov grammar for seed sentences."""
from __future__ import annotations

import numpy as np

from ..lexicon import Lexicon

CONSONANTS = tuple("pbtdkgmnszfvlr")
VOWELS = tuple("aeiou")


def _random_pron(rng, length):
    # alternate consonant/vowel, random starting class
    start = int(rng.integers(2))
    out = []
    for k in range(length):
        pool = CONSONANTS if (k + start) % 2 == 0 else VOWELS
        out.append(pool[int(rng.integers(len(pool)))])
    return tuple(out)


def _variant(rng, pron):
    k = int(rng.integers(len(pron)))
    pool = VOWELS if pron[k] in VOWELS else CONSONANTS
    choices = [p for p in pool if p != pron[k]]
    new = list(pron)
    new[k] = choices[int(rng.integers(len(choices)))]
    return tuple(new)


def make_lexicon(n_words: int = 150, rng: np.random.Generator | None = None,
                 min_len: int = 2, max_len: int = 5, cluster: int = 3) -> Lexicon:
    """Words spelled by their phones, grown in clusters of single-phone variants
    so most words have a phone-distance-1 neighbour."""
    rng = np.random.default_rng(0) if rng is None else rng
    prons: dict[str, tuple] = {}
    seen = set()
    while len(prons) < n_words:
        base = _random_pron(rng, int(rng.integers(min_len, max_len + 1)))
        group = [base] + [_variant(rng, base) for _ in range(int(rng.integers(1, cluster)))]
        for pron in group:
            if pron in seen or len(prons) >= n_words:
                continue
            seen.add(pron)
            prons["".join(pron)] = pron
    return Lexicon.from_prons(prons)


def make_grammar(words, rng: np.random.Generator | None = None, branching: int = 6,
                 end_prob: float = 0.12):
    """Sparse bigram chain: each word has ``branching`` successors."""
    rng = np.random.default_rng(0) if rng is None else rng
    words = list(words)
    n = len(words)
    succ = {}
    for w in words:
        idx = rng.choice(n, size=min(branching, n), replace=False)
        weights = rng.dirichlet(np.full(len(idx), 0.7))
        succ[w] = ([words[i] for i in idx], weights)
    starts = rng.choice(n, size=min(3 * branching, n), replace=False)
    return {"succ": succ, "starts": [words[i] for i in starts], "end_prob": end_prob}


def sample_sentences(grammar, count, rng: np.random.Generator, min_len=3, max_len=15):
    out = []
    starts = grammar["starts"]
    while len(out) < count:
        w = starts[int(rng.integers(len(starts)))]
        sent = [w]
        while len(sent) < max_len:
            if len(sent) >= min_len and rng.random() < grammar["end_prob"]:
                break
            nxt, p = grammar["succ"][w]
            w = nxt[int(rng.choice(len(nxt), p=p))]
            sent.append(w)
        out.append(sent)
    return out


def make_toy_language(n_words: int = 150, n_seed: int = 2000, seed: int = 0, branching: int = 6):
    """Lexicon plus a seed corpus sampled from a random sparse grammar."""
    rng = np.random.default_rng([seed, 0xC0DE])
    lex = make_lexicon(n_words, rng)
    grammar = make_grammar(lex.prons.keys(), rng, branching)
    corpus = sample_sentences(grammar, n_seed, rng)
    return lex, corpus
