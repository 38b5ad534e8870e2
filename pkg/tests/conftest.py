import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from ctc_ec.lexicon import Lexicon, build_vocab  # noqa: E402
from ctc_ec.sim.language import make_toy_language  # noqa: E402


def random_rows(rng, T, C, sparse=False):
    rows = rng.random((T, C)) + 1e-3
    if sparse:
        rows *= rng.random((T, C)) < 0.6
        rows[:, -1] += 1e-3
    return rows / rows.sum(axis=1, keepdims=True)


@pytest.fixture(scope="session")
def small_lang():
    lex, seed = make_toy_language(40, 300, seed=3)
    vocab = build_vocab([[w] for w in lex.prons])
    return lex, vocab, seed


@pytest.fixture
def cat_lex():
    return Lexicon.from_prons({"the": ("dh", "ax"), "cat": ("k", "ae", "t"),
                               "dog": ("d", "ao", "g"), "cap": ("k", "ae", "p")})
