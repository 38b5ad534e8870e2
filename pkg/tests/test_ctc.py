import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_rows
from oracles import (brute_best_path, brute_label_distribution, brute_seq_prob, collapse_ref,
                     scan_peaks)

from ctc_ec.ctc import (AlignmentError, FramePosteriors, align_confidence, collapse, ctc_log_prob,
                        forced_align, greedy_decode, prefix_beam_search, token_confidence)

A, B, BL = 0, 1, 2  # two tokens plus blank


def onehot(seq, C=3):
    rows = np.zeros((len(seq), C))
    rows[np.arange(len(seq)), seq] = 1.0
    return rows


# -- collapse --------------------------------------------------------------

@pytest.mark.parametrize("path,out", [([A, A, BL, B], [A, B]), ([BL, BL], []), ([A, BL, A], [A, A])])
def test_collapse_examples(path, out):
    assert collapse(path, BL) == out


@given(st.lists(st.integers(0, 3), max_size=12))
def test_collapse_matches_reference(path):
    assert tuple(collapse(path, 3)) == collapse_ref(path, 3)


# -- greedy ----------------------------------------------------------------

def test_greedy_examples():
    path, hyp = greedy_decode(onehot([A, BL]))
    assert list(path) == [A, BL] and hyp.tokens == (A,)
    _, hyp = greedy_decode(onehot([BL, BL, BL]))
    assert hyp.tokens == ()
    _, hyp = greedy_decode(onehot([A, A, B]))
    assert hyp.tokens == (A, B)


def test_greedy_tie_lowest_index():
    rows = np.array([[0.4, 0.4, 0.2], [0.2, 0.4, 0.4]])
    path, hyp = greedy_decode(rows)
    assert list(path) == [A, B]
    assert hyp.tokens == (A, B)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_greedy_is_rowwise_argmax_and_deterministic(seed, T):
    rows = random_rows(np.random.default_rng(seed), T, 4)
    p1, h1 = greedy_decode(rows)
    p2, h2 = greedy_decode(rows)
    assert list(p1) == list(np.argmax(rows, axis=1))
    assert list(p1) == list(p2) and h1.tokens == h2.tokens
    assert len(h1.confidences) == len(h1.tokens)
    assert np.all((h1.confidences >= 0) & (h1.confidences <= 1))


# -- token confidence ----------------------------------------------------

def test_confidence_peak_of_segment():
    rows = np.array([[0.6, 0.1, 0.3], [0.9, 0.05, 0.05]])
    hyp = token_confidence(rows, [A, A])
    assert hyp.frames == (1,)
    assert hyp.confidences[0] == pytest.approx(0.9)
    np.testing.assert_array_equal(hyp.rows[0], rows[1])


def test_confidence_singletons():
    hyp = token_confidence(onehot([A, BL, B]), [A, BL, B])
    assert hyp.frames == (0, 2)


def test_confidence_length_mismatch():
    with pytest.raises(ValueError):
        token_confidence(onehot([A, B]), [A])


@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_confidence_matches_scan(seed, T):
    rng = np.random.default_rng(seed)
    rows = random_rows(rng, T, 4)
    path = rng.integers(0, 4, size=T)
    hyp = token_confidence(rows, path)
    expected = scan_peaks(rows, list(path), 3)
    assert list(zip(hyp.tokens, hyp.frames)) == expected
    assert all(path[f] == tok for tok, f in zip(hyp.tokens, hyp.frames))
    assert all(a < b for a, b in zip(hyp.frames, hyp.frames[1:]))


# -- forward probability -------------------------------------------------

def test_forward_uniform_example():
    rows = np.full((2, 3), 1 / 3)
    assert math.exp(ctc_log_prob(rows, [A])) == pytest.approx(1 / 3, rel=1e-12)


def test_forward_repeat_needs_blank():
    assert ctc_log_prob(onehot([A]), [A, A]) == -math.inf


def test_forward_single_forced_path():
    assert ctc_log_prob(onehot([A]), [A]) == 0.0


def test_forward_rejects_blank_label():
    with pytest.raises(ValueError):
        ctc_log_prob(onehot([A]), [BL])


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 3),
       st.lists(st.integers(0, 2), max_size=3))
def test_forward_matches_enumeration(seed, T, V, y):
    y = [t % V for t in y]
    rows = random_rows(np.random.default_rng(seed), T, V + 1)
    ref = brute_seq_prob(rows, y)
    got = math.exp(ctc_log_prob(rows, y))
    if ref == 0:
        assert got == 0
    else:
        assert got == pytest.approx(ref, rel=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 3))
def test_forward_partitions_total_probability(seed, T, V):
    rows = random_rows(np.random.default_rng(seed), T, V + 1)
    dist = brute_label_distribution(rows)
    total = sum(math.exp(ctc_log_prob(rows, list(y))) for y in dist)
    assert total == pytest.approx(1.0, abs=1e-9)


# -- forced alignment ----------------------------------------------------

def test_align_trivial():
    ali = forced_align(onehot([A]), [A])
    assert list(ali.path) == [A] and list(ali.frames(0)) == [0]
    ali = forced_align(onehot([A, B]), [A, B])
    assert list(ali.frames(0)) == [0] and list(ali.frames(1)) == [1]


def test_align_infeasible_is_an_error():
    with pytest.raises(AlignmentError):
        forced_align(onehot([A]), [A, A])
    rows = onehot([A, A])
    with pytest.raises(AlignmentError):
        forced_align(rows, [B])  # feasible length, zero probability


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 3),
       st.lists(st.integers(0, 2), min_size=1, max_size=3))
def test_align_matches_brute_force(seed, T, V, y):
    y = [t % V for t in y]
    rows = random_rows(np.random.default_rng(seed), T, V + 1)
    best, best_p = brute_best_path(rows, y)
    if best is None:
        with pytest.raises(AlignmentError):
            forced_align(rows, y)
        return
    ali = forced_align(rows, y)
    assert collapse(ali.path, V) == y
    p = math.prod(rows[t, c] for t, c in enumerate(ali.path))
    assert p == pytest.approx(best_p, rel=1e-9)
    assert ali.log_prob <= ctc_log_prob(rows, y) + 1e-12
    spans = [list(ali.frames(i)) for i in range(len(y))]
    assert all(s for s in spans)
    assert all(spans[i][-1] < spans[i + 1][0] for i in range(len(y) - 1))


def test_align_confidence_for_beam_output():
    rows = np.array([[0.7, 0.1, 0.2], [0.2, 0.1, 0.7], [0.1, 0.6, 0.3]])
    hyp = align_confidence(rows, [A, B])
    assert hyp.frames == (0, 2)


# -- beam search ---------------------------------------------------------

def test_beam_onehot():
    hyps = prefix_beam_search(onehot([A, BL, B]), 4)
    assert hyps[0].tokens == (A, B)
    assert hyps[0].score == 0.0


def test_beam_uniform_two_frames():
    rows = np.full((2, 3), 1 / 3)
    hyps = prefix_beam_search(rows, 16)
    probs = {h.tokens: math.exp(h.ctc_score) for h in hyps}
    expect = {(): 1 / 9, (A,): 1 / 3, (B,): 1 / 3, (A, B): 1 / 9, (B, A): 1 / 9}
    assert probs.keys() == expect.keys()
    for k, v in expect.items():
        assert probs[k] == pytest.approx(v, rel=1e-12)
    ranked = [h.tokens for h in hyps]
    assert set(ranked[:2]) == {(A,), (B,)}


def test_beam_rejects_zero_width():
    with pytest.raises(ValueError):
        prefix_beam_search(onehot([A]), 0)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=8))
def test_beam_one_matches_greedy_on_onehot(path):
    rows = onehot(path)
    _, g = greedy_decode(rows)
    assert prefix_beam_search(rows, 1)[0].tokens == g.tokens


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_wide_beam_scores_are_exact(seed, T):
    rows = random_rows(np.random.default_rng(seed), T, 3)
    for h in prefix_beam_search(rows, 64):
        assert h.ctc_score == pytest.approx(ctc_log_prob(rows, list(h.tokens)), abs=1e-9)


def test_frame_posteriors_validation():
    post = FramePosteriors(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        post.validate()
    assert FramePosteriors(onehot([A, B]), frame_sec=0.02).duration == pytest.approx(0.04)
