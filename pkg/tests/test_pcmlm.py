import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctc_ec.lexicon import MASK, NULL, Lexicon, LexiconError, Vocab
from ctc_ec.lm.data import MaskedSequence
from ctc_ec.lm.pcmlm import BOS, EOS, HashMismatch, PcMlmConfig, PcMlmModel, train_pcmlm

LEX2 = Lexicon.from_prons({"a": ("p",), "b": ("q", "q")})
V2 = Vocab(("a", "b"))


def test_single_sentence_hand_count():
    # a single forced mask per pass; eight passes cover both positions
    cfg = PcMlmConfig(delta=1.0, mask_rate=0.0, passes=8, seed=1)
    model = train_pcmlm([["a", "b"]], LEX2, V2, cfg)
    assert model.joint[(BOS, "b")]["a"] > 0
    dist = model.context_dist(BOS, "b")
    assert dist[0] > dist[1]
    assert int(np.argmax(dist)) == 0


def test_non_deletable_has_no_null_counts(small_lang):
    lex, vocab, seed = small_lang
    model = train_pcmlm(seed[:200], lex, vocab, PcMlmConfig())
    assert model.null_count() == 0


def test_deletable_learns_null(small_lang):
    lex, vocab, seed = small_lang
    model = train_pcmlm(seed[:200], lex, vocab, PcMlmConfig(deletable=True))
    assert model.null_count() > 0


def test_training_is_deterministic(small_lang):
    lex, vocab, seed = small_lang
    a = train_pcmlm(seed[:100], lex, vocab, PcMlmConfig(seed=4, deletable=True))
    b = train_pcmlm(seed[:100], lex, vocab, PcMlmConfig(seed=4, deletable=True))
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)


def test_empty_corpus():
    with pytest.raises(LexiconError):
        train_pcmlm([], LEX2, V2)


def test_config_validation():
    with pytest.raises(ValueError):
        PcMlmConfig(delta=0)
    with pytest.raises(ValueError):
        PcMlmConfig(gamma=-1)


def hand_model(gamma=1.0, deletable=False, delta=0.5):
    m = PcMlmModel(V2, LEX2, PcMlmConfig(delta=delta, gamma=gamma, deletable=deletable))
    m.add(BOS, EOS, "a", 3)
    m.add(BOS, EOS, "b", 1)
    m.add("a", EOS, "b", 2)
    if deletable:
        m.add(BOS, EOS, NULL, 1)
    return m


def expected_context(left, right, delta, with_null):
    """The smoothed context model written out longhand for the counts above."""
    cands = ["a", "b"] + ([NULL] if with_null else [])
    K = len(cands)
    left_c = {BOS: {"a": 3, "b": 1, NULL: 1 if with_null else 0}, "a": {"b": 2}}
    right_c = {"a": {EOS: 3}, "b": {EOS: 3}, NULL: {EOS: 1 if with_null else 0}}
    joint = {(BOS, EOS): {"a": 3, "b": 1, NULL: 1 if with_null else 0}, ("a", EOS): {"b": 2}}
    lrow = left_c.get(left, {})
    ltot = sum(lrow.get(c, 0) for c in cands)
    bi = []
    for c in cands:
        pl = (lrow.get(c, 0) + delta) / (ltot + delta * K)
        rrow = right_c.get(c, {})
        pr = (rrow.get(right, 0) + delta) / (sum(rrow.values()) + delta * 3)  # a, b, EOS
        bi.append(pl * pr)
    z = sum(bi)
    bi = [x / z for x in bi]
    jrow = joint.get((left, right), {})
    counts = [jrow.get(c, 0) for c in cands]
    kappa = delta * K
    return [(counts[k] + kappa * bi[k]) / (sum(counts) + kappa) for k in range(K)]


@pytest.mark.parametrize("left,right", [(BOS, EOS), ("a", EOS), ("b", "a"), (BOS, "b")])
def test_context_matches_hand_computation(left, right):
    m = hand_model()
    got = m.context_dist(left, right)
    assert got.tolist() == pytest.approx(expected_context(left, right, 0.5, False), rel=1e-12)


def test_phone_conditioned_hand_computation():
    m = hand_model(gamma=0.7)
    masked = MaskedSequence.from_tokens([MASK])
    # gap "q" is one edit from both pronunciations: p -> q, qq -> q
    got = m.score_masked(["q"], masked, 0)
    ctx = expected_context(BOS, EOS, 0.5, False)
    w = [ctx[0] * math.exp(-0.7 * 1), ctx[1] * math.exp(-0.7 * 1)]
    assert got[:2].tolist() == pytest.approx([x / sum(w) for x in w], rel=1e-12)
    got = m.score_masked(["q", "q"], masked, 0)
    w = [ctx[0] * math.exp(-0.7 * 2), ctx[1]]
    assert got[:2].tolist() == pytest.approx([x / sum(w) for x in w], rel=1e-12)


def test_deletable_hand_computation():
    m = hand_model(gamma=1.0, deletable=True)
    masked = MaskedSequence.from_tokens([MASK])
    got = m.score_masked(["p", "q"], masked, 0)
    ctx = expected_context(BOS, EOS, 0.5, True)
    w = [ctx[0] * math.exp(-1), ctx[1] * math.exp(-1), ctx[2] * math.exp(-2)]
    assert got[V2.null] == pytest.approx(w[2] / sum(w), rel=1e-12)
    assert got[:2].tolist() == pytest.approx([w[0] / sum(w), w[1] / sum(w)], rel=1e-12)
    assert got.sum() == pytest.approx(1.0, abs=1e-12)


def test_gamma_zero_is_context_only():
    m = hand_model(gamma=0.0)
    masked = MaskedSequence.from_tokens(["a", MASK])
    pc = m.score_masked(["p", "q", "q"], masked, 1)
    assert pc.tolist() == pytest.approx(m.score_masked_mlm(masked, 1).tolist(), rel=1e-12)


def test_large_gamma_follows_phones(small_lang):
    lex, vocab, seed = small_lang
    model = train_pcmlm(seed[:300], lex, vocab, PcMlmConfig(gamma=50.0))
    pron = {}
    for w, p in lex.prons.items():
        pron.setdefault(p, []).append(w)
    word = next(w for w in vocab.words if len(pron[lex[w]]) == 1)
    masked = MaskedSequence.from_tokens([MASK])
    dist = model.score_masked(list(lex[word]), masked, 0)
    assert vocab.lookup(int(np.argmax(dist))) == word


def test_uniform_counts_give_uniform_mlm():
    m = PcMlmModel(V2, LEX2, PcMlmConfig())
    d = m.score_masked_mlm(MaskedSequence.from_tokens([MASK, "a"]), 0)
    assert d[:2].tolist() == pytest.approx([0.5, 0.5])
    assert d[2:].sum() == 0


def test_unmasked_position_rejected():
    m = hand_model()
    with pytest.raises(ValueError):
        m.score_masked(["p"], MaskedSequence.from_tokens(["a"]), 0)
    with pytest.raises(ValueError):
        m.score_masked_mlm(MaskedSequence.from_tokens(["a", MASK]), 0)


@given(st.integers(0, 2**32 - 1))
def test_distributions_normalised(seed):
    rng = np.random.default_rng(seed)
    toks = [("a", "b", MASK)[i] for i in rng.integers(3, size=int(rng.integers(1, 6)))]
    if MASK not in toks:
        toks[0] = MASK
    masked = MaskedSequence.from_tokens(toks)
    phones = [("p", "q")[i] for i in rng.integers(2, size=int(rng.integers(0, 6)))]
    for deletable in (False, True):
        m = hand_model(deletable=deletable)
        for i in masked.masked:
            d = m.score_masked(phones, masked, i)
            assert d.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(d >= 0)
            assert (d[V2.null] > 0) == deletable
            assert d[V2.unk] == d[V2.mask] == d[V2.blank] == 0


@given(st.lists(st.sampled_from(["a", "b"]), min_size=2, max_size=4),
       st.lists(st.sampled_from(["a", "b"]), min_size=2, max_size=4))
def test_score_ignores_tokens_outside_window(prefix, suffix):
    m = hand_model()
    # window: nearest unmasked neighbours of the masked slot are prefix[-1], suffix[0]
    base = MaskedSequence.from_tokens(prefix + [MASK] + suffix)
    i = len(prefix)
    mutated = MaskedSequence.from_tokens(["b" if t == "a" else "a" for t in prefix[:-1]]
                                         + prefix[-1:] + [MASK] + suffix[:1]
                                         + ["b" if t == "a" else "a" for t in suffix[1:]])
    assert m.score_masked_mlm(base, i).tolist() == m.score_masked_mlm(mutated, i).tolist()
    assert (m.score_masked([], base, i, gap=["q"]).tolist()
            == m.score_masked([], mutated, i, gap=["q"]).tolist())


def test_serialisation_roundtrip(tmp_path, small_lang):
    lex, vocab, seed = small_lang
    model = train_pcmlm(seed[:150], lex, vocab, PcMlmConfig(deletable=True, seed=2))
    model.save(tmp_path / "m.json")
    again = PcMlmModel.load(tmp_path / "m.json", vocab, lex)
    assert again.to_json() == model.to_json()
    masked = MaskedSequence.from_tokens([seed[0][0], MASK, MASK])
    phones = list(lex[seed[0][0]]) + ["a", "b", "a"]
    for i in masked.masked:
        assert again.score_masked(phones, masked, i).tolist() == \
            model.score_masked(phones, masked, i).tolist()


def test_load_checks_hashes(tmp_path, small_lang):
    lex, vocab, seed = small_lang
    model = train_pcmlm(seed[:50], lex, vocab)
    model.save(tmp_path / "m.json")
    other = Vocab(vocab.words[:-1])
    with pytest.raises(HashMismatch) as info:
        PcMlmModel.load(tmp_path / "m.json", other, lex)
    assert vocab.hash in str(info.value) and other.hash in str(info.value)
    with pytest.raises(HashMismatch):
        PcMlmModel.load(tmp_path / "m.json", vocab, LEX2)
