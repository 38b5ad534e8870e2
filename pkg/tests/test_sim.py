import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import edit_distance_exhaustive, edit_distance_recursive

from ctc_ec.ctc import greedy_decode
from ctc_ec.lexicon import LexiconError, words_to_phones
from ctc_ec.sim.channel import (NoisyChannel, SimConfig, gen_corpus, phone_neighbors,
                                simulate_utterances, synth_phone_hyp)
from ctc_ec.sim.language import make_lexicon, make_toy_language
from ctc_ec.sim.metrics import corpus_wer, wer


# -- WER -----------------------------------------------------------------------

def test_wer_substitution():
    r = wer(list("abc"), list("axc"))
    assert (r.sub, r.dele, r.ins) == (1, 0, 0) and r.wer == pytest.approx(1 / 3)


def test_wer_insertion():
    r = wer(list("ab"), list("axb"))
    assert (r.sub, r.dele, r.ins) == (0, 0, 1) and r.wer == 0.5


def test_wer_empty_reference():
    r = wer([], ["a", "b"])
    assert r.ins == 2 and r.wer == 2.0
    assert wer([], []).wer == 0.0


def test_wer_prefers_substitution_then_deletion():
    r = wer(["a", "b"], ["c"])
    assert (r.sub, r.dele, r.ins) == (1, 1, 0)


@given(st.lists(st.sampled_from("abc"), max_size=4), st.lists(st.sampled_from("abc"), max_size=4))
def test_wer_distance_is_exhaustive_minimum(ref, hyp):
    r = wer(ref, hyp)
    assert r.errors == edit_distance_exhaustive(ref, hyp)
    # the returned alignment is a valid edit script
    assert [hi for _, _, hi in r.alignment if hi is not None] == list(range(len(hyp)))
    assert [ri for _, ri, _ in r.alignment if ri is not None] == list(range(len(ref)))


@given(st.lists(st.sampled_from("abcd"), max_size=6), st.lists(st.sampled_from("abcd"), max_size=6))
def test_wer_symmetric_total(a, b):
    assert wer(a, b).errors == wer(b, a).errors == edit_distance_recursive(a, b)
    assert wer(a, a).wer == 0.0


def test_wer_tie_reads_two_substitutions():
    # b deleted and x inserted after c ties with two substitutions
    r = wer(list("abc"), list("acx"))
    assert (r.sub, r.dele, r.ins) == (2, 0, 0)


def test_channel_keeps_deletions_away_from_insertions(lang):
    lex, vocab, seed = lang
    channel = NoisyChannel(lex, vocab, SimConfig(sub_rate=0, ins_rate=0.3, del_rate=0.3))
    for idx, words in enumerate(seed[:300]):
        rec = channel.corrupt(words, np.random.default_rng(idx))
        dels = {e.ref_pos for e in rec.events if e.kind == "del"}
        for e in rec.events:
            if e.kind == "ins":
                assert not dels & {e.ref_pos - 1, e.ref_pos, e.ref_pos + 1, e.ref_pos + 2}


def test_corpus_wer_pools_counts():
    r = corpus_wer([["a", "b"], ["c"]], [["a"], ["c", "d"]])
    assert (r.sub, r.dele, r.ins, r.ref_len) == (0, 1, 1, 3)
    assert r.wer == pytest.approx(2 / 3)


# -- language and corpus ---------------------------------------------------------

def test_lexicon_has_confusable_neighbours():
    lex = make_lexicon(60, np.random.default_rng(1))
    assert len(lex) == 60
    nb = phone_neighbors(lex, list(lex.prons))
    assert sum(bool(v) for v in nb.values()) > 30
    for w, others in nb.items():
        for o in others:
            assert edit_distance_recursive(lex[w], lex[o]) == 1


def test_gen_corpus_single_seed_sentence():
    seed = [["a", "b", "c"]]
    out = gen_corpus(seed, 5, np.random.default_rng(0))
    assert out == [["a", "b", "c"]] * 5


def test_gen_corpus_bigrams_consistent():
    seed = [["a", "b", "a", "c"], ["b", "a", "b"]]
    allowed = set()
    for s in seed:
        p = ["<s>"] + s + ["</s>"]
        allowed |= set(zip(p, p[1:]))
    for s in gen_corpus(seed, 50, np.random.default_rng(3)):
        p = ["<s>"] + s + ["</s>"]
        assert set(zip(p, p[1:])) <= allowed


def test_gen_corpus_edge_cases():
    assert gen_corpus([["a"]], 0, np.random.default_rng(0)) == []
    with pytest.raises(LexiconError):
        gen_corpus([], 3, np.random.default_rng(0))


def test_gen_corpus_deterministic():
    _, seed = make_toy_language(30, 100, seed=9)
    a = gen_corpus(seed, 20, np.random.default_rng(42))
    assert a == gen_corpus(seed, 20, np.random.default_rng(42))
    assert a != gen_corpus(seed, 20, np.random.default_rng(43))


# -- phone hypotheses ------------------------------------------------------------

def test_phone_hyp_identity():
    p = list("abcab")
    assert synth_phone_hyp(p, 0.0, np.random.default_rng(0)) == p


def test_phone_hyp_full_rate_edit_count():
    rng = np.random.default_rng(5)
    phones = list("abcdefghij") * 100
    edits = n = 0
    while n < 1_000_000:
        _, e = synth_phone_hyp(phones, 1.0, rng, return_edits=True)
        edits += e
        n += len(phones)
    assert abs(edits / n - 1.0) <= 0.05


def test_phone_hyp_edit_mix():
    rng = np.random.default_rng(6)
    phones = list("abcdefghij") * 1000
    out = synth_phone_hyp(phones, 0.3, rng)
    # equal thirds of substitutions, insertions and deletions keep the length
    assert abs(len(out) - len(phones)) < 0.02 * len(phones)
    assert edit_distance_recursive(phones[:40], out[:40]) <= 40


def test_phone_hyp_deterministic():
    a = synth_phone_hyp(list("abcdef"), 0.5, np.random.default_rng(77), inventory="abcdefg")
    b = synth_phone_hyp(list("abcdef"), 0.5, np.random.default_rng(77), inventory="abcdefg")
    assert a == b


def test_phone_hyp_rate_validation():
    with pytest.raises(ValueError):
        synth_phone_hyp(["a"], 1.5, np.random.default_rng(0))


# -- posterior synthesis ---------------------------------------------------------

@pytest.fixture(scope="module")
def lang():
    lex, seed = make_toy_language(60, 500, seed=11)
    from ctc_ec.lexicon import build_vocab
    vocab = build_vocab([[w] for w in lex.prons])
    return lex, vocab, seed


def test_clean_channel_is_exact(lang):
    lex, vocab, seed = lang
    cfg = SimConfig(sub_rate=0.0, c_hi=1.0, c_lo=0.9, conf_jitter=0.0)
    for u in simulate_utterances(seed[:30], lex, vocab, cfg):
        _, h = greedy_decode(u.post)
        assert vocab.decode(h.tokens) == u.words
        assert np.all(h.confidences == 1.0)


def test_full_substitution(lang):
    lex, vocab, seed = lang
    for u in simulate_utterances(seed[:30], lex, vocab, SimConfig(sub_rate=1.0)):
        assert len(u.record.events) == len(u.words)
        assert all(e.kind == "sub" for e in u.record.events)


def test_rows_normalised_and_record_consistent(lang):
    lex, vocab, seed = lang
    cfg = SimConfig(sub_rate=0.2, ins_rate=0.1, del_rate=0.1, seed=3)
    for u in simulate_utterances(seed[:200], lex, vocab, cfg):
        u.post.validate()
        np.testing.assert_allclose(u.post.rows.sum(axis=1), 1.0, atol=1e-9)
        _, h = greedy_decode(u.post)
        assert vocab.decode(h.tokens) == u.record.apply(u.words) == u.record.hyp
        origin = u.record.origin(len(u.words))
        assert len(origin) == len(u.record.hyp)
        assert u.post.rows[:, [vocab.unk, vocab.mask, vocab.null]].sum() == 0


def test_confidence_separates_errors(lang):
    lex, vocab, seed = lang
    cfg = SimConfig(sub_rate=0.3, seed=4)
    for u in simulate_utterances(seed[:100], lex, vocab, cfg):
        _, h = greedy_decode(u.post)
        origin = u.record.origin(len(u.words))
        for tok, conf, r in zip(vocab.decode(h.tokens), h.confidences, origin):
            if tok == u.words[r]:
                assert conf >= cfg.c_hi - cfg.conf_jitter - 1e-12
            else:
                assert conf <= cfg.c_lo + cfg.conf_jitter + 1e-12


def test_simulation_bit_reproducible(lang):
    lex, vocab, seed = lang
    cfg = SimConfig(sub_rate=0.2, ins_rate=0.05, del_rate=0.05, seed=8)
    a = simulate_utterances(seed[:40], lex, vocab, cfg)
    b = simulate_utterances(seed[:40], lex, vocab, cfg)
    for x, y in zip(a, b):
        assert np.array_equal(x.post.rows, y.post.rows) and x.phones == y.phones


def test_error_rates_monte_carlo(lang):
    lex, vocab, seed = lang
    refs = gen_corpus(seed, 10_000, np.random.default_rng(13))
    cfg = SimConfig(sub_rate=0.15, ins_rate=0.05, del_rate=0.05, seed=14)
    channel = NoisyChannel(lex, vocab, cfg)
    s = d = i = n = 0
    for idx, words in enumerate(refs):
        rec = channel.corrupt(words, np.random.default_rng([cfg.seed, 1, idx]))
        r = wer(words, rec.hyp)
        s, d, i, n = s + r.sub, d + r.dele, i + r.ins, n + len(words)
    assert abs(s / n - 0.15) <= 0.1 * 0.15
    assert abs(d / n - 0.05) <= 0.1 * 0.05
    assert abs(i / n - 0.05) <= 0.1 * 0.05


def test_greedy_error_rates_monte_carlo(lang):
    lex, vocab, seed = lang
    refs = gen_corpus(seed, 10_000, np.random.default_rng(15))
    cfg = SimConfig(sub_rate=0.15, ins_rate=0.05, del_rate=0.05, seed=16)
    utts = simulate_utterances(refs, lex, vocab, cfg)
    hyps = [vocab.decode(greedy_decode(u.post)[1].tokens) for u in utts]
    r = corpus_wer(refs, hyps)
    assert abs(r.sub / r.ref_len - 0.15) <= 0.1 * 0.15
    assert abs(r.dele / r.ref_len - 0.05) <= 0.1 * 0.05
    assert abs(r.ins / r.ref_len - 0.05) <= 0.1 * 0.05


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(c_lo=0.9, c_hi=0.8)
    with pytest.raises(ValueError):
        SimConfig(sub_rate=1.2)
    with pytest.raises(ValueError):
        SimConfig(min_frames=3, max_frames=2)
