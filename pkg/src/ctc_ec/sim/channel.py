"""Noisy channel that turns reference word sequences into CTC frame
posteriors with controlled substitution/deletion/insertion errors, plus a
noisy phone hypothesis standing in for an intermediate phone recogniser.

The channel guarantees that greedy decoding of the synthesized posteriors
recovers exactly the corrupted word sequence, as long as every peak
probability exceeds 1/3 (blank and alternatives each get at most half of
the remaining mass).
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..ctc import FramePosteriors
from ..lexicon import Lexicon, LexiconError, Vocab, words_to_phones

BOS = "<s>"
EOS = "</s>"


@dataclass
class SimConfig:
    sub_rate: float = 0.15
    ins_rate: float = 0.0
    del_rate: float = 0.0
    c_hi: float = 0.95
    c_lo: float = 0.4
    conf_jitter: float = 0.04
    min_frames: int = 1
    max_frames: int = 3
    blank_rate: float = 0.5
    n_alternatives: int = 3
    phone_error_rate: float = 0.091
    frame_sec: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("sub_rate", "ins_rate", "del_rate", "blank_rate", "phone_error_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.sub_rate + self.del_rate > 1.0:
            raise ValueError("sub_rate + del_rate must not exceed 1")
        if not self.c_lo < self.c_hi:
            raise ValueError("c_lo must be below c_hi")
        if self.c_lo - self.conf_jitter <= 1.0 / 3.0:
            raise ValueError("peak probabilities must stay above 1/3 for greedy recovery")
        if not 1 <= self.min_frames <= self.max_frames:
            raise ValueError("need 1 <= min_frames <= max_frames")

    def to_json(self):
        return asdict(self)


@dataclass
class Corruption:
    kind: str  # "sub", "del" or "ins"
    ref_pos: int  # reference index; for insertions, the index the token follows (-1 = start)
    ref: str | None
    hyp: str | None


@dataclass
class CorruptionRecord:
    events: list = field(default_factory=list)
    hyp: list = field(default_factory=list)

    def apply(self, ref: Sequence[str]) -> list[str]:
        """Replay the recorded edits on ``ref``."""
        subs = {e.ref_pos: e.hyp for e in self.events if e.kind == "sub"}
        dels = {e.ref_pos for e in self.events if e.kind == "del"}
        ins = defaultdict(list)
        for e in self.events:
            if e.kind == "ins":
                ins[e.ref_pos].append(e.hyp)
        out = list(ins[-1])
        for j, w in enumerate(ref):
            if j not in dels:
                out.append(subs.get(j, w))
            out.extend(ins[j])
        return out

    def origin(self, n_ref: int) -> list:
        """Reference index behind each hypothesis token; None for insertions."""
        dels = {e.ref_pos for e in self.events if e.kind == "del"}
        ins = Counter(e.ref_pos for e in self.events if e.kind == "ins")
        out = [None] * ins[-1]
        for j in range(n_ref):
            if j not in dels:
                out.append(j)
            out.extend([None] * ins[j])
        return out

    def counts(self) -> Counter:
        return Counter(e.kind for e in self.events)


def phone_neighbors(lex: Lexicon, words: Sequence[str]) -> dict:
    """Words whose pronunciations are one phone edit apart."""
    from ..lm.phones import edit_distances

    phone_ids = {p: i for i, p in enumerate(lex.phones)}
    words = list(words)
    lengths = np.array([len(lex[w]) for w in words])
    prons = np.full((len(words), lengths.max()), -1)
    for i, w in enumerate(words):
        prons[i, :lengths[i]] = [phone_ids[p] for p in lex[w]]
    out = {}
    for i, w in enumerate(words):
        # only lengths within one can be at distance one
        d = edit_distances([phone_ids[p] for p in lex[w]], prons, lengths)
        out[w] = [words[j] for j in np.flatnonzero(d == 1)]
    return out


class NoisyChannel:
    def __init__(self, lex: Lexicon, vocab: Vocab, cfg: SimConfig | None = None):
        self.lex = lex
        self.vocab = vocab
        self.cfg = cfg or SimConfig()
        for w in vocab.words:
            if w not in lex:
                raise LexiconError(f"vocabulary word {w!r} missing from lexicon")
        self.words = list(vocab.words)
        self.neighbors = phone_neighbors(lex, self.words)

    # -- row construction ------------------------------------------------

    def _alternatives(self, tok, rng, must=None):
        pool = [w for w in self.neighbors[tok] if w != must]
        k = self.cfg.n_alternatives
        if len(pool) > k:
            pool = [pool[i] for i in sorted(rng.choice(len(pool), size=k, replace=False))]
        alts = ([must] if must is not None else []) + pool
        alts = alts[:k]
        while len(alts) < min(2, len(self.words) - 1):
            w = self.words[int(rng.integers(len(self.words)))]
            if w != tok and w not in alts:
                alts.append(w)
        return [self.vocab.id_of(w) for w in alts]

    def _token_row(self, tok_id, peak, alts, rng):
        row = np.zeros(len(self.vocab))
        rest = 1.0 - peak
        if alts:
            row[self.vocab.blank] = rest / 2
            share = rng.dirichlet(np.ones(len(alts))) * (rest / 2)
            np.add.at(row, alts, share)
        else:
            row[self.vocab.blank] = rest
        row[tok_id] += peak
        return row

    def _blank_row(self, rng, near=None):
        row = np.zeros(len(self.vocab))
        b = rng.uniform(0.7, 0.98)
        row[self.vocab.blank] = b
        if near is None:
            near = int(rng.integers(self.vocab.num_words))
        row[near] += 1.0 - b
        return row

    def _peak(self, mean, rng):
        j = self.cfg.conf_jitter
        return float(np.clip(mean + rng.uniform(-j, j), 0.0, 1.0))

    # -- utterance synthesis --------------------------------------------------

    def corrupt(self, words: Sequence[str], rng: np.random.Generator) -> CorruptionRecord:
        cfg = self.cfg
        n = len(words)
        u = rng.random(n)
        ops = np.where(u < cfg.sub_rate, 1, np.where(u < cfg.sub_rate + cfg.del_rate, 2, 0))
        # an insertion after token j needs tokens j-1..j+2 to survive: a deletion
        # at most one token away would let the WER backtrace read the pair as
        # substitutions.  The per-slot rate is compensated for that condition.
        keep = 1.0 - cfg.del_rate
        n_window = np.array([min(j + 2, n - 1) - max(j - 1, 0) + 1 for j in range(n)])
        p_ins = (np.minimum(1.0, cfg.ins_rate / keep ** n_window) if keep > 0
                 else np.zeros(n))
        ins_draw = rng.random(n)
        survives = ops != 2
        rec = CorruptionRecord()
        for j, w in enumerate(words):
            if ops[j] == 2:
                rec.events.append(Corruption("del", j, w, None))
            elif ops[j] == 1:
                pool = self.neighbors[w] or [x for x in self.words if x != w]
                new = pool[int(rng.integers(len(pool)))]
                rec.events.append(Corruption("sub", j, w, new))
                rec.hyp.append(new)
            else:
                rec.hyp.append(w)
            if ins_draw[j] < p_ins[j] and survives[max(j - 1, 0):j + 3].all():
                spurious = self.words[int(rng.integers(len(self.words)))]
                rec.events.append(Corruption("ins", j, None, spurious))
                rec.hyp.append(spurious)
        return rec

    def synth_posteriors(self, words: Sequence[str], rng: np.random.Generator,
                         utt_id: str = "") -> tuple[FramePosteriors, CorruptionRecord]:
        cfg = self.cfg
        self.vocab.encode(words)
        rec = self.corrupt(words, rng)
        sub_ref = {e.ref_pos: e.ref for e in rec.events if e.kind == "sub"}
        # (token, is_error, true word for substitutions)
        emitted = []
        for j, w in enumerate(words):
            kinds = [e for e in rec.events if e.ref_pos == j]
            if not any(e.kind == "del" for e in kinds):
                if j in sub_ref:
                    new = next(e.hyp for e in kinds if e.kind == "sub")
                    emitted.append((new, True, sub_ref[j]))
                else:
                    emitted.append((w, False, None))
            for e in kinds:
                if e.kind == "ins":
                    emitted.append((e.hyp, True, None))
        rows = []
        prev = None
        for tok, is_err, truth in emitted:
            tid = self.vocab.id_of(tok)
            if rows and (tid == prev or rng.random() < cfg.blank_rate):
                for _ in range(int(rng.integers(1, 3))):
                    rows.append(self._blank_row(rng, prev))
            peak = self._peak(cfg.c_lo if is_err else cfg.c_hi, rng)
            alts = self._alternatives(tok, rng, must=truth)
            nf = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
            at = int(rng.integers(nf))
            for f in range(nf):
                if f == at:
                    p = peak
                else:
                    p = peak - rng.uniform(0.02, 0.15) * (peak - 1.0 / 3.0)
                rows.append(self._token_row(tid, p, alts, rng))
            prev = tid
        if not rows or rng.random() < cfg.blank_rate:
            rows.append(self._blank_row(rng, prev))
        post = FramePosteriors(np.vstack(rows), frame_sec=cfg.frame_sec, id=utt_id,
                               vocab_hash=self.vocab.hash)
        return post, rec


def synth_posteriors(words, lex: Lexicon, vocab: Vocab, cfg: SimConfig, rng):
    return NoisyChannel(lex, vocab, cfg).synth_posteriors(words, rng)


def synth_phone_hyp(phones: Sequence[str], per: float, rng: np.random.Generator,
                    inventory: Sequence[str] | None = None, return_edits: bool = False):
    """Apply one random edit (substitute, insert after, delete; equally likely)
    to each phone independently with probability ``per``."""
    if not 0.0 <= per <= 1.0:
        raise ValueError("phone error rate must be in [0, 1]")
    inventory = list(inventory) if inventory is not None else sorted(set(phones))
    out = []
    edits = 0
    u = rng.random(len(phones))
    for p, x in zip(phones, u):
        if x >= per:
            out.append(p)
            continue
        edits += 1
        op = int(rng.integers(3))
        if op == 0:
            pool = [q for q in inventory if q != p] or [p]
            out.append(pool[int(rng.integers(len(pool)))])
        elif op == 1:
            out.append(p)
            out.append(inventory[int(rng.integers(len(inventory)))])
    return (out, edits) if return_edits else out


def gen_corpus(seed_corpus: Sequence[Sequence[str]], count: int, rng: np.random.Generator,
               max_len: int | None = None) -> list[list[str]]:
    """Sample sentences from a second-order Markov chain fitted to ``seed_corpus``."""
    seed_corpus = [list(s) for s in seed_corpus if s]
    if not seed_corpus:
        raise LexiconError("empty seed corpus")
    if max_len is None:
        max_len = 3 * max(len(s) for s in seed_corpus)
    trans: dict[tuple, Counter] = defaultdict(Counter)
    for s in seed_corpus:
        padded = [BOS, BOS] + s + [EOS]
        for t in range(2, len(padded)):
            trans[(padded[t - 2], padded[t - 1])][padded[t]] += 1
    table = {}
    for state, c in trans.items():
        toks = list(c)
        w = np.array([c[t] for t in toks], dtype=np.float64)
        table[state] = (toks, np.cumsum(w / w.sum()))
    out = []
    for _ in range(count):
        state = (BOS, BOS)
        sent = []
        while len(sent) < max_len:
            toks, cdf = table[state]
            nxt = toks[min(int(np.searchsorted(cdf, rng.random(), side="right")), len(toks) - 1)]
            if nxt == EOS:
                break
            sent.append(nxt)
            state = (state[1], nxt)
        out.append(sent)
    return out


@dataclass
class Utterance:
    id: str
    words: list
    post: FramePosteriors
    phones: list
    record: CorruptionRecord | None = None


def simulate_utterances(refs, lex: Lexicon, vocab: Vocab, cfg: SimConfig,
                        channel: NoisyChannel | None = None, prefix: str = "utt") -> list[Utterance]:
    """Posteriors and phone hypotheses for each reference, one RNG stream per utterance."""
    channel = channel or NoisyChannel(lex, vocab, cfg)
    out = []
    for idx, words in enumerate(refs):
        rng = np.random.default_rng([cfg.seed, 1, idx])
        uid = f"{prefix}{idx:06d}"
        post, rec = channel.synth_posteriors(words, rng, uid)
        phones = synth_phone_hyp(words_to_phones(words, lex), cfg.phone_error_rate, rng,
                                 lex.phones)
        out.append(Utterance(uid, list(words), post, phones, rec))
    return out
