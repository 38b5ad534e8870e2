"""Real-time-factor benchmarking of decoding/correction systems."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

from ..correct import CorrectionConfig, correct_pipeline
from ..ctc import greedy_decode, prefix_beam_search
from ..fusion import IdLM, rescore_nbest
from ..lexicon import Vocab
from ..lm.ngram import NGramLM
from ..lm.pcmlm import PcMlmModel
from ..lm.scorers import MlmScorer, PcMlmScorer
from .metrics import corpus_wer

SYSTEMS = ("greedy", "ec-mlm", "ec-pcmlm", "ec-del", "beam", "beam-rescore", "fusion")

LABELS = {
    "greedy": "CTC (greedy)",
    "ec-mlm": "+EC (MLM)",
    "ec-pcmlm": "+EC (PC-MLM)",
    "ec-del": "+EC (Del PC-MLM)",
    "beam": "CTC+BS (b={beam})",
    "beam-rescore": "+Resc (n-gram, n={nbest})",
    "fusion": "+SF (n-gram, b={beam})",
}


@dataclass
class SystemSuite:
    vocab: Vocab
    pcmlm: PcMlmModel | None = None
    del_pcmlm: PcMlmModel | None = None
    ngram: NGramLM | None = None
    beta: float = 0.8
    alpha: float = 0.5
    beam: int = 5
    nbest: int = 5
    rescore_weight: float = 0.5
    fusion_weight: float = 0.5

    def __post_init__(self):
        self._scorers = {}
        if self.pcmlm is not None:
            self._scorers["ec-mlm"] = MlmScorer(self.pcmlm)
            self._scorers["ec-pcmlm"] = PcMlmScorer(self.pcmlm)
        if self.del_pcmlm is not None:
            self._scorers["ec-del"] = PcMlmScorer(self.del_pcmlm)
        self._idlm = IdLM(self.ngram, self.vocab) if self.ngram is not None else None

    def label(self, system: str) -> str:
        return LABELS[system].format(beam=self.beam, nbest=self.nbest)

    def check(self, system: str):
        if system not in SYSTEMS:
            raise ValueError(f"unknown system {system!r}; choose from {', '.join(SYSTEMS)}")
        if system.startswith("ec-") and system not in self._scorers:
            raise ValueError(f"system {system!r} needs a trained masked LM")
        if system in ("beam-rescore", "fusion") and self.ngram is None:
            raise ValueError(f"system {system!r} needs an n-gram LM")

    def run(self, system: str, utt) -> list[str]:
        if system == "greedy":
            _, hyp = greedy_decode(utt.post)
            return self.vocab.decode(hyp.tokens)
        if system in self._scorers:
            cfg = CorrectionConfig(beta=self.beta, alpha=self.alpha)
            return correct_pipeline(utt.post, utt.phones, self._scorers[system], cfg,
                                    self.vocab).tokens
        if system == "beam":
            return self.vocab.decode(prefix_beam_search(utt.post, self.beam)[0].tokens)
        if system == "beam-rescore":
            hyps = prefix_beam_search(utt.post, self.beam, nbest=self.nbest)
            best = rescore_nbest(hyps, self.ngram, self.rescore_weight, self.vocab)
            return self.vocab.decode(best.tokens)
        if system == "fusion":
            hyps = prefix_beam_search(utt.post, self.beam, self._idlm, self.fusion_weight)
            return self.vocab.decode(hyps[0].tokens)
        raise ValueError(f"unknown system {system!r}")


@dataclass
class EvalReport:
    system: str
    label: str
    wer: float
    sub: int
    dele: int
    ins: int
    ref_tokens: int
    utterances: int
    rtf: float | None = None
    rtf_runs: list = field(default_factory=list)
    audio_sec: float = 0.0
    config: dict = field(default_factory=dict)
    note: str = "RTF excludes model loading; batch size 1; warm-up run excluded"

    def to_json(self) -> dict:
        return asdict(self)


def evaluate(suite: SystemSuite, system: str, utterances: Sequence) -> tuple[EvalReport, list]:
    suite.check(system)
    hyps = [suite.run(system, u) for u in utterances]
    res = corpus_wer([u.words for u in utterances], hyps)
    report = EvalReport(system, suite.label(system), res.wer, res.sub, res.dele, res.ins,
                        res.ref_len, len(utterances),
                        audio_sec=sum(u.post.duration for u in utterances))
    return report, hyps


def bench_rtf(suite: SystemSuite, system: str, utterances: Sequence, runs: int = 5,
              warmup: bool = True, config: dict | None = None) -> EvalReport:
    """Mean RTF over ``runs`` sequential passes, one utterance at a time."""
    if not utterances:
        raise ValueError("no utterances to benchmark")
    suite.check(system)
    report, _ = evaluate(suite, system, utterances) if warmup else (None, None)
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        for u in utterances:
            suite.run(system, u)
        times.append(time.perf_counter() - t0)
    if report is None:
        report, _ = evaluate(suite, system, utterances)
    report.rtf_runs = [t / report.audio_sec for t in times]
    report.rtf = sum(report.rtf_runs) / len(report.rtf_runs)
    report.config = dict(config or {}, runs=runs, beam=suite.beam, nbest=suite.nbest,
                         beta=suite.beta, alpha=suite.alpha)
    return report


def format_table(reports: Sequence[EvalReport]) -> str:
    width = max([len(r.label) for r in reports] + [6])
    lines = [f"{'system':<{width}}  {'WER(%)':>7}  {'S':>5} {'D':>5} {'I':>5}  {'RTF':>9}"]
    for r in reports:
        rtf = f"{r.rtf:.5f}" if r.rtf is not None else "-"
        lines.append(f"{r.label:<{width}}  {100 * r.wer:7.2f}  {r.sub:5d} {r.dele:5d} {r.ins:5d}  "
                     f"{rtf:>9}")
    return "\n".join(lines)
