from .bench import SYSTEMS, EvalReport, SystemSuite, bench_rtf, evaluate, format_table
from .channel import (CorruptionRecord, NoisyChannel, SimConfig, Utterance, gen_corpus,
                      phone_neighbors, simulate_utterances, synth_phone_hyp, synth_posteriors)
from .language import make_lexicon, make_toy_language
from .metrics import WerResult, corpus_wer, wer

__all__ = [
    "SYSTEMS", "EvalReport", "SystemSuite", "bench_rtf", "evaluate", "format_table",
    "CorruptionRecord", "NoisyChannel", "SimConfig", "Utterance", "gen_corpus",
    "phone_neighbors", "simulate_utterances", "synth_phone_hyp", "synth_posteriors",
    "make_lexicon", "make_toy_language", "WerResult", "corpus_wer", "wer",
]
