from .data import (MaskedSequence, TrainingExample, gen_deletable_example, gen_mlm_example,
                   gen_phone_input, poisson_cdf_table, sample_poisson)
from .ngram import NGramLM, ar_logprob, train_ngram
from .pcmlm import HashMismatch, PcMlmConfig, PcMlmModel, train_pcmlm
from .phones import align_phone_gaps, edit_distances
from .scorers import MlmScorer, OracleScorer, PcMlmScorer, pll_score

__all__ = [
    "MaskedSequence", "TrainingExample", "gen_mlm_example", "gen_deletable_example",
    "gen_phone_input", "poisson_cdf_table", "sample_poisson", "NGramLM", "train_ngram",
    "ar_logprob", "HashMismatch", "PcMlmConfig", "PcMlmModel", "train_pcmlm",
    "align_phone_gaps", "edit_distances", "PcMlmScorer", "MlmScorer", "OracleScorer",
    "pll_score",
]
