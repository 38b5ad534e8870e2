"""Non-autoregressive error correction of CTC output with a phone-conditioned
masked LM, plus CTC decoding, LM-integration baselines and a synthetic
posterior simulator."""

__version__ = "0.1.0"
