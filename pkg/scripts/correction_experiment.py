#!/usr/bin/env python3
"""WER of every system on simulated utterances, optionally over a grid of
substitution rates.

    python3 scripts/correction_experiment.py --sub-rates 0.1,0.15,0.25 --out results.json
"""
import argparse
import json
import time

import numpy as np

from ctc_ec.lexicon import build_vocab
from ctc_ec.lm.ngram import train_ngram
from ctc_ec.lm.pcmlm import PcMlmConfig, train_pcmlm
from ctc_ec.sim.bench import SYSTEMS, SystemSuite, evaluate, format_table
from ctc_ec.sim.channel import SimConfig, gen_corpus, simulate_utterances
from ctc_ec.sim.language import make_toy_language


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-words", type=int, default=150)
    ap.add_argument("--n-train", type=int, default=50_000)
    ap.add_argument("--n-test", type=int, default=1000)
    ap.add_argument("--sub-rates", default="0.15")
    ap.add_argument("--ins-rate", type=float, default=0.0)
    ap.add_argument("--del-rate", type=float, default=0.0)
    ap.add_argument("--beta", type=float, default=0.8)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--systems", default=",".join(SYSTEMS))
    ap.add_argument("--out")
    args = ap.parse_args()

    t0 = time.perf_counter()
    lex, seed = make_toy_language(args.n_words, 2000, seed=args.seed)
    vocab = build_vocab([[w] for w in lex.prons])
    train = gen_corpus(seed, args.n_train, np.random.default_rng([args.seed, 10]))
    test = gen_corpus(seed, args.n_test, np.random.default_rng([args.seed, 11]))
    suite = SystemSuite(vocab,
                        pcmlm=train_pcmlm(train, lex, vocab, PcMlmConfig(seed=args.seed)),
                        del_pcmlm=train_pcmlm(train, lex, vocab,
                                              PcMlmConfig(deletable=True, seed=args.seed)),
                        ngram=train_ngram(train, 3, 0.1, vocab.words),
                        beta=args.beta, alpha=args.alpha)
    print(f"trained models on {len(train)} sentences in {time.perf_counter() - t0:.1f}s")

    results = []
    for rate in (float(r) for r in args.sub_rates.split(",")):
        cfg = SimConfig(sub_rate=rate, ins_rate=args.ins_rate, del_rate=args.del_rate,
                        seed=args.seed + 1)
        utts = simulate_utterances(test, lex, vocab, cfg)
        reports = [evaluate(suite, s, utts)[0] for s in args.systems.split(",")]
        print(f"\nsubstitution rate {rate:g}, {len(utts)} utterances")
        print(format_table(reports))
        results.append({"sim": cfg.to_json(), "reports": [r.to_json() for r in reports]})
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"args": vars(args), "results": results}, fh, indent=1)


if __name__ == "__main__":
    main()
