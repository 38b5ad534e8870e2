#!/usr/bin/env python3
"""Sequential batch-size-1 RTF of the four headline systems.

Runs ``ctc-ec simulate``, ``train-lm`` and ``bench --assert-order`` in a
scratch directory, so it doubles as an end-to-end CLI smoke test.
"""
import argparse
import subprocess
import sys
import tempfile
from pathlib import Path


def ctc_ec(*argv):
    cmd = [sys.executable, "-m", "ctc_ec", *map(str, argv)]
    proc = subprocess.run(cmd)
    if proc.returncode not in (0, 3):
        sys.exit(proc.returncode)
    return proc.returncode


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", help="directory to keep (default: temporary)")
    ap.add_argument("--n-test", type=int, default=1000)
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        d = Path(args.work or tmp)
        ctc_ec("simulate", "--out", d, "--seed", args.seed, "--n-test", args.n_test)
        ctc_ec("train-lm", "--kind", "del-pcmlm", "--corpus", d / "train.txt",
               "--vocab", d / "vocab.json", "--lexicon", d / "lexicon.tsv", "--out", d / "del.json")
        ctc_ec("train-lm", "--kind", "ngram", "--corpus", d / "train.txt",
               "--vocab", d / "vocab.json", "--out", d / "ngram.json")
        code = ctc_ec("bench", "--data", d, "--systems", "greedy,ec-del,beam-rescore,fusion",
                      "--del-pcmlm", d / "del.json", "--ngram", d / "ngram.json",
                      "--runs", args.runs, "--assert-order", "--out", d / "bench.json")
    sys.exit(code)


if __name__ == "__main__":
    main()
