"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/format/hash error, 3 a
requested check (``bench --assert-order``) failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .correct import CorrectionConfig, correct_pipeline
from .ctc import AlignmentError, greedy_decode, prefix_beam_search
from .fusion import IdLM, rescore_nbest
from .io import (DataError, dumps, load_posteriors, load_sequences, read_jsonl, save_posteriors,
                 save_sequences, write_json, write_jsonl)
from .lexicon import LexiconError, Lexicon, Vocab, build_vocab, load_corpus, load_lexicon, save_corpus
from .lm.ngram import NGramLM, train_ngram
from .lm.pcmlm import HashMismatch, PcMlmConfig, PcMlmModel, train_pcmlm
from .lm.scorers import MlmScorer, PcMlmScorer
from .sim.bench import SYSTEMS, SystemSuite, bench_rtf, format_table
from .sim.channel import SimConfig, Utterance, gen_corpus, simulate_utterances
from .sim.language import make_toy_language
from .sim.metrics import corpus_wer

log = logging.getLogger("ctc_ec")

JOBS_ENV = "CTC_EC_JOBS"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3

# keys never echoed: output locations and the config path itself
_NO_ECHO = {"out", "timings", "config", "command", "func", "verbose", "jobs"}
# input paths are echoed by file name so outputs do not depend on directories
_PATH_KEYS = {"corpus", "vocab", "lexicon", "posteriors", "phones", "model", "lm", "refs", "hyps",
              "data", "pcmlm", "del_pcmlm", "ngram"}


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- helpers -----------------------------------------------------------------

def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys may use - or _."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot read config {path}: {err.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise DataError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, values: dict):
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help",)}
    defaults = {}
    for key, value in values.items():
        if key not in actions or key in ("config", "out"):
            raise UsageError(f"unknown config key {key!r} for {sub.prog}")
        action = actions[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = value.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
            flag = low in ("1", "true", "yes", "on")
            defaults[key] = flag if isinstance(action, argparse._StoreTrueAction) else not flag
            continue
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        defaults[key] = value  # argparse converts string defaults with the action's type
    sub.set_defaults(**defaults)


def _echo(args) -> dict:
    echo = {}
    for k, v in sorted(vars(args).items()):
        if k in _NO_ECHO:
            continue
        if k in _PATH_KEYS and v is not None:
            v = Path(v).name
        echo[k] = v
    return {"command": args.command, "version": __version__, "config": echo}


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise DataError(f"input file not found: {p}")


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _unit_interval(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{text} must be >= 0")
    return v


def _load_vocab_lex(args, need_lex=True):
    _require(args.vocab, args.lexicon if need_lex else None)
    vocab = Vocab.load(args.vocab)
    lex = load_lexicon(args.lexicon) if need_lex else None
    return vocab, lex


def _load_ngram(path, vocab: Vocab) -> NGramLM:
    _require(path)
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "vocab_hash" in obj and obj["vocab_hash"] != vocab.hash:
        raise HashMismatch("vocab", obj["vocab_hash"], vocab.hash)
    return NGramLM.from_json(obj)


def _load_masked_lm(path, vocab: Vocab, lex: Lexicon) -> tuple[PcMlmModel, str]:
    _require(path)
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return PcMlmModel.from_json(obj, vocab, lex), obj.get("kind", "pcmlm")


def _scorer_for(model: PcMlmModel, kind: str):
    return MlmScorer(model) if kind == "mlm" else PcMlmScorer(model)


def _load_utterances(posteriors, phones, refs, vocab) -> list[Utterance]:
    _, posts = load_posteriors(posteriors, vocab)
    _, phone_map = load_sequences(phones, "phones") if phones else ({}, {})
    _, ref_map = load_sequences(refs, "words") if refs else ({}, {})
    out = []
    for p in posts:
        if phones and p.id not in phone_map:
            raise DataError(f"no phone hypothesis for utterance {p.id!r}")
        if refs and p.id not in ref_map:
            raise DataError(f"no reference for utterance {p.id!r}")
        out.append(Utterance(p.id, ref_map.get(p.id, []), p, phone_map.get(p.id, [])))
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lex, seed_corpus = make_toy_language(args.n_words, args.n_seed, seed=args.seed)
    vocab = build_vocab([[w] for w in lex.prons])
    train = gen_corpus(seed_corpus, args.n_train, np.random.default_rng([args.seed, 10]))
    test = gen_corpus(seed_corpus, args.n_test, np.random.default_rng([args.seed, 11]))
    cfg = SimConfig(sub_rate=args.sub_rate, ins_rate=args.ins_rate, del_rate=args.del_rate,
                    c_hi=args.c_hi, c_lo=args.c_lo, conf_jitter=args.conf_jitter,
                    min_frames=args.min_frames, max_frames=args.max_frames,
                    blank_rate=args.blank_rate, phone_error_rate=args.per,
                    frame_sec=args.frame_sec, seed=args.seed)
    utts = simulate_utterances(test, lex, vocab, cfg)
    echo = _echo(args)
    echo["sim"] = cfg.to_json()
    echo["vocab_hash"] = vocab.hash
    echo["lexicon_hash"] = lex.hash

    lex.save(out / "lexicon.tsv", header=dumps(echo))
    vocab.save(out / "vocab.json")
    save_corpus(train, out / "train.txt")
    save_corpus(test, out / "test.txt")
    save_sequences(out / "refs.jsonl", ((u.id, u.words) for u in utts), "words", echo)
    save_posteriors(out / "posteriors.jsonl", (u.post for u in utts), echo)
    save_sequences(out / "phones.jsonl", ((u.id, u.phones) for u in utts), "phones", echo)
    write_jsonl(out / "corruptions.jsonl",
                ({"id": u.id, "hyp": u.record.hyp,
                  "events": [[e.kind, e.ref_pos, e.ref, e.hyp] for e in u.record.events]}
                 for u in utts), echo)
    write_json(out / "config.json", echo)
    log.info("wrote %d test and %d training utterances to %s", len(utts), len(train), out)
    return EXIT_OK


def cmd_train_lm(args):
    _require(args.corpus)
    corpus = load_corpus(args.corpus)
    if not corpus:
        raise DataError(f"{args.corpus}: empty corpus")
    echo = _echo(args)
    if args.kind == "ngram":
        _require(args.vocab)
        vocab = Vocab.load(args.vocab)
        vocab.encode([w for u in corpus for w in u])
        lm = train_ngram(corpus, args.order, args.delta, vocab.words)
        obj = lm.to_json()
        obj.update(kind="ngram", vocab_hash=vocab.hash, echo=echo)
    else:
        vocab, lex = _load_vocab_lex(args)
        cfg = PcMlmConfig(delta=args.delta, gamma=args.gamma, deletable=args.kind == "del-pcmlm",
                          mask_rate=args.mask_rate, insert_lambda=args.insert_lambda,
                          phone_mask_rate=args.phone_mask_rate, passes=args.passes,
                          gap_weight=args.gap_weight, seed=args.seed)
        model = train_pcmlm(corpus, lex, vocab, cfg)
        obj = model.to_json()
        obj.update(kind=args.kind, echo=echo)
    Path(args.out).write_text(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n",
                              encoding="utf-8")
    log.info("trained %s on %d utterances", args.kind, len(corpus))
    return EXIT_OK


def _write_timings(path, rows):
    if path:
        write_jsonl(path, rows, {"note": "wall-clock seconds; not reproducible"})


def cmd_decode(args):
    vocab, _ = _load_vocab_lex(args, need_lex=False)
    _require(args.posteriors)
    _, posts = load_posteriors(args.posteriors, vocab)
    idlm = IdLM(_load_ngram(args.lm, vocab), vocab) if args.lm else None
    if idlm is not None and args.mode != "beam":
        raise UsageError("--lm (shallow fusion) requires --mode beam")

    def run(post):
        if args.mode == "greedy":
            _, hyp = greedy_decode(post)
            rec = {"id": post.id, "tokens": vocab.decode(hyp.tokens),
                   "confidences": [float(c) for c in hyp.confidences]}
        else:
            hyp = prefix_beam_search(post, args.beam, idlm, args.lm_weight if idlm else 0.0)[0]
            rec = {"id": post.id, "tokens": vocab.decode(hyp.tokens), "score": hyp.score}
        return rec, {"id": post.id, "decode": hyp.elapsed}

    results = _map(run, posts, args.jobs)
    write_jsonl(args.out, (r for r, _ in results), _echo(args))
    _write_timings(args.timings, (t for _, t in results))
    return EXIT_OK


def cmd_correct(args):
    vocab, lex = _load_vocab_lex(args)
    _require(args.posteriors, args.phones)
    model, kind = _load_masked_lm(args.model, vocab, lex)
    kind = kind if args.scorer == "auto" else args.scorer
    if kind == "del-pcmlm" and not model.deletable:
        raise DataError("model is not deletable")
    cfg = CorrectionConfig(beta=args.beta, alpha=args.alpha, deletable=not args.no_delete,
                           all_positions=args.all_positions)
    utts = _load_utterances(args.posteriors, args.phones, None, vocab)

    def run(u):
        res = correct_pipeline(u.post, u.phones, _scorer_for(model, kind), cfg, vocab)
        return res.to_json(u.id), dict(id=u.id, **res.timings)

    results = _map(run, utts, args.jobs)
    echo = _echo(args)
    echo["scorer"] = kind
    write_jsonl(args.out, (r for r, _ in results), echo)
    _write_timings(args.timings, (t for _, t in results))
    return EXIT_OK


def cmd_rescore(args):
    vocab, _ = _load_vocab_lex(args, need_lex=args.rescore_kind == "pll")
    _require(args.posteriors)
    _, posts = load_posteriors(args.posteriors, vocab)
    if args.rescore_kind == "ar":
        lm = _load_ngram(args.lm, vocab)
    else:
        model, _ = _load_masked_lm(args.lm, vocab, load_lexicon(args.lexicon))
        lm = MlmScorer(model)
    beam = max(args.beam, args.n)

    def run(post):
        hyps = prefix_beam_search(post, beam, nbest=args.n)
        best = rescore_nbest(hyps, lm, args.lm_weight, vocab, args.rescore_kind, args.length_norm)
        return {"id": post.id, "tokens": vocab.decode(best.tokens), "score": best.score}

    write_jsonl(args.out, _map(run, posts, args.jobs), _echo(args))
    return EXIT_OK


def cmd_eval(args):
    _require(args.refs, args.hyps)
    _, refs = load_sequences(args.refs, "words")
    _, hyps = load_sequences(args.hyps, "tokens")
    missing = sorted(set(refs) ^ set(hyps))
    if missing:
        raise DataError(f"reference and hypothesis ids differ, e.g. {missing[0]!r}")
    ids = sorted(refs)
    res = corpus_wer([refs[i] for i in ids], [hyps[i] for i in ids])
    report = {"wer": res.wer, "sub": res.sub, "del": res.dele, "ins": res.ins,
              "ref_tokens": res.ref_len, "utterances": len(ids), **_echo(args)}
    if args.out:
        write_json(args.out, report)
    print(f"WER {100 * res.wer:.2f}%  S={res.sub} D={res.dele} I={res.ins}  "
          f"N={res.ref_len} utts={len(ids)}")
    return EXIT_OK


def cmd_bench(args):
    systems = [s.strip() for s in args.systems.split(",") if s.strip()]
    bad = [s for s in systems if s not in SYSTEMS]
    if bad or not systems:
        raise UsageError(f"unknown system(s) {bad}; choose from {', '.join(SYSTEMS)}")
    data = Path(args.data)
    args.vocab, args.lexicon = str(data / "vocab.json"), str(data / "lexicon.tsv")
    vocab, lex = _load_vocab_lex(args)
    _require(data / "posteriors.jsonl", data / "phones.jsonl", data / "refs.jsonl")
    utts = _load_utterances(data / "posteriors.jsonl", data / "phones.jsonl", data / "refs.jsonl",
                            vocab)
    if args.limit:
        utts = utts[: args.limit]
    pcmlm = _load_masked_lm(args.pcmlm, vocab, lex)[0] if args.pcmlm else None
    del_pcmlm = _load_masked_lm(args.del_pcmlm, vocab, lex)[0] if args.del_pcmlm else None
    ngram = _load_ngram(args.ngram, vocab) if args.ngram else None
    suite = SystemSuite(vocab, pcmlm, del_pcmlm, ngram, beta=args.beta, alpha=args.alpha,
                        beam=args.beam, nbest=args.n, rescore_weight=args.lm_weight,
                        fusion_weight=args.lm_weight)
    for s in systems:
        try:
            suite.check(s)
        except ValueError as err:
            raise UsageError(str(err)) from None
    echo = _echo(args)
    reports = []
    for s in systems:  # strictly sequential, batch size 1
        log.info("benchmarking %s", s)
        reports.append(bench_rtf(suite, s, utts, runs=args.runs, config=echo["config"]))
    print(format_table(reports))
    if args.out:
        write_json(args.out, {"reports": [r.to_json() for r in reports], **echo})
    if args.assert_order:
        rtfs = [r.rtf for r in reports]
        if not all(a < b for a, b in zip(rtfs, rtfs[1:])):
            raise CheckFailed("RTF ordering violated: " +
                              " !< ".join(f"{r.system}={r.rtf:.5f}" for r in reports))
        print("RTF ordering holds: " + " < ".join(r.system for r in reports))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--jobs", type=_positive_int, default=_jobs_default(),
                        help=f"utterance-level worker threads (default ${JOBS_ENV} or 1)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="ctc-ec", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("simulate", cmd_simulate, "toy language, corpora, posteriors and phone hypotheses")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-words", type=_positive_int, default=150)
    p.add_argument("--n-seed", type=_positive_int, default=2000)
    p.add_argument("--n-train", type=int, default=50000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--sub-rate", type=_unit_interval, default=0.15)
    p.add_argument("--ins-rate", type=_unit_interval, default=0.0)
    p.add_argument("--del-rate", type=_unit_interval, default=0.0)
    p.add_argument("--c-hi", type=_unit_interval, default=0.95)
    p.add_argument("--c-lo", type=_unit_interval, default=0.4)
    p.add_argument("--conf-jitter", type=_nonneg_float, default=0.04)
    p.add_argument("--min-frames", type=_positive_int, default=1)
    p.add_argument("--max-frames", type=_positive_int, default=3)
    p.add_argument("--blank-rate", type=_unit_interval, default=0.5)
    p.add_argument("--per", type=_unit_interval, default=0.091, help="phone error rate")
    p.add_argument("--frame-sec", type=float, default=0.01)

    p = add("train-lm", cmd_train_lm, "train a masked or n-gram LM")
    p.add_argument("--kind", required=True, choices=("mlm", "pcmlm", "del-pcmlm", "ngram"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--out", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--gamma", type=_nonneg_float, default=1.0)
    p.add_argument("--mask-rate", type=_unit_interval, default=0.15)
    p.add_argument("--insert-lambda", type=_nonneg_float, default=0.2)
    p.add_argument("--phone-mask-rate", type=_unit_interval, default=0.2)
    p.add_argument("--passes", type=_positive_int, default=1)
    p.add_argument("--gap-weight", type=_nonneg_float, default=0.5)
    p.add_argument("--order", type=_positive_int, default=3)

    p = add("decode", cmd_decode, "greedy or beam decoding, optional shallow fusion")
    p.add_argument("--posteriors", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--mode", choices=("greedy", "beam"), default="greedy")
    p.add_argument("--greedy", dest="mode", action="store_const", const="greedy")
    p.add_argument("--beam", type=_positive_int, default=5)
    p.add_argument("--lm", help="n-gram model for shallow fusion")
    p.add_argument("--lm-weight", type=_nonneg_float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--timings")

    p = add("correct", cmd_correct, "confidence masking and masked-LM fill-in")
    p.add_argument("--posteriors", required=True)
    p.add_argument("--phones", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--scorer", choices=("auto", "mlm", "pcmlm", "del-pcmlm"), default="auto")
    p.add_argument("--beta", type=_unit_interval, default=0.8)
    p.add_argument("--alpha", type=_unit_interval, default=0.5)
    p.add_argument("--all-positions", action="store_true",
                   help="interpolate at every position, not only masked ones")
    p.add_argument("--no-delete", action="store_true", help="ignore NULL predictions")
    p.add_argument("--out", required=True)
    p.add_argument("--timings")

    p = add("rescore", cmd_rescore, "n-best rescoring with an LM")
    p.add_argument("--posteriors", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--lexicon", help="needed for --rescore-kind pll")
    p.add_argument("--rescore-kind", choices=("ar", "pll"), default="ar")
    p.add_argument("--n", type=_positive_int, default=5)
    p.add_argument("--beam", type=_positive_int, default=5)
    p.add_argument("--lm-weight", type=_nonneg_float, default=0.5)
    p.add_argument("--length-norm", action="store_true")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "WER with S/D/I breakdown")
    p.add_argument("--refs", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--out")

    p = add("bench", cmd_bench, "sequential RTF benchmark")
    p.add_argument("--data", required=True, help="directory written by simulate")
    p.add_argument("--systems", default=",".join(SYSTEMS))
    p.add_argument("--pcmlm")
    p.add_argument("--del-pcmlm")
    p.add_argument("--ngram")
    p.add_argument("--runs", type=_positive_int, default=5)
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--beta", type=_unit_interval, default=0.8)
    p.add_argument("--alpha", type=_unit_interval, default=0.5)
    p.add_argument("--beam", type=_positive_int, default=5)
    p.add_argument("--n", type=_positive_int, default=5)
    p.add_argument("--lm-weight", type=_nonneg_float, default=0.5)
    p.add_argument("--assert-order", action="store_true",
                   help="fail unless RTF strictly increases in --systems order")
    p.add_argument("--out")
    return parser, subs


def main(argv=None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(subs[args.command], read_config(args.config))
            args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except SystemExit as ex:  # --help / --version
        return int(ex.code or 0)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except HashMismatch as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except CheckFailed as err:
        print(f"check failed: {err}", file=sys.stderr)
        return EXIT_CHECK
    except (DataError, LexiconError, AlignmentError, ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
