"""Command line front-end.

Exit codes: 0 on success, 1 for usage errors, 2 for data or validation
errors.  Diagnostics go to stderr (level controlled by the VOCAB_BRIDGE_LOG
environment variable: error, warn, info or debug); data goes to stdout or to
the requested output files, never interleaved with diagnostics.  Every
subcommand is deterministic given its flags (plus --seed where offered).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import Counter

from . import alignment, expansion, mixture, oov, tokenizer
from .dictionary import BilingualDictionary, load_dictionary
from .embeddings import (
    load_embeddings,
    load_vocabulary,
    save_vocabulary,
    Vocabulary,
)
from .errors import MalformedLine, TokenNotFound, VocabBridgeError

log = logging.getLogger(__name__)

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class _UsageError(Exception):
    """A flag combination the parser grammar cannot express."""


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _configure_logging() -> None:
    raw = os.environ.get("VOCAB_BRIDGE_LOG", "warn").lower()
    level = _LOG_LEVELS.get(raw, logging.WARNING)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    if raw not in _LOG_LEVELS:
        log.warning("unknown VOCAB_BRIDGE_LOG value %r, using warn", raw)


def _write_lines(lines, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
    else:
        for line in lines:
            print(line)


def _read_tokens(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line for line in fh.read().splitlines() if line]


def _model_vocab(args) -> Vocabulary:
    if getattr(args, "bert_vocab", None):
        return load_vocabulary(args.bert_vocab)
    return load_embeddings(args.bert_emb).vocab


def _cap_pairs(dictionary: BilingualDictionary, max_pairs: int | None) -> BilingualDictionary:
    if max_pairs is None or len(dictionary) <= max_pairs:
        return dictionary
    return BilingualDictionary(dictionary.pairs[:max_pairs], dictionary.dedup_count)


def _cmd_bpe_train(args) -> int:
    counts: Counter = Counter()
    with open(args.corpus, encoding="utf-8") as fh:
        for line in fh:
            counts.update(line.split())
    model = tokenizer.bpe_train(counts, args.vocab_size)
    tokenizer.save_bpe_model(model, args.out)
    if args.vocab_out:
        save_vocabulary(Vocabulary(model.wordpiece_vocab), args.vocab_out)
    log.info(
        "trained %d merges, %d vocabulary entries", len(model.merges), len(model.wordpiece_vocab)
    )
    return 0


def _cmd_bpe_apply(args) -> int:
    model = tokenizer.load_bpe_model(args.merges)
    out_lines = []
    with open(args.input, encoding="utf-8") as fh:
        for line in fh:
            rendered = []
            for word in line.split():
                pieces = tokenizer.bpe_apply(model, word)
                if args.wordpiece_style:
                    pieces = tokenizer.wordpiece_style(pieces)
                rendered.extend(pieces)
            out_lines.append(" ".join(rendered))
    _write_lines(out_lines, args.output)
    return 0


def _cmd_wordpiece(args) -> int:
    vocab = load_vocabulary(args.vocab)
    out_lines = []
    with open(args.input, encoding="utf-8") as fh:
        for seg in tokenizer.classify_corpus(vocab, args.unk, fh, args.max_chars):
            out_lines.append(f"{seg.word}\t{seg.status.value}\t{' '.join(seg.pieces)}")
    _write_lines(out_lines, args.output)
    return 0


def _cmd_align_fit_independent(args) -> int:
    src = load_embeddings(args.src_emb)
    model_emb = load_embeddings(args.bert_emb)
    fit = alignment.fit_independent_mapping(src, model_emb)
    alignment.save_map(fit.map, args.out)
    print(f"pairs\t{fit.pair_count}")
    print(f"mean_residual\t{fit.mean_residual:.6f}")
    return 0


def _cmd_align_fit_joint(args) -> int:
    src = load_embeddings(args.src_emb)
    english = load_embeddings(args.en_emb)
    model_emb = load_embeddings(args.bert_emb)
    model_vocab = load_vocabulary(args.bert_vocab) if args.bert_vocab else None
    dictionary = _cap_pairs(load_dictionary(args.dict), args.max_pairs)
    fit = alignment.fit_joint_mapping(src, english, model_emb, dictionary, model_vocab)
    alignment.save_map(fit.to_english, args.out_b)
    alignment.save_map(fit.to_model, args.out_a)
    print(f"stage1_pairs\t{fit.stage1_pair_count}")
    print(f"stage1_residual\t{fit.stage1_residual:.6f}")
    print(f"stage2_pairs\t{fit.stage2_pair_count}")
    print(f"stage2_residual\t{fit.stage2_residual:.6f}")
    return 0


def _cmd_align_eval(args) -> int:
    src = load_embeddings(args.src_emb)
    tgt = load_embeddings(args.tgt_emb)
    linear_map = alignment.load_map(args.map)
    dictionary = _cap_pairs(load_dictionary(args.dict), args.max_pairs)
    cfg = alignment.AlignConfig(csls_k=args.csls_k, eval_k=args.eval_k)
    precision = alignment.eval_precision_at_k(linear_map, src, tgt, dictionary, cfg)
    score = alignment.unsupervised_score(linear_map, src, tgt, cfg, sample=args.sample)
    print(f"precision_at_{args.eval_k}\t{precision:.6f}")
    print(f"unsupervised_score\t{score:.6f}")
    if args.warn_below_precision is not None and precision < args.warn_below_precision:
        log.warning(
            "precision %.4f below threshold %.4f; mapping quality is suspect",
            precision, args.warn_below_precision,
        )
    if args.warn_below_unsupervised is not None and score < args.warn_below_unsupervised:
        log.warning(
            "unsupervised score %.4f below threshold %.4f; mapping quality is suspect",
            score, args.warn_below_unsupervised,
        )
    return 0


def _cmd_csls_nn(args) -> int:
    queries = load_embeddings(args.queries)
    targets = load_embeddings(args.targets)
    if args.map:
        queries = alignment.apply_map(alignment.load_map(args.map), queries)
    cfg = alignment.AlignConfig(csls_k=args.csls_k)
    top = min(args.top, len(targets))
    lists = alignment.csls_knn(queries, targets, cfg, top)
    if args.tokens:
        # scores stay relative to the full query set; the token list only
        # restricts which queries are reported
        wanted = _read_tokens(args.tokens)
        for tok in wanted:
            if tok not in queries.vocab:
                raise TokenNotFound(tok)
        keep = set(wanted)
        lists = [nl for nl in lists if nl.query in keep]
    lines = alignment.audit_lines(lists, args.source_lang, softmax=args.softmax)
    _write_lines(lines, args.out)
    return 0


def _cmd_mixture_build(args) -> int:
    src = load_embeddings(args.src_emb)
    english = load_embeddings(args.en_emb)
    model_emb = load_embeddings(args.bert_emb)
    model_vocab = _model_vocab(args)
    to_english = alignment.load_map(args.b_map)
    if args.tokens:
        new_tokens = _read_tokens(args.tokens)
    else:
        new_tokens = expansion.select_new_subwords(src.vocab, model_vocab)
    cfg = alignment.AlignConfig(csls_k=args.csls_k, top_m=args.top_m)
    assignments = mixture.build_all_assignments(
        new_tokens, src, to_english, english, model_emb, model_vocab, cfg
    )
    mixture.save_assignments(assignments, args.out)
    log.info("built %d mixture assignments", len(assignments))
    return 0


def _load_counts(path) -> dict[str, int]:
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise MalformedLine(f"expected 'token<TAB>count', got {line!r}", line=lineno)
            try:
                counts[parts[0]] = int(parts[1])
            except ValueError:
                raise MalformedLine(f"non-integer count in {line!r}", line=lineno) from None
    return counts


def _cmd_expand(args) -> int:
    model_emb = load_embeddings(args.bert_emb)
    model_vocab = _model_vocab(args)
    lang_vocab = load_vocabulary(args.lang_vocab)
    new_tokens = expansion.select_new_subwords(lang_vocab, model_vocab)
    if args.min_count is not None:
        if not args.counts:
            raise _UsageError("--min-count requires --counts")
        counts = _load_counts(args.counts)
        new_tokens = [t for t in new_tokens if counts.get(t, 0) >= args.min_count]

    kind = expansion.StrategyKind(args.strategy)
    if kind is expansion.StrategyKind.MIXTURE:
        if not args.assignments:
            raise _UsageError("--strategy mixture requires --assignments")
        strategy = expansion.ExpansionStrategy(kind)
        table = dict(mixture.load_assignments(args.assignments))
        model = expansion.expand_vocabulary(
            model_vocab, model_emb, new_tokens, strategy, assignments=table
        )
    elif kind is expansion.StrategyKind.JOINT:
        if not (args.src_emb and args.b_map and args.a_map):
            raise _UsageError("--strategy joint requires --src-emb, --b-map and --a-map")
        strategy = expansion.ExpansionStrategy(kind)
        model = expansion.expand_vocabulary(
            model_vocab,
            model_emb,
            new_tokens,
            strategy,
            src=load_embeddings(args.src_emb),
            to_english=alignment.load_map(args.b_map),
            to_model=alignment.load_map(args.a_map),
        )
    else:
        if args.seed is None:
            raise _UsageError("--strategy random requires --seed")
        strategy = expansion.ExpansionStrategy(kind, seed=args.seed)
        model = expansion.expand_vocabulary(model_vocab, model_emb, new_tokens, strategy)

    expansion.emit_expanded(model, args.out_dir)
    log.info("expanded %d -> %d tokens", len(model_vocab), len(model.vocab))
    return 0


def _cmd_oov_stats(args) -> int:
    vocab = load_vocabulary(args.vocab)
    with open(args.corpus, encoding="utf-8") as fh:
        report = oov.corpus_oov_stats(
            vocab, args.unk, fh, top_n=args.top, count_types=args.types
        )
    if args.json:
        text = oov.report_json(report)
    elif args.tsv:
        text = oov.report_tsv_line(report)
    else:
        text = oov.report_human_block(report)
    _write_lines(text.split("\n"), args.out)
    return 0


def _cmd_compare_oov(args) -> int:
    with open(args.before, encoding="utf-8") as fh:
        before = oov.parse_report_tsv(fh.readline())
    with open(args.after, encoding="utf-8") as fh:
        after = oov.parse_report_tsv(fh.readline())
    delta = oov.compare_reports(before, after)
    if args.json:
        lines = [oov.delta_json(delta)]
    else:
        lines = [
            f"total_words\t{delta.total_words}",
            f"word_oov_delta\t{delta.word_oov_delta}",
            f"subword_oov_delta\t{delta.subword_oov_delta}",
            f"word_oov_rate_delta\t{delta.word_oov_rate_delta:+.6f}",
            f"subword_oov_rate_delta\t{delta.subword_oov_rate_delta:+.6f}",
            f"any_rate_increase\t{str(delta.any_rate_increase).lower()}",
        ]
        if delta.any_rate_increase:
            log.warning("OOV rate increased; the second vocabulary may not contain the first")
    _write_lines(lines, None)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="vocab-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bpe-train", help="learn BPE merges from a corpus")
    p.add_argument("--corpus", required=True, help="whitespace-tokenized text file")
    p.add_argument("--vocab-size", type=int, default=50000, help="symbol inventory target")
    p.add_argument("--out", required=True, help="merges file to write")
    p.add_argument("--vocab-out", help="also write the emitted subword vocabulary")
    p.set_defaults(func=_cmd_bpe_train)

    p = sub.add_parser("bpe-apply", help="segment a corpus with learned merges")
    p.add_argument("--merges", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="default: stdout")
    p.add_argument("--wordpiece-style", action="store_true",
                   help="render continuation pieces with the ## prefix")
    p.set_defaults(func=_cmd_bpe_apply)

    p = sub.add_parser("wordpiece", help="segment and classify words against a vocabulary")
    p.add_argument("--vocab", required=True, help="one token per line")
    p.add_argument("--input", required=True)
    p.add_argument("--unk", default=tokenizer.DEFAULT_UNK)
    p.add_argument("--max-chars", type=int, default=tokenizer.DEFAULT_MAX_CHARS)
    p.add_argument("--output", help="default: stdout")
    p.set_defaults(func=_cmd_wordpiece)

    p = sub.add_parser("align-fit-independent",
                       help="fit one map from shared tokens straight into the model space")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--bert-emb", required=True)
    p.add_argument("--out", required=True, help="map file to write")
    p.set_defaults(func=_cmd_align_fit_independent)

    p = sub.add_parser("align-fit-joint",
                       help="fit the two-stage maps via the English anchor space")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--en-emb", required=True)
    p.add_argument("--bert-emb", required=True)
    p.add_argument("--bert-vocab", help="default: the model embedding's vocabulary")
    p.add_argument("--dict", required=True, help="source-to-English dictionary file")
    p.add_argument("--max-pairs", type=int, help="cap on dictionary pairs (no default cap)")
    p.add_argument("--out-b", required=True, help="source-to-English map file")
    p.add_argument("--out-a", required=True, help="English-to-model map file")
    p.set_defaults(func=_cmd_align_fit_joint)

    p = sub.add_parser("align-eval", help="precision@k and unsupervised mapping quality")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--tgt-emb", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--eval-k", type=int, default=1)
    p.add_argument("--csls-k", type=int, default=10)
    p.add_argument("--sample", type=int, default=10000,
                   help="rows scored by the unsupervised metric")
    p.add_argument("--max-pairs", type=int)
    p.add_argument("--warn-below-precision", type=float, default=None,
                   help="warn when precision falls below this (0.20 is a common filter)")
    p.add_argument("--warn-below-unsupervised", type=float, default=None,
                   help="warn when the unsupervised score falls below this (0.25 is common)")
    p.set_defaults(func=_cmd_align_eval)

    p = sub.add_parser("csls-nn", help="audit top CSLS neighbors as TSV")
    p.add_argument("--queries", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--map", help="apply this map to the queries first")
    p.add_argument("--tokens", help="restrict queries to the tokens in this file")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--csls-k", type=int, default=10)
    p.add_argument("--source-lang", default="src", help="label for the first column")
    p.add_argument("--softmax", action="store_true",
                   help="append a softmax probability column over each query's scores")
    p.add_argument("--out", help="default: stdout")
    p.set_defaults(func=_cmd_csls_nn)

    p = sub.add_parser("mixture-build", help="build mixture assignments for new tokens")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--b-map", required=True, help="source-to-English map")
    p.add_argument("--en-emb", required=True)
    p.add_argument("--bert-emb", required=True)
    p.add_argument("--bert-vocab")
    p.add_argument("--tokens", help="default: every source token missing from the model vocabulary")
    p.add_argument("--top-m", type=int, default=5)
    p.add_argument("--csls-k", type=int, default=10)
    p.add_argument("--out", required=True, help="assignment TSV to write")
    p.set_defaults(func=_cmd_mixture_build)

    p = sub.add_parser("expand", help="splice new tokens into the model vocabulary")
    p.add_argument("--bert-emb", required=True)
    p.add_argument("--bert-vocab")
    p.add_argument("--lang-vocab", required=True, help="subword vocabulary to splice in")
    p.add_argument("--strategy", required=True, choices=[k.value for k in expansion.StrategyKind])
    p.add_argument("--assignments", help="mixture assignment TSV (mixture strategy)")
    p.add_argument("--src-emb", help="source embeddings (joint strategy)")
    p.add_argument("--b-map", help="source-to-English map (joint strategy)")
    p.add_argument("--a-map", help="English-to-model map (joint strategy)")
    p.add_argument("--seed", type=int, help="donor sampling seed (random strategy)")
    p.add_argument("--min-count", type=int, default=None,
                   help="keep only new tokens with at least this corpus count (off by default)")
    p.add_argument("--counts", help="token<TAB>count table for --min-count")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("oov-stats", help="two-level OOV rates for a corpus")
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--unk", default=tokenizer.DEFAULT_UNK)
    p.add_argument("--top", type=int, default=oov.DEFAULT_TOP_N)
    p.add_argument("--types", action="store_true", help="type-level rates instead of occurrences")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="flat key/value JSON")
    fmt.add_argument("--tsv", action="store_true", help="single TSV line")
    p.add_argument("--out", help="default: stdout")
    p.set_defaults(func=_cmd_oov_stats)

    p = sub.add_parser("compare-oov", help="delta between two saved TSV reports")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_compare_oov)

    return parser


def dispatch(argv) -> int:
    """Run one command line; returns the process exit code."""
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return 1
    except VocabBridgeError as exc:
        sys.stderr.write(f"{parser.prog}: error: {type(exc).__name__}: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
