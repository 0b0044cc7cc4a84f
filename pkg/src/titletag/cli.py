"""Command line front end.

One executable with a subcommand per pipeline stage: corpus normalization
and statistics, gazetteer construction and agreement reporting, dictionary
tagging, dataset splitting, model training, evaluation, contextual
embedding dumps, grid search and synthetic corpus generation.

Exit codes: 0 success, 2 usage or invalid value, 3 missing file,
4 malformed file content, 5 training diverged, 1 anything else.
"""

from __future__ import annotations

import argparse
import functools
import logging
import sys
from collections import Counter
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evaluation, model_io, title2vec
from .corpus import REGION_ORDER, load_corpus, synth_corpus, write_corpus
from .crf import CrfModel, TrainConfig, train_crf, train_logreg
from .errors import FormatError, TrainingDivergedError
from .gazetteer import (
    Gazetteer,
    irr_report,
    merge_annotations,
    read_annotations,
    read_gazetteer,
    sample_annotation_sets,
    sample_gazetteer,
    write_gazetteer,
)
from .labeling import LabeledSequence, auto_tag, dumps_conll, read_conll, write_conll
from .neural import LstmCrfModel, train_lstm_crf, train_lstm_softmax
from .title2vec import (
    BiLmEmbeddings,
    BiLmModel,
    EmbeddingStore,
    TitleVectors,
    train_bilm,
)

log = logging.getLogger(__name__)

_CONFIG_TYPES = {
    "learning_rate": float,
    "batch_size": int,
    "epochs": int,
    "optimizer": str,
    "seed": int,
    "word_dropout": float,
    "variational_dropout": float,
    "clip_norm": float,
}
_EXTRA_AXIS_TYPES = {"hidden_size": int, "layers": int, "embedding_dim": int}

# argparse dest -> config field, for flags whose spelling differs
_FLAG_FIELDS = {
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "optimizer": "optimizer",
    "word_dropout": "word_dropout",
    "variational_dropout": "variational_dropout",
    "clip": "clip_norm",
}


def _coerce(key: str, text: str):
    if key == "clip_norm":
        value = float(text)
        return None if value == 0 else value
    caster = _CONFIG_TYPES.get(key) or _EXTRA_AXIS_TYPES.get(key)
    if caster is None:
        raise ValueError(f"unknown setting {key!r}")
    return caster(text)


def _build_config(args: argparse.Namespace) -> TrainConfig:
    """Training config: defaults, then --config pairs, then explicit flags."""
    values = asdict(TrainConfig())
    for pair in args.config or []:
        key, sep, text = pair.partition("=")
        if not sep:
            raise ValueError(f"--config expects key=value, got {pair!r}")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _coerce(key, text.strip())
    for dest, field in _FLAG_FIELDS.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            values[field] = None if field == "clip_norm" and flag == 0 else flag
    values["seed"] = args.seed
    return TrainConfig(**values)


def _announce_seed(args: argparse.Namespace) -> None:
    print(f"seed: {args.seed}", file=sys.stderr)


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _render_rows(rows: list[tuple[str, str]], fmt: str) -> str:
    if fmt == "kv":
        return "".join(f"{k}={v}\n" for k, v in rows)
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


def _load_tagger(model_path: str, gazetteer_path: str | None, embeddings_path: str | None):
    kind, _, _ = model_io.load_model(model_path)
    if kind in ("crf", "logreg"):
        gaz = read_gazetteer(gazetteer_path) if gazetteer_path else None
        return CrfModel.load(model_path, gazetteer=gaz)
    if kind in ("lstm", "lstm-crf"):
        provider = None
        if embeddings_path:
            bilm = BiLmModel.load(embeddings_path)
            provider = BiLmEmbeddings(bilm, content_hash=model_io.file_hash(embeddings_path))
        return LstmCrfModel.load(model_path, provider=provider)
    raise ValueError(f"{model_path}: model kind {kind!r} cannot tag token sequences")


def _read_tokens(path: str, fmt: str) -> list[tuple[str, ...]]:
    """Token sequences to tag; empty titles are dropped with a note."""
    if fmt == "conll":
        return [seq.tokens for seq in read_conll(path)]
    corpus = load_corpus(path, fmt=fmt)
    if corpus.empty_count:
        print(f"note: skipped {corpus.empty_count} titles that normalize to nothing",
              file=sys.stderr)
    return [title.tokens for title in corpus.titles]


def cmd_normalize(args: argparse.Namespace) -> int:
    lines_out: list[str] = []
    with Path(args.infile).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if args.in_format == "lines":
                title = corpus_mod.normalize_title(line)
            else:
                parts = line.split("\t")
                if len(parts) != 3:
                    print(f"note: {args.infile}:{lineno}: skipped malformed row",
                          file=sys.stderr)
                    continue
                title = corpus_mod.normalize_title(
                    parts[0], region=corpus_mod.Region.parse(parts[1]), profile_id=parts[2]
                )
            canon = corpus_mod.canonical_line(title)
            if args.out_format == "lines":
                lines_out.append(canon)
            else:
                lines_out.append(f"{canon}\t{title.region.value}\t{title.profile_id}")
    _write_text(args.out, "".join(line + "\n" for line in lines_out))
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.infile, fmt=args.in_format)
    rows: list[tuple[str, str]] = [
        ("source", corpus.source_label),
        ("titles", str(len(corpus))),
        ("empty_excluded", str(corpus.empty_count)),
        ("skipped_rows", str(len(corpus.skipped_rows))),
    ]
    stats = corpus_mod.length_stats(corpus)
    hist = corpus_mod.length_histogram(corpus)

    def length_rows(prefix: str, summary: corpus_mod.LengthSummary) -> None:
        rows.append((f"{prefix}length.min", str(summary.min)))
        rows.append((f"{prefix}length.max", str(summary.max)))
        rows.append((f"{prefix}length.avg", f"{summary.avg:.4f}"))
        rows.append((f"{prefix}length.median", f"{summary.median:.4f}"))

    length_rows("", stats.overall)
    for length in sorted(hist.overall):
        rows.append((f"hist.{length}", f"{hist.overall[length]:.4f}"))
    for region in REGION_ORDER:
        if region not in stats.per_region:
            continue
        prefix = f"region.{region.value.lower()}."
        length_rows(prefix, stats.per_region[region])
        for length in sorted(hist.per_region[region]):
            rows.append((f"{prefix}hist.{length}", f"{hist.per_region[region][length]:.4f}"))
    _write_text(args.out, _render_rows(rows, args.format))
    return 0


def cmd_ngrams(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.infile, fmt=args.in_format)
    table = corpus_mod.ngram_counts(corpus, args.n)
    entries = table.entries if args.top == 0 else table.entries[: args.top]
    if args.format == "tsv":
        text = "".join(f"{' '.join(gram)}\t{count}\n" for gram, count in entries)
    else:
        width = max((len(str(c)) for _, c in entries), default=1)
        text = "".join(f"{str(c).rjust(width)}  {' '.join(g)}\n" for g, c in entries)
    _write_text(args.out, text)
    return 0


def _annotation_sets(args: argparse.Namespace):
    if args.sample:
        return list(sample_annotation_sets())
    if not args.annotations:
        raise ValueError("pass --annotations FILE FILE FILE or --sample")
    return [read_annotations(p) for p in args.annotations]


def cmd_gazetteer_build(args: argparse.Namespace) -> int:
    sets = _annotation_sets(args)
    gaz = merge_annotations(sets)
    if args.corpus:
        corpus = load_corpus(args.corpus, fmt=args.in_format)
        counts = Counter(tok for title in corpus.titles for tok in title.tokens)
        ordered = sorted(gaz.entries, key=lambda tok: (-counts.get(tok, 0), tok))
        gaz = Gazetteer(
            entries={tok: gaz.entries[tok] for tok in ordered}, rejected=gaz.rejected
        )
    write_gazetteer(gaz, args.out)
    print(f"gazetteer: {len(gaz)} entries, {len(gaz.rejected)} rejected", file=sys.stderr)
    return 0


def cmd_gazetteer_irr(args: argparse.Namespace) -> int:
    sets = _annotation_sets(args)
    rep = irr_report(sets)
    rows = [
        ("percentage_agreement", f"{rep.percentage_agreement:.6f}"),
        ("cohens_kappa", f"{rep.cohens_kappa:.6f}"),
        ("unanimous", str(rep.unanimous_count)),
        ("majority", str(rep.majority_count)),
        ("disagreement", str(rep.disagreement_count)),
        ("total", str(rep.total)),
    ]
    _write_text(args.out, _render_rows(rows, args.format))
    return 0


def cmd_tag(args: argparse.Namespace) -> int:
    if not args.model and not args.gazetteer:
        raise ValueError("pass --gazetteer for dictionary tagging or --model for a trained tagger")
    token_seqs = _read_tokens(args.infile, args.in_format)
    if args.model:
        # With a model, --gazetteer only supplies its lookup features.
        model = _load_tagger(args.model, args.gazetteer, args.embeddings)
        sequences = [LabeledSequence(toks, model.predict(toks)) for toks in token_seqs]
    else:
        gaz = read_gazetteer(args.gazetteer)
        sequences = [
            auto_tag(corpus_mod.Title(raw=" ".join(toks), tokens=toks), gaz)
            for toks in token_seqs
        ]
    _write_text(args.out, dumps_conll(sequences))
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    _announce_seed(args)
    sequences = read_conll(args.infile)
    parts = args.ratios.split("/")
    if len(parts) != 3:
        raise ValueError(f"--ratios expects train/dev/test, got {args.ratios!r}")
    shares = [float(p) for p in parts]
    if any(s < 0 for s in shares) or sum(shares) == 0:
        raise ValueError(f"bad split ratios: {args.ratios!r}")
    total = sum(shares)
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(sequences))
    n_train = int(len(sequences) * shares[0] / total)
    n_dev = int(len(sequences) * shares[1] / total)
    shuffled = [sequences[int(j)] for j in order]
    splits = {
        "train": shuffled[:n_train],
        "dev": shuffled[n_train : n_train + n_dev],
        "test": shuffled[n_train + n_dev :],
    }
    for name, chunk in splits.items():
        path = f"{args.out_prefix}.{name}.conll"
        write_conll(chunk, path)
        print(f"{name}: {len(chunk)} titles -> {path}", file=sys.stderr)
    return 0


def cmd_train_feature(args: argparse.Namespace) -> int:
    _announce_seed(args)
    cfg = _build_config(args)
    data = read_conll(args.train)
    gaz = read_gazetteer(args.gazetteer) if args.gazetteer else None
    trainer = train_crf if args.model_kind == "crf" else train_logreg
    model = trainer(data, cfg, gazetteer=gaz)
    model.save(args.out)
    if model.history:
        print(f"final mean nll: {model.history[-1]:.6f}", file=sys.stderr)
    return 0


def cmd_train_neural(args: argparse.Namespace) -> int:
    _announce_seed(args)
    cfg = _build_config(args)
    data = read_conll(args.train)
    provider = None
    if args.embeddings:
        bilm = BiLmModel.load(args.embeddings)
        provider = BiLmEmbeddings(bilm, content_hash=model_io.file_hash(args.embeddings))
    trainer = train_lstm_crf if args.model_kind == "lstm-crf" else train_lstm_softmax
    model = trainer(
        data,
        cfg,
        hidden_size=args.hidden,
        layers=args.layers,
        embedding_dim=args.embedding_dim,
        provider=provider,
    )
    model.save(args.out)
    if model.history:
        print(f"final mean loss: {model.history[-1]:.6f}", file=sys.stderr)
    return 0


def cmd_train_bilm(args: argparse.Namespace) -> int:
    _announce_seed(args)
    cfg = _build_config(args)
    corpus = load_corpus(args.infile, fmt=args.in_format)
    model = train_bilm(corpus, (args.dim, args.hidden, args.layers), cfg,
                       min_count=args.min_count)
    model.save(args.out)
    if model.history:
        print(f"final perplexity: {float(np.exp(model.history[-1])):.4f}", file=sys.stderr)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    gold = read_conll(args.gold)
    if args.pred:
        pred = read_conll(args.pred)
    else:
        model = _load_tagger(args.model, args.gazetteer, args.embeddings)
        pred = [LabeledSequence(g.tokens, model.predict(g.tokens)) for g in gold]
        if args.pred_out:
            write_conll(pred, args.pred_out)
    report = evaluation.score(gold, pred)
    _write_text(args.out, _render_rows(report.to_kv(), args.format))
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    bilm = BiLmModel.load(args.model)
    corpus = load_corpus(args.infile, fmt=args.in_format)
    records = [
        TitleVectors(str(i), title2vec.embed_title(bilm, title.tokens))
        for i, title in enumerate(corpus.titles)
    ]
    store = EmbeddingStore(bilm.contextual_dim, records)
    title2vec.write_embeddings(store, args.out)
    print(f"embedded {len(records)} titles at dimension {store.dim}", file=sys.stderr)
    return 0


def _parse_space(text: str) -> dict[str, list]:
    space: dict[str, list] = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, sep, values = part.partition("=")
        if not sep:
            raise ValueError(f"bad space axis {part!r}, expected key=v1,v2,...")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_TYPES and key not in _EXTRA_AXIS_TYPES:
            raise ValueError(f"unknown search axis {key!r}")
        space[key] = [_coerce(key, v.strip()) for v in values.split(",") if v.strip()]
        if not space[key]:
            raise ValueError(f"axis {key!r} has no values")
    if not space:
        raise ValueError("empty search space")
    return space


def cmd_gridsearch(args: argparse.Namespace) -> int:
    _announce_seed(args)
    base = _build_config(args)
    train_data = read_conll(args.train)
    dev_gold = read_conll(args.dev)
    space = _parse_space(args.space)
    gaz = read_gazetteer(args.gazetteer) if args.gazetteer else None
    trainers = {
        "crf": functools.partial(train_crf, gazetteer=gaz),
        "logreg": functools.partial(train_logreg, gazetteer=gaz),
        "lstm": train_lstm_softmax,
        "lstm-crf": train_lstm_crf,
    }
    result = evaluation.grid_search(trainers[args.model], space, train_data, dev_gold, base=base)
    if args.format == "tsv":
        text = result.to_tsv()
    else:
        lines = result.to_tsv().splitlines()
        cells = [line.split("\t") for line in lines]
        widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
        text = "".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n"
            for row in cells
        )
    _write_text(args.out, text)
    print(f"best: {dict(result.best.settings)} f1={result.best.f1:.2f}", file=sys.stderr)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    _announce_seed(args)
    gaz = read_gazetteer(args.gazetteer) if args.gazetteer else sample_gazetteer()
    corpus = synth_corpus(gaz, args.seed, args.count)
    if args.out:
        write_corpus(corpus, args.out, fmt=args.out_format)
    else:
        for title in corpus.titles:
            line = corpus_mod.canonical_line(title)
            if args.out_format == "tsv":
                line = f"{line}\t{title.region.value}\t{title.profile_id}"
            sys.stdout.write(line + "\n")
    return 0


def _add_out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="output file (default: stdout)")


def _add_format(parser: argparse.ArgumentParser, choices=("text", "kv")) -> None:
    parser.add_argument("--format", choices=choices, default=choices[0])


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, required=True, help="RNG seed (echoed to stderr)")
    parser.add_argument("--lr", type=float, default=None, help="learning rate")
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--optimizer", choices=("sgd", "adam"), default=None)
    parser.add_argument("--word-dropout", type=float, default=None)
    parser.add_argument("--variational-dropout", type=float, default=None)
    parser.add_argument("--clip", type=float, default=None,
                        help="gradient norm clip; 0 disables")
    parser.add_argument("--config", action="append", metavar="KEY=VALUE", default=None,
                        help="training setting; explicit flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="titletag",
        description="Parse occupational job titles into responsibility, function and location parts.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = commands.add_parser("normalize", help="canonicalize raw titles")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--in-format", choices=("lines", "tsv"), default="lines")
    p.add_argument("--out-format", choices=("lines", "tsv"), default="lines")
    _add_out(p)
    p.set_defaults(func=cmd_normalize)

    p = commands.add_parser("stats", help="corpus size and title-length statistics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--in-format", choices=("lines", "tsv"), default="lines")
    _add_format(p)
    _add_out(p)
    p.set_defaults(func=cmd_stats)

    p = commands.add_parser("ngrams", help="most frequent token n-grams")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--in-format", choices=("lines", "tsv"), default="lines")
    p.add_argument("-n", type=int, default=1, help="n-gram order")
    p.add_argument("--top", type=int, default=20, help="rows to keep; 0 keeps all")
    _add_format(p, choices=("text", "tsv"))
    _add_out(p)
    p.set_defaults(func=cmd_ngrams)

    p = commands.add_parser("gazetteer", help="build the token dictionary or report agreement")
    gaz_cmds = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    b = gaz_cmds.add_parser("build", help="merge annotator files by majority vote")
    b.add_argument("--annotations", nargs=3, default=None, metavar="FILE")
    b.add_argument("--sample", action="store_true", help="use the bundled annotation sets")
    b.add_argument("--corpus", default=None,
                   help="order entries by frequency in this corpus")
    b.add_argument("--in-format", choices=("lines", "tsv"), default="lines")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_gazetteer_build)
    i = gaz_cmds.add_parser("irr", help="inter-annotator agreement report")
    i.add_argument("--annotations", nargs=3, default=None, metavar="FILE")
    i.add_argument("--sample", action="store_true", help="use the bundled annotation sets")
    _add_format(i)
    _add_out(i)
    i.set_defaults(func=cmd_gazetteer_irr)

    p = commands.add_parser("tag", help="label titles with a gazetteer or a trained model")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--in-format", choices=("lines", "tsv", "conll"), default="lines")
    p.add_argument("--gazetteer", default=None,
                   help="dictionary tagging, or lookup features when --model is given")
    p.add_argument("--model", default=None, help="trained tagger file")
    p.add_argument("--embeddings", default=None,
                   help="language model file when the tagger uses frozen embeddings")
    _add_out(p)
    p.set_defaults(func=cmd_tag)

    p = commands.add_parser("split", help="shuffle and split labeled data")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--ratios", default="80/10/10")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_split)

    p = commands.add_parser("train", help="train a tagging model or the language model")
    kinds = p.add_subparsers(dest="model_kind", required=True, metavar="MODEL")
    for kind in ("crf", "logreg"):
        t = kinds.add_parser(kind, help=f"feature-based {kind} tagger")
        t.add_argument("--train", required=True, help="labeled data (token TAB label)")
        t.add_argument("--gazetteer", default=None)
        t.add_argument("--out", required=True)
        _add_train_flags(t)
        t.set_defaults(func=cmd_train_feature)
    for kind in ("lstm", "lstm-crf"):
        t = kinds.add_parser(kind, help=f"recurrent {kind} tagger")
        t.add_argument("--train", required=True)
        t.add_argument("--out", required=True)
        t.add_argument("--hidden", type=int, default=256)
        t.add_argument("--layers", type=int, default=1)
        t.add_argument("--embedding-dim", type=int, default=64)
        t.add_argument("--embeddings", default=None,
                       help="frozen language model file instead of a trainable table")
        _add_train_flags(t)
        t.set_defaults(func=cmd_train_neural)
    t = kinds.add_parser("bilm", help="bidirectional language model")
    t.add_argument("--in", dest="infile", required=True, help="unlabeled corpus")
    t.add_argument("--in-format", choices=("lines", "tsv"), default="lines")
    t.add_argument("--out", required=True)
    t.add_argument("--dim", type=int, default=64, help="embedding dimension")
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--layers", type=int, default=1)
    t.add_argument("--min-count", type=int, default=1)
    _add_train_flags(t)
    t.set_defaults(func=cmd_train_bilm)

    p = commands.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--gold", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--pred", help="predicted labels in the same format")
    source.add_argument("--model", help="model file to decode the gold tokens with")
    p.add_argument("--gazetteer", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--pred-out", default=None, help="write model predictions here")
    _add_format(p)
    _add_out(p)
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("embed", help="dump contextual title vectors")
    p.add_argument("--model", required=True, help="trained language model")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--in-format", choices=("lines", "tsv"), default="lines")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = commands.add_parser("gridsearch", help="sweep training settings on a dev set")
    p.add_argument("--model", choices=("crf", "logreg", "lstm", "lstm-crf"), required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--space", required=True,
                   help="axes like 'learning_rate=0.05,0.1;epochs=5,10'")
    p.add_argument("--gazetteer", default=None)
    _add_format(p, choices=("tsv", "text"))
    _add_out(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_gridsearch)

    p = commands.add_parser("synth", help="generate a synthetic labeled-grammar corpus")
    p.add_argument("--gazetteer", default=None, help="default: built-in sample dictionary")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--out-format", choices=("lines", "tsv"), default="lines")
    _add_out(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc}", file=sys.stderr)
        return 3
    except IsADirectoryError as exc:
        print(f"error: {exc.filename or exc} is a directory", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # last resort: anything uncaught is a bug
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
