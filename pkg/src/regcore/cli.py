"""Command-line interface.

Subcommands cover the pipeline end to end: corpus statistics, overlap
deduplication, stratified splitting, vector-file inspection, training with
seeded repetitions, hyperparameter grid search, learning curves, scoring a
saved model, and evaluating exchange-format prediction files.

Paths that do not exist as given are retried relative to REGCORE_DATA_ROOT,
so invocations can name corpus files by their position in a shared data
directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, runner
from .cnn import CnnConfig, available_backends, get_backend
from .cnn import model as cnn_model
from .cnn.checkpoint import load_checkpoint
from .corpus import (
    collapse_corpus,
    corpus_stats,
    parse_corpus,
    serialize_corpus,
)
from .dedup import DedupConfig, deduplicate, write_removal_log
from .embeddings import load_embeddings, vector_file_info
from .evaluation import write_tsv
from .runner import (
    CurveSpec,
    ExperimentSpec,
    GridSpec,
    ReadAudit,
    read_config_file,
)
from .splits import DEFAULT_RATIOS, PART_ORDER, apply_assignment, stratified_split
from .taxonomy import default_taxonomy


def _resolve(path: str) -> str:
    """Leave existing paths alone; retry missing relative paths under
    REGCORE_DATA_ROOT when that is set."""
    if path and not Path(path).exists() and not Path(path).is_absolute():
        root = os.environ.get("REGCORE_DATA_ROOT")
        if root and (Path(root) / path).exists():
            return str(Path(root) / path)
    return path


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


# config-file keys -> (argparse dest, converter)
_CONFIG_KEYS = {
    "kernel": ("kernel", int),
    "filters": ("filters", int),
    "dim": ("dim", int),
    "learning_rate": ("learning_rate", float),
    "threshold": ("threshold", float),
    "batch_size": ("batch_size", int),
    "max_epochs": ("max_epochs", int),
    "patience": ("patience", int),
    "max_len": ("max_len", int),
    "seeds": ("seeds", _parse_seeds),
    "mode": ("mode", str),
    "train_lang": ("train_lang", str),
    "eval_lang": ("eval_lang", str),
    "train_corpus": ("train_corpus", str),
    "dev_corpus": ("dev_corpus", str),
    "eval_dev_corpus": ("eval_dev_corpus", str),
    "eval_test_corpus": ("eval_test_corpus", str),
    "train_vectors": ("train_vectors", str),
    "eval_vectors": ("eval_vectors", str),
    "backend": ("backend", str),
}


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Settings from --config act as defaults; explicit flags win because
    the file only fills attributes that are still None."""
    if not getattr(args, "config", None):
        return
    values = read_config_file(_resolve(args.config))
    for key, raw in values.items():
        if key not in _CONFIG_KEYS:
            parser.error(f"unknown config key {key!r}")
        dest, conv = _CONFIG_KEYS[key]
        if getattr(args, dest, None) is None:
            try:
                setattr(args, dest, conv(raw))
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"config key {key!r}: {exc}")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", type=int, default=None, help="convolution width")
    p.add_argument("--filters", type=int, default=None, help="number of feature maps")
    p.add_argument("--dim", type=int, default=None, help="embedding dimensionality")
    p.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None, help="decision threshold")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None, help="early-stopping patience (0 disables)")
    p.add_argument("--max-len", type=int, default=None, help="token truncation length")
    p.add_argument("--backend", default=None, choices=("compiled", "numpy"),
                   help="kernel backend (default: compiled when available)")
    p.add_argument("--config", default=None, help="key=value config file; flags override it")


def _config_from_args(args: argparse.Namespace) -> CnnConfig:
    base = CnnConfig()
    overrides = {}
    for name in ("kernel", "filters", "dim", "learning_rate", "threshold",
                 "batch_size", "max_epochs", "patience", "max_len"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return base.with_values(**overrides) if overrides else base


def _experiment_spec(args: argparse.Namespace, parser: argparse.ArgumentParser) -> ExperimentSpec:
    required = ("mode", "train_lang", "eval_lang", "train_corpus", "dev_corpus",
                "eval_dev_corpus", "eval_test_corpus", "train_vectors", "eval_vectors")
    missing = [n for n in required if getattr(args, n, None) is None]
    if missing:
        parser.error("missing required settings: " + ", ".join(missing))
    return ExperimentSpec(
        mode=args.mode,
        train_lang=args.train_lang,
        eval_lang=args.eval_lang,
        train_corpus=_resolve(args.train_corpus),
        dev_corpus=_resolve(args.dev_corpus),
        eval_dev_corpus=_resolve(args.eval_dev_corpus),
        eval_test_corpus=_resolve(args.eval_test_corpus),
        train_vectors=_resolve(args.train_vectors),
        eval_vectors=_resolve(args.eval_vectors),
        config=_config_from_args(args),
        seeds=args.seeds if args.seeds is not None else (1, 2, 3),
    )


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=runner.MODES, default=None)
    p.add_argument("--train-lang", default=None)
    p.add_argument("--eval-lang", default=None)
    p.add_argument("--train-corpus", default=None)
    p.add_argument("--dev-corpus", default=None)
    p.add_argument("--eval-dev-corpus", default=None)
    p.add_argument("--eval-test-corpus", default=None)
    p.add_argument("--train-vectors", default=None)
    p.add_argument("--eval-vectors", default=None)
    p.add_argument("--seeds", type=_parse_seeds, default=None, help="e.g. 1,2,3")
    _add_model_flags(p)


# --- subcommands -------------------------------------------------------------


def cmd_stats(args, parser) -> int:
    corpus = parse_corpus(_resolve(args.corpus), language=args.lang,
                          ids=_resolve(args.ids) if args.ids else None)
    report = corpus_stats(corpus)
    if args.out:
        write_tsv(args.out, report.as_tsv_rows())
        print(f"wrote {args.out}")
    else:
        print(report.as_text())
    return 0


def cmd_dedup(args, parser) -> int:
    corpus = parse_corpus(_resolve(args.corpus), language=args.lang,
                          ids=_resolve(args.ids) if args.ids else None)
    config = DedupConfig(n=args.ngram, threshold=args.threshold)
    result = deduplicate(corpus, config)
    serialize_corpus(result.kept, args.out,
                     ids_path=args.out_ids if args.out_ids else None)
    if args.log:
        write_removal_log(args.log, result.removed)
    kept, removed = len(result.kept.documents), len(result.removed)
    print(f"kept {kept} documents, removed {removed} near-duplicates")
    return 0


def cmd_split(args, parser) -> int:
    corpus = parse_corpus(_resolve(args.corpus), language=args.lang,
                          ids=_resolve(args.ids) if args.ids else None)
    ratios = tuple(args.ratios) if args.ratios else DEFAULT_RATIOS
    if abs(sum(ratios) - 100.0) < 1e-9:  # percent style: 50,20,30
        ratios = tuple(r / 100.0 for r in ratios)
    if len(ratios) != len(PART_ORDER):
        parser.error(f"--ratios needs {len(PART_ORDER)} values")
    assignment = stratified_split(corpus, seed=args.seed, ratios=ratios)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = apply_assignment(corpus, assignment)
    for part in PART_ORDER:
        serialize_corpus(parts[part], out / f"{part}.tsv",
                         ids_path=out / f"{part}.ids")
    assignment.write_tsv(out / "assignment.tsv")
    sizes = ", ".join(f"{part}={len(parts[part].documents)}" for part in PART_ORDER)
    print(f"split {len(corpus.documents)} documents: {sizes}")
    return 0


def cmd_embed_info(args, parser) -> int:
    vocab, dim, digest = vector_file_info(_resolve(args.vectors))
    print(f"vocabulary\t{vocab}")
    print(f"dimension\t{dim}")
    print(f"sha256\t{digest}")
    return 0


def cmd_train(args, parser) -> int:
    _apply_config_file(args, parser)
    spec = _experiment_spec(args, parser)
    audit = ReadAudit()
    result = runner.run_experiment(spec, backend=args.backend, audit=audit,
                                   out_dir=args.out_dir)
    agg = result.test_aggregate
    print(f"seeds: {', '.join(str(s) for s in result.seeds)} (best by dev: {result.best_seed})")
    print(f"test micro-F1: {agg.means['micro_f1']:.4f} +/- {agg.stds['micro_f1']:.4f}")
    if args.predictions:
        taxonomy = default_taxonomy()
        eval_table = load_embeddings(spec.eval_vectors, expected_dim=spec.config.dim,
                                     language=spec.eval_lang)
        test_corpus = collapse_corpus(
            parse_corpus(spec.eval_test_corpus, language=spec.eval_lang), taxonomy)
        data = cnn_model.build_dataset(test_corpus, eval_table, spec.config.max_len, taxonomy)
        probs = cnn_model.predict_probs(
            result.params_by_seed[result.best_seed], eval_table, data.docs,
            args.backend, spec.config.batch_size)
        runner.write_predictions(args.predictions, test_corpus.doc_ids(), probs,
                                 spec.config.threshold)
        print(f"wrote {args.predictions}")
    if args.out_dir:
        print(f"wrote {args.out_dir}")
    return 0


def cmd_grid(args, parser) -> int:
    _apply_config_file(args, parser)
    spec = _experiment_spec(args, parser)
    taxonomy = default_taxonomy()
    table = load_embeddings(spec.train_vectors, expected_dim=spec.config.dim,
                            language=spec.train_lang)
    train_corpus = collapse_corpus(
        parse_corpus(spec.train_corpus, language=spec.train_lang), taxonomy)
    dev_corpus = collapse_corpus(
        parse_corpus(spec.dev_corpus, language=spec.train_lang), taxonomy)
    train_data = cnn_model.build_dataset(train_corpus, table, spec.config.max_len, taxonomy)
    dev_data = cnn_model.build_dataset(dev_corpus, table, spec.config.max_len, taxonomy)
    grid = GridSpec(
        kernels=args.grid_kernels or GridSpec().kernels,
        learning_rates=args.grid_lrs or GridSpec().learning_rates,
        thresholds=args.grid_thresholds or GridSpec().thresholds,
    )
    best, rows = runner.grid_search(grid, spec.config, train_data, dev_data, table,
                                    seed=spec.seeds[0], backend=args.backend)
    for row in runner.grid_rows_tsv(rows):
        print("\t".join(row))
    print(f"best: kernel={best.kernel} lr={best.learning_rate:g} "
          f"threshold={best.threshold:g}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_tsv(out / "grid.tsv", runner.grid_rows_tsv(rows))
        runner.write_config_file(out / "best_config.conf", {
            "kernel": best.kernel,
            "learning_rate": f"{best.learning_rate:g}",
            "threshold": f"{best.threshold:g}",
        })
        runner.write_manifest(out, kind="grid-search",
                              args={"grid": {
                                  "kernels": list(grid.kernels),
                                  "learning_rates": list(grid.learning_rates),
                                  "thresholds": list(grid.thresholds)}},
                              seeds=[spec.seeds[0]],
                              inputs=[spec.train_corpus, spec.dev_corpus,
                                      spec.train_vectors],
                              backend=args.backend)
        print(f"wrote {out}")
    return 0


def cmd_predict(args, parser) -> int:
    params, config, label_order = load_checkpoint(_resolve(args.checkpoint))
    taxonomy = default_taxonomy()
    if label_order != taxonomy.label_order:
        parser.error(f"checkpoint label order {label_order} does not match {taxonomy.label_order}")
    table = load_embeddings(_resolve(args.vectors), expected_dim=config.dim,
                            language=args.lang)
    corpus = collapse_corpus(
        parse_corpus(_resolve(args.corpus), language=args.lang,
                     ids=_resolve(args.ids) if args.ids else None), taxonomy)
    data = cnn_model.build_dataset(corpus, table, config.max_len, taxonomy)
    probs = cnn_model.predict_probs(params, table, data.docs, args.backend,
                                    config.batch_size)
    threshold = args.threshold if args.threshold is not None else config.threshold
    runner.write_predictions(args.out, corpus.doc_ids(), probs, threshold)
    print(f"wrote {args.out} ({len(corpus.documents)} documents)")
    return 0


def cmd_eval(args, parser) -> int:
    gold = parse_corpus(_resolve(args.gold), language=args.lang,
                        ids=_resolve(args.ids) if args.ids else None)
    report, matrix, threshold = runner.evaluate_external(_resolve(args.predictions), gold)
    print(f"threshold: {threshold:g}")
    print(report.as_text())
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_tsv(out / "report.tsv", report.as_tsv_rows())
        write_tsv(out / "confusion.tsv", matrix.as_tsv_rows())
        print(f"wrote {out}")
    return 0


def cmd_curve(args, parser) -> int:
    _apply_config_file(args, parser)
    taxonomy = default_taxonomy()
    config = _config_from_args(args)
    table = load_embeddings(_resolve(args.vectors), expected_dim=config.dim,
                            language=args.lang)
    load = lambda p: collapse_corpus(
        parse_corpus(_resolve(p), language=args.lang), taxonomy)
    train_corpus = load(args.train_corpus)
    curve = CurveSpec(
        sizes=args.sizes or CurveSpec().sizes,
        seeds_per_size=args.reps,
        base_seed=args.base_seed,
    )
    result = runner.learning_curve(
        curve, config, train_corpus, load(args.dev_corpus), load(args.test_corpus),
        table, taxonomy, backend=args.backend, zeroshot_ref=args.zeroshot_ref)
    for row in result.as_tsv_rows():
        print("\t".join(row))
    if args.out:
        write_tsv(args.out, result.as_tsv_rows())
        print(f"wrote {args.out}")
    return 0


def cmd_backends(args, parser) -> int:
    names = available_backends()
    active = get_backend(None).NAME
    for name in names:
        marker = "*" if name == active else " "
        print(f"{marker} {name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regcore",
        description="Multilingual register classification toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="label-distribution and length statistics")
    p.add_argument("corpus")
    p.add_argument("--lang", required=True)
    p.add_argument("--ids", default=None, help="sidecar file with one id per line")
    p.add_argument("--out", default=None, help="write TSV instead of printing text")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("dedup", help="remove near-duplicate documents")
    p.add_argument("corpus")
    p.add_argument("--lang", required=True)
    p.add_argument("--ids", default=None)
    p.add_argument("--out", required=True, help="deduplicated corpus TSV")
    p.add_argument("--out-ids", default=None)
    p.add_argument("--log", default=None, help="removal log (id, overlap ratio)")
    p.add_argument("--ngram", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.7)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("split", help="stratified train/dev/test split")
    p.add_argument("corpus")
    p.add_argument("--lang", required=True)
    p.add_argument("--ids", default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--ratios", type=_parse_floats, default=None,
                   help="train,dev,test as fractions (0.5,0.2,0.3) or percents (50,20,30)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("embed-info", help="inspect a word-vector file")
    p.add_argument("vectors")
    p.set_defaults(func=cmd_embed_info)

    p = sub.add_parser("train", help="train over seeds and evaluate")
    _add_experiment_flags(p)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--predictions", default=None,
                   help="also write exchange-format test predictions (best seed)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="hyperparameter grid search on dev")
    _add_experiment_flags(p)
    p.add_argument("--grid-kernels", type=_parse_ints, default=None)
    p.add_argument("--grid-lrs", type=_parse_floats, default=None)
    p.add_argument("--grid-thresholds", type=_parse_floats, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("predict", help="score a corpus with a saved model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--ids", default=None)
    p.add_argument("--vectors", required=True)
    p.add_argument("--threshold", type=float, default=None,
                   help="override the checkpoint's decision threshold")
    p.add_argument("--backend", default=None, choices=("compiled", "numpy"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate an exchange-format prediction file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--ids", default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="learning curve over train-set sizes")
    p.add_argument("--train-corpus", required=True)
    p.add_argument("--dev-corpus", required=True)
    p.add_argument("--test-corpus", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--sizes", type=_parse_ints, default=None, help="e.g. 100,200,300")
    p.add_argument("--reps", type=int, default=6, help="training runs per size")
    p.add_argument("--base-seed", type=int, default=1)
    p.add_argument("--zeroshot-ref", type=float, default=None,
                   help="reference micro-F1 drawn alongside the curve")
    p.add_argument("--out", default=None)
    _add_model_flags(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("backends", help="list kernel backends (* = active)")
    p.set_defaults(func=cmd_backends)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
