"""Experiment orchestration: grid search, seeded repetitions, monolingual
and zero-shot cross-lingual runs, learning curves, and evaluation of
externally produced predictions.

Cross-lingual hygiene: in cross-lingual mode the model is trained and its
hyperparameters selected on source-language data only; target-language
files are opened solely for final evaluation. Every corpus or vector file
read goes through an audit log stating the phase it was read for, and the
log lands in the run manifest, so the property is checkable after the fact.
"""

from __future__ import annotations

import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cnn import CnnConfig, CnnParams, TrainHistory, get_backend
from .cnn import model as cnn_model
from .cnn.checkpoint import save_checkpoint
from .corpus import Corpus, collapse_corpus, parse_corpus
from .embeddings import EmbeddingTable, load_embeddings
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    RunAggregate,
    aggregate_runs,
    confusion,
    evaluate,
    write_tsv,
)
from .splits import subsample_corpus
from .taxonomy import MAIN_ORDER, Taxonomy, default_taxonomy

MODES = ("monolingual", "cross-lingual")

PHASE_TRAIN = "train"
PHASE_SELECT = "select"
PHASE_EVAL = "eval"


class SpecError(ValueError):
    pass


class PredictionFileError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass
class ReadAudit:
    """Every data file the runner touches, tagged with why."""

    records: list[tuple[str, str]] = field(default_factory=list)

    def record(self, phase: str, path) -> None:
        self.records.append((phase, str(path)))

    def paths_for(self, phase: str) -> list[str]:
        return [p for ph, p in self.records if ph == phase]


@dataclass(frozen=True)
class GridSpec:
    kernels: tuple[int, ...] = (1, 2)
    learning_rates: tuple[float, ...] = (1e-4, 1e-3, 1e-2)
    thresholds: tuple[float, ...] = (0.4, 0.5, 0.6)

    def __post_init__(self):
        if not (self.kernels and self.learning_rates and self.thresholds):
            raise SpecError("grid axes must be nonempty")

    def cells(self):
        for kernel in self.kernels:
            for lr in self.learning_rates:
                for threshold in self.thresholds:
                    yield kernel, lr, threshold

    def size(self) -> int:
        return len(self.kernels) * len(self.learning_rates) * len(self.thresholds)


@dataclass
class GridRow:
    kernel: int
    learning_rate: float
    threshold: float
    status: str  # "ok" | "failed"
    dev_f1: float = float("nan")
    best_epoch: int = 0
    error: str = ""


@dataclass
class ExperimentSpec:
    mode: str
    train_lang: str
    eval_lang: str
    train_corpus: str
    dev_corpus: str
    eval_dev_corpus: str
    eval_test_corpus: str
    train_vectors: str
    eval_vectors: str
    config: CnnConfig
    seeds: tuple[int, ...] = (1, 2, 3)
    model: str = "cnn"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise SpecError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "cross-lingual" and self.train_lang == self.eval_lang:
            raise SpecError(
                "cross-lingual mode requires distinct train and eval languages"
            )
        if self.mode == "monolingual" and self.train_lang != self.eval_lang:
            raise SpecError("monolingual mode requires train and eval languages to match")
        if not self.seeds:
            raise SpecError("at least one seed is required")
        if self.model != "cnn":
            raise SpecError(f"unknown model {self.model!r}")
        for name in (
            "train_corpus",
            "dev_corpus",
            "eval_dev_corpus",
            "eval_test_corpus",
            "train_vectors",
            "eval_vectors",
        ):
            path = getattr(self, name)
            if not Path(path).exists():
                raise SpecError(f"{name} file not found: {path}")


@dataclass
class ExperimentResult:
    config: CnnConfig
    seeds: tuple[int, ...]
    dev_reports: list[EvalReport]
    test_reports: list[EvalReport]
    dev_aggregate: RunAggregate
    test_aggregate: RunAggregate
    confusion_test: ConfusionMatrix
    best_seed: int
    histories: list[TrainHistory]
    params_by_seed: dict[int, CnnParams]


@dataclass(frozen=True)
class CurveSpec:
    sizes: tuple[int, ...] = tuple(range(100, 1000, 100))
    seeds_per_size: int = 6
    base_seed: int = 1

    def __post_init__(self):
        if list(self.sizes) != sorted(self.sizes):
            raise SpecError("curve sizes must be ascending")
        if self.seeds_per_size < 1:
            raise SpecError("seeds_per_size must be >= 1")


@dataclass
class CurvePoint:
    size: int
    mean_f1: float
    std_f1: float
    n: int
    per_seed: list[float]


@dataclass
class CurveResult:
    points: list[CurvePoint]
    zeroshot_ref: float | None = None

    def as_tsv_rows(self) -> list[tuple[str, ...]]:
        rows = []
        if self.zeroshot_ref is not None:
            rows.append((f"#zeroshot_ref {self.zeroshot_ref:.6f}",))
        rows.append(("size", "mean_f1", "std_f1", "n"))
        for p in self.points:
            rows.append((str(p.size), f"{p.mean_f1:.6f}", f"{p.std_f1:.6f}", str(p.n)))
        return rows


# --- loading with audit ----------------------------------------------------


def load_corpus_audited(
    path, language: str, audit: ReadAudit | None, phase: str, taxonomy: Taxonomy
) -> Corpus:
    if audit is not None:
        audit.record(phase, path)
    corpus = parse_corpus(path, language=language, taxonomy=taxonomy)
    return collapse_corpus(corpus, taxonomy)


def load_vectors_audited(
    path, language: str, audit: ReadAudit | None, phase: str, expected_dim: int | None
) -> EmbeddingTable:
    if audit is not None:
        audit.record(phase, path)
    return load_embeddings(path, expected_dim=expected_dim, language=language)


# --- grid search -----------------------------------------------------------


def grid_search(
    grid: GridSpec,
    base_config: CnnConfig,
    train_data: cnn_model.EncodedDataset,
    dev_data: cnn_model.EncodedDataset,
    table: EmbeddingTable,
    seed: int | None = None,
    backend: str | None = None,
) -> tuple[CnnConfig, list[GridRow]]:
    """Train one model per grid cell (fixed seed) and pick the config with
    the best dev micro-F1; ties break to fewer epochs, then lower learning
    rate, then smaller kernel. Failed cells are recorded and skipped."""
    rows: list[GridRow] = []
    for kernel, lr, threshold in grid.cells():
        config = base_config.with_values(
            kernel=kernel,
            learning_rate=lr,
            threshold=threshold,
            seed=base_config.seed if seed is None else seed,
        )
        row = GridRow(kernel=kernel, learning_rate=lr, threshold=threshold, status="ok")
        try:
            _, history = cnn_model.train(config, train_data, dev_data, table, backend)
            row.dev_f1 = max(history.dev_f1)
            row.best_epoch = history.chosen_epoch
        except Exception as exc:  # a diverged cell must not kill the search
            row.status = "failed"
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    ok = [r for r in rows if r.status == "ok"]
    if not ok:
        raise RuntimeError("every grid cell failed; see the grid table for errors")
    best = max(ok, key=lambda r: (r.dev_f1, -r.best_epoch, -r.learning_rate, -r.kernel))
    best_config = base_config.with_values(
        kernel=best.kernel, learning_rate=best.learning_rate, threshold=best.threshold
    )
    return best_config, rows


def grid_rows_tsv(rows: list[GridRow]) -> list[tuple[str, ...]]:
    out = [("kernel", "learning_rate", "threshold", "status", "dev_f1", "best_epoch", "error")]
    for r in rows:
        out.append(
            (
                str(r.kernel),
                f"{r.learning_rate:g}",
                f"{r.threshold:g}",
                r.status,
                "" if r.status != "ok" else f"{r.dev_f1:.6f}",
                str(r.best_epoch),
                r.error,
            )
        )
    return out


# --- experiments -----------------------------------------------------------


def run_experiment(
    spec: ExperimentSpec,
    taxonomy: Taxonomy | None = None,
    backend: str | None = None,
    audit: ReadAudit | None = None,
    out_dir=None,
) -> ExperimentResult:
    """Train ``spec.seeds`` models and evaluate each on the eval language's
    dev and test sets; aggregate mean and std per metric; produce the test
    confusion matrix of the seed with the best (eval) dev micro-F1."""
    taxonomy = taxonomy or default_taxonomy()
    spec.validate()
    audit = audit if audit is not None else ReadAudit()

    train_table = load_vectors_audited(
        spec.train_vectors, spec.train_lang, audit, PHASE_TRAIN, spec.config.dim
    )
    train_corpus = load_corpus_audited(
        spec.train_corpus, spec.train_lang, audit, PHASE_TRAIN, taxonomy
    )
    dev_corpus = load_corpus_audited(
        spec.dev_corpus, spec.train_lang, audit, PHASE_SELECT, taxonomy
    )
    train_data = cnn_model.build_dataset(train_corpus, train_table, spec.config.max_len, taxonomy)
    dev_data = cnn_model.build_dataset(dev_corpus, train_table, spec.config.max_len, taxonomy)

    if spec.mode == "monolingual" and spec.eval_vectors == spec.train_vectors:
        eval_table = train_table
        audit.record(PHASE_EVAL, spec.eval_vectors)
    else:
        eval_table = load_vectors_audited(
            spec.eval_vectors, spec.eval_lang, audit, PHASE_EVAL, spec.config.dim
        )
    if eval_table.dim != train_table.dim:
        raise SpecError(
            f"vector spaces disagree: train dim {train_table.dim}, eval dim {eval_table.dim}"
        )
    eval_dev_corpus = load_corpus_audited(
        spec.eval_dev_corpus, spec.eval_lang, audit, PHASE_EVAL, taxonomy
    )
    eval_test_corpus = load_corpus_audited(
        spec.eval_test_corpus, spec.eval_lang, audit, PHASE_EVAL, taxonomy
    )
    eval_dev_docs = cnn_model.build_dataset(
        eval_dev_corpus, eval_table, spec.config.max_len, taxonomy
    ).docs
    eval_test_docs = cnn_model.build_dataset(
        eval_test_corpus, eval_table, spec.config.max_len, taxonomy
    ).docs
    dev_gold = [d.labels for d in eval_dev_corpus.documents]
    test_gold = [d.labels for d in eval_test_corpus.documents]

    dev_reports: list[EvalReport] = []
    test_reports: list[EvalReport] = []
    histories: list[TrainHistory] = []
    params_by_seed: dict[int, CnnParams] = {}
    test_preds_by_seed: dict[int, list[frozenset[str]]] = {}

    for seed in spec.seeds:
        config = spec.config.with_values(seed=seed)
        params, history = cnn_model.train(config, train_data, dev_data, train_table, backend)
        histories.append(history)
        params_by_seed[seed] = params
        dev_pred = cnn_model.predict(
            params, eval_table, eval_dev_docs, config.threshold,
            taxonomy.label_order, backend, config.batch_size,
        )
        test_pred = cnn_model.predict(
            params, eval_table, eval_test_docs, config.threshold,
            taxonomy.label_order, backend, config.batch_size,
        )
        test_preds_by_seed[seed] = test_pred
        dev_reports.append(evaluate(dev_gold, dev_pred, taxonomy))
        test_reports.append(evaluate(test_gold, test_pred, taxonomy))

    best_pos = max(
        range(len(spec.seeds)), key=lambda i: (dev_reports[i].micro_f1, -spec.seeds[i])
    )
    best_seed = spec.seeds[best_pos]
    result = ExperimentResult(
        config=spec.config,
        seeds=spec.seeds,
        dev_reports=dev_reports,
        test_reports=test_reports,
        dev_aggregate=aggregate_runs(dev_reports),
        test_aggregate=aggregate_runs(test_reports),
        confusion_test=confusion(test_gold, test_preds_by_seed[best_seed]),
        best_seed=best_seed,
        histories=histories,
        params_by_seed=params_by_seed,
    )
    if out_dir is not None:
        write_experiment_outputs(out_dir, spec, result, taxonomy, backend, audit)
    return result


def write_experiment_outputs(
    out_dir, spec: ExperimentSpec, result: ExperimentResult,
    taxonomy: Taxonomy, backend: str | None, audit: ReadAudit,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, seed in enumerate(result.seeds):
        write_tsv(out / f"report_dev_seed{seed}.tsv", result.dev_reports[i].as_tsv_rows())
        write_tsv(out / f"report_test_seed{seed}.tsv", result.test_reports[i].as_tsv_rows())
        history = result.histories[i]
        rows = [("epoch", "train_loss", "dev_f1")]
        for e, (loss, f1) in enumerate(zip(history.train_loss, history.dev_f1), start=1):
            rows.append((str(e), f"{loss:.10f}", f"{f1:.6f}"))
        write_tsv(out / f"history_seed{seed}.tsv", rows)
    write_tsv(out / "aggregate_dev.tsv", result.dev_aggregate.as_tsv_rows())
    write_tsv(out / "aggregate_test.tsv", result.test_aggregate.as_tsv_rows())
    write_tsv(out / "confusion_test.tsv", result.confusion_test.as_tsv_rows())
    (out / "report_test.txt").write_text(
        result.test_reports[result.seeds.index(result.best_seed)].as_text() + "\n",
        encoding="utf-8",
    )
    save_checkpoint(
        out / "model_best.json",
        result.params_by_seed[result.best_seed],
        result.config.with_values(seed=result.best_seed),
        taxonomy.label_order,
        extra={"selected_by": "dev micro-F1", "seed": result.best_seed},
    )
    write_manifest(
        out,
        kind=f"{spec.mode}-experiment",
        args={
            "mode": spec.mode,
            "train_lang": spec.train_lang,
            "eval_lang": spec.eval_lang,
            "config": spec.config.to_dict(),
            "model": spec.model,
        },
        seeds=result.seeds,
        inputs=[
            spec.train_corpus, spec.dev_corpus, spec.eval_dev_corpus,
            spec.eval_test_corpus, spec.train_vectors, spec.eval_vectors,
        ],
        backend=backend,
        audit=audit,
    )


def learning_curve(
    curve: CurveSpec,
    config: CnnConfig,
    train_corpus: Corpus,
    dev_corpus: Corpus,
    test_corpus: Corpus,
    table: EmbeddingTable,
    taxonomy: Taxonomy | None = None,
    backend: str | None = None,
    zeroshot_ref: float | None = None,
    run_hook=None,
) -> CurveResult:
    """Test micro-F1 as a function of train-set size.

    For each size, trains ``curve.seeds_per_size`` models on stratified
    subsamples of the train corpus (one fixed config throughout) and
    reports mean and sample std. ``run_hook``, when given, is called once
    per completed training run (for bookkeeping/tests).
    """
    taxonomy = taxonomy or default_taxonomy()
    n_train = len(train_corpus.documents)
    too_big = [s for s in curve.sizes if s > n_train]
    if too_big:
        raise SpecError(
            f"curve sizes exceed the {n_train}-document train set: {too_big}"
        )
    dev_data = cnn_model.build_dataset(dev_corpus, table, config.max_len, taxonomy)
    test_data = cnn_model.build_dataset(test_corpus, table, config.max_len, taxonomy)
    test_gold = [d.labels for d in test_corpus.documents]

    points: list[CurvePoint] = []
    for size in curve.sizes:
        scores: list[float] = []
        for rep in range(curve.seeds_per_size):
            sub_seed = _derive_seed("curve-subsample", curve.base_seed, size, rep)
            train_seed = _derive_seed("curve-train", curve.base_seed, size, rep)
            subset = subsample_corpus(train_corpus, size, sub_seed)
            train_data = cnn_model.build_dataset(subset, table, config.max_len, taxonomy)
            run_config = config.with_values(seed=train_seed)
            params, _ = cnn_model.train(run_config, train_data, dev_data, table, backend)
            pred = cnn_model.predict(
                params, table, test_data.docs, run_config.threshold,
                taxonomy.label_order, backend, run_config.batch_size,
            )
            scores.append(evaluate(test_gold, pred, taxonomy).micro_f1)
            if run_hook is not None:
                run_hook(size, rep)
        from .evaluation import mean_std

        mean, std = mean_std(scores)
        points.append(
            CurvePoint(size=size, mean_f1=mean, std_f1=std, n=len(scores), per_seed=scores)
        )
    return CurveResult(points=points, zeroshot_ref=zeroshot_ref)


def _derive_seed(salt: str, base: int, *parts) -> int:
    payload = "|".join([salt, str(base), *[str(p) for p in parts]])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % (2**31 - 1)


# --- prediction exchange files ---------------------------------------------


def write_predictions(
    path, ids: list[str], probs: np.ndarray, threshold: float,
    label_order: tuple[str, ...] = MAIN_ORDER,
) -> None:
    """Write the prediction exchange file: two header lines, then one
    ``id<TAB>p1 ... p8`` row per document. Probabilities are written with
    ``repr`` so a reader recovers the exact doubles."""
    if probs.shape != (len(ids), len(label_order)):
        raise ValueError(f"probability matrix shape {probs.shape} does not match ids/labels")
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"#labels {' '.join(label_order)}\n")
        fh.write(f"#threshold {threshold!r}\n")
        for doc_id, row in zip(ids, probs):
            fh.write(f"{doc_id}\t{' '.join(repr(float(p)) for p in row)}\n")


def read_predictions(path) -> tuple[dict[str, np.ndarray], float]:
    """Parse an exchange file into {id: probability vector} plus threshold."""
    labels_seen: tuple[str, ...] | None = None
    threshold: float | None = None
    by_id: dict[str, np.ndarray] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#labels"):
            labels_seen = tuple(line.split()[1:])
            if labels_seen != MAIN_ORDER:
                raise PredictionFileError(
                    f"label order {labels_seen} does not match {MAIN_ORDER}", lineno
                )
            continue
        if line.startswith("#threshold"):
            fields = line.split()
            if len(fields) != 2:
                raise PredictionFileError("malformed #threshold header", lineno)
            try:
                threshold = float(fields[1])
            except ValueError:
                raise PredictionFileError(
                    f"bad threshold value {fields[1]!r}", lineno
                ) from None
            continue
        if line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise PredictionFileError(
                f"expected 'id<TAB>probabilities', found {len(fields)} fields", lineno
            )
        doc_id, prob_field = fields
        values = prob_field.split()
        if len(values) != len(MAIN_ORDER):
            raise PredictionFileError(
                f"expected {len(MAIN_ORDER)} probabilities, found {len(values)}", lineno
            )
        try:
            row = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise PredictionFileError("non-numeric probability", lineno) from None
        if np.any(row < 0.0) or np.any(row > 1.0):
            raise PredictionFileError("probability outside [0, 1]", lineno)
        if doc_id in by_id:
            raise PredictionFileError(f"duplicate id {doc_id!r}", lineno)
        by_id[doc_id] = row
    if labels_seen is None:
        raise PredictionFileError("missing #labels header")
    if threshold is None:
        raise PredictionFileError("missing #threshold header")
    return by_id, threshold


def evaluate_external(
    predictions_path, gold: Corpus, taxonomy: Taxonomy | None = None
) -> tuple[EvalReport, ConfusionMatrix, float]:
    """Evaluate an exchange-format prediction file against a gold corpus.

    The file's ids must exactly cover the gold corpus ids; the threshold in
    the header converts probabilities to label sets.
    """
    taxonomy = taxonomy or default_taxonomy()
    by_id, threshold = read_predictions(predictions_path)
    gold_ids = gold.doc_ids()
    missing = [i for i in gold_ids if i not in by_id]
    extra = sorted(set(by_id) - set(gold_ids))
    if missing or extra:
        raise PredictionFileError(
            f"id mismatch: missing {missing or 'none'}, unexpected {extra or 'none'}"
        )
    gold_sets = [
        frozenset(taxonomy.main_of(c) for c in d.labels) for d in gold.documents
    ]
    pred_sets = [
        frozenset(
            code
            for code, p in zip(MAIN_ORDER, by_id[doc_id])
            if p >= threshold
        )
        for doc_id in gold_ids
    ]
    return (
        evaluate(gold_sets, pred_sets, taxonomy),
        confusion(gold_sets, pred_sets),
        threshold,
    )


# --- manifests --------------------------------------------------------------


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    run_dir, kind: str, args: dict, seeds, inputs, backend: str | None,
    audit: ReadAudit | None = None, extra: dict | None = None,
) -> None:
    kernels = get_backend(backend)
    manifest = {
        "tool": "regcore",
        "version": __version__,
        "kind": kind,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "argv": sys.argv,
        "args": args,
        "seeds": list(seeds),
        "kernel_backend": kernels.NAME,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "inputs": {str(p): file_sha256(p) for p in inputs if Path(p).exists()},
        "reads": [list(r) for r in audit.records] if audit is not None else [],
    }
    if extra:
        manifest["extra"] = extra
    Path(run_dir).mkdir(parents=True, exist_ok=True)
    (Path(run_dir) / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )


def read_config_file(path) -> dict[str, str]:
    """Simple ``key = value`` configuration files; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_config_file(path, values: dict) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for key, value in values.items():
            fh.write(f"{key} = {value}\n")
