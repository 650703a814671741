import hashlib
import json

import numpy as np
import pytest

from conftest import make_corpus
from synth import write_pack
from regcore import runner as R
from regcore.cnn import CnnConfig, TrainHistory, load_checkpoint
from regcore.corpus import parse_corpus
from regcore.evaluation import evaluate
from regcore.taxonomy import MAIN_ORDER, default_taxonomy


# --- grid search ------------------------------------------------------------


def test_grid_spec_defaults():
    grid = R.GridSpec()
    assert grid.size() == 18
    cells = list(grid.cells())
    assert len(cells) == 18
    assert cells[0] == (1, 1e-4, 0.4)
    assert cells[-1] == (2, 1e-2, 0.6)


def test_grid_spec_rejects_empty_axis():
    with pytest.raises(R.SpecError):
        R.GridSpec(kernels=())


def scripted_grid_search(monkeypatch, outcomes):
    """Run grid_search with train() replaced by a table lookup.

    outcomes maps (kernel, lr, threshold) to either ("ok", dev_f1, best_epoch)
    or ("raise", message).
    """
    def fake_train(config, train_data, dev_data, table, backend=None):
        key = (config.kernel, config.learning_rate, config.threshold)
        kind, *rest = outcomes[key]
        if kind == "raise":
            raise RuntimeError(rest[0])
        dev_f1, best_epoch = rest
        history = TrainHistory(
            train_loss=[0.0] * best_epoch,
            dev_f1=[dev_f1 if e + 1 == best_epoch else dev_f1 - 0.1
                    for e in range(best_epoch)],
            chosen_epoch=best_epoch,
        )
        return None, history

    monkeypatch.setattr(R.cnn_model, "train", fake_train)
    grid = R.GridSpec(kernels=(1, 2), learning_rates=(1e-4, 1e-3), thresholds=(0.5,))
    return R.grid_search(grid, CnnConfig(dim=4), None, None, None)


def test_grid_picks_best_dev_f1(monkeypatch):
    best, rows = scripted_grid_search(monkeypatch, {
        (1, 1e-4, 0.5): ("ok", 0.5, 3),
        (1, 1e-3, 0.5): ("ok", 0.8, 3),
        (2, 1e-4, 0.5): ("ok", 0.6, 3),
        (2, 1e-3, 0.5): ("ok", 0.7, 3),
    })
    assert (best.kernel, best.learning_rate) == (1, 1e-3)
    assert len(rows) == 4 and all(r.status == "ok" for r in rows)


def test_grid_tie_prefers_fewer_epochs(monkeypatch):
    best, _ = scripted_grid_search(monkeypatch, {
        (1, 1e-4, 0.5): ("ok", 0.8, 5),
        (1, 1e-3, 0.5): ("ok", 0.8, 2),
        (2, 1e-4, 0.5): ("ok", 0.8, 4),
        (2, 1e-3, 0.5): ("ok", 0.8, 3),
    })
    assert (best.kernel, best.learning_rate) == (1, 1e-3)


def test_grid_tie_prefers_lower_learning_rate(monkeypatch):
    best, _ = scripted_grid_search(monkeypatch, {
        (1, 1e-4, 0.5): ("ok", 0.8, 3),
        (1, 1e-3, 0.5): ("ok", 0.8, 3),
        (2, 1e-4, 0.5): ("ok", 0.7, 3),
        (2, 1e-3, 0.5): ("ok", 0.7, 3),
    })
    assert (best.kernel, best.learning_rate) == (1, 1e-4)


def test_grid_tie_prefers_smaller_kernel(monkeypatch):
    best, _ = scripted_grid_search(monkeypatch, {
        (1, 1e-4, 0.5): ("ok", 0.8, 3),
        (1, 1e-3, 0.5): ("ok", 0.7, 3),
        (2, 1e-4, 0.5): ("ok", 0.8, 3),
        (2, 1e-3, 0.5): ("ok", 0.7, 3),
    })
    assert (best.kernel, best.learning_rate) == (1, 1e-4)


def test_grid_skips_failed_cells(monkeypatch):
    best, rows = scripted_grid_search(monkeypatch, {
        (1, 1e-4, 0.5): ("raise", "diverged"),
        (1, 1e-3, 0.5): ("ok", 0.6, 3),
        (2, 1e-4, 0.5): ("ok", 0.9, 3),
        (2, 1e-3, 0.5): ("raise", "diverged"),
    })
    assert (best.kernel, best.learning_rate) == (2, 1e-4)
    failed = [r for r in rows if r.status == "failed"]
    assert len(failed) == 2
    assert all("diverged" in r.error for r in failed)


def test_grid_all_cells_failed(monkeypatch):
    with pytest.raises(RuntimeError):
        scripted_grid_search(monkeypatch, {
            key: ("raise", "boom")
            for key in ((1, 1e-4, 0.5), (1, 1e-3, 0.5), (2, 1e-4, 0.5), (2, 1e-3, 0.5))
        })


# --- derived seeds ------------------------------------------------------------


def test_derive_seed_matches_hash_oracle():
    payload = "curve-train|1|100|0"
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    expected = int.from_bytes(digest[:4], "big") % (2**31 - 1)
    assert R._derive_seed("curve-train", 1, 100, 0) == expected


def test_derive_seed_properties():
    a = R._derive_seed("curve-train", 1, 100, 0)
    b = R._derive_seed("curve-train", 1, 100, 1)
    c = R._derive_seed("curve-subsample", 1, 100, 0)
    assert a != b and a != c
    assert 0 <= a < 2**31 - 1
    assert R._derive_seed("curve-train", 1, 100, 0) == a


# --- prediction exchange files --------------------------------------------------


def test_predictions_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(5)
    ids = [f"xx-{i}" for i in range(10)]
    probs = rng.random((10, 8))
    threshold = 0.4837261094726187
    path = tmp_path / "preds.tsv"
    R.write_predictions(path, ids, probs, threshold)
    by_id, got_threshold = R.read_predictions(path)
    assert got_threshold == threshold  # repr round trip is exact
    assert list(by_id) == ids
    for i, doc_id in enumerate(ids):
        np.testing.assert_array_equal(by_id[doc_id], probs[i])


def test_write_predictions_shape_check(tmp_path):
    with pytest.raises(ValueError):
        R.write_predictions(tmp_path / "p.tsv", ["a"], np.zeros((2, 8)), 0.5)
    with pytest.raises(ValueError):
        R.write_predictions(tmp_path / "p.tsv", ["a"], np.zeros((1, 7)), 0.5)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


GOOD_HEADER = ["#labels NA IN OP ID HI IP LY SP", "#threshold 0.5"]
GOOD_ROW = "d1\t" + " ".join(["0.5"] * 8)


def test_read_predictions_rejects_malformed(tmp_path):
    cases = [
        (["#threshold 0.5", GOOD_ROW], "missing #labels"),
        ([GOOD_HEADER[0], GOOD_ROW], "missing #threshold"),
        (["#labels NA IN OP ID HI IP LY", "#threshold 0.5", GOOD_ROW], "label order"),
        (["#labels IN NA OP ID HI IP LY SP", "#threshold 0.5", GOOD_ROW], "label order"),
        (GOOD_HEADER + ["d1 0.5 0.5"], "fields"),
        (GOOD_HEADER + ["d1\t0.5 0.5 0.5"], "probabilities"),
        (GOOD_HEADER + ["d1\t" + " ".join(["x"] * 8)], "non-numeric"),
        (GOOD_HEADER + ["d1\t1.5 " + " ".join(["0.5"] * 7)], "outside"),
        (GOOD_HEADER + [GOOD_ROW, GOOD_ROW], "duplicate"),
        (["#threshold abc", GOOD_HEADER[0], GOOD_ROW], "threshold"),
    ]
    for i, (lines, needle) in enumerate(cases):
        path = write_lines(tmp_path / f"bad{i}.tsv", lines)
        with pytest.raises(R.PredictionFileError) as err:
            R.read_predictions(path)
        assert needle in str(err.value)


def test_read_predictions_reports_line_number(tmp_path):
    path = write_lines(tmp_path / "bad.tsv", GOOD_HEADER + [GOOD_ROW, "d2 broken"])
    with pytest.raises(R.PredictionFileError) as err:
        R.read_predictions(path)
    assert err.value.lineno == 4


def test_read_predictions_skips_blank_and_comment_lines(tmp_path):
    path = write_lines(
        tmp_path / "ok.tsv",
        [GOOD_HEADER[0], "", "# free comment", GOOD_HEADER[1], GOOD_ROW],
    )
    by_id, threshold = R.read_predictions(path)
    assert list(by_id) == ["d1"] and threshold == 0.5


# --- external evaluation ----------------------------------------------------------


def external_fixture(tmp_path, rng):
    corpus = make_corpus(
        [({"NA"}, "one text"), ({"IN", "OP"}, "two text"), (set(), "three text")]
    )
    ids = corpus.doc_ids()
    probs = rng.random((3, 8))
    path = tmp_path / "preds.tsv"
    R.write_predictions(path, ids, probs, 0.5)
    return corpus, ids, probs, path


def test_evaluate_external_matches_direct_evaluation(tmp_path, taxonomy):
    rng = np.random.default_rng(11)
    corpus, ids, probs, path = external_fixture(tmp_path, rng)
    report, matrix, threshold = R.evaluate_external(path, corpus)
    gold = [d.labels for d in corpus.documents]
    pred = [
        frozenset(c for c, p in zip(MAIN_ORDER, row) if p >= 0.5) for row in probs
    ]
    direct = evaluate(gold, pred, taxonomy)
    assert report.micro_f1 == direct.micro_f1
    assert report.macro_f1 == direct.macro_f1
    assert threshold == 0.5
    assert sum(sum(r) for r in matrix.counts) == len(gold)


def test_evaluate_external_threshold_is_inclusive(tmp_path):
    corpus = make_corpus([({"NA"}, "one text")])
    probs = np.zeros((1, 8))
    probs[0, 0] = 0.5  # exactly at threshold
    path = tmp_path / "preds.tsv"
    R.write_predictions(path, corpus.doc_ids(), probs, 0.5)
    report, _, _ = R.evaluate_external(path, corpus)
    assert report.micro_f1 == 1.0


def test_evaluate_external_requires_exact_id_cover(tmp_path):
    rng = np.random.default_rng(12)
    corpus, ids, probs, path = external_fixture(tmp_path, rng)
    # missing one gold id
    R.write_predictions(tmp_path / "m.tsv", ids[:2], probs[:2], 0.5)
    with pytest.raises(R.PredictionFileError, match="missing"):
        R.evaluate_external(tmp_path / "m.tsv", corpus)
    # an id the gold corpus does not have
    R.write_predictions(tmp_path / "e.tsv", ids + ["ghost"], np.vstack([probs, probs[:1]]), 0.5)
    with pytest.raises(R.PredictionFileError, match="unexpected"):
        R.evaluate_external(tmp_path / "e.tsv", corpus)


# --- experiment specs ---------------------------------------------------------------


def spec_kwargs(paths, mode="monolingual", eval_lang="xx"):
    return dict(
        mode=mode,
        train_lang="xx",
        eval_lang=eval_lang,
        train_corpus=str(paths["train"]),
        dev_corpus=str(paths["dev"]),
        eval_dev_corpus=str(paths["dev"]),
        eval_test_corpus=str(paths["test"]),
        train_vectors=str(paths["vectors"]),
        eval_vectors=str(paths["vectors"]),
        config=CnnConfig(dim=16, filters=8, max_epochs=40, batch_size=16,
                         learning_rate=1e-2, patience=0),
    )


@pytest.fixture(scope="module")
def packs(tmp_path_factory):
    root = tmp_path_factory.mktemp("packs")
    xx = write_pack(root / "xx", "xx", seed=7)
    yy = write_pack(root / "yy", "yy", seed=8)
    return xx, yy


def test_spec_validation_errors(packs):
    xx, yy = packs
    R.ExperimentSpec(**spec_kwargs(xx)).validate()  # sane baseline
    with pytest.raises(R.SpecError, match="mode"):
        R.ExperimentSpec(**{**spec_kwargs(xx), "mode": "bilingual"}).validate()
    with pytest.raises(R.SpecError, match="distinct"):
        R.ExperimentSpec(**spec_kwargs(xx, mode="cross-lingual")).validate()
    with pytest.raises(R.SpecError, match="match"):
        R.ExperimentSpec(**spec_kwargs(xx, eval_lang="yy")).validate()
    with pytest.raises(R.SpecError, match="seed"):
        R.ExperimentSpec(**spec_kwargs(xx), seeds=()).validate()
    with pytest.raises(R.SpecError, match="model"):
        R.ExperimentSpec(**spec_kwargs(xx), model="rnn").validate()
    broken = {**spec_kwargs(xx), "train_corpus": "/no/such/file.tsv"}
    with pytest.raises(R.SpecError, match="not found"):
        R.ExperimentSpec(**broken).validate()


def test_monolingual_experiment(packs, tmp_path, taxonomy):
    xx, _ = packs
    spec = R.ExperimentSpec(**spec_kwargs(xx), seeds=(1, 2))
    audit = R.ReadAudit()
    result = R.run_experiment(spec, audit=audit, out_dir=tmp_path / "run")
    assert result.seeds == (1, 2)
    assert len(result.dev_reports) == 2 and len(result.test_reports) == 2
    # aggregates are the mean over seeds
    f1s = [r.micro_f1 for r in result.test_reports]
    assert result.test_aggregate.mean("micro_f1") == pytest.approx(np.mean(f1s))
    # best seed has the highest dev micro-F1
    best_i = max(range(2), key=lambda i: (result.dev_reports[i].micro_f1, -spec.seeds[i]))
    assert result.best_seed == spec.seeds[best_i]
    # the learned models separate this synthetic data
    assert result.test_aggregate.mean("micro_f1") > 0.8
    # confusion rows cover the test set
    total = sum(sum(row) for row in result.confusion_test.counts)
    assert total == 40

    out = tmp_path / "run"
    for name in (
        "report_dev_seed1.tsv", "report_test_seed2.tsv", "history_seed1.tsv",
        "aggregate_dev.tsv", "aggregate_test.tsv", "confusion_test.tsv",
        "report_test.txt", "model_best.json", "manifest.json",
    ):
        assert (out / name).exists(), name
    params, config, label_order = load_checkpoint(out / "model_best.json")
    assert label_order == taxonomy.label_order
    assert config.seed == result.best_seed

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["tool"] == "regcore"
    assert manifest["kind"] == "monolingual-experiment"
    assert manifest["seeds"] == [1, 2]
    assert manifest["kernel_backend"] in ("numpy", "compiled")
    for path, digest in manifest["inputs"].items():
        assert digest == R.file_sha256(path)
    assert manifest["reads"], "audit trail must be present"


def test_cross_lingual_experiment_audit_hygiene(packs):
    xx, yy = packs
    kwargs = spec_kwargs(xx)
    kwargs.update(
        mode="cross-lingual",
        eval_lang="yy",
        eval_dev_corpus=str(yy["dev"]),
        eval_test_corpus=str(yy["test"]),
        eval_vectors=str(yy["vectors"]),
    )
    spec = R.ExperimentSpec(**kwargs, seeds=(1,))
    audit = R.ReadAudit()
    result = R.run_experiment(spec, audit=audit)

    train_reads = audit.paths_for(R.PHASE_TRAIN)
    select_reads = audit.paths_for(R.PHASE_SELECT)
    eval_reads = audit.paths_for(R.PHASE_EVAL)
    # no target-language file is opened before the eval phase
    assert all("yy" not in p for p in train_reads + select_reads)
    assert str(yy["dev"]) in eval_reads
    assert str(yy["test"]) in eval_reads
    assert str(yy["vectors"]) in eval_reads
    assert str(xx["train"]) in train_reads
    assert str(xx["vectors"]) in train_reads
    assert select_reads == [str(xx["dev"])]
    # aligned synthetic spaces make zero-shot transfer work
    assert result.test_aggregate.mean("micro_f1") > 0.7


def test_experiment_rerun_reproduces_metrics(packs):
    xx, _ = packs
    spec = R.ExperimentSpec(**spec_kwargs(xx), seeds=(3,))
    a = R.run_experiment(spec)
    b = R.run_experiment(spec)
    assert a.test_reports[0].micro_f1 == b.test_reports[0].micro_f1
    assert a.dev_reports[0].metrics() == b.dev_reports[0].metrics()


# --- learning curves -----------------------------------------------------------------


def test_curve_spec_validation():
    with pytest.raises(R.SpecError):
        R.CurveSpec(sizes=(200, 100))
    with pytest.raises(R.SpecError):
        R.CurveSpec(sizes=(100,), seeds_per_size=0)
    assert R.CurveSpec().sizes == tuple(range(100, 1000, 100))
    assert R.CurveSpec().seeds_per_size == 6


def test_learning_curve_runs_and_reports(packs, taxonomy):
    xx, _ = packs
    from regcore.embeddings import load_embeddings

    train = parse_corpus(xx["train"], language="xx", taxonomy=taxonomy)
    dev = parse_corpus(xx["dev"], language="xx", taxonomy=taxonomy)
    test = parse_corpus(xx["test"], language="xx", taxonomy=taxonomy)
    table = load_embeddings(xx["vectors"], language="xx")
    config = CnnConfig(dim=16, filters=8, max_epochs=2, batch_size=16,
                       learning_rate=1e-2, patience=0)
    calls = []
    curve = R.CurveSpec(sizes=(16, 32), seeds_per_size=2, base_seed=9)
    result = R.learning_curve(
        curve, config, train, dev, test, table, taxonomy,
        zeroshot_ref=0.5, run_hook=lambda size, rep: calls.append((size, rep)),
    )
    assert calls == [(16, 0), (16, 1), (32, 0), (32, 1)]
    assert [p.size for p in result.points] == [16, 32]
    assert all(p.n == 2 and len(p.per_seed) == 2 for p in result.points)
    rows = result.as_tsv_rows()
    assert rows[0] == ("#zeroshot_ref 0.500000",)
    assert rows[1] == ("size", "mean_f1", "std_f1", "n")
    assert len(rows) == 4


def test_learning_curve_rejects_oversized_points(packs, taxonomy):
    xx, _ = packs
    from regcore.embeddings import load_embeddings

    train = parse_corpus(xx["train"], language="xx", taxonomy=taxonomy)
    dev = parse_corpus(xx["dev"], language="xx", taxonomy=taxonomy)
    table = load_embeddings(xx["vectors"], language="xx")
    with pytest.raises(R.SpecError, match="exceed"):
        R.learning_curve(
            R.CurveSpec(sizes=(10, 10_000), seeds_per_size=1),
            CnnConfig(dim=16), train, dev, dev, table, taxonomy,
        )


# --- manifests and config files -------------------------------------------------------


def test_file_sha256_oracle(tmp_path):
    path = tmp_path / "blob.bin"
    path.write_bytes(b"register classification")
    assert R.file_sha256(path) == hashlib.sha256(b"register classification").hexdigest()


def test_write_manifest_contents(tmp_path):
    data = tmp_path / "input.tsv"
    data.write_text("NA\thello\n", encoding="utf-8")
    audit = R.ReadAudit()
    audit.record(R.PHASE_TRAIN, data)
    R.write_manifest(
        tmp_path, kind="unit-test", args={"x": 1}, seeds=[1, 2],
        inputs=[data, "/missing/file"], backend=None, audit=audit,
        extra={"note": "hi"},
    )
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["kind"] == "unit-test"
    assert manifest["args"] == {"x": 1}
    assert list(manifest["inputs"]) == [str(data)]  # missing files skipped
    assert manifest["reads"] == [[R.PHASE_TRAIN, str(data)]]
    assert manifest["extra"] == {"note": "hi"}
    assert manifest["python"] and manifest["numpy"]


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "run.conf"
    R.write_config_file(path, {"kernel": 2, "learning_rate": 0.001})
    values = R.read_config_file(path)
    assert values == {"kernel": "2", "learning_rate": "0.001"}


def test_config_file_comments_and_errors(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# top comment\nkernel = 2  # trailing\n\nbroken line\n")
    with pytest.raises(ValueError, match="line 4"):
        R.read_config_file(path)
    path.write_text("# only comments\n\n")
    assert R.read_config_file(path) == {}


def test_read_audit_filters_by_phase():
    audit = R.ReadAudit()
    audit.record(R.PHASE_TRAIN, "a")
    audit.record(R.PHASE_EVAL, "b")
    audit.record(R.PHASE_TRAIN, "c")
    assert audit.paths_for(R.PHASE_TRAIN) == ["a", "c"]
    assert audit.paths_for(R.PHASE_SELECT) == []
