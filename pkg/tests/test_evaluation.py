import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_label_sets
from regcore.evaluation import (
    CONFUSION_CLASSES,
    EMPTY_CLASS,
    HYBRID_CLASS,
    aggregate_runs,
    collapse_class,
    confusion,
    evaluate,
    mean_std,
    micro_counts,
    micro_f1,
    micro_prf,
    per_class_f1,
    write_tsv,
)
from regcore.taxonomy import MAIN_ORDER

F = frozenset


def brute_force_counts(gold, pred):
    """Independent per-(doc,label) TP/FP/FN counter over all 8 classes."""
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        for code in MAIN_ORDER:
            in_g, in_p = code in g, code in p
            tp += in_g and in_p
            fp += (not in_g) and in_p
            fn += in_g and (not in_p)
    return tp, fp, fn


# --- micro ---------------------------------------------------------------------


def test_micro_hand_case():
    gold = [F({"NA"}), F({"IN", "OP"})]
    pred = [F({"NA", "IP"}), F({"IN"})]
    assert micro_counts(gold, pred) == (2, 3, 3)
    assert micro_f1(gold, pred) == pytest.approx(2 / 3, abs=1e-12)


def test_micro_both_empty_is_perfect():
    gold = [F(), F()]
    pred = [F(), F()]
    assert micro_f1(gold, pred) == 1.0
    assert micro_prf(gold, pred) == (1.0, 1.0, 1.0)


def test_micro_one_side_empty():
    assert micro_f1([F({"NA"})], [F()]) == 0.0
    assert micro_f1([F()], [F({"NA"})]) == 0.0
    p, r, f1 = micro_prf([F({"NA"})], [F()])
    assert (p, r, f1) == (0.0, 0.0, 0.0)


def test_micro_alignment_checked():
    with pytest.raises(ValueError):
        micro_f1([F()], [F(), F()])


def test_micro_is_exact_fraction():
    gold = [F({"NA", "IN"})] * 3
    pred = [F({"NA"})] * 3
    # tp=3, pred=3, gold=6
    assert micro_f1(gold, pred) == 2 * 3 / (3 + 6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_micro_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    gold = random_label_sets(rng, n)
    pred = random_label_sets(rng, n)
    tp, fp, fn = brute_force_counts(gold, pred)
    assert micro_counts(gold, pred) == (tp, tp + fp, tp + fn)
    denom = (tp + fp) + (tp + fn)
    expected = 1.0 if denom == 0 else 2 * tp / denom
    assert micro_f1(gold, pred) == expected


# --- per class -------------------------------------------------------------------


def test_per_class_hand_case(taxonomy):
    gold = [F({"NA"}), F({"NA", "IN"}), F({"OP"})]
    pred = [F({"NA"}), F({"IN"}), F({"SP"})]
    by_code = {e.code: e for e in per_class_f1(gold, pred, taxonomy)}
    na = by_code["NA"]
    assert (na.support, na.predicted) == (2, 1)
    assert na.f1 == 2 * 1 / (2 + 1)
    assert by_code["IN"].f1 == 2 * 1 / (1 + 1)
    op = by_code["OP"]
    assert (op.f1, op.present) == (0.0, True)  # in gold, never predicted
    sp = by_code["SP"]
    assert (sp.f1, sp.present) == (0.0, True)  # predicted, never gold
    ly = by_code["LY"]
    assert (ly.present, ly.support, ly.f1) == (False, 0, 0.0)


def test_per_class_against_brute_force(taxonomy):
    rng = np.random.default_rng(11)
    gold = random_label_sets(rng, 60)
    pred = random_label_sets(rng, 60)
    for entry in per_class_f1(gold, pred, taxonomy):
        tp = sum(1 for g, p in zip(gold, pred) if entry.code in g and entry.code in p)
        fp = sum(1 for g, p in zip(gold, pred) if entry.code not in g and entry.code in p)
        fn = sum(1 for g, p in zip(gold, pred) if entry.code in g and entry.code not in p)
        if tp + fp + fn == 0:
            assert not entry.present
        else:
            assert entry.f1 == pytest.approx(2 * tp / (2 * tp + fp + fn))


def test_macro_excludes_absent_classes(taxonomy):
    gold = [F({"NA"}), F({"IN"})]
    pred = [F({"NA"}), F({"IN"})]
    report = evaluate(gold, pred, taxonomy)
    assert report.macro_f1 == 1.0  # six absent classes sit out
    assert report.micro_f1 == 1.0


def test_evaluate_report_fields(taxonomy):
    gold = [F({"NA"}), F({"IN", "OP"})]
    pred = [F({"NA", "IP"}), F({"IN"})]
    report = evaluate(gold, pred, taxonomy)
    assert report.n_docs == 2
    assert report.micro_f1 == pytest.approx(2 / 3)
    metrics = report.metrics()
    assert set(metrics) >= {"micro_f1", "macro_f1", "f1_NA", "f1_SP"}
    text = report.as_text()
    assert "micro-F1" in text
    rows = report.as_tsv_rows()
    assert rows[0] == ("metric", "value")


def test_evaluate_empty_everything(taxonomy):
    report = evaluate([F()], [F()], taxonomy)
    assert report.micro_f1 == 1.0
    assert report.macro_f1 == 0.0  # no class present at all


# --- confusion ---------------------------------------------------------------------


def test_collapse_class():
    assert collapse_class(F()) == EMPTY_CLASS
    assert collapse_class(F({"NA"})) == "NA"
    assert collapse_class(F({"NA", "SP"})) == HYBRID_CLASS
    assert collapse_class(F({"NA", "SP", "IN"})) == HYBRID_CLASS


def test_confusion_classes_order():
    assert CONFUSION_CLASSES == (*MAIN_ORDER, HYBRID_CLASS, EMPTY_CLASS)


def test_confusion_hand_case():
    gold = [F({"NA"}), F({"NA"}), F({"NA", "IN"}), F()]
    pred = [F({"NA"}), F({"OP"}), F({"NA"}), F({"SP"})]
    matrix = confusion(gold, pred)
    assert matrix.counts[0][0] == 1  # NA -> NA
    assert matrix.counts[0][2] == 1  # NA -> OP
    hyb = CONFUSION_CLASSES.index(HYBRID_CLASS)
    assert matrix.counts[hyb][0] == 1  # hybrid -> NA
    empty = CONFUSION_CLASSES.index(EMPTY_CLASS)
    assert matrix.counts[empty][7] == 1  # unlabelled -> SP
    assert matrix.row("NA") == [0.5, 0, 0.5, 0, 0, 0, 0, 0, 0, 0]
    assert matrix.cell(HYBRID_CLASS, "NA") == 1.0


def test_confusion_counts_sum_to_docs():
    rng = np.random.default_rng(5)
    from conftest import random_label_sets

    gold = random_label_sets(rng, 50)
    pred = random_label_sets(rng, 50)
    matrix = confusion(gold, pred)
    assert sum(sum(row) for row in matrix.counts) == 50


def test_confusion_zero_rows_stay_zero():
    matrix = confusion([F({"NA"})], [F({"NA"})])
    ly_row = matrix.row("LY")
    assert ly_row == [0.0] * len(CONFUSION_CLASSES)


def test_confusion_row_normalization():
    rng = np.random.default_rng(6)
    gold = random_label_sets(rng, 70)
    pred = random_label_sets(rng, 70)
    matrix = confusion(gold, pred)
    for counts_row, props_row in zip(matrix.counts, matrix.proportions):
        total = sum(counts_row)
        if total:
            assert sum(props_row) == pytest.approx(1.0)
            for c, p in zip(counts_row, props_row):
                assert p == pytest.approx(c / total)


def test_confusion_tsv_rows():
    matrix = confusion([F({"NA"})], [F()])
    rows = matrix.as_tsv_rows()
    assert rows[0][0] == "observed\\predicted"
    assert ("#proportions", *[""] * len(CONFUSION_CLASSES)) in rows


# --- aggregation ---------------------------------------------------------------------


def test_mean_std_oracle():
    values = [0.61, 0.64, 0.59, 0.66]
    mean, std = mean_std(values)
    assert mean == pytest.approx(statistics.fmean(values))
    assert std == pytest.approx(statistics.stdev(values))  # sample std


def test_mean_std_single_value():
    assert mean_std([0.5]) == (0.5, 0.0)


def test_mean_std_empty_rejected():
    with pytest.raises(ValueError):
        mean_std([])


def test_aggregate_runs(taxonomy):
    gold = [F({"NA"}), F({"IN"})]
    reports = [
        evaluate(gold, [F({"NA"}), F({"IN"})], taxonomy),
        evaluate(gold, [F({"NA"}), F()], taxonomy),
    ]
    agg = aggregate_runs(reports)
    assert agg.n_runs == 2
    f1s = [r.micro_f1 for r in reports]
    assert agg.mean("micro_f1") == pytest.approx(statistics.fmean(f1s))
    assert agg.std("micro_f1") == pytest.approx(statistics.stdev(f1s))
    rows = agg.as_tsv_rows()
    assert rows[0] == ("metric", "mean", "std", "n")


def test_write_tsv(tmp_path):
    path = tmp_path / "out.tsv"
    write_tsv(path, [("a", "b"), ("1", "2")])
    assert path.read_text() == "a\tb\n1\t2\n"
