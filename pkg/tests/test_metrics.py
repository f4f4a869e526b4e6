import numpy as np
import pytest

from jointhash.errors import DimensionError
from jointhash.index import CodeTable, radius_search
from jointhash.metrics import (
    RelevanceList,
    average_precision,
    evaluate,
    mean_average_precision,
    overall_accuracy,
    precision_at_k,
    precision_recall_curve,
    recall_at_k,
    write_curve_csvs,
    write_report_json,
)
from jointhash.model import pack_codes


def oracle_average_precision(flags):
    """Oracle: the MAP double sum evaluated literally for one query.

    (1/n_i) * sum over relevant ranks j of P(i, j), with P the precision of
    the top-j list.
    """
    flags = list(flags)
    n = sum(flags)
    if n == 0:
        return 0.0
    total = 0.0
    for j in range(1, len(flags) + 1):
        if flags[j - 1]:
            total += sum(flags[:j]) / j
    return total / n


def rel(flags, r=None):
    flags = np.asarray(flags, dtype=bool)
    return RelevanceList(flags, int(flags.sum()) if r is None else r)


class TestAveragePrecision:
    def test_spec_example(self):
        assert abs(average_precision(rel([1, 0, 1])) - 5 / 6) < 1e-12

    def test_all_relevant_prefix(self):
        assert average_precision(rel([1, 1, 1])) == 1.0

    def test_single_late_hit(self):
        assert abs(average_precision(rel([0, 0, 1])) - 1 / 3) < 1e-12

    def test_zero_relevant_defined_as_zero(self):
        assert average_precision(rel([0, 0, 0])) == 0.0

    def test_matches_double_sum_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            flags = rng.random(int(rng.integers(1, 30))) < 0.4
            assert abs(average_precision(rel(flags))
                       - oracle_average_precision(flags)) < 1e-12

    def test_irrelevant_tail_permutation_invariant(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            flags = (rng.random(20) < 0.3).astype(int).tolist()
            if not any(flags):
                flags[3] = 1
            last = max(i for i, f in enumerate(flags) if f)
            tail = flags[last + 1:]
            rng.shuffle(tail)
            assert average_precision(rel(flags)) == pytest.approx(
                average_precision(rel(flags[:last + 1] + tail)), abs=1e-15
            )


class TestMeanAveragePrecision:
    def test_single_query(self):
        q = rel([1, 0, 1])
        assert mean_average_precision([q]) == average_precision(q)

    def test_two_queries(self):
        assert mean_average_precision([rel([1, 1]), rel([0, 1])]) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_average_precision([])

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            queries = [rel(rng.random(int(rng.integers(1, 15))) < 0.5)
                       for _ in range(int(rng.integers(1, 8)))]
            expected = np.mean([oracle_average_precision(q.flags)
                                for q in queries])
            assert abs(mean_average_precision(queries) - expected) < 1e-12


class TestPrecisionRecallAtK:
    def test_precision_example(self):
        assert precision_at_k(rel([1, 0, 1, 1, 0]), 5) == 0.6

    def test_precision_first_hit(self):
        assert precision_at_k(rel([1, 0]), 1) == 1.0

    def test_recall_example(self):
        assert recall_at_k(rel([1, 1, 1, 0, 0], r=4), 5) == 0.75

    def test_recall_reaches_one_full_depth(self):
        flags = [0, 1, 0, 1, 1]
        assert recall_at_k(rel(flags), len(flags)) == 1.0

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(2, 25))
            flags = rng.random(n) < 0.4
            r = int(flags.sum()) + int(rng.integers(0, 3))
            k = int(rng.integers(1, n + 1))
            hits = int(sum(flags[:k]))
            assert precision_at_k(rel(flags, r or 1), k) == hits / k
            if r >= 1:
                assert recall_at_k(rel(flags, r), k) == hits / r

    def test_recall_monotone_in_k(self):
        flags = rel([0, 1, 0, 0, 1, 1, 0])
        values = [recall_at_k(flags, k) for k in range(1, 8)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_bounds(self):
        with pytest.raises(ValueError):
            precision_at_k(rel([1, 0]), 3)
        with pytest.raises(ValueError):
            recall_at_k(rel([0, 0], r=0), 1)


def build_table(signs, labels):
    return CodeTable(
        codes=np.atleast_2d(pack_codes(signs)),
        ids=np.arange(len(labels)),
        labels=np.asarray(labels),
        predicted=np.asarray(labels),
        code_bits=signs.shape[1],
    )


class TestPrecisionRecallCurve:
    def test_final_radius_covers_database(self):
        rng = np.random.default_rng(4)
        k = 8
        signs = np.where(rng.random((30, k)) > 0.5, 1, -1)
        labels = rng.integers(0, 3, 30)
        table = build_table(signs, labels)
        query = pack_codes(np.where(rng.random(k) > 0.5, 1, -1))
        curve = precision_recall_curve(query, table, query_label=1)
        r = int((labels == 1).sum())
        assert curve.precision[k] == pytest.approx(r / 30)
        assert curve.recall[k] == 1.0

    def test_radius_zero_single_match(self):
        signs = np.array([[1, 1], [1, -1], [-1, -1]])
        labels = np.array([0, 0, 1])
        table = build_table(signs, labels)
        curve = precision_recall_curve(pack_codes(np.array([1, 1])), table,
                                       query_label=0)
        assert curve.precision[0] == 1.0
        assert curve.recall[0] == 0.5  # one of two same-class items

    def test_matches_radius_search_oracle(self):
        rng = np.random.default_rng(5)
        k = 10
        signs = np.where(rng.random((40, k)) > 0.5, 1, -1)
        labels = rng.integers(0, 4, 40)
        table = build_table(signs, labels)
        qsigns = np.where(rng.random(k) > 0.5, 1, -1)
        query = pack_codes(qsigns)
        qlabel = 2
        curve = precision_recall_curve(query, table, query_label=qlabel)
        r = int((labels == qlabel).sum())
        for t in range(k + 1):
            ids = radius_search(query, table, t)
            hits = sum(1 for i in ids if labels[i] == qlabel)
            if ids:
                assert curve.precision[t] == pytest.approx(hits / len(ids))
            else:
                assert curve.precision[t] == 1.0 and curve.vacuous[t]
            assert curve.recall[t] == pytest.approx(hits / r)

    def test_recall_non_decreasing(self):
        rng = np.random.default_rng(6)
        signs = np.where(rng.random((25, 6)) > 0.5, 1, -1)
        table = build_table(signs, rng.integers(0, 2, 25))
        curve = precision_recall_curve(
            pack_codes(np.where(rng.random(6) > 0.5, 1, -1)), table, 0)
        assert np.all(np.diff(curve.recall) >= 0)


class TestOverallAccuracy:
    def test_all_correct(self):
        assert overall_accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_none_correct(self):
        assert overall_accuracy([1, 1], [0, 2]) == 0.0

    def test_half(self):
        assert overall_accuracy([0] * 5 + [1] * 5, [0] * 10) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            overall_accuracy([1], [1, 2])


class TestEvaluate:
    def test_hand_built_five_item_table(self):
        # query code 11; distances: 0,0,1,2,2 -> ranked ids 0,1,2,3,4
        signs = np.array([[1, 1], [1, 1], [1, -1], [-1, -1], [-1, -1]])
        labels = np.array([0, 1, 0, 0, 1])
        table = build_table(signs, labels)
        query = pack_codes(np.array([1, 1]))
        report = evaluate(table, query, np.array([0]),
                          query_predicted=np.array([0]))
        # relevance flags in ranked order: 1,0,1,1,0 ; AP = (1 + 2/3 + 3/4)/3
        assert report.map == pytest.approx((1 + 2 / 3 + 3 / 4) / 3)
        assert report.precision_at.tolist() == pytest.approx(
            [1.0, 0.5, 2 / 3, 0.75, 0.6])
        assert report.recall_at.tolist() == pytest.approx(
            [1 / 3, 1 / 3, 2 / 3, 1.0, 1.0])
        assert report.oa == 1.0

    def test_leave_one_out_exclusion(self):
        signs = np.array([[1, 1], [1, -1], [-1, -1]])
        labels = np.array([0, 0, 1])
        table = build_table(signs, labels)
        query = pack_codes(np.array([1, 1]))
        full = evaluate(table, query, np.array([0]))
        loo = evaluate(table, query, np.array([0]),
                       exclude_ids=np.array([0]))
        # with itself excluded the only same-class item sits at rank 1
        assert loo.map == 1.0
        assert full.map == pytest.approx((1 + 1) / 2)

    def test_zero_relevant_counted(self):
        signs = np.array([[1, 1], [1, -1]])
        table = build_table(signs, np.array([0, 0]))
        report = evaluate(table, pack_codes(np.array([1, 1])), np.array([5]))
        assert report.map == 0.0
        assert report.zero_relevant_queries == 1

    def test_report_files(self, tmp_path):
        rng = np.random.default_rng(7)
        signs = np.where(rng.random((12, 4)) > 0.5, 1, -1)
        labels = rng.integers(0, 3, 12)
        table = build_table(signs, labels)
        qsigns = np.where(rng.random((3, 4)) > 0.5, 1, -1)
        report = evaluate(table, np.atleast_2d(pack_codes(qsigns)),
                          labels[:3], query_predicted=labels[:3])
        write_report_json(report, tmp_path / "report.json")
        write_curve_csvs(report, tmp_path)
        import csv
        import json

        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["map"] == pytest.approx(report.map)
        assert doc["oa"] == 1.0
        with open(tmp_path / "curve_radius.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 5  # radius 0..4
        recalls = [float(r["recall"]) for r in rows]
        assert recalls == sorted(recalls)
        with open(tmp_path / "curve_topk.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 12

    def test_all_metrics_within_unit_interval(self):
        rng = np.random.default_rng(8)
        signs = np.where(rng.random((20, 6)) > 0.5, 1, -1)
        labels = rng.integers(0, 2, 20)
        table = build_table(signs, labels)
        qsigns = np.where(rng.random((5, 6)) > 0.5, 1, -1)
        report = evaluate(table, np.atleast_2d(pack_codes(qsigns)),
                          rng.integers(0, 2, 5))
        for arr in (report.precision_at, report.recall_at,
                    report.pr_precision, report.pr_recall):
            assert np.all(arr >= 0) and np.all(arr <= 1)
        assert 0 <= report.map <= 1
