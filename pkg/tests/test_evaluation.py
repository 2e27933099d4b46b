import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonarscat import evaluation
from sonarscat.evaluation import (ProtocolConfig, auc_score, half_splits, plot_data, roc, run_experiment,
                                  write_aucs_csv, write_plot_json, write_roc_csv)


def mann_whitney(scores, labels):
    pos, neg = scores[labels == 1], scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (pos.size * neg.size)


FAST = ProtocolConfig(repeats=4, n_lambdas=20)


class TestHalfSplits:
    def test_four(self):
        for tr, te in half_splits(4, 10, 0):
            assert tr.size == te.size == 2
            assert np.intersect1d(tr, te).size == 0
            assert sorted(np.r_[tr, te]) == [0, 1, 2, 3]

    def test_odd(self):
        tr, te = half_splits(101, 1, 0)[0]
        assert (tr.size, te.size) == (51, 50)

    def test_deterministic(self):
        a, b = half_splits(30, 5, 7), half_splits(30, 5, 7)
        assert all(np.array_equal(x[0], y[0]) for x, y in zip(a, b))
        assert not np.array_equal(a[0][0], half_splits(30, 5, 8)[0][0])

    def test_too_small(self):
        with pytest.raises(ValueError):
            half_splits(3)

    def test_uniform(self):
        counts = np.zeros(10)
        for tr, _ in half_splits(10, 4000, 1):
            counts[tr] += 1
        assert np.allclose(counts / 4000, 0.5, atol=0.03)


class TestRoc:
    def test_perfect(self):
        assert auc_score([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_equal(self):
        r = roc(np.ones(6), [0, 1, 0, 1, 1, 0])
        assert r.auc == 0.5
        assert r.points == [(0.0, 0.0), (1.0, 1.0)]

    def test_reversal(self):
        rng = np.random.default_rng(0)
        s, y = rng.random(50), rng.integers(0, 2, 50)
        assert auc_score(-s, y) == pytest.approx(1 - auc_score(s, y), abs=1e-12)

    def test_random_scores(self):
        rng = np.random.default_rng(1)
        assert 0.45 <= auc_score(rng.random(1000), rng.integers(0, 2, 1000)) <= 0.55

    def test_single_class(self):
        with pytest.raises(ValueError):
            roc([0.1, 0.2], [1, 1])

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 1)), min_size=2, max_size=60))
    def test_matches_mann_whitney(self, pairs):
        s = np.array([p[0] for p in pairs], dtype=float)     # small ints force ties
        y = np.array([p[1] for p in pairs])
        if y.min() == y.max():
            return
        r = roc(s, y)
        assert abs(r.auc - mann_whitney(s, y)) <= 1e-12
        assert np.all(np.diff(r.fpr) >= 0) and np.all(np.diff(r.tpr) >= 0)
        assert r.points[0] == (0.0, 0.0) and r.points[-1] == (1.0, 1.0)
        assert r.thresholds.size == r.fpr.size


class TestExperiment:
    def test_null(self):
        rng = np.random.default_rng(0)
        A, B = rng.standard_normal((40, 6)), rng.standard_normal((40, 6))
        res = run_experiment(A, B, ProtocolConfig(repeats=10, n_lambdas=20))
        assert 0.35 <= res.mean_auc <= 0.65
        assert len(res.aucs) == 10

    def test_shifted(self):
        rng = np.random.default_rng(1)
        A, B = rng.standard_normal((40, 6)), rng.standard_normal((40, 6))
        B[:, 2] += 10.0
        assert run_experiment(A, B, FAST).mean_auc > 0.95

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        A, B = rng.standard_normal((30, 4)), rng.standard_normal((30, 4)) + 0.5
        a, b = run_experiment(A, B, FAST), run_experiment(A, B, FAST)
        assert a.aucs == b.aucs and np.array_equal(a.pooled.fpr, b.pooled.fpr)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            run_experiment(np.ones((4, 2)), np.ones((4, 3)))

    def test_empty(self):
        with pytest.raises(ValueError):
            run_experiment(np.ones((0, 2)), np.ones((4, 2)))

    def test_no_leak(self, monkeypatch):
        # record every matrix the classifier is trained on; none may contain a test row
        rng = np.random.default_rng(3)
        A, B = rng.standard_normal((20, 3)), rng.standard_normal((20, 3)) + 1
        X = np.vstack([A, B])
        seen = []
        real = evaluation.fit_path

        def spy(data, *a, **kw):
            seen.append(data.features.copy())
            return real(data, *a, **kw)

        monkeypatch.setattr(evaluation, "fit_path", spy)
        res = run_experiment(A, B, FAST)
        assert len(res.splits) == 4
        per = len(seen) // len(res.splits)
        for k, (tr, te) in enumerate(res.splits):
            assert np.intersect1d(tr, te).size == 0
            test_rows = {r.tobytes() for r in X[te]}
            for feats in seen[k * per:(k + 1) * per]:
                assert not test_rows & {r.tobytes() for r in feats}

    def test_pooled_concatenates(self):
        rng = np.random.default_rng(4)
        A, B = rng.standard_normal((20, 3)), rng.standard_normal((20, 3)) + 1
        res = run_experiment(A, B, FAST)
        assert res.pooled.fpr.size <= 4 * 20 + 1
        assert 0 <= res.pooled.auc <= 1


class TestExport:
    @pytest.fixture
    def results(self):
        rng = np.random.default_rng(5)
        A, B = rng.standard_normal((20, 3)), rng.standard_normal((20, 3)) + 1
        return {"one": run_experiment(A, B, FAST)}

    def test_files(self, tmp_path, results):
        write_aucs_csv(results, tmp_path / "aucs.csv")
        write_roc_csv(results, tmp_path / "roc.csv")
        write_plot_json(results, tmp_path / "plot.json")
        rows = list(csv.reader(open(tmp_path / "aucs.csv")))
        assert len(rows) == 1 + 4
        roc_rows = list(csv.reader(open(tmp_path / "roc.csv")))
        assert len(roc_rows) == 1 + results["one"].pooled.fpr.size
        plot = json.loads((tmp_path / "plot.json").read_text())
        assert plot == json.loads(json.dumps(plot_data(results)))
        series = plot["series"][0]
        assert series["label"].startswith("one") and len(series["fpr"]) == len(series["tpr"])
