"""Explanation interface: learned selector plus the two gradient baselines."""

from __future__ import annotations

import numpy as np
import pytest

from l2x import autodiff as ad
from l2x import explain as ex
from l2x.networks import Classifier, MlpSpec, build_classifier, build_explainer, init_params


def linear_classifier(w):
    """Net that is exactly linear on |x| < 1000: logits = x @ w.

    The hidden layer forwards x + 1000 through an always-active relu and
    the output bias cancels the shift, so input gradients equal w.
    """
    w = np.asarray(w, dtype=np.float64)
    d, c = w.shape
    spec = MlpSpec((d, d, c), head="softmax")
    params = init_params(spec, np.random.default_rng(0))
    params["w0"].data[...] = np.eye(d)
    params["b0"].data[...] = 1000.0
    params["w1"].data[...] = w
    params["b1"].data[...] = -1000.0 * w.sum(axis=0)
    return Classifier(spec, params)


class TestExplainL2x:
    def test_selects_top_scores(self):
        rng = np.random.default_rng(0)
        explainer = build_explainer(6, rng, hidden=(8, 8))
        x = rng.normal(size=6)
        e = ex.explain_l2x(explainer, x, k=2, sample_id=7)
        assert e.sample_id == 7 and e.method == "l2x"
        assert len(e.selected) == 2
        order = np.argsort(-e.scores, kind="stable")
        assert set(e.selected) == set(int(i) for i in order[:2])

    def test_k_equals_d_selects_everything(self):
        explainer = build_explainer(5, np.random.default_rng(1), hidden=(6, 6))
        e = ex.explain_l2x(explainer, np.ones(5), k=5)
        assert e.selected == (0, 1, 2, 3, 4)

    def test_k_out_of_range_rejected(self):
        explainer = build_explainer(4, np.random.default_rng(2), hidden=(5, 5))
        with pytest.raises(ValueError, match="k must"):
            ex.explain_l2x(explainer, np.ones(4), k=5)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        explainer = build_explainer(6, rng, hidden=(8, 8))
        x = rng.normal(size=6)
        a = ex.explain_l2x(explainer, x, k=3)
        b = ex.explain_l2x(explainer, x, k=3)
        np.testing.assert_array_equal(a.scores, b.scores)
        assert a.selected == b.selected

    def test_zero_classifier_evaluations(self):
        rng = np.random.default_rng(4)
        clf = build_classifier(6, 2, rng, hidden=(8, 8, 8))
        explainer = build_explainer(6, rng, hidden=(8, 8))
        clf.reset_eval_count()
        for _ in range(20):
            ex.explain_l2x(explainer, rng.normal(size=6), k=2)
        assert clf.eval_count == 0

    def test_under_one_millisecond_per_sample(self):
        rng = np.random.default_rng(5)
        explainer = build_explainer(10, rng, hidden=(200, 200))
        xs = rng.normal(size=(200, 10))
        walls = [ex.explain_l2x(explainer, x, k=4).wall_ns for x in xs]
        assert np.median(walls) < 1_000_000


class TestExplainSaliency:
    def test_linear_model_recovers_weight_magnitudes(self):
        w = np.array([[2.0, -2.0], [-0.5, 0.5], [3.0, -3.0], [0.0, 0.0]])
        clf = linear_classifier(w)
        x = np.array([0.1, 0.2, 0.3, 0.4])
        e = ex.explain_saliency(clf, x, k=2)
        cls = int(np.argmax(clf.predict_proba(x)))
        np.testing.assert_allclose(e.scores, np.abs(w[:, cls]), atol=1e-12)
        assert e.selected == (0, 2)
        assert e.method == "saliency"

    def test_ignored_feature_scores_zero(self):
        w = np.array([[1.0, -1.0], [0.0, 0.0]])
        clf = linear_classifier(w)
        e = ex.explain_saliency(clf, np.array([5.0, 123.0]), k=1)
        assert e.scores[1] == 0.0
        assert e.selected == (0,)

    def test_counts_classifier_evaluations(self):
        clf = build_classifier(4, 2, np.random.default_rng(6), hidden=(5, 5, 5))
        clf.reset_eval_count()
        ex.explain_saliency(clf, np.ones(4), k=1)
        assert clf.eval_count >= 1

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        clf = build_classifier(5, 3, rng, hidden=(8, 8, 8))
        x = rng.normal(size=5)
        e = ex.explain_saliency(clf, x, k=2)
        cls = int(np.argmax(clf.predict_proba(x)))

        def logit(v):
            h = v[None, :]
            n = len(clf.spec.layer_widths) - 1
            for i in range(n):
                z = h @ clf.params[f"w{i}"].data + clf.params[f"b{i}"].data
                h = z * (z > 0) if i < n - 1 else z
            return h[0, cls]

        step = 1e-6
        for i in range(5):
            up, down = x.copy(), x.copy()
            up[i] += step
            down[i] -= step
            numeric = (logit(up) - logit(down)) / (2 * step)
            assert abs(abs(numeric) - e.scores[i]) < 1e-5 * (1 + abs(numeric))


class TestExplainTaylor:
    def test_linear_model_gives_signed_products(self):
        w = np.array([[2.0, -2.0], [-1.0, 1.0], [0.5, -0.5]])
        clf = linear_classifier(w)
        x = np.array([1.0, -2.0, 4.0])
        e = ex.explain_taylor(clf, x, k=2)
        cls = int(np.argmax(clf.predict_proba(x)))
        np.testing.assert_allclose(e.scores, x * w[:, cls], atol=1e-12)
        assert e.method == "taylor"

    def test_absolute_variant(self):
        w = np.array([[2.0, -2.0], [-1.0, 1.0], [0.5, -0.5]])
        clf = linear_classifier(w)
        x = np.array([1.0, -2.0, 4.0])
        signed = ex.explain_taylor(clf, x, k=2)
        unsigned = ex.explain_taylor(clf, x, k=2, absolute=True)
        np.testing.assert_allclose(unsigned.scores, np.abs(signed.scores))
        assert unsigned.method == "taylor-abs"

    def test_zero_input_ties_break_to_lowest_indices(self):
        clf = build_classifier(6, 2, np.random.default_rng(8), hidden=(5, 5, 5))
        e = ex.explain_taylor(clf, np.zeros(6), k=3)
        np.testing.assert_array_equal(e.scores, np.zeros(6))
        assert e.selected == (0, 1, 2)

    def test_selected_always_k_distinct_in_range(self):
        rng = np.random.default_rng(9)
        clf = build_classifier(7, 2, rng, hidden=(6, 6, 6))
        explainer = build_explainer(7, rng, hidden=(6, 6))
        for k in (1, 3, 7):
            x = rng.normal(size=7)
            for e in (
                ex.explain_l2x(explainer, x, k),
                ex.explain_saliency(clf, x, k),
                ex.explain_taylor(clf, x, k),
            ):
                assert len(e.selected) == k == len(set(e.selected))
                assert all(0 <= i < 7 for i in e.selected)


class TestJsonl:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        explainer = build_explainer(4, rng, hidden=(5, 5))
        items = [ex.explain_l2x(explainer, rng.normal(size=4), 2, sample_id=i) for i in range(5)]
        path = tmp_path / "explanations.jsonl"
        ex.write_jsonl(items, path)
        back = ex.read_jsonl(path)
        assert len(back) == 5
        for a, b in zip(items, back):
            assert a.sample_id == b.sample_id
            assert a.method == b.method
            assert a.selected == b.selected
            np.testing.assert_array_equal(a.scores, b.scores)
            assert a.wall_ns == b.wall_ns

    def test_record_schema(self, tmp_path):
        import json

        explainer = build_explainer(3, np.random.default_rng(11), hidden=(4, 4))
        path = tmp_path / "one.jsonl"
        ex.write_jsonl([ex.explain_l2x(explainer, np.ones(3), 2, sample_id=9)], path)
        record = json.loads(path.read_text().strip())
        assert list(record) == ["id", "method", "scores", "selected", "ns"]
        assert record["id"] == 9 and len(record["scores"]) == 3 and len(record["selected"]) == 2
