import math

import numpy as np
import pytest

from qstereo.errors import UndefinedStatisticError
from qstereo.imaging import DisparityMap
from qstereo.metrics import bpp, dump_metrics, graph_stats, metrics_record, rmse
from qstereo.onehot import QuboInstance, encode_one_hot
from qstereo.stereo import build_bundle_mrf, middlebury_config


def maps(est_vals, gt_vals, gt_valid=None):
    est = DisparityMap.full(np.asarray(est_vals, dtype=float))
    gt_vals = np.asarray(gt_vals, dtype=float)
    gt = DisparityMap(gt_vals, gt_valid if gt_valid is not None else np.ones_like(gt_vals, bool))
    return est, gt


class TestRmse:
    def test_zero_for_equal(self):
        est, gt = maps(np.arange(6.0).reshape(2, 3), np.arange(6.0).reshape(2, 3))
        assert rmse(est, gt) == 0.0

    def test_constant_offset(self):
        est, gt = maps(np.ones((3, 3)), np.zeros((3, 3)))
        assert rmse(est, gt) == 1.0

    def test_matches_two_pass_reference(self):
        rng = np.random.default_rng(0)
        a = rng.random((10, 10)) * 5
        b = rng.random((10, 10)) * 5
        est, gt = maps(a, b)
        diffs = (a - b).ravel()
        mean = math.fsum(diffs**2) / diffs.size
        assert rmse(est, gt) == pytest.approx(math.sqrt(mean), rel=1e-12)

    def test_respects_valid_mask(self):
        valid = np.array([[True, False], [True, True]])
        est, gt = maps([[1.0, 99.0], [1.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]], valid)
        assert rmse(est, gt) == 0.0

    def test_no_valid_pixels(self):
        est, gt = maps([[1.0]], [[1.0]], np.array([[False]]))
        with pytest.raises(UndefinedStatisticError):
            rmse(est, gt)

    def test_dimension_mismatch(self):
        est = DisparityMap.full(np.zeros((2, 2)))
        gt = DisparityMap.full(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            rmse(est, gt)

    def test_sum_identity(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((6, 6)), rng.random((6, 6))
        est, gt = maps(a, b)
        n = a.size
        assert rmse(est, gt) ** 2 * n == pytest.approx(np.sum((a - b) ** 2), rel=1e-12)


class TestBpp:
    def test_zero_for_equal(self):
        est, gt = maps(np.ones((2, 2)), np.ones((2, 2)))
        assert bpp(est, gt) == 0.0

    def test_strict_inequality_at_threshold(self):
        est, gt = maps(np.full((2, 2), 2.0), np.full((2, 2), 1.0))
        assert bpp(est, gt, delta=1.0) == 0.0

    def test_all_bad(self):
        est, gt = maps(np.full((2, 2), 2.5), np.full((2, 2), 1.0))
        assert bpp(est, gt, delta=1.0) == 100.0

    def test_fraction(self):
        est, gt = maps([[0.0, 3.0], [0.0, 3.0]], np.zeros((2, 2)))
        assert bpp(est, gt) == 50.0


class TestGraphStats:
    def line_qubo(self, length, labels):
        rng = np.random.default_rng(0)
        il = rng.random((1, length))
        ir = rng.random((1, length))
        cand = np.broadcast_to(np.arange(labels), (1, length, labels)).copy()
        cfg = middlebury_config()
        level = cfg.levels[0 if labels == 6 else 1]
        m = build_bundle_mrf(il, ir, (0, 1), cand, level)
        return encode_one_hot(m, t=1.0)

    @pytest.mark.parametrize(
        "length,labels,nodes,edges",
        [(108, 6, 648, 5472), (217, 4, 868, 4758), (434, 4, 1736, 9532)],
    )
    def test_epipolar_line_tables(self, length, labels, nodes, edges):
        stats = graph_stats(self.line_qubo(length, labels))
        assert stats["nodes"] == nodes
        assert stats["edges"] == edges

    def test_closed_form_for_any_line(self):
        for length, labels in [(5, 2), (9, 3), (20, 5)]:
            stats = graph_stats(self.line_qubo(length, labels))
            assert stats["nodes"] == length * labels
            want_edges = length * labels * (labels - 1) // 2
            want_edges += (length - 1) * labels * labels
            assert stats["edges"] == want_edges

    def test_degree_histogram_and_density(self):
        q = QuboInstance(4, {(0, 1): 1.0, (1, 2): 1.0, (3, 3): 1.0})
        stats = graph_stats(q)
        assert stats["nodes"] == 4
        assert stats["edges"] == 2
        assert stats["degree_histogram"] == {0: 1, 1: 2, 2: 1}
        assert stats["density"] == pytest.approx(2 * 2 / (4 * 3))

    def test_isolated_variables_not_counted(self):
        q = QuboInstance(10, {(0, 1): 1.0})
        assert graph_stats(q)["nodes"] == 2


class TestMetricsJson:
    def test_canonical_and_deterministic(self):
        a = dump_metrics(metrics_record(1.5, 12.0, 100, "abc", "chain-dp"))
        b = dump_metrics(metrics_record(1.5, 12.0, 100, "abc", "chain-dp"))
        assert a == b
        assert a.endswith("\n")
        record = metrics_record(1.5, 12.0, 100, "abc", "chain-dp", None)
        assert '"elapsed_ms": null' in dump_metrics(record)
