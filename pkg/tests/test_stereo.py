import math

import numpy as np
import pytest

from qstereo.imaging import DisparityMap
from qstereo.mrf import energy
from qstereo.onehot import encode_one_hot
from qstereo.solve import solve_chain_dp, solve_exhaustive
from qstereo.onehot import decode
from qstereo.stereo import (
    LevelConfig,
    RectifierConfig,
    SolverConfig,
    build_bundle_mrf,
    candidates_at_level,
    config_from_dict,
    config_hash,
    config_to_dict,
    data_term,
    load_config,
    middlebury_config,
    save_config,
    sintel_config,
    smoothness_term,
    stereo_match,
    with_overrides,
)

from conftest import shifted_pair


class TestDataTerm:
    def test_perfect_match(self):
        il = np.array([[0.3, 0.7]])
        ir = np.array([[0.3, 0.7]])
        assert data_term(il, ir, 1, 0, 0) == 0.0

    def test_squared_difference(self):
        il = np.full((1, 3), 0.8)
        ir = np.full((1, 3), 0.5)
        assert data_term(il, ir, 2, 0, 1) == pytest.approx(0.09)

    def test_out_of_range_penalty(self):
        il = np.ones((1, 3))
        ir = np.ones((1, 3))
        assert data_term(il, ir, 0, 0, 1) == 1.0


class TestSmoothnessTerm:
    IL = np.array([[0.5, 0.6], [0.5, 0.7]])

    def test_equal_disparities_cost_nothing(self):
        for tau in (0.0, 0.15):
            assert smoothness_term(self.IL, (0, 0), (1, 0), 3, 3, tau, 10, 0.0015, 0.0005) == 0.0

    def test_truncation_at_m(self):
        v = smoothness_term(self.IL, (0, 0), (1, 0), 0, 3, 0.15, 10, 0.0015, 0.0005)
        assert v == pytest.approx(0.0015)  # min(m, 3s) hits the cap

    def test_edge_divides_by_q(self):
        v = smoothness_term(self.IL, (0, 1), (1, 1), 0, 3, 0.15, 10, 0.0015, 0.0005)
        assert v == pytest.approx(0.00015)  # |0.5 - 0.7| > tau

    def test_untruncated_final_level(self):
        v = smoothness_term(self.IL, (0, 0), (1, 0), 0, 7, 0.15, 10, math.inf, 0.0005)
        assert v == pytest.approx(0.0035)


class TestCandidates:
    def cfg(self):
        return middlebury_config()

    def test_first_level_full_range(self):
        cand = candidates_at_level(0, None, self.cfg(), width=30, height=4)
        assert cand.shape == (4, 30, 6)
        assert np.array_equal(cand[2, 17], np.arange(6))

    def test_window_centers_on_doubled_estimate(self):
        # previous level (factor 1/2) estimated 3 level-units = 6 full-res
        prev = DisparityMap.full(np.full((8, 40), 6.0))
        cand = candidates_at_level(2, prev, self.cfg(), width=40, height=8)
        assert np.array_equal(cand[3, 20], np.array([5, 6, 7, 8]))

    def test_window_clamps_at_zero(self):
        prev = DisparityMap.full(np.zeros((8, 40)))
        cand = candidates_at_level(2, prev, self.cfg(), width=40, height=8)
        assert np.array_equal(cand[0, 0], np.array([0, 1, 2, 3]))

    def test_window_clamps_at_width(self):
        prev = DisparityMap.full(np.full((4, 10), 9.0))
        cand = candidates_at_level(2, prev, self.cfg(), width=10, height=4)
        assert np.array_equal(cand[0, 0], np.array([6, 7, 8, 9]))

    def test_candidates_strictly_increasing_and_in_range(self):
        rng = np.random.default_rng(0)
        prev = DisparityMap.full(rng.uniform(0, 12, size=(16, 32)))
        cand = candidates_at_level(1, prev, self.cfg(), width=16, height=8)
        assert np.all(np.diff(cand, axis=2) > 0)
        assert cand.min() >= 0 and cand.max() <= 15

    def test_missing_prev_estimate(self):
        with pytest.raises(ValueError):
            candidates_at_level(1, None, self.cfg(), width=16, height=8)
        with pytest.raises(ValueError):
            candidates_at_level(0, DisparityMap.full(np.zeros((2, 2))), self.cfg(), 16, 8)

    def test_width_too_small(self):
        with pytest.raises(ValueError):
            candidates_at_level(0, None, self.cfg(), width=4, height=2)


class TestBundleMrf:
    def test_single_row_is_a_path(self):
        rng = np.random.default_rng(1)
        il = rng.random((1, 20))
        ir = rng.random((1, 20))
        cand = np.broadcast_to(np.arange(4), (1, 20, 4)).copy()
        m = build_bundle_mrf(il, ir, (0, 1), cand, middlebury_config().levels[1])
        assert m.num_vertices == 20
        assert m.num_edges == 19
        assert m.edges == tuple((i, i + 1) for i in range(19))

    def test_two_row_bundle_has_vertical_edges(self):
        rng = np.random.default_rng(2)
        il = rng.random((2, 5))
        ir = rng.random((2, 5))
        cand = np.broadcast_to(np.arange(4), (2, 5, 4)).copy()
        m = build_bundle_mrf(il, ir, (0, 2), cand, middlebury_config().levels[1])
        assert m.num_vertices == 10
        assert m.num_edges == 2 * 4 + 5

    def test_unaries_are_data_terms(self):
        rng = np.random.default_rng(3)
        il = rng.random((1, 8))
        ir = rng.random((1, 8))
        cand = np.broadcast_to(np.arange(4), (1, 8, 4)).copy()
        m = build_bundle_mrf(il, ir, (0, 1), cand, middlebury_config().levels[1])
        for i in range(8):
            for k in range(4):
                assert m.unary[i][k] == data_term(il, ir, i, 0, k)

    def test_toy_constant_shift_recovered_by_dp(self):
        rng = np.random.default_rng(4)
        row = rng.random(14)
        il = row[None, :12]
        ir = row[None, 2:]  # IR(i - 2) == IL(i)
        cand = np.broadcast_to(np.arange(4), (1, 12, 4)).copy()
        m = build_bundle_mrf(il, ir, (0, 1), cand, middlebury_config().levels[1])
        lab, _ = solve_chain_dp(m)
        assert np.all(lab[2:] == 2)

    def test_qubo_route_matches_dp_on_short_lines(self):
        level = middlebury_config().levels[1]
        for seed in range(10):
            rng = np.random.default_rng(seed)
            il = rng.random((1, 4))
            ir = rng.random((1, 4))
            cand = np.broadcast_to(np.arange(4), (1, 4, 4)).copy()
            m = build_bundle_mrf(il, ir, (0, 1), cand, level)
            _, e_dp = solve_chain_dp(m)
            q = encode_one_hot(m, t=1.0)
            res = solve_exhaustive(q)
            lab, _ = decode(q, res.best_x)
            assert energy(m, lab) == pytest.approx(e_dp, abs=1e-9)
            assert res.best_energy + q.offset == pytest.approx(e_dp, abs=1e-9)


class TestConfig:
    def test_middlebury_defaults(self):
        cfg = middlebury_config().validate()
        assert [lv.factor for lv in cfg.levels] == [0.25, 0.5, 1.0]
        assert [lv.labels for lv in cfg.levels] == [6, 4, 4]
        assert [lv.tau for lv in cfg.levels] == [0.15, 0.15, 0.3]
        assert [lv.s for lv in cfg.levels] == [0.0005, 0.0003, 0.0005]
        assert cfg.levels[0].m == 0.0015 and math.isinf(cfg.levels[2].m)
        assert (cfg.bilateral_diameter, cfg.bilateral_sigma_color) == (12, 75.0)

    def test_sintel_defaults(self):
        cfg = sintel_config().validate()
        assert len(cfg.levels) == 6
        assert cfg.levels[0].factor == 1 / 32
        assert [lv.labels for lv in cfg.levels] == [6, 6, 6, 4, 4, 4]
        assert [lv.median_window for lv in cfg.levels] == [3, 3, 3, 3, 3, 7]

    def test_json_round_trip_including_infinity(self, tmp_path):
        cfg = middlebury_config()
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        back = load_config(path)
        assert config_to_dict(back) == config_to_dict(cfg)
        assert math.isinf(back.levels[2].m)

    def test_hash_stable_and_sensitive(self):
        a = middlebury_config()
        b = middlebury_config()
        assert config_hash(a) == config_hash(b)
        b.levels[0].tau = 0.2
        assert config_hash(a) != config_hash(b)

    def test_validation_rejects_bad_configs(self):
        cfg = middlebury_config()
        cfg.levels = list(reversed(cfg.levels))
        with pytest.raises(ValueError):
            cfg.validate()
        cfg = middlebury_config()
        cfg.levels[0].labels = 1
        with pytest.raises(ValueError):
            cfg.validate()
        cfg = middlebury_config()
        cfg.solver.name = "gurobi"
        with pytest.raises(ValueError):
            cfg.validate()

    def test_config_from_dict_defaults(self):
        data = {"levels": [{"factor": 1.0, "labels": 4, "tau": 0.3, "q": 10,
                            "m": "inf", "s": 0.0005}]}
        cfg = config_from_dict(data)
        assert cfg.bundle_height == 1
        assert math.isinf(cfg.levels[0].m)


class TestPipeline:
    def test_identical_pair_gives_zero_disparity(self):
        rng = np.random.default_rng(3)
        img = rng.random((40, 72))
        res = stereo_match(img, img, middlebury_config())
        assert np.all(res.disparity.values == 0.0)
        assert res.disparity.valid.all()

    def test_uniform_shift_recovered(self):
        il, ir = shifted_pair(7, width=96, height=48, shift=8)
        res = stereo_match(il, ir, middlebury_config())
        d = res.disparity.values
        # columns left of the shift have no valid correspondence; the
        # bilateral pass additionally blends over its disk radius
        margin = 8 + 6
        assert np.all(d[:, margin:] == 8.0)
        assert (d == 8.0).mean() > 0.8

    def test_uniform_shift_exact_outside_occlusion_without_bilateral(self):
        il, ir = shifted_pair(7, width=96, height=48, shift=8)
        cfg = with_overrides(middlebury_config(), bilateral_filtering=False)
        res = stereo_match(il, ir, cfg)
        assert np.all(res.disparity.values[:, 8:] == 8.0)

    def test_bundle_energies_logged_per_level(self):
        il, ir = shifted_pair(1, width=48, height=12, shift=4)
        res = stereo_match(il, ir, middlebury_config())
        heights = [3, 6, 12]
        assert [len(e) for e in res.bundle_energies] == heights
        assert all(np.isfinite(e) for level in res.bundle_energies for e in level)

    def test_jobs_do_not_change_results(self):
        il, ir = shifted_pair(5, width=64, height=16, shift=4)
        a = stereo_match(il, ir, middlebury_config(), jobs=1)
        b = stereo_match(il, ir, middlebury_config(), jobs=3)
        assert np.array_equal(a.disparity.values, b.disparity.values)
        assert a.bundle_energies == b.bundle_energies

    def test_sa_route_runs_and_matches_scale(self):
        il, ir = shifted_pair(11, width=32, height=8, shift=4)
        cfg = middlebury_config()
        cfg.solver = SolverConfig(name="sa", reads=20, sweeps=150, seed=1)
        cfg.rectifier = RectifierConfig(t=1.0)
        res = stereo_match(il, ir, cfg)
        assert res.disparity.values.shape == (8, 32)
        assert res.disparity.values.min() >= 0

    def test_sa_route_deterministic(self):
        il, ir = shifted_pair(11, width=32, height=8, shift=4)
        cfg = middlebury_config()
        cfg.solver = SolverConfig(name="sa", reads=10, sweeps=100, seed=5)
        a = stereo_match(il, ir, cfg)
        b = stereo_match(il, ir, cfg, jobs=2)
        assert np.array_equal(a.disparity.values, b.disparity.values)

    def test_single_level_values_stay_in_candidate_set(self):
        il, ir = shifted_pair(7, width=96, height=48, shift=8)
        cfg = with_overrides(
            middlebury_config(), bilateral_filtering=False, median_filtering=False
        )
        cfg.levels = [LevelConfig(1.0, 6, 0.15, 10.0, 0.0015, 0.0005, 7)]
        res = stereo_match(il, ir, cfg)
        assert set(np.unique(res.disparity.values)) <= set(range(6))

    def test_coarse_level_units_convert_to_full_resolution(self):
        # solving only at quarter resolution must report disparities in
        # full-resolution units, i.e. multiples of 4
        il, ir = shifted_pair(7, width=96, height=48, shift=8)
        cfg = with_overrides(middlebury_config(), bilateral_filtering=False)
        cfg.levels = [cfg.levels[0], LevelConfig(1.0, 4, 0.3, 10.0, math.inf, 0.0005, 7)]
        res = stereo_match(il, ir, cfg)
        assert np.all(res.disparity.values[:, 8:] == 8.0)

    def test_regularizer_off_changes_results(self):
        rng = np.random.default_rng(19)
        il, ir = shifted_pair(19, width=64, height=24, shift=4)
        il = np.clip(il + 0.12 * rng.standard_normal(il.shape), 0, 1)
        base = stereo_match(il, ir, middlebury_config())
        off = stereo_match(il, ir, with_overrides(middlebury_config(), regularizer="off"))
        truth = DisparityMap.full(np.full((24, 64), 4.0))
        from qstereo.metrics import rmse

        assert rmse(off.disparity, truth) >= rmse(base.disparity, truth)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            stereo_match(np.ones((4, 4)), np.ones((4, 5)), middlebury_config())

    def test_multi_row_bundles_solve_with_sa(self):
        il, ir = shifted_pair(13, width=32, height=8, shift=4)
        cfg = middlebury_config()
        cfg.bundle_height = 2
        cfg.solver = SolverConfig(name="sa", reads=10, sweeps=80, seed=0)
        res = stereo_match(il, ir, cfg)
        assert [len(e) for e in res.bundle_energies] == [1, 2, 4]

    def test_failed_bundle_reports_its_id(self):
        from qstereo.errors import StructureError

        il, ir = shifted_pair(13, width=32, height=8, shift=4)
        cfg = middlebury_config()
        cfg.bundle_height = 2  # grid bundles are not paths
        with pytest.raises(StructureError, match="level 0 bundle 0"):
            stereo_match(il, ir, cfg)
