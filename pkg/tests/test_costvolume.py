import numpy as np
import pytest

from splatforge.costvolume import (
    CostVolume,
    build_cost_volume,
    downsample_depth_to_features,
    make_depth_candidates,
    regress_depth_and_confidence,
    regress_depth_feature_res,
    upsample_bilinear4,
    warp_feature_to_view,
)
from splatforge.errors import EmptyNeighborsError, IncompleteGuideError
from splatforge.features import FeatureMap, extract_features
from splatforge.geometry import Intrinsics, Pose
from splatforge.imaging import DepthMap

from bruteforce import brute_force_cost_and_depth
from conftest import random_pose


def normalized_random_features(rng, h, w, c=8):
    raw = rng.normal(size=(h, w, c))
    raw /= np.linalg.norm(raw, axis=2, keepdims=True)
    return FeatureMap(raw.astype(np.float32), normalized=True)


def const_guide(value, h, w):
    return DepthMap(np.full((h, w), value, dtype=np.float32))


@pytest.fixture
def intr_feat():
    return Intrinsics(fx=25.0, fy=25.0, cx=16.0, cy=16.0, width=32, height=32)


class TestCandidates:
    def test_linspace_example(self):
        cand = make_depth_candidates(const_guide(2.0, 2, 2), a=0.25, n_d=5)
        np.testing.assert_allclose(cand.values[:, 0, 0], [1.5, 1.75, 2.0, 2.25, 2.5], atol=1e-12)

    def test_two_endpoint_example(self):
        cand = make_depth_candidates(const_guide(1.0, 1, 1), a=0.5, n_d=2)
        np.testing.assert_allclose(cand.values[:, 0, 0], [0.5, 1.5], atol=1e-12)

    def test_mean_equals_guide(self):
        rng = np.random.default_rng(0)
        guide = DepthMap(rng.uniform(0.5, 5.0, (6, 7)).astype(np.float32))
        cand = make_depth_candidates(guide, a=0.25, n_d=16)
        np.testing.assert_allclose(cand.values.mean(axis=0), guide.data, atol=1e-6)

    def test_endpoints_match_fraction(self):
        rng = np.random.default_rng(1)
        guide = DepthMap(rng.uniform(0.5, 5.0, (4, 4)).astype(np.float32))
        cand = make_depth_candidates(guide, a=0.3, n_d=8)
        g = guide.data.astype(np.float64)
        assert np.abs(cand.values[0] - 0.7 * g).max() < 1e-6
        assert np.abs(cand.values[-1] - 1.3 * g).max() < 1e-6

    def test_sentinel_guide_rejected(self):
        guide = DepthMap(np.array([[2.0, 0.0]], dtype=np.float32))
        with pytest.raises(IncompleteGuideError):
            make_depth_candidates(guide, a=0.25, n_d=4)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            make_depth_candidates(const_guide(1.0, 2, 2), a=0.25, n_d=1)
        with pytest.raises(ValueError):
            make_depth_candidates(const_guide(1.0, 2, 2), a=1.5, n_d=4)


class TestWarp:
    def test_identity_warp_reproduces_source(self, intr_feat):
        rng = np.random.default_rng(2)
        feat = normalized_random_features(rng, 32, 32)
        warped, valid = warp_feature_to_view(
            feat, Pose.identity(), Pose.identity(), intr_feat, 2.0)
        assert valid.data.all()
        assert np.abs(warped.data - feat.data).max() < 1e-5

    def test_identity_warp_random_pose(self, intr_feat):
        rng = np.random.default_rng(3)
        feat = normalized_random_features(rng, 32, 32)
        pose = random_pose(rng)
        warped, valid = warp_feature_to_view(feat, pose, pose, intr_feat, 1.7)
        inner = valid.data[1:-1, 1:-1]
        assert inner.all()  # borders may flicker from roundoff, interior must hold
        assert np.abs(warped.data[1:-1, 1:-1] - feat.data[1:-1, 1:-1]).max() < 1e-5

    def test_translation_disparity_oracle(self, intr_feat):
        # baseline b along +x at plane depth d: uniform shift fx*b/d px
        rng = np.random.default_rng(4)
        feat = normalized_random_features(rng, 32, 32)
        b, d = 0.4, 2.0
        shift = intr_feat.fx * b / d  # 5 px exactly
        assert shift == 5.0
        src_pose = Pose(np.eye(3), np.array([b, 0.0, 0.0]))
        warped, valid = warp_feature_to_view(
            feat, src_pose, Pose.identity(), intr_feat, d)
        np.testing.assert_allclose(
            warped.data[:, 5:], feat.data[:, :-5], atol=1e-5)
        assert valid.data[:, 5:].all()
        assert not valid.data[:, :4].any()

    def test_true_depth_plane_correlates_across_views(self):
        # warped features of a second view, taken at the true plane depth,
        # match the current view's features almost perfectly
        from splatforge.testkit import SyntheticScene, Texture, TexturedPlane, render_ground_truth

        intr = Intrinsics(fx=80.0, fy=80.0, cx=64.0, cy=64.0, width=128, height=128)
        plane = TexturedPlane(2, 2.0, (-4.2, 4.2), (-4.2, 4.2),
                              Texture("checker", (0.25, 0.3, 0.35),
                                      (0.7, 0.65, 0.75), period=0.4))
        scene = SyntheticScene([plane])
        pose_nbr = Pose(np.eye(3), np.array([0.2, 0.0, 0.0]))
        img_cur, _ = render_ground_truth(scene, Pose.identity(), intr)
        img_nbr, _ = render_ground_truth(scene, pose_nbr, intr)
        f_cur, _ = extract_features(img_cur)
        f_nbr, _ = extract_features(img_nbr)

        warped, valid = warp_feature_to_view(
            f_nbr, pose_nbr, Pose.identity(), intr.scaled(0.25), 2.0)
        wd = warped.data.astype(np.float64)
        wd /= np.linalg.norm(wd, axis=2, keepdims=True) + 1e-8
        corr = np.einsum("hwc,hwc->hw", f_cur.data.astype(np.float64), wd)
        assert corr[valid.data].mean() > 0.95

    def test_per_pixel_depth_plane(self, intr_feat):
        # warping with a per-pixel slice equals scalar warps row by row
        rng = np.random.default_rng(5)
        feat = normalized_random_features(rng, 32, 32)
        src_pose = Pose(np.eye(3), np.array([0.2, 0.0, 0.0]))
        depths = np.full((32, 32), 2.0)
        depths[16:] = 3.0
        warped, _ = warp_feature_to_view(feat, src_pose, Pose.identity(), intr_feat, depths)
        top, _ = warp_feature_to_view(feat, src_pose, Pose.identity(), intr_feat, 2.0)
        bot, _ = warp_feature_to_view(feat, src_pose, Pose.identity(), intr_feat, 3.0)
        np.testing.assert_allclose(warped.data[:16], top.data[:16], atol=1e-12)
        np.testing.assert_allclose(warped.data[16:], bot.data[16:], atol=1e-12)


class TestCostVolume:
    def test_empty_neighbors_raise(self, intr_feat):
        rng = np.random.default_rng(6)
        feat = normalized_random_features(rng, 32, 32)
        cand = make_depth_candidates(const_guide(2.0, 32, 32), 0.25, 4)
        with pytest.raises(EmptyNeighborsError):
            build_cost_volume(feat, [], Pose.identity(), intr_feat, cand)

    def test_scores_bounded_by_correlation(self, intr_feat):
        rng = np.random.default_rng(7)
        cur = normalized_random_features(rng, 32, 32)
        nbr = normalized_random_features(rng, 32, 32)
        cand = make_depth_candidates(const_guide(2.0, 32, 32), 0.25, 4)
        vol = build_cost_volume(
            cur, [(Pose(np.eye(3), np.array([0.1, 0, 0])), nbr)],
            Pose.identity(), intr_feat, cand)
        assert vol.scores.max() <= 1.0 + 1e-9
        assert vol.scores.min() >= -1.0 - 1e-9

    def test_self_neighbor_scores_near_one(self, intr_feat):
        # pre-smoothing self-correlation: >= 0.99 wherever the warp landed
        # (borders may flicker invalid from projection roundoff)
        rng = np.random.default_rng(8)
        feat = normalized_random_features(rng, 32, 32)
        cand = make_depth_candidates(const_guide(2.0, 32, 32), 0.25, 4)
        vol = build_cost_volume(
            feat, [(Pose.identity(), feat)], Pose.identity(), intr_feat, cand,
            refine=False)
        scored = vol.scores[vol.scores != 0.0]
        assert scored.size >= 4 * 30 * 30
        assert scored.min() > 0.99

    def test_no_evidence_passes_guide_through(self, intr_feat):
        # neighbor fully behind: every score 0 -> regressed depth = guide,
        # confidence = 1 (full no-op, same as the empty-memory bypass)
        rng = np.random.default_rng(9)
        cur = normalized_random_features(rng, 32, 32)
        nbr = normalized_random_features(rng, 32, 32)
        far_pose = Pose(np.eye(3), np.array([0.0, 0.0, 1e6]))
        cand = make_depth_candidates(const_guide(2.0, 32, 32), 0.25, 5)
        vol = build_cost_volume(cur, [(far_pose, nbr)], Pose.identity(), intr_feat, cand)
        assert np.abs(vol.scores).max() == 0.0
        assert not vol.evidence.any()
        depth_f, conf_f = regress_depth_feature_res(vol, cand, 0.05)
        np.testing.assert_allclose(depth_f, 2.0, atol=1e-9)
        np.testing.assert_array_equal(conf_f, 1.0)

    def test_partial_evidence_boundary(self, intr_feat):
        # a sideways neighbor sees only part of the view: confidence is the
        # softmax max where evidence exists and exactly 1 where it does not
        rng = np.random.default_rng(19)
        cur = normalized_random_features(rng, 32, 32)
        nbr = normalized_random_features(rng, 32, 32)
        side_pose = Pose(np.eye(3), np.array([2.0, 0.0, 0.0]))  # large baseline
        cand = make_depth_candidates(const_guide(2.0, 32, 32), 0.25, 5)
        vol = build_cost_volume(cur, [(side_pose, nbr)], Pose.identity(), intr_feat, cand)
        assert vol.evidence.any() and not vol.evidence.all()
        _, conf_f = regress_depth_feature_res(vol, cand, 0.05)
        np.testing.assert_array_equal(conf_f[~vol.evidence], 1.0)
        assert conf_f[vol.evidence].max() <= 1.0


class TestRegression:
    def _uniform_candidates(self):
        return make_depth_candidates(const_guide(2.0, 4, 4), a=0.5, n_d=3)  # {1,2,3}

    def test_uniform_scores(self):
        cand = self._uniform_candidates()
        vol = CostVolume(np.zeros((3, 4, 4)))
        depth_f, conf_f = regress_depth_feature_res(vol, cand, temperature=1.0)
        np.testing.assert_allclose(depth_f, 2.0, atol=1e-12)
        np.testing.assert_allclose(conf_f, 1.0 / 3.0, atol=1e-12)

    def test_peaked_scores(self):
        cand = self._uniform_candidates()
        scores = np.zeros((3, 4, 4))
        scores[0] = 10.0
        depth_f, _ = regress_depth_feature_res(CostVolume(scores), cand, temperature=1.0)
        assert np.abs(depth_f - 1.0).max() < 1e-3

    def test_convex_combination_inside_guide_band(self):
        rng = np.random.default_rng(10)
        guide = DepthMap(rng.uniform(1.0, 4.0, (8, 8)).astype(np.float32))
        cand = make_depth_candidates(guide, a=0.25, n_d=6)
        vol = CostVolume(rng.normal(size=(6, 8, 8)))
        depth_f, conf_f = regress_depth_feature_res(vol, cand, temperature=0.1)
        g = guide.data.astype(np.float64)
        assert np.all(depth_f >= 0.75 * g - 1e-9)
        assert np.all(depth_f <= 1.25 * g + 1e-9)
        assert np.all((conf_f > 0) & (conf_f <= 1))

    def test_temperature_sharpens_to_argmax(self):
        rng = np.random.default_rng(11)
        guide = DepthMap(rng.uniform(1.0, 4.0, (6, 6)).astype(np.float32))
        cand = make_depth_candidates(guide, a=0.25, n_d=5)
        # random volume with a guaranteed winner margin per pixel
        scores = rng.uniform(0.0, 0.4, size=(5, 6, 6))
        winner = rng.integers(0, 5, size=(6, 6))
        np.put_along_axis(scores, winner[None], 1.0, axis=0)
        vol = CostVolume(scores)
        arg = np.take_along_axis(cand.values, winner[None], axis=0)[0]
        errs = []
        for t in (1.0, 0.1, 0.01):
            depth_f, _ = regress_depth_feature_res(vol, cand, temperature=t)
            errs.append(np.abs(depth_f - arg).max())
        assert errs[2] <= errs[1] <= errs[0]
        assert errs[2] < 1e-3

    def test_full_res_upsample_shape_and_range(self):
        rng = np.random.default_rng(12)
        guide = DepthMap(rng.uniform(1.0, 4.0, (8, 8)).astype(np.float32))
        cand = make_depth_candidates(guide, a=0.25, n_d=4)
        vol = CostVolume(rng.normal(size=(4, 8, 8)))
        depth, conf = regress_depth_and_confidence(vol, cand, temperature=0.05)
        assert depth.data.shape == (32, 32)
        assert conf.shape == (32, 32)
        assert depth.data.min() > 0
        assert conf.min() >= 0 and conf.max() <= 1

    def test_upsample_of_constant_is_constant(self):
        up = upsample_bilinear4(np.full((3, 5), 1.25))
        np.testing.assert_allclose(up, 1.25, atol=1e-12)
        assert up.shape == (12, 20)


class TestBruteForceOracle:
    def test_pipeline_matches_straight_line_reimplementation(self):
        rng = np.random.default_rng(13)
        intr_small = Intrinsics(fx=6.0, fy=6.5, cx=4.0, cy=4.2, width=8, height=8)
        cur = normalized_random_features(rng, 8, 8, c=4)
        neighbors = []
        for k in range(2):
            jitter = Pose(np.eye(3), rng.uniform(-0.15, 0.15, 3))
            neighbors.append((jitter, normalized_random_features(rng, 8, 8, c=4)))
        guide = DepthMap(rng.uniform(1.5, 2.5, (8, 8)).astype(np.float32))
        cand = make_depth_candidates(guide, a=0.25, n_d=4)
        temperature = 0.07

        vol = build_cost_volume(cur, neighbors, Pose.identity(), intr_small, cand)
        depth_f, conf_f = regress_depth_feature_res(vol, cand, temperature)

        ref_scores, ref_depth, ref_conf = brute_force_cost_and_depth(
            cur.data, [(p, f.data) for p, f in neighbors], Pose.identity(),
            intr_small, cand.values, temperature)

        assert np.abs(vol.scores - ref_scores).max() < 1e-6
        assert np.abs(depth_f - ref_depth).max() < 1e-6
        assert np.abs(conf_f - ref_conf).max() < 1e-6


class TestGuideDownsample:
    def test_box_average(self):
        rng = np.random.default_rng(14)
        depth = DepthMap(rng.uniform(1.0, 3.0, (16, 16)).astype(np.float32))
        quarter = downsample_depth_to_features(depth)
        ref = depth.data.astype(np.float64).reshape(4, 4, 4, 4).mean(axis=(1, 3))
        np.testing.assert_allclose(quarter.data, ref, atol=1e-6)

    def test_rejects_sentinels(self):
        d = np.ones((8, 8), dtype=np.float32)
        d[3, 3] = 0.0
        with pytest.raises(IncompleteGuideError):
            downsample_depth_to_features(DepthMap(d))
