import numpy as np
import pytest

from conftest import make_pose
from oracles import mlp_oracle
from posesynth.body_model import PoseParams
from posesynth.errors import LoadError, ShapeError, ValidationError
from posesynth.pose_prior import (AugmentationConfig, PosePriorVAE,
                                  augment_pose, decode, difficulty_score,
                                  encode, encode_features, features_to_pose,
                                  is_hard_pose, load_pose_prior,
                                  pose_to_features, save_pose_prior)

# frozen via the nested-loop oracle on the shipped toy checkpoint
REF_POSE = [[0.3, -0.2, 0.5], [-0.4, 0.1, 0.2]]
REF_MU = [-2.3750492954144216, -4.665017065827373, -1.9753730134187075,
          4.836199368677827, -3.074126352695446, 1.0313865825538269,
          0.04106502774420828, 2.259938532722942]
REF_SIGMA = [1.1367014135236306, 1.221169832068621, 1.1654689685250077,
             0.8697060562535603, 1.0685765587542695, 1.252531911673874,
             1.1388828820258934, 0.8523988252906134]
REF_DECODE_OF_MU = [0.03012708090887747, 0.0820319922771171,
                    -0.30986706571089245, -0.11213411567573442,
                    -0.04387734295708507, 0.16516568435537177]


def single_identity_vae():
    """One identity encoder layer, L=1: input (a, b) -> mu=a, sigma=e^b."""
    enc = ((np.eye(2), np.zeros(2), "identity"),)
    dec = ((np.ones((3, 1)), np.zeros(3), "identity"),)
    return PosePriorVAE(enc, dec, latent_dim=1)


class TestEncode:
    def test_zero_weights_collapse_to_bias(self):
        b = np.array([0.7, -0.3, 0.2, 1.5])
        enc = ((np.zeros((4, 6)), b, "identity"),)
        dec = ((np.zeros((6, 2)), np.zeros(6), "identity"),)
        vae = PosePriorVAE(enc, dec, latent_dim=2)
        dist = encode(vae, make_pose([[1, 2, 3], [4, 5, 6]]))
        assert np.allclose(dist.mu, [0.7, -0.3], atol=0)
        assert np.allclose(dist.sigma, np.exp([0.2, 1.5]), atol=0)

    def test_single_identity_layer_by_hand(self):
        dist = encode_features(single_identity_vae(), [0.3, -0.1])
        assert np.isclose(dist.mu[0], 0.3, atol=0)
        assert np.isclose(dist.sigma[0], np.exp(-0.1), atol=1e-15)

    def test_toy_checkpoint_matches_oracle(self, toy_vae):
        pose = make_pose(REF_POSE)
        dist = encode(toy_vae, pose)
        oracle = mlp_oracle(toy_vae.encoder_layers,
                            pose.body_pose.reshape(-1))
        assert np.allclose(dist.mu, oracle[:8], atol=1e-9)
        assert np.allclose(dist.sigma, np.exp(oracle[8:]), atol=1e-9)
        # and against the frozen fixture values
        assert np.allclose(dist.mu, REF_MU, atol=1e-9)
        assert np.allclose(dist.sigma, REF_SIGMA, atol=1e-9)

    def test_dim_mismatch(self, toy_vae):
        with pytest.raises(ShapeError):
            encode(toy_vae, make_pose([[1, 2, 3]]))


class TestDecode:
    def test_zero_weights_collapse_to_bias(self):
        enc = ((np.zeros((4, 6)), np.zeros(4), "identity"),)
        dec = ((np.zeros((6, 2)), np.arange(6.0), "identity"),)
        vae = PosePriorVAE(enc, dec, latent_dim=2)
        pose = decode(vae, [9.0, 9.0])
        assert np.allclose(pose.body_pose.reshape(-1), np.arange(6.0), atol=0)

    def test_single_layer_by_hand(self):
        pose = decode(single_identity_vae(), [2.0])
        assert np.allclose(pose.body_pose.reshape(-1), [2.0, 2.0, 2.0], atol=0)

    def test_toy_checkpoint_matches_oracle(self, toy_vae):
        z = np.array(REF_MU)
        pose = decode(toy_vae, z)
        oracle = mlp_oracle(toy_vae.decoder_layers, z)
        assert np.allclose(pose.body_pose.reshape(-1), oracle, atol=1e-9)
        assert np.allclose(pose.body_pose.reshape(-1), REF_DECODE_OF_MU,
                           atol=1e-9)

    def test_wrong_latent_dim(self, toy_vae):
        with pytest.raises(ShapeError):
            decode(toy_vae, np.zeros(5))


class TestDifficulty:
    def test_zero_mu_scores_zero(self, toy_vae):
        assert difficulty_score(toy_vae, PoseParams.zeros(3)) == 0.0

    def test_three_four_five(self):
        enc = ((np.zeros((4, 6)), np.array([3.0, 4.0, 0.0, 0.0]),
                "identity"),)
        dec = ((np.zeros((6, 2)), np.zeros(6), "identity"),)
        vae = PosePriorVAE(enc, dec, latent_dim=2)
        assert difficulty_score(vae, PoseParams.zeros(3)) == 5.0

    def test_mean_mode_ignores_sigma(self):
        for log_sigma in (0.0, 3.0):
            enc = ((np.zeros((4, 6)),
                    np.array([3.0, 4.0, log_sigma, log_sigma]), "identity"),)
            dec = ((np.zeros((6, 2)), np.zeros(6), "identity"),)
            vae = PosePriorVAE(enc, dec, latent_dim=2)
            assert difficulty_score(vae, PoseParams.zeros(3)) == 5.0

    def test_sampled_mode_reproducible(self, toy_vae):
        pose = make_pose(REF_POSE)
        s1 = difficulty_score(toy_vae, pose, np.random.default_rng(42))
        s2 = difficulty_score(toy_vae, pose, np.random.default_rng(42))
        s3 = difficulty_score(toy_vae, pose, np.random.default_rng(43))
        assert s1 == s2
        assert s1 != s3

    def test_gate_strict_inequality(self):
        assert is_hard_pose(31.0, 30.0)
        assert not is_hard_pose(30.0, 30.0)
        assert not is_hard_pose(5.0, 30.0)

    def test_toy_norm_monotone_along_scaling(self, toy_vae):
        # zero hidden biases make the encoder positively homogeneous, so
        # scaling a pose toward extremes scales the embedding norm
        direction = make_pose(REF_POSE)
        scores = []
        for c in np.linspace(0.0, 2.0, 9):
            pose = PoseParams(c * direction.body_pose)
            scores.append(difficulty_score(toy_vae, pose))
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))


class TestAugment:
    def test_scale_zero_mean_mode_is_decode_mu(self, toy_vae):
        pose = make_pose(REF_POSE, global_orient=[0.1, 0.2, 0.3])
        cfg = AugmentationConfig(scale=0.0)
        out = augment_pose(toy_vae, pose, cfg, np.random.default_rng(0),
                           deterministic_mean=True)
        expected = decode(toy_vae, encode(toy_vae, pose).mu)
        assert np.array_equal(out.body_pose, expected.body_pose)
        # global orient is carried through, not modeled
        assert np.array_equal(out.global_orient, pose.global_orient)

    def test_seeded_reproducibility(self, toy_vae):
        pose = make_pose(REF_POSE)
        cfg = AugmentationConfig(scale=0.1)
        a = augment_pose(toy_vae, pose, cfg, np.random.default_rng(5))
        b = augment_pose(toy_vae, pose, cfg, np.random.default_rng(5))
        c = augment_pose(toy_vae, pose, cfg, np.random.default_rng(6))
        assert np.array_equal(a.body_pose, b.body_pose)
        assert not np.array_equal(a.body_pose, c.body_pose)

    def test_eps_override_hand_formula(self, toy_vae):
        pose = make_pose(REF_POSE)
        cfg = AugmentationConfig(scale=0.5)
        out = augment_pose(toy_vae, pose, cfg, np.random.default_rng(0),
                           deterministic_mean=True,
                           eps=np.ones(toy_vae.latent_dim))
        expected = decode(toy_vae, 1.5 * encode(toy_vae, pose).mu)
        assert np.allclose(out.body_pose, expected.body_pose, atol=1e-12)

    def test_negative_scale_rejected(self):
        with pytest.raises(ValidationError):
            AugmentationConfig(scale=-0.1)


class TestCheckpointIO:
    def test_round_trip(self, toy_vae, tmp_path):
        path = tmp_path / "vae.zip"
        save_pose_prior(path, toy_vae)
        loaded = load_pose_prior(path)
        assert loaded.latent_dim == toy_vae.latent_dim
        assert loaded.pose_feature_encoding == "axis_angle"
        pose = make_pose(REF_POSE)
        assert np.array_equal(encode(loaded, pose).mu,
                              encode(toy_vae, pose).mu)

    def test_chained_dims_validated(self):
        enc = ((np.zeros((4, 6)), np.zeros(4), "identity"),
               (np.zeros((4, 5)), np.zeros(4), "identity"))  # 4 -> 5 break
        dec = ((np.zeros((6, 2)), np.zeros(6), "identity"),)
        with pytest.raises(ValidationError, match="input dim"):
            PosePriorVAE(enc, dec, latent_dim=2)

    def test_final_layer_must_be_twice_latent(self):
        enc = ((np.zeros((5, 6)), np.zeros(5), "identity"),)
        dec = ((np.zeros((6, 2)), np.zeros(6), "identity"),)
        with pytest.raises(ValidationError, match="2\\*latent_dim"):
            PosePriorVAE(enc, dec, latent_dim=2)

    def test_missing_bias_entry(self, toy_vae, tmp_path):
        from posesynth.container import load_container, save_container

        path = tmp_path / "vae.zip"
        save_pose_prior(path, toy_vae)
        arrays, meta = load_container(path)
        del arrays["enc_b1"]
        broken = tmp_path / "broken.zip"
        save_container(broken, arrays, meta)
        with pytest.raises(LoadError, match="enc_b1"):
            load_pose_prior(broken)


class TestRot6d:
    def test_feature_round_trip(self):
        rng = np.random.default_rng(17)
        pose = make_pose(rng.normal(0, 0.8, (4, 3)))
        feats = pose_to_features(pose, "rot6d")
        assert feats.shape == (24,)
        back = features_to_pose(feats, "rot6d")
        # axis-angle is canonicalized to [0, pi], so compare rotations
        from posesynth.body_model import rodrigues

        for aa_in, aa_out in zip(pose.body_pose, back.body_pose):
            assert np.allclose(rodrigues(aa_in), rodrigues(aa_out), atol=1e-9)

    def test_zero_rotation(self):
        pose = make_pose(np.zeros((2, 3)))
        feats = pose_to_features(pose, "rot6d")
        back = features_to_pose(feats, "rot6d")
        assert np.allclose(back.body_pose, 0.0, atol=1e-12)
