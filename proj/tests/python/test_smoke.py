"""Smoke tests for the smgan_py extension module."""

import json
import math

import numpy as np
import pytest

import smgan_py


def test_fid_identical_distributions_is_zero():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(500, 2))
    assert smgan_py.fid(x, x) == pytest.approx(0.0, abs=1e-8)


def test_fid_unit_mean_shift():
    # Equal covariances, unit mean shift: FID = 1.
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2000, 2))
    y = x + np.array([1.0, 0.0])
    assert smgan_py.fid(x, y) == pytest.approx(1.0, abs=1e-6)


def test_losses_hand_values():
    zeros = np.zeros(4)
    assert smgan_py.ns_loss_d(zeros, zeros) == pytest.approx(2.0 * math.log(2.0))
    assert smgan_py.ns_loss_g(zeros) == pytest.approx(math.log(2.0))
    assert smgan_py.hinge_loss_d(np.ones(4), -np.ones(4)) == pytest.approx(0.0)
    assert smgan_py.hinge_loss_g(np.full(4, 2.0)) == pytest.approx(-2.0)


def test_prd_identical_sets():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(80, 2))
    result = smgan_py.prd(x, x, clusters=10, angles=101, seed=3)
    assert result["f8"] == pytest.approx(1.0, abs=1e-9)
    assert result["f_inv8"] == pytest.approx(1.0, abs=1e-9)
    assert len(result["precisions"]) == 101


def test_spectral_norm_normalizes():
    rng = np.random.default_rng(3)
    w = rng.normal(size=(6, 4))
    w_hat = smgan_py.spectral_norm(w, iterations=50)
    sigma = np.linalg.svd(w_hat, compute_uv=False)[0]
    assert sigma == pytest.approx(1.0, abs=1e-2)


def test_generator_self_modulation_reduces_to_baseline_at_init():
    kwargs = dict(family="dcgan", latent_dim=4, base_channels=4, num_blocks=1,
                  out_h=4, out_w=4, out_c=1, seed=11)
    base = smgan_py.build_generator(conditioning="none", **kwargs)
    self_mod = smgan_py.build_generator(conditioning="self", hidden=3, **kwargs)
    z = np.random.default_rng(4).normal(size=(5, 4))
    np.testing.assert_array_equal(base.sample(z), self_mod.sample(z))
    assert self_mod.num_modulated_layers() == 1
    assert self_mod.num_parameters() > base.num_parameters()


def test_generator_jacobian_and_condition_number():
    g = smgan_py.build_generator(family="dcgan", latent_dim=4, base_channels=4,
                                 num_blocks=0, out_h=1, out_w=1, out_c=2, seed=5)
    jac = g.jacobian(np.array([0.1, -0.2, 0.3, 0.4]))
    assert jac.shape == (2, 4)
    mean_log_cond, degenerate = g.condition_number(
        np.random.default_rng(5).normal(size=(4, 4)))
    assert math.isfinite(mean_log_cond)
    assert isinstance(degenerate, bool)


def test_train_ring_returns_deterministic_record():
    kwargs = dict(modes=4, stddev=0.1, total_steps=3, eval_every=3,
                  batch_size=8, seed=9)
    first = smgan_py.train_ring(**kwargs)
    second = smgan_py.train_ring(**kwargs)
    assert first == second
    record = json.loads(first)
    assert record["status"] == "ok"
    assert record["gen_updates"] == 3
    assert record["trajectory"][0]["step"] == 0


def test_model_save_load_roundtrip(tmp_path):
    g = smgan_py.build_generator(family="dcgan", latent_dim=4, base_channels=4,
                                 num_blocks=1, out_h=4, out_w=4, out_c=1,
                                 conditioning="self", hidden=3, seed=7)
    path = str(tmp_path / "model.json")
    g.save(path)
    loaded = smgan_py.load_generator(path)
    z = np.random.default_rng(6).normal(size=(3, 4))
    np.testing.assert_array_equal(g.sample(z), loaded.sample(z))


def test_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        smgan_py.fid(np.zeros((1, 2)), np.zeros((1, 2)))  # N < 2
    with pytest.raises(OSError):
        smgan_py.load_generator("missing_model.json")
