import struct

import numpy as np
import pytest

from ssce.models import (
    EMBED_DIM, ChecksumMismatchError, CheckpointError, CheckpointVersionError, CorruptRecordError, TransferError,
    apply_checkpoint, build_classifier, build_gan, load_checkpoint, save_checkpoint, transfer_init,
)
from ssce.nn import Adam, BatchNorm, LayerNorm, Linear, Sigmoid
from ssce.tensor import Tensor


@pytest.fixture(scope="module")
def clf():
    return build_classifier("small-4conv", 32, 3, seed=0)


# -- classifier --------------------------------------------------------------------------


def test_head_out_features(clf):
    outs = [m.weight.shape[1] for m in clf.head.layers if isinstance(m, Linear)]
    assert outs == [512, 256, 3]


def test_forward_shape(clf, rng):
    assert clf(Tensor(rng.uniform(size=(2, 1, 32, 32)))).shape == (2, 3)


@pytest.mark.parametrize("preset, res", [("small-4conv", 16), ("small-4conv", 64), ("small-6conv", 32)])
def test_embedding_width_is_fixed(preset, res, rng):
    m = build_classifier(preset, res, 4)
    assert m.embed(rng.uniform(size=(3, 1, res, res))).shape == (3, EMBED_DIM)


def test_degenerate_class_count_rejected():
    with pytest.raises(ValueError, match="at least 2"):
        build_classifier("small-4conv", 32, 1)


def test_unknown_preset_and_resolution():
    with pytest.raises(ValueError, match="preset"):
        build_classifier("resnet-152", 32, 3)
    with pytest.raises(ValueError, match="resolution"):
        build_classifier("small-6conv", 16, 3)


def test_parameter_count_reported(clf):
    assert clf.num_parameters() == sum(p.data.size for p in clf.parameters()) > 0


def test_eval_mode_deterministic(clf, rng):
    x = rng.uniform(size=(4, 1, 32, 32))
    np.testing.assert_array_equal(clf.predict_proba(x), clf.predict_proba(x))
    assert clf.training  # predict restores the previous mode


# -- GANs --------------------------------------------------------------------------------


def test_generator_shape_and_range(rng):
    pair = build_gan("dcgan", latent_len=100, resolution=32)
    imgs = pair.generator.sample(6, rng)
    assert imgs.shape == (6, 1, 32, 32)
    assert imgs.min() >= -1.0 and imgs.max() <= 1.0
    pair.generator.train()
    out = pair.generator(Tensor(rng.normal(size=(3, 100)) * 50)).data
    assert np.abs(out).max() <= 1.0


@pytest.mark.parametrize("variant", ["dcgan", "wgan", "wgan-gp"])
def test_critic_accepts_generator_output(variant, rng):
    pair = build_gan(variant, latent_len=16, resolution=16)
    assert pair.critic(pair.generator(Tensor(rng.normal(size=(2, 16))))).shape == (2, 1)


def test_wgan_gp_critic_uses_layer_norm_only():
    mods = list(build_gan("wgan-gp", resolution=32).critic.modules())
    assert any(isinstance(m, LayerNorm) for m in mods)
    assert not any(isinstance(m, BatchNorm) for m in mods)


def test_dcgan_discriminator_ends_in_sigmoid():
    assert isinstance(build_gan("dcgan", resolution=16).critic.net.layers[-1], Sigmoid)


@pytest.mark.parametrize("variant", ["wgan", "wgan-gp"])
def test_wasserstein_critic_output_unbounded(variant, rng):
    pair = build_gan(variant, latent_len=16, resolution=16)
    last = pair.critic.net.layers[-1]
    assert isinstance(last, Linear)
    last.weight.data *= 1000.0  # scaling test: no squashing nonlinearity at the end
    pair.critic.eval()
    z = rng.normal(size=(16, 16))
    scores = pair.critic(pair.generator(Tensor(z))).data
    assert np.abs(scores).max() > 1.0


@pytest.mark.parametrize("res", [8, 24, 48])
def test_gan_resolution_must_be_power_of_two(res):
    with pytest.raises(ValueError, match="power of two"):
        build_gan("dcgan", resolution=res)


def test_unknown_variant():
    with pytest.raises(ValueError, match="variant"):
        build_gan("stylegan")


# -- checkpoints ------------------------------------------------------------------------


def _trained_copy(tmp_path):
    m = build_classifier("small-4conv", 16, 3, seed=4)
    m.set_normalization([0.3], [0.2])
    m.train()
    m(Tensor(np.random.default_rng(0).uniform(size=(4, 1, 16, 16))))  # move running stats
    return m


def test_round_trip_bitwise(tmp_path):
    m = _trained_copy(tmp_path)
    opt = Adam(m.parameters(), lr=0.01)
    opt.step([np.ones_like(p.data) for p in m.parameters()])
    path = tmp_path / "m.ssce"
    save_checkpoint(m, path, optimizer=opt, metadata={"epoch": 3, "seed": 4, "config_hash": "abc"})
    ck = load_checkpoint(path)
    assert ck.arch_id == m.arch_id and ck.metadata["epoch"] == 3
    for k, v in m.state_dict().items():
        assert ck.records[k].tobytes() == np.asarray(v, dtype=np.float64).tobytes()
    assert set(ck.optimizer) == set(opt.state_arrays())
    fresh = build_classifier("small-4conv", 16, 3, seed=99)
    apply_checkpoint(fresh, ck)
    for k, v in m.state_dict().items():
        assert fresh.state_dict()[k].tobytes() == v.tobytes()


def test_f32_storage_widens_on_load(tmp_path):
    m = _trained_copy(tmp_path)
    save_checkpoint(m, tmp_path / "m32.ssce", precision="f32")
    ck = load_checkpoint(tmp_path / "m32.ssce")
    for k, v in m.state_dict().items():
        assert ck.records[k].dtype == np.float64
        np.testing.assert_array_equal(ck.records[k], v.astype(np.float32).astype(np.float64))


def test_truncated_file_is_corrupt(tmp_path):
    m = _trained_copy(tmp_path)
    path = tmp_path / "m.ssce"
    save_checkpoint(m, path)
    raw = path.read_bytes()
    for cut in (10, len(raw) // 2, len(raw) - 6):
        path.write_bytes(raw[:cut])
        with pytest.raises(CorruptRecordError):
            load_checkpoint(path)


def test_checksum_mismatch(tmp_path):
    m = _trained_copy(tmp_path)
    path = tmp_path / "m.ssce"
    save_checkpoint(m, path)
    raw = bytearray(path.read_bytes())
    raw[-40] ^= 0xFF  # flip bits inside the last record's values
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumMismatchError):
        load_checkpoint(path)


def test_version_mismatch(tmp_path):
    m = _trained_copy(tmp_path)
    path = tmp_path / "m.ssce"
    save_checkpoint(m, path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "x.ssce"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_apply_requires_matching_architecture(tmp_path):
    save_checkpoint(build_classifier("small-4conv", 16, 5), tmp_path / "k5.ssce")
    with pytest.raises(CheckpointError, match="architecture"):
        apply_checkpoint(build_classifier("small-4conv", 16, 3), load_checkpoint(tmp_path / "k5.ssce"))


# -- transfer -------------------------------------------------------------------------


def test_transfer_identical_architecture(tmp_path):
    src = _trained_copy(tmp_path)
    save_checkpoint(src, tmp_path / "src.ssce")
    dst = build_classifier("small-4conv", 16, 3, seed=11)
    report = transfer_init(dst, load_checkpoint(tmp_path / "src.ssce"))
    assert report.skipped == []
    for k, v in src.state_dict().items():
        assert dst.state_dict()[k].tobytes() == v.tobytes()


def test_transfer_mismatched_head(tmp_path):
    src = build_classifier("small-4conv", 16, 5, seed=1)
    save_checkpoint(src, tmp_path / "k5.ssce")
    dst = build_classifier("small-4conv", 16, 3, seed=2)
    before = {k: v.copy() for k, v in dst.state_dict().items()}
    report = transfer_init(dst, load_checkpoint(tmp_path / "k5.ssce"))
    assert sorted(report.skipped_names) == ["head.6.bias", "head.6.weight"]
    backbone = {n for n, _ in dst.named_parameters() if n.startswith("backbone.")}
    assert backbone <= set(report.copied)
    for name in report.skipped_names:
        np.testing.assert_array_equal(dst.state_dict()[name], before[name])
    for name in report.copied:
        assert dst.state_dict()[name].tobytes() == src.state_dict()[name].tobytes()


def test_transfer_unrelated_architecture(tmp_path):
    gen = build_gan("dcgan", latent_len=8, resolution=16).generator
    save_checkpoint(gen, tmp_path / "g.ssce")
    dst = build_classifier("small-4conv", 16, 3)
    with pytest.raises(TransferError, match="no parameter"):
        transfer_init(dst, load_checkpoint(tmp_path / "g.ssce"))
    report = transfer_init(dst, load_checkpoint(tmp_path / "g.ssce"), allow_empty=True)
    assert report.copied == []
