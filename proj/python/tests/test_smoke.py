import numpy as np
import pytest

import lf4d


def direct_conv(x, w, b):
    # Valid cross-correlation by explicit loops over kernel offsets.
    n, c, s, t, y, xx = x.shape
    o, _, ks, kt, ky, kx = w.shape
    out = np.zeros((n, o, s - ks + 1, t - kt + 1, y - ky + 1, xx - kx + 1))
    out += b[None, :, None, None, None, None]
    for u in range(ks):
        for v in range(kt):
            for m in range(ky):
                for k in range(kx):
                    patch = x[:, :, u:u + out.shape[2], v:v + out.shape[3], m:m + out.shape[4], k:k + out.shape[5]]
                    out += np.einsum("ncstyx,oc->nostyx", patch, w[:, :, u, v, m, k])
    return out


def test_conv4d_matches_loops():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (2, 3, 4, 4, 5, 6))
    w = rng.uniform(-1, 1, (2, 3, 3, 2, 3, 3))
    b = rng.uniform(-1, 1, 2)
    np.testing.assert_allclose(lf4d.conv4d(x, w, b), direct_conv(x, w, b), rtol=1e-12, atol=1e-12)


def test_lf4d_round_trip(tmp_path):
    field, disparity = lf4d.synth(3, S=3, T=3, Y=16, X=20)
    assert field.shape == (1, 3, 3, 16, 20)
    assert disparity.shape == (1, 3, 3, 16, 20)
    path = tmp_path / "f.lf4d"
    lf4d.write_lf4d(path, field)
    assert np.array_equal(lf4d.read_lf4d(path), field)


def test_degrade_and_baseline():
    field, _ = lf4d.synth(1, S=5, T=5, Y=32, X=32)
    low = lf4d.degrade(field, r_s=2, r_a=2)
    assert low.shape == (1, 3, 3, 16, 16)
    up = lf4d.bicubic(low, 2, 2)
    assert up.shape == field.shape
    assert 20 < lf4d.psnr(up, field) < 60
    assert lf4d.psnr(field, field) == float("inf")
    assert lf4d.ssim(field, field) == pytest.approx(1.0)


def test_angular_loss_is_squared_error():
    rng = np.random.default_rng(1)
    a = rng.uniform(size=(1, 2, 2, 4, 4))
    b = rng.uniform(size=(1, 2, 2, 4, 4))
    assert lf4d.angular_loss(a, b) == pytest.approx(((a - b) ** 2).sum(), rel=1e-12)


def test_model_super_resolves_and_round_trips(tmp_path):
    model = lf4d.Model({"n_restoration": "1", "n_refinement": "1", "filters": "4", "angular_kernel": "3", "r_a": "2"})
    assert model.config()["filters"] == "4"
    assert model.parameter_count() > 0
    low, _ = lf4d.synth(2, S=3, T=3, Y=24, X=24)
    out = model.super_resolve(low)
    assert out.shape == (1, 5, 5, 48, 48)
    path = tmp_path / "m.ckpt"
    model.save(path)
    again = lf4d.Model.load(path)
    assert np.array_equal(again.super_resolve(low), out)
    with pytest.raises(ValueError):
        lf4d.Model({"bogus": "1"})


def test_train_few_steps(tmp_path):
    for k in range(2):
        field, _ = lf4d.synth(10 + k, S=3, T=3, Y=24, X=24)
        lf4d.write_lf4d(tmp_path / f"s{k}.lf4d", field)
    (tmp_path / "list.txt").write_text("s0.lf4d\ns1.lf4d\n")
    config = "\n".join([
        "n_restoration=1", "n_refinement=1", "filters=4", "angular_kernel=3", "zero_tail=true",
        "patch_spatial=12", "patch_angular=3", "steps=3", "learning_rate=1e-3", "grad_clip=1",
        f"checkpoint={tmp_path / 'm.ckpt'}", f"log={tmp_path / 'train.log'}",
    ])
    losses = lf4d.train(config, tmp_path / "list.txt")
    assert len(losses) == 3
    assert all(np.isfinite(losses))
    assert (tmp_path / "m.ckpt").exists()
