import numpy as np
import pytest

from rmap.model import NetworkConfig, UpPoinTr
from rmap.train import PatchDataset, TrainConfig, Trainer, fit_size, load_model, pair_arrays, train

CFG = NetworkConfig.tiny()


def dataset(n=3, seed=0):
    rng = np.random.default_rng(seed)
    gts = rng.normal(size=(n, CFG.output_size, 3))
    xs = gts[:, :CFG.n_in] + rng.normal(scale=0.05, size=(n, CFG.n_in, 3))
    return PatchDataset(xs, gts, CFG.stage_sizes)


def hyper(**kw):
    return TrainConfig(**{"base_lr": 1e-3, "batch_size": 2, "epochs": 6, **kw})


def test_config_round_trip():
    h = TrainConfig.desk(seed=3)
    assert TrainConfig.from_dict(h.to_dict()) == h
    assert TrainConfig.paper().base_lr == 1e-5 and TrainConfig.paper().weight_decay == 5e-5
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_dict({"lr": 1})


def test_empty_dataset():
    with pytest.raises(ValueError, match="empty"):
        PatchDataset(np.empty((0, 32, 3)), np.empty((0, 128, 3)), CFG.stage_sizes)


def test_lr_follows_schedule():
    t = Trainer(UpPoinTr(CFG), dataset(), TrainConfig(base_lr=1.0))
    assert t.lr(0) == 1.0
    assert t.lr(40) == pytest.approx(0.81)


def test_resume_is_bitwise(tmp_path):
    ds = dataset()
    full = Trainer(UpPoinTr(CFG), ds, hyper())
    full.fit()

    first = Trainer(UpPoinTr(CFG), ds, hyper())
    first.fit(epochs=3)
    first.save(tmp_path / "mid.ckpt")
    resumed = Trainer(UpPoinTr(CFG), ds, hyper())
    resumed.load(tmp_path / "mid.ckpt")
    resumed.fit()
    assert resumed.history == full.history
    for (n, a), (_, b) in zip(full.model.named_parameters(), resumed.model.named_parameters()):
        assert np.array_equal(a.data, b.data), n


def test_checkpoints_and_load_model(tmp_path):
    model = train(dataset(), CFG, hyper(epochs=4, checkpoint_every=2), ckpt_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["epoch_0002.ckpt", "epoch_0004.ckpt", "last.ckpt"]
    back = load_model(tmp_path / "last.ckpt")
    x = dataset().inputs[:1]
    for a, b in zip(model.predict(x), back.predict(x)):
        assert np.array_equal(a, b)


def test_loss_goes_down():
    t = Trainer(UpPoinTr(CFG), dataset(), hyper(epochs=15, base_lr=3e-3))
    before = t.evaluate_loss()
    t.fit()
    assert t.evaluate_loss() < before


def test_fit_size():
    pts = np.arange(15.0).reshape(5, 3)
    np.testing.assert_array_equal(fit_size(pts, 7)[5:], pts[:2])
    assert len(fit_size(pts, 3)) == 3
    with pytest.raises(ValueError):
        fit_size(np.empty((0, 3)), 4)


def test_pair_arrays_share_frame():
    class Pair:
        anchor = np.zeros(3)
        lidar_patch = np.array([[2.0, 0, 0], [0, 1.0, 0]])
        radar_patch = np.array([[1.0, 0, 0]])
    x, gt, tf = pair_arrays(Pair, 2, 2)
    assert tf.scale == 2.0
    np.testing.assert_array_equal(x, [[0.5, 0, 0], [0.5, 0, 0]])
    np.testing.assert_array_equal(gt, [[1.0, 0, 0], [0, 0.5, 0]])
