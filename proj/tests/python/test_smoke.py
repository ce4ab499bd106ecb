import math

import numpy as np
import pytest

import kmlp


def separable(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(4 * n, 2))
    x = x[np.abs(x[:, 0] - x[:, 1]) > 0.1][:n]
    y = (x[:, 0] > x[:, 1]).astype(int).tolist()
    return np.ascontiguousarray(x), y


def test_quantile_encoders_match_hand_values():
    bins = kmlp.preprocess.fit_quantile_bins([0, 10, 20, 30, 40], 4)
    assert bins.boundaries == [0, 10, 20, 30, 40]
    assert kmlp.preprocess.qtl_transform(15.0, bins) == pytest.approx(0.375, abs=1e-15)
    assert kmlp.preprocess.qtl_transform(10.0, bins) == 0.25
    assert kmlp.preprocess.quantile_transform(39.9, bins) == 0.75
    assert kmlp.preprocess.ple_encode(15.0, bins) == [1.0, 0.5, 0.0, 0.0]
    out = kmlp.preprocess.qtl_transform(np.array([-5.0, 0.0, 40.0, 400.0]), bins)
    assert out.tolist() == [0.0, 0.0, 1.0, 1.0]
    z = kmlp.preprocess.clr_transform([1.0, 4.0])
    assert z[1] == pytest.approx(math.log(2.0), abs=1e-14)


def test_errors_carry_codes():
    with pytest.raises(kmlp.KmlpError) as info:
        kmlp.preprocess.fit_quantile_bins([7.0] * 10, 4)
    assert info.value.code == "ConstantColumn"
    with pytest.raises(kmlp.KmlpError) as info:
        kmlp.preprocess.clr_transform([0.0, 1.0])
    assert info.value.code == "NonPositiveInput"


def test_spline_partition_of_unity():
    kv = kmlp.spline.KnotVector.uniform(5, 3)
    assert kv.num_basis == 8
    for u in np.linspace(0.0, 1.0, 57):
        row = kmlp.spline.basis_row(float(u), kv)
        assert sum(row) == pytest.approx(1.0, abs=1e-12)
    assert kmlp.spline.basis(2.0, 0, 3, kmlp.spline.KnotVector([0, 1, 2, 3, 4], 3)) == pytest.approx(2 / 3)


def test_metrics_hand_examples():
    assert kmlp.metrics.auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75
    assert kmlp.metrics.ks([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.5
    assert kmlp.metrics.roc_points([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == [
        (0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]
    with pytest.raises(kmlp.KmlpError):
        kmlp.metrics.auc([0.1, 0.2], [1, 1])


def test_transform_table_round_trip():
    x = np.random.default_rng(0).lognormal(size=(50, 3))
    x[3, 1] = np.nan
    table = kmlp.FeatureTable.from_numpy(x)
    assert table.shape == (50, 3)
    assert table.missing[3, 1]
    t = kmlp.preprocess.fit_transform(table, "qtl", bins=10)
    enc = t.apply(table)
    assert enc.shape == (50, 3)
    assert np.all((enc >= 0) & (enc <= 1))
    back = kmlp.preprocess.FittedTransform.from_json(t.to_json())
    assert back.id == t.id
    assert np.array_equal(back.apply(table), enc)


def test_model_build_forward_serialize():
    cfg = kmlp.KmlpConfig(hidden_dim=8, input_dim=4, seed=3)
    model = kmlp.build(cfg)
    x = np.random.default_rng(1).uniform(size=(6, 4))
    p = model.forward(x)
    assert p.shape == (6,)
    assert np.all((p > 0) & (p < 1))
    again = kmlp.KmlpModel.from_bytes(model.to_bytes())
    assert np.array_equal(again.forward(x), p)
    assert again.config == cfg
    with pytest.raises(kmlp.KmlpError) as info:
        kmlp.KmlpModel.from_bytes(model.to_bytes()[:-3])
    assert info.value.code == "FormatError"
    with pytest.raises(kmlp.KmlpError):
        kmlp.build(kmlp.KmlpConfig(hidden_dim=0, input_dim=4))


def test_model_gradient_matches_finite_differences():
    model = kmlp.build(kmlp.KmlpConfig(hidden_dim=4, input_dim=2, seed=5))
    x = np.random.default_rng(2).uniform(0.05, 0.95, size=(5, 2))
    y = [0, 1, 0, 1, 1]
    loss, grads = model.gradients(x, y)
    p = model.forward(x)
    expect = -np.mean([math.log(q) if t else math.log(1 - q) for q, t in zip(p, y)])
    assert loss == pytest.approx(expect, rel=1e-12)
    assert len(grads) == len(model.parameters())
    assert sum(len(g) for g in grads) == model.parameter_count


def test_adam_first_step():
    assert kmlp.train.adam([1.0], [[1.0]], 1e-3)[0] == pytest.approx(0.999, abs=1e-10)
    assert kmlp.train.bce_loss([0.5], [1]) == pytest.approx(math.log(2.0))
    assert kmlp.train.TrainSchedule().lr_at(40) == pytest.approx(1e-3 * 0.81)


def test_fit_separable_toy():
    xtr, ytr = separable(140, 3)
    xva, yva = separable(60, 4)
    model = kmlp.build(kmlp.KmlpConfig(hidden_dim=16, input_dim=2, seed=1))
    sched = kmlp.train.TrainSchedule(batch_size=32, initial_lr=1e-2, max_epochs=50, patience=50, seed=5)
    seen = []
    best, report = kmlp.train.fit(model, xtr, ytr, xva, yva, sched, on_epoch=seen.append)
    assert report.best_ks == 1.0
    assert len(seen) == len(report.epochs)
    p = kmlp.train.predict(best, xva)
    assert kmlp.metrics.ks(p.tolist(), yva) == 1.0


def test_io_and_splits():
    table = kmlp.io.read_csv("a,b,label\n1.5,,0\n2,3,1\nNA,4,0\n")
    assert table.labels == [0, 1, 0]
    assert int(table.missing.sum()) == 2
    train, valid, test = kmlp.io.split_indices(100, seed=1)
    assert (len(train), len(valid), len(test)) == (70, 10, 20)
    assert sorted(train + valid + test) == list(range(100))
    names = {d["abbreviation"] for d in kmlp.io.benchmarks()}
    assert names == {"CP", "MT", "CD", "EG", "HI", "JA"}


def test_verify_suite():
    ok, results = kmlp.verify()
    assert ok
    assert all(r["passed"] for r in results)
    bad, _ = kmlp.verify(gradient_fault_seed=7)
    assert not bad
