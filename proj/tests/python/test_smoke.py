import json

import numpy as np
import pytest

import bfa_lab


@pytest.fixture(scope="module")
def moons():
    ds = bfa_lab.gen_moons(80, 0.1, 7)
    model = bfa_lab.Model.train(ds, hidden=[16], seed=3, epochs=60)
    return ds, model


def test_version():
    assert bfa_lab.__version__ == bfa_lab.version() != ""


def test_dataset_shapes(moons):
    ds, _ = moons
    assert ds.num_classes == 2
    assert ds.train_x.shape[1] == 2
    assert ds.train_x.shape[0] + ds.test_x.shape[0] == len(ds)
    assert ds.test_x.min() >= 0.0 and ds.test_x.max() <= 1.0


def test_gradient_matches_central_differences(moons):
    ds, model = moons
    x, y = ds.test_x[0], ds.test_y[0]
    g = model.input_gradient(x, y)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (model.loss(x + e, y) - model.loss(x - e, y)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_attack_stays_in_budget(moons):
    ds, model = moons
    cfg = bfa_lab.BoundaryConfig(sigma=0.05, n_points=5)
    for kind in ("i_fgsm", "mi_fgsm", "bf_fgsm", "bf_mi_fgsm"):
        x = ds.test_x[1]
        r = bfa_lab.run_attack(kind, model, x, ds.test_y[1], epsilon=0.1, boundary=cfg, seed=2, trace=True)
        assert np.max(np.abs(r.adversarial - x)) <= 0.1
        assert len(r.iterate_trace) == 11
        assert r.queries > 0


def test_linear_model_distance_closed_form():
    w = np.array([[1.0, 0.0], [0.0, 0.0]])
    model = bfa_lab.Model.linear(w, np.array([0.0, 0.3]))
    x = np.array([0.5, 0.5])
    d, censored = bfa_lab.boundary_distance(model, x, np.array([-1.0, 0.0]), tol=1e-6)
    assert not censored
    assert d == pytest.approx(0.2, abs=1e-6)


def test_model_round_trip(moons, tmp_path):
    ds, model = moons
    again = bfa_lab.Model.loads(model.dumps())
    assert again.dumps() == model.dumps()
    model.save(tmp_path / "m.json")
    loaded = bfa_lab.Model.load(tmp_path / "m.json")
    assert loaded.accuracy(ds.test_x, ds.test_y) == model.accuracy(ds.test_x, ds.test_y)


def test_errors_are_typed():
    with pytest.raises(bfa_lab.InvalidConfig):
        bfa_lab.BoundaryConfig(gamma=1.5)
    with pytest.raises(bfa_lab.ParseError):
        bfa_lab.Model.loads("{")
    assert issubclass(bfa_lab.EmptyStudy, bfa_lab.Error)


def test_run_command(tmp_path):
    cfg = {
        "seed": 1,
        "output_dir": str(tmp_path / "out"),
        "dataset": {"kind": "moons", "n_per_class": 40, "noise": 0.1},
        "models": [{"id": "a", "hidden": [8], "seed": 1, "epochs": 20},
                   {"id": "b", "hidden": [8], "seed": 2, "epochs": 20}],
        "pairs": [{"id": "ab", "substitute": "a", "victim": "b"}],
        "attacks": [{"name": "bf", "kind": "bf_fgsm", "epsilon": 0.1, "iterations": 4}],
        "boundary": {"n_points": 3},
        "inputs": {"max": 10},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert len(bfa_lab.load_config(path)) == 16
    written = bfa_lab.run_command("train", path)
    assert any(p.name == "a.json" for p in written)
    report = bfa_lab.run_command("study", path, kind="transfer")
    data = json.loads(next(p for p in report if p.suffix == ".json").read_text())
    assert data["kind"] == "transfer"
    with pytest.raises(bfa_lab.InvalidInput):
        bfa_lab.run_command("explode", path)
