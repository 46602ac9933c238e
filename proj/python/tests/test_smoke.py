import math

import numpy as np
import pytest

import fkrig


def small_config(**extra):
    cfg = fkrig.Config()
    for k, v in {"gen.n": "6", "gen.m": "8", "gen.p": "2", "seed": "4", **extra}.items():
        cfg.set(k, v)
    return cfg


def test_config_round_trip():
    cfg = small_config()
    again = fkrig.Config.parse(cfg.to_text())
    assert again.get("gen.n") == "6"
    with pytest.raises(fkrig.InputError):
        cfg.set("nugget", "abc")


def test_generate_is_deterministic():
    a, grid, truth = fkrig.generate(small_config())
    b, _, _ = fkrig.generate(small_config())
    assert a.runs == 6
    assert truth.shape == (6, 8)
    assert np.array_equal(a.design, b.design)
    assert all(np.array_equal(x, y) for x, y in zip(a.y, b.y))
    assert a.is_regular()


def test_fit_interpolates_and_round_trips(tmp_path):
    cfg = small_config(nugget="0")
    data, grid, truth = fkrig.generate(cfg)
    model, info = fkrig.fit(data, cfg)
    assert not info["irregular"]
    x = data.design[0]
    assert model.predict(x, grid[3]) == pytest.approx(truth[0, 3], abs=1e-6)
    center, lo, hi = model.predict_ci(x, 0.37)
    assert lo <= center <= hi
    path = tmp_path / "model.txt"
    model.save(path)
    loaded = fkrig.Model.load(path)
    assert loaded.predict(x, 0.37) == pytest.approx(model.predict(x, 0.37), abs=1e-12)


def test_irregular_fit_uses_em():
    cfg = small_config(**{"gen.n": "8", "gen.keep_lo": "0.5"})
    data, _, _ = fkrig.generate(cfg)
    assert not data.is_regular()
    model, info = fkrig.fit(data, cfg)
    assert info["irregular"]
    assert info["em"]["iterations"] >= 1
    assert np.isfinite(model.completed).all()


def test_dataset_validation():
    with pytest.raises(fkrig.InputError):
        fkrig.Dataset(np.zeros((1, 1)), [np.array([0.0, 0.0])], [np.array([1.0, 2.0])])


def test_tridiagonal_closed_form():
    rho = 0.5
    grid = np.arange(6.0)
    inv, logdet, closed = fkrig.corr_t(grid, -math.log(rho))
    assert closed
    dense = rho ** np.abs(grid[:, None] - grid[None, :])
    assert np.allclose(inv, np.linalg.inv(dense), atol=1e-10)
    assert logdet == pytest.approx(5 * math.log(1 - rho * rho), abs=1e-12)


def test_optimize_and_effects():
    cfg = small_config()
    data, _, _ = fkrig.generate(cfg)
    model, _ = fkrig.fit(data, cfg)
    lo, hi = np.zeros(2), np.ones(2)
    r = fkrig.minimax(model, lo, hi, restarts=4)
    assert np.all(r["x"] >= lo) and np.all(r["x"] <= hi)
    t_star, value = fkrig.max_over_t(model, r["x"])
    assert value == pytest.approx(r["value"], abs=1e-9)
    eff = fkrig.main_effects(model, 0, np.linspace(0, 1, 3), nodes=32)
    assert eff.shape == (3, model.grid.size)
