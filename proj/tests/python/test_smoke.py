import math

import pytest

import popdyn


def test_formula_examples():
    assert popdyn.gini([0.0, 1.0], [1.0, 2.0]) == pytest.approx(0.5)
    assert popdyn.fpc_correct(0.5, [3]) == pytest.approx(1.0 / 3.0)
    assert popdyn.fpc_correct(0.5, [1]) == pytest.approx(0.0)
    assert popdyn.scale_scores([0.8], [16], 0.5) == pytest.approx([0.2])
    assert popdyn.dscale_alpha(10, 0.01) == pytest.approx(0.1)
    assert popdyn.examination_prob(3) == pytest.approx(0.5)


def test_errors_surface_as_python_exceptions():
    with pytest.raises(popdyn.PopdynError):
        popdyn.fpc_correct(1.5, [])
    with pytest.raises(popdyn.ConfigError):
        popdyn.validate_config({"dataset": {"synthetic": {}}, "methods": ["mf"], "foo": 1})
    assert issubclass(popdyn.ConfigError, popdyn.PopdynError)


def test_synthesized_ground_truth():
    gt = popdyn.synthesize_ground_truth(100, 200, 0.5, 0.08, 3)
    assert abs(gt.audience_gini - 0.5) <= 0.01
    assert len(gt.audience_sizes) == 200
    assert min(gt.audience_sizes) >= 1
    assert math.isclose(gt.density, gt.total_likes / (100 * 200))


def test_recipes_and_small_run():
    assert "fig2_baselines" in popdyn.recipe_names()
    cfg = popdyn.recipe("fig2_baselines")
    cfg["dataset"]["synthetic"].update({"n_users": 40, "n_items": 80, "audience_gini": 0.5, "density": 0.1})
    cfg["sim"].update({"K": 5, "T": 100, "L": 25, "checkpoint_every": 50, "repeats": 2})
    cfg["methods"] = ["random", "popular"]
    summary = popdyn.run_experiment(cfg)
    labels = [m["label"] for m in summary["methods"]]
    assert labels == ["random", "popular"]
    assert all(len(m["final_gini"]) == 2 for m in summary["methods"])
    assert popdyn.run_experiment(cfg) == summary
