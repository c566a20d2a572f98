import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.tree import DecisionTreeRegressor

from conftest import stage
from ddlsched.model import JobSpec
from ddlsched.predictor import (ForestConfig, ForestPredictor, GroupMeanPredictor,
                                GroupMedianPredictor, PerfectPredictor, TrainingExample,
                                ZeroPredictor, fit, predict, prediction_errors)


def ex(g, u, n):
    return TrainingExample(g, u, n)


def job(g, u, n, jid=0):
    return JobSpec(jid, [stage()], iterations=n, group_id=g, user_id=u)


def test_constant_group():
    model = fit([ex(1, 1, 100)] * 3, ForestConfig(num_trees=5))
    assert predict(model, 1, 1) == 100


def test_unseen_group_is_zero():
    model = fit([ex(1, 1, 100), ex(2, 1, 30)])
    assert predict(model, 99, 1) == 0


def test_empty_training_set():
    model = fit([])
    assert predict(model, 1, 1) == 0
    assert "empty" in model.summary()


def test_single_example_memorised():
    model = fit([ex(7, 3, 50)])
    assert predict(model, 7, 3) == 50


def test_unseen_user_in_known_group():
    model = fit([ex(1, 1, 10), ex(1, 2, 30)], ForestConfig(num_trees=1, bootstrap=False))
    assert 10 <= predict(model, 1, 99) <= 30


def test_errors():
    assert prediction_errors([(10, 8), (20, 25)]) == (7.0, 3.5)
    assert prediction_errors([(5, 5), (9, 9)]) == (0.0, 0.0)
    assert prediction_errors([(5, 0), (9, 0)])[0] == 14.0
    assert prediction_errors([]) == (0.0, 0.0)


def test_group_baselines():
    hist = [ex(1, 1, 10), ex(1, 2, 20), ex(1, 3, 90)]
    assert GroupMeanPredictor(hist).predict_job(job(1, 1, 5)) == 40
    assert GroupMedianPredictor(hist).predict_job(job(1, 1, 5)) == 20
    assert GroupMeanPredictor(hist).predict_job(job(2, 1, 5)) == 0
    assert PerfectPredictor().predict_job(job(1, 1, 77)) == 77
    assert ZeroPredictor().predict_job(job(1, 1, 77)) == 0


def test_online_history():
    p = GroupMeanPredictor([ex(1, 1, 10)])
    p.observe(job(1, 1, 30))
    assert p.predict_job(job(1, 1, 1)) == 20
    q = GroupMeanPredictor([ex(1, 1, 10)], online=False)
    q.observe(job(1, 1, 30))
    assert q.predict_job(job(1, 1, 1)) == 10


def test_forest_refit():
    p = ForestPredictor([ex(1, 1, 10)], ForestConfig(num_trees=1, bootstrap=False),
                        refit_every=1)
    assert p.predict_job(job(2, 1, 1)) == 0
    p.observe(job(2, 1, 40))
    assert p.predict_job(job(2, 1, 1)) == 40


def test_config_rejects():
    with pytest.raises(ValueError):
        ForestConfig(num_trees=0)
    with pytest.raises(ValueError):
        TrainingExample(1, 1, 0)


examples_strategy = st.lists(
    st.tuples(st.integers(0, 12), st.integers(0, 6), st.integers(1, 10**5)),
    min_size=1, max_size=60)


@given(examples_strategy, st.integers(0, 3))
def test_prediction_within_target_range(rows, seed):
    data = [ex(*r) for r in rows]
    model = fit(data, ForestConfig(num_trees=7, rng_seed=seed))
    lo = min(r[2] for r in rows)
    hi = max(r[2] for r in rows)
    for g, u, _ in rows:
        assert lo <= predict(model, g, u) <= hi


@given(st.dictionaries(st.tuples(st.integers(0, 20), st.integers(0, 8)),
                       st.integers(1, 10**6), min_size=1, max_size=40))
def test_memorisation_without_bootstrap(table):
    data = [ex(g, u, n) for (g, u), n in table.items()]
    model = fit(data, ForestConfig(num_trees=1, bootstrap=False))
    for (g, u), n in table.items():
        assert predict(model, g, u) == n


@given(examples_strategy, st.integers(0, 100))
def test_deterministic(rows, seed):
    data = [ex(*r) for r in rows]
    cfg = ForestConfig(num_trees=4, rng_seed=seed)
    a, b = fit(data, cfg), fit(data, cfg)
    for g, u, _ in rows:
        assert predict(a, g, u) == predict(b, g, u)


@given(examples_strategy)
def test_single_tree_matches_sklearn(rows):
    """Without bootstrap one tree is a plain exhaustive-split regression tree."""
    data = [ex(*r) for r in rows]
    model = fit(data, ForestConfig(num_trees=1, bootstrap=False))
    X = np.array([model.encode(e.group_id, e.user_id) for e in data])
    y = np.array([e.iterations for e in data], dtype=float)
    ref = DecisionTreeRegressor(min_samples_leaf=1, random_state=0).fit(X, y)
    ours = np.array([model.trees[0].predict_one(*x) for x in X])
    # ties between equally good splits may differ; in-sample fits must agree
    assert np.allclose(ours, ref.predict(X), rtol=1e-9, atol=1e-6)


def test_summary_mentions_trees():
    model = fit([ex(1, 1, 10), ex(2, 2, 20)], ForestConfig(num_trees=3))
    assert "trees: 3" in model.summary()
