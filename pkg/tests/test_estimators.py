import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hcembed import gen_mixture
from hcembed.errors import FormatError, InvalidParamError
from hcembed.estimators import (
    AgglomerativeHierarchy,
    BisectPlusPlus,
    BisectingKMeansHierarchy,
    MaxSatHierarchy,
    RandomCutHierarchy,
    RandomHierarchy,
    make_estimator,
)


def small_data():
    return gen_mixture(3, 8, 4, 8.0, seed=2).points


def test_get_set_params_roundtrip():
    est = BisectPlusPlus(theta=64, delta=0.2, random_state=5)
    params = est.get_params()
    assert params["theta"] == 64 and params["delta"] == 0.2
    est.set_params(theta=32)
    assert est.theta == 32


def test_clone_preserves_params():
    est = AgglomerativeHierarchy(linkage="complete", measure="cossim")
    twin = clone(est)
    assert twin.get_params() == est.get_params()


def test_fit_sets_attributes():
    X = small_data()
    est = BisectPlusPlus(measure="l2sq", theta=8, delta=0.0, iterations=30,
                         restarts=1, random_state=1).fit(X)
    assert est.tree_.n_leaves == X.shape[0]
    assert est.n_leaves_ == X.shape[0]


def test_score_is_normalized_objective():
    X = small_data()
    est = AgglomerativeHierarchy(linkage="average", measure="l2sq").fit(X)
    rand = RandomHierarchy(measure="l2sq", random_state=0).fit(X)
    assert est.score() > rand.score()
    assert -1.5 <= rand.score() <= 1.5


def test_score_before_fit_raises():
    with pytest.raises(NotFittedError):
        BisectingKMeansHierarchy().score()


def test_fit_rejects_nonfinite():
    with pytest.raises(FormatError):
        RandomCutHierarchy().fit(np.array([[1.0, np.inf]]))


def test_estimators_deterministic_per_random_state():
    X = small_data()
    a = MaxSatHierarchy(random_state=3).fit(X).tree_
    b = MaxSatHierarchy(random_state=3).fit(X).tree_
    assert a == b


def test_make_estimator_dispatch():
    est = make_estimator("bkmeans", random_state=2)
    assert isinstance(est, BisectingKMeansHierarchy)
    with pytest.raises(InvalidParamError):
        make_estimator("nope")
