"""Scikit-learn style transformer facade."""

import numpy as np
import pytest

from emorb.estimator import EmoTransformer
from emorb.model import HubbardSpec, build_hubbard


def _dimer():
    return build_hubbard(HubbardSpec(2, 1, t=1.0, u=4.0))


def test_get_set_params_round_trip():
    t = EmoTransformer(d=32, seed=7)
    params = t.get_params()
    assert params["d"] == 32
    assert params["seed"] == 7
    t2 = EmoTransformer().set_params(**params)
    assert t2.get_params() == params
    with pytest.raises(ValueError):
        t.set_params(bogus=1)


def test_fit_learns_orthogonal_rotation():
    t = EmoTransformer(d=8, n_max=3, seed=0)
    t.fit(_dimer())
    assert t.rotation_.shape == (2, 2)
    assert np.max(np.abs(t.rotation_.T @ t.rotation_ - np.eye(2))) < 1e-12
    assert np.isclose(t.energy_, 2.0 - 2.0 * np.sqrt(2.0), atol=1e-9)
    assert t.n_orb_ == 2


def test_transform_requires_fit():
    with pytest.raises(RuntimeError):
        EmoTransformer().transform(_dimer())


def test_transform_checks_orbital_count():
    t = EmoTransformer(d=8, n_max=2, seed=0).fit(_dimer())
    other = build_hubbard(HubbardSpec(3, 1, t=1.0, u=4.0))
    with pytest.raises(ValueError):
        t.transform(other)


def test_fit_transform_matches_fit_then_transform():
    s = _dimer()
    a = EmoTransformer(d=8, n_max=2, seed=5).fit_transform(s)
    t = EmoTransformer(d=8, n_max=2, seed=5).fit(s)
    b = t.transform(s)
    assert np.array_equal(a.h, b.h)
    assert np.array_equal(a.v, b.v)
