"""Scikit-learn style facade over the orbital optimizer.

EmoTransformer.fit learns an orbital rotation from an IntegralSet;
transform applies the learned rotation to any compatible IntegralSet.
"""

from __future__ import annotations

import numpy as np

from .basinhop import RunConfig, run_emo
from .model import IntegralSet, transform_integrals


class EmoTransformer:
    """Learns an entanglement-minimizing orbital rotation.

    Parameters mirror RunConfig; fitted attributes carry a trailing
    underscore in the scikit-learn convention.
    """

    def __init__(
        self,
        d=100,
        chi=None,
        epsilon=1e-8,
        n_macro=5,
        n_max=20,
        n_sweep=4,
        alpha=0.5,
        seed=0,
    ):
        self.d = d
        self.chi = chi
        self.epsilon = epsilon
        self.n_macro = n_macro
        self.n_max = n_max
        self.n_sweep = n_sweep
        self.alpha = alpha
        self.seed = seed

    _param_names = (
        "d", "chi", "epsilon", "n_macro", "n_max", "n_sweep", "alpha",
        "seed",
    )

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params):
        for name, value in params.items():
            if name not in self._param_names:
                raise ValueError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    def _config(self):
        return RunConfig(
            d=self.d,
            chi=self.chi,
            epsilon=self.epsilon,
            n_macro=self.n_macro,
            n_max=self.n_max,
            n_sweep=self.n_sweep,
            alpha=self.alpha,
            seed=self.seed,
        )

    def fit(self, s: IntegralSet, y=None):
        state, _ = run_emo(s, self._config())
        self.rotation_ = state.u
        self.energy_ = state.e_min
        self.s_tot_ = state.s_min
        self.state_ = state
        self.n_orb_ = s.n_orb
        return self

    def transform(self, s: IntegralSet) -> IntegralSet:
        if not hasattr(self, "rotation_"):
            raise RuntimeError("transformer is not fitted")
        if s.n_orb != self.n_orb_:
            raise ValueError("orbital count differs from the fitted system")
        return transform_integrals(s, self.rotation_)

    def fit_transform(self, s: IntegralSet, y=None) -> IntegralSet:
        return self.fit(s, y).transform(s)
