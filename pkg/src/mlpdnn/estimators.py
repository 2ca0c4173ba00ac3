"""scikit-learn style wrappers around the solver and the compiler.

The "training data" of a PDE solver is the problem itself, so ``fit`` only
freezes the problem, the configuration and the random realization; ``X`` is
accepted for API compatibility and used for input-width validation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .compiler import DEFAULT_MAX_PARAMS, compile_mlp
from .network import realize
from .problems import make_problem
from .randomness import RandomRealization
from .solver import DEFAULT_MAX_EVALS, MlpConfig, mlp_estimate, reference_solution, weighted_l2_distance


class _ProblemParams(BaseEstimator):
    def __init__(self, problem="transport", d=2, T=1.0, eps=0.1, coupling=1.0,
                 n=2, m=2, t=0.0, seed=0, max_evals=DEFAULT_MAX_EVALS):
        self.problem = problem
        self.d = d
        self.T = T
        self.eps = eps
        self.coupling = coupling
        self.n = n
        self.m = m
        self.t = t
        self.seed = seed
        self.max_evals = max_evals

    def _setup(self, X=None):
        self.problem_ = make_problem(self.problem, self.d, self.T, self.eps, self.coupling)
        self.config_ = MlpConfig(self.n, self.m, self.t, self.seed, max_evals=self.max_evals)
        self.config_.check_budget()
        self.realization_ = RandomRealization(self.seed, self.d)
        self.n_features_in_ = self.d
        if X is not None:
            self._validate(X)

    def _validate(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.d:
            raise ValueError(f"X has {X.shape[1]} features, expected d={self.d}")
        return X


class MultilevelPicardEstimator(_ProblemParams):
    """Estimate ``(u, grad u)(t, x)`` for a library problem.

    ``predict`` returns an ``(N, d + 1)`` array; ``score`` is the negative
    weighted L2 error against the closed form when one exists.
    """

    def fit(self, X=None, y=None):
        self._setup(X)
        return self

    def predict(self, X):
        check_is_fitted(self, "config_")
        X = self._validate(X)
        return mlp_estimate(self.problem_, self.config_, X, realization=self.realization_)

    def score(self, X, y=None):
        X = self._validate(X)
        ref = reference_solution(self.problem_, self.t, X) if y is None else np.asarray(y, dtype=np.float64)
        err, _ = weighted_l2_distance(self.predict(X), ref, self.T - self.t)
        return -err


class CompiledMLPNetwork(TransformerMixin, _ProblemParams):
    """Compile the estimator into a ReLU network; ``transform`` realizes it."""

    def __init__(self, problem="transport", d=2, T=1.0, eps=0.1, coupling=1.0,
                 n=2, m=2, t=0.0, seed=0, max_evals=DEFAULT_MAX_EVALS,
                 max_params=DEFAULT_MAX_PARAMS):
        super().__init__(problem, d, T, eps, coupling, n, m, t, seed, max_evals)
        self.max_params = max_params

    def fit(self, X=None, y=None):
        self._setup(X)
        self.network_ = compile_mlp(self.problem_, self.config_, self.realization_, max_params=self.max_params)
        return self

    def transform(self, X):
        check_is_fitted(self, "network_")
        return realize(self.network_, self._validate(X))
