"""scikit-learn style estimators over the functional model/estimation API.

Inputs are 1-D complex sample arrays (or :class:`~dpdlab.signals.ComplexSignal`),
not 2-D feature matrices: the regressor is built internally from the
signal's own history.  ``get_params``/``set_params``/``clone`` behave as in
scikit-learn, so these compose with its tooling for parameter sweeps.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_same_length, check_signal
from .estimation import (
    DEFAULT_REGULARIZATION,
    UpdateConfig,
    fit_proactive,
    fit_static,
    ila_update,
    ls_solve,
    robust_update,
)
from .models import (
    ModelStructure,
    ParameterSet,
    StateConfig,
    build_regressor,
    compute_state,
    model_output,
    proactive_output,
)
from .signals import DEFAULT_SAMPLE_RATE


def _structure(est):
    kind = "GMP" if (est.lag_terms or est.lead_terms) else "MP"
    return ModelStructure(kind, est.order, est.memory_depth, est.lag_terms, est.lead_terms)


def _check_fitted(est):
    if not hasattr(est, "params_"):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class MemoryPolynomial(BaseEstimator):
    """Forward behavioral model ``y ~ H_x theta`` (MP, or GMP with cross terms)."""

    def __init__(self, order=7, memory_depth=4, lag_terms=(), lead_terms=(),
                 regularization=DEFAULT_REGULARIZATION):
        self.order = order
        self.memory_depth = memory_depth
        self.lag_terms = lag_terms
        self.lead_terms = lead_terms
        self.regularization = regularization

    def fit(self, X, y):
        X = check_signal(X, "X")
        y = check_signal(y, "y")
        check_same_length(("X", X), ("y", y))
        self.structure_ = _structure(self)
        self.params_ = fit_static(X, y, self.structure_, self.regularization)
        self.coef_ = self.params_.theta
        return self

    def predict(self, X):
        _check_fitted(self)
        return model_output(check_signal(X, "X"), self.params_)

    def score(self, X, y):
        """Negative NMSE in dB (higher is better, as scikit-learn expects)."""
        from .testbed import nmse_db

        return -nmse_db(check_signal(y, "y"), self.predict(X))


class ProactiveMemoryPolynomial(MemoryPolynomial):
    """State-dependent model ``y ~ H_x (theta + s[n] theta_dyn)``.

    ``s`` defaults to the low-passed power of ``X``; pass ``state`` to
    supply it explicitly.
    """

    def __init__(self, order=7, memory_depth=2, lag_terms=(), lead_terms=(),
                 regularization=DEFAULT_REGULARIZATION, state_cutoff_hz=50e3,
                 sample_rate_hz=DEFAULT_SAMPLE_RATE):
        super().__init__(order, memory_depth, lag_terms, lead_terms, regularization)
        self.state_cutoff_hz = state_cutoff_hz
        self.sample_rate_hz = sample_rate_hz

    def _state(self, X, state):
        if state is not None:
            return check_signal(state, "state", allow_real=True)
        return compute_state(X, StateConfig(self.state_cutoff_hz, self.sample_rate_hz))

    def fit(self, X, y, state=None):
        X = check_signal(X, "X")
        y = check_signal(y, "y")
        check_same_length(("X", X), ("y", y))
        self.structure_ = _structure(self)
        s = self._state(X, state)
        self.params_ = fit_proactive(X, y, s, self.structure_, self.regularization)
        self.coef_ = self.params_.stacked()
        return self

    def predict(self, X, state=None):
        _check_fitted(self)
        X = check_signal(X, "X")
        return proactive_output(X, self.params_, self._state(X, state))


class Predistorter(TransformerMixin, BaseEstimator):
    """Adaptive predistorter identified through indirect learning.

    ``fit(X, y)`` identifies a postdistorter in one shot: ``X`` is the PA
    input, ``y`` the PA output already divided by the target gain.
    ``partial_fit`` applies one update step (``algorithm`` is ``"ila"`` or
    ``"robust"``) and ``transform`` predistorts.  Unfitted estimators start
    from the unit linear tap on their first ``partial_fit``.

    ``warmup`` arguments mark leading samples that only provide regressor
    history: they are excluded from the fit rows and from the output.
    """

    def __init__(self, order=7, memory_depth=4, lag_terms=(), lead_terms=(),
                 mu=0.8, algorithm="ila", regularization=DEFAULT_REGULARIZATION):
        self.order = order
        self.memory_depth = memory_depth
        self.lag_terms = lag_terms
        self.lead_terms = lead_terms
        self.mu = mu
        self.algorithm = algorithm
        self.regularization = regularization

    def _update_config(self):
        return UpdateConfig(self.mu, self.regularization, self.algorithm)

    def _rows(self, X, warmup):
        return build_regressor(X, self.structure_)[warmup:]

    def fit(self, X, y, warmup=0):
        X = check_signal(X, "X")
        y = check_signal(y, "y")
        check_same_length(("X", X), ("y", y))
        self._update_config()
        self.structure_ = _structure(self)
        theta = ls_solve(self._rows(y, warmup), X[warmup:], self.regularization)
        self.params_ = ParameterSet(self.structure_, theta)
        self.n_updates_ = 0
        return self

    def initialize(self, params=None):
        """Install ``params`` (default: unit linear tap) without fitting."""
        self.structure_ = _structure(self)
        if params is None:
            params = ParameterSet.unit_linear(self.structure_)
        if params.structure.n_coeff != self.structure_.n_coeff:
            raise ValueError("parameter set does not match this estimator's structure")
        self.params_ = ParameterSet(self.structure_, params.theta)
        self.n_updates_ = 0
        return self

    def partial_fit(self, X, y, warmup=0):
        cfg = self._update_config()
        if not hasattr(self, "params_"):
            self.initialize()
        X = check_signal(X, "X")
        y = check_signal(y, "y")
        check_same_length(("X", X), ("y", y))
        H_y = self._rows(y, warmup)
        target = X[warmup:]
        theta = self.params_.theta
        if cfg.algorithm == "ila":
            theta = ila_update(theta, H_y, target, cfg)
        elif cfg.algorithm == "robust":
            theta = robust_update(theta, H_y, self._rows(X, warmup), target, cfg)
        else:
            raise ValueError(f"algorithm {cfg.algorithm!r} does not adapt")
        self.params_ = ParameterSet(self.structure_, theta)
        self.n_updates_ += 1
        return self

    def transform(self, X, warmup=0):
        _check_fitted(self)
        X = check_signal(X, "X")
        return model_output(X, self.params_)[warmup:]

    @property
    def coef_(self):
        _check_fitted(self)
        return self.params_.theta


class ProactivePredistorter(TransformerMixin, BaseEstimator):
    """Predistorter whose effective coefficients follow the input power.

    Identified once (``fit``) and never updated afterwards.  The state
    is computed from the model input: the normalized PA output while fitting,
    the DPD input while predistorting.  Both agree once the loop is
    linearized.
    """

    def __init__(self, order=7, memory_depth=2, lag_terms=(), lead_terms=(),
                 regularization=DEFAULT_REGULARIZATION, state_cutoff_hz=50e3,
                 sample_rate_hz=DEFAULT_SAMPLE_RATE):
        self.order = order
        self.memory_depth = memory_depth
        self.lag_terms = lag_terms
        self.lead_terms = lead_terms
        self.regularization = regularization
        self.state_cutoff_hz = state_cutoff_hz
        self.sample_rate_hz = sample_rate_hz

    def _state_config(self):
        return StateConfig(self.state_cutoff_hz, self.sample_rate_hz)

    def fit(self, X, y, state=None):
        X = check_signal(X, "X")
        y = check_signal(y, "y")
        check_same_length(("X", X), ("y", y))
        self.structure_ = _structure(self)
        s = compute_state(y, self._state_config()) if state is None else state
        self.params_ = fit_proactive(y, X, s, self.structure_, self.regularization)
        return self

    def initialize(self, params=None):
        self.structure_ = _structure(self)
        if params is None:
            params = ParameterSet.unit_linear(self.structure_, proactive=True)
        if params.theta_dyn is None:
            params = ParameterSet(params.structure, params.theta,
                                  np.zeros_like(params.theta))
        self.params_ = params
        return self

    def transform(self, X, state=None, warmup=0):
        _check_fitted(self)
        X = check_signal(X, "X")
        s = compute_state(X, self._state_config()) if state is None else state
        return proactive_output(X, self.params_, s)[warmup:]

    @property
    def coef_(self):
        _check_fitted(self)
        return self.params_.stacked()
