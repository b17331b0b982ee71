"""scikit-learn style wrappers.

Rows are realisations: Hamiltonians ``(n, d, d)`` become spectra ``(n, d)``,
spectra become form-factor curves ``(n, T)`` and :class:`RampAnalyzer`
reduces a stack of curves to its ramp metrics.  The wrappers compose in a
:class:`sklearn.pipeline.Pipeline`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import DEFAULT_EPSILON, DEFAULT_TAIL, DEFAULT_WINDOW, FromTail, ramp_metrics
from .ensemble import SffCurve, TimeGrid
from .errors import InvalidArgumentError
from .sff import FilterSpec, sff_bgl, sff_dephasing_jumps, sff_filtered, sff_unitary
from .spectral import Spectrum, diagonalize


def _times(times) -> np.ndarray:
    t = TimeGrid().times() if times is None else np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0) or np.any(t < 0):
        raise InvalidArgumentError("times must be a non-empty ascending 1-d array of non-negative values")
    return t


class SpectrumTransformer(TransformerMixin, BaseEstimator):
    """Stack of Hermitian matrices ``(n, d, d)`` to sorted eigenvalues ``(n, d)``."""

    def fit(self, X, y=None):
        X = self._check(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = self._check(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(f"expected {self.n_features_in_}x{self.n_features_in_} matrices")
        return np.stack([diagonalize(m).energies for m in X])

    @staticmethod
    def _check(X):
        # check_array rejects complex input, and SYK Hamiltonians are complex
        X = np.asarray(X)
        if not np.iscomplexobj(X):
            X = check_array(X, allow_nd=True, ensure_2d=False)
        elif not np.all(np.isfinite(X)):
            raise InvalidArgumentError("matrices contain NaN or infinity")
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3 or X.shape[1] != X.shape[2]:
            raise InvalidArgumentError("expected square matrices of shape (n, d, d)")
        return X


class FormFactorTransformer(TransformerMixin, BaseEstimator):
    """Spectra ``(n, d)`` to per-realisation form-factor curves ``(n, T)``.

    Parameters
    ----------
    beta, gamma : float
        Inverse temperature and dephasing rate.
    evaluator : {"unitary", "bgl", "dephasing_jumps", "filtered"}
    delta : float
        Exponent of the power filter (``evaluator="filtered"`` only).
    times : array_like, optional
        Output grid; defaults to :class:`~bglsff.ensemble.TimeGrid`.
    """

    def __init__(self, beta=0.0, gamma=0.0, evaluator="bgl", delta=2.0, times=None):
        self.beta = beta
        self.gamma = gamma
        self.evaluator = evaluator
        self.delta = delta
        self.times = times

    def fit(self, X, y=None):
        X = check_array(X)
        if self.evaluator not in ("unitary", "bgl", "dephasing_jumps", "filtered"):
            raise InvalidArgumentError(f"unknown evaluator {self.evaluator!r}")
        self.times_ = _times(self.times)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "times_")
        X = check_array(X)
        rows = []
        for energies in X:
            s = Spectrum(energies)
            if self.evaluator == "unitary":
                rows.append(sff_unitary(s, self.beta, self.times_))
            elif self.evaluator == "bgl":
                rows.append(sff_bgl(s, self.beta, self.gamma, self.times_))
            elif self.evaluator == "dephasing_jumps":
                rows.append(sff_dephasing_jumps(s, self.beta, self.gamma, self.times_))
            else:
                rows.append(sff_filtered(s, self.beta, FilterSpec.power(self.gamma, self.delta), self.times_))
        return np.stack(rows)


class RampAnalyzer(BaseEstimator):
    """Average a stack of curves ``(n, T)`` and extract dip, plateau and ``t_p / t_d``.

    After :meth:`fit` the metrics are available as ``metrics_`` and the
    averaged curve as ``curve_``; :meth:`score` returns the ramp ratio.
    """

    def __init__(self, times=None, window_decades=DEFAULT_WINDOW, epsilon=DEFAULT_EPSILON,
                 tail_decades=DEFAULT_TAIL):
        self.times = times
        self.window_decades = window_decades
        self.epsilon = epsilon
        self.tail_decades = tail_decades

    def _analyze(self, X):
        X = check_array(X)
        t = _times(self.times)
        if X.shape[1] != t.size:
            raise InvalidArgumentError(f"curves have {X.shape[1]} points but the grid has {t.size}")
        n = X.shape[0]
        stderr = X.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(t.size)
        curve = SffCurve(times=t, mean=X.mean(axis=0), stderr=stderr, n_ok=n)
        metrics = ramp_metrics(curve, FromTail(self.tail_decades), self.window_decades, self.epsilon)
        return curve, metrics

    def fit(self, X, y=None):
        self.curve_, self.metrics_ = self._analyze(X)
        self.n_features_in_ = self.curve_.times.size
        return self

    def score(self, X=None, y=None) -> float:
        """Ramp ratio ``t_p / t_d`` of the fitted curves, or of ``X`` if given."""
        check_is_fitted(self, "metrics_")
        if X is None:
            return self.metrics_.ratio
        return self._analyze(X)[1].ratio
