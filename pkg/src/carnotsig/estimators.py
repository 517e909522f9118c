"""scikit-learn style wrappers around the functional core.

``LogSignature`` turns batches of sampled paths into log-signature features;
``LogSignatureKDE`` is a density estimator over log-signature coordinates
with the same bandwidth rule and batch-means errors as ``kde_density``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .density import BATCHES, _RestSamples, kde_density, scott_bandwidth
from .free_lie import build_hall_basis
from .signature import logsig_from_increments

__all__ = ["LogSignature", "LogSignatureKDE"]


class LogSignature(TransformerMixin, BaseEstimator):
    """Log-signature features of piecewise-linear paths.

    Parameters
    ----------
    N : int
        Truncation level.
    basepoint : bool
        If True, every path is taken to start at the origin, so the first
        sample point counts as a segment end; otherwise paths start at
        their first point.

    Examples
    --------
    >>> X = np.array([[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]], dtype=float)
    >>> LogSignature(N=2).fit_transform(X).round(12)
    array([[0., 0., 1.]])
    """

    def __init__(self, N: int = 2, basepoint: bool = False):
        self.N = N
        self.basepoint = basepoint

    def _validate(self, X):
        X = check_array(X, allow_nd=True, ensure_2d=False, dtype=float)
        if X.ndim != 3:
            raise ValueError(f"expected paths of shape (n_paths, n_points, d), got {X.shape}")
        if X.shape[1] < (1 if self.basepoint else 2):
            raise ValueError("paths need at least one segment")
        return X

    def fit(self, X, y=None):
        X = self._validate(X)
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        self.d_ = X.shape[2]
        self.basis_ = build_hall_basis(self.d_, int(self.N))
        self.n_features_out_ = self.basis_.n
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = self._validate(X)
        if X.shape[2] != self.d_:
            raise ValueError(f"fitted for d={self.d_}, got paths in dimension {X.shape[2]}")
        if self.basepoint:
            X = np.concatenate([np.zeros((X.shape[0], 1, X.shape[2])), X], axis=1)
        return logsig_from_increments(np.diff(X, axis=1), self.basis_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "basis_")
        return np.array(self.basis_.labels, dtype=object)


class LogSignatureKDE(BaseEstimator):
    """Product-Gaussian kernel density over log-signature coordinates.

    Parameters
    ----------
    bandwidth : "auto" or array-like
        ``"auto"`` uses ``std_i * count^(-1/(n+4))`` per coordinate.
    batches : int
        Number of contiguous batches for the standard error.
    """

    def __init__(self, bandwidth="auto", batches: int = BATCHES):
        self.bandwidth = bandwidth
        self.batches = batches

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, dtype=float)
        if X.shape[0] < self.batches:
            raise ValueError(f"need at least {self.batches} samples")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise ValueError(f"unknown bandwidth rule {self.bandwidth!r}")
            self.bandwidth_ = scott_bandwidth(X)
        else:
            self.bandwidth_ = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (X.shape[1],)).copy()
        self.log_weights_ = None if sample_weight is None else np.log(np.asarray(sample_weight, dtype=float))
        self.samples_ = X
        self.n_features_in_ = X.shape[1]
        return self

    def _sample_set(self):
        return _RestSamples(self.samples_, self.log_weights_)

    def density(self, X):
        """Density estimates and batch-means standard errors at each row of ``X``."""
        check_is_fitted(self, "samples_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        ests = kde_density(self._sample_set(), X, bandwidth=self.bandwidth_, batches=self.batches)
        return np.array([e.value for e in ests]), np.array([e.stderr for e in ests])

    def score_samples(self, X):
        """Log density at each row of ``X``."""
        check_is_fitted(self, "samples_")
        X = check_array(X, dtype=float)
        ests = kde_density(self._sample_set(), X, bandwidth=self.bandwidth_, batches=self.batches)
        return np.array([e.log_value for e in ests])

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

