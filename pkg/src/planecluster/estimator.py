"""scikit-learn style front end to the clustering engine."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import deviation_matrix
from .engine import EngineConfig, assign, run
from .kernels import KernelSpec, kernel_matrix
from .losses import LossSpec
from .solvers import SolveConfig


class PlaneClustering(ClusterMixin, TransformerMixin, BaseEstimator):
    """Partition samples around ``n_clusters`` hyperplanes.

    Parameters
    ----------
    n_clusters : int, default=2
    preset : str, default="rfdpc"
        Loss pair: ``kpc``, ``ppc``, ``twsvc``, ``rtwsvc``, ``frtwsvc``,
        ``ramptwsvc`` or ``rfdpc``.
    c : float, default=1.0
        Between-cluster weight with the within-cluster weight fixed at 1.
        Ignored for a weight given explicitly through ``c_w`` or ``c_b``.
    c_w, c_b : float or None
        Explicit within- and between-cluster weights.
    delta, s : float
        Ramp breakpoints for ``ramptwsvc`` and ``rfdpc``.
    gamma1, gamma2 : float
        Weights of the deviation mean and variance terms of ``rfdpc``.
    kernel : {"linear", "gaussian"}
        With ``"gaussian"`` every sample is replaced by its kernel values
        against the training samples before clustering.
    mu : float
        Gaussian kernel width.
    init : {"nng", "random"}
    n_neighbors : int
        Neighbours per sample in the ``nng`` initial graph.
    termination : {"both", "repeat", "objective"}
    assignment : {"simplified", "full"}
    max_iter : int
    cccp_max_outer : int
        Outer iterations of each nonconvex plane subproblem.
    random_state : int or None
        Seed of the ``random`` initialization.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Cluster index of every training sample, starting at 0.
    coef_ : ndarray of shape (n_clusters, n_features_mapped)
    intercept_ : ndarray of shape (n_clusters,)
    objective_ : float
    n_iter_ : int
    converged_ : bool
    termination_reason_ : str
    objective_trace_ : list of float

    Examples
    --------
    >>> import numpy as np
    >>> t = np.linspace(-1, 1, 20)
    >>> X = np.vstack([np.c_[t, 0 * t], np.c_[0 * t + 3, t]])
    >>> PlaneClustering(n_clusters=2, preset="kpc").fit(X).labels_[[0, -1]]
    array([0, 1])
    """

    def __init__(
        self,
        n_clusters=2,
        preset="rfdpc",
        c=1.0,
        c_w=None,
        c_b=None,
        delta=0.3,
        s=-0.2,
        gamma1=1.0,
        gamma2=1.0,
        kernel="linear",
        mu=1.0,
        init="nng",
        n_neighbors=5,
        termination="both",
        assignment="simplified",
        max_iter=100,
        cccp_max_outer=50,
        random_state=None,
    ):
        self.n_clusters = n_clusters
        self.preset = preset
        self.c = c
        self.c_w = c_w
        self.c_b = c_b
        self.delta = delta
        self.s = s
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.kernel = kernel
        self.mu = mu
        self.init = init
        self.n_neighbors = n_neighbors
        self.termination = termination
        self.assignment = assignment
        self.max_iter = max_iter
        self.cccp_max_outer = cccp_max_outer
        self.random_state = random_state

    def loss_spec(self) -> LossSpec:
        params = dict(delta=self.delta, s=self.s, gamma1=self.gamma1, gamma2=self.gamma2)
        if self.c_w is not None:
            params["c_w"] = self.c_w
        if self.c_b is not None:
            params["c_b"] = self.c_b
        return LossSpec.from_preset(self.preset, c=self.c, **params)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            n_clusters=self.n_clusters,
            init=self.init,
            n_neighbors=self.n_neighbors,
            random_state=self.random_state,
            termination=self.termination,
            max_iter=self.max_iter,
            assignment=self.assignment,
            solve=SolveConfig(cccp_max_outer=self.cccp_max_outer),
        )

    def _map(self, X):
        if self.kernel_spec_.kind == "linear":
            return X
        return kernel_matrix(X, self.basis_, self.kernel_spec_)

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        self.spec_ = self.loss_spec()
        config = self.engine_config()
        self.kernel_spec_ = KernelSpec(self.kernel, self.mu)
        self.basis_ = X if self.kernel != "linear" else None
        state, trace = run(self._map(X), self.spec_, config)
        self.state_ = state
        self.labels_ = state.labels
        self.planes_ = state.planes
        self.coef_ = state.planes.weights
        self.intercept_ = state.planes.biases
        self.objective_ = state.objective
        self.n_iter_ = state.iteration
        self.converged_ = state.converged
        self.termination_reason_ = state.termination_reason
        self.objective_trace_ = list(trace.objectives)
        self.trace_ = trace
        return self

    def transform(self, X):
        """Deviation of every sample from every cluster plane, shape (n_samples, n_clusters)."""
        check_is_fitted(self, "planes_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return deviation_matrix(self._map(X), self.planes_, self.spec_.deviation_kind)

    def predict(self, X):
        """Index of the plane each sample deviates least from."""
        check_is_fitted(self, "planes_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return assign(self._map(X), self.planes_, self.spec_, "simplified")
