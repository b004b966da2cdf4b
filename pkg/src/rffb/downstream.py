"""Kernel ridge regression and SVMs with exact and random-feature kernels.

Both learners are checked against deterministic propagation inequalities:
given the realized kernel-entry error ``u`` of a basis, the prediction gap
between the exact and approximate models is bounded in terms of ``u``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import bounds
from .core import FrequencyBasis, feature_matrix, gaussian_gram, standard_normal
from .errors import ConvergenceError, InvalidArgument

MODES = ("exact", "rff")


@dataclass(frozen=True)
class Dataset:
    """Points ``X`` (n, d) with targets or labels ``y``.

    ``R`` is the largest pairwise distance, so every point lies in a ball of
    diameter ``R``.
    """

    X: np.ndarray
    y: np.ndarray
    R: float = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if X.shape[0] < 1 or X.shape[0] != y.size:
            raise InvalidArgument(f"need n >= 1 points with one target each, got {X.shape[0]} and {y.size}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidArgument("points and targets must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        diam = float(np.sqrt(np.max(_sq_dists(X, X)))) if X.shape[0] > 1 else 0.0
        if self.R is None:
            object.__setattr__(self, "R", diam)
        elif self.R < diam * (1 - 1e-12):
            raise InvalidArgument(f"points span diameter {diam!r} > recorded R={self.R!r}")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


def _sq_dists(X, Y):
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.maximum(sq, 0.0)


def _check_mode(mode, basis):
    if mode not in MODES:
        raise InvalidArgument(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "rff" and not isinstance(basis, FrequencyBasis):
        raise InvalidArgument("rff mode requires a FrequencyBasis")


def _gram(mode, basis, X, Y):
    if mode == "exact":
        return gaussian_gram(X, Y)
    return feature_matrix(X, basis) @ feature_matrix(Y, basis).T


def _points(x, d):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != d:
        raise InvalidArgument(f"points must have d={d} columns, got {x.shape[1]}")
    return x


def regression_data(n, d, seed, scale=0.5, noise=0.1):
    """Smooth random targets ``sin(x . w) + noise``, centred to mean zero.

    Centring makes the standard deviation equal to the root mean square.
    """
    X = scale * standard_normal(seed, 0, n * d).reshape(n, d)
    w = standard_normal(seed, 1, d)
    y = np.sin(X @ w) + noise * standard_normal(seed, 2, n)
    return Dataset(X, y - y.mean())


def blob_data(n, d, seed, separation=1.0, spread=0.7):
    """Two Gaussian blobs at ``+-separation * e_1`` with labels ``+-1``."""
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X = spread * standard_normal(seed, 0, n * d).reshape(n, d)
    X[:, 0] += separation * y
    return Dataset(X, y)


def probe_points(data, count, seed):
    """Points drawn like the training inputs: around them, inside their hull scale."""
    idx = np.arange(count) % data.n
    jitter = standard_normal(seed, 3, count * data.d).reshape(count, data.d)
    return data.X[idx] + 0.25 * jitter


# --- kernel ridge regression -----------------------------------------------

@dataclass(frozen=True)
class KRRModel:
    lam: float
    dual_coefficients: np.ndarray
    m: float
    mode: str
    train_X: np.ndarray
    basis: FrequencyBasis = None
    residual: float = 0.0


def krr_fit(data, lam, mode="exact", basis=None):
    """Solve ``(K + lam I) a = y`` by Cholesky, with ``K`` exact or from RFF."""
    if not lam > 0:
        raise InvalidArgument(f"lambda must be positive, got {lam!r}")
    _check_mode(mode, basis)
    K = _gram(mode, basis, data.X, data.X)
    A = K + lam * np.eye(data.n)
    a = cho_solve(cho_factor(A, lower=True), data.y)
    ynorm = np.linalg.norm(data.y)
    res = np.linalg.norm(A @ a - data.y) / ynorm if ynorm > 0 else 0.0
    return KRRModel(lam, a, float(np.std(data.y)), mode, data.X, basis, float(res))


def krr_predict(model, x):
    """Predictions ``a . k_x`` for one point or an ``(m, d)`` array."""
    single = np.asarray(x).ndim == 1
    x = _points(x, model.train_X.shape[1])
    h = _gram(model.mode, model.basis, x, model.train_X) @ model.dual_coefficients
    return float(h[0]) if single else h


def kernel_entry_error(basis, *point_sets):
    """Largest ``|k - k_hat|`` over all pairs drawn from the given point sets."""
    P = np.concatenate([np.atleast_2d(p) for p in point_sets], axis=0)
    return float(np.max(np.abs(gaussian_gram(P, P) - _gram("rff", basis, P, P))))


@dataclass(frozen=True)
class KRRGapReport:
    u: float
    m: float
    bound: float
    gap: float
    residual: float
    skipped: bool = False

    @property
    def passed(self):
        return self.skipped or self.gap <= self.bound


def krr_gap_bound(lam, m, u):
    """Prediction gap implied by kernel error ``u``: ``(lam + 1) m u / lam^2``."""
    return (lam + 1.0) * m * u / (lam * lam)


def krr_gap_check(data, lam, basis, probes):
    """Measure ``max |h_hat - h|`` over ``probes`` against the implied bound."""
    exact = krr_fit(data, lam, "exact")
    approx = krr_fit(data, lam, "rff", basis)
    u = kernel_entry_error(basis, data.X, probes)
    if exact.m == 0.0:
        return KRRGapReport(u, 0.0, 0.0, 0.0, exact.residual, skipped=True)
    gap = float(np.max(np.abs(krr_predict(approx, probes) - krr_predict(exact, probes))))
    return KRRGapReport(u, exact.m, krr_gap_bound(lam, exact.m, u), gap, exact.residual)


# --- support vector machine ------------------------------------------------

@dataclass(frozen=True)
class SVMModel:
    """``h(x) = sum_i alpha_i y_i k(x_i, x)``; in rff mode also ``eta``."""

    C0: float
    mode: str
    alpha: np.ndarray
    train_X: np.ndarray
    train_y: np.ndarray
    solver_gap: float
    basis: FrequencyBasis = None
    eta: np.ndarray = None


def _duality_gap(alpha, Qa, box):
    # primal - dual with eta = sum alpha_i y_i Phi(x_i): alpha'Q alpha - sum alpha + hinge
    hinge = np.maximum(0.0, 1.0 - Qa).sum()
    return float(alpha @ Qa - alpha.sum() + box * hinge)


def _solve_box_dual(Q, box, tol, max_sweeps):
    """Maximize ``sum a - a'Qa/2`` over ``0 <= a <= box`` by cyclic coordinate ascent."""
    n = Q.shape[0]
    alpha = np.zeros(n)
    Qa = np.zeros(n)
    diag = np.diag(Q)
    gap = _duality_gap(alpha, Qa, box)
    for _ in range(max_sweeps):
        if gap <= tol:
            return alpha, gap
        for i in range(n):
            new = min(box, max(0.0, alpha[i] + (1.0 - Qa[i]) / diag[i]))
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                Qa += delta * Q[:, i]
        Qa = Q @ alpha  # refresh to stop drift
        gap = _duality_gap(alpha, Qa, box)
    if gap <= tol:
        return alpha, gap
    raise ConvergenceError(f"duality gap {gap!r} above tol {tol!r} after {max_sweeps} sweeps", gap)


def svm_fit(data, C0, mode="exact", basis=None, tol=1e-8, max_sweeps=100_000):
    """Fit the bias-free SVM ``min |eta|^2/2 + C0/n sum hinge(y_i h(x_i))``.

    Both modes solve the box-constrained dual; without a bias term there is
    no equality constraint, so single coordinates can be updated exactly. In
    rff mode the dual runs on ``Z Z'`` and the primal weight is recovered as
    ``eta = Z' (alpha * y)``. ``solver_gap`` is the certified duality gap.
    """
    y = data.y
    if not np.all(np.abs(y) == 1.0):
        raise InvalidArgument("labels must be -1 or +1")
    if not (C0 > 0 and tol > 0):
        raise InvalidArgument(f"need C0 > 0 and tol > 0, got {C0!r}, {tol!r}")
    _check_mode(mode, basis)
    if mode == "exact":
        Q = gaussian_gram(data.X, data.X) * np.outer(y, y)
        alpha, gap = _solve_box_dual(Q, C0 / data.n, tol, max_sweeps)
        return SVMModel(C0, mode, alpha, data.X, y, gap)
    Z = feature_matrix(data.X, basis)
    Q = (Z @ Z.T) * np.outer(y, y)
    alpha, _ = _solve_box_dual(Q, C0 / data.n, tol, max_sweeps)
    eta = Z.T @ (alpha * y)
    margins = y * (Z @ eta)
    primal = 0.5 * eta @ eta + C0 / data.n * np.maximum(0.0, 1.0 - margins).sum()
    dual = alpha.sum() - 0.5 * eta @ eta
    gap = float(primal - dual)
    if gap > tol:
        raise ConvergenceError(f"primal gap {gap!r} above tol {tol!r}", gap)
    return SVMModel(C0, mode, alpha, data.X, y, gap, basis, eta)


def svm_predict(model, x):
    single = np.asarray(x).ndim == 1
    x = _points(x, model.train_X.shape[1])
    if model.mode == "rff":
        h = feature_matrix(x, model.basis) @ model.eta
    else:
        h = gaussian_gram(x, model.train_X) @ (model.alpha * model.train_y)
    return float(h[0]) if single else h


def solver_slack(gap):
    """Prediction error from an optimality gap.

    The primal is 1-strongly convex, so ``|eta - eta*|^2 <= 2 gap``; features
    have unit norm, so predictions move by at most ``sqrt(2 gap)``.
    """
    return math.sqrt(2.0 * max(gap, 0.0))


@dataclass(frozen=True)
class SVMGapReport:
    u: float
    bound: float
    slack: float
    gap: float
    solver_gap_exact: float
    solver_gap_rff: float

    @property
    def passed(self):
        return self.gap <= self.bound + self.slack


def svm_gap_check(data, C0, basis, probes, tol=1e-8):
    exact = svm_fit(data, C0, "exact", tol=tol)
    approx = svm_fit(data, C0, "rff", basis, tol=tol)
    u = kernel_entry_error(basis, data.X, probes)
    gap = float(np.max(np.abs(svm_predict(approx, probes) - svm_predict(exact, probes))))
    slack = solver_slack(exact.solver_gap) + solver_slack(approx.solver_gap)
    return SVMGapReport(
        u, bounds.svm_error_propagation(C0, data.n, u), slack, gap,
        exact.solver_gap, approx.solver_gap,
    )
