"""Online dynamic mode decomposition with rank-one updates.

The best-fit one-step operator ``A = Y X^+`` is initialised from a batch of
snapshot pairs and then refreshed pair by pair with the Sherman-Morrison
identity, carrying ``P = (X X^T)^{-1}`` alongside ``A``.  ``Q = Y X^T`` is
never formed.
"""

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_vector
from .errors import DimensionMismatch, InputError, NumericalBreakdown, RankDeficient

#: XX^T with condition number above this is treated as singular
MAX_CONDITION = 1e12
MIN_DENOMINATOR = 1e-12


@dataclass(frozen=True)
class SnapshotPair:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = check_vector(self.x, "x")
        y = check_vector(self.y, "y")
        if x.shape != y.shape:
            raise DimensionMismatch(f"x has length {x.shape[0]} but y has {y.shape[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class OdmdModel:
    A: np.ndarray
    P: np.ndarray
    k: int = 0

    @property
    def n(self):
        return self.A.shape[0]

    def eigenvalues(self):
        """Spectrum of ``A`` (diagnostic only)."""
        return np.linalg.eigvals(self.A)


def _stack(pairs):
    pairs = [p if isinstance(p, SnapshotPair) else SnapshotPair(*p) for p in pairs]
    if not pairs:
        raise InputError("no snapshot pairs")
    n = pairs[0].x.shape[0]
    if any(p.x.shape[0] != n for p in pairs):
        raise DimensionMismatch("snapshot pairs have different lengths")
    X = np.column_stack([p.x for p in pairs])
    Y = np.column_stack([p.y for p in pairs])
    return X, Y


def init_batch(pairs, max_condition=MAX_CONDITION):
    """Least-squares operator and inverse covariance from snapshot pairs."""
    X, Y = _stack(pairs)
    n, m = X.shape
    if m < n:
        raise RankDeficient(f"{m} pairs cannot determine a {n}x{n} operator")
    C = X @ X.T
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > max_condition:
        raise RankDeficient(f"X X^T is singular (condition number {cond:.3g})")
    P = np.linalg.inv(C)
    P = 0.5 * (P + P.T)
    A = Y @ X.T @ P
    return OdmdModel(A=A, P=P, k=m)


def predict(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise DimensionMismatch(f"expected a vector of length {model.n}, got shape {x.shape}")
    return model.A @ x


def update(model, pair):
    """Fold one more snapshot pair into ``model`` (returns a new model)."""
    if not isinstance(pair, SnapshotPair):
        pair = SnapshotPair(*pair)
    x, y = pair.x, pair.y
    if x.shape[0] != model.n:
        raise DimensionMismatch(f"expected vectors of length {model.n}, got {x.shape[0]}")
    Px = model.P @ x
    denom = 1.0 + x @ Px
    if not np.isfinite(denom) or denom <= MIN_DENOMINATOR:
        raise NumericalBreakdown(f"Sherman-Morrison denominator {denom!r}")
    residual = y - model.A @ x
    A = model.A + np.outer(residual, Px) / denom
    P = model.P - np.outer(Px, Px) / denom
    P = 0.5 * (P + P.T)
    return replace(model, A=A, P=P, k=model.k + 1)


@dataclass(frozen=True)
class MeasurementFrame:
    """What a follower observes about its right-hand neighbour.

    Attributes
    ----------
    offset : relative position of the neighbour at the new step, measured
        from the follower's current position (Euclidean chart vector).
    neighbor_step : the neighbour's displacement over the last step.
    d : Euclidean distance to hold to the neighbour.
    dt : time step.
    """

    offset: np.ndarray
    neighbor_step: np.ndarray
    d: float
    dt: float


def measured_velocity(measurement, predicted):
    """Velocity that restores Euclidean distance ``d`` to the neighbour while
    moving parallel to the neighbour's last displacement.

    The follower moves by ``lam * neighbor_step``; ``lam`` solves
    ``|lam * step - offset| = d``.  Of the two roots the one closer to the
    predicted displacement is used; without a real root the closest approach
    is taken.
    """
    r = np.asarray(measurement.offset, dtype=float)
    delta = np.asarray(measurement.neighbor_step, dtype=float)
    dd = delta @ delta
    if dd == 0.0:
        return np.zeros_like(delta)
    dr = delta @ r
    disc = dr * dr - dd * (r @ r - measurement.d ** 2)
    lam_hat = (np.asarray(predicted) * measurement.dt) @ delta / dd
    if disc < 0.0:
        lam = dr / dd
    else:
        root = np.sqrt(disc)
        lams = np.array([(dr - root) / dd, (dr + root) / dd])
        lam = lams[np.argmin(np.abs(lams - lam_hat))]
    return lam * delta / measurement.dt


def correct(predicted, measurement, weight=1.0):
    """Blend the prediction with the measurement-derived velocity."""
    target = measured_velocity(measurement, predicted)
    return (1.0 - weight) * np.asarray(predicted, dtype=float) + weight * target


def control_step(model, x, measurement, weight=1.0):
    """One predict / correct / update cycle; returns ``(corrected, new_model)``."""
    predicted = predict(model, x)
    corrected = correct(predicted, measurement, weight)
    return corrected, update(model, SnapshotPair(x, corrected))


class OnlineDMD(BaseEstimator):
    """scikit-learn style wrapper around :func:`init_batch` / :func:`update`.

    Snapshots are columns, as in ``X = [x_0 ... x_{m-1}]``.

    Attributes
    ----------
    model_ : OdmdModel
    A_, P_ : ndarray
    n_updates_ : int
    """

    def __init__(self, max_condition=MAX_CONDITION):
        self.max_condition = max_condition

    def _set(self, model):
        self.model_ = model
        self.A_ = model.A
        self.P_ = model.P
        self.n_updates_ = model.k
        return self

    def fit(self, X, Y=None):
        """Fit from snapshot matrices, or from a single trajectory when ``Y`` is None."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise InputError("X must be 2-D (state x snapshot)")
        if Y is None:
            X, Y = X[:, :-1], X[:, 1:]
        Y = np.asarray(Y, dtype=float)
        if X.shape != Y.shape:
            raise DimensionMismatch(f"X {X.shape} and Y {Y.shape} differ")
        pairs = [SnapshotPair(X[:, k], Y[:, k]) for k in range(X.shape[1])]
        return self._set(init_batch(pairs, self.max_condition))

    def partial_fit(self, x, y):
        check_is_fitted(self, "model_")
        return self._set(update(self.model_, SnapshotPair(x, y)))

    def predict(self, x):
        """One-step prediction; ``x`` may be a vector or a state x sample matrix."""
        check_is_fitted(self, "model_")
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            if x.shape[0] != self.model_.n:
                raise DimensionMismatch(f"expected {self.model_.n} rows, got {x.shape[0]}")
            return self.model_.A @ x
        return predict(self.model_, x)
