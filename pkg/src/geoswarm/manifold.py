"""Potential fields and the geometry they induce on their graph surface.

A potential ``F(x1, x2)`` defines the surface ``x3 = F(x1, x2)`` in R^3.  All
quantities here live in the ``(x1, x2)`` chart.  Every function broadcasts over
leading axes: a point array of shape ``(..., 2)`` gives results with the same
leading shape.

Index conventions
-----------------
``gamma[..., k, i, j]``            Christoffel symbol Gamma^k_ij
``gamma_partials[..., k, i, j, l]`` derivative d_l Gamma^k_ij
``riemann[..., r, s, m, n]``        R^r_smn = d_m Gamma^r_ns - d_n Gamma^r_ms
                                    + Gamma^r_ml Gamma^l_ns - Gamma^r_nl Gamma^l_ms
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_points, check_positive
from .errors import InputError

POTENTIAL_KINDS = ("flat", "elliptic_paraboloid", "hyperbolic_paraboloid", "sincos")

#: central-difference step for d Gamma on potentials without coded third derivatives
FD_STEP = 1e-5


@dataclass(frozen=True)
class PotentialField:
    """One of the fixed potential families, with shape parameter ``a``.

    ``a`` is ignored by the flat potential but must still be positive.
    """

    kind: str
    a: float = 20.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise InputError(
                f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}"
            )
        object.__setattr__(self, "a", check_positive(self.a, "a"))

    @property
    def has_third_derivatives(self):
        return self.kind != "sincos"

    def value(self, p):
        return evaluate(self, p)[0]


def evaluate(field, p):
    """Return ``(F, grad, hess)`` at chart point(s) ``p`` in closed form."""
    p = np.asarray(p, dtype=float)
    x, y = p[..., 0], p[..., 1]
    a = field.a
    shape = x.shape
    grad = np.zeros(shape + (2,))
    hess = np.zeros(shape + (2, 2))
    if field.kind == "flat":
        F = np.zeros(shape)
    elif field.kind == "elliptic_paraboloid":
        F = (x * x + y * y) / a
        grad[..., 0] = 2.0 * x / a
        grad[..., 1] = 2.0 * y / a
        hess[..., 0, 0] = 2.0 / a
        hess[..., 1, 1] = 2.0 / a
    elif field.kind == "hyperbolic_paraboloid":
        F = (x * x - y * y) / a
        grad[..., 0] = 2.0 * x / a
        grad[..., 1] = -2.0 * y / a
        hess[..., 0, 0] = 2.0 / a
        hess[..., 1, 1] = -2.0 / a
    else:  # sincos
        sx, cx = np.sin(x / a), np.cos(x / a)
        sy, cy = np.sin(y / a), np.cos(y / a)
        F = sx + cy
        grad[..., 0] = cx / a
        grad[..., 1] = -sy / a
        hess[..., 0, 0] = -sx / (a * a)
        hess[..., 1, 1] = -cy / (a * a)
    return F, grad, hess


def eval_potential(field, p):
    """Validated public form of :func:`evaluate`."""
    return evaluate(field, check_points(p))


def _third_derivatives(field, p):
    # Only called for kinds with polynomial F of degree <= 2.
    p = np.asarray(p, dtype=float)
    return np.zeros(p.shape[:-1] + (2, 2, 2))


@dataclass(frozen=True)
class MetricData:
    """Metric, inverse metric and connection at one point (or a batch)."""

    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    gamma_partials: np.ndarray

    @classmethod
    def euclidean(cls, shape=()):
        eye = np.broadcast_to(np.eye(2), tuple(shape) + (2, 2)).copy()
        return cls(eye, eye.copy(), np.zeros(tuple(shape) + (2,) * 3),
                   np.zeros(tuple(shape) + (2,) * 4))

    def inner(self, u, v):
        """Metric inner product g(u, v), broadcasting over leading axes."""
        return np.einsum("...i,...ij,...j->...", u, self.g, v)

    def norm(self, u):
        return np.sqrt(self.inner(u, u))


def metric_tensor(grad):
    """Induced metric g_ij = delta_ij + F_i F_j and its inverse."""
    g = np.eye(2) + grad[..., :, None] * grad[..., None, :]
    D = 1.0 + np.sum(grad * grad, axis=-1)
    g_inv = np.eye(2) - grad[..., :, None] * grad[..., None, :] / D[..., None, None]
    return g, g_inv


def _gamma_levi_civita(grad, hess, g_inv):
    # d_c g_ab = F_ac F_b + F_a F_bc, stored as dg[..., a, b, c]
    dg = hess[..., :, None, :] * grad[..., None, :, None] + (
        grad[..., :, None, None] * hess[..., None, :, :]
    )
    # first kind: Gamma_{d,bc} = 1/2 (d_c g_db + d_b g_dc - d_d g_bc)
    first = 0.5 * (
        dg + np.swapaxes(dg, -1, -2) - np.moveaxis(dg, -1, -3)
    )
    return np.einsum("...ad,...dbc->...abc", g_inv, first)


def christoffel(field, p):
    """Fast closed form Gamma^k_ij = F_k F_ij / (1 + |grad F|^2).

    Used inside the integrators; :func:`metric_at` builds the same symbols
    from the metric derivatives instead.
    """
    _, grad, hess = evaluate(field, p)
    D = 1.0 + np.sum(grad * grad, axis=-1)
    return grad[..., :, None, None] * hess[..., None, :, :] / D[..., None, None, None]


def _gamma_partials_analytic(field, p, grad, hess):
    third = _third_derivatives(field, p)
    D = 1.0 + np.sum(grad * grad, axis=-1)
    dD = 2.0 * np.einsum("...m,...ml->...l", grad, hess)
    # d_l (F_k F_ij / D)
    num = (
        hess[..., :, None, None, :] * hess[..., None, :, :, None]
        + grad[..., :, None, None, None] * third[..., None, :, :, :]
    )
    return (
        num / D[..., None, None, None, None]
        - grad[..., :, None, None, None]
        * hess[..., None, :, :, None]
        * dD[..., None, None, None, :]
        / (D * D)[..., None, None, None, None]
    )


def _gamma_partials_fd(field, p, h=FD_STEP):
    out = np.empty(p.shape[:-1] + (2, 2, 2, 2))
    for l in range(2):
        e = np.zeros(2)
        e[l] = h
        plus = christoffel(field, p + e)
        minus = christoffel(field, p - e)
        out[..., l] = (plus - minus) / (2.0 * h)
    return out


def metric_at(field, p):
    """Metric, inverse, Christoffel symbols (from metric derivatives) and their partials."""
    p = check_points(p)
    _, grad, hess = evaluate(field, p)
    g, g_inv = metric_tensor(grad)
    gamma = _gamma_levi_civita(grad, hess, g_inv)
    if field.kind == "flat":
        dgamma = np.zeros(p.shape[:-1] + (2, 2, 2, 2))
    elif field.has_third_derivatives:
        dgamma = _gamma_partials_analytic(field, p, grad, hess)
    else:
        dgamma = _gamma_partials_fd(field, p)
    return MetricData(g=g, g_inv=g_inv, gamma=gamma, gamma_partials=dgamma)


def riemann_tensor(gamma, dgamma):
    """R^r_smn from Christoffel symbols and their partials (index layout in module doc)."""
    d_m = np.einsum("...rnsm->...rsmn", dgamma)  # d_m Gamma^r_ns
    d_n = np.einsum("...rmsn->...rsmn", dgamma)  # d_n Gamma^r_ms
    quad1 = np.einsum("...rml,...lns->...rsmn", gamma, gamma)
    quad2 = np.einsum("...rnl,...lms->...rsmn", gamma, gamma)
    return d_m - d_n + quad1 - quad2


def sectional_curvature(riemann, g, X, Y):
    """Sectional curvature of the plane span{X, Y}.

    With the index convention of :func:`riemann_tensor`, R(X,Y)Z has
    components R^r_smn Z^s X^m Y^n and kappa = <R(X,Y)Y, X> / (|X|^2|Y|^2 - <X,Y>^2).
    """
    RXYY = np.einsum("...rsmn,...s,...m,...n->...r", riemann, Y, X, Y)
    num = np.einsum("...r,...rl,...l->...", RXYY, g, X)
    xx = np.einsum("...i,...ij,...j->...", X, g, X)
    yy = np.einsum("...i,...ij,...j->...", Y, g, Y)
    xy = np.einsum("...i,...ij,...j->...", X, g, Y)
    return num / (xx * yy - xy * xy)


@dataclass(frozen=True)
class CurvatureTensor:
    riemann: np.ndarray
    sectional: np.ndarray


def riemann_at(field, p):
    """Riemann tensor and the (single) sectional curvature at ``p``."""
    md = metric_at(field, p)
    R = riemann_tensor(md.gamma, md.gamma_partials)
    shape = R.shape[:-4]
    e1 = np.broadcast_to([1.0, 0.0], shape + (2,))
    e2 = np.broadcast_to([0.0, 1.0], shape + (2,))
    kappa = sectional_curvature(R, md.g, e1, e2)
    return CurvatureTensor(riemann=R, sectional=kappa[()] if kappa.ndim == 0 else kappa)


def gaussian_curvature_oracle(field, p):
    """(F11 F22 - F12^2) / (1 + |grad F|^2)^2 from second derivatives only."""
    _, grad, hess = evaluate(field, check_points(p))
    D = 1.0 + np.sum(grad * grad, axis=-1)
    K = (hess[..., 0, 0] * hess[..., 1, 1] - hess[..., 0, 1] ** 2) / (D * D)
    return K[()] if np.ndim(K) == 0 else K
