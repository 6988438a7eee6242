"""Sectional-curvature estimation from the deformation of a formation.

The deviation field ``S`` along a rung is the displacement between
neighbouring rungs at equal arc length (a Jacobi field, up to the factor
``t_s``).  Its velocity ``V`` and acceleration ``W`` are differenced across
the agent chain, with step ``d`` in the rung's arc length.  Since ``S`` is
orthogonal to the unit-speed rung, ``W = -kappa S`` and

    kappa_hat = -<W, S>_g / <S, S>_g.

Two observers are supported.  ``oracle`` adds the Christoffel terms of the
covariant derivatives (it knows the metric); ``blind`` uses plain chart
differences and the Euclidean inner product.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive
from .errors import ConjugatePointFlag, EmptyInput, InputError, TooFewAgents
from .geodesic import CONJUGATE_FRACTION, detect_conjugate
from .manifold import MetricData, PotentialField, gaussian_curvature_oracle, metric_at

MODES = ("oracle", "blind")

#: |kappa_true| at or below this makes the relative error undefined
ZERO_CURVATURE = 1e-12

#: five-point centred first derivative in emission time (fourth-order accurate)
_EMISSION_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_STENCIL_HALF = 2


@dataclass(frozen=True)
class DeviationSample:
    rung_index: int
    agent_index: int
    rung_t: float
    point: np.ndarray
    tangent: np.ndarray
    s: np.ndarray
    v: np.ndarray
    w: np.ndarray
    mode: str
    s_ref: float
    beyond_conjugate: bool


@dataclass(frozen=True)
class CurvatureEstimate:
    point: np.ndarray
    kappa_hat: float
    kappa_true: float
    pct_error: float
    rung_t: float = float("nan")
    flag: str = "ok"

    @property
    def defined(self):
        return self.flag == "ok"


@dataclass(frozen=True)
class ErrorStats:
    mean_pct: float
    min: float
    max: float
    samples: int
    excluded: int = 0

    @property
    def half_range(self):
        return 0.5 * (self.max - self.min)


def _check_mode(mode):
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def emission_deviation(positions, scale=1.0):
    """Deviation between rungs, differentiated in emission time.

    ``positions`` has shape ``(n_rungs, n_agents, 2)``.  Returns the
    fourth-order centred difference for rungs ``2 .. n_rungs - 3`` (multiplied
    by ``scale``, typically 1 so that the result is ``t_s`` times the Jacobi
    field).
    """
    n = positions.shape[0]
    if n < 2 * _STENCIL_HALF + 1:
        raise InputError(f"need at least {2 * _STENCIL_HALF + 1} rungs, got {n}")
    out = np.zeros((n - 2 * _STENCIL_HALF,) + positions.shape[1:])
    for k, c in enumerate(_EMISSION_STENCIL):
        if c:
            out += c * positions[k : n - 2 * _STENCIL_HALF + k]
    return scale * out


def _covariant_terms(gamma, dgamma, tangent, S, dS, ddS):
    """V and W of the separation including connection terms."""
    acc = -np.einsum("...kij,...i,...j->...k", gamma, tangent, tangent)
    V = dS + np.einsum("...rmn,...m,...n->...r", gamma, tangent, S)
    W = (
        ddS
        + 2.0 * np.einsum("...rmn,...m,...n->...r", gamma, tangent, dS)
        + np.einsum("...rmnl,...l,...m,...n->...r", dgamma, tangent, tangent, S)
        + np.einsum("...rmn,...m,...n->...r", gamma, acc, S)
        + np.einsum("...rls,...smn,...m,...l,...n->...r", gamma, gamma, tangent, tangent, S)
    )
    return V, W


class DeviationFields:
    """Vectorised deviation data for every interior (rung, agent) pair.

    Arrays are indexed ``[rung, agent]`` over the usable rungs and the interior
    agents ``1 .. n_followers - 2``.
    """

    def __init__(self, traj, field, mode="oracle"):
        mode = _check_mode(mode)
        topo = traj.topology
        if topo.n_followers < 3:
            raise TooFewAgents(f"need n_followers >= 3, got {topo.n_followers}")
        d = topo.d
        S_all = emission_deviation(traj.positions)
        rung_slice = slice(_STENCIL_HALF, traj.n_rungs - _STENCIL_HALF)
        q = traj.positions[rung_slice]
        tan = traj.tangents[rung_slice]

        if mode == "oracle":
            md_all = metric_at(field, q)
        else:
            md_all = MetricData.euclidean(q.shape[:-1])
        s_norm = md_all.norm(S_all)
        s_ref = s_norm[:, 0]

        # conjugate detection per rung on the normalised separation d*|S|/|S_0|
        taus = np.arange(topo.n_agents) * d
        beyond = np.zeros(s_norm.shape, dtype=bool)
        self.conjugate_taus = []
        for j in range(s_norm.shape[0]):
            nu = d * s_norm[j] / s_ref[j]
            tau_star = detect_conjugate(zip(taus, nu), d)
            self.conjugate_taus.append(tau_star)
            if tau_star is not None:
                beyond[j] = taus >= tau_star - 1e-12

        inner = slice(1, topo.n_followers - 1)
        S = S_all[:, inner]
        dS = (S_all[:, 2:] - S_all[:, :-2])[:, : topo.n_followers - 2] / (2.0 * d)
        ddS = (S_all[:, 2:] - 2.0 * S_all[:, 1:-1] + S_all[:, :-2])[:, : topo.n_followers - 2] / (d * d)

        self.mode = mode
        self.field = field
        self.rung_indices = np.arange(traj.n_rungs)[rung_slice]
        self.rung_t = traj.emission_times[rung_slice]
        self.agent_indices = np.arange(topo.n_agents)[inner]
        self.points = q[:, inner]
        self.tangents = tan[:, inner]
        self.s = S
        if mode == "oracle":
            md = MetricData(*(getattr(md_all, f)[:, inner] for f in ("g", "g_inv", "gamma", "gamma_partials")))
            self.v, self.w = _covariant_terms(md.gamma, md.gamma_partials, self.tangents, S, dS, ddS)
        else:
            md = MetricData.euclidean(S.shape[:-1])
            self.v, self.w = dS, ddS
        self.metric = md
        self.s_ref = s_ref
        self.beyond_conjugate = beyond[:, inner]

    @property
    def shape(self):
        return self.s.shape[:-1]

    def samples(self):
        out = []
        for a in range(self.shape[0]):
            for b in range(self.shape[1]):
                out.append(
                    DeviationSample(
                        rung_index=int(self.rung_indices[a]),
                        agent_index=int(self.agent_indices[b]),
                        rung_t=float(self.rung_t[a]),
                        point=self.points[a, b],
                        tangent=self.tangents[a, b],
                        s=self.s[a, b],
                        v=self.v[a, b],
                        w=self.w[a, b],
                        mode=self.mode,
                        s_ref=float(self.s_ref[a]),
                        beyond_conjugate=bool(self.beyond_conjugate[a, b]),
                    )
                )
        return out


def deviation_fields(traj, field, mode="oracle"):
    """List of :class:`DeviationSample` for every interior (rung, agent)."""
    return DeviationFields(traj, field, mode).samples()


def _pct_error(kappa_hat, kappa_true):
    kappa_hat = np.asarray(kappa_hat, dtype=float)
    kappa_true = np.asarray(kappa_true, dtype=float)
    undefined = np.abs(kappa_true) <= ZERO_CURVATURE
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = 100.0 * np.abs(kappa_hat - kappa_true) / np.abs(kappa_true)
    return np.where(undefined, np.nan, pct), undefined


def estimate_kappa(sample, g, field=None):
    """kappa_hat = -<w, s>_g / <s, s>_g for one sample.

    ``g`` is the 2x2 metric (or :class:`MetricData`) used for the inner
    products; pass the identity for a blind observer.  ``field`` supplies
    the analytic reference curvature; without it ``kappa_true`` is NaN.
    """
    G = g.g if isinstance(g, MetricData) else np.asarray(g, dtype=float)
    s, w = np.asarray(sample.s), np.asarray(sample.w)
    ss = s @ G @ s
    if sample.beyond_conjugate or np.sqrt(ss) <= CONJUGATE_FRACTION * sample.s_ref:
        raise ConjugatePointFlag(
            f"separation collapsed at rung {sample.rung_index}, agent {sample.agent_index}"
        )
    kappa_hat = -(w @ G @ s) / ss
    kappa_true = float(gaussian_curvature_oracle(field, sample.point)) if field is not None else float("nan")
    pct, undefined = _pct_error(kappa_hat, kappa_true)
    return CurvatureEstimate(
        point=np.asarray(sample.point),
        kappa_hat=float(kappa_hat),
        kappa_true=kappa_true,
        pct_error=float(pct),
        rung_t=sample.rung_t,
        flag="undefined" if undefined else "ok",
    )


@dataclass(frozen=True)
class CurvatureTable:
    """Column arrays of per-sample curvature estimates (flattened rung-major)."""

    rung_t: np.ndarray
    points: np.ndarray
    kappa_hat: np.ndarray
    kappa_true: np.ndarray
    pct_error: np.ndarray
    flag: np.ndarray
    mode: str

    def __len__(self):
        return len(self.rung_t)

    def estimates(self):
        return [
            CurvatureEstimate(
                point=self.points[k],
                kappa_hat=float(self.kappa_hat[k]),
                kappa_true=float(self.kappa_true[k]),
                pct_error=float(self.pct_error[k]),
                rung_t=float(self.rung_t[k]),
                flag=str(self.flag[k]),
            )
            for k in range(len(self))
        ]


def curvature_table(fields):
    """Estimate curvature for every sample of a :class:`DeviationFields`."""
    md = fields.metric
    ss = md.inner(fields.s, fields.s)
    kappa_hat = -md.inner(fields.w, fields.s) / ss
    kappa_true = gaussian_curvature_oracle(fields.field, fields.points)
    pct, undefined = _pct_error(kappa_hat, kappa_true)
    collapsed = fields.beyond_conjugate | (np.sqrt(ss) <= CONJUGATE_FRACTION * fields.s_ref[:, None])
    flag = np.where(collapsed, "conjugate", np.where(undefined, "undefined", "ok"))
    pct = np.where(collapsed, np.nan, pct)
    n = kappa_hat.size
    return CurvatureTable(
        rung_t=np.repeat(fields.rung_t, fields.shape[1]),
        points=fields.points.reshape(n, 2),
        kappa_hat=kappa_hat.reshape(n),
        kappa_true=np.asarray(kappa_true).reshape(n),
        pct_error=pct.reshape(n),
        flag=flag.reshape(n),
        mode=fields.mode,
    )


def error_stats(estimates):
    """Mean and range of pct_error over estimates flagged ``ok``."""
    estimates = list(estimates)
    if not estimates:
        raise EmptyInput("no curvature estimates")
    pct = np.array([e.pct_error for e in estimates if e.flag == "ok"], dtype=float)
    excluded = len(estimates) - len(pct)
    if len(pct) == 0:
        raise EmptyInput(f"all {excluded} estimates are flagged; no defined errors")
    return ErrorStats(
        mean_pct=float(pct.mean()), min=float(pct.min()), max=float(pct.max()),
        samples=int(len(pct)), excluded=int(excluded),
    )


def table_stats(table):
    """:func:`error_stats` for a :class:`CurvatureTable` without building objects."""
    if len(table) == 0:
        raise EmptyInput("no curvature estimates")
    ok = table.flag == "ok"
    pct = table.pct_error[ok]
    if len(pct) == 0:
        raise EmptyInput(f"all {len(table)} estimates are flagged; no defined errors")
    return ErrorStats(
        mean_pct=float(pct.mean()), min=float(pct.min()), max=float(pct.max()),
        samples=int(ok.sum()), excluded=int(len(table) - ok.sum()),
    )


def jacobi_rhs(field, y):
    """Geodesic plus chart-form geodesic deviation, state ``(x, v, J, J')``.

    J'' = -2 Gamma(v, J') - (d_l Gamma)(v, v) J^l, the linearisation of the
    geodesic equation.
    """
    md = metric_at(field, y[..., :2])
    v, J, dJ = y[..., 2:4], y[..., 4:6], y[..., 6:8]
    acc = -np.einsum("...kij,...i,...j->...k", md.gamma, v, v)
    ddJ = -2.0 * np.einsum("...kij,...i,...j->...k", md.gamma, v, dJ) - np.einsum(
        "...kijl,...i,...j,...l->...k", md.gamma_partials, v, v, J
    )
    return np.concatenate([v, acc, dJ, ddJ], axis=-1)


def propagate_jacobi(field, state, J, dJ, length, step=1e-3):
    """Carry a deviation vector ``J`` (chart) with chart derivative ``dJ`` along
    the geodesic starting at ``state`` for arc length ``length``."""
    length = check_positive(length, "length")
    n = max(1, int(np.ceil(length / step - 1e-9)))
    h = length / n
    y = np.concatenate([np.asarray(state, float), np.asarray(J, float), np.asarray(dJ, float)])
    for _ in range(n):
        k1 = jacobi_rhs(field, y)
        k2 = jacobi_rhs(field, y + 0.5 * h * k1)
        k3 = jacobi_rhs(field, y + 0.5 * h * k2)
        k4 = jacobi_rhs(field, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y[4:6], y[6:8]


class CurvatureEstimator(BaseEstimator):
    """Estimate sectional curvature from a :class:`SwarmTrajectory`.

    Parameters
    ----------
    potential : str
        Potential kind used for the analytic reference (and, in oracle mode,
        for the connection terms).
    a : float
        Shape parameter of the potential.
    mode : {"oracle", "blind"}

    Attributes
    ----------
    fields_ : DeviationFields
    table_ : CurvatureTable
    stats_ : ErrorStats or None
        ``None`` when every sample is flagged.
    conjugate_taus_ : list
        First collapse arc length per analysed rung (``None`` if none).
    """

    def __init__(self, potential="elliptic_paraboloid", a=20.0, mode="oracle"):
        self.potential = potential
        self.a = a
        self.mode = mode

    def fit(self, traj, y=None):
        field = PotentialField(self.potential, self.a)
        self.fields_ = DeviationFields(traj, field, _check_mode(self.mode))
        self.table_ = curvature_table(self.fields_)
        try:
            self.stats_ = table_stats(self.table_)
        except EmptyInput:
            self.stats_ = None
        self.conjugate_taus_ = list(self.fields_.conjugate_taus)
        return self

    def predict(self, traj):
        """Flattened kappa_hat for ``traj`` (rung-major, interior agents)."""
        field = PotentialField(self.potential, self.a)
        return curvature_table(DeviationFields(traj, field, _check_mode(self.mode))).kappa_hat
