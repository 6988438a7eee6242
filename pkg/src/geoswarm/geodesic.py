"""Geodesic integration on a graph surface.

States are 4-vectors ``(x1, x2, v1, v2)``: chart position followed by chart
velocity.  The integrator is classical fixed-step RK4, vectorised over a batch
of states so that a whole family of geodesics advances in one sweep.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_points, check_positive, check_states, check_vector
from .errors import DegenerateVelocity, InputError, NonFiniteState
from .manifold import evaluate, metric_tensor

DEFAULT_STEP = 1e-3

#: separation norm below this fraction of its reference marks a conjugate point
CONJUGATE_FRACTION = 0.1


@dataclass(frozen=True)
class GeodesicPath:
    """Sampled geodesic.

    ``states[k]`` is the state at ``times[k]``.  Samples are uniform with
    spacing ``step`` except possibly the last one, which lands on the
    requested end time.
    """

    states: np.ndarray
    times: np.ndarray
    step: float

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def positions(self):
        return self.states[:, :2]

    @property
    def velocities(self):
        return self.states[:, 2:]

    def __len__(self):
        return len(self.times)


def geodesic_rhs(field, s):
    """Time derivative of state(s) ``s`` under the geodesic equation.

    The acceleration is -Gamma^k_ij v^i v^j, which for a graph metric reduces
    to -F_k (v^T H v) / (1 + |grad F|^2).
    """
    s = np.asarray(s, dtype=float)
    v = s[..., 2:]
    _, grad, hess = evaluate(field, s[..., :2])
    D = 1.0 + np.sum(grad * grad, axis=-1)
    vHv = np.einsum("...i,...ij,...j->...", v, hess, v)
    acc = -grad * (vHv / D)[..., None]
    return np.concatenate([v, acc], axis=-1)


def rk4_step(field, s, h):
    k1 = geodesic_rhs(field, s)
    k2 = geodesic_rhs(field, s + 0.5 * h * k1)
    k3 = geodesic_rhs(field, s + 0.5 * h * k2)
    k4 = geodesic_rhs(field, s + h * k3)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def march(field, s0, h, n_steps, sample_every=1):
    """Advance a batch of states ``n_steps`` RK4 steps of size ``h``.

    Returns an array of shape ``(n_steps // sample_every + 1, *s0.shape)``
    holding the initial state and every ``sample_every``-th step after it.
    """
    s = np.array(s0, dtype=float)
    n_samples = n_steps // sample_every + 1
    out = np.empty((n_samples,) + s.shape)
    out[0] = s
    # overflow is reported as NonFiniteState below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_steps + 1):
            s = rk4_step(field, s, h)
            if k % sample_every == 0:
                if not np.all(np.isfinite(s)):
                    raise NonFiniteState(f"state became non-finite after {k} steps of {h}")
                out[k // sample_every] = s
    if not np.all(np.isfinite(s)):
        raise NonFiniteState(f"state became non-finite after {n_steps} steps of {h}")
    return out


def integrate(field, s0, t_end, step=DEFAULT_STEP):
    """Integrate one geodesic from ``s0`` over ``[0, t_end]``."""
    s0 = check_states(s0, "s0")
    if s0.ndim != 1:
        raise InputError("integrate takes a single state; use march for batches")
    t_end = check_positive(t_end, "t_end")
    step = check_positive(step, "step")
    if step > t_end:
        raise InputError(f"step ({step}) must not exceed t_end ({t_end})")
    n_full = int(np.floor(t_end / step * (1 + 1e-12)))
    remainder = t_end - n_full * step
    states = march(field, s0, step, n_full)
    times = np.arange(n_full + 1) * step
    if remainder > 1e-12 * t_end:
        last = rk4_step(field, states[-1], remainder)
        if not np.all(np.isfinite(last)):
            raise NonFiniteState("state became non-finite on the final partial step")
        states = np.vstack([states, last])
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return GeodesicPath(states=states, times=times, step=step)


def g_speed(field, s):
    """Metric norm of the velocity part of state(s) ``s``."""
    s = np.asarray(s, dtype=float)
    _, grad, _ = evaluate(field, s[..., :2])
    v = s[..., 2:]
    return np.sqrt(np.sum(v * v, axis=-1) + np.sum(grad * v, axis=-1) ** 2)


def orthonormal_launch(field, p, v):
    """State at ``p`` whose velocity is g-orthogonal to ``v`` with unit g-norm.

    Of the two unit normals, the one on the left of ``v`` (positive Euclidean
    cross product v x w) is chosen.  Broadcasts over leading axes.
    """
    p = check_points(p, "p")
    v = np.asarray(v, dtype=float)
    _, grad, _ = evaluate(field, p)
    g, _ = metric_tensor(grad)
    gv = np.einsum("...ij,...j->...i", g, v)
    v_norm2 = np.einsum("...i,...i->...", v, gv)
    if np.any(~np.isfinite(v_norm2)) or np.any(np.sqrt(np.abs(v_norm2)) < 1e-12):
        raise DegenerateVelocity("launch reference velocity has (near) zero metric norm")
    # w = rot90(g v) is g-orthogonal to v, and v x w = v^T g v > 0
    w = np.stack([-gv[..., 1], gv[..., 0]], axis=-1)
    w_norm = np.sqrt(np.einsum("...i,...ij,...j->...", w, g, w))
    w = w / w_norm[..., None]
    return np.concatenate([p, w], axis=-1)


def detect_conjugate(separations, d):
    """Earliest parameter where the separation norm drops below 0.1 d.

    ``separations`` is a sequence of ``(tau, norm)`` pairs, already scaled so
    that ``d`` is their nominal size.  Returns ``None`` when no collapse occurs.
    """
    d = check_positive(d, "d")
    seq = list(separations)
    if not seq:
        raise InputError("separations must be non-empty")
    threshold = CONJUGATE_FRACTION * d
    for tau, norm in seq:
        if norm < threshold:
            return tau
    return None


def launch_state(p, v):
    """Pack a chart position and velocity into a state vector."""
    return np.concatenate([check_vector(p, "p", 2), check_vector(v, "v", 2)])
