"""Formation control of the follower chain with online DMD.

Each follower keeps its own operator over its velocity history.  Every step it
predicts its next velocity, corrects the prediction with the measured
position of its right-hand neighbour (the agent closer to the head), and
folds the corrected pair back into the operator.

Two variants are run side by side.  They differ only in the startup data:
``original`` starts from the exact lattice velocities, ``approx`` from
velocities of a Euclidean lattice (offsets perpendicular to the head in the
chart, ignoring the metric).
"""

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._validation import check_positive
from .errors import InputError, RankDeficient
from .formation import FormationTopology, build_formation, head_state_at
from .geodesic import DEFAULT_STEP
from .odmd import MeasurementFrame, SnapshotPair, correct, init_batch, measured_velocity, predict, update

log = logging.getLogger(__name__)

STARTUP, DMD, FALLBACK = "startup", "dmd", "fallback"
FALLBACK_NOTE = "linear-dynamics fallback engaged"


@dataclass
class VariantTrace:
    """Per-step, per-follower record of one control run.

    Arrays are indexed ``[step, follower]`` where follower 0 is the first
    follower (agent 1).
    """

    velocities: np.ndarray
    predicted: np.ndarray
    residual: np.ndarray
    status: np.ndarray
    positions: np.ndarray

    def fallback_steps(self, follower=0):
        return np.flatnonzero(self.status[:, follower] == FALLBACK)


@dataclass
class ControlResult:
    times: np.ndarray
    ideal: np.ndarray
    variants: dict
    notes: list = dc_field(default_factory=list)

    def relative_error(self, variant="original", follower=0):
        v = self.variants[variant].velocities[:, follower]
        ref = self.ideal[:, follower]
        return np.linalg.norm(v - ref, axis=-1) / np.linalg.norm(ref, axis=-1)

    def controlled_steps(self, variant="original", follower=0):
        return self.variants[variant].status[:, follower] != STARTUP


def euclidean_lattice(head_positions, head_velocities, n_followers, d):
    """Chart positions of a lattice built as if the metric were Euclidean."""
    u = head_velocities / np.linalg.norm(head_velocities, axis=-1, keepdims=True)
    normal = np.stack([-u[:, 1], u[:, 0]], axis=-1)
    i = np.arange(n_followers + 1)
    return head_positions[:, None, :] + d * i[None, :, None] * normal[:, None, :]


def _run_variant(startup_positions, head_positions, window, dt, weight):
    n_steps = head_positions.shape[0] - 1
    n_followers = startup_positions.shape[1] - 1
    P = np.full((n_steps + 1, n_followers + 1, 2), np.nan)
    P[:, 0] = head_positions
    V = np.full((n_steps, n_followers + 1, 2), np.nan)
    pred = np.full((n_steps, n_followers, 2), np.nan)
    resid = np.full((n_steps, n_followers), np.nan)
    status = np.full((n_steps, n_followers), STARTUP, dtype=object)

    n_start = window + 1  # velocities x_0 .. x_window
    P[: n_start + 1, 1:] = startup_positions[: n_start + 1, 1:]
    V[:n_start, 1:] = np.diff(P[: n_start + 1, 1:], axis=0) / dt

    # spacing each follower holds: its Euclidean distance to the neighbour
    # at the end of startup (exactly d for a Euclidean startup)
    spacing = np.linalg.norm(P[n_start, 1:] - P[n_start, :-1], axis=-1)
    models = [_try_init(V[:n_start, f + 1], window) for f in range(n_followers)]

    for m in range(n_start, n_steps):
        for f in range(n_followers):
            i = f + 1
            x = V[m - 1, i]
            meas = MeasurementFrame(
                offset=P[m + 1, i - 1] - P[m, i],
                neighbor_step=P[m + 1, i - 1] - P[m, i - 1],
                d=spacing[f],
                dt=dt,
            )
            model = models[f]
            if model is not None:
                y_hat = predict(model, x)
                y = correct(y_hat, meas, weight)
                models[f] = update(model, SnapshotPair(x, y))
                pred[m, f] = y_hat
                resid[m, f] = np.linalg.norm(y_hat - y)
                status[m, f] = DMD
            else:
                y = measured_velocity(meas, x)
                status[m, f] = FALLBACK
            V[m, i] = y
            P[m + 1, i] = P[m, i] + dt * y
            if models[f] is None:
                models[f] = _try_init(V[: m + 1, i], window)
    return VariantTrace(
        velocities=V[:, 1:], predicted=pred, residual=resid, status=status, positions=P
    )


def _try_init(history, window):
    """Operator from the last ``window`` velocity pairs, or None if singular."""
    h = history[-(window + 1):]
    try:
        return init_batch([SnapshotPair(h[k], h[k + 1]) for k in range(len(h) - 1)])
    except RankDeficient as exc:
        log.debug("DMD init failed: %s", exc)
        return None


def run_control(field, head0, n_followers, d, t_end, dt=0.1, window=3, weight=1.0, step=DEFAULT_STEP):
    """Run the predict-correct loop for both startup variants.

    The ideal lattice comes from :func:`build_formation` with rungs every
    ``dt``; ideal velocities are its finite differences over one step.
    """
    window = check_positive(window, "window", integer=True)
    dt = check_positive(dt, "dt")
    if not 0.0 <= weight <= 1.0:
        raise InputError(f"correction weight must lie in [0, 1], got {weight}")
    if n_followers < 1:
        raise InputError("control needs at least one follower")
    topo = FormationTopology(n_followers, d, dt)
    traj = build_formation(field, head0, topo, t_end, step)
    q = traj.positions
    n_steps = q.shape[0] - 1
    if n_steps < window + 2:
        raise InputError(f"t_end / dt gives {n_steps} steps; need at least {window + 2}")
    ideal = np.diff(q, axis=0)[:, 1:] / dt
    head_pos = q[:, 0]
    head_vel = np.array([head_state_at(field, traj.head, t)[2:] for t in traj.emission_times])
    approx_start = euclidean_lattice(head_pos, head_vel, n_followers, d)

    variants = {
        "original": _run_variant(q, head_pos, window, dt, weight),
        "approx": _run_variant(approx_start, head_pos, window, dt, weight),
    }
    notes = []
    for name, trace in variants.items():
        if np.any(trace.status == FALLBACK):
            notes.append(f"{name}: {FALLBACK_NOTE} ({int(np.sum(trace.status == FALLBACK))} agent-steps)")
    return ControlResult(times=traj.emission_times[:-1], ideal=ideal, variants=variants, notes=notes)
