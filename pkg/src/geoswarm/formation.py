"""Swarm lattice formation: head geodesic, rung family, follower positions.

The head follows a geodesic.  Every ``t_s`` time units a rung is launched from
the head, g-orthogonal to its velocity and at unit speed, so the rung parameter
is arc length.  Follower ``i`` sits at arc length ``i * d`` on each rung; its
trajectory is the sequence of those points over successive rungs.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_states
from .errors import IndexOutOfRange, InputError
from .geodesic import DEFAULT_STEP, GeodesicPath, integrate, march, orthonormal_launch, rk4_step


@dataclass(frozen=True)
class FormationTopology:
    """Path-graph topology: head plus ``n_followers`` agents spaced ``d`` apart."""

    n_followers: int
    d: float
    t_s: float

    def __post_init__(self):
        object.__setattr__(
            self, "n_followers", check_positive(self.n_followers, "n_followers", integer=True, allow_zero=True)
        )
        object.__setattr__(self, "d", check_positive(self.d, "d"))
        object.__setattr__(self, "t_s", check_positive(self.t_s, "t_s"))

    @property
    def n_agents(self):
        return self.n_followers + 1


@dataclass(frozen=True)
class SwarmTrajectory:
    """Result of :func:`build_formation`.

    ``rung_states[j, i]`` is the geodesic state of rung ``j`` at arc length
    ``i * d`` (agent ``i``; agent 0 is the head).
    """

    head: GeodesicPath
    emission_times: np.ndarray
    rung_states: np.ndarray
    topology: FormationTopology

    @property
    def positions(self):
        return self.rung_states[..., :2]

    @property
    def tangents(self):
        return self.rung_states[..., 2:]

    @property
    def n_rungs(self):
        return len(self.emission_times)

    @property
    def rungs(self):
        d = self.topology.d
        taus = np.arange(self.topology.n_agents) * d
        return [GeodesicPath(states=s, times=taus, step=d) for s in self.rung_states]


def head_state_at(field, head, t):
    """Head state at time ``t``; off-grid times take one short RK4 step."""
    k = int(np.floor((t - head.t0) / head.step + 1e-9))
    k = min(k, len(head) - 1)
    dt = t - head.times[k]
    if abs(dt) <= 1e-9 * max(1.0, abs(t)):
        return head.states[k]
    return rk4_step(field, head.states[k], dt)


def build_formation(field, head0, topo, t_end, step=DEFAULT_STEP):
    """Build the head path, emit rungs at ``j * t_s`` and sample followers."""
    head0 = check_states(head0, "head0")
    t_end = check_positive(t_end, "t_end")
    step = check_positive(step, "step")
    if t_end < topo.t_s:
        raise InputError(f"t_end ({t_end}) must be at least t_s ({topo.t_s})")
    head = integrate(field, head0, t_end, step)

    n_rungs = int(np.floor(t_end / topo.t_s * (1 + 1e-12))) + 1
    emission_times = np.arange(n_rungs) * topo.t_s
    emitted = np.array([head_state_at(field, head, t) for t in emission_times])
    launch = orthonormal_launch(field, emitted[:, :2], emitted[:, 2:])

    n_sub = max(1, int(np.ceil(topo.d / step - 1e-9)))
    h = topo.d / n_sub
    samples = march(field, launch, h, topo.n_followers * n_sub, sample_every=n_sub)
    rung_states = np.ascontiguousarray(np.swapaxes(samples, 0, 1))
    return SwarmTrajectory(head=head, emission_times=emission_times, rung_states=rung_states, topology=topo)


def separations(traj, j):
    """Edge vectors q_{i+1} - q_i between consecutive agents on rung ``j``."""
    if not 0 <= j < traj.n_rungs:
        raise IndexOutOfRange(f"rung index {j} outside [0, {traj.n_rungs})")
    q = traj.positions[j]
    return np.diff(q, axis=0)


def rung_deviation(traj):
    """Deviation vectors between neighbouring rungs at equal arc length.

    Centred in emission time: ``S[j, i] = (q_i(t_{j+1}) - q_i(t_{j-1})) / 2``
    for interior rungs ``j = 1 .. n_rungs - 2``.  Each ``S[j]`` samples a
    Jacobi field along rung ``j`` (scaled by ``t_s``).
    """
    if traj.n_rungs < 3:
        raise InputError("need at least three rungs for centred rung deviation")
    q = traj.positions
    return 0.5 * (q[2:] - q[:-2])
