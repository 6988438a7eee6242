"""Experiment orchestration: one scenario in, CSV files and a report out.

Commands
--------
simulate  trajectory CSV (every agent on every rung)
analyze   trajectory CSV plus per-sample curvature CSV and error statistics
control   predict-correct velocity traces of the first follower
oracle    analytic curvature on a square grid

Floats are written with 17 significant digits so a CSV round-trips exactly.
Nothing here draws random numbers; identical configs give identical bytes.
"""

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import DeviationFields, curvature_table, table_stats
from .control import FALLBACK, run_control
from .errors import EmptyInput, InputError
from .formation import FormationTopology, build_formation
from .manifold import PotentialField, gaussian_curvature_oracle

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "analyze", "control", "oracle")

TRAJECTORY_COLUMNS = ("t", "agent_id", "x1", "x2", "x3")
CURVATURE_COLUMNS = ("rung_t", "x1", "x2", "kappa_hat", "kappa_true", "pct_error", "mode", "flag")
CONTROL_COLUMNS = ("t", "vx_ideal", "vy_ideal", "vx_pred", "vy_pred", "vx_pred_approx", "vy_pred_approx")
ORACLE_COLUMNS = ("x1", "x2", "x3", "kappa")

#: estimates are attributed to the chart position of the stencil's centre agent
ATTRIBUTION = "centre agent of the second-difference stencil"


def fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, columns, rows, expected_rows):
    """Write ``rows`` (iterable of tuples) and check the row count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
            n += 1
    if n != expected_rows:
        raise RuntimeError(f"{path.name}: wrote {n} rows, expected {expected_rows}")
    return path


@dataclass
class RunReport:
    command: str
    scenario: str
    scenario_hash: str
    files: dict = field(default_factory=dict)
    stats: dict = None
    conjugate: dict = None
    odmd: dict = None
    notes: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    def to_json(self):
        return json.dumps(asdict(self), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _field(cfg):
    return PotentialField(cfg.potential.kind, cfg.potential.a)


def _formation(cfg):
    topo = FormationTopology(cfg.swarm.n_followers, cfg.swarm.d, cfg.swarm.t_s)
    return build_formation(_field(cfg), cfg.head.state, topo, cfg.sim.t_end, cfg.sim.step)


def _out(cfg, out_dir, kind, ext="csv"):
    return Path(out_dir) / f"{cfg.output.prefix}_{kind}.{ext}"


def _write_trajectory(cfg, traj, out_dir):
    field_ = _field(cfg)
    q = traj.positions
    x3 = field_.value(q)
    n_rungs, n_agents = q.shape[:2]

    def rows():
        for j in range(n_rungs):
            t = traj.emission_times[j]
            for i in range(n_agents):
                yield t, i, q[j, i, 0], q[j, i, 1], x3[j, i]

    return write_csv(_out(cfg, out_dir, "trajectory"), TRAJECTORY_COLUMNS, rows(), n_rungs * n_agents)


def _simulate(cfg, out_dir, report):
    traj = _formation(cfg)
    report.files["trajectory"] = _write_trajectory(cfg, traj, out_dir)
    report.metadata["n_rungs"] = traj.n_rungs
    report.metadata["n_agents"] = traj.topology.n_agents
    return traj


def _analyze(cfg, out_dir, report):
    traj = _simulate(cfg, out_dir, report)
    fields_ = DeviationFields(traj, _field(cfg), cfg.analysis.mode)
    table = curvature_table(fields_)
    rows = (
        (table.rung_t[k], table.points[k, 0], table.points[k, 1], table.kappa_hat[k],
         table.kappa_true[k], table.pct_error[k], table.mode, table.flag[k])
        for k in range(len(table))
    )
    report.files["curvature"] = write_csv(_out(cfg, out_dir, "curvature"), CURVATURE_COLUMNS, rows, len(table))
    try:
        report.stats = asdict(table_stats(table))
    except EmptyInput as exc:
        report.stats = None
        report.notes.append(f"no error statistics: {exc}")
    taus = fields_.conjugate_taus
    flagged = [
        {"rung_t": float(fields_.rung_t[j]), "tau": float(tau)} for j, tau in enumerate(taus) if tau is not None
    ]
    report.conjugate = {
        "rungs_flagged": len(flagged),
        "samples_flagged": int(np.sum(table.flag == "conjugate")),
        "first": flagged[:20],
    }
    if flagged:
        report.notes.append(f"conjugate points on {len(flagged)} rungs; samples beyond them excluded from stats")
    report.metadata["mode"] = cfg.analysis.mode
    report.metadata["attribution"] = ATTRIBUTION
    return table


def _control(cfg, out_dir, report):
    c = cfg.control
    if not c.enabled:
        raise InputError("control.enabled is false for this scenario")
    res = run_control(
        _field(cfg), cfg.head.state, cfg.swarm.n_followers, cfg.swarm.d, cfg.sim.t_end,
        dt=c.dt, window=c.window, weight=c.correction_weight, step=cfg.sim.step,
    )
    orig = res.variants["original"].velocities[:, 0]
    appr = res.variants["approx"].velocities[:, 0]
    ideal = res.ideal[:, 0]
    rows = (
        (res.times[m], ideal[m, 0], ideal[m, 1], orig[m, 0], orig[m, 1], appr[m, 0], appr[m, 1])
        for m in range(len(res.times))
    )
    report.files["control"] = write_csv(_out(cfg, out_dir, "control"), CONTROL_COLUMNS, rows, len(res.times))
    odmd = {}
    for name, trace in res.variants.items():
        err = res.relative_error(name)
        ctl = res.controlled_steps(name)
        odmd[name] = {
            "residual": trace.residual[:, 0],
            "status": [str(s) for s in trace.status[:, 0]],
            "fallback_steps": int(np.sum(trace.status[:, 0] == FALLBACK)),
            "max_rel_error": float(np.max(err[ctl])),
            "mean_rel_error": float(np.mean(err[ctl])),
        }
    report.odmd = odmd
    report.notes.extend(res.notes)
    return res


def _oracle(cfg, out_dir, report):
    n, L = cfg.oracle.n, cfg.oracle.extent
    xs = np.linspace(-L, L, n)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    P = np.stack([X1, X2], axis=-1)
    field_ = _field(cfg)
    x3 = field_.value(P)
    kappa = gaussian_curvature_oracle(field_, P)
    rows = ((X1[i, k], X2[i, k], x3[i, k], kappa[i, k]) for i in range(n) for k in range(n))
    report.files["oracle"] = write_csv(_out(cfg, out_dir, "oracle"), ORACLE_COLUMNS, rows, n * n)
    report.stats = {"kappa_min": float(kappa.min()), "kappa_max": float(kappa.max())}


_DISPATCH = {"simulate": _simulate, "analyze": _analyze, "control": _control, "oracle": _oracle}


def run(cmd, cfg, out_dir=None):
    """Run one command on one (non-sweep) config and write its outputs.

    Returns the :class:`RunReport`; it is also written as JSON next to the
    CSV files.
    """
    if cmd not in COMMANDS:
        raise InputError(f"unknown command {cmd!r}; expected one of {COMMANDS}")
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    report = RunReport(command=cmd, scenario=cfg.name, scenario_hash=cfg.scenario_hash())
    start = time.perf_counter()
    _DISPATCH[cmd](cfg, out_dir, report)
    report.wall_clock_s = time.perf_counter() - start
    report.files = {k: str(v) for k, v in report.files.items()}
    path = _out(cfg, out_dir, f"{cmd}_report", "json")
    path.write_text(report.to_json())
    log.info("%s %s: wrote %s", cmd, cfg.name or cfg.output.prefix, ", ".join(report.files.values()))
    return report


def max_workers():
    env = os.environ.get("GEOSWARM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InputError(f"GEOSWARM_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise InputError(f"GEOSWARM_THREADS must be >= 1, got {n}")
        return n
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0)) or 1
    return os.cpu_count() or 1


def _run_point(args):
    cmd, cfg, out_dir = args
    return run(cmd, cfg, out_dir)


def run_sweep(cmd, cfg, out_dir=None):
    """Run every point of ``cfg.sweep`` (or just ``cfg``) in a process pool.

    Point ``k`` writes its files with prefix ``<prefix>_<k:03d>``.  A summary
    CSV lists the swept values and, for ``analyze``, the error statistics.
    Returns the list of reports in grid order.
    """
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    points = cfg.expand_sweep()
    if not cfg.sweep:
        return [run(cmd, cfg, out_dir)]
    jobs = []
    for k, p in enumerate(points):
        p = replace(p, output=replace(p.output, prefix=f"{cfg.output.prefix}_{k:03d}"))
        jobs.append((cmd, p, out_dir))
    workers = min(max_workers(), len(jobs))
    if workers == 1:
        reports = [_run_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_point, jobs))

    keys = [k for k, _ in cfg.sweep]
    stat_cols = ("mean_pct", "min", "max", "samples", "excluded")
    columns = ("index", *keys, "scenario_hash", *stat_cols)

    def rows():
        for k, (p, rep) in enumerate(zip(points, reports)):
            vals = [getattr(getattr(p, s), f) for s, f in (key.split(".") for key in keys)]
            stats = rep.stats if (rep.stats and "mean_pct" in rep.stats) else {}
            yield (k, *vals, rep.scenario_hash, *(stats.get(c, float("nan")) for c in stat_cols))

    write_csv(_out(cfg, out_dir, f"{cmd}_sweep"), columns, rows(), len(points))
    return reports
