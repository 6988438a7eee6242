"""Scenario files: strict YAML schema with defaults.

A scenario is a mapping of sections.  Every section and key is optional;
missing values take the defaults below.  Unknown keys are rejected with the
position of the offending key and, when one is close, a suggested spelling.

    potential: {kind: elliptic_paraboloid, a: 20}
    head: {x0: 0, y0: 0, vx0: 1, vy0: 0}
    swarm: {n_followers: 100, d: 0.1, t_s: 0.1}
    sim: {t_end: 10, step: 0.001}
    analysis: {mode: oracle}
    control: {enabled: true, window: 3, dt: 0.1, correction_weight: 1.0}
    oracle: {extent: 5.0, n: 101}
    output: {directory: out, prefix: run}
    sweep: {potential.a: [2, 4, 8, 20]}

``potential: flat`` is shorthand for ``potential: {kind: flat}``.
"""

import copy
import difflib
import hashlib
import itertools
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .analysis import MODES
from .errors import ParseError, ValidationError
from .manifold import POTENTIAL_KINDS


@dataclass(frozen=True)
class PotentialSection:
    kind: str = "elliptic_paraboloid"
    a: float = 20.0


@dataclass(frozen=True)
class HeadSection:
    x0: float = 0.0
    y0: float = 0.0
    vx0: float = 1.0
    vy0: float = 0.0

    @property
    def state(self):
        return [self.x0, self.y0, self.vx0, self.vy0]


@dataclass(frozen=True)
class SwarmSection:
    n_followers: int = 100
    d: float = 0.1
    t_s: float = 0.1


@dataclass(frozen=True)
class SimSection:
    t_end: float = 10.0
    step: float = 1e-3


@dataclass(frozen=True)
class AnalysisSection:
    mode: str = "oracle"


@dataclass(frozen=True)
class ControlSection:
    enabled: bool = True
    window: int = 3
    dt: float = 0.1
    correction_weight: float = 1.0


@dataclass(frozen=True)
class OracleSection:
    extent: float = 5.0
    n: int = 101


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    prefix: str = "run"


_SECTIONS = {
    "potential": PotentialSection,
    "head": HeadSection,
    "swarm": SwarmSection,
    "sim": SimSection,
    "analysis": AnalysisSection,
    "control": ControlSection,
    "oracle": OracleSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ScenarioConfig:
    potential: PotentialSection = field(default_factory=PotentialSection)
    head: HeadSection = field(default_factory=HeadSection)
    swarm: SwarmSection = field(default_factory=SwarmSection)
    sim: SimSection = field(default_factory=SimSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    control: ControlSection = field(default_factory=ControlSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    output: OutputSection = field(default_factory=OutputSection)
    sweep: tuple = ()
    name: str = ""

    def to_dict(self):
        """Plain-data view of the physics/output settings (no sweep, no name)."""
        return {s: asdict(getattr(self, s)) for s in _SECTIONS}

    def scenario_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_value(self, dotted, value):
        """Copy with one ``section.key`` replaced (re-validated)."""
        section, key = _split_dotted(dotted)
        updated = replace(getattr(self, section), **{key: value})
        cfg = replace(self, **{section: updated})
        validate(cfg)
        return cfg

    def expand_sweep(self):
        """Configs for every point of the sweep grid (``[self]`` if none)."""
        if not self.sweep:
            return [self]
        keys = [k for k, _ in self.sweep]
        out = []
        for combo in itertools.product(*(v for _, v in self.sweep)):
            cfg = replace(self, sweep=())
            for k, v in zip(keys, combo):
                cfg = cfg.with_value(k, v)
            out.append(cfg)
        return out


def _split_dotted(dotted):
    parts = dotted.split(".")
    if len(parts) != 2 or parts[0] not in _SECTIONS:
        raise ValidationError(f"sweep.{dotted}", "must name section.key")
    section, key = parts
    if key not in {f.name for f in fields(_SECTIONS[section])}:
        raise ValidationError(f"sweep.{dotted}", f"{section} has no key {key!r}")
    return section, key


# --------------------------------------------------------------------------
# validation


def _number(path, value, *, integer=False, positive=False, minimum=None, maximum=None):
    ok_type = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok_type:
        raise ValidationError(path, "must be an integer" if integer else "must be a number")
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    if positive and value <= 0:
        raise ValidationError(path, f"must be > 0, got {value}")
    if minimum is not None and value < minimum:
        raise ValidationError(path, f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ValidationError(path, f"must be <= {maximum}, got {value}")


def validate(cfg):
    """Raise :class:`ValidationError` on the first violated constraint."""
    p = cfg.potential
    if p.kind not in POTENTIAL_KINDS:
        raise ValidationError("potential.kind", f"must be one of {', '.join(POTENTIAL_KINDS)}")
    _number("potential.a", p.a, positive=True)
    for k in ("x0", "y0", "vx0", "vy0"):
        _number(f"head.{k}", getattr(cfg.head, k))
    if cfg.head.vx0 == 0 and cfg.head.vy0 == 0:
        raise ValidationError("head.vx0", "head velocity must be nonzero")
    _number("swarm.n_followers", cfg.swarm.n_followers, integer=True, minimum=1)
    _number("swarm.d", cfg.swarm.d, positive=True)
    _number("swarm.t_s", cfg.swarm.t_s, positive=True)
    _number("sim.t_end", cfg.sim.t_end, positive=True)
    _number("sim.step", cfg.sim.step, positive=True)
    if cfg.sim.t_end < cfg.swarm.t_s:
        raise ValidationError("sim.t_end", f"must be >= swarm.t_s ({cfg.swarm.t_s})")
    if cfg.sim.step > cfg.swarm.t_s:
        raise ValidationError("sim.step", f"must be <= swarm.t_s ({cfg.swarm.t_s})")
    if cfg.analysis.mode not in MODES:
        raise ValidationError("analysis.mode", f"must be one of {', '.join(MODES)}")
    c = cfg.control
    if not isinstance(c.enabled, bool):
        raise ValidationError("control.enabled", "must be true or false")
    _number("control.window", c.window, integer=True, minimum=1)
    _number("control.dt", c.dt, positive=True)
    _number("control.correction_weight", c.correction_weight, minimum=0.0, maximum=1.0)
    _number("oracle.extent", cfg.oracle.extent, positive=True)
    _number("oracle.n", cfg.oracle.n, integer=True, minimum=2)
    for k in ("directory", "prefix"):
        v = getattr(cfg.output, k)
        if not isinstance(v, str) or not v:
            raise ValidationError(f"output.{k}", "must be a non-empty string")
    return cfg


# --------------------------------------------------------------------------
# parsing


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-3`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def _pos(node):
    return node.start_mark.line + 1, node.start_mark.column + 1


def _unknown(key_node, key, allowed, where):
    line, col = _pos(key_node)
    hint = difflib.get_close_matches(key, allowed, n=1)
    msg = f"unknown key {key!r} in {where}"
    if hint:
        msg += f" (did you mean {hint[0]!r}?)"
    raise ParseError(msg, line, col)


def _scalar(node, constructor, where):
    if not isinstance(node, yaml.ScalarNode):
        raise ParseError(f"{where} must be a scalar", *_pos(node))
    return constructor.construct_object(node)


def _section(node, cls, name, constructor):
    if not isinstance(node, yaml.MappingNode):
        raise ParseError(f"section {name!r} must be a mapping", *_pos(node))
    allowed = [f.name for f in fields(cls)]
    values = {}
    for key_node, value_node in node.value:
        key = _scalar(key_node, constructor, f"key in {name}")
        if key not in allowed:
            _unknown(key_node, str(key), allowed, f"section {name!r}")
        if key in values:
            raise ParseError(f"duplicate key {key!r} in {name}", *_pos(key_node))
        values[key] = _scalar(value_node, constructor, f"{name}.{key}")
    return cls(**values)


def _sweep(node, constructor):
    if not isinstance(node, yaml.MappingNode):
        raise ParseError("section 'sweep' must be a mapping", *_pos(node))
    out = []
    for key_node, value_node in node.value:
        key = str(_scalar(key_node, constructor, "sweep key"))
        _split_dotted(key)
        if not isinstance(value_node, yaml.SequenceNode) or not value_node.value:
            raise ParseError(f"sweep.{key} must be a non-empty list", *_pos(value_node))
        vals = tuple(_scalar(v, constructor, f"sweep.{key}") for v in value_node.value)
        out.append((key, vals))
    return tuple(out)


def parse_config(text, name=""):
    """Parse scenario text; returns a validated :class:`ScenarioConfig`."""
    try:
        root = yaml.compose(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise ParseError(f"malformed YAML: {exc.problem}", line, col) from None
    kwargs = {"name": name}
    if root is None:
        return validate(ScenarioConfig(**kwargs))
    if not isinstance(root, yaml.MappingNode):
        raise ParseError("scenario must be a mapping of sections", *_pos(root))
    constructor = yaml.constructor.SafeConstructor()
    allowed = list(_SECTIONS) + ["sweep"]
    for key_node, value_node in root.value:
        key = _scalar(key_node, constructor, "section name")
        if key not in allowed:
            _unknown(key_node, str(key), allowed, "scenario")
        if key in kwargs:
            raise ParseError(f"duplicate section {key!r}", *_pos(key_node))
        if key == "sweep":
            kwargs[key] = _sweep(value_node, constructor)
        elif key == "potential" and isinstance(value_node, yaml.ScalarNode):
            kwargs[key] = PotentialSection(kind=constructor.construct_object(value_node))
        else:
            kwargs[key] = _section(value_node, _SECTIONS[key], key, constructor)
    cfg = validate(ScenarioConfig(**kwargs))
    cfg.expand_sweep()  # validate every sweep point up front
    return cfg


def load_config(path):
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, name=path.stem)


def dump_config(cfg):
    """YAML text that loads back to ``cfg`` (sweep included)."""
    data = copy.deepcopy(cfg.to_dict())
    if cfg.sweep:
        data["sweep"] = {k: list(v) for k, v in cfg.sweep}
    return yaml.safe_dump(data, sort_keys=False)


SCENARIO_DIR = Path(__file__).parent / "scenarios"


def shipped_scenarios():
    """Names of the scenarios bundled with the package."""
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


def scenario_path(name):
    path = SCENARIO_DIR / f"{name}.yaml"
    if not path.exists():
        raise ParseError(f"no shipped scenario named {name!r}; available: {', '.join(shipped_scenarios())}")
    return path
