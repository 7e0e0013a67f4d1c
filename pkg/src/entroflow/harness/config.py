"""Scenario configuration: YAML files mapped onto dataclasses.

All numeric defaults live in DEFAULT_TOLERANCES and the dataclass defaults
below; a scenario file overrides any of them.

==========================  ========  ==============================================
tolerance                   default   meaning
==========================  ========  ==============================================
key_identity_rel            1e-9      heat-operator identity, relative to max(|rhs|, 1e-12)
bochner_abs                 1e-11     Bochner identity residual
heat_residual               1e-10     (d_t u - Lap u) / u
f_equation                  1e-10     f-equation residual
divergence_rel              1e-6      boundary form vs interior form of W
fd_rhs_rel                  1e-3      sup |FD dW/dt - rhs| / sup |rhs|
order_halfwidth             0.2       accepted distance of a measured order from nominal
neumann                     1e-8      |beta from marker velocity - (-grad f . N)|
kinematic_decomposition     1e-6      |d beta/dt - (d_t beta + grad beta . grad f)|
normal_rate                 1e-6      |dN/dt - (grad beta + h(grad f))|
rigidity_W_rel              1e-6      |W(t) - W(t0)| / (1 + |W(t0)|)
rigidity_integrand          1e-10     pointwise boundary integrand on the rigidity flow
rigidity_volume_integrand   1e-12     pointwise |Hess f - Id/2t|^2 on the rigidity flow
rigidity_radius_rel         1e-6      marker distance from the sphere sqrt(2nt), relative
harnack_min                 1e-8      accepted negativity of the Harnack minimum
harnack_analytic_rel        1e-8      circle Harnack value vs 1/R^3 + 1/(2tR)
harnack_equality            1e-10     expanding-circle equality case
monotone_slack              1e-8      allowed increase of W per step
mu_abs                      1e-6      entropy infimum vs closed form
mu_W_dev                    1e-8      max |W(f) - mu| at the optimum
normalization               1e-10     |int u - 1| at the optimum
minimizer_center            1e-6      distance of the optimal center from the symmetric one
mcf_closed_form_rel         1e-4      stepped circle/sphere radius vs closed form
floor                       1e-10     errors below this are reported "at floor"
==========================  ========  ==============================================
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

FLOW_KINDS = ("rigidity", "gradient-advection", "shrinking-mcf", "harnack-sweep", "minimizer")

DEFAULT_TOLERANCES = {
    "key_identity_rel": 1e-9,
    "bochner_abs": 1e-11,
    "heat_residual": 1e-10,
    "f_equation": 1e-10,
    "divergence_rel": 1e-6,
    "fd_rhs_rel": 1e-3,
    "order_halfwidth": 0.2,
    "neumann": 1e-8,
    "kinematic_decomposition": 1e-6,
    "normal_rate": 1e-6,
    "rigidity_W_rel": 1e-6,
    "rigidity_integrand": 1e-10,
    "rigidity_volume_integrand": 1e-12,
    "rigidity_radius_rel": 1e-6,
    "harnack_min": 1e-8,
    "harnack_analytic_rel": 1e-8,
    "harnack_equality": 1e-10,
    "monotone_slack": 1e-8,
    "mu_abs": 1e-6,
    "mu_W_dev": 1e-8,
    "normalization": 1e-10,
    "minimizer_center": 1e-6,
    "mcf_closed_form_rel": 1e-4,
    "floor": 1e-10,
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(self.errors))


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (1e-3)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+][0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def yaml_load(text: str):
    return yaml.load(text, Loader=_Loader)


@dataclass
class ModeSpec:
    weight: float = 1.0
    center: list = field(default_factory=lambda: [0.0, 0.0])
    offset: float = 0.0


@dataclass
class GeometrySpec:
    """kind: support | markers | sphere.

    Support curves use h(theta) = sum_k coefficients[k] cos(k theta); marker
    curves use r(phi) = sum_k coefficients[k] cos(k phi) about `center`.
    Without coefficients the boundary is a circle/sphere of `radius`, and a
    missing radius means the self-similar radius sqrt(2 n t0).
    """

    kind: str = "markers"
    nodes: int = 256
    radius: float | None = None
    coefficients: list | None = None
    center: list | None = None
    stencil: int | str = 4
    method: str = "spectral"


@dataclass
class Resolution:
    angular: int = 256
    radial: int = 32


@dataclass
class ScenarioConfig:
    name: str
    flow_kind: str
    ambient_dim: int = 2
    t0: float = 0.5
    t_end: float = 1.0
    dt: float = 1e-3
    description: str = ""
    sample_every: int = 1
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    heat: list = field(default_factory=lambda: [ModeSpec()])
    resolution: Resolution = field(default_factory=Resolution)
    ladder: list = field(default_factory=list)
    stepper_ladder: list = field(default_factory=list)
    kinematics_order: int = 6
    check_interval: float = 0.05
    probe_dt: float = 1e-5
    identity_samples: int = 100
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str | None = None

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    @property
    def steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))

    @property
    def n(self) -> int:
        return self.ambient_dim - 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        errors = []
        known = {f.name for f in fields(cls)}
        for key in sorted(set(data) - known):
            errors.append(f"{key}: unknown field")
        for key in ("name", "flow_kind"):
            if key not in data:
                errors.append(f"{key}: required")
        if errors:
            raise ConfigError(errors)
        kw = {k: v for k, v in data.items() if k in known}
        try:
            if "geometry" in kw:
                kw["geometry"] = GeometrySpec(**(kw["geometry"] or {}))
            if "resolution" in kw:
                kw["resolution"] = Resolution(**(kw["resolution"] or {}))
            if "heat" in kw:
                kw["heat"] = [ModeSpec(**m) for m in kw["heat"]]
        except TypeError as exc:
            raise ConfigError([f"malformed nested section: {exc}"]) from None
        cfg = cls(**kw)
        validate(cfg)
        return cfg


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg: ScenarioConfig) -> None:
    """Collect every problem with `cfg` and raise them together."""
    e = []
    if cfg.flow_kind not in FLOW_KINDS:
        e.append(f"flow_kind: must be one of {', '.join(FLOW_KINDS)}, got {cfg.flow_kind!r}")
    for key in ("t0", "t_end", "dt"):
        if not _is_number(getattr(cfg, key)):
            e.append(f"{key}: must be a number")
    if not _is_number(cfg.t0) or not _is_number(cfg.t_end) or not _is_number(cfg.dt):
        raise ConfigError(e)
    if not cfg.t0 > 0:
        e.append(f"t0: must be > 0, got {cfg.t0}")
    if not cfg.t_end > cfg.t0:
        e.append(f"t_end: must be > t0, got {cfg.t_end}")
    if not cfg.dt > 0:
        e.append(f"dt: must be > 0, got {cfg.dt}")
    elif cfg.t_end > cfg.t0:
        span = cfg.t_end - cfg.t0
        if abs(round(span / cfg.dt) * cfg.dt - span) > 1e-9 * max(span, 1.0):
            e.append(f"dt: {cfg.dt} does not divide t_end - t0 = {span}")
    if cfg.ambient_dim not in (2, 3):
        e.append(f"ambient_dim: must be 2 or 3, got {cfg.ambient_dim}")
    if cfg.flow_kind in ("gradient-advection", "harnack-sweep") and cfg.ambient_dim != 2:
        e.append(f"ambient_dim: {cfg.flow_kind} runs on planar curves (ambient_dim 2)")
    if not isinstance(cfg.sample_every, int) or cfg.sample_every < 1:
        e.append("sample_every: must be a positive integer")
    if cfg.kinematics_order not in (2, 4, 6, 8):
        e.append("kinematics_order: must be 2, 4, 6 or 8")
    g = cfg.geometry
    if g.kind not in ("support", "markers", "sphere"):
        e.append(f"geometry.kind: must be support, markers or sphere, got {g.kind!r}")
    if not isinstance(g.nodes, int) or g.nodes < 16:
        e.append("geometry.nodes: must be an integer >= 16")
    if g.radius is not None and not (_is_number(g.radius) and g.radius > 0):
        e.append("geometry.radius: must be positive or null")
    if g.kind == "sphere" or cfg.ambient_dim == 3:
        if g.kind != "sphere":
            e.append("geometry.kind: ambient_dim 3 only supports spheres")
    if g.method not in ("spectral", "fit", "linear"):
        e.append("geometry.method: must be spectral, fit or linear")
    if not (g.stencil == "spectral" or (isinstance(g.stencil, int) and g.stencil >= 4 and g.stencil % 2 == 0)):
        e.append("geometry.stencil: must be an even integer >= 4 or 'spectral'")
    if not cfg.heat:
        e.append("heat: at least one mode is required")
    for i, m in enumerate(cfg.heat):
        if not (_is_number(m.weight) and m.weight > 0):
            e.append(f"heat[{i}].weight: must be positive")
        if not (_is_number(m.offset) and m.offset >= 0):
            e.append(f"heat[{i}].offset: must be >= 0")
        if len(m.center) != cfg.ambient_dim:
            e.append(f"heat[{i}].center: needs {cfg.ambient_dim} coordinates")
    r = cfg.resolution
    if r.angular < 8 or r.radial < 2:
        e.append("resolution: angular >= 8 and radial >= 2 required")
    prev = None
    for i, level in enumerate(cfg.ladder):
        if not (isinstance(level, list) and len(level) == 3):
            e.append(f"ladder[{i}]: must be [angular, radial, dt]")
            continue
        if prev is not None and not (level[0] > prev[0] and level[1] > prev[1] and level[2] < prev[2]):
            e.append(f"ladder[{i}]: resolutions must strictly increase along the ladder")
        prev = level
    for i in range(1, len(cfg.stepper_ladder)):
        if not cfg.stepper_ladder[i] < cfg.stepper_ladder[i - 1]:
            e.append(f"stepper_ladder[{i}]: step sizes must strictly decrease")
    for key, val in cfg.tolerances.items():
        if key not in DEFAULT_TOLERANCES:
            e.append(f"tolerances.{key}: unknown tolerance")
        elif not (_is_number(val) and val >= 0):
            e.append(f"tolerances.{key}: must be a nonnegative number")
    if e:
        raise ConfigError(e)


def load_config(path, overrides=()) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml_load(path.read_text())
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from None
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    for item in overrides:
        apply_override(data, item)
    return ScenarioConfig.from_dict(data)


def apply_override(data: dict, item: str) -> None:
    """Set a dotted KEY=VALUE in a raw config mapping; VALUE is parsed as YAML."""
    if "=" not in item:
        raise ConfigError([f"override {item!r}: expected KEY=VALUE"])
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError([f"override {item!r}: {p} is not a section"])
    try:
        node[parts[-1]] = yaml_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError([f"override {item!r}: value is not valid YAML ({exc})"]) from None


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
