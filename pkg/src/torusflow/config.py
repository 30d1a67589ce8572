"""TOML experiment configuration.

Example::

    name = "lamella-vpmcf-rate"
    output_dir = "runs"

    [reference]
    kind = "Lamella2D"        # Lamella2D | Lamella3D | Disc2D | Cylinder3D
    n = 128
    slab_width = 0.5          # lamellae
    radius = 0.25             # disc / cylinder

    [flow]
    flow_kind = "VPMCF"       # VPMCF | SDF
    dt = 1e-4
    t_end = 0.2
    imex_theta = 1.0
    volume_projection = true
    adapt = false
    safety = 2.0
    snapshot_every = 40
    seed = 0
    monotone_tol = 1e-12      # allowed perimeter increase per step, relative to P(E)
    max_halvings = 20

    [initial]
    kind = "single_mode"      # zero | single_mode | random_band_limited | fourier_modes
    amplitude = 1e-3
    k = 1
    kmax = 4
    seed = 0
    # c11_target = 1e-2       # overrides amplitude when present
    # modes = [[1, 0.01, 0.0], [2, 0.005, 0.0]]   # fourier_modes: (k, cos, sin)

    [diagnostics]
    delta_star = 0.1
    asymmetry = true
    recentre = true
    volume_tol = 1e-10
    fit_windows = { perimeter_gap = [0.02, 0.2] }
    expected_rates = { perimeter_gap = 78.957 }
    rate_rtol = 0.05

Every numeric tolerance has the default shown.
"""

from dataclasses import asdict, dataclass, field, fields
import hashlib
import json
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .flow import FlowConfig
from .reference import Kind, ReferenceSpec


INITIAL_KINDS = ("zero", "single_mode", "random_band_limited", "fourier_modes")


@dataclass
class InitialSpec:
    kind: str = "zero"
    amplitude: float = 0.0
    k: int = 1
    kmax: int = 4
    seed: int = 0
    c11_target: Optional[float] = None
    modes: Optional[list] = None      # fourier_modes: [[k, a_cos, b_sin], ...]

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {', '.join(INITIAL_KINDS)}, got {self.kind!r}")
        if self.modes is not None:
            self.modes = [[int(m[0]), float(m[1]), float(m[2])] for m in self.modes]
        if self.kmax < 1 or self.k < 1:
            raise ConfigError("initial.k and initial.kmax must be >= 1")


@dataclass
class DiagnosticsSpec:
    delta_star: float = 0.1
    asymmetry: bool = True
    recentre: bool = True
    volume_tol: float = 1e-10
    fit_windows: dict = field(default_factory=dict)
    expected_rates: dict = field(default_factory=dict)
    rate_rtol: float = 0.05

    def __post_init__(self):
        if not self.delta_star > 0:
            raise ConfigError("diagnostics.delta_star must be positive")
        for key, win in self.fit_windows.items():
            if len(win) != 2 or not win[1] > win[0]:
                raise ConfigError(f"fit window for {key!r} must be [t0, t1] with t1 > t0")
        for key in self.expected_rates:
            if key not in self.fit_windows:
                raise ConfigError(f"expected rate for {key!r} has no fit window")


@dataclass
class ExperimentConfig:
    name: str
    reference: ReferenceSpec
    flow: FlowConfig
    initial: InitialSpec
    diagnostics: DiagnosticsSpec
    output_dir: str = "runs"

    def to_dict(self):
        ref = asdict(self.reference)
        ref["kind"] = self.reference.kind.value
        return {"name": self.name, "output_dir": self.output_dir, "reference": ref,
                "flow": asdict(self.flow), "initial": asdict(self.initial),
                "diagnostics": asdict(self.diagnostics)}

    def hash(self):
        from .io import dumps

        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(dumps(d).encode()).hexdigest()


def _build(cls, table, section):
    table = dict(table or {})
    known = {f.name for f in fields(cls)}
    extra = set(table) - known
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")
    try:
        return cls(**table)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def config_from_dict(d) -> ExperimentConfig:
    d = dict(d)
    extra = set(d) - {"name", "output_dir", "reference", "flow", "initial", "diagnostics"}
    if extra:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(extra))}")
    ref = dict(d.get("reference") or {})
    if "kind" not in ref:
        raise ConfigError("[reference] needs a kind")
    try:
        ref["kind"] = Kind(ref["kind"])
    except ValueError:
        raise ConfigError(f"unknown reference kind {ref['kind']!r}") from None
    for key in ("radius", "slab_width"):
        if key in ref:
            ref[key] = float(ref[key])
    spec = _build(ReferenceSpec, ref, "reference")
    flow = dict(d.get("flow") or {})
    for key in ("dt", "t_end", "imex_theta", "safety", "monotone_tol"):
        if key in flow:
            flow[key] = float(flow[key])
    return ExperimentConfig(
        name=str(d.get("name", "experiment")),
        reference=spec,
        flow=_build(FlowConfig, flow, "flow"),
        initial=_build(InitialSpec, d.get("initial"), "initial"),
        diagnostics=_build(DiagnosticsSpec, d.get("diagnostics"), "diagnostics"),
        output_dir=str(d.get("output_dir", "runs")),
    )


def parse_config(text, source="<string>") -> ExperimentConfig:
    """Parse TOML text; syntax errors carry the line/column reported by the parser."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def config_to_toml(cfg: ExperimentConfig) -> str:
    """Serialize back to TOML (flat tables plus inline tables for dict values)."""
    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            # JSON escapes control characters in a TOML-compatible way; DEL is left raw
            return json.dumps(v, ensure_ascii=False).replace("\x7f", "\\u007f")
        if isinstance(v, dict):
            return "{ " + ", ".join(f"{k} = {val(x)}" for k, x in v.items()) + " }"
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(val(x) for x in v) + "]"
        if isinstance(v, float):
            return repr(float(v))
        return repr(v)

    d = cfg.to_dict()
    lines = [f"name = {val(d['name'])}", f"output_dir = {val(d['output_dir'])}", ""]
    for sec in ("reference", "flow", "initial", "diagnostics"):
        lines.append(f"[{sec}]")
        for k, v in d[sec].items():
            if v is not None:
                lines.append(f"{k} = {val(v)}")
        lines.append("")
    return "\n".join(lines)
