"""Run configuration: a line-oriented ``key = value`` format with sections.

Grammar (INI dialect, parsed strictly):

* ``[section]`` headers group keys; ``key = value`` one per line.
* ``#`` or ``;`` start comments; blank lines are ignored.
* Unknown sections or keys are errors, as are duplicates -- there are no
  silent defaults for misspellings.
* ``auto`` requests the documented default for grid, coupling, and step
  fields; ``inf`` marks uncorrelated photons; times lists are
  comma-separated.

See the README for the full annotated schema.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

from .core import Branch


class ConfigError(Exception):
    """Malformed or invalid run configuration (CLI exit code 2)."""


INPUT_KINDS = ("two_photon", "single_photon", "excited_emitter")
DENSITY_FORMATS = ("text", "binary")
SWEEPABLE_PARAMETERS = ("sigma", "sigma_p", "separation", "delta")


@dataclass(frozen=True)
class PhysicalSection:
    gamma: float = 1.0
    v_g: float = 1.0
    coupling: float | None = None   # None -> calibrate on the resolved grid
    k0: float | None = None


@dataclass(frozen=True)
class GridSection:
    n_per_branch: int | None = None
    kappa_max: float | None = None


@dataclass(frozen=True)
class InputSection:
    kind: str = "two_photon"
    sigma_p: float = math.inf


@dataclass(frozen=True)
class PulseSection:
    sigma: float = 1.0
    z0: float = -3.0
    delta: float = 0.0
    direction: str = "right"
    allow_outgoing: bool = False

    @property
    def branch(self) -> Branch:
        return Branch.RIGHT if self.direction == "right" else Branch.LEFT


@dataclass(frozen=True)
class IntegratorSection:
    t_end: float = 10.0
    dt: float | None = None
    checkpoint_times: tuple[float, ...] = ()
    observable_stride: float = 0.05


@dataclass(frozen=True)
class OutputSection:
    series: bool = True
    report: bool = True
    density_map: bool = False
    density_n_t: int = 101
    density_n_z: int = 257
    density_z_min: float | None = None
    density_z_max: float | None = None
    density_format: str = "text"
    snapshot_times: tuple[float, ...] = ()
    snapshot_n_z: int = 201
    include_cross_branch: bool = False


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalSection = field(default_factory=PhysicalSection)
    grid: GridSection = field(default_factory=GridSection)
    input: InputSection = field(default_factory=InputSection)
    pulse1: PulseSection | None = None
    pulse2: PulseSection | None = None
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    output: OutputSection = field(default_factory=OutputSection)


# ---------------------------------------------------------------------------
# value parsers

def _p_float(text: str, where: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from None
    if math.isnan(val):
        raise ConfigError(f"{where}: NaN is not a valid value")
    return val


def _p_float_or_inf(text: str, where: str) -> float:
    if text.strip().lower() in ("inf", "infinity", "uncorrelated"):
        return math.inf
    return _p_float(text, where)


def _p_float_or_auto(text: str, where: str):
    if text.strip().lower() in ("auto", "none"):
        return None
    return _p_float(text, where)


def _p_int_or_auto(text: str, where: str):
    if text.strip().lower() in ("auto", "none"):
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {text!r}") from None


def _p_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {text!r}") from None


def _p_bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{where}: expected true/false, got {text!r}")


def _p_times(text: str, where: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(_p_float(p, where) for p in parts)


def _p_choice(choices):
    def parse(text: str, where: str) -> str:
        t = text.strip().lower()
        if t not in choices:
            raise ConfigError(f"{where}: expected one of {', '.join(choices)}, got {text!r}")
        return t
    return parse


_SCHEMA = {
    "physical": {
        "gamma": _p_float,
        "v_g": _p_float,
        "coupling": _p_float_or_auto,
        "k0": _p_float_or_auto,
    },
    "grid": {
        "n_per_branch": _p_int_or_auto,
        "kappa_max": _p_float_or_auto,
    },
    "input": {
        "kind": _p_choice(INPUT_KINDS),
        "sigma_p": _p_float_or_inf,
    },
    "pulse1": {
        "sigma": _p_float,
        "z0": _p_float,
        "delta": _p_float,
        "direction": _p_choice(("right", "left")),
        "allow_outgoing": _p_bool,
    },
    "pulse2": {
        "sigma": _p_float,
        "z0": _p_float,
        "delta": _p_float,
        "direction": _p_choice(("right", "left")),
        "allow_outgoing": _p_bool,
    },
    "integrator": {
        "t_end": _p_float,
        "dt": _p_float_or_auto,
        "checkpoint_times": _p_times,
        "observable_stride": _p_float,
    },
    "output": {
        "series": _p_bool,
        "report": _p_bool,
        "density_map": _p_bool,
        "density_n_t": _p_int,
        "density_n_z": _p_int,
        "density_z_min": _p_float_or_auto,
        "density_z_max": _p_float_or_auto,
        "density_format": _p_choice(DENSITY_FORMATS),
        "snapshot_times": _p_times,
        "snapshot_n_z": _p_int,
        "include_cross_branch": _p_bool,
    },
}

_SECTION_TYPES = {
    "physical": PhysicalSection,
    "grid": GridSection,
    "input": InputSection,
    "pulse1": PulseSection,
    "pulse2": PulseSection,
    "integrator": IntegratorSection,
    "output": OutputSection,
}


def read_sections(text: str) -> dict[str, dict[str, str]]:
    """Parse the raw key = value structure, reporting line numbers on error."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] "
                              f"(known: {', '.join(_SCHEMA)})")
        out[section] = dict(parser.items(section))
    return out


def apply_overrides(sections: dict[str, dict[str, str]], overrides) -> None:
    """Apply ``section.key=value`` strings onto the raw section map."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        target, value = item.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section, key = target.strip().split(".", 1)
        if section not in _SCHEMA:
            raise ConfigError(f"override names unknown section [{section}]")
        if key not in _SCHEMA[section]:
            raise ConfigError(f"override names unknown key {section}.{key}")
        sections.setdefault(section, {})[key.strip()] = value.strip()


def build_config(sections: dict[str, dict[str, str]]) -> RunConfig:
    """Convert raw section strings into a validated :class:`RunConfig`."""
    built: dict[str, object] = {}
    for name, raw in sections.items():
        schema = _SCHEMA[name]
        values = {}
        for key, text in raw.items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in section [{name}] "
                                  f"(known: {', '.join(schema)})")
            values[key] = schema[key](text, f"{name}.{key}")
        built[name] = _SECTION_TYPES[name](**values)
    cfg = RunConfig(
        physical=built.get("physical", PhysicalSection()),
        grid=built.get("grid", GridSection()),
        input=built.get("input", InputSection()),
        pulse1=built.get("pulse1"),
        pulse2=built.get("pulse2"),
        integrator=built.get("integrator", IntegratorSection()),
        output=built.get("output", OutputSection()),
    )
    validate_config(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    return build_config(read_sections(text))


def validate_config(cfg: RunConfig) -> None:
    phys, grid, inp, integ, out = cfg.physical, cfg.grid, cfg.input, cfg.integrator, cfg.output
    if phys.gamma <= 0:
        raise ConfigError("physical.gamma must be positive")
    if phys.v_g <= 0:
        raise ConfigError("physical.v_g must be positive")
    if phys.coupling is not None and phys.coupling <= 0:
        raise ConfigError("physical.coupling must be positive or auto")
    if grid.n_per_branch is not None and grid.n_per_branch < 2:
        raise ConfigError("grid.n_per_branch must be at least 2")
    if grid.kappa_max is not None and grid.kappa_max <= 0:
        raise ConfigError("grid.kappa_max must be positive")
    if not (inp.sigma_p > 0):
        raise ConfigError("input.sigma_p must be positive or inf")

    if inp.kind == "two_photon":
        if cfg.pulse1 is None or cfg.pulse2 is None:
            raise ConfigError("two_photon input requires [pulse1] and [pulse2]")
    elif inp.kind == "single_photon":
        if cfg.pulse1 is None:
            raise ConfigError("single_photon input requires [pulse1]")
        if cfg.pulse2 is not None:
            raise ConfigError("single_photon input takes no [pulse2]")
    else:
        if cfg.pulse1 is not None or cfg.pulse2 is not None:
            raise ConfigError("excited_emitter input takes no pulse sections")
    for label, pulse in (("pulse1", cfg.pulse1), ("pulse2", cfg.pulse2)):
        if pulse is None:
            continue
        if pulse.sigma <= 0:
            raise ConfigError(f"{label}.sigma must be positive")
        if not pulse.allow_outgoing:
            incoming = pulse.z0 < 0 if pulse.direction == "right" else pulse.z0 > 0
            if not incoming:
                raise ConfigError(
                    f"{label}.z0={pulse.z0} starts on the outgoing side for "
                    f"direction={pulse.direction}; set {label}.allow_outgoing")

    if integ.t_end <= 0:
        raise ConfigError("integrator.t_end must be positive")
    if integ.dt is not None and integ.dt <= 0:
        raise ConfigError("integrator.dt must be positive or auto")
    if integ.observable_stride <= 0:
        raise ConfigError("integrator.observable_stride must be positive")
    for t in integ.checkpoint_times:
        if not 0.0 <= t <= integ.t_end:
            raise ConfigError(f"integrator.checkpoint_times entry {t} outside "
                              f"[0, {integ.t_end}]")
    for t in out.snapshot_times:
        if not 0.0 <= t <= integ.t_end:
            raise ConfigError(f"output.snapshot_times entry {t} outside "
                              f"[0, {integ.t_end}]")
    if out.density_n_t < 2 or out.density_n_z < 2:
        raise ConfigError("output.density_n_t and density_n_z must be at least 2")
    if out.snapshot_n_z < 2:
        raise ConfigError("output.snapshot_n_z must be at least 2")
    if (out.density_z_min is None) != (out.density_z_max is None):
        raise ConfigError("output.density_z_min and density_z_max must be "
                          "given together (or both auto)")
    if (out.density_z_min is not None and out.density_z_max is not None
            and out.density_z_min >= out.density_z_max):
        raise ConfigError("output.density_z_min must be below density_z_max")
    if out.include_cross_branch and (phys.k0 is None or phys.k0 <= 0):
        raise ConfigError("output.include_cross_branch requires positive physical.k0")
    if out.snapshot_times and inp.kind != "two_photon":
        raise ConfigError("output.snapshot_times requires a two_photon input")


# ---------------------------------------------------------------------------
# serialization

def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(cfg)) == cfg``."""
    buf = io.StringIO()
    ordered: list[tuple[str, object]] = [
        ("physical", cfg.physical), ("grid", cfg.grid), ("input", cfg.input),
        ("pulse1", cfg.pulse1), ("pulse2", cfg.pulse2),
        ("integrator", cfg.integrator), ("output", cfg.output),
    ]
    for name, section in ordered:
        if section is None:
            continue
        buf.write(f"[{name}]\n")
        for key in _SCHEMA[name]:
            buf.write(f"{key} = {_fmt(getattr(section, key))}\n")
        buf.write("\n")
    return buf.getvalue()


def apply_sweep_parameter(cfg: RunConfig, parameter: str, value: float) -> RunConfig:
    """Derive the run configuration for one sweep point.

    sigma and delta apply to both pulses; separation places pulse2 the
    given distance behind pulse1 along pulse2's direction of travel (zero
    means coincident launch positions for co-propagating pulses).
    """
    if parameter not in SWEEPABLE_PARAMETERS:
        raise ConfigError(f"parameter {parameter!r} is not sweepable "
                          f"(choose from {', '.join(SWEEPABLE_PARAMETERS)})")
    if cfg.input.kind != "two_photon":
        raise ConfigError("sweeps require a two_photon input")
    if parameter == "sigma":
        if value <= 0:
            raise ConfigError("sigma sweep values must be positive")
        return replace(cfg, pulse1=replace(cfg.pulse1, sigma=value),
                       pulse2=replace(cfg.pulse2, sigma=value))
    if parameter == "sigma_p":
        if not (value > 0):
            raise ConfigError("sigma_p sweep values must be positive or inf")
        return replace(cfg, input=replace(cfg.input, sigma_p=value))
    if parameter == "delta":
        return replace(cfg, pulse1=replace(cfg.pulse1, delta=value),
                       pulse2=replace(cfg.pulse2, delta=value))
    # separation: displace pulse2 backward along its direction of travel
    back = -1.0 if cfg.pulse2.direction == "right" else 1.0
    z0 = cfg.pulse1.z0 + back * value
    return replace(cfg, pulse2=replace(cfg.pulse2, z0=z0))
