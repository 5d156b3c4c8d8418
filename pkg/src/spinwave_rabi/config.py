"""Scenario configuration: YAML schema, defaults, strict validation.

A scenario document is a YAML mapping with the sections ``params``,
``resonance``, ``damping``, ``integrator``, ``sequence``, ``sweep`` and
``output`` plus a handful of top-level scalars.  Every key is optional and
falls back to a documented default; unknown keys are rejected outright so
typos cannot silently change the physics.  The full schema with defaults
is in the README and in :data:`DEFAULT_CONFIG`.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import yaml

from .core_model import PhysicalParams, ResonanceSpec, validate_resonance
from .meanfield import DampingParams, IntegratorConfig

__all__ = [
    "ConfigError",
    "PulseSegment",
    "SweepConfig",
    "OutputConfig",
    "ScenarioConfig",
    "DEFAULT_CONFIG",
    "parse_config",
    "load_config",
    "config_to_dict",
]


class ConfigError(ValueError):
    """A scenario document is malformed or violates a validation rule."""


SEGMENT_KINDS = ("OpticalPump", "Write", "Delay", "Probe", "Read")


@dataclass(frozen=True)
class PulseSegment:
    """One entry of the pulse sequence (powers in mW, durations in us)."""

    kind: str
    power_mw: float = 0.0
    duration_us: float = 0.0
    tau_us: float = 0.0
    residual_m_fraction: float = 0.0

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ConfigError(f"unknown segment kind {self.kind!r}; expected one of {SEGMENT_KINDS}")
        if self.power_mw < 0:
            raise ConfigError(f"{self.kind}: power must be >= 0")
        if self.duration_us < 0:
            raise ConfigError(f"{self.kind}: duration must be >= 0")
        if self.tau_us < 0:
            raise ConfigError(f"{self.kind}: tau must be >= 0")
        if not 0.0 <= self.residual_m_fraction <= 1.0:
            raise ConfigError(f"{self.kind}: residual_m_fraction must be in [0, 1]")


@dataclass(frozen=True)
class SweepConfig:
    """Power list and windowing policy for the sweep commands."""

    powers_mw: tuple = ()
    workers: int = 1
    auto_window: bool = True
    fit_periods: float = 8.0
    samples_per_period: int = 400

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("sweep.workers must be >= 1")
        if not self.fit_periods > 0:
            raise ConfigError("sweep.fit_periods must be positive")
        if self.samples_per_period < 20:
            raise ConfigError("sweep.samples_per_period must be >= 20")


@dataclass(frozen=True)
class OutputConfig:
    """What a run computes and emits."""

    traces: bool = True
    report: bool = True
    fit: bool = True
    efficiency: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved configuration of one scenario."""

    scenario_id: str
    params: PhysicalParams
    resonance: ResonanceSpec
    resonance_tolerance: float
    damping: DampingParams
    integrator: IntegratorConfig
    stokes_seed: float
    sequence: tuple
    power_calibration: float
    engine: str
    depletion: bool
    atom_cap: bool
    seed: int
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


# Complete schema with defaults.  The default scenario: optical pumping,
# a 48 mW / 2 us write pulse, a 0.1 us delay, then an 8 us probe window.
DEFAULT_CONFIG: Dict[str, Any] = {
    "scenario_id": "default",
    "engine": "meanfield",
    "depletion": False,
    "atom_cap": False,
    "seed": 0,
    "power_calibration": 1.0,
    "params": {
        "g_eg": 51.0,
        "g_em": 51.0,
        "delta": 8000.0,
        "eta": None,
        "n_atoms": 1.0e6,
    },
    "resonance": {
        "omega_p": 2.3693e9,
        "omega_s": 2.3693e9 - 42944.3,
        "omega_mg": 42944.3,
        "read_detuning": None,
        "tolerance": 1.0,
    },
    "damping": {
        "gamma_p": 0.15,
        "gamma_stokes": 0.15,
        "gamma_spin": 0.05,
        "gamma_spin_read": 0.6,
    },
    "integrator": {
        "dt": 2.0e-4,
        "max_steps": 2_000_000,
        "record_every": 8,
        "stokes_seed": 1.0e-6,
    },
    "sequence": [
        {"kind": "OpticalPump", "residual_m_fraction": 0.02},
        {"kind": "Write", "power_mw": 48.0, "duration_us": 2.0},
        {"kind": "Delay", "tau_us": 0.1},
        {"kind": "Probe", "power_mw": 0.1, "duration_us": 8.0},
    ],
    "sweep": {
        "powers_mw": [],
        "workers": 1,
        "auto_window": True,
        "fit_periods": 8.0,
        "samples_per_period": 400,
    },
    "output": {
        "traces": True,
        "report": True,
        "fit": True,
        "efficiency": True,
    },
}

_SEGMENT_KEYS = {
    "OpticalPump": {"kind", "residual_m_fraction"},
    "Write": {"kind", "power_mw", "duration_us"},
    "Delay": {"kind", "tau_us"},
    "Probe": {"kind", "power_mw", "duration_us"},
    "Read": {"kind", "power_mw", "duration_us"},
}


def _check_keys(given: Dict[str, Any], allowed, where: str) -> None:
    unknown = set(given) - set(allowed)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"unknown key {name!r} in {where}; allowed keys: {sorted(allowed)}")


def _merge_section(name: str, given: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    merged = copy.deepcopy(DEFAULT_CONFIG[name])
    if given is None:
        return merged
    if not isinstance(given, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    _check_keys(given, merged.keys(), f"section {name!r}")
    merged.update(given)
    return merged


def _build_segment(entry: Any, index: int) -> PulseSegment:
    if not isinstance(entry, dict):
        raise ConfigError(f"sequence[{index}] must be a mapping with a 'kind' key")
    kind = entry.get("kind")
    if kind not in SEGMENT_KINDS:
        raise ConfigError(
            f"sequence[{index}]: unknown segment kind {kind!r}; expected one of {SEGMENT_KINDS}"
        )
    _check_keys(entry, _SEGMENT_KEYS[kind], f"sequence[{index}] ({kind})")
    return PulseSegment(**entry)


def _validate_sequence(segments: List[PulseSegment]) -> None:
    kinds = [s.kind for s in segments]
    if "OpticalPump" in kinds and kinds.index("OpticalPump") != 0:
        raise ConfigError("sequence rule violated: OpticalPump must come first when present")
    if kinds.count("OpticalPump") > 1:
        raise ConfigError("sequence rule violated: at most one OpticalPump segment")
    if kinds.count("Write") > 1:
        raise ConfigError("sequence rule violated: at most one Write segment")
    conversion_idx = [i for i, k in enumerate(kinds) if k in ("Probe", "Read")]
    if conversion_idx:
        if "Write" not in kinds:
            raise ConfigError("sequence rule violated: exactly one Write must precede any Probe/Read")
        if kinds.index("Write") > conversion_idx[0]:
            raise ConfigError("sequence rule violated: the Write segment must precede any Probe/Read")


def parse_config(text: str, scenario_id: Optional[str] = None) -> ScenarioConfig:
    """Parse a YAML scenario document into a fully resolved configuration.

    Every omitted key takes its documented default; unknown keys and rule
    violations raise :class:`ConfigError` naming the offending key or rule.
    An empty document yields the default scenario.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ConfigError(f"config syntax error at line {mark.line + 1}: {exc}") from exc
        raise ConfigError(f"config syntax error: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping of sections")
    _check_keys(doc, DEFAULT_CONFIG.keys(), "config")

    params_d = _merge_section("params", doc.get("params"))
    resonance_d = _merge_section("resonance", doc.get("resonance"))
    damping_d = _merge_section("damping", doc.get("damping"))
    integrator_d = _merge_section("integrator", doc.get("integrator"))
    sweep_d = _merge_section("sweep", doc.get("sweep"))
    output_d = _merge_section("output", doc.get("output"))

    engine = doc.get("engine", DEFAULT_CONFIG["engine"])
    if engine not in ("meanfield", "gaussian"):
        raise ConfigError(f"engine must be 'meanfield' or 'gaussian', got {engine!r}")

    power_calibration = float(doc.get("power_calibration", DEFAULT_CONFIG["power_calibration"]))
    if not power_calibration > 0:
        raise ConfigError("power_calibration must be positive")

    raw_sequence = doc.get("sequence", DEFAULT_CONFIG["sequence"])
    if not isinstance(raw_sequence, list):
        raise ConfigError("sequence must be a list of segments")
    segments = [_build_segment(e, i) for i, e in enumerate(raw_sequence)]
    _validate_sequence(segments)

    try:
        params = PhysicalParams(**params_d)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc

    tolerance = float(resonance_d.pop("tolerance"))
    resonance = ResonanceSpec(**resonance_d)
    if tolerance < 0:
        raise ConfigError("resonance.tolerance must be >= 0")
    if not validate_resonance(resonance, tolerance):
        gap = abs(resonance.omega_p - resonance.omega_s - resonance.omega_mg)
        raise ConfigError(
            "two-photon resonance rule violated: "
            f"|omega_p - omega_s - omega_mg| = {gap:g} exceeds tolerance {tolerance:g}"
        )

    try:
        damping = DampingParams(**damping_d)
    except ValueError as exc:
        raise ConfigError(f"damping: {exc}") from exc

    stokes_seed = float(integrator_d.pop("stokes_seed"))
    if not stokes_seed > 0:
        raise ConfigError("integrator.stokes_seed must be positive")
    try:
        integrator = IntegratorConfig(**integrator_d)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc

    powers = sweep_d.pop("powers_mw")
    if powers is None:
        powers = []
    if not isinstance(powers, (list, tuple)):
        raise ConfigError("sweep.powers_mw must be a list of powers in mW")
    sweep = SweepConfig(powers_mw=tuple(float(p) for p in powers), **sweep_d)

    output = OutputConfig(**{k: bool(v) for k, v in output_d.items()})

    sid = scenario_id or doc.get("scenario_id", DEFAULT_CONFIG["scenario_id"])
    return ScenarioConfig(
        scenario_id=str(sid),
        params=params,
        resonance=resonance,
        resonance_tolerance=tolerance,
        damping=damping,
        integrator=integrator,
        stokes_seed=stokes_seed,
        sequence=tuple(segments),
        power_calibration=power_calibration,
        engine=engine,
        depletion=bool(doc.get("depletion", DEFAULT_CONFIG["depletion"])),
        atom_cap=bool(doc.get("atom_cap", DEFAULT_CONFIG["atom_cap"])),
        seed=int(doc.get("seed", DEFAULT_CONFIG["seed"])),
        sweep=sweep,
        output=output,
    )


def load_config(path) -> ScenarioConfig:
    """Read and parse a scenario document from a file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    """Resolved configuration as a plain dict (report echo, stable order)."""
    return {
        "scenario_id": config.scenario_id,
        "engine": config.engine,
        "depletion": config.depletion,
        "atom_cap": config.atom_cap,
        "seed": config.seed,
        "power_calibration": config.power_calibration,
        "params": {
            "g_eg": config.params.g_eg,
            "g_em": config.params.g_em,
            "delta": config.params.delta,
            "eta": config.params.eta,
            "n_atoms": config.params.n_atoms,
        },
        "resonance": {
            "omega_p": config.resonance.omega_p,
            "omega_s": config.resonance.omega_s,
            "omega_mg": config.resonance.omega_mg,
            "read_detuning": config.resonance.read_detuning,
            "tolerance": config.resonance_tolerance,
        },
        "damping": {
            "gamma_p": config.damping.gamma_p,
            "gamma_stokes": config.damping.gamma_stokes,
            "gamma_spin": config.damping.gamma_spin,
            "gamma_spin_read": config.damping.gamma_spin_read,
        },
        "integrator": {
            "dt": config.integrator.dt,
            "max_steps": config.integrator.max_steps,
            "record_every": config.integrator.record_every,
            "stokes_seed": config.stokes_seed,
        },
        "sequence": [
            {
                k: v
                for k, v in (
                    ("kind", seg.kind),
                    ("power_mw", seg.power_mw),
                    ("duration_us", seg.duration_us),
                    ("tau_us", seg.tau_us),
                    ("residual_m_fraction", seg.residual_m_fraction),
                )
                if k == "kind" or v != 0.0
            }
            for seg in config.sequence
        ],
        "sweep": {
            "powers_mw": list(config.sweep.powers_mw),
            "workers": config.sweep.workers,
            "auto_window": config.sweep.auto_window,
            "fit_periods": config.sweep.fit_periods,
            "samples_per_period": config.sweep.samples_per_period,
        },
        "output": {
            "traces": config.output.traces,
            "report": config.output.report,
            "fit": config.output.fit,
            "efficiency": config.output.efficiency,
        },
    }
