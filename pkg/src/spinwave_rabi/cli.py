"""Command-line interface.

Subcommands: ``simulate`` (run one scenario), ``sweep-write-power`` and
``sweep-probe-power`` (power sweeps with regressions), ``fit`` (fit an
external trace CSV), ``single-photon`` (print the entangled single-photon
amplitudes for a mixing angle).

Exit codes: 0 success, 1 configuration error, 2 runtime or fit failure.
``--config`` accepts a path or the name of a shipped scenario
(``default``, ``efficiency40``, ``read_direction``, ``write_power_sweep``,
``probe_power_sweep``, ``gaussian_demo``).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from importlib import resources

from . import __version__
from .analysis import fit_damped_rabi, initial_guess
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .core_model import single_photon_output
from .output import emit_csv, emit_report, read_trace_csv
from .scenario import run_scenario, sweep_probe_power, sweep_write_power

__all__ = ["main", "build_parser", "resolve_config"]


def resolve_config(name_or_path: str | None) -> ScenarioConfig:
    """Load a scenario from a path or from the shipped config directory."""
    if name_or_path is None:
        name_or_path = "default"
    if os.path.exists(name_or_path):
        return load_config(name_or_path)
    base = os.path.basename(name_or_path)
    if base == name_or_path:  # bare name: try the packaged scenarios
        candidate = base if base.endswith(".yaml") else base + ".yaml"
        pkg_dir = resources.files("spinwave_rabi") / "configs"
        entry = pkg_dir / candidate
        if entry.is_file():
            return parse_config(entry.read_text(encoding="utf-8"), scenario_id=candidate[:-5])
        available = sorted(p.name[:-5] for p in pkg_dir.iterdir() if p.name.endswith(".yaml"))
        raise ConfigError(
            f"no config file or shipped scenario named {name_or_path!r}; shipped: {available}"
        )
    raise ConfigError(f"config file not found: {name_or_path}")


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "engine", None) is not None:
        config = replace(config, engine=args.engine)
    return config


def _emit(record, config, out_dir):
    paths = []
    if config.output.traces:
        paths.extend(emit_csv(record, out_dir))
    if config.output.report:
        paths.append(emit_report(record, os.path.join(out_dir, f"{record.scenario_id}__report.json")))
    return paths


def _cmd_simulate(args) -> int:
    config = _apply_overrides(resolve_config(args.config), args)
    record = run_scenario(config)
    paths = _emit(record, config, args.out)
    if record.rates:
        print(f"kappa = {record.rates.kappa:.6g} rad/us, omega = {record.rates.omega_rabi:.6g} rad/us")
    for name, fit in sorted(record.fits.items()):
        m = fit.model
        print(
            f"fit {name}: omega = {m.omega:.6g} rad/us, gamma = {m.gamma:.6g} 1/us, "
            f"converged = {fit.converged}"
        )
    for name, dphi in sorted(record.phase_differences.items()):
        print(f"phase difference ({name}) = {dphi:.6g} rad")
    if record.efficiency is not None:
        print(f"pulse-area efficiency = {record.efficiency:.4f}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_sweep(args, runner, regression_key) -> int:
    config = _apply_overrides(resolve_config(args.config), args)
    record = runner(config)
    paths = _emit(record, config, args.out)
    reg = record.regressions[regression_key]
    print(
        f"{regression_key}: slope = {reg.slope:.6g}, intercept = {reg.intercept:.6g}, "
        f"R^2 = {reg.r_squared:.6f} over {reg.n_points} points"
    )
    for w in record.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_fit(args) -> int:
    trace = read_trace_csv(args.csv)
    channel = {"probe": "P", "stokes": "S", "spin": "spin"}[args.channel]
    fit = fit_damped_rabi(trace, channel, initial_guess(trace, channel))
    m = fit.model
    u = fit.param_uncertainties
    print(f"amplitude = {m.amplitude:.6g} +/- {u['amplitude']:.2g}")
    print(f"omega     = {m.omega:.6g} +/- {u['omega']:.2g} rad/us")
    print(f"gamma     = {m.gamma:.6g} +/- {u['gamma']:.2g} 1/us")
    print(f"phi       = {m.phi:.6g} +/- {u['phi']:.2g} rad")
    print(f"offset    = {m.offset:.6g} +/- {u['offset']:.2g}")
    print(f"residual rms = {fit.residual_rms:.6g}, iterations = {fit.iterations}, converged = {fit.converged}")
    return 0 if fit.converged else 2


def _cmd_single_photon(args) -> int:
    state = single_photon_output(args.theta)
    print(f"theta = {args.theta:.9g} rad")
    print(f"c1 (Stokes) = {state.c1.real:.9g}, |c1|^2 = {abs(state.c1) ** 2:.9g}")
    print(f"c2 (probe)  = {state.c2.real:.9g}, |c2|^2 = {abs(state.c2) ** 2:.9g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinwave-rabi",
        description="Simulate and analyze spin-wave-assisted photonic Rabi oscillation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML path or shipped scenario name")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument(
        "--engine", choices=("meanfield", "gaussian"), default=None, help="override the engine"
    )

    p = sub.add_parser("simulate", parents=[common], help="run one scenario and emit traces/report")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "sweep-write-power",
        parents=[common],
        help="sweep the write power and regress log(omega) vs sqrt(power)",
    )
    p.set_defaults(func=lambda a: _cmd_sweep(a, sweep_write_power, "write_power_scaling"))

    p = sub.add_parser(
        "sweep-probe-power",
        parents=[common],
        help="sweep the probe power and regress the converted peak log-log",
    )
    p.set_defaults(func=lambda a: _cmd_sweep(a, sweep_probe_power, "probe_power_loglog"))

    p = sub.add_parser("fit", help="fit a damped oscillation to a trace CSV")
    p.add_argument("csv", help="trace CSV file (t_us,i_probe,i_stokes,i_spin)")
    p.add_argument(
        "--channel", choices=("probe", "stokes", "spin"), default="stokes", help="channel to fit"
    )
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser(
        "single-photon", help="print the two-mode single-photon amplitudes for a mixing angle"
    )
    p.add_argument("--theta", type=float, default=math.pi / 4, help="mixing angle in rad")
    p.set_defaults(func=_cmd_single_photon)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
