"""File emission: trace CSVs and the structured JSON report.

CSV format (one file per trace): header ``t_us,i_probe,i_stokes,i_spin``,
one row per sample, 9 significant digits, LF newlines, no trailing
whitespace.  Identical records serialize to byte-identical files.

The report is a JSON key tree with stable key order: scenario id, package
version, timestamp, the fully resolved config, rates, fits, regressions,
sweep table and efficiency.  Two runs of the same scenario differ only in
the timestamp field.
"""

from __future__ import annotations

import io
import json
import os
from typing import Dict, List

import numpy as np

from .analysis import FitResult, RegressionResult
from .meanfield import Trace
from .scenario import OutputRecord

__all__ = ["emit_csv", "emit_report", "read_trace_csv"]

CSV_HEADER = "t_us,i_probe,i_stokes,i_spin"


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def emit_csv(record: OutputRecord, out_dir) -> List[str]:
    """Write one CSV file per trace in the record; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(record.traces):
        trace = record.traces[name]
        path = os.path.join(out_dir, f"{record.scenario_id}__{name}.csv")
        lines = [CSV_HEADER]
        for t, ip, is_, ia in zip(trace.times, trace.i_p, trace.i_s, trace.i_spin):
            lines.append(f"{_fmt(t)},{_fmt(ip)},{_fmt(is_)},{_fmt(ia)}")
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def read_trace_csv(path) -> Trace:
    """Parse a trace CSV produced by :func:`emit_csv`."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}; expected {CSV_HEADER!r}")
        body = fh.read().strip()
    if not body:
        return Trace(times=np.empty(0), i_p=np.empty(0), i_s=np.empty(0), i_spin=np.empty(0))
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    return Trace(times=data[:, 0], i_p=data[:, 1], i_s=data[:, 2], i_spin=data[:, 3])


def _fit_dict(fit: FitResult) -> Dict[str, object]:
    return {
        "amplitude": fit.model.amplitude,
        "omega": fit.model.omega,
        "gamma": fit.model.gamma,
        "phi": fit.model.phi,
        "offset": fit.model.offset,
        "uncertainties": dict(fit.param_uncertainties),
        "residual_rms": fit.residual_rms,
        "iterations": fit.iterations,
        "converged": fit.converged,
    }


def _regression_dict(reg: RegressionResult) -> Dict[str, object]:
    return {
        "slope": reg.slope,
        "intercept": reg.intercept,
        "r_squared": reg.r_squared,
        "n_points": reg.n_points,
    }


def emit_report(record: OutputRecord, path) -> str:
    """Write the structured JSON report for a record; returns the path."""
    report: Dict[str, object] = {
        "scenario_id": record.scenario_id,
        "version": record.metadata.get("version"),
        "timestamp": record.metadata.get("timestamp"),
        "kernel": record.metadata.get("kernel"),
        "config": record.metadata.get("config"),
    }
    if record.rates is not None:
        report["rates"] = {
            "kappa": record.rates.kappa,
            "omega_rabi": record.rates.omega_rabi,
            "theta": record.rates.theta,
        }
    if record.fits:
        report["fits"] = {name: _fit_dict(fit) for name, fit in sorted(record.fits.items())}
    if record.phase_differences:
        report["phase_differences"] = dict(sorted(record.phase_differences.items()))
    if record.peaks:
        report["peaks"] = {
            name: {"value": v, "t_us": t} for name, (v, t) in sorted(record.peaks.items())
        }
    if record.efficiency is not None:
        report["efficiency"] = {
            "pulse_area": record.efficiency,
            "exceeds_unity": record.efficiency_exceeds_unity,
        }
    if record.sweep_points:
        report["sweep"] = {"points": record.sweep_points}
    if record.regressions:
        report["regressions"] = {
            name: _regression_dict(reg) for name, reg in sorted(record.regressions.items())
        }
    if record.warnings:
        report["warnings"] = list(record.warnings)

    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return os.fspath(path)
