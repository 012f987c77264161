"""Command-line front end.

Subcommands map one-to-one onto the scenario runners; every run writes CSV
result files plus a JSON manifest holding the fully resolved configuration.
Feeding a manifest back through --config reproduces the outputs bitwise on
the same platform.

Exit codes: 0 success, 2 configuration error, 3 numerical/physics error,
1 anything unexpected.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .config import parse_config
from .errors import ConfigError, ZenocatError
from .experiments import (
    ExperimentConfig,
    fit_decaying_cosine,
    fit_parity_run,
    run_cardinal_gate,
    run_frequency_matching_sweep,
    run_parity_oscillation,
    run_phase_flip,
    run_rabi_sweep,
    run_wigner_tomography,
)
from .reports import default_output_dir, manifest_payload, render, write_csv, write_manifest
from .validation import run_validation_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass(frozen=True)
class CliInvocation:
    subcommand: str
    config_path: str | None
    overrides: tuple[str, ...]
    output_dir: str | None
    jobs: int
    preset: str
    extra: dict | None = None


def _tag(x: float) -> str:
    return repr(float(x)).replace(".", "p").replace("-", "m")


def _dispatch_simulate(cfg: ExperimentConfig, outdir: Path, jobs: int) -> tuple[list[str], dict]:
    runs = run_parity_oscillation(cfg, jobs=jobs)
    outputs = []
    for run in runs:
        name = f"parity_nbar{_tag(run.nbar)}_eps{_tag(run.multiplier)}.csv"
        write_csv(
            outdir / name,
            ["time_us", "parity"],
            zip(run.times.tolist(), run.parity.tolist()),
        )
        outputs.append(name)
    return outputs, {}


def _dispatch_sweep(cfg: ExperimentConfig, outdir: Path, jobs: int) -> tuple[list[str], dict]:
    points = run_rabi_sweep(cfg, jobs=jobs)
    write_csv(
        outdir / "rabi_sweep.csv",
        ["nbar", "eps_multiplier", "omega_rad_per_us", "tau_us", "tau_over_tau0", "fit_converged"],
        [(p.nbar, p.multiplier, p.omega, p.tau, p.tau_ratio, p.fit.converged) for p in points],
    )
    return ["rabi_sweep.csv"], {"rows": len(points)}


def _grid_rows(grid):
    for i, x in enumerate(grid.re_axis):
        for j, y in enumerate(grid.im_axis):
            yield (float(x), float(y), float(grid.values[i, j]))


def _dispatch_wigner(cfg: ExperimentConfig, outdir: Path, jobs: int) -> tuple[list[str], dict]:
    result = run_wigner_tomography(cfg, jobs=jobs)
    outputs = []
    extras = {
        "t_quarter_us": result.t_quarter,
        "t_quarter_analytic_us": result.t_quarter_analytic,
    }
    for entry in result.entries:
        for stage, grid in (("before", entry.before), ("after", entry.after)):
            name = f"wigner_{entry.label}_{stage}.csv"
            write_csv(outdir / name, ["re_alpha", "im_alpha", "w_value"], _grid_rows(grid))
            outputs.append(name)
            ys, cut = grid.cut_re_zero()
            cut_name = f"cut_{entry.label}_{stage}.csv"
            write_csv(outdir / cut_name, ["im_alpha", "w_value"], zip(ys.tolist(), cut.tolist()))
            outputs.append(cut_name)
        extras[f"parity_before_{entry.label}"] = entry.parity_before
        extras[f"parity_after_{entry.label}"] = entry.parity_after
    return outputs, extras


def _dispatch_gate(cfg: ExperimentConfig, outdir: Path, jobs: int) -> tuple[list[str], dict]:
    result = run_cardinal_gate(cfg, jobs=jobs)
    rows = []
    for p in result.points:
        rows.append(
            (
                p.label, p.theta, p.phi,
                p.before.x, p.before.y, p.before.z, p.before.leakage,
                p.after_identity.x, p.after_identity.y, p.after_identity.z,
                p.after_identity.leakage,
                p.after_gate.x, p.after_gate.y, p.after_gate.z, p.after_gate.leakage,
            )
        )
    write_csv(
        outdir / "cardinal_gate.csv",
        [
            "label", "theta_rad", "phi_rad",
            "x_before", "y_before", "z_before", "leak_before",
            "x_identity", "y_identity", "z_identity", "leak_identity",
            "x_gate", "y_gate", "z_gate", "leak_gate",
        ],
        rows,
    )
    extras = {"t_gate_us": result.t_gate, "t_gate_analytic_us": result.t_gate_analytic}
    return ["cardinal_gate.csv"], extras


def _dispatch_phaseflip(cfg: ExperimentConfig, outdir: Path, jobs: int) -> tuple[list[str], dict]:
    curves = run_phase_flip(cfg, jobs=jobs)
    header = ["time_us"] + [f"leak_nbar{_tag(c.nbar)}_nth{_tag(c.n_th)}" for c in curves]
    cols = [curves[0].times] + [c.leakage for c in curves]
    write_csv(outdir / "phase_flip.csv", header, zip(*[c.tolist() for c in cols]))
    return ["phase_flip.csv"], {"curves": len(curves)}


def _dispatch_matching(cfg: ExperimentConfig, outdir: Path, jobs: int) -> tuple[list[str], dict]:
    points = run_frequency_matching_sweep(cfg, jobs=jobs)
    from .units import angular_to_mhz

    write_csv(
        outdir / "matching.csv",
        ["amp_scale", "detuning_MHz", "vacuum_overlap"],
        [(p.amp_scale, angular_to_mhz(p.detuning), p.vacuum_overlap) for p in points],
    )
    return ["matching.csv"], {"rows": len(points)}


_RUNNERS = {
    "simulate": _dispatch_simulate,
    "sweep": _dispatch_sweep,
    "wigner": _dispatch_wigner,
    "gate": _dispatch_gate,
    "phaseflip": _dispatch_phaseflip,
    "matching": _dispatch_matching,
}

# scenario-appropriate defaults applied before user config/overrides
_SUBCOMMAND_DEFAULTS = {
    "wigner": {"nbar_list": [3.0], "drive_multipliers": [6.0]},
    "gate": {"nbar_list": [3.0], "drive_multipliers": [6.0]},
    "phaseflip": {"model": "full", "nbar_list": [2.0, 3.0, 5.0], "rtol": 1e-6, "atol": 1e-9},
    "matching": {"model": "full", "nbar_list": [2.0], "horizon_us": 4.52, "rtol": 1e-6, "atol": 1e-9},
}


def dispatch(invocation: CliInvocation) -> int:
    """Run one subcommand: parse config, execute, emit CSVs + manifest."""
    try:
        if invocation.subcommand == "validate":
            return _run_validate()
        if invocation.subcommand == "fit":
            return _run_fit(invocation)
        defaults = _SUBCOMMAND_DEFAULTS.get(invocation.subcommand, {})
        base_overrides = tuple(f"{k}={v}" for k, v in defaults.items())
        cfg, resolved = parse_config(
            invocation.config_path,
            base_overrides + tuple(invocation.overrides),
            preset=invocation.preset,
        )
        runner = _RUNNERS[invocation.subcommand]
        outdir = default_output_dir(invocation.output_dir)
        started = time.perf_counter()
        outputs, extras = runner(cfg, outdir, invocation.jobs)
        elapsed = time.perf_counter() - started
        write_manifest(
            outdir / "manifest.json",
            manifest_payload(invocation.subcommand, resolved, outputs, elapsed, extras),
        )
        click.echo(f"wrote {len(outputs)} file(s) + manifest.json to {outdir}")
        for key, value in sorted(extras.items()):
            click.echo(f"  {key} = {render(value)}")
        return EXIT_OK
    except ConfigError as exc:
        where = f" (line {exc.line}, column {exc.column})" if exc.line else ""
        click.echo(f"config error: {exc}{where}", err=True)
        return EXIT_CONFIG
    except ZenocatError as exc:
        click.echo(f"numerical error: {exc}", err=True)
        click.echo(
            "hint: loosen rtol/atol, reduce dimensions, or soften envelopes", err=True
        )
        return EXIT_NUMERICAL


def _run_validate() -> int:
    results = run_validation_suite()
    failed = 0
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        click.echo(f"[{status}] {name}: {detail}")
        failed += 0 if passed else 1
    click.echo(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


def _run_fit(invocation: CliInvocation) -> int:
    path = (invocation.extra or {}).get("input")
    if not path:
        click.echo("fit: an input CSV is required", err=True)
        return EXIT_CONFIG
    try:
        rows = np.genfromtxt(path, delimiter=",", names=True)
    except OSError:
        click.echo(f"fit: cannot read {path}", err=True)
        return EXIT_CONFIG
    names = rows.dtype.names
    if names is None or len(names) < 2 or names[0] != "time_us":
        click.echo("fit: expected columns time_us,<signal>", err=True)
        return EXIT_CONFIG
    times = np.asarray(rows[names[0]], dtype=float)
    values = np.asarray(rows[names[1]], dtype=float)
    try:
        fit = fit_decaying_cosine(times, values)
    except ZenocatError as exc:
        click.echo(f"numerical error: {exc}", err=True)
        return EXIT_NUMERICAL
    for key in ("omega", "tau", "amplitude", "offset", "phase", "residual_rms"):
        click.echo(f"{key} = {render(getattr(fit, key))}")
    click.echo(f"converged = {render(fit.converged)}")
    outdir = default_output_dir(invocation.output_dir)
    write_manifest(
        outdir / "fit.json",
        {
            "input": str(path),
            "omega_rad_per_us": fit.omega,
            "tau_us": fit.tau,
            "amplitude": fit.amplitude,
            "offset": fit.offset,
            "phase_rad": fit.phase,
            "residual_rms": fit.residual_rms,
            "converged": fit.converged,
        },
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------

def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="YAML config file (or a manifest from a previous run).")(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="Override a config key (repeatable).")(fn)
    fn = click.option("--output-dir", default=None,
                      help="Output directory (default: $ZENOCAT_OUTPUT_DIR or ./zenocat-output).")(fn)
    fn = click.option("--jobs", default=1, show_default=True,
                      help="Concurrent sweep workers.")(fn)
    fn = click.option("--preset", default="paper-device", show_default=True,
                      help="Named device preset supplying defaults.")(fn)
    return fn


@click.group()
def main():
    """Simulate dissipatively stabilized cat qubits and their Zeno gates."""


def _make_command(name, help_text):
    @main.command(name=name, help=help_text)
    @_common_options
    def _cmd(config_path, overrides, output_dir, jobs, preset):
        inv = CliInvocation(name, config_path, tuple(overrides), output_dir, jobs, preset)
        sys.exit(dispatch(inv))

    return _cmd


_make_command("simulate", "Parity-versus-time runs per (nbar, drive multiplier).")
_make_command("sweep", "Rabi sweep: fitted Omega and tau per (nbar, multiplier).")
_make_command("wigner", "Wigner tomography before/after a quarter oscillation.")
_make_command("gate", "Cardinal-point tomography of the pi/2 rotation.")
_make_command("phaseflip", "Thermal phase-flip leakage curves (full model).")
_make_command("matching", "Frequency-matching map: vacuum overlap vs (amp, detuning).")


@main.command(name="fit", help="Fit a decaying cosine to a CSV produced by simulate.")
@click.option("--input", "input_path", type=click.Path(), required=True)
@click.option("--output-dir", default=None)
def _fit_cmd(input_path, output_dir):
    inv = CliInvocation("fit", None, (), output_dir, 1, "paper-device",
                        extra={"input": input_path})
    sys.exit(dispatch(inv))


@main.command(name="validate", help="Run the oracle-equivalence and invariant suite.")
def _validate_cmd():
    sys.exit(dispatch(CliInvocation("validate", None, (), None, 1, "paper-device")))


if __name__ == "__main__":
    main()
