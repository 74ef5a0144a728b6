"""Command-line front end.

Subcommands cover the full workflow: single simulations, payoff-matrix
estimation, equilibrium solving, forced-deviation analysis, and
parameter sweeps. Every command writes delimited results plus rendered
figures into its output directory, and finishes with a run manifest
listing the artifacts. Exit codes: 0 success, 2 usage/validation
errors, 3 numerical non-convergence.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import click
import numpy as np

from . import __version__
from .core import (
    SimulationConfig,
    config_digest,
    default_source_opinions,
    substream,
)
from .dynamics import simulate
from .game import (
    SolverParams,
    antisymmetry_report,
    deviation_experiment,
    entropy,
    estimate_payoff_matrix,
    qre_solve,
)
from .metrics import build_metric_report
from .strategies import (
    CredibilityCurveRecord,
    StrategyProfile,
    load_credibility_curve,
    load_profile_file,
    profile_library,
)
from .sweep import DEFAULT_AXES, SweepSpec, run_sweep

__all__ = ["main"]


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

#: Keys a config file may carry beyond the simulation shape itself.
_RUN_KEYS = ("n_rollouts", "n_replications")


def _fmt(value) -> str:
    """Stable text form for CSV cells (floats keep full precision)."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])
    return path


def _write_json(path: Path, payload: dict) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


@dataclass
class _Run:
    """Collects artifacts for one command and writes the manifest last."""

    command: str
    out_dir: Path
    config_record: dict
    root_seed: Optional[int]
    started: float = field(default_factory=time.perf_counter)
    artifacts: list = field(default_factory=list)

    def add(self, path: Path) -> Path:
        self.artifacts.append(path)
        return path

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "config": self.config_record,
            "root_seed": self.root_seed,
            "artifacts": [p.relative_to(self.out_dir).as_posix() for p in self.artifacts],
            "duration_seconds": time.perf_counter() - self.started,
            "version": __version__,
        }
        missing = [p.name for p in self.artifacts if not p.exists()]
        if missing:  # pragma: no cover - artifacts are written just above
            raise RuntimeError(f"artifacts missing at manifest time: {missing}")
        return _write_json(self.out_dir / "manifest.json", manifest)


def _out_dir(raw: str) -> Path:
    path = Path(raw)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(config_path: Optional[str], seed: Optional[int]) -> tuple[SimulationConfig, dict]:
    """Config plus the CLI-level run sizes riding along in the same file."""
    run: dict = {}
    if config_path is None:
        cfg = SimulationConfig()
    else:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"config {config_path} is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise click.UsageError(f"config {config_path} must be a JSON object")
        for key in _RUN_KEYS:
            if key in raw:
                run[key] = int(raw.pop(key))
        try:
            cfg = SimulationConfig.from_dict(raw)
        except (TypeError, ValueError) as exc:
            raise click.UsageError(f"invalid config {config_path}: {exc}")
    if seed is not None:
        cfg = SimulationConfig.from_dict({**cfg.to_dict(), "seed": seed})
    return cfg, run


def _library_by_name() -> dict[str, StrategyProfile]:
    return {p.name: p for p in profile_library()}


def _resolve_profile_set(spec: Optional[str]) -> list[StrategyProfile]:
    """Profile list from a JSON file path or comma-separated library names."""
    if spec is None:
        return profile_library()
    if Path(spec).is_file():
        try:
            return list(load_profile_file(spec).values())
        except (ValueError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"invalid profile file {spec}: {exc}")
    lib = _library_by_name()
    chosen = []
    for name in (token.strip() for token in spec.split(",")):
        if name not in lib:
            raise click.UsageError(
                f"unknown profile {name!r}; valid names: {', '.join(lib)}"
            )
        chosen.append(lib[name])
    if not chosen:
        raise click.UsageError("no profiles given")
    return chosen


def _profile_pair(spec: str) -> tuple[StrategyProfile, StrategyProfile]:
    chosen = _resolve_profile_set(spec)
    if len(chosen) == 1:
        return chosen[0], chosen[0]
    if len(chosen) == 2:
        return chosen[0], chosen[1]
    raise click.UsageError("simulate takes one or two profiles (L,R)")


def _read_curve_csv(path: str) -> list[CredibilityCurveRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"bias", "credibility"} <= set(reader.fieldnames):
            raise click.UsageError(f"curve CSV {path} needs 'bias' and 'credibility' columns")
        for row in reader:
            records.append(
                CredibilityCurveRecord(bias=float(row["bias"]), credibility=float(row["credibility"]))
            )
    return records


def _solver_from_flags(tau_l: float, tau_r: float) -> SolverParams:
    if tau_l <= 0 or tau_r <= 0:
        raise click.UsageError("--tau-l and --tau-r must be positive")
    return SolverParams(tau_L=tau_l, tau_R=tau_r)


def _nonconvergence(residual: float, iterations: int) -> None:
    click.echo(
        f"solver did not converge: residual {residual:.3e} after {iterations} iterations",
        err=True,
    )
    sys.exit(3)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
@click.version_option(version=__version__, prog_name="misinfosim")
def main() -> None:
    """Opinion dynamics under competing news sources: simulation and equilibria."""


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON simulation config.")
@click.option("--seed", type=int, default=None, help="Override the config root seed.")
@click.option("--profiles", default="P1,P1", show_default=True, help="L,R profile names or a profile JSON file.")
@click.option("--curve-csv", type=click.Path(exists=True, dir_okay=False), default=None, help="bias/credibility curve CSV; overrides --profiles.")
@click.option("--out", "out_raw", default="out-simulate", show_default=True, help="Output directory.")
def cmd_simulate(config_path, seed, profiles, curve_csv, out_raw) -> None:
    """Roll out one trajectory and write its history, metrics, and figures."""
    cfg, _ = _load_config(config_path, seed)
    y = default_source_opinions(cfg.n_sources, cfg.params.x_min, cfg.params.x_max)
    if curve_csv is not None:
        try:
            policy_l, policy_r = load_credibility_curve(_read_curve_csv(curve_csv), y)
        except ValueError as exc:
            raise click.UsageError(f"invalid curve CSV {curve_csv}: {exc}")
    else:
        policy_l, policy_r = _profile_pair(profiles)
    half = cfg.n_sources // 2
    for policy in (policy_l, policy_r):
        if len(policy.factual_prob) != half:
            raise click.UsageError(
                f"profile {policy.name!r} covers {len(policy.factual_prob)} sources, need {half}"
            )

    out = _out_dir(out_raw)
    run = _Run("simulate", out, cfg.to_dict(), cfg.seed)
    traj = simulate(cfg, policy_l, policy_r, substream(cfg.seed, "simulate"))

    rows = []
    for t in range(traj.horizon + 1):
        for i in range(traj.n):
            rows.append((t, "individual", i, traj.opinion_history[t, i], traj.susceptibilities[i], None, None))
        for m in range(traj.m):
            action = traj.action_history[t, m] if t < traj.horizon else None
            rows.append((t, "source", m, y[m], None, traj.credibility_history[t, m], action))
    run.add(_write_csv(out / "trajectory.csv", ("t", "series", "index", "opinion", "susceptibility", "credibility", "action"), rows))

    edges = np.linspace(cfg.params.x_min, cfg.params.x_max, cfg.n_bins_l + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    hist_rows = []
    for t in range(traj.horizon + 1):
        density, _ = np.histogram(traj.opinion_history[t], bins=edges, density=True)
        for center, dens in zip(centers, density):
            hist_rows.append((t, center, dens))
    run.add(_write_csv(out / "histogram_over_time.csv", ("t", "bin_center", "density"), hist_rows))

    report = build_metric_report(traj, cfg.params)
    record = report.to_dict()
    record.update(
        {
            "profile_L": policy_l.name,
            "profile_R": policy_r.name,
            "config_digest": config_digest(cfg),
        }
    )
    run.add(_write_json(out / "metrics.json", record))

    from . import report as figures

    run.add(Path(figures.render_opinion_heatmap(
        traj.opinion_history,
        str(out / "opinion_heatmap.png"),
        n_bins=cfg.n_bins_l,
        x_min=cfg.params.x_min,
        x_max=cfg.params.x_max,
        source_opinions=y,
    )))
    run.finish()
    click.echo(f"simulate: bimodality {report.bimodality:.4f}, mean exposure {report.mean_exposure:.4f} -> {out}")


@main.command("payoff")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON simulation config (may carry n_rollouts).")
@click.option("--seed", type=int, default=None, help="Override the config root seed.")
@click.option("--profiles", default=None, help="Profile JSON file or comma-separated library names (default: full library).")
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel worker processes.")
@click.option("--out", "out_raw", default="out-payoff", show_default=True, help="Output directory.")
def cmd_payoff(config_path, seed, profiles, workers, out_raw) -> None:
    """Estimate the profile-vs-profile payoff matrix by Monte Carlo."""
    cfg, run_sizes = _load_config(config_path, seed)
    if workers < 1:
        raise click.UsageError("--workers must be >= 1")
    prof = _resolve_profile_set(profiles)
    n_rollouts = run_sizes.get("n_rollouts", 200)

    out = _out_dir(out_raw)
    run = _Run("payoff", out, cfg.to_dict(), cfg.seed)
    try:
        payoff = estimate_payoff_matrix(prof, prof, cfg, n_rollouts=n_rollouts, n_workers=workers)
    except ValueError as exc:
        raise click.UsageError(str(exc))

    names = [p.name for p in prof]
    head = ["profile", *names]
    run.add(_write_csv(out / "payoff_values.csv", head, ((name, *row) for name, row in zip(names, payoff.values))))
    run.add(_write_csv(out / "payoff_std_errors.csv", head, ((name, *row) for name, row in zip(names, payoff.std_errors))))

    try:
        mirror_check = antisymmetry_report(payoff, prof)
    except ValueError:
        mirror_check = None
    metadata = {
        "profiles": {p.name: np.asarray(p.factual_prob).tolist() for p in prof},
        "n_rollouts": payoff.n_rollouts,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "config_digest": config_digest(cfg),
        "antisymmetry": mirror_check,
        "version": __version__,
    }
    run.add(_write_json(out / "payoff_metadata.json", metadata))

    from . import report as figures

    run.add(Path(figures.render_payoff_heatmap(payoff.values, str(out / "payoff_heatmap.png"), labels=names)))
    run.finish()
    click.echo(f"payoff: {len(prof)}x{len(prof)} matrix, {n_rollouts} rollouts/entry -> {out}")


def _read_payoff_dir(source: str) -> tuple[np.ndarray, list[str]]:
    """Payoff values and profile names from a payoff directory or values CSV."""
    path = Path(source)
    if path.is_dir():
        path = path / "payoff_values.csv"
    if not path.is_file():
        raise click.UsageError(f"no payoff values CSV at {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "profile":
            raise click.UsageError(f"{path} is not a payoff values CSV")
        names = []
        values = []
        for row in reader:
            names.append(row[0])
            values.append([float(cell) for cell in row[1:]])
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[1] != len(header) - 1:
        raise click.UsageError(f"{path} does not hold a square matrix")
    return matrix, names


@main.command("solve")
@click.argument("payoff_path", type=click.Path(exists=True))
@click.option("--tau-l", type=float, default=10.0, show_default=True, help="Row-player rationality.")
@click.option("--tau-r", type=float, default=10.0, show_default=True, help="Column-player rationality.")
@click.option("--force", is_flag=True, help="Overwrite an existing equilibrium record.")
@click.option("--out", "out_raw", default="out-solve", show_default=True, help="Output directory.")
def cmd_solve(payoff_path, tau_l, tau_r, force, out_raw) -> None:
    """Solve the entropy-regularized equilibrium of an estimated matrix."""
    matrix, names = _read_payoff_dir(payoff_path)
    solver = _solver_from_flags(tau_l, tau_r)
    out = _out_dir(out_raw)
    target = out / "equilibrium.json"
    if target.exists() and not force:
        raise click.UsageError(f"{target} exists; pass --force to overwrite")

    run = _Run("solve", out, {"payoff": str(payoff_path), "tau_L": tau_l, "tau_R": tau_r}, None)
    eq = qre_solve(matrix, solver)
    if not eq.converged:
        _nonconvergence(eq.residual, eq.iterations)

    record = {
        "profiles": names,
        "tau_L": tau_l,
        "tau_R": tau_r,
        "mu": eq.mu.tolist(),
        "nu": eq.nu.tolist(),
        "value": eq.value,
        "residual": eq.residual,
        "iterations": eq.iterations,
        "entropy_mu": entropy(eq.mu),
        "entropy_nu": entropy(eq.nu),
    }
    run.add(_write_json(target, record))

    from . import report as figures

    run.add(Path(figures.render_equilibrium_bars(
        eq.mu,
        eq.nu,
        str(out / "equilibrium_bars.png"),
        labels=names,
        title=f"Equilibrium at tau_L={tau_l:g}, tau_R={tau_r:g}",
    )))
    run.finish()
    click.echo(f"solve: value {eq.value:.4f}, residual {eq.residual:.2e} -> {out}")


@main.command("deviate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON simulation config (may carry n_rollouts/n_replications).")
@click.option("--seed", type=int, default=None, help="Override the config root seed.")
@click.option("--profiles", "forced", default="P5", show_default=True, help="Library profile L is forced to play.")
@click.option("--tau-l", type=float, default=10.0, show_default=True)
@click.option("--tau-r", type=float, default=10.0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel worker processes for the payoff matrix.")
@click.option("--out", "out_raw", default="out-deviate", show_default=True, help="Output directory.")
def cmd_deviate(config_path, seed, forced, tau_l, tau_r, workers, out_raw) -> None:
    """Force L to one profile, let R respond softly-optimally, simulate."""
    cfg, run_sizes = _load_config(config_path, seed)
    if workers < 1:
        raise click.UsageError("--workers must be >= 1")
    lib = profile_library()
    names = [p.name for p in lib]
    if forced not in names:
        raise click.UsageError(f"unknown profile {forced!r}; valid names: {', '.join(names)}")
    solver = _solver_from_flags(tau_l, tau_r)

    out = _out_dir(out_raw)
    run = _Run("deviate", out, cfg.to_dict(), cfg.seed)
    report = deviation_experiment(
        cfg,
        lib,
        solver,
        names.index(forced),
        n_rollouts=run_sizes.get("n_rollouts", 200),
        n_replications=run_sizes.get("n_replications", 20),
        n_workers=workers,
    )

    record = report.to_dict()
    samples = record.pop("replications", [])
    record.update({"profiles": names, "forced_name": forced, "config_digest": config_digest(cfg)})
    run.add(_write_json(out / "deviation_report.json", record))

    sample_rows = []
    for sample in samples:
        for i, x in enumerate(sample["final_opinions"]):
            sample_rows.append((sample["replication"], names[sample["response_profile"]], i, x))
    run.add(_write_csv(
        out / "deviation_samples.csv",
        ("replication", "response_profile", "individual", "final_opinion"),
        sample_rows,
    ))

    from . import report as figures

    run.add(Path(figures.render_deviation_response(
        report.response,
        report.equilibrium_nu,
        str(out / "deviation_response.png"),
        labels=names,
    )))
    run.finish()
    click.echo(
        "deviate: response mean factual "
        f"{report.response_mean_factual:.4f} vs equilibrium {report.equilibrium_response_mean_factual:.4f} -> {out}"
    )


@main.command("sweep")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the base config root seed.")
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel worker processes per cell payoff.")
@click.option("--out", "out_raw", default="out-sweep", show_default=True, help="Output directory.")
def cmd_sweep(spec_path, seed, workers, out_raw) -> None:
    """Run a 1- or 2-axis parameter sweep from a JSON sweep spec."""
    if workers < 1:
        raise click.UsageError("--workers must be >= 1")
    try:
        with open(spec_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"sweep spec {spec_path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise click.UsageError(f"sweep spec {spec_path} must be a JSON object")

    axes = raw.get("axes", "eta_xi")
    if isinstance(axes, str):
        if axes not in DEFAULT_AXES:
            raise click.UsageError(f"unknown axes name {axes!r}; choose from {', '.join(DEFAULT_AXES)}")
        axes = DEFAULT_AXES[axes]
    config_record = dict(raw.get("config", {}))
    for key in _RUN_KEYS:
        config_record.pop(key, None)
    try:
        base = SimulationConfig.from_dict(config_record)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"invalid sweep base config: {exc}")
    if seed is not None:
        base = SimulationConfig.from_dict({**base.to_dict(), "seed": seed})
    solver_record = raw.get("solver", {})
    try:
        solver = SolverParams(**solver_record)
    except TypeError as exc:
        raise click.UsageError(f"invalid solver record: {exc}")
    try:
        spec = SweepSpec(
            axes=axes,
            base_config=base,
            solver=solver,
            payoff_rollouts=int(raw.get("payoff_rollouts", 200)),
            replications=int(raw.get("replications", 20)),
        )
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"invalid sweep spec: {exc}")

    out = _out_dir(out_raw)
    run = _Run("sweep", out, {"spec": raw, "config": base.to_dict()}, base.seed)
    results = run_sweep(spec, n_workers=workers)

    axis_names = [name for name, _ in spec.axes]
    header = (
        "cell",
        *axis_names,
        "value",
        "residual",
        "bimodality",
        "bimodality_se",
        "mean_exposure",
        "mean_exposure_se",
        "phase",
        "low_confidence",
        "error",
    )
    rows = []
    flat = []
    for idx, cell in enumerate(results):
        coords = [cell.params[name] for name in axis_names]
        rows.append(
            (
                idx,
                *coords,
                cell.value,
                cell.residual,
                cell.bimodality,
                cell.bimodality_se,
                cell.mean_exposure,
                cell.mean_exposure_se,
                cell.phase,
                cell.low_confidence,
                cell.error,
            )
        )
        flat.append(
            {
                **{name: cell.params[name] for name in axis_names},
                "bimodality": cell.bimodality,
                "mean_exposure": cell.mean_exposure,
                "phase": cell.phase,
                "error": cell.error,
            }
        )
    run.add(_write_csv(out / "sweep_results.csv", header, rows))

    cell_dir = out / "cells"
    cell_dir.mkdir(exist_ok=True)
    for idx, cell in enumerate(results):
        run.add(_write_json(cell_dir / f"cell_{idx:03d}.json", cell.to_dict()))

    from . import report as figures

    for fig_path in figures.render_sweep_figures(flat, axis_names, str(out / "sweep_")):
        run.add(Path(fig_path))
    run.finish()

    failures = [(idx, cell.error) for idx, cell in enumerate(results) if cell.error]
    if failures:
        click.echo(f"sweep: {len(failures)}/{len(results)} cells failed:", err=True)
        for idx, err in failures:
            click.echo(f"  cell {idx}: {err}", err=True)
    if len(failures) == len(results):
        click.echo("sweep: every cell failed", err=True)
        sys.exit(3)
    click.echo(f"sweep: {len(results) - len(failures)}/{len(results)} cells ok -> {out}")


if __name__ == "__main__":  # pragma: no cover
    main()
