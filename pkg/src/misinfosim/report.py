"""Figure rendering for CLI outputs.

This is the only module that touches matplotlib; the library proper
stays plot-free, and the CLI imports this lazily so that headless
environments without a display still work (the Agg backend renders
straight to files).
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "render_opinion_heatmap",
    "render_payoff_heatmap",
    "render_equilibrium_bars",
    "render_deviation_response",
    "render_sweep_figures",
]

_DPI = 150


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_opinion_heatmap(
    opinion_history: np.ndarray,
    path: str,
    n_bins: int = 20,
    x_min: float = -1.0,
    x_max: float = 1.0,
    source_opinions: Optional[np.ndarray] = None,
) -> str:
    """Opinion density over time as a (bin, step) heatmap.

    Rows of opinion_history are time steps; each column of the image is
    the opinion histogram at that step. Source positions, when given,
    are overlaid as horizontal dashed lines.
    """
    history = np.asarray(opinion_history, dtype=float)
    edges = np.linspace(x_min, x_max, n_bins + 1)
    density = np.stack(
        [np.histogram(row, bins=edges, density=True)[0] for row in history],
        axis=1,
    )
    fig, ax = plt.subplots(figsize=(8, 4.5))
    image = ax.imshow(
        density,
        origin="lower",
        aspect="auto",
        extent=(0, history.shape[0] - 1, x_min, x_max),
        cmap="viridis",
    )
    if source_opinions is not None:
        for y in np.asarray(source_opinions, dtype=float):
            ax.axhline(y, color="white", linestyle="--", linewidth=0.6, alpha=0.5)
    ax.set_xlabel("step")
    ax.set_ylabel("opinion")
    ax.set_title("Opinion distribution over time")
    fig.colorbar(image, ax=ax, label="density")
    return _save(fig, path)


def render_payoff_heatmap(
    values: np.ndarray,
    path: str,
    labels: Optional[Sequence[str]] = None,
) -> str:
    """Estimated payoff to the row coalition, diverging color scale."""
    values = np.asarray(values, dtype=float)
    limit = float(np.max(np.abs(values))) or 1.0
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    image = ax.imshow(values, cmap="RdBu_r", vmin=-limit, vmax=limit)
    if labels is not None:
        ax.set_xticks(range(len(labels)), labels=list(labels), rotation=45, ha="right")
        ax.set_yticks(range(len(labels)), labels=list(labels))
    ax.set_xlabel("R profile")
    ax.set_ylabel("L profile")
    ax.set_title("Estimated payoff to L")
    fig.colorbar(image, ax=ax, label="payoff")
    return _save(fig, path)


def render_equilibrium_bars(
    mu: np.ndarray,
    nu: np.ndarray,
    path: str,
    labels: Optional[Sequence[str]] = None,
    title: str = "Equilibrium strategy profiles",
) -> str:
    """Side-by-side bar charts of the two equilibrium mixtures."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    ticks = list(labels) if labels is not None else [str(i) for i in range(mu.size)]
    fig, (ax_l, ax_r) = plt.subplots(1, 2, figsize=(9, 3.8), sharey=True)
    ax_l.bar(range(mu.size), mu, color="tab:blue")
    ax_l.set_title("L mixture")
    ax_r.bar(range(nu.size), nu, color="tab:red")
    ax_r.set_title("R mixture")
    for ax in (ax_l, ax_r):
        ax.set_xticks(range(len(ticks)), labels=ticks, rotation=45, ha="right")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("probability")
    fig.suptitle(title)
    return _save(fig, path)


def render_deviation_response(
    response: np.ndarray,
    equilibrium_nu: np.ndarray,
    path: str,
    labels: Optional[Sequence[str]] = None,
) -> str:
    """R's response to the forced L profile next to R's equilibrium mix."""
    response = np.asarray(response, dtype=float)
    equilibrium_nu = np.asarray(equilibrium_nu, dtype=float)
    ticks = list(labels) if labels is not None else [str(i) for i in range(response.size)]
    positions = np.arange(response.size)
    width = 0.4
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(positions - width / 2, response, width, label="response to forced L", color="tab:red")
    ax.bar(positions + width / 2, equilibrium_nu, width, label="equilibrium", color="tab:gray")
    ax.set_xticks(positions, labels=ticks, rotation=45, ha="right")
    ax.set_ylabel("probability")
    ax.set_title("R mixture: forced-deviation response vs equilibrium")
    ax.legend()
    return _save(fig, path)


def _pivot(rows: Sequence[dict], x_name: str, y_name: str, field: str) -> tuple[np.ndarray, list, list]:
    xs = sorted({row[x_name] for row in rows})
    ys = sorted({row[y_name] for row in rows})
    grid = np.full((len(ys), len(xs)), np.nan)
    for row in rows:
        grid[ys.index(row[y_name]), xs.index(row[x_name])] = row[field]
    return grid, xs, ys


def render_sweep_figures(
    rows: Sequence[dict],
    axis_names: Sequence[str],
    out_prefix: str,
) -> list[str]:
    """Heatmaps (two axes) or line plots (one axis) of sweep outcomes.

    Each row is a flat record holding the axis coordinates plus the cell
    outcomes (bimodality, mean_exposure, phase). Returns the list of
    written figure paths; sweeps over three or more axes are left to
    downstream tools and produce no figures.
    """
    axis_names = list(axis_names)
    rows = [row for row in rows if not row.get("error")]
    if not rows:
        return []
    paths: list[str] = []
    if len(axis_names) == 2:
        x_name, y_name = axis_names[1], axis_names[0]
        for field, cmap, label in (
            ("bimodality", "magma", "bimodality"),
            ("mean_exposure", "cividis", "mean misinformation exposure"),
        ):
            grid, xs, ys = _pivot(rows, x_name, y_name, field)
            phase, _, _ = _pivot(
                [dict(row, phase_num=1.0 if row.get("phase") == "phase-1" else 2.0) for row in rows],
                x_name,
                y_name,
                "phase_num",
            )
            fig, ax = plt.subplots(figsize=(6.5, 5.2))
            image = ax.imshow(grid, origin="lower", cmap=cmap, aspect="auto")
            for yi in range(len(ys)):
                for xi in range(len(xs)):
                    if np.isfinite(phase[yi, xi]):
                        ax.text(
                            xi,
                            yi,
                            f"{int(phase[yi, xi])}",
                            ha="center",
                            va="center",
                            color="white",
                            fontsize=8,
                        )
            ax.set_xticks(range(len(xs)), labels=[f"{v:g}" for v in xs])
            ax.set_yticks(range(len(ys)), labels=[f"{v:g}" for v in ys])
            ax.set_xlabel(x_name)
            ax.set_ylabel(y_name)
            ax.set_title(f"{label} (cell text = phase label)")
            fig.colorbar(image, ax=ax, label=label)
            target = f"{out_prefix}{field}.png"
            paths.append(_save(fig, target))
    elif len(axis_names) == 1:
        name = axis_names[0]
        ordered = sorted(rows, key=lambda row: row[name])
        xs = [row[name] for row in ordered]
        fig, (ax_b, ax_g) = plt.subplots(1, 2, figsize=(9, 3.8))
        ax_b.plot(xs, [row["bimodality"] for row in ordered], marker="o")
        ax_b.set_xlabel(name)
        ax_b.set_ylabel("bimodality")
        ax_g.plot(xs, [row["mean_exposure"] for row in ordered], marker="o", color="tab:orange")
        ax_g.set_xlabel(name)
        ax_g.set_ylabel("mean misinformation exposure")
        if all(x > 0 for x in xs) and max(xs) / min(xs) > 30:
            ax_b.set_xscale("log")
            ax_g.set_xscale("log")
        fig.suptitle("Sweep outcomes")
        target = f"{out_prefix}metrics.png"
        paths.append(_save(fig, target))
    return paths
