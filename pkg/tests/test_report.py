"""Figure rendering writes real image files for every layout."""

import numpy as np

from misinfosim import report


def test_opinion_heatmap_written(tmp_path):
    rng = np.random.default_rng(0)
    history = rng.uniform(-1, 1, (12, 30))
    path = report.render_opinion_heatmap(
        history,
        str(tmp_path / "heat.png"),
        n_bins=10,
        source_opinions=np.array([-0.5, 0.5]),
    )
    target = tmp_path / "heat.png"
    assert str(target) == path
    assert target.stat().st_size > 1000
    assert target.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_two_axis_sweep_heatmaps(tmp_path):
    rows = [
        {
            "eta": e,
            "xi": x,
            "bimodality": 0.1 * (e + x),
            "mean_exposure": 0.05 * (e + 2 * x),
            "phase": "phase-1" if e >= x else "phase-2",
            "error": None,
        }
        for e in (0.0, 1.0)
        for x in (0.0, 2.0)
    ]
    paths = report.render_sweep_figures(rows, ["eta", "xi"], str(tmp_path / "sweep_"))
    assert paths == [
        str(tmp_path / "sweep_bimodality.png"),
        str(tmp_path / "sweep_mean_exposure.png"),
    ]
    for p in paths:
        assert (tmp_path / p).stat().st_size > 1000


def test_failed_cells_are_skipped(tmp_path):
    rows = [
        {"eta": 0.0, "bimodality": 0.4, "mean_exposure": 0.1, "phase": "phase-1", "error": None},
        {"eta": 1.0, "bimodality": float("nan"), "mean_exposure": float("nan"),
         "phase": "", "error": "ValueError: boom"},
    ]
    paths = report.render_sweep_figures(rows, ["eta"], str(tmp_path / "sweep_"))
    assert paths == [str(tmp_path / "sweep_metrics.png")]


def test_all_cells_failed_renders_nothing(tmp_path):
    rows = [{"eta": 0.0, "bimodality": 0.0, "mean_exposure": 0.0, "phase": "", "error": "x"}]
    assert report.render_sweep_figures(rows, ["eta"], str(tmp_path / "sweep_")) == []
