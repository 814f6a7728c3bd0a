"""Render simulation output files into the experiment figures.

Consumes only the persisted CSV/JSON contract of the simulation CLI:
  <base>.trajectory.csv   sample_index, w_0..w_k, error, output,
                          power_estimate, mu1, branch
  <base>.boundary.csv     w_0, w_1 points of the constraint ellipse
  <base>.psd.csv          frequency_hz, disturbance_db, <algo>_db ...
  <base>.comparison.json  predictions with the optimal / constrained
                          weight points
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("psd-comparison", "weight-path", "weight-trace")

ALGO_LABELS = {
    "fxlms": "FXLMS",
    "rescaling": "Rescaling",
    "2gd": "2GD",
    "2gd-momentum-vss": "2GD-Momentum",
}

ALGO_COLORS = {
    "fxlms": "tab:green",
    "rescaling": "tab:orange",
    "2gd": "tab:purple",
    "2gd-momentum-vss": "tab:blue",
}

BOUNDARY_COLORS = ("red", "blue", "green")


class SchemaError(ValueError):
    """An input file does not match the expected column schema."""


@dataclass
class FigureSpec:
    kind: str
    output: str
    title: str = ""
    trajectories: dict = field(default_factory=dict)   # label -> csv path
    boundaries: list = field(default_factory=list)     # csv paths
    markers: dict = field(default_factory=dict)        # label -> (w0, w1)
    psd: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {KINDS}")


@dataclass
class RenderResult:
    png: Path
    svg: Path
    figure: object


def load_spec(path) -> FigureSpec:
    data = json.loads(Path(path).read_text())
    return FigureSpec(**data)


def _read_csv(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file does not exist: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty (no header row)") from None
        rows = list(reader)
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        values = [row[j] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in values])
        except ValueError:
            columns[name] = np.array(values)
    return columns


def _require(columns: dict, names, path) -> None:
    for name in names:
        if name not in columns:
            raise SchemaError(f"{path} is missing column {name!r}")


def _style() -> None:
    plt.rcParams.update({
        "font.size": 10,
        "axes.labelsize": 10,
        "legend.fontsize": 8,
        "xtick.labelsize": 8,
        "ytick.labelsize": 8,
        "figure.figsize": (6.0, 4.0),
        "svg.hashsalt": "ancfig",
    })


def render(spec: FigureSpec) -> RenderResult:
    """Render one figure; writes PNG and SVG next to spec.output."""
    _style()
    if spec.kind == "psd-comparison":
        fig = _render_psd(spec)
    elif spec.kind == "weight-path":
        fig = _render_weight_path(spec)
    else:
        fig = _render_weight_trace(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    png = out.with_suffix(".png")
    svg = out.with_suffix(".svg")
    fig.savefig(png, dpi=150)
    fig.savefig(svg, metadata={"Date": None})
    return RenderResult(png=png, svg=svg, figure=fig)


def _render_psd(spec: FigureSpec):
    if not spec.psd:
        raise SchemaError("psd-comparison needs a 'psd' input file")
    cols = _read_csv(spec.psd)
    _require(cols, ["frequency_hz", "disturbance_db"], spec.psd)
    fig, ax = plt.subplots()
    freqs = cols["frequency_hz"]
    ax.plot(freqs, cols["disturbance_db"], color="black", lw=1.2,
            label="Disturbance")
    for name, values in cols.items():
        if name in ("frequency_hz", "disturbance_db"):
            continue
        algo = name[:-3] if name.endswith("_db") else name
        ax.plot(freqs, values, lw=0.9,
                color=ALGO_COLORS.get(algo),
                label=ALGO_LABELS.get(algo, algo))
    ax.set_xlabel("Frequency (Hz)")
    ax.set_ylabel("Power spectral density (dB/Hz)")
    ax.set_xlim(0, float(np.max(freqs)))
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="upper right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def _trajectory_weights(path):
    cols = _read_csv(path)
    _require(cols, ["sample_index", "w_0", "w_1"], path)
    return cols


def _render_weight_path(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    for label, path in spec.trajectories.items():
        cols = _trajectory_weights(path)
        ax.plot(cols["w_0"], cols["w_1"], lw=0.9,
                color=ALGO_COLORS.get(label),
                label=ALGO_LABELS.get(label, label))
    for k, boundary in enumerate(spec.boundaries):
        cols = _read_csv(boundary)
        _require(cols, ["w_0", "w_1"], boundary)
        w0 = np.append(cols["w_0"], cols["w_0"][:1])
        w1 = np.append(cols["w_1"], cols["w_1"][:1])
        ax.plot(w0, w1, linestyle="--", lw=1.1,
                color=BOUNDARY_COLORS[k % len(BOUNDARY_COLORS)],
                label=f"bound {k + 1}" if len(spec.boundaries) > 1 else "bound")
    marker_styles = {"optimal": ("*", 160), "sub-optimal": ("X", 90)}
    for name, point in spec.markers.items():
        base = name.split(" ")[0]
        style, size = marker_styles.get(base, ("o", 60))
        ax.scatter([point[0]], [point[1]], marker=style, s=size,
                   color="black", zorder=5)
        ax.annotate(name, point, textcoords="offset points",
                    xytext=(6, 4), fontsize=8)
    ax.set_xlabel("$w_0$")
    ax.set_ylabel("$w_1$")
    if spec.title:
        ax.set_title(spec.title)
    if spec.trajectories or spec.boundaries:
        ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def _render_weight_trace(spec: FigureSpec):
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.0, 4.6))
    for label, path in spec.trajectories.items():
        cols = _trajectory_weights(path)
        for k, ax in enumerate(axes):
            ax.plot(cols["sample_index"], cols[f"w_{k}"], lw=0.9,
                    color=ALGO_COLORS.get(label),
                    label=ALGO_LABELS.get(label, label))
    for k, ax in enumerate(axes):
        ax.set_ylabel(f"$w_{k}$")
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("Sample")
    axes[0].legend(loc="best")
    if spec.title:
        axes[0].set_title(spec.title)
    fig.tight_layout()
    return fig


# ---------------------------------------------------------------------------
# preset figure sets built from a simulation output directory

def _comparison_markers(comparison_path) -> dict:
    markers = {}
    data = json.loads(Path(comparison_path).read_text())
    pred = data.get("predictions", {})
    if pred.get("w_opt"):
        markers["optimal"] = tuple(pred["w_opt"][:2])
    if pred.get("w_subopt_derived"):
        markers["sub-optimal"] = tuple(pred["w_subopt_derived"][:2])
    phase2 = pred.get("phase2") or {}
    if phase2.get("w_opt"):
        markers["optimal (changed)"] = tuple(phase2["w_opt"][:2])
    if phase2.get("w_subopt_derived"):
        markers["sub-optimal (changed)"] = tuple(phase2["w_subopt_derived"][:2])
    return markers


def _trajectories_in(input_dir: Path, preset: str) -> dict:
    found = {}
    for algo in ALGO_LABELS:
        path = input_dir / f"{preset}.{algo}.trajectory.csv"
        if path.exists():
            found[algo] = str(path)
    if not found:
        raise SchemaError(
            f"no {preset}.*.trajectory.csv files under {input_dir}")
    return found


def preset_specs(preset: str, input_dir, output_dir) -> list[FigureSpec]:
    """Figure specs for one simulation preset's output directory."""
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    if preset == "fig2-saturation":
        psd = input_dir / f"{preset}.psd.csv"
        return [FigureSpec(
            kind="psd-comparison", psd=str(psd),
            title="Error power spectra under output saturation",
            output=str(output_dir / "fig2-error-psd"))]

    trajectories = _trajectories_in(input_dir, preset)
    comparison = input_dir / f"{preset}.comparison.json"
    markers = _comparison_markers(comparison) if comparison.exists() else {}
    boundaries = [p for p in (input_dir / f"{preset}.boundary.csv",
                              input_dir / f"{preset}.boundary2.csv")
                  if p.exists()]
    if preset == "fig3-static":
        names = ("fig3-convergence-path", "fig4-weight-traces")
        titles = ("Convergence paths, static environment",
                  "Weight traces, static environment")
    else:
        names = ("fig5-convergence-path", "fig6-weight-traces")
        titles = ("Convergence paths across the environment change",
                  "Weight traces across the environment change")
    return [
        FigureSpec(kind="weight-path", trajectories=trajectories,
                   boundaries=[str(b) for b in boundaries], markers=markers,
                   title=titles[0], output=str(output_dir / names[0])),
        FigureSpec(kind="weight-trace", trajectories=trajectories,
                   title=titles[1], output=str(output_dir / names[1])),
    ]
