import json

import matplotlib.pyplot as plt
import numpy as np
import pytest

from ancfig import FigureSpec, SchemaError, load_spec, preset_specs, render


def write_trajectory(path, n=200, scale=1.0):
    rows = ["sample_index,w_0,w_1,error,output,power_estimate,mu1,branch"]
    for i in range(n):
        t = i / n
        w0 = scale * 1.76 * t
        w1 = scale * 1.25 * t
        rows.append(f"{i},{w0},{w1},0.1,0.05,0.2,1e-05,within")
    path.write_text("\n".join(rows) + "\n")
    return path


def write_boundary(path, radius=1.0, n=64):
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    rows = ["w_0,w_1"] + [f"{radius*np.cos(t)},{radius*np.sin(t)}"
                          for t in theta]
    path.write_text("\n".join(rows) + "\n")
    return path


def write_psd(path, n=128):
    rows = ["frequency_hz,disturbance_db,fxlms_db"]
    for k in range(n):
        f = k * 8000.0 / n
        rows.append(f"{f},{-40 + 10*np.exp(-((f-500)/200)**2)},{-45.0}")
    path.write_text("\n".join(rows) + "\n")
    return path


def pixels_near(figure, ax, point, half=6):
    """RGBA window around a data-space point."""
    figure.canvas.draw()
    buf = np.asarray(figure.canvas.buffer_rgba())
    x, y = ax.transData.transform(point)
    height = buf.shape[0]
    r = int(round(height - y))
    c = int(round(x))
    return buf[max(r - half, 0):r + half, max(c - half, 0):c + half]


def has_ink(window):
    rgb = window[..., :3].astype(int)
    return bool(np.any(np.abs(rgb - 255).sum(axis=-1) > 30))


class TestWeightPath:
    def test_markers_and_boundary_present(self, tmp_path):
        traj = write_trajectory(tmp_path / "t.csv")
        bound = write_boundary(tmp_path / "b.csv", radius=1.1)
        spec = FigureSpec(
            kind="weight-path", output=str(tmp_path / "fig"),
            trajectories={"fxlms": str(traj)},
            boundaries=[str(bound)],
            markers={"optimal": (1.76, 1.25), "sub-optimal": (0.89, 0.66)})
        result = render(spec)
        assert result.png.exists() and result.svg.exists()
        ax = result.figure.axes[0]
        for point in ((1.76, 1.25), (0.89, 0.66)):
            assert has_ink(pixels_near(result.figure, ax, point)), point
        # dashed boundary: at least half of the probe points carry ink
        hits = sum(
            has_ink(pixels_near(result.figure, ax,
                                (1.1 * np.cos(t), 1.1 * np.sin(t))))
            for t in np.linspace(0, 2 * np.pi, 8, endpoint=False))
        assert hits >= 4
        plt.close(result.figure)

    def test_two_boundaries_rendered(self, tmp_path):
        traj = write_trajectory(tmp_path / "t.csv")
        b1 = write_boundary(tmp_path / "b1.csv", radius=1.0)
        b2 = write_boundary(tmp_path / "b2.csv", radius=2.0)
        spec = FigureSpec(kind="weight-path", output=str(tmp_path / "fig"),
                          trajectories={"2gd": str(traj)},
                          boundaries=[str(b1), str(b2)])
        result = render(spec)
        ax = result.figure.axes[0]
        for radius in (1.0, 2.0):
            hits = sum(
                has_ink(pixels_near(result.figure, ax,
                                    (radius * np.cos(t), radius * np.sin(t))))
                for t in np.linspace(0, 2 * np.pi, 8, endpoint=False))
            assert hits >= 4, radius
        plt.close(result.figure)

    def test_empty_trajectory_is_axes_only_success(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text(
            "sample_index,w_0,w_1,error,output,power_estimate,mu1,branch\n")
        spec = FigureSpec(kind="weight-path", output=str(tmp_path / "fig"),
                          trajectories={"fxlms": str(empty)})
        result = render(spec)
        assert result.png.exists()
        plt.close(result.figure)

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sample_index,w_0\n0,1.0\n")
        spec = FigureSpec(kind="weight-path", output=str(tmp_path / "fig"),
                          trajectories={"fxlms": str(bad)})
        with pytest.raises(SchemaError, match="w_1"):
            render(spec)

    def test_inputs_not_mutated(self, tmp_path):
        traj = write_trajectory(tmp_path / "t.csv")
        before = traj.read_bytes()
        spec = FigureSpec(kind="weight-path", output=str(tmp_path / "fig"),
                          trajectories={"fxlms": str(traj)})
        plt.close(render(spec).figure)
        assert traj.read_bytes() == before


class TestWeightTrace:
    def test_traces_render(self, tmp_path):
        traj = write_trajectory(tmp_path / "t.csv")
        spec = FigureSpec(kind="weight-trace", output=str(tmp_path / "fig"),
                          trajectories={"fxlms": str(traj)})
        result = render(spec)
        assert result.png.exists() and result.svg.exists()
        assert len(result.figure.axes) == 2
        plt.close(result.figure)


class TestPsd:
    def test_psd_renders(self, tmp_path):
        psd = write_psd(tmp_path / "psd.csv")
        spec = FigureSpec(kind="psd-comparison", output=str(tmp_path / "fig"),
                          psd=str(psd))
        result = render(spec)
        assert result.png.exists()
        ax = result.figure.axes[0]
        assert len(ax.lines) == 2   # disturbance + fxlms
        plt.close(result.figure)

    def test_missing_psd_schema(self, tmp_path):
        bad = tmp_path / "psd.csv"
        bad.write_text("frequency_hz\n0\n")
        spec = FigureSpec(kind="psd-comparison", output=str(tmp_path / "fig"),
                          psd=str(bad))
        with pytest.raises(SchemaError, match="disturbance_db"):
            render(spec)


class TestSpecLoading:
    def test_unknown_kind(self):
        with pytest.raises(SchemaError):
            FigureSpec(kind="scatter", output="x")

    def test_load_spec_round_trip(self, tmp_path):
        traj = write_trajectory(tmp_path / "t.csv")
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps({
            "kind": "weight-trace",
            "output": str(tmp_path / "fig"),
            "trajectories": {"fxlms": str(traj)},
            "title": "test",
        }))
        spec = load_spec(spec_file)
        assert spec.kind == "weight-trace"
        result = render(spec)
        assert result.png.exists()
        plt.close(result.figure)

    def test_missing_input_file(self, tmp_path):
        spec = FigureSpec(kind="weight-path", output=str(tmp_path / "fig"),
                          trajectories={"fxlms": str(tmp_path / "none.csv")})
        with pytest.raises(SchemaError, match="does not exist"):
            render(spec)


class TestPresetSpecs:
    def test_static_preset_specs(self, tmp_path):
        write_trajectory(tmp_path / "fig3-static.fxlms.trajectory.csv")
        write_trajectory(tmp_path / "fig3-static.2gd.trajectory.csv")
        write_boundary(tmp_path / "fig3-static.boundary.csv")
        (tmp_path / "fig3-static.comparison.json").write_text(json.dumps({
            "predictions": {"w_opt": [1.76, 1.25],
                            "w_subopt_derived": [0.89, 0.66]}}))
        specs = preset_specs("fig3-static", tmp_path, tmp_path / "figs")
        assert [s.kind for s in specs] == ["weight-path", "weight-trace"]
        assert specs[0].markers["optimal"] == (1.76, 1.25)
        for spec in specs:
            plt.close(render(spec).figure)
        assert (tmp_path / "figs" / "fig3-convergence-path.png").exists()
        assert (tmp_path / "figs" / "fig4-weight-traces.svg").exists()

    def test_preset_without_outputs(self, tmp_path):
        with pytest.raises(SchemaError):
            preset_specs("fig3-static", tmp_path, tmp_path)
