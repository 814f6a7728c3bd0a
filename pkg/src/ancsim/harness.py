"""Scenario definition, sample-loop execution, and persistence.

A scenario couples a noise source, acoustic paths, one algorithm
configuration, and an optional saturation model. The loop per sample n:
generate x(n); d(n) = x * primary; y(n) = w^T x; clip y if configured;
e(n) = d(n) - (clipped y) * secondary; filter the reference through the
secondary-path model; advance the controller; apply any scheduled
environment change; record.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .acoustics import FirPath, NoiseSource, SaturationModel, saturate
from .controllers import (AlgorithmConfig, BRANCH_EXCEEDED, Controller,
                          lagrangian_factor, make_controller)
from .errors import ConfigError, DivergedError

FLOAT_FMT = "%.17g"


@dataclass
class PathChange:
    """Environment switch applied instantaneously before sample `index`.

    Past samples stay in flight: the new paths filter the full input
    history. An optional noise variance lets the switch also change the
    primary-noise power (a path-only change cannot move the weight-space
    constraint boundary).
    """

    index: int
    primary_path: FirPath
    secondary_path: FirPath
    noise_variance: float | None = None


@dataclass
class ScenarioConfig:
    name: str
    noise: NoiseSource
    primary_path: FirPath
    secondary_path: FirPath
    algorithm: AlgorithmConfig
    n_taps: int
    n_samples: int
    secondary_model: FirPath | None = None   # defaults to the true path
    saturation: SaturationModel | None = None
    path_changes: list[PathChange] = field(default_factory=list)
    record_stride: int = 1
    csv_weight_cap: int = 16
    preamble_samples: int = 16384

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.n_taps < 1:
            raise ConfigError("n_taps must be >= 1")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")
        last = 0
        for change in self.path_changes:
            if not (last < change.index < self.n_samples) or change.index <= 0:
                raise ConfigError(
                    "path-change indices must be strictly increasing and "
                    "inside (0, n_samples)")
            last = change.index
        if self.secondary_model is None:
            self.secondary_model = FirPath(self.secondary_path.coefficients)


@dataclass
class TrajectoryRecord:
    sample_index: int
    weights: np.ndarray
    error: float
    output: float
    power_estimate: float
    mu1: float
    branch: str


@dataclass
class PhaseSummary:
    start: int
    end: int
    noise_variance: float
    final_weights: list
    convergence_samples: int
    steady_state_error_power: float
    violations: int


@dataclass
class RunSummary:
    status: str
    final_weights: list
    steady_state_error_power: float
    convergence_samples: int
    violations: int
    samples_run: int
    final_mu1: float
    effective_varsigma: float
    sigma_d_sq: float
    phases: list[PhaseSummary] = field(default_factory=list)


@dataclass
class RunResult:
    config: ScenarioConfig
    records: list[TrajectoryRecord]
    summary: RunSummary
    errors: np.ndarray           # full error signal e(n)
    disturbance: np.ndarray      # full disturbance d(n)
    # coarse full-length weight snapshots (records cap long filters)
    checkpoints: list[tuple[int, np.ndarray]] = field(default_factory=list)


def _phase_table(config: ScenarioConfig):
    """(start, primary, secondary, variance) per phase."""
    phases = [(0, config.primary_path, config.secondary_path,
               config.noise.variance)]
    for change in config.path_changes:
        prev_var = phases[-1][3]
        var = change.noise_variance if change.noise_variance is not None else prev_var
        phases.append((change.index, change.primary_path,
                       change.secondary_path, var))
    return phases


def _build_signals(config: ScenarioConfig):
    """Reference x (with any variance schedule), disturbance d per phase,
    and the filtered reference x' = x * s_hat."""
    n = config.n_samples
    x = config.noise.generate(n)
    phases = _phase_table(config)
    base_var = config.noise.variance
    for start, _, _, var in phases[1:]:
        if var != base_var:
            if base_var <= 0:
                raise ConfigError("cannot rescale a zero-variance noise source")
            x[start:] = x[start:] * np.sqrt(var / base_var)
            base_var = var
    d = np.empty(n)
    bounds = [p[0] for p in phases] + [n]
    for (start, primary, _, _), end in zip(phases, bounds[1:]):
        d[start:end] = primary.filter(x)[start:end]
    xprime = config.secondary_model.filter(x)
    return x, d, xprime, phases


def _resolve_varsigma(config: ScenarioConfig, d: np.ndarray):
    algo = config.algorithm
    if algo.sigma_d_sq_override is not None:
        sigma_d_sq = float(algo.sigma_d_sq_override)
    else:
        preamble = d[: min(config.preamble_samples, d.size)]
        sigma_d_sq = float(np.mean(preamble ** 2))
    if isinstance(algo.varsigma, str):   # "derived"
        gain = config.secondary_model.power_gain()
        if sigma_d_sq <= 0:
            return 0.0, sigma_d_sq
        return lagrangian_factor(gain, sigma_d_sq, algo.rho_sq), sigma_d_sq
    return float(algo.varsigma), sigma_d_sq


@np.errstate(over="ignore", invalid="ignore")
def run_scenario(config: ScenarioConfig) -> RunResult:
    """Execute the adaptive loop; deterministic for identical configs.

    Divergent runs overflow to inf by design; the loop detects that and
    returns a partial trajectory with diverged status.
    """
    n = config.n_samples
    taps = config.n_taps
    x, d, xprime, phases = _build_signals(config)
    varsigma, sigma_d_sq = _resolve_varsigma(config, d)
    controller = make_controller(config.algorithm, taps, varsigma)

    pad = taps - 1
    xpad = np.concatenate([np.zeros(pad), x])
    xppad = np.concatenate([np.zeros(pad), xprime])
    max_sec = max(len(p[2]) for p in phases)
    ypad = np.zeros(n + max_sec - 1)

    sat = config.saturation
    stride = config.record_stride
    cap = min(taps, config.csv_weight_cap)
    records: list[TrajectoryRecord] = []
    ck_stride = max(stride, n // 512 + 1)
    checkpoints: list[tuple[int, np.ndarray]] = []
    errors = np.zeros(n)
    violations = 0
    status = "completed"
    samples_run = 0

    phase_iter = iter(phases[1:])
    next_change = next(phase_iter, None)
    sec = config.secondary_path
    sec_rev = sec.coefficients[::-1].copy()
    ls = len(sec)
    weights = controller.weights

    phase_violations = [0] * len(phases)
    phase_idx = 0
    for i in range(n):
        if next_change is not None and i == next_change[0]:
            sec = next_change[2]
            sec_rev = sec.coefficients[::-1].copy()
            ls = len(sec)
            phase_idx += 1
            next_change = next(phase_iter, None)
        xv = xpad[i:i + taps][::-1]
        xpv = xppad[i:i + taps][::-1]
        y = float(np.dot(weights, xv))
        y_out = saturate(y, sat) if sat is not None else y
        ypad[i + max_sec - 1] = y_out
        base = i + max_sec - ls
        e = d[i] - float(np.dot(sec_rev, ypad[base:base + ls]))
        errors[i] = e
        try:
            controller.step(xv, xpv, e, y)
        except DivergedError:
            status = "diverged"
            samples_run = i + 1
            errors = errors[:samples_run]
            records.append(_snapshot(i, controller, e, y, cap))
            checkpoints.append((i, controller.weights.copy()))
            break
        if controller.last_branch == BRANCH_EXCEEDED:
            violations += 1
            phase_violations[phase_idx] += 1
        if i % stride == 0 or i == n - 1:
            records.append(_snapshot(i, controller, e, y, cap))
        if i % ck_stride == 0 or i == n - 1:
            checkpoints.append((i, controller.weights.copy()))
    else:
        samples_run = n

    summary = _summarize(config, controller, checkpoints, errors, violations,
                         status, samples_run, varsigma, sigma_d_sq, phases,
                         phase_violations)
    return RunResult(config=config, records=records, summary=summary,
                     errors=errors, disturbance=d[:samples_run],
                     checkpoints=checkpoints)


def _snapshot(i: int, controller: Controller, e: float, y: float,
              cap: int) -> TrajectoryRecord:
    return TrajectoryRecord(
        sample_index=i, weights=controller.weights[:cap].copy(), error=e,
        output=y, power_estimate=controller.power_estimate,
        mu1=controller.mu1, branch=controller.last_branch)


def convergence_index(checkpoints: list[tuple[int, np.ndarray]],
                      final_weights: np.ndarray,
                      rel_tol: float = 0.05) -> int:
    """First snapshotted sample index after which ||w - w_final|| stays
    within rel_tol * ||w_final|| (absolute floor 1e-12)."""
    threshold = max(rel_tol * float(np.linalg.norm(final_weights)), 1e-12)
    converged_at = checkpoints[0][0] if checkpoints else 0
    settled = True
    for index, weights in checkpoints:
        if np.linalg.norm(weights - final_weights) > threshold:
            settled = False
        elif not settled:
            converged_at = index
            settled = True
    if not settled:
        return checkpoints[-1][0] if checkpoints else 0
    return converged_at


def _steady_error_power(errors: np.ndarray, start: int, end: int) -> float:
    span = end - start
    if span <= 0:
        return float("nan")
    tail = errors[end - max(span // 5, 1):end]
    return float(np.mean(tail ** 2))


def _summarize(config, controller, checkpoints, errors, violations, status,
               samples_run, varsigma, sigma_d_sq, phases,
               phase_violations) -> RunSummary:
    final_w = controller.weights.copy()
    conv = convergence_index(checkpoints, final_w) if checkpoints else 0
    phase_summaries = []
    if len(phases) > 1 and status == "completed":
        bounds = [p[0] for p in phases] + [samples_run]
        for k, ((start, _, _, var), end) in enumerate(zip(phases, bounds[1:])):
            in_phase = [c for c in checkpoints if start <= c[0] < end]
            if not in_phase:
                continue
            w_end = in_phase[-1][1]
            conv_local = convergence_index(in_phase, w_end)
            phase_summaries.append(PhaseSummary(
                start=start, end=end, noise_variance=var,
                final_weights=w_end.tolist(),
                convergence_samples=conv_local - start,
                steady_state_error_power=_steady_error_power(errors, start, end),
                violations=phase_violations[k],
            ))
    return RunSummary(
        status=status,
        final_weights=final_w.tolist(),
        steady_state_error_power=_steady_error_power(errors, 0, samples_run),
        convergence_samples=conv,
        violations=violations,
        samples_run=samples_run,
        final_mu1=controller.mu1,
        effective_varsigma=varsigma,
        sigma_d_sq=sigma_d_sq,
        phases=phase_summaries,
    )


def run_varying_environment(config: ScenarioConfig) -> RunResult:
    """run_scenario for schedules with at least one environment change;
    the summary carries per-phase convergence and steady-state figures."""
    if not config.path_changes:
        raise ConfigError("varying-environment run needs a path change")
    return run_scenario(config)


# ---------------------------------------------------------------------------
# persistence

def trajectory_csv_bytes(result: RunResult) -> bytes:
    cap = min(result.config.n_taps, result.config.csv_weight_cap)
    buf = io.StringIO()
    cols = ["sample_index"] + [f"w_{k}" for k in range(cap)] + [
        "error", "output", "power_estimate", "mu1", "branch"]
    buf.write(",".join(cols) + "\n")
    for rec in result.records:
        vals = [str(rec.sample_index)]
        vals += [FLOAT_FMT % w for w in rec.weights[:cap]]
        vals += [FLOAT_FMT % rec.error, FLOAT_FMT % rec.output,
                 FLOAT_FMT % rec.power_estimate, FLOAT_FMT % rec.mu1,
                 rec.branch]
        buf.write(",".join(vals) + "\n")
    return buf.getvalue().encode()


def scenario_to_dict(config: ScenarioConfig) -> dict:
    algo = config.algorithm
    return {
        "name": config.name,
        "noise": {
            "kind": config.noise.kind,
            "variance": config.noise.variance,
            "band": list(config.noise.band) if config.noise.band else None,
            "sample_rate": config.noise.sample_rate,
            "seed": config.noise.seed,
        },
        "primary_path": config.primary_path.coefficients.tolist(),
        "secondary_path": config.secondary_path.coefficients.tolist(),
        "secondary_model": config.secondary_model.coefficients.tolist(),
        "algorithm": {
            "algorithm": algo.algorithm,
            "mu1_initial": algo.mu1_initial,
            "mu_min": algo.mu_min,
            "gamma": algo.gamma,
            "kappa": algo.kappa,
            "rho_sq": algo.rho_sq,
            "varsigma": algo.varsigma,
            "power_smoothing": algo.power_smoothing,
            "momentum_mode": algo.momentum_mode,
            "vss_literal_min": algo.vss_literal_min,
            "sigma_d_sq_override": algo.sigma_d_sq_override,
        },
        "saturation": None if config.saturation is None else {
            "clip_threshold": config.saturation.clip_threshold,
            "mode": config.saturation.mode,
        },
        "n_taps": config.n_taps,
        "n_samples": config.n_samples,
        "path_changes": [
            {
                "index": c.index,
                "primary_path": c.primary_path.coefficients.tolist(),
                "secondary_path": c.secondary_path.coefficients.tolist(),
                "noise_variance": c.noise_variance,
            }
            for c in config.path_changes
        ],
        "record_stride": config.record_stride,
        "csv_weight_cap": config.csv_weight_cap,
        "preamble_samples": config.preamble_samples,
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    try:
        noise_d = data["noise"]
        noise = NoiseSource(
            kind=noise_d["kind"], variance=noise_d["variance"],
            band=tuple(noise_d["band"]) if noise_d.get("band") else None,
            sample_rate=noise_d.get("sample_rate", 16000.0),
            seed=noise_d.get("seed", 0))
        algo_d = dict(data["algorithm"])
        algorithm = AlgorithmConfig(**algo_d)
        sat = None
        if data.get("saturation"):
            sat = SaturationModel(**data["saturation"])
        changes = [
            PathChange(index=c["index"],
                       primary_path=FirPath(c["primary_path"]),
                       secondary_path=FirPath(c["secondary_path"]),
                       noise_variance=c.get("noise_variance"))
            for c in data.get("path_changes", [])
        ]
        return ScenarioConfig(
            name=data["name"],
            noise=noise,
            primary_path=FirPath(data["primary_path"]),
            secondary_path=FirPath(data["secondary_path"]),
            secondary_model=(FirPath(data["secondary_model"])
                             if data.get("secondary_model") else None),
            algorithm=algorithm,
            saturation=sat,
            n_taps=data["n_taps"],
            n_samples=data["n_samples"],
            path_changes=changes,
            record_stride=data.get("record_stride", 1),
            csv_weight_cap=data.get("csv_weight_cap", 16),
            preamble_samples=data.get("preamble_samples", 16384),
        )
    except KeyError as missing:
        raise ConfigError(f"scenario config is missing field {missing}") from None


def summary_to_dict(result: RunResult) -> dict:
    s = result.summary
    return {
        "scenario": scenario_to_dict(result.config),
        "status": s.status,
        "final_weights": s.final_weights,
        "steady_state_error_power": s.steady_state_error_power,
        "convergence_samples": s.convergence_samples,
        "violations": s.violations,
        "samples_run": s.samples_run,
        "final_mu1": s.final_mu1,
        "effective_varsigma": s.effective_varsigma,
        "sigma_d_sq": s.sigma_d_sq,
        "phases": [vars(p) for p in s.phases],
        "trajectory_sha256": hashlib.sha256(
            trajectory_csv_bytes(result)).hexdigest(),
    }


def persist(result: RunResult, out_dir, name: str | None = None,
            formats=("csv", "json")) -> dict:
    """Write <name>.trajectory.csv and/or <name>.summary.json; returns
    the written paths keyed by kind."""
    from pathlib import Path

    for fmt in formats:
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown persist format {fmt!r}")
    out = Path(out_dir)
    written = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        base = name or result.config.name
        if "csv" in formats:
            csv_path = out / f"{base}.trajectory.csv"
            csv_path.write_bytes(trajectory_csv_bytes(result))
            written["trajectory"] = csv_path
        if "json" in formats:
            summary = summary_to_dict(result)
            json_path = out / f"{base}.summary.json"
            json_path.write_text(json.dumps(summary, indent=2,
                                            sort_keys=True) + "\n")
            written["summary"] = json_path
    except OSError as err:
        raise OSError(f"failed writing run output under {out}: {err}") from err
    return written


def theoretical_r_x(noise: NoiseSource, n_taps: int) -> np.ndarray:
    """Model autocorrelation matrix of the reference for boundary drawing."""
    if noise.kind == "white-gaussian" or noise.band is None:
        return noise.variance * np.eye(n_taps)
    from .acoustics import bandpass_taps

    taps = bandpass_taps(noise.band[0], noise.band[1], noise.sample_rate)
    norm = np.dot(taps, taps)
    lags = np.array([np.dot(taps[k:], taps[:taps.size - k]) / norm
                     for k in range(n_taps)])
    idx = np.abs(np.subtract.outer(np.arange(n_taps), np.arange(n_taps)))
    return noise.variance * lags[idx]


def boundary_points(r_x: np.ndarray, rho_sq: float, n_points: int = 256) -> np.ndarray:
    """Points on {w : w^T R_x w = rho^2} for a two-weight filter."""
    if r_x.shape != (2, 2):
        raise ConfigError("boundary drawing is defined for two-weight filters")
    from . import linalg

    vals, vecs = linalg.symmetric_eig(r_x)
    if np.any(vals <= 0):
        raise ConfigError("R_x must be positive definite for a closed boundary")
    theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)])
    pts = vecs @ (np.sqrt(rho_sq) / np.sqrt(vals)[:, None] * circle)
    return pts.T


def boundary_csv_bytes(points: np.ndarray) -> bytes:
    buf = io.StringIO()
    buf.write("w_0,w_1\n")
    for w0, w1 in points:
        buf.write(f"{FLOAT_FMT % w0},{FLOAT_FMT % w1}\n")
    return buf.getvalue().encode()
