"""Scenario runner: deterministic two-rate loop, metrics, and artifacts.

The control path ticks at 1 kHz; every 10th tick also runs the estimation
path (IMU sampling, event detection, stance windowing, per-stride parameter
updates). Parameter handoff to the controller happens only at foot-contact
ticks. Runs are fully determined by the scenario config and seed.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .controller import ControlMode, Controller, ControllerConfig
from .gait_signals import (EventDetector, GaitEvent, GaitEventKind,
                           WindowAssembler)
from .plant import (Activity, GaitWorld, PerturbationKind, PerturbationSpec,
                    PlantConfig, RampSpec, biological_torque, build_template)
from .profile import (GaussianParams, ProfileEstimator, ShankByPercentGC,
                      eval_force, eval_time_profile, feature_targets)
from .tendon import TendonModel

CSV_COLUMNS = ["t_ms", "stride", "mode", "theta_sk_deg", "theta_ft_deg",
               "theta_df_deg", "f_des_n", "f_meas_n", "f_truth_n",
               "l_cable_mm", "v_cmd_mm_s", "belt_scale", "perturbed"]

CONVERGENCE_SENTINEL = -1

# Default initial profile parameters (deg); amplitude comes from the config.
INITIAL_MU = 15.0
INITIAL_SIGMA1 = 10.0
INITIAL_SIGMA2 = 5.0
INITIAL_THETA_FC = -20.0
INITIAL_THETA_FO = 25.0


class ConfigError(ValueError):
    """Scenario configuration rejected."""


class MetricsError(ValueError):
    """Metric inputs malformed."""


class UndefinedCorrelationError(MetricsError):
    """Pearson correlation undefined (zero variance)."""


class ScenarioKind(Enum):
    STEADY = "steady"
    PERTURB = "perturb"
    SPEED_RAMP = "speed-ramp"


# -- metric primitives --------------------------------------------------------

def rmse_pct(desired: Sequence[float], actual: Sequence[float],
             peak: float) -> float:
    """Root-mean-square tracking error as a fraction of the peak force."""
    if len(desired) == 0 or len(desired) != len(actual):
        raise MetricsError("series must be non-empty and equal length")
    if peak <= 0.0:
        raise MetricsError("peak force must be positive")
    acc = 0.0
    for d, a in zip(desired, actual):
        acc += (d - a) ** 2
    return math.sqrt(acc / len(desired)) / peak


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    n = len(x)
    if n != len(y) or n < 3:
        raise MetricsError("series must be equal length >= 3")
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance series")
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / math.sqrt(sxx * syy)


def stance_correlation(mechanical: Sequence[float],
                       biological: Sequence[float]) -> float:
    """Pearson correlation after normalizing each series by its own maximum."""
    if len(mechanical) != len(biological):
        raise MetricsError("stance series must share one sampling grid")
    m_max = max(mechanical)
    b_max = max(biological)
    if m_max <= 0.0 or b_max <= 0.0:
        raise UndefinedCorrelationError("series without a positive peak")
    return pearson([m / m_max for m in mechanical],
                   [b / b_max for b in biological])


def convergence_stride(param_history: Sequence[GaussianParams],
                       targets: tuple[float, float, float],
                       tol: float) -> int:
    """First stride index after which mu, sigma1, sigma2 all stay within
    tol * |initial gap| of their targets; CONVERGENCE_SENTINEL if never."""
    if not param_history:
        raise MetricsError("empty parameter history")
    mu_t, s1_t, s2_t = targets
    first = param_history[0]
    gaps = (abs(first.mu - mu_t), abs(first.sigma1 - s1_t),
            abs(first.sigma2 - s2_t))
    bounds = tuple(tol * g + 1e-12 for g in gaps)

    def within(p: GaussianParams) -> bool:
        return (abs(p.mu - mu_t) <= bounds[0]
                and abs(p.sigma1 - s1_t) <= bounds[1]
                and abs(p.sigma2 - s2_t) <= bounds[2])

    n = len(param_history)
    for i in range(n):
        if all(within(param_history[j]) for j in range(i, n)):
            return i
    return CONVERGENCE_SENTINEL


def resample_uniform(t: np.ndarray, y: np.ndarray, n: int = 101) -> np.ndarray:
    """Linear resampling onto a uniform grid over [t[0], t[-1]]."""
    grid = np.linspace(t[0], t[-1], n)
    return np.interp(grid, t, y)


# -- scenario configuration ----------------------------------------------------

@dataclass
class ScenarioConfig:
    activity: str = "lw"
    scenario: str = "steady"
    n_strides: int = 60
    seed: int = 1
    amp_fraction: float = 0.15
    body_weight: float = 700.0          # N
    output_dir: Optional[str] = None
    controller: dict = field(default_factory=dict)
    plant: dict = field(default_factory=dict)
    template: dict = field(default_factory=dict)
    analysis_start: Optional[int] = None    # first stride in the aggregates
    aggregation_strides: int = 10           # GCs averaged in the aggregates
    n_perturbations: int = 4
    fault_spike_t_ms: Optional[float] = None
    fault_spike_n: float = 0.0
    stance_grid_points: int = 101

    def validate(self) -> None:
        if self.n_strides <= 0:
            raise ConfigError("n_strides must be positive")
        try:
            Activity(self.activity)
        except ValueError as exc:
            raise ConfigError(f"unknown activity {self.activity!r}") from exc
        try:
            ScenarioKind(self.scenario)
        except ValueError as exc:
            raise ConfigError(f"unknown scenario {self.scenario!r}") from exc
        if not 0.0 < self.amp_fraction <= 0.5:
            raise ConfigError("amp_fraction outside (0, 0.5]")
        if self.body_weight <= 0.0:
            raise ConfigError("body_weight must be positive")


@dataclass
class StrideMetrics:
    stride: int
    t_fc_ms: float
    stance_ratio: float
    rmse_pct: Optional[float]
    pearson_shank: Optional[float]
    pearson_time: Optional[float]
    swing_max_force: Optional[float]
    perturbed: int                    # 0 none, 1 forward, 2 backward
    mu: float
    sigma1: float
    sigma2: float
    theta_fc: float
    theta_fo: float


@dataclass
class MetricsReport:
    config: dict
    per_stride: list[StrideMetrics]
    aggregate: dict
    convergence_stride: int
    aborted: bool

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "per_stride": [asdict(s) for s in self.per_stride],
            "aggregate": self.aggregate,
            "convergence_stride": self.convergence_stride,
            "aborted": self.aborted,
        }


# -- scenario runner ------------------------------------------------------------

class _RunLog:
    """Per-tick arrays accumulated during a run."""

    def __init__(self):
        self.t_ms: list[float] = []
        self.stride: list[int] = []
        self.mode: list[str] = []
        self.theta_sk: list[float] = []
        self.theta_ft: list[float] = []
        self.theta_df: list[float] = []
        self.f_des: list[float] = []
        self.f_meas: list[float] = []
        self.f_truth: list[float] = []
        self.l_cable: list[float] = []
        self.v_cmd: list[float] = []
        self.belt_scale: list[float] = []
        self.perturb_kind: list[int] = []
        self.bio: list[float] = []


def _schedule_perturbations(cfg: ScenarioConfig, rng: np.random.Generator,
                            first: int, last: int) -> list[PerturbationSpec]:
    """Non-consecutive strides, half forward / half backward, fixed onset."""
    if last - first < 2 * cfg.n_perturbations:
        raise ConfigError("not enough strides for the perturbation protocol")
    while True:
        strides = sorted(rng.choice(np.arange(first, last),
                                    size=cfg.n_perturbations, replace=False))
        if all(b - a >= 2 for a, b in zip(strides, strides[1:])):
            break
    kinds = [PerturbationKind.FORWARD] * (cfg.n_perturbations // 2)
    kinds += [PerturbationKind.BACKWARD] * (cfg.n_perturbations - len(kinds))
    order = rng.permutation(len(kinds))
    return [PerturbationSpec(kind=kinds[int(i)],
                             affected_cycles=frozenset({int(s)}))
            for i, s in zip(order, strides)]


def run_scenario(cfg: ScenarioConfig) -> MetricsReport:
    cfg.validate()
    activity = Activity(cfg.activity)
    scenario = ScenarioKind(cfg.scenario)
    tmpl = build_template(activity, **cfg.template)
    plant_cfg = PlantConfig(**cfg.plant)
    ctrl_cfg = ControllerConfig(amp_fraction=cfg.amp_fraction,
                                v_max=plant_cfg.v_max, **cfg.controller)
    silent = ctrl_cfg.silent_cycles
    if cfg.analysis_start is not None:
        analysis_start = cfg.analysis_start
    else:
        # post-silent, post-convergence; clamped so short runs still report
        analysis_start = min(silent + 12,
                             max(cfg.n_strides - cfg.aggregation_strides, silent))

    rng = np.random.default_rng(cfg.seed)
    perturbations: list[PerturbationSpec] = []
    ramp: Optional[RampSpec] = None
    if scenario is ScenarioKind.PERTURB:
        perturbations = _schedule_perturbations(
            cfg, rng, first=analysis_start + 2, last=cfg.n_strides - 2)
    elif scenario is ScenarioKind.SPEED_RAMP:
        lo = analysis_start + 2
        hi = max(lo + 1, cfg.n_strides - 14)
        ramp = RampSpec(start_stride=int(rng.integers(lo, hi)))

    world = GaitWorld(tmpl, plant_cfg, seed=cfg.seed,
                      perturbations=perturbations, ramp=ramp)
    model_tendon = TendonModel(plant_cfg.lever_arm_r, plant_cfg.k_all,
                               plant_cfg.baseline_c, 0.0)
    ctrl = Controller(ctrl_cfg, model_tendon)
    amp = cfg.amp_fraction * cfg.body_weight
    estimator = ProfileEstimator(GaussianParams(
        amp, INITIAL_MU, INITIAL_SIGMA1, INITIAL_SIGMA2,
        INITIAL_THETA_FC, INITIAL_THETA_FO))
    detector = EventDetector()
    assembler = WindowAssembler()

    dt = 0.001
    log = _RunLog()
    events: list[GaitEvent] = []
    adopted: list[GaussianParams] = []     # params active per stride
    raws: list = []                        # last accepted features per stride
    f_meas_prev = 0.0
    l_meas_prev = world.state.l_cable
    l_rate_prev = 0.0
    pos_prev = 0.0
    current_stride = -1
    done_fc = None
    max_ticks = int((world.standing_s + (cfg.n_strides + 6)
                     * tmpl.period * 2.2) * 1000)
    spike_tick = (None if cfg.fault_spike_t_ms is None
                  else int(round(cfg.fault_spike_t_ms)))

    for k in range(1, max_ticks + 1):
        kin = world.advance(dt)
        t_ms = round(world.t_s * 1000.0)
        if k % 10 == 0 and world.walking:
            ev = detector.update(kin)
            window = assembler.process(kin, ev)
            if window is not None:
                estimator.update_from_window(window)
            if ev is not None:
                events.append(ev)
                if ev.kind is GaitEventKind.FOOT_CONTACT:
                    current_stride = ev.gc_index
                    adopted.append(estimator.params)
                    raws.append(estimator.last_raw)
                    ctrl.on_event(ev, new_params=estimator.params)
                    if ev.gc_index >= cfg.n_strides:
                        done_fc = k
                else:
                    ctrl.on_event(ev)
        f_for_ctrl = f_meas_prev
        if spike_tick is not None and t_ms == spike_tick:
            f_for_ctrl += cfg.fault_spike_n
        cmd = ctrl.tick(kin, f_for_ctrl, l_meas_prev, l_rate_prev,
                        pos_prev, dt)
        reading = world.step_cable(cmd.v, kin, dt)
        in_stance_ctrl = ctrl.state.mode is ControlMode.STANCE
        f_des = (eval_force(ctrl.state.active_params, kin.theta_sk)
                 if in_stance_ctrl and ctrl.state.active_params else 0.0)
        pk = world.perturbation_kind()

        log.t_ms.append(float(t_ms))
        log.stride.append(current_stride)
        log.mode.append(ctrl.state.mode.value if not ctrl.state.aborted
                        else "abort")
        log.theta_sk.append(kin.theta_sk)
        log.theta_ft.append(kin.theta_ft)
        log.theta_df.append(kin.theta_df)
        log.f_des.append(f_des)
        log.f_meas.append(reading.f_meas)
        log.f_truth.append(reading.f_truth)
        log.l_cable.append(reading.l_meas)
        log.v_cmd.append(cmd.v)
        log.belt_scale.append(world.scale)
        log.perturb_kind.append(pk)
        log.bio.append(biological_torque(tmpl, world.phase)
                       if world.walking else 0.0)

        f_meas_prev = reading.f_meas
        l_meas_prev = reading.l_meas
        l_rate_prev = reading.l_meas_rate
        pos_prev = reading.motor_pos
        if done_fc is not None and k >= done_fc + 20:
            break

    report = _build_report(cfg, ctrl_cfg, tmpl, log, events, adopted, raws,
                           analysis_start, ctrl.state.aborted)
    if cfg.output_dir:
        write_artifacts(cfg.output_dir, log, report)
    return report


def _build_report(cfg, ctrl_cfg, tmpl, log, events, adopted, raws,
                  analysis_start, aborted) -> MetricsReport:
    t = np.asarray(log.t_ms)
    f_des = np.asarray(log.f_des)
    f_meas = np.asarray(log.f_meas)
    sk = np.asarray(log.theta_sk)
    bio = np.asarray(log.bio)
    pk = np.asarray(log.perturb_kind)

    fcs = [e for e in events if e.kind is GaitEventKind.FOOT_CONTACT]
    fos = {e.gc_index: e for e in events if e.kind is GaitEventKind.FOOT_OFF}
    n_complete = min(len(fcs) - 1, cfg.n_strides)

    per_stride: list[StrideMetrics] = []
    prev_clean: Optional[ShankByPercentGC] = None
    prev_duration: Optional[float] = None
    grid_n = cfg.stance_grid_points
    for n in range(n_complete):
        fc, nxt = fcs[n], fcs[n + 1]
        fo = fos.get(n)
        if fo is None or not (fc.t_ms < fo.t_ms < nxt.t_ms):
            continue
        i0 = int(np.searchsorted(t, fc.t_ms))
        i1 = int(np.searchsorted(t, fo.t_ms, side="right"))
        i2 = int(np.searchsorted(t, nxt.t_ms))
        duration = nxt.t_ms - fc.t_ms
        ratio = (fo.t_ms - fc.t_ms) / duration
        params = adopted[n] if n < len(adopted) else adopted[-1]
        kind = int(pk[i0:i2].max()) if i2 > i0 else 0

        des = f_des[i0:i1]
        mea = f_meas[i0:i1]
        peak = float(des.max()) if len(des) else 0.0
        stride_rmse = (rmse_pct(des, mea, peak) if peak > 1.0 else None)

        r_sk = r_tm = None
        bio_seg = bio[i0:i1]
        if peak > 1.0 and bio_seg.max() > 0.0:
            tt = t[i0:i1]
            mech_g = resample_uniform(tt, des, grid_n)
            bio_g = resample_uniform(tt, bio_seg, grid_n)
            try:
                r_sk = stance_correlation(mech_g, bio_g)
            except MetricsError:
                r_sk = None
            if prev_clean is not None and prev_duration:
                ftime = np.array([
                    eval_time_profile(params, (ti - fc.t_ms) / prev_duration,
                                      prev_clean) for ti in tt])
                ftime_g = resample_uniform(tt, ftime, grid_n)
                try:
                    r_tm = stance_correlation(ftime_g, bio_g)
                except MetricsError:
                    r_tm = None

        swing_max = None
        if n + 1 < len(adopted):
            swing_max = _swing_max_between(log, fo.t_ms, nxt.t_ms)

        per_stride.append(StrideMetrics(
            stride=n, t_fc_ms=fc.t_ms, stance_ratio=ratio,
            rmse_pct=stride_rmse, pearson_shank=r_sk, pearson_time=r_tm,
            swing_max_force=swing_max, perturbed=kind,
            mu=params.mu, sigma1=params.sigma1, sigma2=params.sigma2,
            theta_fc=params.theta_fc, theta_fo=params.theta_fo))

        if kind == 0:
            tt_full = t[i0:i2]
            pct = (tt_full - fc.t_ms) / duration
            prev_clean = ShankByPercentGC(
                list(np.linspace(0.0, 1.0, grid_n)),
                list(np.interp(np.linspace(0.0, 1.0, grid_n), pct,
                               sk[i0:i2])))
            prev_duration = duration

    targets = None
    for raw in reversed(raws):
        if raw is not None and raw.ordered:
            s1_t, s2_t, mu_t = feature_targets(raw)
            targets = (mu_t, s1_t, s2_t)
            break
    conv = CONVERGENCE_SENTINEL
    if targets is not None and adopted:
        conv = convergence_stride(adopted, targets, tol=0.05)

    window = [s for s in per_stride if s.stride >= analysis_start]
    block = window[:cfg.aggregation_strides] if cfg.aggregation_strides else window
    aggregate = {
        "analysis_start_stride": analysis_start,
        "n_strides_analyzed": len(window),
        "n_strides_aggregated": len(block),
        "target_mu": targets[0] if targets else None,
        "target_sigma1": targets[1] if targets else None,
        "target_sigma2": targets[2] if targets else None,
        "rmse_pct_mean": _mean([s.rmse_pct for s in block]),
        "rmse_pct_sd": _sd([s.rmse_pct for s in block]),
        "pearson_shank_mean": _mean([s.pearson_shank for s in block]),
        "pearson_shank_sd": _sd([s.pearson_shank for s in block]),
        "pearson_time_mean": _mean([s.pearson_time for s in block]),
        "pearson_time_sd": _sd([s.pearson_time for s in block]),
        "swing_max_force_mean": _mean([s.swing_max_force for s in block]),
        "swing_max_force_sd": _sd([s.swing_max_force for s in block]),
        "stance_ratio_mean": _mean([s.stance_ratio for s in block]),
    }
    config_echo = {
        "activity": cfg.activity, "scenario": cfg.scenario,
        "n_strides": cfg.n_strides, "seed": cfg.seed,
        "amp_fraction": cfg.amp_fraction, "body_weight": cfg.body_weight,
        "silent_cycles": ctrl_cfg.silent_cycles,
        "template_period_s": tmpl.period,
        "template_stance_ratio": tmpl.stance_ratio,
    }
    return MetricsReport(config=config_echo, per_stride=per_stride,
                         aggregate=aggregate, convergence_stride=conv,
                         aborted=aborted)


def _swing_max_between(log: _RunLog, t0: float, t1: float) -> float:
    t = np.asarray(log.t_ms)
    i0 = int(np.searchsorted(t, t0))
    i1 = int(np.searchsorted(t, t1))
    seg = np.asarray(log.f_meas)[i0:i1]
    return float(seg.max()) if len(seg) else 0.0


def _mean(xs) -> Optional[float]:
    vals = [x for x in xs if x is not None]
    return sum(vals) / len(vals) if vals else None


def _sd(xs) -> Optional[float]:
    vals = [x for x in xs if x is not None]
    if len(vals) < 2:
        return None
    m = sum(vals) / len(vals)
    return math.sqrt(sum((v - m) ** 2 for v in vals) / (len(vals) - 1))


# -- artifacts -------------------------------------------------------------------

def write_artifacts(out_dir: str, log: _RunLog, report: MetricsReport) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "timeseries.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in range(len(log.t_ms)):
            w.writerow([
                f"{log.t_ms[i]:.1f}", log.stride[i], log.mode[i],
                f"{log.theta_sk[i]:.6f}", f"{log.theta_ft[i]:.6f}",
                f"{log.theta_df[i]:.6f}", f"{log.f_des[i]:.6f}",
                f"{log.f_meas[i]:.6f}", f"{log.f_truth[i]:.6f}",
                f"{log.l_cable[i]:.6f}", f"{log.v_cmd[i]:.6f}",
                f"{log.belt_scale[i]:.6f}",
                1 if log.perturb_kind[i] else 0,
            ])
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
