"""Stance/swing control state machine emitting 1 kHz cable velocity commands.

Velocity sign convention: positive command = cable retraction = artificial
tendon shortening. The stance command combines force-error feedback mapped
through 1/(M s + B) with a model feedforward equal to the tendon length rate
along the desired-force trajectory; the swing command is PI with damping
injection toward a per-cycle quasi-slack length.

Startup sequencing follows the hardware protocol: pretighten at standing to
confirm the tendon baseline, release, walk silently for the first strides,
then assist. Each assisted stance opens with a tightening sub-phase that
closes the slack gap left by swing and re-estimates suit migration at the
moment the cable first engages.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .gait_signals import GaitEvent, GaitEventKind, KinematicSample
from .profile import GaussianParams, eval_force, eval_force_rate
from .tendon import TendonModel, estimate_migration, tendon_length

log = logging.getLogger(__name__)


class ControlMode(Enum):
    PRETIGHTEN = "pretighten"
    SILENT = "silent"
    SWING = "swing"
    STANCE = "stance"


class CommandSource(Enum):
    SWING_PI = "swing_pi"
    STANCE_FBFF = "stance_fbff"
    HOLD = "hold"
    RELEASE = "release"


class SafetyStatus(Enum):
    OK = "ok"
    ABORT = "abort"


@dataclass(frozen=True)
class VelocityCommand:
    v: float  # mm/s, positive retracts the cable
    source: CommandSource


@dataclass
class ControllerConfig:
    """Control gains and limits; defaults follow the tuned hardware values."""

    kp: float = 23.0                 # 1/s
    ki: float = 1e-4                 # 1/s^2
    kd: float = 1.8                  # unitless damping injection
    map_m: float = 0.0               # N*s/mm, force-to-velocity map inertia
    map_b: float = 15.7              # N/mm, force-to-velocity map gain
    swing_target_force: float = 3.0  # N
    amp_fraction: float = 0.15       # of body weight
    silent_cycles: int = 5
    force_ceiling: float = 300.0     # N
    position_limit_mm: float = 80.0  # +/- about the pretighten reference
    v_max: float = 250.0             # mm/s command envelope
    pretighten_force: float = 5.0    # N, startup baseline confirmation
    pretighten_rate: float = 30.0    # mm/s during startup tightening
    release_slack_mm: float = 20.0   # payout past the baseline for silent walking
    integral_clamp: float = 50.0     # mm*s anti-windup bound
    tighten_gain: float = 60.0       # 1/s, per-cycle slack take-up
    probe_rate: float = 80.0         # mm/s, slow retraction until tautness
    probe_margin_mm: float = 2.0     # mm, model gap where probing takes over
    engage_force: float = 2.0        # N, measured force confirming tautness
    tail_release_force: float = 0.5  # N, desired force ending the profile
    tail_release_rate: float = 40.0  # mm/s extra payout after the profile ends


@dataclass
class ControllerState:
    mode: ControlMode = ControlMode.PRETIGHTEN
    l_swing: float = 0.0                 # mm, per-cycle constant
    e_l_integral: float = 0.0            # mm*s, resets each cycle
    f_swing_max: float = 0.0             # N, running max of the last swing
    gc_count: int = 0
    active_params: Optional[GaussianParams] = None
    stance_peak_log: Optional[tuple[float, float]] = None  # (force N, shank deg)
    aborted: bool = False
    engaged: bool = False                # cable taut this stance
    have_swing_history: bool = False
    release_target: float = 0.0          # mm, slack hold length
    baseline_confirmed: bool = False
    last_l_meas: float = 0.0
    last_theta_df: float = 0.0
    v_fb_state: float = 0.0              # filtered feedback velocity


class Controller:
    """Single-leg controller driven by the 1 kHz ticker and gait events."""

    def __init__(self, config: ControllerConfig, tendon: TendonModel):
        self.cfg = config
        self.tendon = tendon
        self.state = ControllerState()

    # -- event interface ----------------------------------------------------

    def on_event(self, event: GaitEvent,
                 new_params: Optional[GaussianParams] = None) -> None:
        st = self.state
        if st.aborted:
            if event.kind is GaitEventKind.FOOT_CONTACT:
                st.gc_count = event.gc_index + 1
            return
        if st.mode is ControlMode.PRETIGHTEN:
            log.warning("gait event during pretighten ignored: %s", event)
            return
        if event.kind is GaitEventKind.FOOT_CONTACT:
            if st.mode is ControlMode.STANCE:
                log.warning("out-of-order FootContact ignored (already in stance)")
                return
            st.gc_count = event.gc_index + 1
            if new_params is not None:
                st.active_params = new_params
            st.e_l_integral = 0.0
            st.engaged = False
            st.stance_peak_log = None
            if st.aborted:
                return
            if event.gc_index < self.cfg.silent_cycles:
                st.mode = ControlMode.SILENT
            else:
                st.mode = ControlMode.STANCE
        else:  # FOOT_OFF
            if st.mode is ControlMode.SWING:
                log.warning("out-of-order FootOff ignored (already in swing)")
                return
            if st.aborted or st.mode is ControlMode.SILENT:
                return
            # Quasi-slack length recurrence from the previous swing's peak force.
            if st.have_swing_history:
                st.l_swing += ((st.f_swing_max - self.cfg.swing_target_force)
                               / self.tendon.k_all)
            else:
                st.l_swing = tendon_length(self.tendon, st.last_theta_df,
                                           self.cfg.swing_target_force)
                st.have_swing_history = True
            st.f_swing_max = 0.0
            st.e_l_integral = 0.0
            st.mode = ControlMode.SWING

    # -- per-tick interface --------------------------------------------------

    def tick(self, kin: KinematicSample, f_meas: float, l_meas: float,
             l_meas_rate: float, motor_pos: float, dt: float) -> VelocityCommand:
        st = self.state
        st.last_l_meas = l_meas
        st.last_theta_df = kin.theta_df
        if self.safety_check(f_meas, motor_pos) is SafetyStatus.ABORT:
            return self._tick_abort(l_meas)
        mode = st.mode
        if mode is ControlMode.PRETIGHTEN:
            return self._tick_pretighten(kin, f_meas, l_meas)
        if mode is ControlMode.SILENT:
            return self._hold_slack(l_meas, l_meas_rate, dt, CommandSource.RELEASE)
        if mode is ControlMode.SWING:
            return self.tick_swing(l_meas, l_meas_rate, dt, f_meas)
        return self.tick_stance(kin, f_meas, l_meas, dt)

    def safety_check(self, f_meas: float, motor_pos: float) -> SafetyStatus:
        st = self.state
        if st.aborted:
            return SafetyStatus.ABORT
        if f_meas > self.cfg.force_ceiling or abs(motor_pos) > self.cfg.position_limit_mm:
            log.error("safety abort: f=%.1f N pos=%.1f mm", f_meas, motor_pos)
            st.aborted = True
            return SafetyStatus.ABORT
        return SafetyStatus.OK

    def tick_swing(self, l_meas: float, l_meas_rate: float, dt: float,
                   f_meas: float = 0.0) -> VelocityCommand:
        st = self.state
        if f_meas > st.f_swing_max:
            st.f_swing_max = f_meas
        return self._pi_toward(st.l_swing, l_meas, l_meas_rate, dt,
                               CommandSource.SWING_PI)

    def tick_stance(self, kin: KinematicSample, f_meas: float, l_meas: float,
                    dt: float) -> VelocityCommand:
        st = self.state
        cfg = self.cfg
        p = st.active_params
        if p is None:
            log.warning("stance tick without profile parameters; holding")
            return VelocityCommand(0.0, CommandSource.HOLD)
        f_des = eval_force(p, kin.theta_sk)
        l_des = tendon_length(self.tendon, kin.theta_df, f_des)
        if not st.engaged:
            # Take up the swing slack, then probe until the cable is
            # physically taut: only a taut measurement identifies migration.
            if f_meas >= cfg.engage_force:
                st.engaged = True
                estimate_migration(self.tendon, l_meas, kin.theta_df, f_meas)
                l_des = tendon_length(self.tendon, kin.theta_df, f_des)
            else:
                gap = l_meas - l_des
                v = max(cfg.probe_rate,
                        min(cfg.tighten_gain * (gap - cfg.probe_margin_mm)
                            + cfg.probe_rate, cfg.v_max))
                return VelocityCommand(v, CommandSource.STANCE_FBFF)
        if f_meas > (st.stance_peak_log[0] if st.stance_peak_log else -math.inf):
            st.stance_peak_log = (f_meas, kin.theta_sk)
        v_fb = self._feedback_velocity(f_des - f_meas, dt)
        f_rate = eval_force_rate(p, kin.theta_sk, kin.theta_sk_rate)
        v_ff = (self.tendon.lever_arm_r * math.radians(kin.theta_df_rate)
                - f_rate / self.tendon.k_all)
        v = v_fb - v_ff
        if kin.theta_sk <= p.mu:
            # Engagement overshoot: the probe meets a taut length moving at
            # full gait speed, so contact lands a few newtons hard; shed the
            # excess quickly while the desired force is still near zero.
            if f_des < 0.25 * p.amp:
                v -= min(100.0, 25.0 * max(0.0, f_meas - f_des - 1.0))
        elif f_des < cfg.tail_release_force and f_meas > 1.0:
            # Profile finished on the falling branch: shed the residual
            # tension carried by the motor lag so the cable crosses
            # foot-off near-slack.
            v -= cfg.tail_release_rate
        return VelocityCommand(self._clamp(v), CommandSource.STANCE_FBFF)

    # -- helpers --------------------------------------------------------------

    def _feedback_velocity(self, force_error: float, dt: float) -> float:
        """Realize 1/(M s + B) by backward Euler; M = 0 degenerates to 1/B."""
        cfg = self.cfg
        if cfg.map_m <= 0.0:
            self.state.v_fb_state = force_error / cfg.map_b
        else:
            self.state.v_fb_state = ((cfg.map_m * self.state.v_fb_state
                                      + dt * force_error)
                                     / (cfg.map_m + cfg.map_b * dt))
        return self.state.v_fb_state

    def _pi_toward(self, target_l: float, l_meas: float, l_meas_rate: float,
                   dt: float, source: CommandSource) -> VelocityCommand:
        st = self.state
        cfg = self.cfg
        e = target_l - l_meas
        st.e_l_integral += e * dt
        st.e_l_integral = max(-cfg.integral_clamp,
                              min(cfg.integral_clamp, st.e_l_integral))
        v = -(cfg.kp * e + cfg.ki * st.e_l_integral - cfg.kd * l_meas_rate)
        return VelocityCommand(self._clamp(v), source)

    def _hold_slack(self, l_meas: float, l_meas_rate: float, dt: float,
                    source: CommandSource) -> VelocityCommand:
        return self._pi_toward(self.state.release_target, l_meas,
                               l_meas_rate, dt, source)

    def _tick_pretighten(self, kin: KinematicSample, f_meas: float,
                         l_meas: float) -> VelocityCommand:
        st = self.state
        cfg = self.cfg
        if f_meas < cfg.pretighten_force:
            return VelocityCommand(cfg.pretighten_rate, CommandSource.STANCE_FBFF)
        # Baseline confirmed: back out the zero-force length from this reading.
        self.tendon.baseline_c = (l_meas + f_meas / self.tendon.k_all
                                  - self.tendon.lever_arm_r
                                  * math.radians(kin.theta_df))
        st.baseline_confirmed = True
        st.release_target = l_meas + cfg.release_slack_mm
        st.mode = ControlMode.SILENT
        return VelocityCommand(0.0, CommandSource.HOLD)

    def _tick_abort(self, l_meas: float) -> VelocityCommand:
        # Latched: pay the cable out to the slack reference, then zero the motor.
        if l_meas < self.state.release_target - 0.5:
            return VelocityCommand(-self.cfg.v_max, CommandSource.RELEASE)
        return VelocityCommand(0.0, CommandSource.HOLD)

    def _clamp(self, v: float) -> float:
        return max(-self.cfg.v_max, min(self.cfg.v_max, v))
