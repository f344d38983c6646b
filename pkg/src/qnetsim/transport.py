"""Request health monitoring and corrective control.

Each active request is watched on a fixed tick. Deliveries inside a sliding
window give a rate and mean-fidelity estimate; the monitor compares them to
the request's targets inside a relative dead-band and escalates through a
fixed ladder when the request keeps missing:

    overshoot   -> damp the allocation knob (multiplicative, floored)
    1st, 2nd    -> nudge a knob (rate first, then fidelity)
    3rd         -> suspend the request briefly
    4th         -> replan the route (avoiding the old links on rate misses)
    5th         -> terminate the request

Hitting the dead-band resets the ladder. Knobs are actuation outputs: the
simulation scales the request's generation share by ``rate_knob`` and its
purification floor by ``fidelity_knob``; the monitor always judges against
the request's own base targets so the goalposts never move.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence


@dataclass(frozen=True)
class MonitorConfig:
    min_samples: int = 5          # lifetime deliveries before judging at all
    window_s: float = 2.0         # measurement window and minimum request age
    action_gap_s: float = 2.0     # minimum spacing between corrective actions
    tolerance: float = 0.1        # relative dead-band around each target
    step: float = 0.1             # additive knob nudge per adjustment
    overshoot_ratio: float = 1.3  # damp when rate exceeds target by this factor
    damp_scale: float = 0.9
    knob_floor: float = 0.5       # knobs never fall below half the original
    suspend_s: float = 5.0
    replan_on_first_failure: bool = False
    tick_s: float = 0.5


@dataclass
class MonitorState:
    failures: int = 0
    t_last_action_s: float = float("-inf")
    suspended_until_s: float = float("-inf")
    rate_knob: float = 1.0
    fidelity_knob: float = 1.0
    terminated: bool = False


@dataclass(frozen=True)
class WindowStats:
    delivered_total: int
    window_count: int
    window_mean_fidelity: Optional[float]


def build_window_stats(deliveries: Sequence[tuple[float, float]],
                       now_s: float, window_s: float) -> WindowStats:
    """Summarize (time, fidelity) deliveries over the trailing window."""
    recent = [f for t, f in deliveries if t > now_s - window_s]
    mean = sum(recent) / len(recent) if recent else None
    return WindowStats(len(deliveries), len(recent), mean)


# corrective action kinds
NONE = "none"
CONTINUE = "continue"
DAMP = "damp"
ADJUST_RATE = "adjust_rate"
ADJUST_FIDELITY = "adjust_fidelity"
SUSPEND = "suspend"
REPLAN = "replan"
TERMINATE = "terminate"


@dataclass(frozen=True)
class CorrectiveAction:
    kind: str
    direction: int = 0             # +1 knob up, -1 knob down, 0 n/a
    exclude_old_links: bool = False
    until_s: float = 0.0


_NONE = CorrectiveAction(NONE)
_CONTINUE = CorrectiveAction(CONTINUE)


def monitor_step(cfg: MonitorConfig, state: MonitorState, now_s: float,
                 started_s: float, stats: WindowStats,
                 rate_target: Optional[float],
                 min_fidelity: Optional[float],
                 fidelity_target: Optional[float] = None) -> CorrectiveAction:
    """One monitoring tick for one request. Mutates ``state``.

    ``rate_target`` and ``fidelity_target`` are held inside a two-sided
    dead-band (overshooting wastes resources, so it also counts as a miss);
    ``min_fidelity`` is a floor, missed only from below. A request supplies
    whichever thresholds its requirement defines.
    """
    if state.terminated:
        return _NONE
    if now_s < state.suspended_until_s:
        return _NONE
    if stats.delivered_total < cfg.min_samples:
        return _NONE
    if now_s - started_s < cfg.window_s:
        return _NONE
    if now_s - state.t_last_action_s < cfg.action_gap_s:
        return _NONE

    rate = stats.window_count / cfg.window_s
    fid = stats.window_mean_fidelity

    if rate_target is not None and rate > cfg.overshoot_ratio * rate_target:
        state.rate_knob = max(state.rate_knob * cfg.damp_scale, cfg.knob_floor)
        state.t_last_action_s = now_s
        return CorrectiveAction(DAMP, direction=-1)

    rate_ok = rate_target is None \
        or abs(rate - rate_target) <= cfg.tolerance * rate_target
    fid_low = False
    fid_high = False
    if fidelity_target is not None:
        fid_low = fid is None \
            or fid < fidelity_target * (1.0 - cfg.tolerance)
        fid_high = fid is not None \
            and fid > fidelity_target * (1.0 + cfg.tolerance)
    elif min_fidelity is not None:
        fid_low = fid is None \
            or fid < min_fidelity * (1.0 - cfg.tolerance)
    if rate_ok and not fid_low and not fid_high:
        state.failures = 0
        return _CONTINUE

    rate_low = (rate_target is not None and not rate_ok and rate < rate_target)
    state.failures += 1
    state.t_last_action_s = now_s

    if cfg.replan_on_first_failure and state.failures == 1:
        return CorrectiveAction(REPLAN, exclude_old_links=rate_low)

    if state.failures <= 2:
        if not rate_ok:
            direction = 1 if rate < rate_target else -1
            state.rate_knob = max(state.rate_knob + direction * cfg.step,
                                  cfg.knob_floor)
            return CorrectiveAction(ADJUST_RATE, direction=direction)
        direction = -1 if fid_high else 1
        state.fidelity_knob = max(state.fidelity_knob + direction * cfg.step,
                                  cfg.knob_floor)
        return CorrectiveAction(ADJUST_FIDELITY, direction=direction)
    if state.failures == 3:
        state.suspended_until_s = now_s + cfg.suspend_s
        return CorrectiveAction(SUSPEND, until_s=state.suspended_until_s)
    if state.failures == 4:
        return CorrectiveAction(REPLAN, exclude_old_links=rate_low)
    state.terminated = True
    return CorrectiveAction(TERMINATE)


# ---------------------------------------------------------------------------
# predistribution stock controller


def predist_controller_step(stock: int, active: bool,
                            low_water: int, target: int) -> bool:
    """Hysteresis control of a stock-replenishment task: returns new state."""
    if not active and stock < low_water:
        return True
    if active and stock >= target:
        return False
    return active
