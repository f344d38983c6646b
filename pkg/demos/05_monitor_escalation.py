"""
Execution monitor and its escalation ladder
===========================================

The transport layer watches each request's delivered rate and fidelity
against its targets. Repeated misses escalate: first the targets are
nudged, then the request is suspended, then replanned, and finally
terminated. This drives the monitor with a synthetic delivery log so every
rung is visible without running a network.
"""
from qnetsim.transport import (
    MonitorConfig, MonitorState, build_window_stats, monitor_step,
)

cfg = MonitorConfig()
state = MonitorState()
rate_target = 100.0          # pairs per second the application asked for
started_s = 0.0

# a healthy burst, then the link goes quiet for good
deliveries = [(0.01 * k, 0.95) for k in range(600)]  # 100/s until t=6 s

print(f"{'t':>5s}  {'win rate':>8s}  {'action':<16s} failures")
log = []
for tick in range(1, 61):
    now = tick * cfg.tick_s
    seen = [(t, f) for t, f in deliveries if t <= now]
    stats = build_window_stats(seen, now, cfg.window_s)
    action = monitor_step(cfg, state, now, started_s, stats,
                          rate_target=rate_target, min_fidelity=0.8)
    rate = stats.window_count / cfg.window_s
    if action.kind not in ("none", "continue") or tick % 8 == 0:
        extra = ""
        if action.kind == "adjust_rate":
            extra = f" (knob -> {state.rate_knob:.2f})"
        if action.kind == "suspend":
            extra = f" (until t={action.until_s:.1f} s)"
        print(f"{now:5.1f}  {rate:8.1f}  {action.kind:<16s} "
              f"{state.failures}{extra}")
    if action.kind == "terminate":
        print("request abandoned: the corrective ladder ran out")
        break
