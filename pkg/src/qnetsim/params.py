"""Physical and scale parameters shared across the simulator."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

US_PER_S = 1_000_000
US_PER_MS = 1_000

# Sentinel request tag for pre-generated cache pairs; such pairs may be
# consumed by any request.
PREDISTRIBUTED = "predistributed"


@dataclass(frozen=True)
class NoiseParams:
    """Memory noise model. Only depolarization affects the Werner weight;
    the dephasing figure is carried along for configuration completeness."""

    depolar_rate: float = 0.01   # 1/s
    dephase_rate: float = 1000.0  # 1/s, recorded but unused by the analytic model


@dataclass(frozen=True)
class SimParams:
    """Deck of knobs for one simulation run.

    Times are microseconds unless the field name says otherwise. Probabilities
    are per attempt.
    """

    # entanglement swapping (node-level Bell measurement)
    swap_success: float = 0.4
    swap_op_us: int = 10
    # optical Bell measurement at the link midpoint
    bsm_success: float = 0.4
    bsm_op_us: int = 10
    herald_success: float = 0.2   # post-BSM heralding efficiency (bsm_success / 2)
    # photon-pair attempt machinery
    attempt_period_us: int = 50
    photon_success: float = 0.33  # per-photon emission+capture probability
    attenuation_km: float = 20.0  # fiber attenuation length
    # memory noise
    noise: NoiseParams = field(default_factory=NoiseParams)
    # deployment geometry
    area_side_km: float = 100.0
    node_count: int = 100
    edge_density: float = 0.1
    memory_slots: int = 5
    # classical channel
    classical_speed_km_s: float = 2.0e5
    # run scale
    duration_s: float = 100.0
    # fresh link-pair quality (fidelity of a just-heralded pair)
    link_fidelity: float = 0.99
    # demand throttling: a generation task pauses while this many of its
    # pairs sit unconsumed on the link
    outstanding_cap: int = 2
    # discard leniency decay per tree depth
    discard_rho: float = 0.7

    def with_updates(self, **kw) -> "SimParams":
        return replace(self, **kw)


DEFAULT_PARAMS = SimParams()
