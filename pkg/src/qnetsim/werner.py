"""Analytic Werner-state bookkeeping.

A pair's quality is a single weight w in [0, 1]: the state is the perfect Bell
pair with probability w and maximally mixed otherwise, giving fidelity
F = (3w + 1) / 4. Depolarizing memories shrink w exponentially in time; a
Bell-measurement swap multiplies the two weights; recurrence purification
follows the standard two-pair bilateral-CNOT statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .params import NoiseParams, US_PER_S


@dataclass(frozen=True, slots=True)
class WernerState:
    weight: float
    born_at: int  # microseconds

    @property
    def fidelity(self) -> float:
        return (3.0 * self.weight + 1.0) / 4.0


def fidelity_to_weight(f: float) -> float:
    return (4.0 * f - 1.0) / 3.0


def weight_to_fidelity(w: float) -> float:
    return (3.0 * w + 1.0) / 4.0


def decay_factor(dt_us: int, noise: NoiseParams) -> float:
    # two qubits depolarizing independently at depolar_rate each
    return math.exp(-2.0 * noise.depolar_rate * (dt_us / US_PER_S))


def decay(state: WernerState, dt_us: int, noise: NoiseParams) -> WernerState:
    if dt_us < 0:
        raise ValueError("negative decay interval")
    return WernerState(state.weight * decay_factor(dt_us, noise),
                       state.born_at + dt_us)


def weight_at(state: WernerState, now_us: int, noise: NoiseParams) -> float:
    """Current weight, decayed from the state's reference time."""
    return state.weight * decay_factor(now_us - state.born_at, noise)


def fidelity_at(state: WernerState, now_us: int, noise: NoiseParams) -> float:
    return weight_to_fidelity(weight_at(state, now_us, noise))


def swap_weights(w_left: float, w_right: float) -> float:
    return w_left * w_right


def swap_fidelity(a: WernerState, b: WernerState) -> WernerState:
    """Pair produced by a Bell measurement joining pairs a and b.

    Inputs must already be decayed to the measurement time by the caller.
    """
    return WernerState(a.weight * b.weight, max(a.born_at, b.born_at))


def purify_success_probability(f1: float, f2: float) -> float:
    """Probability that the two-pair recurrence step keeps the first pair."""
    return (f1 * f2
            + f1 * (1.0 - f2) / 3.0
            + (1.0 - f1) * f2 / 3.0
            + 5.0 * (1.0 - f1) * (1.0 - f2) / 9.0)


def purify_output_fidelity(f1: float, f2: float) -> float:
    p = purify_success_probability(f1, f2)
    return (f1 * f2 + (1.0 - f1) * (1.0 - f2) / 9.0) / p


def purify(a: WernerState, b: WernerState) -> tuple[float, WernerState]:
    """One recurrence round consuming pair b to improve pair a.

    Returns (success probability, state of the surviving pair on success).
    Inputs must already be decayed to the measurement time.
    """
    f1, f2 = a.fidelity, b.fidelity
    p = purify_success_probability(f1, f2)
    f_out = (f1 * f2 + (1.0 - f1) * (1.0 - f2) / 9.0) / p
    return p, WernerState(fidelity_to_weight(f_out), max(a.born_at, b.born_at))
