"""Analytic pair-quality model against explicit density-matrix references."""
import math

import pytest

from qnetsim.params import NoiseParams
from qnetsim import werner
from qnetsim.werner import WernerState

from oracles import purify_oracle, swap_oracle

NOISE = NoiseParams(depolar_rate=0.01)


def test_fidelity_weight_roundtrip():
    for f in (0.25, 0.5, 0.8, 0.99, 1.0):
        w = werner.fidelity_to_weight(f)
        assert werner.weight_to_fidelity(w) == pytest.approx(f, abs=1e-15)
    assert werner.fidelity_to_weight(1.0) == pytest.approx(1.0)
    assert werner.fidelity_to_weight(0.25) == pytest.approx(0.0)
    assert WernerState(1.0, 0).fidelity == 1.0
    assert WernerState(0.0, 0).fidelity == 0.25


def test_decay_halves_weight_at_analytic_half_life():
    # w(t) = w0 * exp(-2 r t) halves at t = ln 2 / (2 r)
    half_life_s = math.log(2.0) / (2.0 * NOISE.depolar_rate)
    state = WernerState(0.9, born_at=0)
    w = werner.weight_at(state, int(half_life_s * 1e6), NOISE)
    assert w == pytest.approx(0.45, rel=1e-6)


def test_decay_composes_multiplicatively():
    state = WernerState(0.87, born_at=0)
    once = werner.decay(werner.decay(state, 123_456, NOISE), 876_544, NOISE)
    direct = werner.decay(state, 1_000_000, NOISE)
    assert once.weight == pytest.approx(direct.weight, rel=1e-15)
    assert once.born_at == direct.born_at == 1_000_000


def test_decay_rejects_negative_interval():
    with pytest.raises(ValueError):
        werner.decay(WernerState(0.9, 0), -1, NOISE)


def test_zero_interval_is_identity():
    state = WernerState(0.73, born_at=5)
    assert werner.decay(state, 0, NOISE) == state


@pytest.mark.parametrize("f1", [0.55, 0.65, 0.75, 0.85, 0.95])
@pytest.mark.parametrize("f2", [0.6, 0.7, 0.8, 0.9])
def test_swap_matches_bell_projection(f1, f2):
    p, f_out = swap_oracle(f1, f2)
    # each Bell outcome is equally likely regardless of input quality
    assert p == pytest.approx(0.25, abs=1e-12)
    w_out = werner.swap_weights(werner.fidelity_to_weight(f1),
                                werner.fidelity_to_weight(f2))
    assert werner.weight_to_fidelity(w_out) == pytest.approx(f_out, abs=1e-12)


def test_swap_fidelity_keeps_latest_birth_time():
    a = WernerState(0.9, born_at=100)
    b = WernerState(0.8, born_at=300)
    out = werner.swap_fidelity(a, b)
    assert out.weight == pytest.approx(0.72, abs=1e-15)
    assert out.born_at == 300


@pytest.mark.parametrize("f1", [0.55, 0.65, 0.75, 0.85, 0.95])
@pytest.mark.parametrize("f2", [0.6, 0.7, 0.8, 0.9])
def test_purify_matches_density_matrix_reference(f1, f2):
    p_ref, f_ref = purify_oracle(f1, f2)
    assert werner.purify_success_probability(f1, f2) == pytest.approx(
        p_ref, abs=1e-12)
    assert werner.purify_output_fidelity(f1, f2) == pytest.approx(
        f_ref, abs=1e-12)


def test_purify_fixed_point_values():
    # two copies at 0.8: handy frozen anchors for the closed forms
    p = werner.purify_success_probability(0.8, 0.8)
    f = werner.purify_output_fidelity(0.8, 0.8)
    assert p == pytest.approx(0.7688888888888888, abs=1e-12)
    assert f == pytest.approx(0.8381502890173411, abs=1e-12)


def test_purify_improves_above_half():
    for f in (0.6, 0.75, 0.9, 0.99):
        assert werner.purify_output_fidelity(f, f) > f


def test_purify_helper_returns_probability_and_state():
    a = WernerState(werner.fidelity_to_weight(0.8), born_at=10)
    b = WernerState(werner.fidelity_to_weight(0.8), born_at=40)
    p, out = werner.purify(a, b)
    assert p == pytest.approx(0.7688888888888888, abs=1e-12)
    assert out.fidelity == pytest.approx(0.8381502890173411, abs=1e-12)
    assert out.born_at == 40
