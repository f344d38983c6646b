"""
Werner pairs: decay, swapping, purification
===========================================

A stored pair loses fidelity as it ages, swapping compounds the loss of
both inputs, and purification spends extra copies to win fidelity back.
All three effects on one axis: the Werner mixing weight.
"""
from qnetsim import DEFAULT_PARAMS
from qnetsim.werner import (
    WernerState, fidelity_to_weight, purify_output_fidelity,
    purify_success_probability, swap_weights, weight_at, weight_to_fidelity,
)

noise = DEFAULT_PARAMS.noise

print("storage decay of a pair born at fidelity 0.99:")
w0 = fidelity_to_weight(0.99)
for age_s in (0.0, 0.5, 1.0, 2.0, 5.0):
    st = WernerState(w0, 0)
    w = weight_at(st, int(age_s * 1e6), noise)
    print(f"  age {age_s:4.1f} s   fidelity {weight_to_fidelity(w):.4f}")

print()
print("swapping compounds the loss of both inputs:")
for f in (0.99, 0.95, 0.90):
    w = fidelity_to_weight(f)
    chain = w
    for hops in (2, 3, 4):
        chain = swap_weights(chain, w)
        print(f"  {hops} hops of F={f:.2f} links -> "
              f"F={weight_to_fidelity(chain):.4f}")
    print()

print("one purification round on two equal copies:")
for f in (0.70, 0.80, 0.90, 0.99):
    p = purify_success_probability(f, f)
    out = purify_output_fidelity(f, f)
    print(f"  F={f:.2f}: succeeds with p={p:.4f}, yields F={out:.4f}")
