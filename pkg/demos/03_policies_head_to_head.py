"""
Swap policies head to head
==========================

Run the same workload on the same mesh under different swap policies and
compare delivered pairs, fidelity, and discards. The planned-tree executor
follows the offline plan to the letter; the adaptive policies reorder
fusions based on what is actually on hand.
"""
from qnetsim import DEFAULT_PARAMS, Scenario, WorkloadSpec, run_scenario
from dataclasses import replace

base = Scenario(
    name="head2head",
    params=DEFAULT_PARAMS.with_updates(node_count=30, duration_s=30.0),
    workload=WorkloadSpec(n_requests=4, inter_arrival_s=2.0, min_hops=3),
    topology_seed=3,
)

print(f"{'policy':12s} {'delivered':>9s} {'per s':>7s} {'fidelity':>8s} "
      f"{'discards':>8s}")
for policy in ("fixed_tree", "swap_asap", "oldest", "longest_hop", "scoring"):
    rows = run_scenario(replace(base, policy=policy), seeds=[1, 2])
    delivered = sum(r.delivered_total for r in rows)
    rate = sum(r.rate_per_s for r in rows) / len(rows)
    fid = sum(r.mean_fidelity for r in rows) / len(rows)
    discards = sum(r.discards for r in rows)
    print(f"{policy:12s} {delivered:9d} {rate:7.1f} {fid:8.4f} {discards:8d}")
