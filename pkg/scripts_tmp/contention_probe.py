"""Contention sweep: does request multiplexing flip fixed vs adaptive?"""
import sys
import time

from qnetsim.params import DEFAULT_PARAMS
from qnetsim.sim import Simulation
from qnetsim.topology import generate_topology
from qnetsim.workload import WorkloadSpec, generate_workload

P = DEFAULT_PARAMS
graph = generate_topology(P.node_count, P.area_side_km, P.edge_density, seed=1,
                          memory_slots=P.memory_slots)

n_req = int(sys.argv[1]) if len(sys.argv) > 1 else 30
gap = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0
seeds = [int(s) for s in (sys.argv[3].split(",") if len(sys.argv) > 3
                          else ["1", "2"])]
spec = WorkloadSpec(n_requests=n_req, inter_arrival_s=gap, min_hops=3)
print(f"n_requests={n_req} inter_arrival={gap}s seeds={seeds}")

policies = (sys.argv[4].split(",") if len(sys.argv) > 4
            else ["fixed_tree", "scoring", "swap_asap"])
totals = {p: [] for p in policies}
for seed in seeds:
    reqs = generate_workload(graph, spec, seed)
    for pol in policies:
        t0 = time.time()
        sim = Simulation(graph, list(reqs), P, policy=pol, master_seed=seed)
        res = sim.run(P.duration_s)
        dt = time.time() - t0
        c = res.counters
        states = {}
        for r in res.requests:
            states[r.final_state] = states.get(r.final_state, 0) + 1
        totals[pol].append(res.total_delivered)
        print(f"seed={seed} {pol:11s} total={res.total_delivered:6d} "
              f"wall={dt:5.1f}s states={states} "
              f"discards={c.get('discards', 0):6d} "
              f"deferrals={c.get('link_deferrals', 0):7d} "
              f"plan_fail={c.get('plans_failed', 0)} "
              f"fid={res.mean_fidelity:.4f}")

print()
fx = sum(totals["fixed_tree"])
for pol in policies:
    print(f"{pol:11s} sum={sum(totals[pol]):7d} ratio_vs_fixed="
          f"{sum(totals[pol])/fx:.3f}")
