"""Mesh comparison: default scenario, min_hops=3, few seeds, timing."""
import time

from qnetsim.params import DEFAULT_PARAMS
from qnetsim.sim import Simulation
from qnetsim.topology import generate_topology
from qnetsim.workload import WorkloadSpec, generate_workload

P = DEFAULT_PARAMS
graph = generate_topology(P.node_count, P.area_side_km, P.edge_density, seed=1,
                          memory_slots=P.memory_slots)
spec = WorkloadSpec(min_hops=3)

policies = ["fixed_tree", "scoring", "swap_asap", "longest_hop"]
totals = {p: [] for p in policies}
for seed in (1, 2, 3):
    reqs = generate_workload(graph, spec, seed)
    hops = [r for r in reqs]
    for pol in policies:
        t0 = time.time()
        sim = Simulation(graph, list(reqs), P, policy=pol, master_seed=seed)
        res = sim.run(P.duration_s)
        dt = time.time() - t0
        states = [r.final_state for r in res.requests]
        fids = [round(r.mean_fidelity, 4) if r.mean_fidelity else None
                for r in res.requests]
        totals[pol].append(res.total_delivered)
        print(f"seed={seed} {pol:12s} total={res.total_delivered:6d} "
              f"wall={dt:5.1f}s states={states}")
        if pol == "scoring":
            print(f"    fidelities={fids}")
            print(f"    per-req delivered={[r.delivered for r in res.requests]}")

print()
for pol in policies:
    print(f"{pol:12s} mean={sum(totals[pol])/len(totals[pol]):8.1f} "
          f"per-seed={totals[pol]}")
fx = sum(totals["fixed_tree"])
sc = sum(totals["scoring"])
print(f"\nscoring/fixed_tree = {sc/fx:.3f}" if fx else "fixed zero")
