"""
Random topologies and swap planning
===================================

Generate a Waxman mesh, pick a far-apart node pair, and plan the chain of
entanglement swaps that connects them: route, fusion tree, purification
rounds, and the latency and fidelity the planner expects.
"""
from qnetsim import DEFAULT_PARAMS, generate_topology, plan_for_request
from qnetsim.planner import plan_to_dict

params = DEFAULT_PARAMS
graph = generate_topology(node_count=40, side_km=100.0, density=0.1, seed=7,
                          memory_slots=params.memory_slots)
print(f"network: {len(graph.nodes)} nodes, {len(graph.links)} links, "
      f"density {graph.density:.3f}")

# the most distant pair by hop count makes the most interesting plan
best = None
for src in (n.id for n in graph.nodes):
    dist = graph.hop_distances_from(src)
    for dst, hops in dist.items():
        if dst > src and (best is None or hops > best[2]):
            best = (src, dst, hops)
src, dst, hops = best
print(f"planning {src} -> {dst} ({hops} hops apart)")

plan = plan_for_request(graph, src, dst, params, request_id="demo",
                        min_fidelity=0.7)
doc = plan_to_dict(plan)
print(f"route: {doc['route']}")
print(f"expected latency at the root: {plan.root_latency_s * 1e3:.1f} ms")
print(f"expected fidelity at the root: {plan.root_fidelity:.4f}")
print(f"latency budget for discards: {plan.l_target_s * 1e3:.1f} ms")
if any(doc["purify_rounds"].values()):
    rounds = {k: v for k, v in doc["purify_rounds"].items() if v}
    print(f"purification rounds per span: {rounds}")


def show(op, indent=0):
    pad = "  " * indent
    if op["op"] == "generate":
        print(f"{pad}generate ({op['u']},{op['v']})")
        return
    if op["op"] == "purify":
        print(f"{pad}purify ({op['u']},{op['v']}) x{op['rounds']}")
        show(op["child"], indent + 1)
        return
    print(f"{pad}swap at {op['at']} -> ({op['u']},{op['v']})")
    show(op["left"], indent + 1)
    show(op["right"], indent + 1)


print("fusion tree:")
show(doc["tree"])
