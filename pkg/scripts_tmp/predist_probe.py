"""Trace stock growth vs demand planning in the once-mode scenario."""
from qnetsim.params import DEFAULT_PARAMS
from qnetsim.sim import Simulation
from qnetsim.topology import Link, NetworkGraph, Node
from qnetsim.workload import (EntanglementRequest, MAX_RATE_MIN_FIDELITY,
                              PredistConfig)


def line_graph(n, spacing_km=20.0, slots=5):
    nodes = [Node(i, i * spacing_km, 0.0, memory_slots=slots)
             for i in range(n)]
    links = [Link(i, i + 1, spacing_km) for i in range(n - 1)]
    return NetworkGraph(nodes, links, side_km=max(n * spacing_km, 1.0))


g = line_graph(4)
cfg = PredistConfig(mode="once", stock_target=3, tick_s=0.05)
r = EntanglementRequest("req-0", 0, 3, MAX_RATE_MIN_FIDELITY, 2.0,
                        min_fidelity=0.6)
sim = Simulation(g, [r], DEFAULT_PARAMS, predist=cfg,
                 superlink_spans=[(0, 2)], master_seed=1)

orig_bank = sim._bank_stock
def bank(pr, rec, node):
    orig_bank(pr, rec, node)
    print(f"t={sim._engine.now/1e6:8.4f}s banked span={rec.endpoints} "
          f"stock={ {s: len(v) for s, v in sim._stock.items()} }")
sim._bank_stock = bank

orig_plan = sim._plan_request
def plan(rr, exclude_links=()):
    p = orig_plan(rr, exclude_links)
    if p is not None and not rr.is_predist:
        print(f"t={sim._engine.now/1e6:8.4f}s plan {rr.request_id}: "
              f"route={p.route} cached={p.cached_spans} "
              f"offer={sim._stock_offer()}")
    return p
sim._plan_request = plan

res = sim.run(6.0)
print("counters:", dict(res.counters))
print("stock at end:", {s: len(v) for s, v in sim._stock.items()})
