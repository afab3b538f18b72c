"""Cycle-level simulation of a streaming pipeline with bounded FIFOs.

Node firing model: a node fires when every input FIFO holds `consume`
tokens and its previous burst has fully left the staging buffer; it then
occupies `latency` cycles and stages `produce` tokens per output edge.
Staged tokens drain into each FIFO as space allows, and the node cannot
start a new firing until the whole burst has fit - this reproduces the
stall of a producer whose burst is too large for its consumer to absorb
in time. Sources fire against a finite token workload; sinks swallow
tokens. Everything is deterministic: one event loop, fixed node order.

FIFO sizing follows the probe procedure: run once with effectively
unbounded depths, read off each FIFO's largest saturation, then verify a
run at exactly those depths completes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

DEFAULT_CYCLE_CAP = 10_000_000


class GraphError(ValueError):
    """Malformed stream graph; distinct from a simulated deadlock."""


@dataclass(frozen=True)
class Folding:
    """SIMD/PE folding of a matrix operator.

    Output channels are distributed across PEs and input channels across
    SIMD lanes, so both must divide evenly.
    """

    simd: int
    pe: int
    in_ch: int
    out_ch: int
    k: int = 1

    def cycles_per_output(self) -> int:
        if self.in_ch % self.simd != 0:
            raise GraphError(f"in_ch {self.in_ch} not a multiple of simd {self.simd}")
        if self.out_ch % self.pe != 0:
            raise GraphError(f"out_ch {self.out_ch} not a multiple of pe {self.pe}")
        return (self.in_ch // self.simd) * (self.out_ch // self.pe) * self.k * self.k


@dataclass
class StreamNode:
    """One pipeline stage: firing rates, latency, optional folding."""

    id: str
    consume: int = 1
    produce: int = 1
    latency: int = 1
    folding: Folding | None = None
    outputs_per_frame: int = 1


@dataclass
class FifoEdge:
    id: str
    src: str
    dst: str
    depth: int = 1


@dataclass
class SimReport:
    """Simulation outcome plus per-edge saturation and stall accounting."""

    outcome: str  # "completed" | "deadlock" | "cap_exceeded"
    cycles: int
    max_occupancy: dict[str, int]
    delivered: int
    stall_cycles: dict[str, int]
    blocked_nodes: tuple[str, ...] = ()
    full_edges: tuple[str, ...] = ()
    empty_edges: tuple[str, ...] = ()

    @property
    def completed(self) -> bool:
        return self.outcome == "completed"

    def to_json_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "completed": self.completed,
            "cycles": self.cycles,
            "delivered": self.delivered,
            "max_occupancy": dict(sorted(self.max_occupancy.items())),
            "stall_cycles": dict(sorted(self.stall_cycles.items())),
            "blocked_nodes": list(self.blocked_nodes),
            "full_edges": list(self.full_edges),
            "empty_edges": list(self.empty_edges),
        }


class StreamGraph:
    """Nodes joined by bounded FIFO edges; sources feed, sinks drain."""

    def __init__(self):
        self.nodes: dict[str, StreamNode] = {}
        self.edges: dict[str, FifoEdge] = {}

    def add_node(self, node_id: str, **kwargs) -> StreamNode:
        if node_id in self.nodes:
            raise GraphError(f"duplicate node id {node_id!r}")
        node = StreamNode(node_id, **kwargs)
        if node.consume < 1 or node.produce < 1 or node.latency < 1:
            raise GraphError(f"node {node_id}: consume/produce/latency must be >= 1")
        self.nodes[node_id] = node
        return node

    def connect(self, src: str, dst: str, depth: int = 1, edge_id: str | None = None) -> FifoEdge:
        if src not in self.nodes or dst not in self.nodes:
            raise GraphError(f"edge references unknown node: {src} -> {dst}")
        if edge_id is None:
            edge_id = f"{src}->{dst}"
        if edge_id in self.edges:
            raise GraphError(f"duplicate edge id {edge_id!r}")
        if depth < 0:
            raise GraphError(f"edge {edge_id}: negative depth")
        edge = FifoEdge(edge_id, src, dst, depth)
        self.edges[edge_id] = edge
        return edge

    def in_edges(self, node_id: str) -> list[FifoEdge]:
        return [e for e in self.edges.values() if e.dst == node_id]

    def out_edges(self, node_id: str) -> list[FifoEdge]:
        return [e for e in self.edges.values() if e.src == node_id]

    def sources(self) -> list[str]:
        return [nid for nid in self.nodes if not self.in_edges(nid)]

    def sinks(self) -> list[str]:
        return [nid for nid in self.nodes if not self.out_edges(nid)]

    def topo_order(self) -> list[str]:
        indeg = {nid: len(self.in_edges(nid)) for nid in self.nodes}
        ready = [nid for nid in self.nodes if indeg[nid] == 0]
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for e in self.out_edges(nid):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    ready.append(e.dst)
        if len(order) != len(self.nodes):
            raise GraphError("stream graph contains a cycle")
        return order

    def validate(self) -> None:
        if not self.nodes:
            raise GraphError("empty stream graph")
        if not self.sources():
            raise GraphError("no source node (node without inputs)")
        if not self.sinks():
            raise GraphError("no sink node (node without outputs)")
        isolated = set(self.sources()) & set(self.sinks())
        if isolated:
            raise GraphError(f"isolated nodes: {sorted(isolated)}")
        order = self.topo_order()
        # every node must sit on some source->sink path
        reach_fwd = set(self.sources())
        for nid in order:
            if nid in reach_fwd:
                for e in self.out_edges(nid):
                    reach_fwd.add(e.dst)
        reach_bwd = set(self.sinks())
        for nid in reversed(order):
            if nid in reach_bwd:
                for e in self.in_edges(nid):
                    reach_bwd.add(e.src)
        stranded = set(self.nodes) - (reach_fwd & reach_bwd)
        if stranded:
            raise GraphError(f"nodes not on any source->sink path: {sorted(stranded)}")

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        nodes = []
        for n in self.nodes.values():
            fold = None
            if n.folding is not None:
                fold = {
                    "simd": n.folding.simd,
                    "pe": n.folding.pe,
                    "in_ch": n.folding.in_ch,
                    "out_ch": n.folding.out_ch,
                    "k": n.folding.k,
                }
            nodes.append(
                {
                    "id": n.id,
                    "consume": n.consume,
                    "produce": n.produce,
                    "latency": n.latency,
                    "outputs_per_frame": n.outputs_per_frame,
                    "folding": fold,
                }
            )
        edges = [
            {"id": e.id, "src": e.src, "dst": e.dst, "depth": e.depth}
            for e in self.edges.values()
        ]
        return {"nodes": nodes, "edges": edges}

    @classmethod
    def from_json_dict(cls, doc: dict) -> StreamGraph:
        g = cls()
        for spec in doc.get("nodes", []):
            fold = spec.get("folding")
            g.add_node(
                spec["id"],
                consume=spec.get("consume", 1),
                produce=spec.get("produce", 1),
                latency=spec.get("latency", 1),
                outputs_per_frame=spec.get("outputs_per_frame", 1),
                folding=Folding(**fold) if fold else None,
            )
        for spec in doc.get("edges", []):
            g.connect(spec["src"], spec["dst"], spec.get("depth", 1), spec.get("id"))
        return g


def save_stream_graph(g: StreamGraph, path, workload: int | None = None) -> None:
    doc = g.to_json_dict()
    if workload is not None:
        doc["workload"] = workload
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_stream_graph(path) -> tuple[StreamGraph, int | None]:
    with open(path) as fh:
        doc = json.load(fh)
    return StreamGraph.from_json_dict(doc), doc.get("workload")


def simulate(g: StreamGraph, workload: int, cycle_cap: int = DEFAULT_CYCLE_CAP) -> SimReport:
    """Run the pipeline on `workload` source tokens.

    Per cycle: (1) busy nodes advance, completions stage their burst;
    (2) staged tokens drain into FIFOs up to free space; (3) occupancy
    peaks are sampled; (4) idle nodes with empty staging and sufficient
    inputs fire. Deadlock is declared the first cycle nothing changes
    while work remains - the state would then be frozen forever.
    """
    g.validate()
    if workload <= 0:
        raise GraphError(f"workload must be positive, got {workload}")
    if cycle_cap <= 0:
        raise GraphError(f"cycle_cap must be positive, got {cycle_cap}")
    for src in g.sources():
        if workload % g.nodes[src].produce != 0:
            raise GraphError(
                f"workload {workload} not a multiple of source {src} burst "
                f"{g.nodes[src].produce}"
            )

    order = g.topo_order()
    occupancy = {eid: 0 for eid in g.edges}
    max_occ = {eid: 0 for eid in g.edges}
    staging: dict[str, dict[str, int]] = {
        nid: {e.id: 0 for e in g.out_edges(nid)} for nid in g.nodes
    }
    busy = {nid: 0 for nid in g.nodes}
    stall = {nid: 0 for nid in g.nodes}
    remaining = {src: workload // g.nodes[src].produce for src in g.sources()}
    delivered = 0

    def quiescent() -> bool:
        return (
            all(r == 0 for r in remaining.values())
            and all(b == 0 for b in busy.values())
            and all(v == 0 for s in staging.values() for v in s.values())
            and all(v == 0 for v in occupancy.values())
        )

    cycles = 0
    outcome = "cap_exceeded"
    while cycles < cycle_cap:
        cycles += 1
        progress = False

        # 1) advance busy nodes; completed firings stage their burst
        for nid in order:
            if busy[nid] > 0:
                busy[nid] -= 1
                progress = True
                if busy[nid] == 0:
                    for e in g.out_edges(nid):
                        staging[nid][e.id] += g.nodes[nid].produce

        # 2) drain staging into FIFOs as far as space allows
        for nid in order:
            for e in g.out_edges(nid):
                amount = min(staging[nid][e.id], e.depth - occupancy[e.id])
                if amount > 0:
                    staging[nid][e.id] -= amount
                    occupancy[e.id] += amount
                    progress = True

        # 3) sample the post-drain peak (the "largest saturation")
        for eid, occ in occupancy.items():
            if occ > max_occ[eid]:
                max_occ[eid] = occ

        # 4) fire idle nodes whose burst has fully left and inputs suffice
        for nid in order:
            node = g.nodes[nid]
            if busy[nid] > 0:
                continue
            if any(v > 0 for v in staging[nid].values()):
                stall[nid] += 1  # burst still stuck in staging
                continue
            ins = g.in_edges(nid)
            if not ins:  # source
                if remaining[nid] > 0:
                    remaining[nid] -= 1
                    busy[nid] = node.latency
                    progress = True
                continue
            if all(occupancy[e.id] >= node.consume for e in ins):
                for e in ins:
                    occupancy[e.id] -= node.consume
                if not g.out_edges(nid):  # sink swallows
                    delivered += node.consume * len(ins)
                busy[nid] = node.latency
                progress = True

        if quiescent():
            outcome = "completed"
            break
        if not progress:
            outcome = "deadlock"
            break

    blocked: list[str] = []
    full: list[str] = []
    empty: list[str] = []
    if outcome == "deadlock":
        for nid in order:
            node = g.nodes[nid]
            stuck_staging = any(v > 0 for v in staging[nid].values())
            pending_source = not g.in_edges(nid) and remaining.get(nid, 0) > 0
            starved = any(occupancy[e.id] > 0 for e in g.in_edges(nid)) and not all(
                occupancy[e.id] >= node.consume for e in g.in_edges(nid)
            )
            if stuck_staging or pending_source or starved:
                blocked.append(nid)
        full = sorted(eid for eid, occ in occupancy.items() if occ >= g.edges[eid].depth)
        empty = sorted(eid for eid, occ in occupancy.items() if occ == 0)

    return SimReport(
        outcome=outcome,
        cycles=cycles,
        max_occupancy=max_occ,
        delivered=delivered,
        stall_cycles=stall,
        blocked_nodes=tuple(blocked),
        full_edges=tuple(full),
        empty_edges=tuple(empty),
    )


def _token_bound(g: StreamGraph, workload: int) -> dict[str, int]:
    """Upper bound on tokens ever entering each edge (probe depths)."""
    out_tokens: dict[str, int] = {}
    for nid in g.topo_order():
        node = g.nodes[nid]
        ins = g.in_edges(nid)
        if not ins:
            out_tokens[nid] = workload
            continue
        arriving = max(out_tokens[e.src] for e in ins)
        firings = math.ceil(arriving / node.consume)
        out_tokens[nid] = firings * node.produce
    return {e.id: max(1, out_tokens[e.src]) for e in g.edges.values()}


def size_fifos(g: StreamGraph, workload: int, cycle_cap: int = DEFAULT_CYCLE_CAP) -> dict[str, int]:
    """Recommend per-edge FIFO depths: probe deep, read the saturation.

    The probe run uses depths no achievable occupancy can exceed; each
    edge's recommendation is its observed maximum. A verification run at
    exactly the recommended depths must complete, otherwise something is
    wrong with the graph and we raise.
    """
    probe = StreamGraph.from_json_dict(g.to_json_dict())
    for eid, bound in _token_bound(g, workload).items():
        probe.edges[eid].depth = bound
    report = simulate(probe, workload, cycle_cap)
    if not report.completed:
        raise GraphError(f"probe run did not complete: {report.outcome}")
    recommended = dict(report.max_occupancy)

    check = StreamGraph.from_json_dict(g.to_json_dict())
    for eid, depth in recommended.items():
        check.edges[eid].depth = depth
    verify = simulate(check, workload, cycle_cap)
    if not verify.completed:
        raise GraphError(f"verification at recommended depths failed: {verify.outcome}")
    return recommended


def throughput(g: StreamGraph) -> int:
    """Steady-state initiation interval in cycles per input frame.

    Each node needs cycles-per-output x outputs-per-frame; folded matrix
    nodes get cycles-per-output from (in_ch/simd) * (out_ch/pe) * k^2. The
    slowest node sets the interval.
    """
    if not g.nodes:
        raise GraphError("empty stream graph")
    worst = 0
    for node in g.nodes.values():
        if node.folding is not None:
            per_output = node.folding.cycles_per_output()
            cycles = per_output * node.outputs_per_frame
        else:
            cycles = node.latency * math.ceil(node.outputs_per_frame / node.produce)
        worst = max(worst, cycles)
    return worst
