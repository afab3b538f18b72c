#!/usr/bin/env python3
"""FIFO sizing and folding sweeps on streaming-pipeline fixtures.

Shows the probe procedure on a fork/join graph that deadlocks when the
short branch is under-buffered, then sweeps SIMD/PE folding on a matrix
node to show the throughput model.
"""

from motkit.dataflow import Folding, StreamGraph, simulate, size_fifos, throughput


def fork_join(depths=None):
    d = depths or {}
    g = StreamGraph()
    g.add_node("src")
    g.add_node("fork")
    g.add_node("bshort")
    g.add_node("acc", consume=8, produce=8, latency=8)
    g.add_node("join", consume=1)
    g.add_node("sink")
    g.connect("src", "fork", depth=d.get("e_in", 2), edge_id="e_in")
    g.connect("fork", "bshort", depth=d.get("e1", 2), edge_id="e1")
    g.connect("bshort", "join", depth=d.get("e2", 1), edge_id="e2")
    g.connect("fork", "acc", depth=d.get("e3", 16), edge_id="e3")
    g.connect("acc", "join", depth=d.get("e4", 8), edge_id="e4")
    g.connect("join", "sink", depth=d.get("e5", 2), edge_id="e5")
    return g


def main():
    workload = 32
    report = simulate(fork_join(), workload)
    print(f"default depths: {report.outcome}")
    if report.outcome == "deadlock":
        print(f"  blocked nodes: {', '.join(report.blocked_nodes)}")
        print(f"  full edges:    {', '.join(report.full_edges)}")

    rec = size_fifos(fork_join(), workload)
    print(f"recommended depths: {rec}")
    sized = simulate(fork_join(rec), workload)
    print(f"at recommended depths: {sized.outcome} in {sized.cycles} cycles")

    print("\nfolding sweep on an 8x8-channel k=3 matrix node, 1200 outputs/frame:")
    print(f"{'simd':>5} {'pe':>4} {'cycles/frame':>13}")
    for simd in (1, 2, 4, 8):
        for pe in (1, 8):
            g = StreamGraph()
            g.add_node("src")
            g.add_node("m", folding=Folding(simd, pe, 8, 8, 3), outputs_per_frame=1200)
            g.connect("src", "m")
            print(f"{simd:5d} {pe:4d} {throughput(g):13d}")


if __name__ == "__main__":
    main()
