"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np

from motkit.dataflow import StreamGraph
from motkit.streamline import OpGraph


def conv_block_graph() -> OpGraph:
    """Conv block as imported from training code, before streamlining.

    Input -> Mul(incoming scale) -> Conv -> Mul(bn scale) -> Add(bn bias)
    -> MultiThreshold -> Mul(output scale) -> Output. Scales are powers of
    two and weights/thresholds integers, so interpreter equivalence checks
    can demand bitwise equality.
    """
    g = OpGraph()
    g.add_node("in", "Input")
    g.add_node("mul_in", "Mul", scale=0.5)
    g.add_node(
        "conv",
        "Conv",
        weights=np.arange(-8.0, 8.0).reshape(2, 2, 2, 2),
        stride=1,
        pad=1,
    )
    g.add_node("bn_mul", "Mul", scale=[0.5, 2.0])
    g.add_node("bn_add", "Add", bias=[1.0, -3.0])
    g.add_node(
        "mt",
        "MultiThreshold",
        thresholds=np.array([[-24.0, 0.0, 24.0], [-96.0, 0.0, 96.0]]),
        out_bits=2,
    )
    g.add_node("mul_out", "Mul", scale=0.25)
    g.add_node("out", "Output")
    prev = "in"
    for nid in ("mul_in", "conv", "bn_mul", "bn_add", "mt", "mul_out", "out"):
        g.connect(prev, nid)
        prev = nid
    return g


def fork_join_graph() -> OpGraph:
    """C2f-style fork/join: an affine before a fanout, EltwiseAdd join."""
    g = OpGraph()
    g.add_node("in", "Input")
    g.add_node("pre", "Mul", scale=0.5)
    g.add_node("branch_conv", "Conv", weights=np.eye(2).reshape(2, 2, 1, 1) * 2.0)
    g.add_node("join", "EltwiseAdd")
    g.add_node("out", "Output")
    g.connect("in", "pre")
    g.connect("pre", "branch_conv")  # branch 1: through a conv
    g.connect("pre", "join", dst_in=1)  # branch 2: skip connection
    g.connect("branch_conv", "join", dst_in=0)
    g.connect("join", "out")
    return g


def chain_stream_graph(depths: dict[str, int] | None = None) -> StreamGraph:
    """Rate-matched 3-stage linear pipeline, one token per firing."""
    d = depths or {}
    g = StreamGraph()
    g.add_node("src")
    g.add_node("mid")
    g.add_node("sink")
    g.connect("src", "mid", depth=d.get("e0", 1), edge_id="e0")
    g.connect("mid", "sink", depth=d.get("e1", 1), edge_id="e1")
    return g


def burst_stream_graph(burst_depth: int = 2) -> StreamGraph:
    """Producer accumulating 8 tokens then bursting 8 into a 1/cycle reader."""
    g = StreamGraph()
    g.add_node("src")
    g.add_node("producer", consume=8, produce=8)
    g.add_node("consumer")
    g.add_node("sink")
    g.connect("src", "producer", depth=8, edge_id="e0")
    g.connect("producer", "consumer", depth=burst_depth, edge_id="e1")
    g.connect("consumer", "sink", depth=2, edge_id="e2")
    return g


FORK_JOIN_WORKLOAD = 32


def fork_join_stream_graph(depths: dict[str, int] | None = None) -> StreamGraph:
    """Fork/join deadlock fixture.

    The short branch is a unit-rate unit-latency node; the long branch
    accumulates 8 tokens before producing its burst (latency matching its
    8-cycle token period, so the pipeline is rate-matched end to end). At
    the default short-branch depth the fork exhausts the short side's
    capacity before the accumulator ever reaches 8 inputs, the join
    starves, and everything freezes.
    """
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
