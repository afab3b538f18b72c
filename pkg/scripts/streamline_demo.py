#!/usr/bin/env python3
"""Streamline a conv block and show the before/after graphs.

Builds the block as it comes out of training code (incoming scale, conv,
batch-norm affine, requantizer, output scale), runs the pass pipeline, and
verifies interpreter equivalence on random integer inputs.
"""

import argparse

import numpy as np

from motkit.streamline import OpGraph, interpret, run_pipeline, save_graph


def build_conv_block():
    g = OpGraph()
    g.add_node("in", "Input")
    g.add_node("mul_in", "Mul", scale=0.5)
    g.add_node("conv", "Conv", weights=np.arange(-8.0, 8.0).reshape(2, 2, 2, 2), pad=1)
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


def describe(g, label):
    print(f"{label}:")
    for nid in g.topo_order():
        print(f"  {g.nodes[nid].kind:<15} {nid}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=256)
    parser.add_argument("--save-prefix", help="write before/after graph JSON here")
    args = parser.parse_args()

    g = build_conv_block()
    describe(g, "imported graph")
    diagnostics = []
    streamlined = run_pipeline(g, diagnostics=diagnostics)
    describe(streamlined, "after pipeline")
    for line in diagnostics:
        print("note:", line)

    rng = np.random.default_rng(0)
    for _ in range(args.trials):
        x = rng.integers(-8, 8, size=(2, 4, 4)).astype(float)
        (a,) = interpret(g, x).values()
        (b,) = interpret(streamlined, x).values()
        assert np.array_equal(a, b)
    print(f"bit-exact on {args.trials} random integer inputs")

    if args.save_prefix:
        save_graph(g, f"{args.save_prefix}_before.json")
        save_graph(streamlined, f"{args.save_prefix}_after.json")
        print(f"wrote {args.save_prefix}_before.json / _after.json")


if __name__ == "__main__":
    main()
