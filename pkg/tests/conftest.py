"""Shared fixtures: reference pipelines, a random pipeline generator and
independent oracles (brute-force path enumeration, software evaluation of
step bodies)."""

from __future__ import annotations

import os
import random

import pytest

import pipeforge as pf
from pipeforge.expr import BinOp, Not, Ref

DATA = os.path.join(os.path.dirname(__file__), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA, name)


# -- reference pipeline -----------------------------------------------------


def build_running(xor_delay: int = 0, with_e: bool = False,
                  name: str = "run") -> pf.SyncGraph:
    """z = (2x + y) xor (x * y), optionally with a pass-through signal e and
    a multi-cycle final stage."""
    inputs = [("x", 8), ("y", 8)] + ([("e", 4)] if with_e else [])
    b = pf.pipe_new(inputs, name)
    mul = b.split("mul")
    b.add_step(mul, pf.StepBody.reg(
        "mul", [("mulXY", 16, BinOp("mul", Ref("x"), Ref("y")))]))
    b.add_step(b.main, pf.StepBody.reg(
        "addA", [("sumXY", 8, BinOp("add", Ref("x"), Ref("y")))]))
    b.add_step(b.main, pf.StepBody.reg(
        "addB", [("sum2XY", 8, BinOp("add", Ref("sumXY"), Ref("x")))]))
    b.merge(mul)
    body = [("z", 16, BinOp("xor", Ref("sum2XY"), Ref("mulXY")))]
    if xor_delay:
        b.add_step(b.main, pf.StepBody.delay("xor", xor_delay, body))
    else:
        b.add_step(b.main, pf.StepBody.wire("xor", body))
    outs = [("z_out", "z")] + ([("e_out", "e")] if with_e else [])
    b.drive_output(outs)
    return b.build()


def golden_running(x: int, y: int) -> int:
    return ((2 * x + y) & 0xFF) ^ ((x * y) & 0xFFFF)


# -- independent oracles ----------------------------------------------------


def brute_force_path_sums(graph: pf.SyncGraph, src: str, dst: str) -> list[int]:
    """All structural-path latency sums src -> dst by naive DFS enumeration."""
    edges: dict[str, list[tuple[str, int]]] = {}
    for r in graph.relations:
        if r.kind in (pf.RelationKind.STEP, pf.RelationKind.MERGE):
            edges.setdefault(r.source, []).append((r.sink, r.latency))
    sums: list[int] = []

    def dfs(z: str, acc: int):
        if z == dst:
            sums.append(acc)
            return
        for nxt, lat in edges.get(z, []):
            dfs(nxt, acc + lat)

    dfs(src, 0)
    return sums


def golden_eval(graph: pf.SyncGraph, inputs: dict[str, int]) -> dict[str, int]:
    """Evaluate all step bodies in forward order, ignoring latencies; returns
    output-port values."""
    widths = {name: d.width for name, d in graph.decls.items()}
    env = dict(inputs)
    for z in graph.forward_order():
        step = graph.steps.get(z)
        if step is None:
            continue
        for sig, _, expr in step.defines:
            env[sig] = expr.eval(env, widths)
    out = {}
    for spec in graph.outputs:
        for port, src in spec.mapping:
            out[port] = env[src]
    return out


def implemented_latency(graph: pf.SyncGraph, zone: str, signal: str) -> int:
    """Latency from the declaration to the given slot along the implemented
    feed chain."""
    slot = graph.zones[zone].slots[signal]
    if slot.fed_from is None:
        return 0
    src, lat = slot.fed_from
    return lat + implemented_latency(graph, src, signal)


# -- random pipelines -------------------------------------------------------


def random_pipeline(rng: random.Random, name: str) -> pf.SyncGraph:
    """Random pipeline with at most 12 zones and at most 3 branches,
    exercising non-local reads, splits, merges and multi-cycle steps."""
    n_inputs = rng.randint(1, 3)
    inputs = [(f"in{i}", rng.randint(1, 12)) for i in range(n_inputs)]
    b = pf.pipe_new(inputs, name)
    widths = dict(inputs)
    exprs = {}
    order_of_definition = []
    visible = {"main": [n for n, _ in inputs]}
    handles = {"main": b.main}
    n_extra = rng.randint(0, 2)
    n_steps = rng.randint(1, 11 - n_extra - (1 if n_extra else 0))
    to_split = n_extra
    sid = 0
    done = 0
    while done < n_steps:
        if to_split and rng.random() < 0.3:
            bn = f"br{to_split}"
            handles[bn] = b.split(bn, from_branch=b.main)
            visible[bn] = list(visible["main"])
            to_split -= 1
            continue
        br = rng.choice(list(handles))
        roll = rng.random()
        latency = 0 if roll < 0.3 else 1 if roll < 0.8 else rng.randint(2, 4)
        defines = []
        for _ in range(1 if rng.random() < 0.7 else 2):
            sig = f"s{sid}_{name}"
            sid += 1
            a = rng.choice(visible[br])
            c = rng.choice(visible[br])
            op = rng.choice(["add", "xor", "and", "or", "mul", "not"])
            if op == "mul" and widths[a] + widths[c] > 48:
                op = "xor"
            if op == "xor" and a == c:
                op = "add"  # xor(a, a) is constant; keep outputs responsive
            expr = Not(Ref(a)) if op == "not" else BinOp(op, Ref(a), Ref(c))
            w = expr.width(widths)
            widths[sig] = w
            exprs[sig] = expr
            order_of_definition.append(sig)
            defines.append((sig, w, expr))
        step = pf.StepBody(f"st{done}_{name}", latency, tuple(defines))
        b.add_step(handles[br], step)
        visible[br].extend(sig for sig, _, _ in defines)
        done += 1
    extras = [h for n, h in handles.items() if n != "main"]
    if extras:
        b.merge(*extras, into=b.main)
        for n in handles:
            if n != "main":
                for sig in visible[n]:
                    if sig not in visible["main"]:
                        visible["main"].append(sig)
    # outputs must react to the inputs or latency cannot be observed; probe
    # each candidate with a few random draws and drop the constant ones
    sensitive = []
    probes = []
    for _ in range(8):
        env = {n: rng.randrange(0, 1 << w) for n, w in inputs}
        for sig in order_of_definition:
            env[sig] = exprs[sig].eval(env, widths)
        probes.append(env)
    for s in visible["main"]:
        if len({p[s] for p in probes}) > 1:
            sensitive.append(s)
    pool = sensitive or [n for n, _ in inputs]
    k = rng.randint(1, min(2, len(pool)))
    srcs = rng.sample(pool, k)
    b.drive_output([(f"o{i}", s) for i, s in enumerate(srcs)])
    return b.build()


@pytest.fixture(scope="session")
def random_corpus() -> list[pf.SyncGraph]:
    rng = random.Random(20260826)
    return [random_pipeline(rng, f"p{i}") for i in range(200)]
