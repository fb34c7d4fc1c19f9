"""Primitive-level netlist IR and lowering from a resolved graph.

Cells are wires (combinational assignments), registers, register chains,
shift registers, constant-latency FIFOs and FIFO startup counters.  Every
net has exactly one driver; ready/valid pipelines additionally carry a
1-bit valid chain and a single global enable net implementing uniform
backpressure (enable low freezes every sequential cell at once).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import expr as E
from .errors import PipeforgeError, WidthMismatchError
from .model import SignalStatus, SyncGraph, ZoneKind
from .protocol import HandshakePlan, Protocol, fifo_handshake_wiring
from .resolve import (
    Fifo,
    PrimitivePolicy,
    Register,
    RegisterChain,
    ShiftRegister,
    Wire,
    select_primitive,
)


@dataclass
class CombCell:
    out: str
    expr: E.Expr


@dataclass
class RegCell:
    out: str
    inp: str
    width: int
    enable: str | None
    no_extract: bool = False


@dataclass
class ShiftRegCell:
    out: str
    inp: str
    width: int
    depth: int
    enable: str | None

    def __post_init__(self):
        if self.depth < 2:
            raise PipeforgeError("shift register cells have depth >= 2")


@dataclass
class FifoCell:
    out: str
    inp: str
    width: int
    capacity: int
    write_en: str
    read_en: str
    full: str
    empty: str

    def __post_init__(self):
        if self.capacity < 2:
            raise PipeforgeError("FIFO cells have capacity >= 2")


@dataclass
class CounterCell:
    count: str  # current value, observable in traces
    zero: str   # 1-bit (count == 0)
    init: int
    enable: str | None

    def __post_init__(self):
        if self.init < 1:
            raise PipeforgeError("startup counters have init >= 1")


Cell = CombCell | RegCell | ShiftRegCell | FifoCell | CounterCell


@dataclass
class Netlist:
    name: str
    inputs: list[tuple[str, int]] = field(default_factory=list)
    outputs: list[tuple[str, int]] = field(default_factory=list)
    nets: dict[str, int] = field(default_factory=dict)
    cells: list[Cell] = field(default_factory=list)
    protocol: Protocol = Protocol.RAW
    enable: str | None = None  # global clock-enable net (ready/valid only)

    def cell_counts(self) -> dict[str, int]:
        counts = {"comb": 0, "reg": 0, "shiftreg": 0, "fifo": 0, "counter": 0}
        for c in self.cells:
            if isinstance(c, CombCell):
                counts["comb"] += 1
            elif isinstance(c, RegCell):
                counts["reg"] += 1
            elif isinstance(c, ShiftRegCell):
                counts["shiftreg"] += 1
            elif isinstance(c, FifoCell):
                counts["fifo"] += 1
            else:
                counts["counter"] += 1
        return counts

    def drivers(self) -> dict[str, Cell]:
        out: dict[str, Cell] = {}
        for c in self.cells:
            outs = [c.out] if not isinstance(c, CounterCell) else [c.count, c.zero]
            if isinstance(c, FifoCell):
                outs += [c.full, c.empty]
            for n in outs:
                if n in out:
                    raise PipeforgeError(f"net {n!r} has multiple drivers")
                out[n] = c
        return out

    def check(self) -> None:
        """Structural invariants: single driver, no dangling nets, no
        combinational cycles, port/net width agreement."""
        drivers = self.drivers()
        inputs = {n for n, _ in self.inputs}
        for net in self.nets:
            if net in inputs:
                if net in drivers:
                    raise PipeforgeError(f"input port {net!r} is driven internally")
            elif net not in drivers:
                raise PipeforgeError(f"net {net!r} has no driver")
        for name, w in self.inputs + self.outputs:
            if self.nets.get(name) != w:
                raise WidthMismatchError(f"port {name!r} width mismatch")
        comb_order(self)  # raises on combinational cycles


def comb_order(netlist: Netlist) -> list[CombCell]:
    """Topological evaluation order of the combinational cells; sequential
    outputs count as cycle-start constants."""
    combs = [c for c in netlist.cells if isinstance(c, CombCell)]
    by_out = {c.out: c for c in combs}
    order: list[CombCell] = []
    state: dict[str, int] = {}  # 0 visiting, 1 done

    def visit(cell: CombCell):
        st = state.get(cell.out)
        if st == 1:
            return
        if st == 0:
            raise PipeforgeError(f"combinational cycle through net {cell.out!r}")
        state[cell.out] = 0
        for ref in sorted(cell.expr.refs()):
            dep = by_out.get(ref)
            if dep is not None:
                visit(dep)
        state[cell.out] = 1
        order.append(cell)

    for c in combs:
        visit(c)
    return order


# ---------------------------------------------------------------------------
# Lowering
# ---------------------------------------------------------------------------


class _Names:
    def __init__(self):
        self.nets: dict[str, int] = {}

    def alloc(self, base: str, width: int) -> str:
        name = base
        n = 2
        while name in self.nets:
            name = f"{base}__{n}"
            n += 1
        self.nets[name] = width
        return name


def lower(graph: SyncGraph, plan: HandshakePlan,
          policy: PrimitivePolicy | None = None) -> Netlist:
    """Lower a resolved graph plus handshake plan to a netlist.

    Step bodies become combinational cells over their source zone's nets;
    every nonzero-latency relation (step, merge compensation or resolved
    propagation) becomes the primitive chosen by select_primitive.  Under
    ready/valid, FIFO write/read enables are derived from the valid-chain
    taps at the source depth and one cycle before the sink depth, which is
    the synchronous equivalent of the upstream-valid / downstream-ready
    handshake terms under the global enable.
    """
    policy = policy or PrimitivePolicy()
    names = _Names()
    nl = Netlist(graph.name, protocol=plan.protocol)
    nl.nets = names.nets
    depths = plan.depths
    rv = plan.protocol is Protocol.READY_VALID

    init_zone = graph.zones[graph.input_zone]
    net_of: dict[tuple[str, str], str] = {}
    for slot in init_zone.slots.values():
        names.alloc(slot.signal, slot.width)
        net_of[(graph.input_zone, slot.signal)] = slot.signal
        nl.inputs.append((slot.signal, slot.width))
    for spec in graph.outputs:
        for port, src in spec.mapping:
            names.alloc(port, graph.signal_width(src))
            nl.outputs.append((port, graph.signal_width(src)))

    taps: list[str] = []
    if rv:
        for p in ("in_valid", "out_ready"):
            names.alloc(p, 1)
            nl.inputs.append((p, 1))
        for p in ("out_valid", "in_ready"):
            names.alloc(p, 1)
            nl.outputs.append((p, 1))
        nl.enable = names.alloc("enable", 1)
        nl.cells.append(CombCell(nl.enable, E.Ref("out_ready")))
        nl.cells.append(CombCell("in_ready", E.Ref("out_ready")))
        taps = [names.alloc(f"valid_{d}", 1)
                for d in range(plan.total_latency + 1)]
        nl.cells.append(CombCell(taps[0], E.Ref("in_valid")))
        for d in range(1, plan.total_latency + 1):
            nl.cells.append(RegCell(taps[d], taps[d - 1], 1, nl.enable))

    order = graph.forward_order()
    for z in order:
        if z == graph.input_zone:
            continue
        for slot in graph.zones[z].slots.values():
            net_of[(z, slot.signal)] = names.alloc(
                f"{z}__{slot.signal}", slot.width)

    def transport(out: str, inp: str, latency: int, width: int,
                  sink_depth: int) -> None:
        prim = select_primitive(latency, width, policy)
        if isinstance(prim, Wire):
            nl.cells.append(CombCell(out, E.Ref(inp)))
        elif isinstance(prim, Register):
            nl.cells.append(RegCell(out, inp, width, nl.enable))
        elif isinstance(prim, RegisterChain):
            prev = inp
            for i in range(prim.n):
                nxt = out if i == prim.n - 1 else names.alloc(
                    f"{out}__d{i + 1}", width)
                nl.cells.append(RegCell(nxt, prev, width, nl.enable,
                                        no_extract=prim.no_extract))
                prev = nxt
        elif isinstance(prim, ShiftRegister):
            nl.cells.append(ShiftRegCell(out, inp, width, prim.n, nl.enable))
        else:
            _lower_fifo(nl, names, taps, prim, out, inp, sink_depth)

    def _lower_fifo(nl: Netlist, names: _Names, taps: list[str], prim: Fifo,
                    out: str, inp: str, sink_depth: int) -> None:
        wiring = fifo_handshake_wiring(prim, plan.protocol)
        full = names.alloc(f"{out}__full", 1)
        empty = names.alloc(f"{out}__empty", 1)
        we = names.alloc(f"{out}__we", 1)
        re = names.alloc(f"{out}__re", 1)
        if wiring.counter_init is not None:
            cw = max(1, wiring.counter_init.bit_length())
            cnt = names.alloc(f"{out}__read_start", cw)
            zero = names.alloc(f"{out}__read_start_zero", 1)
            nl.cells.append(CounterCell(cnt, zero, wiring.counter_init, nl.enable))
            nl.cells.append(CombCell(we, E.Const(1, 1)))
            nl.cells.append(CombCell(re, E.Ref(zero)))
        else:
            src_depth = sink_depth - prim.depth
            nl.cells.append(CombCell(
                we, E.BinOp("and", E.Ref(taps[src_depth]), E.Not(E.Ref(full)))))
            nl.cells.append(CombCell(
                re, E.BinOp("and", E.Ref(taps[sink_depth - 1]),
                            E.Not(E.Ref(empty)))))
        nl.cells.append(FifoCell(out, inp, prim.width, prim.depth,
                                 we, re, full, empty))

    for z in order:
        zone = graph.zones[z]
        if zone.kind is ZoneKind.INPUT:
            continue
        step = graph.steps.get(z)
        if step is not None:
            src = next(r.source for r in graph.inbound(z))
            lat = step.latency
            mapping = {}
            for sig, slot in graph.zones[src].slots.items():
                mapping[sig] = net_of[(src, sig)]
            for sig, width, body in step.defines:
                netexpr = E.map_refs(body, mapping)
                got = netexpr.width(names.nets)
                if got != width:
                    raise WidthMismatchError(
                        f"{z}:{sig} declared {width} bits but its expression "
                        f"has {got}")
                out = net_of[(z, sig)]
                if lat == 0:
                    nl.cells.append(CombCell(out, netexpr))
                    mapping[sig] = out
                else:
                    cnet = names.alloc(f"{z}__{sig}__c", width)
                    nl.cells.append(CombCell(cnet, netexpr))
                    transport(out, cnet, lat, width, depths[z])
        for slot in zone.slots.values():
            if slot.status is not SignalStatus.PROPAGATED:
                continue
            if slot.fed_from is None:
                raise PipeforgeError(
                    f"slot {z}:{slot.signal} resolved without a feed")
            src_zone, lat = slot.fed_from
            transport(net_of[(z, slot.signal)], net_of[(src_zone, slot.signal)],
                      lat, slot.width, depths[z])

    for spec in graph.outputs:
        for port, src in spec.mapping:
            nl.cells.append(CombCell(port, E.Ref(net_of[(spec.zone, src)])))
    if rv:
        out_zone = graph.outputs[0].zone
        nl.cells.append(CombCell("out_valid", E.Ref(taps[depths[out_zone]])))

    nl.check()
    return nl
