"""Verilog-2001 emission from the netlist IR.

One self-contained module per circuit plus one helper module per distinct
shift-register or FIFO shape.  Output is deterministic: identical netlists
emit byte-identical text.  Vendor influence is limited to the
``shreg_extract`` attribute and the structural style of the helpers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import expr as E
from .netlist import (
    CombCell,
    CounterCell,
    FifoCell,
    Netlist,
    RegCell,
    ShiftRegCell,
)

NO_EXTRACT_ATTR = '(* shreg_extract = "no" *)'


class ShregAttr(enum.Enum):
    NONE = "none"
    NO_EXTRACT = "no_extract"
    EXPLICIT_SRL = "explicit_srl"


@dataclass(frozen=True)
class EmitOptions:
    shreg_attr: ShregAttr = ShregAttr.NONE
    header: str = ""


def _decl(width: int) -> str:
    return f"[{width - 1}:0] " if width > 1 else ""


class _ExprEmitter:
    """Flattens expressions to per-node temporaries so every intermediate
    value has an explicit width (Verilog's context-determined widths would
    otherwise diverge from the model's masking rules)."""

    def __init__(self, widths: dict[str, int]):
        self.widths = widths
        self.lines: list[str] = []
        self.n = 0

    def _temp(self, width: int, rhs: str) -> str:
        name = f"_e{self.n}"
        self.n += 1
        self.lines.append(f"  wire {_decl(width)}{name} = {rhs};")
        return name

    def operand(self, e: E.Expr) -> str:
        if isinstance(e, E.Ref):
            return e.name
        rhs = self.rhs(e)
        return self._temp(e.width(self.widths), rhs)

    def rhs(self, e: E.Expr) -> str:
        if isinstance(e, E.Ref):
            return e.name
        if isinstance(e, E.Const):
            return f"{e.const_width}'d{e.value}"
        if isinstance(e, E.BinOp):
            op = {"add": "+", "sub": "-", "mul": "*",
                  "xor": "^", "and": "&", "or": "|"}[e.op]
            return f"{self.operand(e.lhs)} {op} {self.operand(e.rhs)}"
        if isinstance(e, E.Not):
            return f"~{self.operand(e.arg)}"
        if isinstance(e, E.Shift):
            op = "<<" if e.op == "shl" else ">>"
            return f"{self.operand(e.arg)} {op} {e.amount}"
        if isinstance(e, E.Mux):
            return (f"{self.operand(e.sel)} ? {self.operand(e.then)}"
                    f" : {self.operand(e.other)}")
        if isinstance(e, E.Slice):
            return f"{self.operand(e.arg)}[{e.hi}:{e.lo}]"
        if isinstance(e, E.Concat):
            return "{" + ", ".join(self.operand(p) for p in e.parts) + "}"
        raise TypeError(f"unknown expression node {e!r}")


def _shiftreg_module(width: int, depth: int) -> str:
    name = f"pf_shiftreg_w{width}_d{depth}"
    w = _decl(width)
    return f"""module {name}(
  input clk,
  input rst,
  input en,
  input {w}d,
  output {w}q
);
  reg {w}stage [0:{depth - 1}];
  integer i;
  always @(posedge clk) begin
    if (rst) begin
      for (i = 0; i < {depth}; i = i + 1) stage[i] <= {width}'d0;
    end else if (en) begin
      stage[0] <= d;
      for (i = 1; i < {depth}; i = i + 1) stage[i] <= stage[i - 1];
    end
  end
  assign q = stage[{depth - 1}];
endmodule
"""


def _fifo_module(width: int, capacity: int) -> str:
    name = f"pf_fifo_w{width}_d{capacity}"
    w = _decl(width)
    pw = max(1, (capacity - 1).bit_length())
    cw = pw + 1
    return f"""module {name}(
  input clk,
  input rst,
  input en,
  input wr,
  input rd,
  input {w}din,
  output {w}dout,
  output full,
  output empty
);
  reg {w}mem [0:{capacity - 1}];
  reg [{pw - 1}:0] rp, wp;
  reg [{cw - 1}:0] count;
  reg {w}dout_r;
  assign full = (count == {cw}'d{capacity});
  assign empty = (count == {cw}'d0);
  assign dout = dout_r;
  always @(posedge clk) begin
    if (rst) begin
      rp <= {pw}'d0;
      wp <= {pw}'d0;
      count <= {cw}'d0;
      dout_r <= {width}'d0;
    end else if (en) begin
      if (rd) begin
        dout_r <= mem[rp];
        rp <= (rp == {pw}'d{capacity - 1}) ? {pw}'d0 : rp + {pw}'d1;
      end
      if (wr) begin
        mem[wp] <= din;
        wp <= (wp == {pw}'d{capacity - 1}) ? {pw}'d0 : wp + {pw}'d1;
      end
      count <= count + (wr ? {cw}'d1 : {cw}'d0) - (rd ? {cw}'d1 : {cw}'d0);
    end
  end
endmodule
"""


def emit_verilog(netlist: Netlist, options: EmitOptions = EmitOptions()) -> str:
    out: list[str] = []
    if options.header:
        for line in options.header.splitlines():
            out.append(f"// {line}".rstrip())
        out.append("")

    shapes_sr = []
    shapes_fifo = []
    for c in netlist.cells:
        if isinstance(c, ShiftRegCell) and (c.width, c.depth) not in shapes_sr:
            shapes_sr.append((c.width, c.depth))
        if isinstance(c, FifoCell) and (c.width, c.capacity) not in shapes_fifo:
            shapes_fifo.append((c.width, c.capacity))
    for width, depth in shapes_sr:
        out.append(_shiftreg_module(width, depth))
    for width, cap in shapes_fifo:
        out.append(_fifo_module(width, cap))

    in_ports = [n for n, _ in netlist.inputs]
    out_ports = [n for n, _ in netlist.outputs]
    ports = ["clk", "rst"] + in_ports + out_ports
    out.append(f"module {netlist.name}(")
    decls = ["  input clk", "  input rst"]
    decls += [f"  input {_decl(w)}{n}" for n, w in netlist.inputs]
    decls += [f"  output {_decl(w)}{n}" for n, w in netlist.outputs]
    out.append(",\n".join(decls))
    out.append(");")

    drivers = netlist.drivers()
    port_set = set(ports)
    for net, width in netlist.nets.items():
        if net in port_set:
            continue
        drv = drivers.get(net)
        if isinstance(drv, (RegCell, CounterCell)) and not (
                isinstance(drv, CounterCell) and net == drv.zero):
            attr = ""
            if isinstance(drv, RegCell) and (
                    drv.no_extract or options.shreg_attr is ShregAttr.NO_EXTRACT):
                attr = NO_EXTRACT_ATTR + " "
            out.append(f"  {attr}reg {_decl(width)}{net};")
        else:
            out.append(f"  wire {_decl(width)}{net};")

    emitter = _ExprEmitter(netlist.nets)
    body: list[str] = []
    for c in netlist.cells:
        if isinstance(c, CombCell):
            rhs = emitter.rhs(c.expr)
            tgt = f"assign {c.out} = {rhs};"
            body.extend(emitter.lines)
            emitter.lines = []
            body.append(f"  {tgt}")
        elif isinstance(c, RegCell):
            en = c.enable if c.enable else None
            body.append("  always @(posedge clk) begin")
            body.append(f"    if (rst) {c.out} <= {c.width}'d0;")
            if en:
                body.append(f"    else if ({en}) {c.out} <= {c.inp};")
            else:
                body.append(f"    else {c.out} <= {c.inp};")
            body.append("  end")
        elif isinstance(c, ShiftRegCell):
            en = c.enable if c.enable else "1'b1"
            body.append(
                f"  pf_shiftreg_w{c.width}_d{c.depth} u_{c.out}("
                f".clk(clk), .rst(rst), .en({en}), .d({c.inp}), .q({c.out}));")
        elif isinstance(c, FifoCell):
            en = netlist.enable if netlist.enable else "1'b1"
            body.append(
                f"  pf_fifo_w{c.width}_d{c.capacity} u_{c.out}("
                f".clk(clk), .rst(rst), .en({en}), .wr({c.write_en}), "
                f".rd({c.read_en}), .din({c.inp}), .dout({c.out}), "
                f".full({c.full}), .empty({c.empty}));")
        else:  # CounterCell
            cw = netlist.nets[c.count]
            en = c.enable if c.enable else None
            body.append(f"  assign {c.zero} = ({c.count} == {cw}'d0);")
            body.append("  always @(posedge clk) begin")
            body.append(f"    if (rst) {c.count} <= {cw}'d{c.init};")
            guard = f"{en} && {c.count} != {cw}'d0" if en else f"{c.count} != {cw}'d0"
            body.append(f"    else if ({guard}) {c.count} <= {c.count} - {cw}'d1;")
            body.append("  end")
    out.extend(body)
    out.append("endmodule")
    return "\n".join(out) + "\n"
