import pipeforge as pf
from pipeforge.verilog import NO_EXTRACT_ATTR

from conftest import build_running


def emit(xor_delay=0, with_e=False, policy=None, protocol=pf.Protocol.RAW,
         options=None):
    g = pf.resolve_direct_backward(
        pf.balance_merges(build_running(xor_delay, with_e)))
    nl = pf.lower(g, pf.apply_protocol(g, protocol), policy)
    return pf.emit_verilog(nl, options or pf.EmitOptions())


def test_module_interface_raw():
    v = emit(with_e=True)
    assert "module run" in v
    assert "input [7:0] x" in v
    assert "output [15:0] z_out" in v
    assert "in_valid" not in v


def test_module_interface_ready_valid():
    v = emit(xor_delay=2, protocol=pf.Protocol.READY_VALID)
    for port in ("input in_valid", "input out_ready",
                 "output out_valid", "output in_ready"):
        assert port in v
    assert "posedge clk" in v and "rst" in v


def test_emission_is_deterministic():
    assert emit(xor_delay=2, with_e=True, policy=pf.direct_fifo(3, 3)) == \
        emit(xor_delay=2, with_e=True, policy=pf.direct_fifo(3, 3))


def test_no_extract_attribute_literal():
    v = emit(with_e=True, policy=pf.direct_force_reg())
    assert NO_EXTRACT_ATTR in v
    assert NO_EXTRACT_ATTR == '(* shreg_extract = "no" *)'
    plain = emit(with_e=True)
    assert NO_EXTRACT_ATTR not in plain


def test_explicit_srl_emits_helper_module():
    v = emit(with_e=True, policy=pf.direct_force_srl(),
             options=pf.EmitOptions(shreg_attr=pf.ShregAttr.EXPLICIT_SRL))
    assert "module pf_shiftreg_w4_d2" in v
    # one helper definition per distinct shape, even if instantiated twice
    assert v.count("module pf_shiftreg_w4_d2") == 1


def test_fifo_emits_helper_module_once():
    v = emit(xor_delay=2, with_e=True, policy=pf.direct_fifo(3, 3))
    assert v.count("module pf_fifo_w4_d4") == 1
    assert "pf_fifo_w4_d4 " in v.replace("module pf_fifo_w4_d4", "", 1)


def test_header_option():
    v = emit(options=pf.EmitOptions(header="build 123"))
    assert v.startswith("// build 123")
