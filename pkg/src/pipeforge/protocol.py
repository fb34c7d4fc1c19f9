"""Protocol signaling plans: none (raw) or ready/valid with uniform backpressure.

Ready/valid adds a 1-bit valid chain clocked along the pipeline and a single
ready net driven by the output.  Backpressure is uniform: ready low freezes
every sequential element (data registers, valid registers, FIFO pointers and
startup counters) through one shared clock-enable, which is only sound
because merges are statically balanced and there is a single output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import MultiOutputBackpressureError
from .model import SyncGraph
from .resolve import Fifo


class Protocol(enum.Enum):
    RAW = "raw"
    READY_VALID = "ready_valid"


@dataclass(frozen=True)
class HandshakePlan:
    protocol: Protocol
    # valid at a zone is the input valid delayed by that zone's depth
    depths: dict[str, int]
    total_latency: int

    @property
    def valid_chain_length(self) -> int:
        return self.total_latency


def apply_protocol(graph: SyncGraph, protocol: Protocol) -> HandshakePlan:
    """Plan protocol signaling for a resolved graph.

    Raw pipelines get no ports; their FIFOs rely on startup counters instead
    (see :func:`fifo_handshake_wiring`).  Ready/valid requires exactly one
    output zone, since a single ready net cannot arbitrate several sinks.
    """
    depths = graph.depths()
    outs = graph.output_zones
    if protocol is Protocol.READY_VALID and len(outs) != 1:
        raise MultiOutputBackpressureError(
            f"ready/valid needs exactly one output zone, got {len(outs)}")
    total = max(depths[z] for z in outs)
    return HandshakePlan(protocol, depths, total)


@dataclass(frozen=True)
class FifoWiring:
    """Symbolic control wiring for one constant-latency FIFO.

    The tags are resolved to concrete nets during lowering:

    * ``always``: tied high (raw mode writes every post-reset cycle)
    * ``counter_zero``: startup counter has decremented to zero
    * ``upstream_valid_and_not_full`` / ``downstream_ready_and_not_empty``:
      the ready/valid handshake terms, additionally gated by the global
      enable so a stall freezes the FIFO with the rest of the pipeline
    """

    write_enable: str
    read_enable: str
    upstream_ready: str | None
    downstream_valid: str | None
    counter_init: int | None


def fifo_handshake_wiring(fifo: Fifo, protocol: Protocol) -> FifoWiring:
    """Control wiring turning a FIFO into a fixed delay of ``fifo.depth`` cycles.

    Raw mode holds the read enable off with a startup counter initialized to
    depth - 1 (the FIFO's intrinsic read latency contributes the last cycle),
    so the first element leaves exactly ``depth`` cycles after entering.
    """
    if protocol is Protocol.RAW:
        return FifoWiring(
            write_enable="always",
            read_enable="counter_zero",
            upstream_ready=None,
            downstream_valid=None,
            counter_init=fifo.depth - 1,
        )
    return FifoWiring(
        write_enable="upstream_valid_and_not_full",
        read_enable="downstream_ready_and_not_empty",
        upstream_ready="not_full",
        downstream_valid="not_empty",
        counter_init=None,
    )
