"""Synchronization model: pipeline builder and the TimeZone/Relation graph.

A pipeline is recorded as an explicitly scheduled list of steps on branches
(split/merge), then elaborated into a :class:`SyncGraph`: a DAG of TimeZones
(groups of mutually synchronized signals) connected by Relations carrying a
latency.  Downstream by-name reads of non-local signals become pending slots
with *missing* (unknown-latency) equivalent relations, which the resolution
algorithms in :mod:`pipeforge.resolve` implement.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

from .errors import (
    BranchClosedError,
    CycleDetectedError,
    DuplicateSignalError,
    MissingLatencyError,
    NoPathError,
    PipeforgeError,
    SelfMergeError,
    UnbalancedPathsError,
    UnknownSignalError,
    ZeroWidthError,
)
from .expr import Expr

INIT_ZONE = "_init_"


class SignalStatus(enum.Enum):
    PENDING_LOCAL = "pending_local"
    DECLARED_LOCAL_USE = "declared_local_use"
    DECLARED_UNUSED = "declared_unused"
    PROPAGATED = "propagated"
    CONNECTED_EXTERNAL = "connected_external"


class ZoneKind(enum.Enum):
    INPUT = "input"
    STEP = "step"
    MERGE = "merge"
    OUTPUT = "output"


class RelationOrigin(enum.Enum):
    USER_STEP = "user_step"
    BALANCING = "balancing"
    RESOLUTION = "resolution"


class RelationKind(enum.Enum):
    STEP = "step"          # structural edge created by a pipeline step
    MERGE = "merge"        # structural inbound edge of a merge zone
    EQUIVALENT = "equivalent"  # missing relation implied by a downstream read
    TRANSITIVE = "transitive"  # hop-by-hop implementation (p2p / exhaustive)
    DIRECT = "direct"      # single direct implementation

STRUCTURAL_KINDS = (RelationKind.STEP, RelationKind.MERGE)


@dataclass(frozen=True)
class SignalDecl:
    name: str
    width: int
    declaring_zone: str


@dataclass
class Slot:
    signal: str
    width: int
    status: SignalStatus
    decl_zone: str
    # (source zone, latency) for propagated/carried slots; latency is None for
    # merge-carried slots until balancing fixes the merge edge.
    fed_from: tuple[str, int | None] | None = None


@dataclass
class TimeZone:
    id: str
    label: str
    kind: ZoneKind
    slots: dict[str, Slot] = field(default_factory=dict)


@dataclass
class Relation:
    source: str
    sink: str
    latency: int | None
    origin: RelationOrigin
    kind: RelationKind
    protocol: str | None = None
    signals: list[str] = field(default_factory=list)

    @property
    def structural(self) -> bool:
        return self.kind in STRUCTURAL_KINDS


@dataclass(frozen=True)
class StepBody:
    """One pipeline step: new signals in a sink zone, computed from the source zone.

    ``latency`` encodes the step kind: 0 for a combinational wire stage, 1 for
    a registered stage, n >= 2 for a multi-cycle delay stage.
    """

    name: str
    latency: int
    defines: tuple[tuple[str, int, Expr], ...]
    reads: tuple[str, ...] = ()

    @classmethod
    def wire(cls, name, defines, reads=()):
        return cls(name, 0, tuple(defines), tuple(reads))

    @classmethod
    def reg(cls, name, defines, reads=()):
        return cls(name, 1, tuple(defines), tuple(reads))

    @classmethod
    def delay(cls, name, cycles, defines, reads=()):
        if cycles < 2:
            raise ValueError("delay steps take >= 2 cycles; use wire/reg instead")
        return cls(name, cycles, tuple(defines), tuple(reads))


@dataclass(frozen=True)
class MissingRelation:
    signal: str
    available_zone: str
    needing_zone: str
    depth: int
    width: int


@dataclass
class OutputSpec:
    zone: str
    mapping: list[tuple[str, str]]  # (port name, source signal)


@dataclass
class SyncGraph:
    name: str
    zones: dict[str, TimeZone] = field(default_factory=dict)
    relations: list[Relation] = field(default_factory=list)
    input_zone: str = INIT_ZONE
    outputs: list[OutputSpec] = field(default_factory=list)
    steps: dict[str, StepBody] = field(default_factory=dict)
    decls: dict[str, SignalDecl] = field(default_factory=dict)
    balanced: bool = False

    # -- basic accessors ---------------------------------------------------

    @property
    def output_zones(self) -> list[str]:
        return [o.zone for o in self.outputs]

    def zone(self, zone_id: str) -> TimeZone:
        return self.zones[zone_id]

    def copy(self) -> "SyncGraph":
        return copy.deepcopy(self)

    def signal_width(self, name: str) -> int:
        return self.decls[name].width

    def structural_relations(self) -> list[Relation]:
        return [r for r in self.relations if r.structural]

    def inbound(self, zone_id: str, structural: bool = True) -> list[Relation]:
        return [r for r in self.relations
                if r.sink == zone_id and (r.structural or not structural)]

    # -- ordering ----------------------------------------------------------

    def forward_order(self) -> list[str]:
        """Zone ids in elaboration order: a topological order that visits
        split-off branches before continuing the splitting branch."""
        order = list(self.zones)
        index = {z: i for i, z in enumerate(order)}
        for rel in self.structural_relations():
            if index[rel.source] >= index[rel.sink]:
                raise CycleDetectedError(
                    f"relation {rel.source} -> {rel.sink} violates forward order")
        return order

    def backward_order(self) -> list[str]:
        return list(reversed(self.forward_order()))

    # -- latency arithmetic ------------------------------------------------

    def path_sums(self, src: str, dst: str) -> set[int]:
        """All structural-path latency sums from src to dst (empty if no path)."""
        if src not in self.zones or dst not in self.zones:
            raise NoPathError(f"unknown zone in query {src!r} -> {dst!r}")
        sums: dict[str, set[int]] = {src: {0}}
        for z in self.forward_order():
            if z not in sums:
                continue
            for rel in self.relations:
                if not rel.structural or rel.source != z:
                    continue
                if rel.latency is None:
                    raise MissingLatencyError(
                        f"relation {rel.source} -> {rel.sink} has no latency yet")
                nxt = sums.setdefault(rel.sink, set())
                nxt.update(s + rel.latency for s in sums[z])
        return sums.get(dst, set())

    def equivalent_latency(self, src: str, dst: str) -> int:
        if src == dst:
            return 0
        sums = self.path_sums(src, dst)
        if not sums:
            raise NoPathError(f"no path from {src!r} to {dst!r}")
        if len(sums) > 1:
            raise UnbalancedPathsError(
                f"paths {src!r} -> {dst!r} disagree: {sorted(sums)}")
        return next(iter(sums))

    def depths(self) -> dict[str, int]:
        """Latency from the input zone to every zone (requires balanced merges)."""
        depths: dict[str, int] = {self.input_zone: 0}
        for z in self.forward_order():
            if z == self.input_zone:
                continue
            cands = set()
            for rel in self.inbound(z):
                if rel.latency is None:
                    raise MissingLatencyError(
                        f"merge edge {rel.source} -> {rel.sink} not balanced yet")
                cands.add(depths[rel.source] + rel.latency)
            if not cands:
                raise NoPathError(f"zone {z!r} unreachable from input")
            if len(cands) > 1:
                raise UnbalancedPathsError(
                    f"input paths to {z!r} disagree: {sorted(cands)}")
            depths[z] = next(iter(cands))
        return depths

    def ancestors(self, zone_id: str) -> set[str]:
        preds: dict[str, set[str]] = {z: set() for z in self.zones}
        for rel in self.structural_relations():
            preds[rel.sink].add(rel.source)
        seen: set[str] = set()
        stack = list(preds[zone_id])
        while stack:
            z = stack.pop()
            if z in seen:
                continue
            seen.add(z)
            stack.extend(preds[z])
        return seen

    # -- missing relations -------------------------------------------------

    def missing_relations(self) -> list[MissingRelation]:
        """Characterize every pending slot as (signal, available, needing, depth).

        The available zone is the nearest upstream zone holding the signal,
        counting both the declaration and prior (pending or propagated) uses;
        ties break on forward-order position.  Requires balanced merges.
        """
        if not self.balanced:
            raise MissingLatencyError("missing_relations requires a balanced graph")
        depths = self.depths()
        order = self.forward_order()
        pos = {z: i for i, z in enumerate(order)}
        out: list[MissingRelation] = []
        for z in order:
            for slot in self.zones[z].slots.values():
                if slot.status is not SignalStatus.PENDING_LOCAL:
                    continue
                anc = self.ancestors(z)
                cands = [a for a in anc if slot.signal in self.zones[a].slots]
                if not cands:
                    raise UnknownSignalError(slot.signal, z)
                best = max(cands, key=lambda a: (depths[a], pos[a]))
                out.append(MissingRelation(
                    signal=slot.signal,
                    available_zone=best,
                    needing_zone=z,
                    depth=depths[z] - depths[best],
                    width=slot.width,
                ))
        return out

    def pending_count(self) -> int:
        return sum(1 for z in self.zones.values() for s in z.slots.values()
                   if s.status is SignalStatus.PENDING_LOCAL)


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


@dataclass
class _Branch:
    name: str
    parent: "_Branch | None"
    items: list = field(default_factory=list)
    closed: bool = False
    # set while the recorded program is replayed by build()
    tip: str | None = None

    def _check_open(self):
        if self.closed:
            raise BranchClosedError(f"branch {self.name!r} is closed")


class PipeBuilder:
    """Records a pipeline description; :meth:`build` elaborates the graph.

    The builder is single-owner and single-threaded; the built graph is
    immutable by convention and safe to share read-only.
    """

    def __init__(self, input_signals: list[tuple[str, int]], name: str):
        self.name = name
        self._declared: dict[str, int] = {}
        self._step_names: set[str] = set()
        for sig, width in input_signals:
            if sig in self._declared:
                raise DuplicateSignalError(f"duplicate input signal {sig!r}")
            if width < 1:
                raise ZeroWidthError(f"input signal {sig!r} has width {width}")
            self._declared[sig] = width
        self.main = _Branch("main", parent=None)
        self._branches: dict[str, _Branch] = {"main": self.main}
        self._built = False

    # -- recording ---------------------------------------------------------

    def add_step(self, branch: _Branch, body: StepBody) -> _Branch:
        branch._check_open()
        if body.name in self._step_names or body.name == INIT_ZONE:
            raise PipeforgeError(f"duplicate step name {body.name!r}")
        for sig, width, _ in body.defines:
            if sig in self._declared:
                raise DuplicateSignalError(f"signal {sig!r} already declared")
            if width < 1:
                raise ZeroWidthError(f"signal {sig!r} has width {width}")
            self._declared[sig] = width
        self._step_names.add(body.name)
        branch.items.append(("step", body))
        return branch

    def split(self, branch_name: str, from_branch: _Branch | None = None) -> _Branch:
        parent = from_branch or self.main
        parent._check_open()
        if branch_name in self._branches:
            raise PipeforgeError(f"branch {branch_name!r} already exists")
        child = _Branch(branch_name, parent=parent)
        self._branches[branch_name] = child
        parent.items.append(("split", child))
        return child

    def merge(self, *branches: _Branch, into: _Branch | None = None) -> _Branch:
        target = into or self.main
        target._check_open()
        if not branches:
            raise PipeforgeError("merge needs at least one branch")
        for b in branches:
            if b is target:
                raise SelfMergeError(f"cannot merge branch {b.name!r} into itself")
            b._check_open()
        for b in branches:
            b.closed = True
        target.items.append(("merge", list(branches)))
        return target

    def drive_output(self, mapping: list[tuple[str, str]],
                     branch: _Branch | None = None) -> None:
        target = branch or self.main
        target._check_open()
        seen = set()
        for port, src in mapping:
            if port in seen:
                raise DuplicateSignalError(f"duplicate output port {port!r}")
            seen.add(port)
            if src not in self._declared:
                raise UnknownSignalError(src, "<output>")
        target.items.append(("output", list(mapping)))
        target.closed = True

    # -- elaboration -------------------------------------------------------

    def build(self) -> SyncGraph:
        if self._built:
            raise PipeforgeError("build() may only be called once")
        self._built = True
        for b in self._branches.values():
            if not b.closed:
                raise PipeforgeError(
                    f"branch {b.name!r} is neither merged nor driven to an output")
        g = SyncGraph(name=self.name)
        init = TimeZone(INIT_ZONE, INIT_ZONE, ZoneKind.INPUT)
        for sig, width in self._input_decls():
            init.slots[sig] = Slot(sig, width, SignalStatus.CONNECTED_EXTERNAL, INIT_ZONE)
            g.decls[sig] = SignalDecl(sig, width, INIT_ZONE)
        g.zones[INIT_ZONE] = init
        self._walk(g, self.main, INIT_ZONE)
        if not g.outputs:
            raise PipeforgeError("pipeline has no output")
        g.forward_order()  # asserts acyclicity
        return g

    def _input_decls(self):
        step_defined = set()
        for b in self._branches.values():
            for kind, payload in ((i[0], i[1]) for i in b.items):
                if kind == "step":
                    step_defined.update(s for s, _, _ in payload.defines)
        return [(s, w) for s, w in self._declared.items() if s not in step_defined]

    def _walk(self, g: SyncGraph, branch: _Branch, tip: str) -> None:
        branch.tip = tip
        for kind, payload in branch.items:
            if kind == "split":
                self._walk(g, payload, branch.tip)
            elif kind == "step":
                branch.tip = self._emit_step(g, branch.tip, payload)
            elif kind == "merge":
                branch.tip = self._emit_merge(g, branch.tip, payload)
            elif kind == "output":
                self._emit_output(g, branch.tip, payload)

    def _emit_step(self, g: SyncGraph, tip: str, body: StepBody) -> str:
        zone = TimeZone(body.name, body.name, ZoneKind.STEP)
        g.zones[body.name] = zone
        g.relations.append(Relation(
            tip, body.name, body.latency, RelationOrigin.USER_STEP,
            RelationKind.STEP, signals=[s for s, _, _ in body.defines]))
        g.steps[body.name] = body
        for r in body.reads:
            self._resolve_read(g, tip, r, body.name)
        local: set[str] = set()
        for sig, width, expr in body.defines:
            for r in sorted(expr.refs() - local):
                self._resolve_read(g, tip, r, body.name)
            if body.latency == 0:
                # chained combinational defines within one wire step may read
                # each other in definition order
                local.add(sig)
            zone.slots[sig] = Slot(sig, width, SignalStatus.DECLARED_UNUSED, body.name)
            g.decls[sig] = SignalDecl(sig, width, body.name)
        return body.name

    def _emit_merge(self, g: SyncGraph, tip: str, branches: list[_Branch]) -> str:
        first = branches[0]
        last_step = first.name
        for kind, payload in reversed(first.items):
            if kind == "step":
                last_step = payload.name
                break
        zid = f"merged_{first.name}_{last_step}"
        if zid in g.zones:
            raise PipeforgeError(f"duplicate merge zone {zid!r}")
        zone = TimeZone(zid, zid, ZoneKind.MERGE)
        g.zones[zid] = zone
        tips: list[str] = []
        for b in branches:
            if b.tip is None:
                raise PipeforgeError(f"branch {b.name!r} merged before being split")
            if b.tip not in tips:
                tips.append(b.tip)
        if tip not in tips:
            tips.append(tip)
        for t in tips:
            carried = [s.signal for s in g.zones[t].slots.values()
                       if s.status is not SignalStatus.PENDING_LOCAL
                       and s.signal not in zone.slots]
            g.relations.append(Relation(
                t, zid, None, RelationOrigin.USER_STEP, RelationKind.MERGE,
                signals=carried))
            for sig in carried:
                src = g.zones[t].slots[sig]
                zone.slots[sig] = Slot(sig, src.width, SignalStatus.PROPAGATED,
                                       src.decl_zone, fed_from=(t, None))
        return zid

    def _emit_output(self, g: SyncGraph, tip: str, mapping: list[tuple[str, str]]):
        if g.zones[tip].kind is ZoneKind.INPUT:
            zid = "out"
            n = 2
            while zid in g.zones:
                zid = f"out{n}"
                n += 1
            zone = TimeZone(zid, zid, ZoneKind.OUTPUT)
            g.zones[zid] = zone
            srcs = []
            for _, src in mapping:
                self._resolve_read(g, tip, src, zid)
                if src not in srcs:
                    srcs.append(src)
            g.relations.append(Relation(
                tip, zid, 0, RelationOrigin.USER_STEP, RelationKind.STEP,
                signals=srcs))
            for src in srcs:
                s = g.zones[tip].slots[src]
                zone.slots[src] = Slot(src, s.width, SignalStatus.PROPAGATED,
                                       s.decl_zone, fed_from=(tip, 0))
            g.outputs.append(OutputSpec(zid, list(mapping)))
        else:
            for _, src in mapping:
                self._resolve_read(g, tip, src, tip)
            g.outputs.append(OutputSpec(tip, list(mapping)))

    def _resolve_read(self, g: SyncGraph, source_zone: str, name: str,
                      requiring_zone: str) -> None:
        zone = g.zones[source_zone]
        if name in zone.slots:
            slot = zone.slots[name]
            if slot.status is SignalStatus.DECLARED_UNUSED:
                slot.status = SignalStatus.DECLARED_LOCAL_USE
            return
        decl = g.decls.get(name)
        if decl is None or (decl.declaring_zone != source_zone
                            and decl.declaring_zone not in g.ancestors(source_zone)):
            raise UnknownSignalError(name, requiring_zone)
        zone.slots[name] = Slot(name, decl.width, SignalStatus.PENDING_LOCAL,
                                decl.declaring_zone)
        g.relations.append(Relation(
            decl.declaring_zone, source_zone, None, RelationOrigin.USER_STEP,
            RelationKind.EQUIVALENT, signals=[name]))


def pipe_new(input_signals: list[tuple[str, int]], name: str) -> PipeBuilder:
    """Create a pipeline builder with an ``_init_`` input zone."""
    return PipeBuilder(input_signals, name)
