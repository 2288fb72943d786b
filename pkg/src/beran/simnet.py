"""Deterministic discrete-event simulation of a DU subnet.

UEs attach through RUs to a DU that hosts a BC node (ledger) and a
BE-switch. RUs are transparent relays. Bridges join DU domains and add one
hop to every frame crossing them. CU/CN nodes only exist so their links can
be failed: nothing in the flow depends on them.

Time is integer ticks; each link adds ``latency_ticks``. Events are ordered
by ``(tick, sequence)`` and all randomness comes from the configured seed,
so a given (config, seed) always yields the same trace.
"""

from __future__ import annotations

import enum
import heapq
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from . import bemutual as bm
from . import crypto
from .beswitch import BeMacFrame, BeSwitch, FrameKind, SwitchRejected, frame_hexline, registry_frame
from .crypto import BcAddress, KeyPair
from .ledger import Ledger, LedgerRejected, PhysicalAddress, make_binding

TIMEOUT_TICKS = 64


class NodeRole(enum.Enum):
    UE = "UE"
    RU = "RU"
    DU = "DU"
    BC_NODE = "BcNode"
    BE_SWITCH = "BeSwitch"
    BRIDGE = "Bridge"
    CU = "CU"
    CN = "CN"


class ConfigError(ValueError):
    pass


@dataclass
class NodeDescriptor:
    node_id: str
    role: NodeRole
    attachments: List[str] = field(default_factory=list)
    identity: Optional[KeyPair] = None
    mac: Optional[bytes] = None
    contacts: List[str] = field(default_factory=list)

    @property
    def bc_address(self) -> Optional[BcAddress]:
        return None if self.identity is None else crypto.derive_bc_address(self.identity.public_key)


@dataclass
class Link:
    link_id: str
    endpoints: Tuple[str, str]
    latency_ticks: int = 1
    down_from: Optional[int] = None
    adversary: Optional[str] = None

    def is_up(self, tick: int) -> bool:
        return self.down_from is None or tick < self.down_from

    def state(self, tick: int) -> str:
        return "Up" if self.is_up(tick) else "Down"

    def other(self, node_id: str) -> str:
        a, b = self.endpoints
        return b if node_id == a else a


@dataclass(frozen=True)
class LedgerSync:
    """msg3 payload: the DU BC node's chain, addressed to one UE."""

    destination_mac: bytes
    chain: tuple


@dataclass(order=True)
class SimEvent:
    tick: int
    sequence: int
    source: str = field(compare=False)
    destination: str = field(compare=False)
    link_id: str = field(compare=False)
    label: str = field(compare=False)
    payload: Any = field(compare=False)
    hops: int = field(compare=False, default=0)
    sent_at: int = field(compare=False, default=0)


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    label: str
    source: str
    destination: str
    outcome: str
    link_id: Optional[str] = None
    sent_at: Optional[int] = None

    def line(self) -> str:
        return f"{self.tick:04d} {self.label} {self.source} {self.destination} {self.outcome}"


@dataclass
class Trace:
    events: List[TraceEvent] = field(default_factory=list)
    frames: List[str] = field(default_factory=list)
    established: bool = False
    failure: Optional[str] = None
    keys: Dict[str, bm.SessionKey] = field(default_factory=dict)

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)

    def lines(self) -> List[str]:
        return [e.line() for e in self.events]

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def labels(self) -> List[str]:
        """Distinct labels in order of first appearance."""
        seen: Dict[str, None] = {}
        for e in self.events:
            seen.setdefault(e.label, None)
        return list(seen)

    def message_labels(self) -> List[str]:
        return [l for l in self.labels() if l.startswith("msg")]

    @property
    def keys_match(self) -> bool:
        vals = list(self.keys.values())
        return len(vals) == 2 and vals[0].bits == vals[1].bits


# --------------------------------------------------------------------------
# runtime node state


@dataclass(eq=False)
class UeRuntime:
    desc: NodeDescriptor
    party: bm.Party
    ledger: Ledger
    contacts: Dict[BcAddress, str]
    label_prefix: str = ""
    handshake: Optional[bm.HandshakeState] = None


@dataclass(eq=False)
class DuRuntime:
    desc: NodeDescriptor
    party: bm.Party
    ledger: Ledger
    switch: BeSwitch
    uplinks: List[str]


class Simulation:
    def __init__(self, seed: int, suite: crypto.CryptoSuite):
        self.seed = seed
        self.suite = suite
        self.nodes: Dict[str, NodeDescriptor] = {}
        self.links: Dict[str, Link] = {}
        self.neighbors: Dict[str, Dict[str, str]] = {}
        self.ues: Dict[str, UeRuntime] = {}
        self.dus: Dict[str, DuRuntime] = {}
        self.preregistered: Optional[List[str]] = None
        self._reset_run()

    # -- plumbing -----------------------------------------------------------

    def _reset_run(self) -> None:
        self.now = 0
        self._queue: List[SimEvent] = []
        self._seq = 0
        self._rng = random.Random(f"{self.seed}/events")
        self.trace = Trace()
        self._done = False
        self._last_progress = 0
        self._awaiting = "start"
        self._pending_attach: List[Tuple[str, str]] = []

    def _role(self, node_id: str) -> NodeRole:
        return self.nodes[node_id].role

    def neighbor_with_role(self, node_id: str, role: NodeRole) -> List[str]:
        return sorted(n for n in self.neighbors[node_id] if self._role(n) is role)

    def _note(self, label: str, source: str, destination: str, outcome: str) -> None:
        self.trace.append(TraceEvent(self.now, label, source, destination, outcome))

    def _finish(self, established: bool, outcome: str, source: str = "-", destination: str = "-") -> None:
        if self._done:
            return
        self._done = True
        self.trace.established = established
        if not established:
            self.trace.failure = outcome
        self._note("outcome", source, destination, outcome)

    def _send(self, src: str, dst: str, payload, label: str, hops: int = 0) -> None:
        link_id = self.neighbors[src].get(dst)
        if link_id is None:
            raise ConfigError(f"no link between {src} and {dst}")
        link = self.links[link_id]
        self._awaiting = label
        if not link.is_up(self.now):
            self.trace.append(TraceEvent(self.now, label, src, dst, "dropped:link-down", link_id, self.now))
            return
        if link.adversary == "bitflip":
            payload = self._tamper(payload)
        self._seq += 1
        heapq.heappush(self._queue, SimEvent(self.now + link.latency_ticks, self._seq, src, dst, link_id,
                                             label, payload, hops, self.now))

    def _tamper(self, payload):
        if isinstance(payload, (bytes, bytearray)):
            buf = bytearray(payload)
            bit = self._rng.randrange(len(buf) * 8)
            buf[bit // 8] ^= 1 << (bit % 8)
            return bytes(buf)
        if isinstance(payload, BeMacFrame) and payload.kind is FrameKind.DATA and payload.payload:
            return BeMacFrame(payload.kind, payload.destination_bc_address, payload.source_bc_address,
                              payload.source_mac, payload.destination_mac, self._tamper(payload.payload),
                              payload.registry)
        return payload

    def _run_loop(self) -> Trace:
        while not self._done:
            if not self._queue:
                self._timeout()
                break
            ev = heapq.heappop(self._queue)
            if ev.tick > self._last_progress + TIMEOUT_TICKS:
                self._timeout()
                break
            self.now = ev.tick
            link = self.links[ev.link_id]
            if not link.is_up(ev.tick):
                self.trace.append(TraceEvent(ev.tick, ev.label, ev.source, ev.destination,
                                             "dropped:in-flight", ev.link_id, ev.sent_at))
                continue
            self._last_progress = ev.tick
            self.trace.append(TraceEvent(ev.tick, ev.label, ev.source, ev.destination,
                                         "ok", ev.link_id, ev.sent_at))
            if isinstance(ev.payload, BeMacFrame):
                self.trace.frames.append(frame_hexline(ev.tick, ev.link_id, ev.payload))
            self._dispatch(ev)
        return self.trace

    def _timeout(self) -> None:
        self.now = self._last_progress + TIMEOUT_TICKS
        self._note("timeout", "-", "-", f"awaiting:{self._awaiting}")
        self._finish(False, "Failed:Timeout")

    def _dispatch(self, ev: SimEvent) -> None:
        role = self._role(ev.destination)
        if role is NodeRole.UE:
            self._on_ue(ev)
        elif role is NodeRole.RU:
            self._on_ru(ev)
        elif role is NodeRole.DU:
            self._on_du(ev)
        elif role is NodeRole.BRIDGE:
            self._on_bridge(ev)
        # CU/CN: sink

    # -- RU: transparent relay ----------------------------------------------

    _RU_UPLINK_LABELS = {"msg1": "msg2"}
    _RU_DOWNLINK_LABELS = {"msg4": "msg5"}

    @staticmethod
    def _relabel(label: str, mapping: Dict[str, str]) -> str:
        prefix, _, base = label.rpartition("-")
        new = mapping.get(base, base)
        return f"{prefix}-{new}" if prefix else new

    def _on_ru(self, ev: SimEvent) -> None:
        ru = ev.destination
        if self._role(ev.source) is NodeRole.UE:
            dus = self.neighbor_with_role(ru, NodeRole.DU)
            self._send(ru, dus[0], ev.payload, self._relabel(ev.label, self._RU_UPLINK_LABELS), ev.hops)
            return
        mac = ev.payload.destination_mac
        for ue in self.neighbor_with_role(ru, NodeRole.UE):
            if self.nodes[ue].mac == mac:
                self._send(ru, ue, ev.payload, self._relabel(ev.label, self._RU_DOWNLINK_LABELS), ev.hops)
                return
        self._note(ev.label, ru, "-", "drop:UnknownMac")

    # -- bridge -------------------------------------------------------------

    def _on_bridge(self, ev: SimEvent) -> None:
        if ev.hops >= 1:
            self._note(ev.label, ev.destination, "-", "drop:LoopPrevented")
            return
        others = [n for n in self.neighbor_with_role(ev.destination, NodeRole.DU) if n != ev.source]
        if not others:
            self._note(ev.label, ev.destination, "-", "drop:NoPeerDomain")
            return
        self._send(ev.destination, others[0], ev.payload, ev.label, ev.hops + 1)

    # -- DU: BC node + BE-switch --------------------------------------------

    _SWITCH_LABELS = {"msg6": "msg8", "msg9": "msg10"}

    def _on_du(self, ev: SimEvent) -> None:
        du = self.dus[ev.destination]
        frame = ev.payload
        if not isinstance(frame, BeMacFrame):
            return
        port = ev.link_id
        if frame.kind is FrameKind.REGISTRY:
            self._du_register(du, frame, port, ev.label)
            return
        node = du.desc.node_id
        decision = du.switch.forward(frame, port, ev.hops, self.now)
        label = self._relabel(ev.label, self._SWITCH_LABELS)
        if frame.kind is FrameKind.CONNECT:
            # the switch's ledger lookup is its own trace step
            self._note("msg7", node, node, str(decision))
            frame = BeMacFrame(FrameKind.CONTROL, frame.destination_bc_address, frame.source_bc_address,
                               frame.source_mac, None, b"connect")
        elif decision.action == "drop":
            self._note(label, node, "-", str(decision))
        if decision.action == "drop":
            self._finish(False, f"Failed:{decision.reason}", node, node)
            return
        port_node = self.links[decision.port].other(du.desc.node_id)
        if decision.action == "deliver":
            frame = frame.with_destination_mac(decision.mac)
        self._send(du.desc.node_id, port_node, frame, label, ev.hops)

    def _du_register(self, du: DuRuntime, frame: BeMacFrame, port: str, label: str) -> None:
        prefix = label.rpartition("-")[0]
        pre = f"{prefix}-" if prefix else ""
        node = du.desc.node_id
        try:
            du.switch.register_from_frame(frame, port, self.now)
        except SwitchRejected as exc:
            self._note(f"{pre}msg2", node, node, f"rejected:{exc.reason}")
            self._finish(False, f"Failed:{exc.reason}", node, node)
            return
        block = du.ledger.commit_block()
        du.switch.on_commit(block, self.now)
        ru = self.links[port].other(node)
        self._send(node, ru, LedgerSync(frame.source_mac, du.ledger.chain), f"{pre}msg3")
        notice = BeMacFrame(FrameKind.CONTROL, frame.source_bc_address, du.party.bc_address,
                            du.desc.mac, frame.source_mac, b"registered")
        self._send(node, ru, notice, f"{pre}msg4")

    # -- UE -------------------------------------------------------------------

    def _ru_of(self, ue_id: str) -> str:
        rus = self.neighbor_with_role(ue_id, NodeRole.RU)
        if not rus:
            raise ConfigError(f"{ue_id} is not attached to an RU")
        return rus[0]

    def _du_of(self, ue_id: str) -> str:
        return self.neighbor_with_role(self._ru_of(ue_id), NodeRole.DU)[0]

    def _attach(self, ue_id: str, prefix: str = "") -> None:
        ue = self.ues[ue_id]
        ue.label_prefix = prefix
        seq = ue.ledger.index.sequences.get(ue.party.bc_address, -1) + 1
        record = make_binding(ue.party.keypair, PhysicalAddress.mac(ue.desc.mac), seq, self.now)
        du = self.dus[self._du_of(ue_id)]
        self._send(ue_id, self._ru_of(ue_id), registry_frame(record, du.party.bc_address), f"{prefix}msg1")

    def _frame_to(self, ue: UeRuntime, peer: BcAddress, kind: FrameKind, payload: bytes) -> BeMacFrame:
        return BeMacFrame(kind, peer, ue.party.bc_address, ue.desc.mac, None, payload)

    def _on_ue(self, ev: SimEvent) -> None:
        ue = self.ues[ev.destination]
        me = ue.desc.node_id
        payload = ev.payload
        if isinstance(payload, LedgerSync):
            try:
                ue.ledger.sync_from(payload.chain)
            except LedgerRejected as exc:
                self._note(ev.label, me, me, f"sync-rejected:{exc.reason.value}")
            return
        if isinstance(payload, (bytes, bytearray)):
            # D2D: raw handshake messages
            self._ue_handshake(ue, ev.source, payload, ev.label, direct=True)
            return
        frame: BeMacFrame = payload
        if frame.kind is FrameKind.CONTROL and frame.payload == b"registered":
            self._on_registered(me)
        elif frame.kind is FrameKind.CONTROL and frame.payload == b"connect":
            reply = self._frame_to(ue, frame.source_bc_address, FrameKind.CONTROL, b"page")
            self._send(me, self._ru_of(me), reply, "msg9")
        elif frame.kind is FrameKind.CONTROL and frame.payload == b"page":
            self._start_handshake(me, frame.source_bc_address, direct=False)
        elif frame.kind is FrameKind.DATA:
            self._ue_handshake(ue, frame.source_bc_address, frame.payload, ev.label, direct=False)

    def _on_registered(self, ue_id: str) -> None:
        if self._pending_attach:
            self._attach(*self._pending_attach.pop(0))
            return
        if ue_id == self._caller:
            callee_bc = self.ues[self._callee].party.bc_address
            ue = self.ues[ue_id]
            if callee_bc not in ue.contacts:
                self._finish(False, "Failed:CalleeNotInContacts", ue_id, self._callee)
                return
            self._send(ue_id, self._ru_of(ue_id), self._frame_to(ue, callee_bc, FrameKind.CONNECT, b""), "msg6")

    def _transmit(self, src: str, dst: str, peer_bc: BcAddress, data: bytes, label: str, direct: bool) -> None:
        if direct:
            self._send(src, dst, data, label)
        else:
            self._send(src, self._ru_of(src), self._frame_to(self.ues[src], peer_bc, FrameKind.DATA, data), label)

    def _start_handshake(self, ue_id: str, peer_bc: BcAddress, direct: bool, peer_id: Optional[str] = None) -> None:
        ue = self.ues[ue_id]
        ledger = None if direct else ue.ledger
        ue.handshake, request = bm.initiate(ue.party, peer_bc, ledger)
        self._transmit(ue_id, peer_id, peer_bc, bm.encode(request), "hs1", direct)

    def _ue_handshake(self, ue: UeRuntime, source, data: bytes, label: str, direct: bool) -> None:
        me = ue.desc.node_id
        try:
            msg = bm.decode(data)
            if isinstance(msg, bm.AuthRequest):
                peer_bc = crypto.derive_bc_address(msg.sender_public_key)
                if direct:
                    trusted = [bc for bc, nid in ue.contacts.items() if nid == source]
                else:
                    trusted = [source] if source in ue.contacts else []
                if not trusted:
                    raise bm.HandshakeFailure(bm.FailureReason.ADDRESS_KEY_MISMATCH, "sender not in contacts")
                ue.handshake, response = bm.respond(ue.party, msg, trusted[0])
                self._transmit(me, source, trusted[0], bm.encode(response), "hs2", direct)
            elif isinstance(msg, bm.AuthResponse):
                if ue.handshake is None:
                    raise bm.HandshakeFailure(bm.FailureReason.WRONG_PHASE, "no handshake in progress")
                confirm, key = bm.confirm(ue.handshake, msg, self.now)
                self.trace.keys[me] = key
                self._transmit(me, source, ue.handshake.trusted_peer, bm.encode(confirm), "hs3", direct)
            else:
                if ue.handshake is None:
                    raise bm.HandshakeFailure(bm.FailureReason.WRONG_PHASE, "no handshake in progress")
                key = bm.finalize(ue.handshake, msg, self.now)
                self.trace.keys[me] = key
                peer = [k for k in self.trace.keys if k != me]
                if self.trace.keys_match:
                    self._finish(True, f"Established:{key.fingerprint()}", peer[0] if peer else "-", me)
                else:
                    self._finish(False, "Failed:KeyMismatch", peer[0] if peer else "-", me)
        except bm.CodecError:
            self._note(label, me, me, "rejected:Malformed")
            self._finish(False, "Failed:Malformed", me, me)
        except bm.HandshakeFailure as exc:
            self._note(label, me, me, f"rejected:{exc.reason.value}")
            self._finish(False, f"Failed:{exc.reason.value}", me, me)

    # -- scenarios ------------------------------------------------------------

    def run_emergency_scenario(self, caller: str, callee: str) -> Trace:
        for ue in (caller, callee):
            if ue not in self.ues:
                raise ConfigError(f"{ue} is not a UE")
            self._ru_of(ue)
        self._reset_run()
        self._caller, self._callee = caller, callee
        for du_id in sorted(self.dus):
            du = self.dus[du_id]
            states = [self.links[l].state(0) for l in du.uplinks]
            if du.uplinks:
                mode = "up" if any(s == "Up" for s in states) else "down:local-authentication"
                self._note("uplink", du_id, ",".join(self.links[l].other(du_id) for l in du.uplinks), mode)
        prereg = [callee] if self.preregistered is None else list(self.preregistered)
        order = [(u, "setup-") for u in prereg if u != caller] + [(caller, "")]
        self._pending_attach = order[1:]
        self._attach(*order[0])
        return self._run_loop()

    def run_d2d_handshake(self, a: str, b: str) -> Trace:
        if b not in self.neighbors.get(a, {}):
            raise ConfigError(f"{a} and {b} share no direct link")
        self._reset_run()
        self._pending_attach = []
        self._caller, self._callee = a, b
        peer_bc = self.ues[b].party.bc_address
        if peer_bc not in self.ues[a].contacts:
            raise ConfigError(f"{b} is not in {a}'s contacts")
        self._start_handshake(a, peer_bc, direct=True, peer_id=b)
        return self._run_loop()


# --------------------------------------------------------------------------
# construction


def _identity_seed(seed: int, node_id: str, override=None) -> bytes:
    if override is not None:
        return crypto.sha256(b"beran/node-seed", str(override).encode())
    return crypto.sha256(b"beran/node-seed", f"{seed}/{node_id}".encode())


def _default_mac(node_id: str) -> bytes:
    # locally administered unicast
    return b"\x02" + crypto.sha256(b"beran/mac", node_id.encode())[:5]


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_topology(config: dict) -> Simulation:
    """Validate a topology config and return a simulation with fresh ledgers."""
    seed = int(config.get("seed", 0))
    try:
        suite = crypto.get_suite(config.get("suite", "EllipticCurve"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sim = Simulation(seed, suite)

    for entry in config.get("nodes", []):
        node_id = entry.get("id")
        if not node_id or " " in node_id:
            raise ConfigError(f"bad node id: {node_id!r}")
        if node_id in sim.nodes:
            raise ConfigError(f"duplicate node id: {node_id}")
        try:
            role = NodeRole(entry.get("role"))
        except ValueError:
            raise ConfigError(f"{node_id}: unknown role {entry.get('role')!r}") from None
        if role in (NodeRole.BC_NODE, NodeRole.BE_SWITCH):
            raise ConfigError(f"{node_id}: {role.value} is hosted by a DU, declare the DU instead")
        desc = NodeDescriptor(node_id, role, contacts=list(entry.get("contacts", [])))
        if role in (NodeRole.UE, NodeRole.DU):
            desc.identity = crypto.generate_keypair(suite, _identity_seed(seed, node_id, entry.get("seed")))
            desc.mac = PhysicalAddress.mac(entry["mac"]).value if "mac" in entry else _default_mac(node_id)
        sim.nodes[node_id] = desc
        sim.neighbors[node_id] = {}

    for entry in config.get("links", []):
        a, b = entry.get("a"), entry.get("b")
        link_id = entry.get("id") or f"{a}~{b}"
        if link_id in sim.links:
            raise ConfigError(f"duplicate link id: {link_id}")
        for end in (a, b):
            if end not in sim.nodes:
                raise ConfigError(f"link {link_id} references undeclared node {end!r}")
        if a == b or b in sim.neighbors[a]:
            raise ConfigError(f"link {link_id}: self-loop or parallel link")
        latency = int(entry.get("latency", 1))
        if latency < 0:
            raise ConfigError(f"link {link_id}: negative latency")
        sim.links[link_id] = Link(link_id, (a, b), latency, adversary=entry.get("adversary"))
        sim.neighbors[a][b] = link_id
        sim.neighbors[b][a] = link_id
        sim.nodes[a].attachments.append(link_id)
        sim.nodes[b].attachments.append(link_id)

    ue_addrs = {n: d.bc_address for n, d in sim.nodes.items() if d.role is NodeRole.UE}
    balance = int(config.get("initial_balance", 10))
    genesis = {addr: balance for addr in ue_addrs.values()}

    for node_id, desc in sim.nodes.items():
        if desc.role is NodeRole.RU and len(sim.neighbor_with_role(node_id, NodeRole.DU)) != 1:
            raise ConfigError(f"RU {node_id} must link to exactly one DU")
        if desc.role is NodeRole.BRIDGE and len(sim.neighbor_with_role(node_id, NodeRole.DU)) != 2:
            raise ConfigError(f"bridge {node_id} must join exactly two DUs")
        if desc.role is NodeRole.UE:
            if len(sim.neighbor_with_role(node_id, NodeRole.RU)) > 1:
                raise ConfigError(f"UE {node_id} is attached to more than one RU")
            contacts = {}
            for c in desc.contacts:
                if c not in ue_addrs:
                    raise ConfigError(f"{node_id}: contact {c!r} is not a declared UE")
                contacts[ue_addrs[c]] = c
            party = bm.Party(desc.identity, PhysicalAddress.mac(desc.mac),
                             randbytes=random.Random(f"{seed}/{node_id}").randbytes)
            sim.ues[node_id] = UeRuntime(desc, party, Ledger(genesis), contacts)
        elif desc.role is NodeRole.DU:
            ledger = Ledger(genesis)
            bridges = [sim.neighbors[node_id][b] for b in sim.neighbor_with_role(node_id, NodeRole.BRIDGE)]
            uplinks = [sim.neighbors[node_id][n] for n in sorted(sim.neighbors[node_id])
                       if sim.nodes[n].role in (NodeRole.CU, NodeRole.CN)]
            switch = BeSwitch(ledger, bridges, config.get("min_balance"))
            party = bm.Party(desc.identity, PhysicalAddress.mac(desc.mac),
                             randbytes=random.Random(f"{seed}/{node_id}").randbytes)
            sim.dus[node_id] = DuRuntime(desc, party, ledger, switch, uplinks)

    for f in config.get("failures", []):
        inject_link_failure(sim, f.get("link"), int(f.get("at", 0)))

    scenario = config.get("scenario", {})
    if "preregistered" in scenario:
        for u in scenario["preregistered"]:
            if u not in sim.ues:
                raise ConfigError(f"preregistered node {u!r} is not a UE")
        sim.preregistered = list(scenario["preregistered"])
    sim.config = config
    return sim


def inject_link_failure(sim: Simulation, link_id: str, at_tick: int = 0) -> None:
    """Take ``link_id`` down from ``at_tick`` on (idempotent; earliest failure wins)."""
    if link_id not in sim.links:
        raise ConfigError(f"unknown link: {link_id!r}")
    link = sim.links[link_id]
    link.down_from = at_tick if link.down_from is None else min(link.down_from, at_tick)


def run_emergency_scenario(sim: Simulation, caller: str, callee: str) -> Trace:
    return sim.run_emergency_scenario(caller, callee)


def run_d2d_handshake(sim: Simulation, a: str, b: str) -> Trace:
    return sim.run_d2d_handshake(a, b)


def run_config(config: dict) -> Tuple[Simulation, Trace]:
    """Build the topology and run the scenario named in ``config['scenario']``."""
    sim = build_topology(config)
    scenario = config.get("scenario") or {}
    try:
        mode = scenario.get("mode", "emergency")
        caller, callee = scenario["caller"], scenario["callee"]
    except KeyError as exc:
        raise ConfigError(f"scenario is missing {exc}") from None
    if mode == "emergency":
        return sim, sim.run_emergency_scenario(caller, callee)
    if mode == "d2d":
        return sim, sim.run_d2d_handshake(caller, callee)
    raise ConfigError(f"unknown scenario mode {mode!r}")
