"""Deterministic discrete-event network simulator.

Time is an integer count of microseconds.  Every node runs a forwarder plus
at most one application (consumer, producer, AR or directory) attached on
``APP_FACE``.  Each node owns a single simulated CPU: work queues behind
``busy_until`` and costs come from :class:`CostModel`, not wall-clock time.
Links are full duplex, store-and-forward, with an unbounded FIFO per
direction.

Trace lines have the form ``time|node|event|name|iface``; adversary
observations are prefixed with ``view|``.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import consumer as cons
from . import crypto, packets
from .directory import Directory
from .forwarder import Drop, Forward, Forwarder, SendData
from .names import Name
from .packets import Data, Interest
from .router import AnonymizingRouter, Forwarded, NoPendingState
from .topology import APP_FACE, ConfigError, Topology

log = logging.getLogger(__name__)

SEGMENT_SIZE = 4096
PIPELINE_WINDOW = 4
REQUEST_TIMEOUT_US = 4_000_000
MAX_RETRIES = 2
NAME_ABBREV = 16

PLAIN = "plain"
ANDANA_A = "andana-a"
ANDANA_S = "andana-s"
MODES = (PLAIN, ANDANA_A, ANDANA_S)

Packet = Interest | Data

__all__ = [
    "ANDANA_A", "ANDANA_S", "MODES", "PLAIN", "Adversary", "ConfigError", "CostModel", "Fetch", "FetchMetrics", "FetchTimeout",
    "NotObserved", "Publish", "Request", "Rotate", "Simulator", "TooSoon", "TraceLog", "run",
]


class TooSoon(ValueError):
    pass


class NotObserved(LookupError):
    pass


class FetchTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Simulated CPU cost of each operation, in microseconds."""

    forward_us: int = 25
    rsa_private_us: int = 1000
    rsa_public_us: int = 60
    sym_ns_per_byte: int = 8
    dh_us: int = 120

    def sym(self, nbytes: int) -> int:
        return nbytes * self.sym_ns_per_byte // 1000


# -- workload ----------------------------------------------------------------

@dataclass(frozen=True)
class Publish:
    producer: str
    name: str | Name
    size: int


@dataclass(frozen=True)
class Fetch:
    consumer: str
    name: str | Name
    size: int
    mode: str = PLAIN
    at_ms: float = 0
    include_setup: bool = True


@dataclass(frozen=True)
class Request:
    """A single interest for ``name``."""

    consumer: str
    name: str | Name
    mode: str = PLAIN
    at_ms: float = 0


@dataclass(frozen=True)
class Rotate:
    ar: str
    at_ms: float


# -- adversary -----------------------------------------------------------------

@dataclass
class Adversary:
    compromised_producers: set[str] = field(default_factory=set)
    compromised_consumers: set[str] = field(default_factory=set)
    compromised_routers: set[str] = field(default_factory=set)
    tapped_interfaces: set[tuple[str, int]] = field(default_factory=set)
    since: dict = field(default_factory=dict)  # node or (node, iface) -> first visible µs
    learned_keys: dict[bytes, crypto.SymmetricKey] = field(default_factory=dict)

    def compromised(self) -> set[str]:
        return self.compromised_producers | self.compromised_consumers | self.compromised_routers

    def is_compromised(self, node: str, t: int) -> bool:
        return node in self.compromised() and t >= self.since.get(node, 0)

    def watches(self, node: str, iface: int, t: int) -> bool:
        if (node, iface) in self.tapped_interfaces and t >= self.since.get((node, iface), 0):
            return True
        return self.is_compromised(node, t)

    def tap(self, topology: Topology, node: str, iface: int, at: int = 0) -> None:
        self.tapped_interfaces.add((node, iface))
        self.since[(node, iface)] = at
        ifaces = topology.interfaces(node)
        role = topology.nodes[node].role
        if role in ("router", "ar") and all((node, i) in self.tapped_interfaces for i in ifaces):
            self.compromised_routers.add(node)
            self.since[node] = max(self.since.get((node, i), 0) for i in ifaces)

    def compromise(self, topology: Topology, node: str, at: int = 0) -> None:
        role = topology.nodes[node].role
        target = {"producer": self.compromised_producers,
                  "consumer": self.compromised_consumers}.get(role, self.compromised_routers)
        target.add(node)
        self.since[node] = at
        for i in topology.interfaces(node):
            self.tapped_interfaces.add((node, i))
            self.since[(node, i)] = min(self.since.get((node, i), at), at)

    def learn(self, key: crypto.SymmetricKey) -> None:
        self.learned_keys[key.key] = key


@dataclass(frozen=True)
class ViewRecord:
    time: int
    node: str
    iface: int
    direction: str
    packet: Packet
    revealed: str


# -- trace ---------------------------------------------------------------------

class TraceLog:
    def __init__(self):
        self.lines: list[str] = []

    def event(self, t: int, node: str, event: str, name: Name | str | None,
              iface: int | None) -> None:
        uri = name.to_uri(NAME_ABBREV) if isinstance(name, Name) else (name or "-")
        self.lines.append(f"{t}|{node}|{event}|{uri}|{'-' if iface is None else iface}")

    def view(self, rec: ViewRecord) -> None:
        kind = "interest" if isinstance(rec.packet, Interest) else "data"
        self.lines.append(f"view|{rec.time}|{rec.node}|{rec.iface}|{rec.direction}|{kind}|"
                          f"{rec.packet.name.to_uri(NAME_ABBREV)}|{rec.revealed}")

    def note(self, t: int, node: str, what: str, detail: str) -> None:
        self.lines.append(f"view|{t}|{node}|state|{what}|{detail}")

    def view_lines(self) -> list[str]:
        return [l for l in self.lines if l.startswith("view|")]

    def events(self, event: str, node: str | None = None) -> list[str]:
        out = []
        for line in self.lines:
            parts = line.split("|")
            if len(parts) == 5 and parts[2] == event and (node is None or parts[1] == node):
                out.append(line)
        return out

    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.text())

    def __len__(self) -> int:
        return len(self.lines)


# -- metrics -------------------------------------------------------------------

@dataclass
class FetchMetrics:
    consumer: str
    name: Name
    mode: str
    size: int
    segments: int
    include_setup: bool = True
    start_us: int = 0
    setup_us: int = 0
    end_us: int | None = None
    rtts_ms: list[float] = field(default_factory=list)
    bytes_on_wire: int = 0
    failed: list[Name] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.end_us is not None and not self.failed

    @property
    def total_ms(self) -> float:
        if self.end_us is None:
            raise FetchTimeout(f"{self.name} did not complete")
        total = self.end_us - self.start_us
        if not self.include_setup:
            total -= self.setup_us
        return total / 1000

    @property
    def setup_ms(self) -> float:
        return self.setup_us / 1000


@dataclass
class Delivery:
    time: int
    interest: Interest
    data: Data
    mode: str


# -- nodes and applications ----------------------------------------------------

class App:
    def __init__(self, node: "Node"):
        self.node = node
        self.sim = node.sim

    def on_interest(self, interest: Interest, now: int) -> None:
        self.node.trace(now, "app-drop", interest.name, APP_FACE)

    def on_data(self, data: Data, now: int) -> None:
        self.node.trace(now, "app-drop", data.name, APP_FACE)


class ProducerApp(App):
    def __init__(self, node, prefix: Name, keypair: crypto.KeyPair, synth_size: int = 1024):
        super().__init__(node)
        self.prefix = prefix
        self.keypair = keypair
        self.files: dict[Name, int] = {}
        self.synth_size = synth_size
        self.produced: dict[Name, Data] = {}
        self.interests_received = 0

    def publish(self, name: Name, size: int) -> None:
        self.files[name] = size

    def content_for(self, name: Name) -> bytes | None:
        stem, last = name[:-1], name[-1] if len(name) else b""
        if stem in self.files and last.isdigit():
            seg, size = int(last), self.files[stem]
            start = seg * SEGMENT_SIZE
            if start >= max(size, 1):
                return None
            return self._bytes(stem, size)[start:start + SEGMENT_SIZE]
        if name in self.files:
            return None
        return random.Random(f"{self.sim.seed}|{name.to_uri()}").randbytes(self.synth_size)

    def _bytes(self, stem: Name, size: int) -> bytes:
        cache = self.__dict__.setdefault("_file_cache", {})
        if stem not in cache:
            cache[stem] = random.Random(f"{self.sim.seed}|{stem.to_uri()}").randbytes(size)
        return cache[stem]

    def on_interest(self, interest: Interest, now: int) -> None:
        self.interests_received += 1
        payload = self.content_for(interest.name)
        if payload is None:
            self.node.trace(now, "no-content", interest.name, APP_FACE)
            return
        data = self.produced.get(interest.name)
        if data is None:
            data = packets.sign_data(interest.name, payload, self.keypair,
                                     self.prefix / "KEY", rng=self.node.rng)
            self.produced[interest.name] = data
        self.node.charge(self.sim.costs.rsa_private_us)
        self.node.emit(data)


class ARApp(App):
    def __init__(self, node, router: AnonymizingRouter):
        super().__init__(node)
        self.router = router
        self.forwarded = 0
        self.rejected: dict[str, int] = {}

    def on_interest(self, interest: Interest, now: int) -> None:
        costs = self.sim.costs
        ms = now // 1000
        self.router.expire(ms)
        kind = self.router.classify(interest)
        if kind == "createsession":
            self.node.charge(costs.dh_us + costs.rsa_private_us)
            self.node.trace(now, "ar-createsession", interest.name, APP_FACE)
            self.node.emit(self.router.handle_createsession(interest, ms))
            return
        if kind is None:
            return super().on_interest(interest, now)
        ct = interest.name[-1]
        self.node.charge(costs.sym(len(ct)) + (costs.rsa_private_us if kind == "asymmetric" else 0))
        result = self.router.handle_encrypted_interest(interest, ms)
        if not isinstance(result, Forwarded):
            self.rejected[result.reason] = self.rejected.get(result.reason, 0) + 1
            self.node.trace(now, f"ar-reject-{result.reason}", interest.name, APP_FACE)
            return
        self.forwarded += 1
        adv = self.sim.adversary
        if adv is not None and adv.is_compromised(self.node.id, now):
            tup = self.router.pending[interest.name]
            adv.learn(tup.key)
            self.sim.trace.note(now, self.node.id, "pending",
                                f"{interest.name.to_uri(NAME_ABBREV)}>"
                                f"{tup.inner.name.to_uri(NAME_ABBREV)}")
        self.node.trace(now, "ar-exit" if result.exit_role else "ar-entry",
                        result.interest.name, APP_FACE)
        self.node.emit(result.interest)

    def on_data(self, data: Data, now: int) -> None:
        try:
            wrapped = self.router.handle_returning_content(data, now // 1000)
        except NoPendingState:
            return super().on_data(data, now)
        for d in wrapped:
            self.node.charge(self.sim.costs.sym(len(d.payload)) + self.sim.costs.rsa_private_us)
            self.node.emit(d)


class DirectoryApp(App):
    """Serves the signed directory listing under its prefix."""

    def __init__(self, node, prefix: Name, keypair: crypto.KeyPair):
        super().__init__(node)
        self.prefix = prefix
        self.keypair = keypair

    def on_interest(self, interest: Interest, now: int) -> None:
        for d in self.sim.directory.as_data(self.keypair, self.prefix, self.node.rng):
            if d.satisfies(interest):
                self.node.charge(self.sim.costs.rsa_private_us)
                self.node.emit(d)
                return
        super().on_interest(interest, now)


@dataclass
class _Outstanding:
    interest: Interest  # what the application asked for
    mode: str
    on_done: Callable[[Interest, Data, int], None] | None
    sent_at: int
    circuit: cons.EphemeralCircuit | None = None
    attempt: int = 0


class ConsumerApp(App):
    def __init__(self, node, rsa_costs_enabled: bool = True):
        super().__init__(node)
        self.outstanding: dict[Name, _Outstanding] = {}
        self.sessions: dict[Name, cons.SessionState] = {}
        self.handshakes: dict[Name, cons.PendingHandshake] = {}
        self._session_waiters: list[Callable[[int], None]] = []
        self.rtt = cons.RttEstimator()
        self.delivered: list[Delivery] = []
        self.failed: list[Interest] = []
        self.errors: list[tuple[Name, str]] = []

    # requests

    def request(self, name: Name, mode: str, now: int,
                on_done: Callable[[Interest, Data, int], None] | None = None,
                attempt: int = 0) -> None:
        interest = Interest(name)
        if mode == PLAIN:
            wire, circuit = interest, None
            self.node.charge(0)
        else:
            circuit = self._circuit(mode, now)
            costs = self.sim.costs
            wire = cons.encrypt_interest(circuit, interest, now // 1000, self.rtt.value,
                                         self.node.rng)
            self.node.charge(costs.sym(2 * wire.wire_size)
                             + (2 * costs.rsa_public_us if mode == ANDANA_A else 0))
            adv = self.sim.adversary
            if adv is not None and adv.is_compromised(self.node.id, now):
                adv.learn(circuit.k1)
                adv.learn(circuit.k2)
                self.sim.trace.note(now, self.node.id, "circuit",
                                    f"{circuit.entry.namespace}>{circuit.exit.namespace}>"
                                    f"{name.to_uri(NAME_ABBREV)}")
        self.outstanding[wire.name] = _Outstanding(interest, mode, on_done, now, circuit, attempt)
        self.sim.schedule(now + REQUEST_TIMEOUT_US, self.node.call_app, self._timeout, wire.name,
                          attempt)
        self.node.emit(wire)

    def _circuit(self, mode: str, now: int) -> cons.EphemeralCircuit:
        ms = now // 1000
        listing = self.sim.directory.list_ars(ms)
        if mode == ANDANA_S:
            listing = [d for d in listing
                       if d.namespace in self.sessions and self.sessions[d.namespace].live(ms)]
        circuit = cons.select_circuit(listing, self.node.rng, ms,
                                      cons.SESSION if mode == ANDANA_S else cons.ASYMMETRIC)
        if mode == ANDANA_S:
            circuit.entry_session = self.sessions[circuit.entry.namespace]
            circuit.exit_session = self.sessions[circuit.exit.namespace]
        return circuit

    def _timeout(self, now: int, wire_name: Name, attempt: int) -> None:
        pending = self.outstanding.get(wire_name)
        if pending is None or pending.attempt != attempt:
            return
        del self.outstanding[wire_name]
        self.node.trace(now, "timeout", pending.interest.name, APP_FACE)
        if attempt < MAX_RETRIES:
            self.request(pending.interest.name, pending.mode, now, pending.on_done, attempt + 1)
        else:
            self.failed.append(pending.interest)
            if pending.on_done is not None:
                pending.on_done(pending.interest, None, now)

    # sessions

    def ensure_sessions(self, now: int, then: Callable[[int], None]) -> None:
        ms = now // 1000
        missing = [d for d in self.sim.directory.list_ars(ms)
                   if not (d.namespace in self.sessions and self.sessions[d.namespace].live(ms))]
        self._session_waiters.append(then)
        if not missing:
            return self._sessions_ready(now)
        for desc in missing:
            hs = cons.session_request(desc, "dh", ms, self.node.rng)
            self.node.charge(self.sim.costs.dh_us)
            self.handshakes[hs.interest.name] = hs
            self.node.emit(hs.interest)

    def _sessions_ready(self, now: int) -> None:
        if self.handshakes:
            return
        waiters, self._session_waiters = self._session_waiters, []
        for w in waiters:
            w(now)

    def on_data(self, data: Data, now: int) -> None:
        costs = self.sim.costs
        hs = self.handshakes.pop(data.name, None)
        if hs is not None:
            self.node.charge(costs.dh_us + costs.rsa_public_us)
            session = cons.complete_session(hs, data, now // 1000)
            self.sessions[hs.ar.namespace] = session
            self.node.trace(now, "session-up", hs.ar.namespace, APP_FACE)
            return self._sessions_ready(now)
        pending = self.outstanding.pop(data.name, None)
        if pending is None:
            return super().on_data(data, now)
        producer_pk = self.sim.producer_key_for(pending.interest.name)
        try:
            if pending.circuit is None:
                self.node.charge(costs.rsa_public_us)
                if not packets.verify_data(data, producer_pk):
                    raise cons.ProducerSignatureInvalid(str(data.name))
                produced = data
            else:
                self.node.charge(costs.sym(2 * len(data.payload)) + costs.rsa_public_us)
                produced = cons.decapsulate_content(pending.circuit, data, producer_pk)
        except (crypto.DecryptionFailed, cons.ProducerSignatureInvalid,
                cons.UnexpectedContent) as exc:
            self.errors.append((pending.interest.name, type(exc).__name__))
            self.node.trace(now, "content-rejected", pending.interest.name, APP_FACE)
            return
        self.rtt.update((now - pending.sent_at) / 1000)
        self.delivered.append(Delivery(now, pending.interest, produced, pending.mode))
        self.node.trace(now, "deliver", produced.name, APP_FACE)
        if pending.on_done is not None:
            pending.on_done(pending.interest, produced, now)


class FetchJob:
    """Segmented retrieval with a fixed pipeline window."""

    def __init__(self, app: ConsumerApp, action: Fetch, name: Name):
        self.app = app
        self.mode = action.mode
        self.name = name
        n = max(1, math.ceil(action.size / SEGMENT_SIZE))
        self.metrics = FetchMetrics(app.node.id, name, action.mode, action.size, n,
                                    action.include_setup)
        self.next_seg = 0
        self.in_flight = 0
        self.done = 0
        self.sent_at: dict[Name, int] = {}

    def start(self, now: int) -> None:
        self.metrics.start_us = now
        self.app.node.trace(now, "fetch-start", self.name, APP_FACE)
        if self.mode == ANDANA_S:
            self.app.ensure_sessions(now, self._begin)
        else:
            self._begin(now)

    def _begin(self, now: int) -> None:
        self.metrics.setup_us = now - self.metrics.start_us
        self._pump(now)

    def _pump(self, now: int) -> None:
        while self.in_flight < PIPELINE_WINDOW and self.next_seg < self.metrics.segments:
            seg_name = self.name / str(self.next_seg)
            self.next_seg += 1
            self.in_flight += 1
            self.sent_at[seg_name] = now
            self.app.request(seg_name, self.mode, now, self._segment_done)

    def _segment_done(self, interest: Interest, data: Data | None, now: int) -> None:
        self.in_flight -= 1
        self.done += 1
        if data is None:
            self.metrics.failed.append(interest.name)
        else:
            self.metrics.rtts_ms.append((now - self.sent_at[interest.name]) / 1000)
        if self.done == self.metrics.segments:
            self.metrics.end_us = now
            self.metrics.bytes_on_wire = self.app.sim.bytes_on_wire
            self.app.node.trace(now, "fetch-done", self.name, APP_FACE)
        else:
            self._pump(now)


class Node:
    def __init__(self, sim: "Simulator", node_id: str, cs_capacity: int):
        self.sim = sim
        self.id = node_id
        self.rng = random.Random(f"{sim.seed}/{node_id}")
        self.forwarder = Forwarder(node_id, cs_capacity,
                                   trace=lambda t, ev, name, face: self.trace(t, ev, name, face))
        self.app: App | None = None
        self.busy_until = 0
        self._cost = 0
        self._out: list[tuple[int, Packet]] | None = None
        self._now = 0

    def trace(self, t: int, event: str, name, iface) -> None:
        self.sim.trace.event(t, self.id, event, name, iface)

    def charge(self, us: int) -> None:
        self._cost += us

    def _run(self, t: int, work: Callable[[int], None]) -> None:
        if self._out is not None:  # already inside a step on this node
            work(self._now)
            return
        start = max(t, self.busy_until)
        self._cost, self._out, self._now = 0, [], start
        try:
            work(start)
        finally:
            out, self._out = self._out, None
        done = start + self._cost
        self.busy_until = done
        for face, pkt in out:
            self.sim.transmit(self.id, face, pkt, done)

    def receive(self, pkt: Packet, face: int, t: int) -> None:
        self._run(t, lambda now: self._process(pkt, face, now))

    def call_app(self, t: int, fn: Callable, *args) -> None:
        self._run(t, lambda now: fn(now, *args))

    def emit(self, pkt: Packet) -> None:
        """Hand a packet from the local application to the forwarder."""
        self._process(pkt, APP_FACE, self._now)

    def _process(self, pkt: Packet, face: int, now: int) -> None:
        self.charge(self.sim.costs.forward_us)
        if isinstance(pkt, Interest):
            actions = self.forwarder.on_interest(pkt, face, now)
        else:
            actions = self.forwarder.on_data(pkt, face, now)
        for act in actions:
            if isinstance(act, Drop):
                continue
            target = act.face
            out = act.interest if isinstance(act, Forward) else act.data
            if target != APP_FACE:
                self._out.append((target, out))
            elif self.app is None:
                self.trace(now, "no-app", out.name, APP_FACE)
            elif isinstance(act, Forward):
                self.app.on_interest(out, now)
            else:
                self.app.on_data(out, now)


class Simulator:
    def __init__(self, topology: Topology, seed: int = 0, adversary: Adversary | None = None,
                 costs: CostModel | None = None, cs_capacity: int = 64 * 1024 * 1024,
                 rsa_bits: int = crypto.DEFAULT_RSA_BITS,
                 min_compromise_delay_us: int | None = None):
        topology.validate()
        self.topology = topology
        self.seed = seed
        self.adversary = adversary
        self.costs = costs or CostModel()
        self.trace = TraceLog()
        self.now = 0
        self.bytes_on_wire = 0
        self.view: list[ViewRecord] = []
        self.metrics: list[FetchMetrics] = []
        self.directory = Directory()
        self.min_compromise_delay_us = (10 * topology.max_rtt_us()
                                        if min_compromise_delay_us is None
                                        else min_compromise_delay_us)
        self._queue: list = []
        self._seq = itertools.count()
        self._link_free: dict[tuple[str, int], int] = {}
        self._peers = {}
        for link in topology.links:
            self._peers[(link.a, link.ai)] = (link.b, link.bi, link)
            self._peers[(link.b, link.bi)] = (link.a, link.ai, link)

        self.nodes: dict[str, Node] = {}
        self.producer_keys: list[tuple[Name, crypto.PublicKey]] = []
        for nid in sorted(topology.nodes):
            self.nodes[nid] = Node(self, nid, cs_capacity)
        for nid in sorted(topology.nodes):
            self._setup_node(nid, rsa_bits)

    def _setup_node(self, nid: str, rsa_bits: int) -> None:
        spec = self.topology.nodes[nid]
        node = self.nodes[nid]
        for prefix, face in self.topology.fibs.get(nid, ()):
            node.forwarder.fib.add_route(prefix, face)
        if spec.role == "producer":
            kp = crypto.generate_keypair(crypto.SIGNING, rsa_bits, node.rng)
            node.app = ProducerApp(node, spec.prefix, kp)
            self.producer_keys.append((spec.prefix, kp.pk))
        elif spec.role == "ar":
            router = AnonymizingRouter(spec.prefix, spec.org or nid, rng=node.rng, rsa_bits=rsa_bits)
            node.app = ARApp(node, router)
            self.directory.register(router.descriptor(0))
        elif spec.role == "directory":
            kp = crypto.generate_keypair(crypto.SIGNING, rsa_bits, node.rng)
            node.app = DirectoryApp(node, spec.prefix, kp)
        elif spec.role == "consumer":
            node.app = ConsumerApp(node)
        self.trace.event(0, nid, "setup", spec.prefix or spec.role, None)

    # -- lookups ----------------------------------------------------------

    def app(self, nid: str) -> App:
        return self.nodes[nid].app

    def producer_key_for(self, name: Name) -> crypto.PublicKey:
        best = None
        for prefix, pk in self.producer_keys:
            if prefix.is_prefix_of(name) and (best is None or len(prefix) > len(best[0])):
                best = (prefix, pk)
        if best is None:
            raise ConfigError(f"no producer serves {name}")
        return best[1]

    def producer_for(self, name: Name) -> ProducerApp:
        for nid in self.topology.by_role("producer"):
            app = self.nodes[nid].app
            if app.prefix.is_prefix_of(name):
                return app
        raise ConfigError(f"no producer serves {name}")

    # -- event loop -------------------------------------------------------

    def schedule(self, t: int, fn: Callable, *args) -> None:
        if t < self.now:
            raise ValueError("cannot schedule in the past")
        heapq.heappush(self._queue, (t, next(self._seq), fn, args))

    def run(self, until_us: int | None = None) -> TraceLog:
        while self._queue:
            t, _, fn, args = self._queue[0]
            if until_us is not None and t > until_us:
                break
            heapq.heappop(self._queue)
            self.now = t
            fn(t, *args)
        if until_us is not None:
            self.now = max(self.now, until_us)
        return self.trace

    def submit(self, action) -> None:
        from .names import as_name
        if isinstance(action, Publish):
            self.nodes[action.producer].app.publish(as_name(action.name), action.size)
        elif isinstance(action, Fetch):
            name = as_name(action.name)
            self.producer_for(name).publish(name, action.size)
            app = self._consumer(action.consumer)
            job = FetchJob(app, action, name)
            self.metrics.append(job.metrics)
            self.schedule(round(action.at_ms * 1000), app.node.call_app,
                          lambda now: job.start(now))
        elif isinstance(action, Request):
            app = self._consumer(action.consumer)
            name = as_name(action.name)
            if action.mode == ANDANA_S:
                start = lambda now: app.ensure_sessions(
                    now, lambda t: app.request(name, action.mode, t))
            else:
                start = lambda now: app.request(name, action.mode, now)
            self.schedule(round(action.at_ms * 1000), app.node.call_app, start)
        elif isinstance(action, Rotate):
            self.schedule(round(action.at_ms * 1000), self._rotate, action.ar)
        else:
            raise ConfigError(f"unknown workload action {action!r}")

    def _consumer(self, nid: str) -> ConsumerApp:
        app = self.nodes.get(nid) and self.nodes[nid].app
        if not isinstance(app, ConsumerApp):
            raise ConfigError(f"{nid} is not a consumer")
        return app

    def _rotate(self, t: int, nid: str) -> None:
        router = self.nodes[nid].app.router
        router.rotate_encryption_key(t // 1000)
        self.directory.register(router.descriptor(t // 1000))
        self.trace.event(t, nid, "rotate-key", router.namespace, None)

    # -- links ------------------------------------------------------------

    def transmit(self, node: str, face: int, pkt: Packet, t: int) -> None:
        try:
            peer, peer_iface, link = self._peers[(node, face)]
        except KeyError:
            raise ConfigError(f"{node} has no interface {face}") from None
        size = pkt.wire_size
        start = max(t, self._link_free.get((node, face), 0))
        done = start + math.ceil(size * 1_000_000 / link.bw_bps)
        self._link_free[(node, face)] = done
        self.bytes_on_wire += size
        kind = "interest" if isinstance(pkt, Interest) else "data"
        self.trace.event(start, node, f"tx-{kind}", pkt.name, face)
        self._observe(node, face, "out", pkt, start)
        self.schedule(done + link.latency_us, self._arrive, peer, peer_iface, pkt)

    def _arrive(self, t: int, node: str, iface: int, pkt: Packet) -> None:
        kind = "interest" if isinstance(pkt, Interest) else "data"
        self.trace.event(t, node, f"rx-{kind}", pkt.name, iface)
        self._observe(node, iface, "in", pkt, t)
        self.nodes[node].receive(pkt, iface, t)

    # -- adversary --------------------------------------------------------

    def _observe(self, node: str, iface: int, direction: str, pkt: Packet, t: int) -> None:
        adv = self.adversary
        if adv is None or not adv.watches(node, iface, t):
            return
        rec = ViewRecord(t, node, iface, direction, pkt, self._reveal(pkt, t))
        self.view.append(rec)
        self.trace.view(rec)

    def _reveal(self, pkt: Packet, t: int) -> str:
        adv = self.adversary
        if isinstance(pkt, Interest):
            for nid in sorted(adv.compromised_routers):
                app = self.nodes[nid].app
                if not isinstance(app, ARApp) or not adv.is_compromised(nid, t):
                    continue
                if not app.router.namespace.is_prefix_of(pkt.name):
                    continue
                layer = app.router.try_decrypt(pkt, t // 1000)
                if layer is not None:
                    adv.learn(layer.key)
                    return "inner=" + layer.next_interest().name.to_uri(NAME_ABBREV)
            return "-"
        payload = pkt.payload
        for _ in range(2):
            for key in list(adv.learned_keys.values()):
                try:
                    payload = crypto.sym_decrypt(key, payload)
                    break
                except crypto.DecryptionFailed:
                    continue
            else:
                return "-"
            try:
                inner = packets.decode_data(payload)
                return "content=" + inner.name.to_uri(NAME_ABBREV)
            except packets.MalformedPacket:
                continue
        return "-"

    def tap(self, node: str, iface: int, at_us: int | None = None) -> None:
        if self.adversary is None:
            self.adversary = Adversary()
        at = self.now if at_us is None else at_us
        self.adversary.tap(self.topology, node, iface, at)

    def compromise(self, target: str, at_us: int) -> Adversary:
        if target not in self.topology.nodes:
            raise ConfigError(f"unknown node {target!r}")
        if at_us < self.now + self.min_compromise_delay_us:
            raise TooSoon(f"compromise at {at_us} us is closer than "
                          f"{self.min_compromise_delay_us} us to now ({self.now} us)")
        if self.adversary is None:
            self.adversary = Adversary()
        self.adversary.compromise(self.topology, target, at_us)
        return self.adversary

    def replay(self, pkt: Packet, node: str, iface: int, at_us: int) -> None:
        wire = pkt.encode()
        if not any(rec.packet.encode() == wire for rec in self.view):
            raise NotObserved(f"{pkt.name.to_uri(NAME_ABBREV)} was never observed")
        if self.adversary is None or not self.adversary.watches(node, iface, at_us):
            raise NotObserved(f"adversary has no access to {node}:{iface}")
        self.schedule(at_us, self._replay_arrive, node, iface, pkt)

    def _replay_arrive(self, t: int, node: str, iface: int, pkt: Packet) -> None:
        self.trace.event(t, node, "replay", pkt.name, iface)
        self.nodes[node].receive(pkt, iface, t)

    # -- convenience ------------------------------------------------------

    def counts(self, node: str, event: str) -> int:
        return len(self.trace.events(event, node))


def run(topology: Topology, workload: list, adversary: Adversary | None = None, seed: int = 0,
        **kwargs) -> TraceLog:
    """Build a simulator, feed it ``workload`` and run to quiescence."""
    sim = Simulator(topology, seed, adversary, **kwargs)
    for action in workload:
        sim.submit(action)
    return sim.run()
