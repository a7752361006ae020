"""Formal anonymity model: anonymity sets and verdicts, backed by a
symbolic indistinguishability oracle.

Routing is deterministic (static FIBs), so the set of entities that could
have sent an interest arriving on an interface is the reverse cone of that
interface in the forwarding graph for the interest's destination.

The oracle works on a Dolev-Yao style abstraction of one configuration: the
adversary's observations are turned into a labeled graph whose opaque
ciphertexts and keys are anonymous shared nodes, so two views are equal up
to renaming exactly when their graphs are isomorphic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import networkx as nx
from networkx.algorithms import isomorphism as iso

from . import names
from .names import Name
from .topology import APP_FACE, ConfigError, Topology

Interface = tuple[str, int]

MAX_CONSUMERS = 4
MAX_ARS = 3
MAX_PRODUCERS = 3


class UnknownConsumer(KeyError):
    pass


class UnknownProducer(KeyError):
    pass


class InstanceTooLarge(ValueError):
    pass


# -- model types -----------------------------------------------------------------

@dataclass(frozen=True, order=True)
class CircuitTuple:
    """(entry AR, exit AR, producer, content name) for one consumer."""

    r1: str
    r2: str
    p: str
    t: str

    def __post_init__(self):
        if self.r1 == self.r2:
            raise ValueError("entry and exit AR must differ")

    @property
    def content(self) -> tuple[str, str]:
        return self.p, self.t


Configuration = Mapping[str, CircuitTuple]


@dataclass(frozen=True)
class AnonymitySet:
    interface: Interface
    members: frozenset[str]


@dataclass(frozen=True)
class AdversarySpec:
    compromised_producers: frozenset[str] = frozenset()
    compromised_consumers: frozenset[str] = frozenset()
    compromised_routers: frozenset[str] = frozenset()
    tapped_interfaces: frozenset[Interface] = frozenset()

    @classmethod
    def of(cls, adversary) -> "AdversarySpec":
        """Accept an AdversarySpec or anything with the same attribute names."""
        if isinstance(adversary, cls):
            return adversary
        if adversary is None:
            return cls()
        return cls(frozenset(adversary.compromised_producers),
                   frozenset(adversary.compromised_consumers),
                   frozenset(adversary.compromised_routers),
                   frozenset(tuple(i) for i in adversary.tapped_interfaces))


@dataclass(frozen=True)
class Anonymous:
    witness: str
    condition: int


@dataclass(frozen=True)
class Unlinkable:
    via: str  # "producer-anon" | "consumer-anon+witness" | "both"
    witness: str | None = None


@dataclass(frozen=True)
class NotEstablished:
    reason: str = ""


Verdict = Anonymous | Unlinkable | NotEstablished


# -- routing -------------------------------------------------------------------

class RoutingModel:
    """Deterministic forwarding replica used for anonymity-set computation.

    Mirrors the forwarder: longest-prefix match, first next hop that is not
    the arrival face, and a revisited node absorbs the interest.
    """

    def __init__(self, topology: Topology):
        self.topology = topology
        self.nodes = sorted(topology.nodes)
        self.peers: dict[Interface, Interface] = {}
        for link in topology.links:
            self.peers[(link.a, link.ai)] = (link.b, link.bi)
            self.peers[(link.b, link.bi)] = (link.a, link.ai)
        self.fib: dict[str, dict[Name, list[int]]] = {n: {} for n in self.nodes}
        for node, entries in topology.fibs.items():
            for prefix, face in entries:
                hops = self.fib[node].setdefault(prefix, [])
                if face not in hops:
                    hops.append(face)
        self._walks: dict[tuple[str, Name], tuple[Interface, ...]] = {}
        self._cones: dict[tuple[Interface, Name], frozenset[str]] = {}

    def destinations(self) -> list[Name]:
        return sorted({p for table in self.fib.values() for p in table})

    def lpm(self, node: str, name: Name) -> list[int]:
        table = self.fib[node]
        for k in range(len(name), -1, -1):
            hops = table.get(name[:k])
            if hops is not None:
                return hops
        return []

    def walk(self, source: str, name: Name) -> tuple[Interface, ...]:
        """Interfaces at which an interest from ``source`` arrives, in order."""
        key = (source, name)
        if key in self._walks:
            return self._walks[key]
        node, arrival = source, APP_FACE
        seen = {source}
        out: list[Interface] = []
        while True:
            hops = [h for h in self.lpm(node, name) if h != arrival]
            if not hops or hops[0] == APP_FACE:
                break
            nxt = self.peers.get((node, hops[0]))
            if nxt is None:
                break
            out.append(nxt)
            if nxt[0] in seen:
                break
            seen.add(nxt[0])
            node, arrival = nxt
        self._walks[key] = tuple(out)
        return self._walks[key]

    def reaches(self, source: str, name: Name) -> bool:
        """True when the interest is delivered to an application."""
        node, arrival = source, APP_FACE
        seen = {source}
        while True:
            hops = [h for h in self.lpm(node, name) if h != arrival]
            if not hops:
                return False
            if hops[0] == APP_FACE:
                return node != source
            nxt = self.peers.get((node, hops[0]))
            if nxt is None or nxt[0] in seen:
                return False
            seen.add(nxt[0])
            node, arrival = nxt

    def cone(self, interface: Interface, name: Name) -> frozenset[str]:
        key = (interface, name)
        if key not in self._cones:
            self._cones[key] = frozenset(
                d for d in self.nodes if interface in self.walk(d, name))
        return self._cones[key]


_MODELS: dict[int, tuple[Topology, RoutingModel]] = {}


def routing_model(topology: Topology | RoutingModel) -> RoutingModel:
    """Cached model for ``topology``; do not mutate a topology after use."""
    if isinstance(topology, RoutingModel):
        return topology
    hit = _MODELS.get(id(topology))
    if hit is None or hit[0] is not topology:
        if len(_MODELS) > 256:
            _MODELS.clear()
        hit = (topology, RoutingModel(topology))
        _MODELS[id(topology)] = hit
    return hit[1]


def _probe(prefix: Name) -> Name:
    return prefix / b"\x00probe"


def interface_anonymity_set(topology: Topology, interface: Interface,
                            name: Name | str | None = None) -> AnonymitySet:
    """Entities whose interests arrive on ``interface``.

    With ``name`` given, only interests for that name count; otherwise the
    union over every routed prefix is returned.
    """
    model = routing_model(topology)
    interface = (interface[0], int(interface[1]))
    if name is not None:
        return AnonymitySet(interface, model.cone(interface, names.as_name(name)))
    members: set[str] = set()
    for prefix in model.destinations():
        members |= model.cone(interface, _probe(prefix))
    return AnonymitySet(interface, frozenset(members))


# -- adversary capabilities ----------------------------------------------------

@dataclass(frozen=True)
class _Capabilities:
    taps: frozenset[Interface]
    routers: frozenset[str]
    consumers: frozenset[str]
    producers: frozenset[str]

    def covers(self, arrival: Interface, peers: dict[Interface, Interface]) -> bool:
        return arrival in self.taps or peers.get(arrival) in self.taps

    def compromised(self, node: str) -> bool:
        return node in self.routers or node in self.consumers or node in self.producers


def capabilities(topology: Topology, adversary) -> _Capabilities:
    adv = AdversarySpec.of(adversary)
    taps = set(adv.tapped_interfaces)
    routers = set(adv.compromised_routers)
    for node in adv.compromised_routers | adv.compromised_consumers | adv.compromised_producers:
        taps.update((node, i) for i in topology.interfaces(node))
    for node, spec in topology.nodes.items():
        ifaces = topology.interfaces(node)
        if spec.role in ("router", "ar") and ifaces and all((node, i) in taps for i in ifaces):
            routers.add(node)
    return _Capabilities(frozenset(taps), frozenset(routers),
                         frozenset(adv.compromised_consumers), frozenset(adv.compromised_producers))


def interest_anonymity_set(topology: Topology, adversary, interest_path: Iterable[Interface],
                           name: Name | str | None = None) -> frozenset[str]:
    """Intersection of anonymity sets over the observed hops of a path.

    ``interest_path`` lists the interfaces the interest arrived on.  With no
    observed hop the result is the full consumer set.
    """
    result = _constrained_set(topology, adversary, tuple(interest_path), name)
    if result is None:
        return frozenset(topology.by_role("consumer"))
    return result


def _constrained_set(topology, adversary, path: tuple[Interface, ...],
                     name) -> frozenset[str] | None:
    model = routing_model(topology)
    caps = adversary if isinstance(adversary, _Capabilities) else capabilities(topology, adversary)
    result: frozenset[str] | None = None
    for arrival in path:
        if not caps.covers(arrival, model.peers):
            continue
        members = interface_anonymity_set(model, arrival, name).members
        result = members if result is None else result & members
    return result


def _contains(s: frozenset[str] | None, x: str) -> bool:
    return s is None or x in s


# -- sufficient conditions ---------------------------------------------------

def _ns(topology: Topology, node: str) -> Name:
    spec = topology.nodes.get(node)
    if spec is None or spec.prefix is None:
        raise ConfigError(f"{node!r} has no routable prefix")
    return spec.prefix


def _leg_names(topology: Topology, c: CircuitTuple) -> tuple[Name, Name, Name]:
    return (_probe(_ns(topology, c.r1)), _probe(_ns(topology, c.r2)), names.parse(c.t))


def _leg_set(topology, caps, source: str, dest: Name) -> frozenset[str] | None:
    path = routing_model(topology).walk(source, dest)
    return _constrained_set(topology, caps, path, dest)


def _check_consumer(config: Configuration, topology: Topology, u: str) -> None:
    if topology.nodes.get(u) is None or topology.nodes[u].role != "consumer":
        raise UnknownConsumer(u)
    if u not in config:
        raise UnknownConsumer(f"{u} has no circuit in this configuration")


def _consumer_witnesses(config: Configuration, topology: Topology, caps: _Capabilities,
                        u: str) -> Iterable[Anonymous]:
    mine = config[u]
    leg1, leg2, leg3 = _leg_names(topology, mine)
    others = [v for v in topology.by_role("consumer") if v != u and v not in caps.consumers]

    # 1: u and u' are indistinguishable on the network layer for both first legs
    for v in others:
        if not _contains(_leg_set(topology, caps, u, leg1), v):
            continue
        if not _contains(_leg_set(topology, caps, v, leg1), u):
            continue
        theirs = config.get(v)
        if theirs is not None:
            their_leg1 = _leg_names(topology, theirs)[0]
            if not (_contains(_leg_set(topology, caps, v, their_leg1), u)
                    and _contains(_leg_set(topology, caps, u, their_leg1), v)):
                continue
        yield Anonymous(v, 1)

    # 2: shared honest entry AR
    if mine.r1 not in caps.routers and _contains(_leg_set(topology, caps, mine.r1, leg2), mine.r1):
        for v in others:
            if v in config and config[v].r1 == mine.r1:
                yield Anonymous(v, 2)

    # 3: shared honest exit AR
    if mine.r2 not in caps.routers and _contains(_leg_set(topology, caps, mine.r2, leg3), mine.r2):
        for v in others:
            if v in config and config[v].r2 == mine.r2:
                yield Anonymous(v, 3)


def check_consumer_anonymity(config: Configuration, topology: Topology, adversary,
                             u: str) -> Anonymous | NotEstablished:
    _check_consumer(config, topology, u)
    caps = capabilities(topology, adversary)
    if u in caps.consumers:
        return NotEstablished(f"{u} is compromised")
    for verdict in _consumer_witnesses(config, topology, caps, u):
        return verdict
    return NotEstablished("no witness satisfies any condition")


def check_producer_anonymity(config: Configuration, topology: Topology, adversary, u: str,
                             p: str) -> Anonymous | NotEstablished:
    _check_consumer(config, topology, u)
    if topology.nodes.get(p) is None or topology.nodes[p].role != "producer":
        raise UnknownProducer(p)
    caps = capabilities(topology, adversary)
    mine = config[u]
    if u in caps.consumers:
        return NotEstablished(f"{u} is compromised")
    if mine.p != p:
        return NotEstablished(f"{u} does not address {p}")
    others = [v for v in topology.by_role("consumer")
              if v != u and v not in caps.consumers and v in config and config[v].p != p]
    if mine.r1 not in caps.routers:
        for v in others:
            if config[v].r1 == mine.r1:
                return Anonymous(v, 1)
    if mine.r2 not in caps.routers:
        for v in others:
            if config[v].r2 == mine.r2:
                return Anonymous(v, 2)
    return NotEstablished("no consumer with a different producer shares an honest AR")


def check_unlinkability(config: Configuration, topology: Topology, adversary, u: str,
                        p: str) -> Unlinkable | NotEstablished:
    producer = check_producer_anonymity(config, topology, adversary, u, p)
    caps = capabilities(topology, adversary)
    consumer = None
    if u not in caps.consumers:
        for verdict in _consumer_witnesses(config, topology, caps, u):
            if config.get(verdict.witness) is not None and config[verdict.witness].p != p:
                consumer = verdict
                break
    if isinstance(producer, Anonymous) and consumer is not None:
        return Unlinkable("both", consumer.witness)
    if isinstance(producer, Anonymous):
        return Unlinkable("producer-anon", producer.witness)
    if consumer is not None:
        return Unlinkable("consumer-anon+witness", consumer.witness)
    return NotEstablished("no sufficient condition holds")


# -- symbolic oracle -----------------------------------------------------------

class _ViewBuilder:
    """Builds the adversary's observation graph for one configuration.

    Nodes are list indices; a node's children are stored in argument order,
    so a child's position is its index in ``kids``.
    """

    def __init__(self, topology: Topology, caps: _Capabilities):
        self.topology = topology
        self.caps = caps
        self.model = routing_model(topology)
        self.labels: list[str] = []
        self.kids: list[list[int]] = []
        self.indeg: list[int] = []
        self._shared: dict = {}

    def _node(self, label: str) -> int:
        self.labels.append(label)
        self.kids.append([])
        self.indeg.append(0)
        return len(self.labels) - 1

    def _edge(self, a: int, b: int, pos: int) -> None:
        assert pos == len(self.kids[a])
        self.kids[a].append(b)
        self.indeg[b] += 1

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        for n, label in enumerate(self.labels):
            g.add_node(n, label=label)
        for n, kids in enumerate(self.kids):
            for pos, k in enumerate(kids):
                g.add_edge(n, k, pos=pos)
        return g

    def atom(self, label: str) -> int:
        return self._node(label)

    def struct(self, label: str, *children: int) -> int:
        n = self._node(label)
        for i, c in enumerate(children):
            self._edge(n, c, i)
        return n

    def key(self, ident) -> int:
        if ("key", ident) not in self._shared:
            self._shared[("key", ident)] = self._node("key")
        return self._shared[("key", ident)]

    def cipher(self, ident, kind: str, openable: bool, body) -> int:
        """Shared node for one ciphertext; ``body`` builds its plaintext lazily."""
        k = ("ct", ident)
        if k not in self._shared:
            if openable:
                n = self._node(kind)
                self._shared[k] = n
                self._edge(n, body(), 0)
            else:
                self._shared[k] = self._node("tok")
        return self._shared[k]

    def observe(self, path: tuple[Interface, ...], kind: str, term) -> list:
        """Record ``term`` at every tapped endpoint along ``path``."""
        hops = [(self.model.peers[arrival], arrival) for arrival in path]
        for sender, arrival in hops:
            for end, direction in ((sender, "out"), (arrival, "in")):
                if end in self.caps.taps:
                    obs = self._node(f"obs|{end[0]}|{end[1]}|{direction}|{kind}")
                    self._edge(obs, term(), 0)
        return hops

    def observe_return(self, hops, kind: str, term) -> None:
        for sender, arrival in hops:
            for end, direction in ((arrival, "out"), (sender, "in")):
                if end in self.caps.taps:
                    obs = self._node(f"obs|{end[0]}|{end[1]}|{direction}|{kind}")
                    self._edge(obs, term(), 0)


def adversary_view(config: Configuration, topology: Topology, adversary) -> nx.DiGraph:
    """The adversary's observations as a labelled graph (edges carry ``pos``)."""
    caps = adversary if isinstance(adversary, _Capabilities) else capabilities(topology, adversary)
    return _build_view(config, topology, caps).graph()


def _build_view(config: Configuration, topology: Topology, caps: _Capabilities) -> _ViewBuilder:
    b = _ViewBuilder(topology, caps)
    model = b.model
    for u in sorted(config):
        c = config[u]
        leg1, leg2, leg3 = _leg_names(topology, c)
        ns1, ns2 = _ns(topology, c.r1).to_uri(), _ns(topology, c.r2).to_uri()
        own = u in caps.consumers
        know_k1 = own or c.r1 in caps.routers
        know_k2 = own or c.r2 in caps.routers

        def interest3(c=c):
            return b.struct("interest", b.atom("t:" + c.t))

        def content(c=c):
            return b.struct("data", b.atom("t:" + c.t), b.atom("payload:" + c.t),
                            b.atom("signer:" + c.p))

        def e2(u=u, c=c, own=own, know_k2=know_k2):
            return b.cipher((u, "E2"), "penc", own or c.r2 in caps.routers,
                            lambda: b.struct("exit-layer", interest3(), b.key((u, "k2"))))

        def e1(u=u, c=c, own=own, ns2=ns2):
            return b.cipher((u, "E1"), "penc", own or c.r1 in caps.routers,
                            lambda: b.struct("entry-layer", b.atom("ns:" + ns2), e2(),
                                             b.key((u, "k1"))))

        def inner_payload(u=u, know_k2=know_k2):
            return b.cipher((u, "X2"), "senc", know_k2, content)

        def outer_payload(u=u, know_k1=know_k1):
            return b.cipher((u, "X1"), "senc", know_k1, inner_payload)

        def name1(ns1=ns1):
            return b.struct("name", b.atom("ns:" + ns1), e1())

        def name2(ns2=ns2):
            return b.struct("name", b.atom("ns:" + ns2), e2())

        hops1 = b.observe(model.walk(u, leg1), "interest", lambda: b.struct("interest", name1()))
        hops2 = b.observe(model.walk(c.r1, leg2), "interest",
                          lambda: b.struct("interest", name2()))
        hops3 = b.observe(model.walk(c.r2, leg3), "interest", interest3)
        b.observe_return(hops3, "data", content)
        b.observe_return(hops2, "data", lambda c=c: b.struct(
            "data", name2(), inner_payload(), b.atom("signer:" + c.r2)))
        b.observe_return(hops1, "data", lambda c=c: b.struct(
            "data", name1(), outer_payload(), b.atom("signer:" + c.r1)))
    return b


_SHARED_LABELS = frozenset({"key", "tok", "penc", "senc"})


def _compact(view: _ViewBuilder) -> dict[int, tuple[str, list[tuple[int, int]]]]:
    """Fold every tree-shaped part of a view into its root's label.

    What remains are the observation roots and the shared ciphertext and
    key nodes.  Each label spells out its subtree with ``#i`` placeholders
    for the shared nodes it mentions, numbered by first mention; the edge
    to that node carries ``i``.  Two views are equivalent iff their
    compacted forms are isomorphic, and the compacted graphs are small.

    Returns ``{node: (label, [(pos, target), ...])}``.
    """
    labels, kids = view.labels, view.kids
    shared = [label in _SHARED_LABELS for label in labels]

    def render(n, refs: dict) -> str:
        parts = []
        for k in kids[n]:
            if shared[k]:
                parts.append(f"#{refs.setdefault(k, len(refs))}")
            else:
                parts.append(render(k, refs))
        return labels[n] if not parts else f"{labels[n]}({','.join(parts)})"

    out = {}
    for n, label in enumerate(labels):
        if view.indeg[n] and not shared[n]:
            continue
        refs: dict = {}
        text = render(n, refs) if not shared[n] or kids[n] else label
        out[n] = (text, [(i, k) for k, i in refs.items()])
    return out


def _compact_graph(compact: dict) -> nx.DiGraph:
    g = nx.DiGraph()
    for n, (label, _) in compact.items():
        g.add_node(n, label=label)
    for n, (_, edges) in compact.items():
        for pos, k in edges:
            g.add_edge(n, k, pos=pos)
    return g


class _ViewCache:
    """Compacted views keyed by configuration, with refinement certificates.

    Colour refinement gives every node a colour built from its label and
    its neighbours' colours, repeated until the partition stops splitting.
    Colours are interned per cache, so graphs from one cache can be
    compared by colour.  Different stable certificates rule isomorphism
    out.  Individualising one node of the first tied class at a time and
    refining again yields a discrete colouring whose certificate describes
    the whole graph, so equal certificates prove isomorphism.  Only when
    neither shortcut decides does VF2 run, with stable colours as classes.
    """

    def __init__(self):
        self.graphs: dict = {}
        self._colours: dict = {}

    def _intern(self, x) -> int:
        return self._colours.setdefault(x, len(self._colours))

    def _refine(self, adj: dict, colour: dict) -> dict:
        intern = self._intern
        classes = len(set(colour.values()))
        while True:
            colour = {n: intern((colour[n],
                                 tuple(sorted([(p, colour[k]) for p, k in out])),
                                 tuple(sorted([(p, colour[k]) for p, k in inc]))))
                      for n, (out, inc) in adj.items()}
            split = len(set(colour.values()))
            if split == classes:
                return colour
            classes = split

    @staticmethod
    def _certificate(adj: dict, colour: dict) -> tuple:
        return tuple(sorted((colour[n], tuple(sorted([(p, colour[k]) for p, k in out])))
                            for n, (out, _) in adj.items()))

    def get(self, config: Configuration, topology, caps) -> tuple:
        """``(key, compacted view, stable certificate, canonical certificate)``."""
        key = tuple(sorted(config.items()))
        hit = self.graphs.get(key)
        if hit is None:
            compact = _compact(_build_view(config, topology, caps))
            adj = {n: (edges, []) for n, (_, edges) in compact.items()}
            for n, (_, edges) in compact.items():
                for pos, k in edges:
                    adj[k][1].append((pos, n))
            stable = self._refine(adj, {n: self._intern(label)
                                        for n, (label, _) in compact.items()})
            colour = stable
            while True:
                sizes: dict = {}
                for c in colour.values():
                    sizes[c] = sizes.get(c, 0) + 1
                tied = [c for c, k in sizes.items() if k > 1]
                if not tied:
                    break
                target = min(tied)
                pick = min(n for n, c in colour.items() if c == target)
                colour = self._refine(adj, {**colour, pick: self._intern(("ind", target))})
            hit = (key, (compact, stable), self._certificate(adj, stable),
                   self._certificate(adj, colour))
            self.graphs[key] = hit
        return hit


def _coloured_graph(view) -> nx.DiGraph:
    compact, stable = view
    g = _compact_graph(compact)
    nx.set_node_attributes(g, stable, "colour")
    return g


def _equivalent(a, b) -> bool:
    ka, va, stable_a, canon_a = a
    kb, vb, stable_b, canon_b = b
    if ka == kb:
        return True
    if stable_a != stable_b:
        return False
    if canon_a == canon_b:
        return True
    return nx.is_isomorphic(_coloured_graph(va), _coloured_graph(vb),
                            node_match=iso.categorical_node_match("colour", None),
                            edge_match=iso.categorical_edge_match("pos", None))


def _check_size(config: Configuration, topology: Topology) -> None:
    if (len(topology.by_role("consumer")) > MAX_CONSUMERS or len(topology.by_role("ar")) > MAX_ARS
            or len(topology.by_role("producer")) > MAX_PRODUCERS):
        raise InstanceTooLarge("oracle instances are limited to 4 consumers, 3 ARs, 3 producers")


def oracle_indistinguishable(config_a: Configuration, config_b: Configuration,
                             topology: Topology, adversary, _cache: _ViewCache | None = None) -> bool:
    _check_size(config_a, topology)
    caps = capabilities(topology, adversary)
    cache = _cache or _ViewCache()
    return _equivalent(cache.get(config_a, topology, caps), cache.get(config_b, topology, caps))


# -- witness search ------------------------------------------------------------

def tuple_space(topology: Topology, contents: Mapping[str, Iterable[str]] | None = None
                ) -> list[CircuitTuple]:
    ars = topology.by_role("ar")
    out = []
    for p in topology.by_role("producer"):
        items = list(contents.get(p, ())) if contents else [_ns(topology, p).to_uri() + "/obj"]
        for r1, r2 in itertools.permutations(ars, 2):
            for t in items:
                out.append(CircuitTuple(r1, r2, p, t))
    return out


def _valid(c: CircuitTuple) -> bool:
    return c.r1 != c.r2


def _swaps(config: Configuration, u: str, v: str) -> Iterable[dict[str, CircuitTuple]]:
    """Exchange the suffix of u's and v's tuples from each position on."""
    a, b = config[u], config.get(v)
    if b is None:
        alt = dict(config)
        del alt[u]
        alt[v] = a
        yield alt
        return
    fa, fb = (a.r1, a.r2, a.p, a.t), (b.r1, b.r2, b.p, b.t)
    for k in (0, 1, 2):
        na = fa[:k] + fb[k:]
        nb = fb[:k] + fa[k:]
        if na[0] == na[1] or nb[0] == nb[1]:
            continue
        alt = dict(config)
        alt[u], alt[v] = CircuitTuple(*na), CircuitTuple(*nb)
        yield alt


@dataclass
class WitnessSearch:
    """Finds configurations the adversary cannot tell apart from ``config``."""

    config: Configuration
    topology: Topology
    adversary: object
    exhaustive: bool = True
    cache: _ViewCache = field(default_factory=_ViewCache)

    def __post_init__(self):
        _check_size(self.config, self.topology)
        self.caps = capabilities(self.topology, self.adversary)
        self.base = self.cache.get(self.config, self.topology, self.caps)
        contents: dict[str, set[str]] = {}
        for c in self.config.values():
            contents.setdefault(c.p, set()).add(c.t)
        for p in self.topology.by_role("producer"):
            contents.setdefault(p, {_ns(self.topology, p).to_uri() + "/obj"})
        self.space = tuple_space(self.topology, {p: sorted(ts) for p, ts in contents.items()})

    def _equiv(self, alt: Mapping[str, CircuitTuple]) -> bool:
        return _equivalent(self.base, self.cache.get(alt, self.topology, self.caps))

    def _search(self, seeds: Iterable[Mapping[str, CircuitTuple]], accept) -> dict | None:
        for alt in seeds:
            if accept(alt) and self._equiv(alt):
                return dict(alt)
        if not self.exhaustive:
            return None
        consumers = self.topology.by_role("consumer")
        options = [None] + self.space
        for combo in itertools.product(options, repeat=len(consumers)):
            alt = {c: t for c, t in zip(consumers, combo) if t is not None}
            if accept(alt) and self._equiv(alt):
                return alt
        return None

    def consumer_witness(self, u: str, strict: bool = False) -> dict | None:
        """C' equivalent to C where another honest consumer retrieves u's content.

        ``strict`` additionally requires the whole tuple to be carried over.
        """
        target = self.config[u]
        honest = [v for v in self.topology.by_role("consumer")
                  if v != u and v not in self.caps.consumers]

        def accept(alt):
            for v in honest:
                c = alt.get(v)
                if c is not None and (c == target if strict else c.content == target.content):
                    return True
            return False

        seeds = (alt for v in honest for alt in _swaps(self.config, u, v))
        return self._search(seeds, accept)

    def producer_witness(self, u: str, p: str) -> dict | None:
        """C' equivalent to C in which u's interest goes to a producer other than p."""
        def accept(alt):
            c = alt.get(u)
            return c is not None and c.p != p

        seeds = (alt for v in sorted(self.config) if v != u for alt in _swaps(self.config, u, v))
        return self._search(seeds, accept)


# -- scenario files ------------------------------------------------------------

def load_scenario(path: str | Path) -> dict:
    """Parse an analyzer scenario.

    Layout: ``{"topology": {...} | "topology_ref": "file.json",
    "adversary": {"compromised_routers": [...], "compromised_consumers": [...],
    "compromised_producers": [...], "taps": [["node", iface], ...]},
    "configuration": {"u": {"r1": ..., "r2": ..., "p": ..., "t": ...}},
    "queries": [{"kind": "consumer"|"producer"|"unlinkability", "u": ..., "p": ...}]}``
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    if "topology" in doc:
        topology = Topology.from_dict(doc["topology"])
    else:
        topology = Topology.load(path.parent / doc["topology_ref"])
    adv = doc.get("adversary", {})
    adversary = AdversarySpec(
        frozenset(adv.get("compromised_producers", ())),
        frozenset(adv.get("compromised_consumers", ())),
        frozenset(adv.get("compromised_routers", ())),
        frozenset((str(n), int(i)) for n, i in adv.get("taps", ())),
    )
    config = {u: CircuitTuple(c["r1"], c["r2"], c["p"], c["t"])
              for u, c in doc["configuration"].items()}
    queries = doc.get("queries")
    if not queries:
        queries = [{"kind": "consumer", "u": u} for u in sorted(config)]
    return {"topology": topology, "adversary": adversary, "configuration": config,
            "queries": queries}


def verdict_to_json(v: Verdict) -> dict:
    if isinstance(v, Anonymous):
        return {"verdict": "Anonymous", "witness": v.witness, "condition": v.condition}
    if isinstance(v, Unlinkable):
        return {"verdict": "Unlinkable", "via": v.via, "witness": v.witness}
    return {"verdict": "NotEstablished", "reason": v.reason}


def analyze(scenario: dict) -> list[dict]:
    topo, adv, config = scenario["topology"], scenario["adversary"], scenario["configuration"]
    out = []
    for q in scenario["queries"]:
        kind, u = q["kind"], q["u"]
        if kind == "consumer":
            v = check_consumer_anonymity(config, topo, adv, u)
        elif kind == "producer":
            v = check_producer_anonymity(config, topo, adv, u, q.get("p") or config[u].p)
        elif kind == "unlinkability":
            v = check_unlinkability(config, topo, adv, u, q.get("p") or config[u].p)
        else:
            raise ValueError(f"unknown query kind {kind!r}")
        out.append({"kind": kind, "u": u, **verdict_to_json(v)})
    return out
