"""Static network description: nodes, point-to-point links and FIBs.

JSON layout::

    {"nodes": [{"id": "c", "role": "consumer"}, {"id": "ar1", "role": "ar",
                "prefix": "/ar1", "org": "A"}, ...],
     "links": [{"a": "c", "ai": 0, "b": "ar1", "bi": 0,
                "latency_ms": 1.0, "bw_bps": 12500000}, ...],
     "fibs":  {"c": [{"prefix": "/", "iface": 0}], ...}}

``bw_bps`` is bytes per second.  Face ``APP_FACE`` (-1) on every node is the
local application (consumer, producer, AR or directory logic).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx

from . import names
from .names import Name

APP_FACE = -1
ROLES = ("consumer", "router", "ar", "producer", "directory")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    id: str
    role: str
    prefix: Name | None = None
    org: str | None = None


@dataclass(frozen=True)
class LinkSpec:
    a: str
    ai: int
    b: str
    bi: int
    latency_ms: float = 1.0
    bw_bps: int = 12_500_000

    @property
    def latency_us(self) -> int:
        return round(self.latency_ms * 1000)


@dataclass
class Topology:
    nodes: dict[str, NodeSpec] = field(default_factory=dict)
    links: list[LinkSpec] = field(default_factory=list)
    fibs: dict[str, list[tuple[Name, int]]] = field(default_factory=dict)

    # -- construction -----------------------------------------------------

    def add_node(self, id: str, role: str, prefix: str | Name | None = None,
                 org: str | None = None) -> NodeSpec:
        spec = NodeSpec(id, role, None if prefix is None else names.as_name(prefix), org)
        self.nodes[id] = spec
        return spec

    def add_link(self, a: str, b: str, latency_ms: float = 1.0, bw_bps: int = 12_500_000,
                 ai: int | None = None, bi: int | None = None) -> LinkSpec:
        ai = len(self.interfaces(a)) if ai is None else ai
        bi = len(self.interfaces(b)) if bi is None else bi
        link = LinkSpec(a, ai, b, bi, latency_ms, bw_bps)
        self.links.append(link)
        return link

    def validate(self) -> None:
        for n in self.nodes.values():
            if n.role not in ROLES:
                raise ConfigError(f"node {n.id}: unknown role {n.role!r}")
            if n.role in ("ar", "producer", "directory") and n.prefix is None:
                raise ConfigError(f"node {n.id}: role {n.role} needs a prefix")
        seen = set()
        for link in self.links:
            for node, iface in ((link.a, link.ai), (link.b, link.bi)):
                if node not in self.nodes:
                    raise ConfigError(f"link references unknown node {node!r}")
                if iface < 0:
                    raise ConfigError(f"{node}: interface ids must be non-negative")
                if (node, iface) in seen:
                    raise ConfigError(f"{node}: interface {iface} used twice")
                seen.add((node, iface))
            if link.a == link.b:
                raise ConfigError(f"self-loop on {link.a}")
            if link.latency_ms <= 0:
                raise ConfigError("link latency must be positive")
            if link.bw_bps <= 0:
                raise ConfigError("link bandwidth must be positive")
        for node, entries in self.fibs.items():
            if node not in self.nodes:
                raise ConfigError(f"FIB for unknown node {node!r}")
            for _, iface in entries:
                if iface != APP_FACE and (node, iface) not in seen:
                    raise ConfigError(f"{node}: FIB points at missing interface {iface}")

    # -- queries ----------------------------------------------------------

    def interfaces(self, node: str) -> list[int]:
        out = []
        for link in self.links:
            if link.a == node:
                out.append(link.ai)
            if link.b == node:
                out.append(link.bi)
        return sorted(out)

    def peer(self, node: str, iface: int) -> tuple[str, int, LinkSpec]:
        for link in self.links:
            if link.a == node and link.ai == iface:
                return link.b, link.bi, link
            if link.b == node and link.bi == iface:
                return link.a, link.ai, link
        raise ConfigError(f"{node} has no interface {iface}")

    def iface_towards(self, node: str, neighbor: str) -> int:
        for link in self.links:
            if link.a == node and link.b == neighbor:
                return link.ai
            if link.b == node and link.a == neighbor:
                return link.bi
        raise ConfigError(f"{node} and {neighbor} are not adjacent")

    def by_role(self, role: str) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.role == role)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.nodes))
        for link in self.links:
            g.add_edge(link.a, link.b, weight=link.latency_us)
        return g

    def max_rtt_us(self) -> int:
        """Twice the largest shortest-path latency between any two nodes."""
        g = self.graph()
        worst = 0
        for _, dists in nx.all_pairs_dijkstra_path_length(g, weight="weight"):
            worst = max(worst, max(dists.values(), default=0))
        return 2 * worst

    def compute_fibs(self) -> "Topology":
        """Shortest-latency routes toward every node that owns a prefix.

        Ties between equal-cost neighbours go to the smallest node id so the
        result is deterministic.
        """
        g = self.graph()
        fibs: dict[str, list[tuple[Name, int]]] = {n: [] for n in sorted(self.nodes)}
        for dest in sorted(self.nodes):
            spec = self.nodes[dest]
            if spec.prefix is None:
                continue
            fibs[dest].append((spec.prefix, APP_FACE))
            dist = nx.single_source_dijkstra_path_length(g, dest, weight="weight")
            for v in sorted(dist):
                if v == dest:
                    continue
                hop = min(w for w in g.neighbors(v)
                          if w in dist and dist[w] + g[v][w]["weight"] == dist[v])
                fibs[v].append((spec.prefix, self.iface_towards(v, hop)))
        self.fibs = fibs
        return self

    # -- JSON -------------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for n in sorted(self.nodes.values(), key=lambda n: n.id):
            d = {"id": n.id, "role": n.role}
            if n.prefix is not None:
                d["prefix"] = n.prefix.to_uri()
            if n.org is not None:
                d["org"] = n.org
            nodes.append(d)
        links = [{"a": l.a, "ai": l.ai, "b": l.b, "bi": l.bi,
                  "latency_ms": l.latency_ms, "bw_bps": l.bw_bps} for l in self.links]
        fibs = {node: [{"prefix": p.to_uri(), "iface": i} for p, i in entries]
                for node, entries in sorted(self.fibs.items())}
        return {"nodes": nodes, "links": links, "fibs": fibs}

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        try:
            topo = cls()
            for n in doc["nodes"]:
                topo.add_node(str(n["id"]), n["role"], n.get("prefix"), n.get("org"))
            for l in doc["links"]:
                topo.links.append(LinkSpec(str(l["a"]), int(l["ai"]), str(l["b"]), int(l["bi"]),
                                           float(l.get("latency_ms", 1.0)),
                                           int(l.get("bw_bps", 12_500_000))))
            fibs = doc.get("fibs")
            if fibs:
                topo.fibs = {node: [(names.parse(e["prefix"]), int(e["iface"])) for e in entries]
                             for node, entries in fibs.items()}
            else:
                topo.compute_fibs()
        except (KeyError, TypeError, names.MalformedName) as exc:
            raise ConfigError(f"bad topology document: {exc}") from exc
        topo.validate()
        return topo

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Topology":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"topology is not JSON: {exc}") from exc
        return cls.from_dict(doc)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "Topology":
        return cls.loads(Path(path).read_text())


def line4(latency_ms: float = 2.0, bw_bps: int = 12_500_000) -> Topology:
    """consumer - ar1 - ar2 - producer, the testbed layout used throughout."""
    topo = Topology()
    topo.add_node("c", "consumer")
    topo.add_node("ar1", "ar", "/ar1", "org-1")
    topo.add_node("ar2", "ar", "/ar2", "org-2")
    topo.add_node("p", "producer", "/prod")
    for a, b in (("c", "ar1"), ("ar1", "ar2"), ("ar2", "p")):
        topo.add_link(a, b, latency_ms, bw_bps)
    topo.compute_fibs()
    return topo


def star(consumers: int, latency_ms: float = 1.0, bw_bps: int = 12_500_000) -> Topology:
    """``consumers`` leaves around router ``r`` with producer ``p`` on its own spoke."""
    topo = Topology()
    topo.add_node("r", "router")
    topo.add_node("p", "producer", "/prod")
    topo.add_link("r", "p", latency_ms, bw_bps)
    for i in range(consumers):
        topo.add_node(f"c{i}", "consumer")
        topo.add_link(f"c{i}", "r", latency_ms, bw_bps)
    topo.compute_fibs()
    return topo
