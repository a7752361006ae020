"""NDN node data plane: FIB, PIT with interest collapsing, content store.

The forwarder is driven by the simulator but has no notion of links or
timing beyond the ``now`` (integer microseconds) passed to each call.  Every
call returns the list of actions the node must carry out.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

from .names import Name
from .packets import Data, Interest
from .trie import NameTrie

PIT_LIFETIME_US = 4_000_000
DEFAULT_CS_CAPACITY = 16 * 1024 * 1024


@dataclass(frozen=True)
class Forward:
    face: int
    interest: Interest


@dataclass(frozen=True)
class SendData:
    face: int
    data: Data


@dataclass(frozen=True)
class Drop:
    reason: str
    name: Name


Action = Forward | SendData | Drop


@dataclass
class FibEntry:
    prefix: Name
    next_hops: list[int] = field(default_factory=list)


@dataclass
class PitEntry:
    name: Name
    downstream: set[int]
    created_at: int
    expiry: int


class Fib:
    def __init__(self):
        self._trie = NameTrie()

    def add_route(self, prefix: Name, face: int) -> None:
        entry = self._trie.get(prefix)
        if entry is None:
            entry = FibEntry(prefix)
            self._trie[prefix] = entry
        if face not in entry.next_hops:
            entry.next_hops.append(face)

    def remove_route(self, prefix: Name, face: int) -> None:
        entry = self._trie.get(prefix)
        if entry is None:
            return
        if face in entry.next_hops:
            entry.next_hops.remove(face)
        if not entry.next_hops:
            del self._trie[prefix]

    def lookup(self, name: Name) -> FibEntry | None:
        hit = self._trie.longest_prefix(name)
        return None if hit is None else hit[1]

    def entries(self) -> list[FibEntry]:
        return [entry for _, entry in self._trie.items()]


class ContentStore:
    """Byte-bounded LRU cache that never serves stale Data."""

    def __init__(self, capacity_bytes: int = DEFAULT_CS_CAPACITY):
        self.capacity_bytes = capacity_bytes
        self._lru: OrderedDict[Name, tuple[Data, int, int]] = OrderedDict()
        self._index = NameTrie()
        self.used_bytes = 0

    def __len__(self) -> int:
        return len(self._lru)

    def __contains__(self, name: Name) -> bool:
        return name in self._lru

    @staticmethod
    def _fresh(data: Data, inserted_at: int, now: int) -> bool:
        return now < inserted_at + data.freshness * 1000

    def insert(self, data: Data, now: int) -> list[Name]:
        if data.name in self._lru:
            self._remove(data.name)
        size = data.wire_size
        self._lru[data.name] = (data, now, size)
        self._index[data.name] = True
        self.used_bytes += size
        if self.used_bytes > self.capacity_bytes:
            return self.evict(now)
        return []

    def _remove(self, name: Name) -> None:
        _, _, size = self._lru.pop(name)
        del self._index[name]
        self.used_bytes -= size

    def lookup(self, name: Name, now: int) -> Data | None:
        """Freshest-found Data whose name has ``name`` as a prefix."""
        entry = self._lru.get(name)
        if entry is not None and self._fresh(entry[0], entry[1], now):
            self._lru.move_to_end(name)
            return entry[0]
        for candidate, _ in self._index.descendants(name):
            data, inserted_at, _ = self._lru[candidate]
            if self._fresh(data, inserted_at, now):
                self._lru.move_to_end(candidate)
                return data
        return None

    def evict(self, now: int) -> list[Name]:
        evicted = [n for n, (d, t, _) in self._lru.items() if not self._fresh(d, t, now)]
        for n in evicted:
            self._remove(n)
        while self.used_bytes > self.capacity_bytes and self._lru:
            oldest = next(iter(self._lru))
            self._remove(oldest)
            evicted.append(oldest)
        return evicted

    def names(self) -> list[Name]:
        return list(self._lru)


TraceFn = Callable[[int, str, Name, int | None], None]


class Forwarder:
    def __init__(
        self,
        node_id: str = "node",
        cs_capacity: int = DEFAULT_CS_CAPACITY,
        pit_lifetime_us: int = PIT_LIFETIME_US,
        trace: TraceFn | None = None,
    ):
        self.node_id = node_id
        self.fib = Fib()
        self.pit: dict[Name, PitEntry] = {}
        self.cs = ContentStore(cs_capacity)
        self.pit_lifetime_us = pit_lifetime_us
        self._trace = trace or (lambda *a: None)

    def _live_pit(self, name: Name, now: int) -> PitEntry | None:
        entry = self.pit.get(name)
        if entry is not None and entry.expiry <= now:
            del self.pit[name]
            return None
        return entry

    def expire(self, now: int) -> list[Name]:
        gone = [n for n, e in self.pit.items() if e.expiry <= now]
        for n in gone:
            del self.pit[n]
        return gone

    def on_interest(self, interest: Interest, face: int, now: int) -> list[Action]:
        name = interest.name
        cached = self.cs.lookup(name, now)
        if cached is not None:
            self._trace(now, "cs-hit", name, face)
            return [SendData(face, cached)]
        entry = self._live_pit(name, now)
        if entry is not None:
            entry.downstream.add(face)
            self._trace(now, "pit-collapse", name, face)
            return []
        fib_entry = self.fib.lookup(name)
        hops = [] if fib_entry is None else [h for h in fib_entry.next_hops if h != face]
        if not hops:
            self._trace(now, "drop-nofib", name, face)
            return [Drop("no-route", name)]
        self.pit[name] = PitEntry(name, {face}, now, now + self.pit_lifetime_us)
        self._trace(now, "forward", name, hops[0])
        return [Forward(hops[0], interest)]

    def on_data(self, data: Data, face: int, now: int) -> list[Action]:
        matched = []
        for prefix in data.name.prefixes():
            entry = self._live_pit(prefix, now)
            if entry is not None:
                matched.append(entry)
        if not matched:
            self._trace(now, "drop-unsolicited", data.name, face)
            return [Drop("unsolicited", data.name)]
        out: list[Action] = []
        faces: list[int] = []
        for entry in matched:
            del self.pit[entry.name]
            for f in sorted(entry.downstream):
                if f != face and f not in faces:
                    faces.append(f)
        for f in faces:
            out.append(SendData(f, data))
        self.cs.insert(data, now)
        self._trace(now, "satisfy", data.name, face)
        return out

    def cs_evict(self, now: int) -> list[Name]:
        return self.cs.evict(now)
