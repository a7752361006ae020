import pytest

from andana import simnet, topology
from andana.names import parse
from andana.packets import Interest
from andana.simnet import (ANDANA_A, ANDANA_S, PLAIN, Adversary, NotObserved, Request, Simulator,
                           TooSoon)


@pytest.fixture
def line():
    return topology.line4()


def run(topo, workload, seed=0, adversary=None):
    sim = Simulator(topo, seed, adversary)
    for action in workload:
        sim.submit(action)
    sim.run()
    return sim


def test_same_seed_same_log(line):
    work = [Request("c", "/prod/a", ANDANA_A), Request("c", "/prod/b", ANDANA_S, at_ms=5)]
    assert run(line, work, 3).trace.text() == run(line, work, 3).trace.text()
    assert run(line, work, 3).trace.text() != run(line, work, 4).trace.text()


def test_module_level_run(line):
    log = simnet.run(line, [Request("c", "/prod/a")], seed=1)
    assert log.digest() == simnet.run(line, [Request("c", "/prod/a")], seed=1).digest()


def test_empty_workload_only_setup(line):
    sim = run(line, [])
    assert {l.split("|")[2] for l in sim.trace.lines} == {"setup"}
    assert len(sim.trace) == 4


def test_three_traversals_each_way(line):
    sim = run(line, [Request("c", "/prod/x")])
    tx = [l.split("|") for l in sim.trace.lines if "|tx-" in l]
    assert sum(p[2] == "tx-interest" for p in tx) == 3
    assert sum(p[2] == "tx-data" for p in tx) == 3
    assert [d.interest.name for d in sim.app("c").delivered] == [parse("/prod/x")]


def test_trace_line_format(line):
    sim = run(line, [Request("c", "/prod/x")])
    for l in sim.trace.lines:
        time, node, event, name, iface = l.split("|")
        assert int(time) >= 0 and node in line.nodes
        assert name.startswith("/") or event == "setup"
        assert iface == "-" or int(iface) >= -1


def test_causality_and_fifo(line, monkeypatch):
    sent, arrived = {}, {}
    sim = Simulator(line, 0)
    orig_tx, orig_arrive = sim.transmit, sim._arrive

    def transmit(node, face, pkt, t):
        sent.setdefault((node, face), []).append((max(t, sim._link_free.get((node, face), 0)), pkt))
        orig_tx(node, face, pkt, t)

    def arrive(t, node, iface, pkt):
        peer = sim._peers[(node, iface)]
        arrived.setdefault(peer[:2], []).append((t, pkt))
        orig_arrive(t, node, iface, pkt)

    monkeypatch.setattr(sim, "transmit", transmit)
    monkeypatch.setattr(sim, "_arrive", arrive)
    for n in sim.nodes.values():
        n.sim = sim
    sim.submit(simnet.Fetch("c", "/prod/f", 64 * 1024, ANDANA_A))
    sim.run()
    assert sent and sent.keys() == arrived.keys()
    for end, txs in sent.items():
        link = sim._peers[end][2]
        rxs = arrived[end]
        assert [p for _, p in txs] == [p for _, p in rxs]  # FIFO
        for (t0, pkt), (t1, _) in zip(txs, rxs):
            assert t1 >= t0 + link.latency_us + pkt.wire_size * 1_000_000 // link.bw_bps


def test_plain_request_sessions_and_rotation(line):
    sim = run(line, [Request("c", "/prod/a", ANDANA_S), simnet.Rotate("ar1", 50),
                     Request("c", "/prod/b", ANDANA_A, at_ms=100)])
    assert [d.interest.name for d in sim.app("c").delivered] == [parse("/prod/a"), parse("/prod/b")]
    assert sim.counts("ar1", "rotate-key") == 1
    assert sim.counts("c", "session-up") == 2


# -- adversary -------------------------------------------------------------------

def test_compromise_too_soon(line):
    sim = Simulator(line, 0)
    delay = sim.min_compromise_delay_us
    assert delay == 10 * line.max_rtt_us()
    with pytest.raises(TooSoon):
        sim.compromise("ar1", delay - 1)
    sim.compromise("ar1", delay)
    assert "ar1" in sim.adversary.compromised_routers


def test_compromise_only_sees_later_state(line):
    sim = Simulator(line, 0)
    sim.submit(Request("c", "/prod/before", ANDANA_A))
    sim.run()
    at = sim.now + sim.min_compromise_delay_us
    sim.compromise("ar1", at)
    sim.submit(Request("c", "/prod/after", ANDANA_A, at_ms=at / 1000 + 1))
    sim.run()
    notes = [l for l in sim.trace.view_lines() if "|state|pending|" in l]
    assert len(notes) == 1
    assert int(notes[0].split("|")[1]) >= at
    assert all(int(l.split("|")[1]) >= at for l in sim.trace.view_lines())


def test_full_tap_marks_router_compromised(line):
    adv = Adversary()
    adv.tap(line, "ar1", 0)
    assert "ar1" not in adv.compromised_routers
    adv.tap(line, "ar1", 1)
    assert "ar1" in adv.compromised_routers


def test_compromise_taps_all_interfaces(line):
    adv = Adversary()
    adv.compromise(line, "ar2", 0)
    assert {("ar2", 0), ("ar2", 1)} <= adv.tapped_interfaces


def test_view_reveals_only_with_keys(line):
    honest = run(line, [Request("c", "/prod/x", ANDANA_A)],
                 adversary=Adversary(tapped_interfaces={("c", 0), ("p", 0)}))
    assert honest.view and all(r.revealed == "-" for r in honest.view if r.node == "c")

    one = Adversary()
    one.compromise(line, "ar1")
    sim = run(line, [Request("c", "/prod/x", ANDANA_A)], adversary=one)
    reveals = {r.revealed for r in sim.view}
    if any(r.startswith("inner=/ar2") for r in reveals):
        # ar1 was the entry: it learns the exit hop, never the content
        assert not any(r.startswith(("content=", "inner=/prod")) for r in reveals)
    else:
        # ar1 was the exit: it sees the content name but not the consumer's layer
        assert "inner=/prod/x" in reveals
        assert all(r.revealed == "-" for r in sim.view if r.iface == 0)

    both = Adversary()
    both.compromise(line, "ar1")
    both.compromise(line, "ar2")
    sim = run(line, [Request("c", "/prod/x", ANDANA_A)], adversary=both)
    assert "content=/prod/x" in {r.revealed for r in sim.view}


def _captured(line):
    """Run one request while tapping each AR's consumer-side interface.

    Returns the simulator, the entry AR and the encrypted interest it received.
    """
    adv = Adversary()
    adv.tap(line, "ar1", 0)
    adv.tap(line, "ar2", 0)
    sim = Simulator(line, 0, adv)
    sim.submit(Request("c", "/prod/secret", ANDANA_A))
    sim.run()
    for r in sim.view:
        if (r.direction == "in" and isinstance(r.packet, Interest)
                and line.nodes[r.node].prefix.is_prefix_of(r.packet.name)):
            return sim, r.node, r.packet
    raise AssertionError("entry interest not observed")


def test_replay_within_freshness_hits_cache(line):
    sim, entry, eint = _captured(line)
    upstream = sim.counts("p", "rx-interest")
    forwarded = sim.app(entry).forwarded
    sim.replay(eint, entry, 0, sim.now + 1000)
    sim.run()
    assert sim.counts(entry, "cs-hit") == 1
    assert sim.counts("p", "rx-interest") == upstream
    assert sim.app(entry).forwarded == forwarded


def test_replay_after_expiry_rejected(line):
    sim, entry, eint = _captured(line)
    upstream = sim.counts("p", "rx-interest")
    sim.replay(eint, entry, 0, sim.now + 10_000_000)
    sim.run()
    assert sim.app(entry).rejected == {"StaleTimestamp": 1}
    assert sim.counts(entry, "ar-reject-StaleTimestamp") == 1
    assert sim.counts("p", "rx-interest") == upstream


def test_replay_unobserved(line):
    sim, entry, eint = _captured(line)
    with pytest.raises(NotObserved):
        sim.replay(Interest(parse("/ar1/forged")), "ar1", 0, sim.now + 1)
    with pytest.raises(NotObserved):
        sim.replay(eint, "ar2", 1, sim.now + 1)


def test_unknown_action(line):
    with pytest.raises(simnet.ConfigError):
        Simulator(line).submit(object())
