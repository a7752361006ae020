import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st
from scipy import stats

from andana import consumer as cons, crypto, layers, packets
from andana.consumer import EphemeralCircuit, NoEligiblePair, select_circuit
from andana.directory import ARDescriptor
from andana.names import parse
from andana.packets import Interest

from pipeline import back, forward, roundtrip


def fake_ar(ns, org, seed):
    pk = crypto.PublicKey(random.Random(seed).getrandbits(1024) | 1, 65537, crypto.SIGNING)
    return ARDescriptor(parse(ns), org, pk, crypto.fingerprint(pk))


@pytest.fixture
def circuit(routers, rng):
    r1, r2 = routers
    return EphemeralCircuit(r1.descriptor(0), r2.descriptor(0), crypto.SymmetricKey.generate(rng),
                            crypto.SymmetricKey.generate(rng), 0)


# -- circuit selection ---------------------------------------------------------

def test_two_ars_unique_pair(rng):
    a, b = fake_ar("/a", "A", 1), fake_ar("/b", "B", 2)
    pairs = {(c.entry.namespace, c.exit.namespace) for c in
             (select_circuit([a, b], rng) for _ in range(50))}
    assert pairs == {(a.namespace, b.namespace), (b.namespace, a.namespace)}


def test_single_organization_has_no_pair(rng):
    ars = [fake_ar(f"/a{i}", "A", i) for i in range(3)]
    with pytest.raises(NoEligiblePair):
        select_circuit(ars, rng)


def test_nested_namespaces_ineligible(rng):
    with pytest.raises(NoEligiblePair):
        select_circuit([fake_ar("/a", "A", 1), fake_ar("/a/b", "B", 2)], rng)


def test_shared_signing_key_ineligible():
    a = fake_ar("/a", "A", 1)
    b = ARDescriptor(parse("/b"), "B", a.signing_pk, a.signing_fingerprint)
    assert not cons.eligible(a, b)


def test_uniform_over_valid_pairs():
    ars = [fake_ar("/a1", "A", 1), fake_ar("/a2", "A", 2), fake_ar("/b1", "B", 3),
           fake_ar("/b2", "B", 4)]
    valid = [(x.namespace, y.namespace) for x, y in cons.eligible_pairs(ars)]
    assert len(valid) == 8
    rng = random.Random(99)
    draws = 100_000
    counts = Counter()
    for _ in range(draws):
        c = select_circuit(ars, rng)
        counts[(c.entry.namespace, c.exit.namespace)] += 1
    assert set(counts) == set(valid)
    observed = [counts[p] for p in valid]
    expected = draws / len(valid)
    assert all(abs(o - expected) / expected < 0.05 for o in observed)
    assert stats.chisquare(observed).pvalue > 1e-3


orgs = st.lists(st.tuples(st.sampled_from(["/a", "/b", "/a/x", "/c", "/c/d/e"]),
                          st.sampled_from("XYZ")), min_size=1, max_size=6, unique_by=lambda t: t[0])


@given(orgs, st.integers(0, 2**32))
def test_selected_pair_respects_constraints(ars, seed):
    listing = [fake_ar(ns, org, i) for i, (ns, org) in enumerate(ars)]
    rng = random.Random(seed)
    if not cons.eligible_pairs(listing):
        with pytest.raises(NoEligiblePair):
            select_circuit(listing, rng)
        return
    c = select_circuit(listing, rng)
    assert c.entry.organization != c.exit.organization
    assert not c.entry.namespace.is_prefix_of(c.exit.namespace)
    assert not c.exit.namespace.is_prefix_of(c.entry.namespace)
    assert c.k1 != c.k2


def test_circuit_rejects_bad_pairs():
    a = fake_ar("/a", "A", 1)
    with pytest.raises(NoEligiblePair):
        EphemeralCircuit(a, fake_ar("/b", "A", 2), crypto.SymmetricKey(bytes(16)),
                         crypto.SymmetricKey(bytes(16)), 0)
    with pytest.raises(ValueError):
        EphemeralCircuit(a, fake_ar("/b", "B", 2), crypto.SymmetricKey(bytes(16)),
                         crypto.SymmetricKey(bytes(16)), 0, max_interests=5)


# -- asymmetric interests ------------------------------------------------------

def test_asymmetric_roundtrip_recovers_interest(routers, circuit, rng):
    interest = Interest(parse("/prod/doc"), scope=3, exclusion_filter=b"ex", nonce=b"n0")
    _, _, delivered = forward(circuit, *routers, interest, 1000, rng)
    assert delivered == interest


def test_encryptions_differ(routers, rng):
    r1, r2 = routers
    interest = Interest(parse("/prod/doc"))
    c = EphemeralCircuit(r1.descriptor(0), r2.descriptor(0), crypto.SymmetricKey.generate(rng),
                         crypto.SymmetricKey.generate(rng), 0, max_interests=2)
    a = cons.encrypt_interest_asymmetric(c, interest, 0, rng=rng)
    b = cons.encrypt_interest_asymmetric(c, interest, 0, rng=rng)
    assert a.encode() != b.encode()


def test_inner_timestamp_adds_half_rtt(routers, circuit, rng):
    r1, r2 = routers
    eint = cons.encrypt_interest_asymmetric(circuit, Interest(parse("/prod/t")), 5000, 250.0, rng)
    outer = r1.try_decrypt(eint, 5000)
    inner = r2.try_decrypt(outer.next_interest(), 5000)
    assert outer.timestamp == 5000
    assert inner.timestamp == 5000 + 125
    assert (outer.key, inner.key) == (circuit.k1, circuit.k2)


def test_name_structure(routers, circuit, rng):
    r1, r2 = routers
    eint = cons.encrypt_interest_asymmetric(circuit, Interest(parse("/prod/t")), 0, rng=rng)
    assert eint.name[:-1] == r1.namespace and len(eint.name) == 2
    inner = r1.try_decrypt(eint, 0).next_interest()
    assert inner.name[:-1] == r2.namespace


def test_interior_too_large(circuit, rng):
    with pytest.raises(cons.InteriorTooLarge):
        cons.encrypt_interest_asymmetric(circuit, Interest(parse("/p") / (b"x" * 9000)), 0, rng=rng)


def test_circuit_is_single_use(circuit, rng):
    cons.encrypt_interest_asymmetric(circuit, Interest(parse("/prod/a")), 0, rng=rng)
    with pytest.raises(cons.CircuitExhausted):
        cons.encrypt_interest_asymmetric(circuit, Interest(parse("/prod/b")), 0, rng=rng)


# -- decapsulation ---------------------------------------------------------------

def test_end_to_end_identity(routers, circuit, rng, produce, producer_key):
    original, got = roundtrip(circuit, *routers, Interest(parse("/prod/doc")), 0, rng, produce,
                              producer_key.pk)
    assert got.encode() == original.encode()
    assert packets.verify_data(got, producer_key.pk)
    assert not circuit.outstanding


def test_tampered_in_flight(routers, circuit, rng, produce, producer_key):
    r1, r2 = routers
    _, _, inner = forward(circuit, r1, r2, Interest(parse("/prod/doc")), 0, rng)
    _, d1 = back(r1, r2, produce(inner), 0)
    payload = bytearray(d1.payload)
    payload[40] ^= 0xFF
    from dataclasses import replace
    with pytest.raises(crypto.DecryptionFailed):
        cons.decapsulate_content(circuit, replace(d1, payload=bytes(payload)), producer_key.pk)


def test_exit_substitution_detected(routers, circuit, rng, producer_key):
    r1, r2 = routers
    _, _, inner = forward(circuit, r1, r2, Interest(parse("/prod/doc")), 0, rng)
    forged = packets.sign_data(inner.name, b"evil", r2.signing_key, parse("/prod/KEY"), rng=rng)
    _, d1 = back(r1, r2, forged, 0)
    with pytest.raises(cons.ProducerSignatureInvalid):
        cons.decapsulate_content(circuit, d1, producer_key.pk)


def test_content_for_other_name_rejected(routers, circuit, rng, produce, producer_key):
    r1, r2 = routers
    _, _, inner = forward(circuit, r1, r2, Interest(parse("/prod/doc")), 0, rng)
    wrong = produce(Interest(parse("/prod/other")))
    # the exit AR matches by name, so splice the wrong Data in under the right name
    wrapped = crypto.sym_encrypt(circuit.k1, crypto.sym_encrypt(circuit.k2, wrong.encode()))
    d1 = r1.handle_returning_content(r2.handle_returning_content(produce(inner), 0)[0], 0)[0]
    from dataclasses import replace
    with pytest.raises(cons.UnexpectedContent):
        cons.decapsulate_content(circuit, replace(d1, payload=wrapped), producer_key.pk)


# -- sessions ------------------------------------------------------------------

@pytest.fixture
def session_circuit(routers, rng):
    r1, r2 = routers
    c = EphemeralCircuit(r1.descriptor(0), r2.descriptor(0), crypto.SymmetricKey.generate(rng),
                         crypto.SymmetricKey.generate(rng), 0, cons.SESSION, max_interests=4)
    c.entry_session = cons.establish_session(r1, c.entry, "dh", 0, rng)
    c.exit_session = cons.establish_session(r2, c.exit, "wrap", 0, rng)
    return c


def test_session_roundtrip(routers, session_circuit, rng, produce, producer_key):
    original, got = roundtrip(session_circuit, *routers, Interest(parse("/prod/s")), 10, rng,
                              produce, producer_key.pk)
    assert got.encode() == original.encode()


def test_session_packets_share_sid(routers, session_circuit, rng):
    a = cons.encrypt_interest_session(session_circuit, Interest(parse("/prod/1")), 0, rng=rng)
    b = cons.encrypt_interest_session(session_circuit, Interest(parse("/prod/2")), 0, rng=rng)
    assert a.name[1] == b.name[1] == session_circuit.entry_session.sid
    assert a.name[2] != b.name[2]


def test_session_layers_smaller(routers, session_circuit, circuit, rng):
    interest = Interest(parse("/prod/size"))
    s = cons.encrypt_interest_session(session_circuit, interest, 0, rng=rng)
    a = cons.encrypt_interest_asymmetric(circuit, interest, 0, rng=rng)
    assert s.wire_size < a.wire_size


def test_mixed_legs(routers, session_circuit, rng, produce, producer_key):
    original, got = roundtrip(session_circuit, *routers, Interest(parse("/prod/m")), 0, rng,
                              produce, producer_key.pk, entry_mode=cons.SESSION,
                              exit_mode=cons.ASYMMETRIC)
    assert got == original


def test_session_expired(routers, session_circuit, rng):
    later = session_circuit.entry_session.lifetime_ms + 1
    with pytest.raises(cons.SessionExpired):
        cons.encrypt_interest_session(session_circuit, Interest(parse("/prod/x")), later, rng=rng)
    session_circuit.exit_session = None
    with pytest.raises(cons.SessionExpired):
        cons.encrypt_interest_session(session_circuit, Interest(parse("/prod/x")), 0, rng=rng)


@pytest.mark.parametrize("mode", ["dh", "wrap", "encrypt-to-key"])
def test_handshake_keys_match(routers, rng, mode):
    r1, _ = routers
    s = cons.establish_session(r1, r1.descriptor(0), mode, 0, rng)
    assert r1.sessions[s.sid].key == s.shared_key
    assert len(s.sid) == 16


def test_handshake_single_exchange(routers, rng):
    r1, _ = routers
    hs = cons.session_request(r1.descriptor(0), "dh", 0, rng)
    assert hs.interest.name[:2] == r1.namespace / b"createsession"
    assert len(hs.interest.name) == 3
    response = r1.handle_createsession(hs.interest, 0)
    assert packets.verify_data(response, r1.signing_key.pk)
    assert cons.complete_session(hs, response, 0).shared_key == r1.sessions[
        cons.complete_session(hs, response, 0).sid].key


def test_handshake_wrong_signer(routers, rng, other_signing_key):
    r1, _ = routers
    hs = cons.session_request(r1.descriptor(0), "dh", 0, rng)
    forged = packets.resign(r1.handle_createsession(hs.interest, 0), other_signing_key)
    with pytest.raises(cons.HandshakeFailed):
        cons.complete_session(hs, forged, 0)


def test_handshake_unknown_mode(routers):
    with pytest.raises(ValueError):
        cons.session_request(routers[0].descriptor(0), "carrier-pigeon")


def test_rtt_estimator():
    est = cons.RttEstimator()
    assert est.value == 200.0
    assert est.update(100.0) == pytest.approx(0.875 * 200 + 0.125 * 100)
