import random

import pytest
from hypothesis import HealthCheck, settings

from andana import crypto, packets
from andana.names import parse
from andana.router import AnonymizingRouter

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def signing_key():
    return crypto.generate_keypair(crypto.SIGNING, rng=random.Random("signing"))


@pytest.fixture(scope="session")
def other_signing_key():
    return crypto.generate_keypair(crypto.SIGNING, rng=random.Random("other"))


@pytest.fixture(scope="session")
def encryption_key():
    return crypto.generate_keypair(crypto.ENCRYPTION, rng=random.Random("encryption"),
                                   not_after=10**9)


@pytest.fixture(scope="session")
def producer_key():
    return crypto.generate_keypair(crypto.SIGNING, rng=random.Random("producer"))


def make_router(ns, org, seed, **kw):
    return AnonymizingRouter(parse(ns), org, rng=random.Random(seed), **kw)


@pytest.fixture
def routers():
    """Two honest ARs in different organizations."""
    return make_router("/ar1", "org-1", "ar1"), make_router("/ar2", "org-2", "ar2")


@pytest.fixture
def produce(producer_key):
    """Sign content for an interest the way a producer would."""
    def _produce(interest, payload=b"content", rng=None):
        return packets.sign_data(interest.name, payload, producer_key, parse("/prod/KEY"),
                                 rng=rng or random.Random(interest.name.to_uri()))
    return _produce
