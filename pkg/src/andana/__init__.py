"""Anonymizing overlay for named-data networking.

Modules:

* ``names``, ``tlv``, ``packets`` -- names and the Interest/Data wire codec
* ``crypto`` -- RSA-OAEP/PSS, AES-CTR+HMAC hybrid encryption, X25519
* ``forwarder`` -- FIB, PIT with collapsing, content store
* ``consumer`` / ``router`` -- the consumer and anonymizing-router halves
* ``directory`` -- AR descriptors and the registry consumers pick circuits from
* ``topology`` / ``simnet`` -- static topologies and the discrete-event simulator
* ``analyzer`` -- anonymity sets and verdicts, plus the symbolic oracle
* ``cli`` -- fetch/bench/analyze harness
"""

__version__ = "0.1.0"
