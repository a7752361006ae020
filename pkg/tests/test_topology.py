import json

import pytest

from andana import topology
from andana.names import parse
from andana.topology import APP_FACE, ConfigError, Topology


def test_line4_layout():
    t = topology.line4()
    assert t.by_role("ar") == ["ar1", "ar2"]
    assert {t.nodes["ar1"].org, t.nodes["ar2"].org} == {"org-1", "org-2"}
    assert (parse("/prod"), t.iface_towards("c", "ar1")) in t.fibs["c"]
    assert (parse("/prod"), APP_FACE) in t.fibs["p"]
    assert t.max_rtt_us() == 2 * 3 * 2000


def test_json_roundtrip(tmp_path):
    t = topology.star(3)
    t.dump(tmp_path / "t.json")
    again = Topology.load(tmp_path / "t.json")
    assert again.to_dict() == t.to_dict()


def test_fibs_computed_when_absent():
    doc = topology.line4().to_dict()
    del doc["fibs"]
    assert Topology.from_dict(doc).fibs == topology.line4().fibs


def test_equal_cost_ties_go_to_smallest_id():
    t = Topology()
    t.add_node("s", "consumer")
    for mid in ("m2", "m1"):
        t.add_node(mid, "router")
    t.add_node("d", "producer", "/d")
    for a, b in (("s", "m2"), ("s", "m1"), ("m2", "d"), ("m1", "d")):
        t.add_link(a, b)
    t.compute_fibs()
    assert dict(t.fibs["s"])[parse("/d")] == t.iface_towards("s", "m1")


@pytest.mark.parametrize("mutate", [
    lambda d: d["nodes"].append({"id": "x", "role": "wizard"}),
    lambda d: d["nodes"].append({"id": "x", "role": "ar"}),
    lambda d: d["links"].append({"a": "c", "ai": 0, "b": "p", "bi": 7}),
    lambda d: d["links"].append({"a": "c", "ai": 5, "b": "ghost", "bi": 0}),
    lambda d: d["links"][0].update(latency_ms=0),
    lambda d: d["links"].append({"a": "c", "ai": 5, "b": "c", "bi": 6}),
    lambda d: d["fibs"]["c"].append({"prefix": "/z", "iface": 42}),
    lambda d: d.pop("nodes"),
])
def test_invalid_documents(mutate):
    doc = topology.line4().to_dict()
    mutate(doc)
    with pytest.raises(ConfigError):
        Topology.from_dict(doc)


def test_not_json():
    with pytest.raises(ConfigError):
        Topology.loads("{nope")


def test_documented_layout_parses():
    doc = {"nodes": [{"id": "c", "role": "consumer"},
                     {"id": "ar1", "role": "ar", "prefix": "/ar1", "org": "A"}],
           "links": [{"a": "c", "ai": 0, "b": "ar1", "bi": 0, "latency_ms": 1.0,
                      "bw_bps": 12500000}],
           "fibs": {"c": [{"prefix": "/", "iface": 0}]}}
    t = Topology.loads(json.dumps(doc))
    assert t.fibs["c"] == [(parse("/"), 0)]
    assert t.peer("c", 0)[:2] == ("ar1", 0)
