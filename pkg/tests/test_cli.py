import csv
import io
import json
import statistics

import pytest

from andana import cli, topology
from andana.directory import Directory
from andana.simnet import ANDANA_A, ANDANA_S, MODES, PLAIN, FetchTimeout
from andana.topology import Topology

MB = 1024 * 1024


@pytest.fixture(scope="module")
def line():
    return topology.line4()


@pytest.fixture(scope="module")
def megabyte(line):
    return {mode: cli.cmd_fetch(line, mode=mode, size=MB, seed=0) for mode in MODES}


def test_plain_megabyte_segments(megabyte):
    result = megabyte[PLAIN]
    assert result.metrics.segments == 256 and result.metrics.complete
    assert result.producer_interests == 256
    assert len(result.metrics.rtts_ms) == 256


def test_anonymized_modes_cost_more(megabyte):
    plain = megabyte[PLAIN].metrics.total_ms
    a, s = megabyte[ANDANA_A].metrics.total_ms, megabyte[ANDANA_S].metrics.total_ms
    assert plain < s <= a
    assert 1.2 <= a / plain <= 3.0


def test_record_is_json(megabyte):
    rec = json.loads(json.dumps(megabyte[ANDANA_S].record()))
    assert rec["mode"] == ANDANA_S and rec["name"] == "/prod/file" and rec["setup_ms"] > 0


def _halves(series):
    mid = len(series) // 2
    return statistics.fmean(series[:mid]), statistics.fmean(series[mid:])


@pytest.mark.parametrize("mode", MODES)
def test_rtt_series_flat(megabyte, mode):
    first, second = _halves(megabyte[mode].metrics.rtts_ms)
    assert abs(first - second) <= 0.1 * min(first, second)


@pytest.mark.parametrize("mode", [ANDANA_A, ANDANA_S])
def test_rtt_series_offset_upward(megabyte, mode):
    plain = statistics.fmean(megabyte[PLAIN].metrics.rtts_ms)
    assert statistics.fmean(megabyte[mode].metrics.rtts_ms) > plain
    assert min(megabyte[mode].metrics.rtts_ms) > plain


@pytest.mark.xfail(strict=True, reason="plain RTTs carry almost no jitter in a deterministic "
                   "simulator, while uniform circuits mix both AR orders; see README")
@pytest.mark.parametrize("mode", [ANDANA_A, ANDANA_S])
def test_rtt_variance_ratio_below_ten(megabyte, mode):
    ratio = (statistics.pvariance(megabyte[mode].metrics.rtts_ms)
             / statistics.pvariance(megabyte[PLAIN].metrics.rtts_ms))
    assert ratio < 10


def test_fetch_rejects_unknown_mode(line):
    with pytest.raises(ValueError):
        cli.cmd_fetch(line, mode="tor", size=4096)


def test_fetch_without_producer():
    t = Topology()
    t.add_node("c", "consumer")
    t.add_node("r", "router")
    t.add_link("c", "r")
    with pytest.raises(topology.ConfigError):
        cli.cmd_fetch(t.compute_fibs(), size=4096)


def test_unserved_name(line):
    with pytest.raises(topology.ConfigError):
        cli.cmd_fetch(line, name="/nowhere/file", size=4096)


def test_fetch_timeout_without_route():
    t = topology.line4()
    t.fibs["c"] = [(prefix, face) for prefix, face in t.fibs["c"] if prefix.to_uri() != "/prod"]
    with pytest.raises(FetchTimeout):
        cli.cmd_fetch(t, size=4096)


# -- bench -----------------------------------------------------------------------

SIZES = (16 * 1024, 32 * 1024, 64 * 1024)


@pytest.fixture(scope="module")
def grid():
    return cli.cmd_bench(SIZES, repeats=1, seed=5)


def test_grid_complete(grid):
    assert len(grid) == 9
    assert {(r["mode"], r["size"]) for r in grid} == {(m, s) for m in MODES for s in SIZES}


def test_plain_ratio_is_one(grid):
    assert all(r["overhead_ratio"] == 1.0 for r in grid if r["mode"] == PLAIN)


def test_total_monotone_in_size(grid):
    for mode in MODES:
        totals = [r["total_ms"] for r in sorted(grid, key=lambda r: r["size"]) if r["mode"] == mode]
        assert totals == sorted(totals) and len(set(totals)) == len(totals)


def test_csv_columns(grid):
    rows = list(csv.DictReader(io.StringIO(cli.rows_to_csv(grid))))
    assert tuple(rows[0]) == cli.CSV_COLUMNS
    assert len(rows) == 9 and rows[0]["overhead_ratio"] == "1.0000"


def test_repeats_use_distinct_seeds():
    rows = cli.cmd_bench([16 * 1024], repeats=2, seed=0)
    assert [r["run"] for r in rows] == [0, 0, 0, 1, 1, 1]


# -- main ------------------------------------------------------------------------

def _scenario(tmp_path, config, taps):
    from shapes import star
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({
        "topology": star(2, 2, 1).to_dict(),
        "adversary": {"taps": taps},
        "configuration": config,
    }))
    return str(path)


def test_analyze_exit_codes(tmp_path, capsys):
    shared = {"c0": {"r1": "a0", "r2": "a1", "p": "p0", "t": "/p0/obj"},
              "c1": {"r1": "a0", "r2": "a1", "p": "p0", "t": "/p0/x"}}
    assert cli.main(["analyze", "--scenario", _scenario(tmp_path, shared, [["c0", 0]])]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out[0]["witness"] == "c1" and out[0]["condition"] == 2

    alone = {"c0": {"r1": "a0", "r2": "a1", "p": "p0", "t": "/p0/obj"}}
    assert cli.main(["analyze", "--scenario", _scenario(tmp_path, alone, [["c0", 0]])]) == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["analyze", "--scenario", str(bad)]) == 1
    assert cli.main(["analyze", "--scenario", str(tmp_path / "missing.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_fetch_command(tmp_path, capsys):
    trace = tmp_path / "run.trace"
    assert cli.main(["fetch", "--mode", "andana-s", "--size", "8192", "--trace", str(trace)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["segments"] == 2 and rec["complete"]
    assert trace.read_text().startswith("0|")


def test_bench_command_writes_csv(tmp_path):
    out = tmp_path / "bench.csv"
    assert cli.main(["bench", "--size", "8192", "--csv", str(out), "--trace-dir",
                     str(tmp_path / "traces")]) == 0
    assert out.read_text().splitlines()[0] == ",".join(cli.CSV_COLUMNS)
    assert len(list((tmp_path / "traces").iterdir())) == 3


def test_topology_command(tmp_path):
    out = tmp_path / "star.json"
    assert cli.main(["topology", "star", "--consumers", "4", "--latency-ms", "3", "-o",
                     str(out)]) == 0
    t = Topology.load(out)
    assert len(t.by_role("consumer")) == 4 and {l.latency_ms for l in t.links} == {3.0}


def test_topology_file_drives_fetch(tmp_path, capsys):
    path = tmp_path / "line.json"
    cli.main(["topology", "line4", "--latency-ms", "1", "-o", str(path)])
    assert cli.main(["fetch", "--topology", str(path), "--size", "4096"]) == 0
    assert json.loads(capsys.readouterr().out)["total_ms"] < 10


def test_directory_commands(tmp_path, capsys):
    snap = tmp_path / "dir.json"
    assert cli.main(["directory", "dump", "-o", str(snap)]) == 0
    assert len(Directory.load(snap).list_ars()) == 2
    capsys.readouterr()
    assert cli.main(["directory", "load", str(snap)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [l.split("\t")[0] for l in lines] == ["/ar1", "/ar2"]


def test_bad_topology_file(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"nodes": [{"id": "x", "role": "wizard"}], "links": []}))
    assert cli.main(["fetch", "--topology", str(path)]) == 1
