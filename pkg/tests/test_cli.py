import csv
import json

import numpy as np
import pytest

from lexi.bf16 import read_bf16
from lexi.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, sweep_rows
from lexi.codec import decode_layer, flits_from_bytes
from lexi.synth import generate_bf16


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "x.bf16"
    assert main(["gen", "--distinct", "32", "--count", "5000", "--seed", "4", "--entropy", "2.56",
                 "--report", str(tmp_path / "gen.json"), str(path)]) == EXIT_OK
    return path


def _report(tmp_path, argv):
    rep = tmp_path / "r.json"
    code = main(argv + ["--report", str(rep)])
    return code, (json.loads(rep.read_text()) if code == EXIT_OK else None)


def test_gen_is_deterministic(data, tmp_path):
    other = tmp_path / "y.bf16"
    main(["gen", "--distinct", "32", "--count", "5000", "--seed", "4", "--entropy", "2.56",
          "--report", str(tmp_path / "g2.json"), str(other)])
    assert other.read_bytes() == data.read_bytes()
    assert np.array_equal(read_bf16(data), generate_bf16("zipf", 32, 5000, seed=4, entropy=2.56))


def test_profile(data, tmp_path):
    code, rep = _report(tmp_path, ["profile", str(data)])
    assert code == EXIT_OK
    assert rep["total_values"] == 5000 and rep["distinct_exponents"] == 32
    assert sum(rep["exponent_histogram"]) == 5000


def test_compress_decompress(data, tmp_path):
    before = data.read_bytes()
    code, rep = _report(tmp_path, ["compress", str(data), str(tmp_path / "x.lexi")])
    assert code == EXIT_OK and rep["exponent_cr"] > 2.5
    code, rep = _report(tmp_path, ["decompress", str(tmp_path / "x.lexi"), str(tmp_path / "back.bf16")])
    assert code == EXIT_OK and rep["value_count"] == 5000
    assert (tmp_path / "back.bf16").read_bytes() == before == data.read_bytes()


def test_encode_stream(data, tmp_path):
    flits = tmp_path / "x.flits"
    code, rep = _report(tmp_path, ["encode-stream", "--lanes", "4", "--flits", str(flits), str(data)])
    assert code == EXIT_OK
    assert rep["cycles"]["total_pipeline_cycles"] == 78
    assert rep["config"]["lanes"] == 4
    out = decode_layer(flits_from_bytes(flits.read_bytes()))
    assert np.array_equal(out, read_bf16(data))


@pytest.mark.parametrize("codec", ["lexi", "bdi", "rle"])
def test_bench(data, tmp_path, codec):
    code, rep = _report(tmp_path, ["bench", "--codec", codec, str(data)])
    assert code == EXIT_OK
    assert set(rep) == {"codec", "exponentCR", "totalCR", "bytesIn", "bytesOut", "config"}
    assert rep["bytesIn"] == 10_000


def test_sweep(data, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--lanes", "1,10", "--depth", "4,8,16", "--out", str(out), str(data)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert [(int(r["lanes"]), int(r["depth"])) for r in rows] == [(1, 4), (1, 8), (1, 16), (10, 4), (10, 8), (10, 16)]
    for lanes in ("1", "10"):
        rates = [float(r["hitRate"]) for r in rows if r["lanes"] == lanes]
        assert rates == sorted(rates)


def test_sweep_rows_deterministic(data):
    ex = (read_bf16(data) >> 7) & 0xFF
    assert sweep_rows(ex, [2, 10], [8], 512) == sweep_rows(ex, [2, 10], [8], 512)


def test_simulate(data, tmp_path):
    trace = tmp_path / "t.csv"
    trace.write_text(f"L0,activation,5000,a,b,{data.name}\nL1,weight,1000000,a,b\n")
    code, rep = _report(tmp_path, ["simulate", "--trace", str(trace), "--cr", "3.14"])
    assert code == EXIT_OK
    assert rep["mode"] == "lexi" and rep["total_reduction_percent"] > 25
    assert rep["transfers"][0]["measured"] and not rep["transfers"][1]["measured"]


def test_exit_codes(tmp_path):
    assert main(["profile", str(tmp_path / "missing.bf16")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--lanes", "0", "x"])
    assert exc.value.code == EXIT_USAGE
    bad = tmp_path / "bad.lexi"
    bad.write_bytes(b"LEXC\x07" + bytes(8))
    assert main(["decompress", str(bad), str(tmp_path / "o.bf16")]) == EXIT_DATA
    odd = tmp_path / "odd.bf16"
    odd.write_bytes(b"\x01\x02\x03")
    assert main(["compress", str(odd), str(tmp_path / "o.lexi")]) == EXIT_DATA
    trace = tmp_path / "t.csv"
    trace.write_text("L0,activation,10,a,b\n")
    assert main(["simulate", "--trace", str(trace)]) == EXIT_DATA
