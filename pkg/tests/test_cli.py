import io
import json
import subprocess
import sys

import pytest

from grcomp import cli, compress
from grcomp.cli import parse_size, run
from grcomp.testkit.corpora import generate


def grcomp(*args, stdin: bytes = b""):
    proc = subprocess.run(
        [sys.executable, "-m", "grcomp", *args], input=stdin, capture_output=True, check=False
    )
    return proc.returncode, proc.stdout, proc.stderr


@pytest.mark.parametrize("text, value", [("1K", 1024), ("1M", 1 << 20), ("2g", 2 << 30), ("77", 77)])
def test_parse_size(text, value):
    assert parse_size(text) == value


def test_pipeline_roundtrip():
    code, corpus, _ = grcomp(
        "gen", "--seed", "7", "--base-size", "65536", "--copies", "64", "--mutation-rate", "0.05"
    )
    assert code == 0
    assert corpus == b"".join(generate(7, 65536, 64, 0.05))
    code, blob, _ = grcomp("compress", "-m", "lossy", "--ell", "1M", stdin=corpus)
    assert code == 0
    code, back, _ = grcomp("decompress", stdin=blob)
    assert code == 0 and back == corpus


def test_stats_record_goes_to_stderr(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(b"abracadabra" * 100)
    dst = tmp_path / "out.grc"
    assert run(["compress", "-m", "freq", "--k", "64", "-i", str(src), "-o", str(dst)]) == 0
    code, out, err = grcomp("compress", "-m", "plain", "--stats", "-i", str(src))
    record = json.loads(err)
    assert set(record) == {
        "bytes_in", "bytes_out", "cr_percent", "segments", "rules_created", "rules_live_peak", "seconds",
    }
    assert record["bytes_in"] == 1100
    assert record["cr_percent"] == pytest.approx(100 * len(out) / 1100, abs=1e-3)


def test_file_output_records_length(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(b"xyz" * 10)
    dst = tmp_path / "out.grc"
    assert run(["compress", "-m", "plain", "-i", str(src), "-o", str(dst)]) == 0
    assert dst.read_bytes() == compress(b"xyz" * 10)


def test_piped_output_has_no_length():
    _, blob, _ = grcomp("compress", "-m", "plain", stdin=b"xyz")
    assert blob[28:36] == bytes(8)


def test_stat_ab(tmp_path):
    path = tmp_path / "ab.grc"
    path.write_bytes(compress(b"ab"))
    code, out, _ = grcomp("stat", "-i", str(path))
    record = json.loads(out)
    assert code == 0
    assert record["segments"] == 1 and record["rules_created"] == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["compress", "-m", "freq", "--k", "0"],
        ["compress", "-m", "freq", "--eps", "100"],
        ["compress", "-m", "lossy", "--k", "5"],
        ["compress", "-m", "plain", "--ell", "1K"],
        ["compress", "-m", "block", "--ell", "0"],
        ["compress", "--alpha", "0"],
        ["compress", "-m", "nope"],
        ["frobnicate"],
        ["gen", "--mutation-rate", "1.5"],
    ],
)
def test_usage_errors(argv):
    # no stdin is attached: parameters must be rejected before any I/O
    assert run(argv + ["-i", "/nonexistent/input"] if argv[0] == "compress" else argv) == 1


def test_missing_input_is_io_error():
    assert run(["compress", "-i", "/nonexistent/input"]) == 2
    assert run(["decompress", "-i", "/nonexistent/input"]) == 2


def test_corrupt_stream_exit_code(tmp_path):
    path = tmp_path / "bad.grc"
    path.write_bytes(b"NOPE" + bytes(40))
    assert run(["decompress", "-i", str(path), "-o", str(tmp_path / "x")]) == 3
    path.write_bytes(compress(b"hello there, hello there")[:-2])
    assert run(["decompress", "-i", str(path), "-o", str(tmp_path / "x")]) == 3


def test_integrity_exit_code(tmp_path):
    blob = bytearray(compress(b"hello"))
    blob[28:36] = (6).to_bytes(8, "little")
    path = tmp_path / "len.grc"
    path.write_bytes(bytes(blob))
    assert run(["decompress", "-i", str(path), "-o", str(tmp_path / "x")]) == 4


def test_identical_inputs_identical_containers(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(b"".join(generate(3, 4096, 8, 0.02)))
    outs = []
    for i in range(2):
        dst = tmp_path / f"o{i}"
        assert run(["compress", "-m", "lossy", "--ell", "8K", "-i", str(src), "-o", str(dst)]) == 0
        outs.append(dst.read_bytes())
    assert outs[0] == outs[1]


def test_defaults():
    args = cli.build_parser().parse_args(["compress", "-m", "freq"])
    cfg = cli.config_from_args(args)
    assert (cfg.k, cfg.eps) == (1 << 16, 0.3)
    args = cli.build_parser().parse_args(["compress"])
    assert cli.config_from_args(args).ell == 1 << 20
