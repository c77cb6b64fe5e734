import json
import subprocess
import sys

import pytest
from conftest import MARKOV_CHAIN, DFA, corpus_files

from sigrefine import cli
from sigrefine.cli import EXIT_INPUT, EXIT_MISMATCH, EXIT_OK, EXIT_OVERFLOW, EXIT_PROTOCOL, main, read_stats
from sigrefine.refine import Partition, RefineResult
from sigrefine.transport import free_ports, write_roster


@pytest.fixture
def dfa_file(tmp_path):
    path = tmp_path / "dfa.coalg"
    path.write_text(DFA, encoding="utf-8")
    return path


def test_minimize_dfa_with_stats(tmp_path, dfa_file):
    out, stats = tmp_path / "out.part", tmp_path / "run.stats"
    assert main(["minimize", str(dfa_file), "-o", str(out), "--stats", str(stats)]) == EXIT_OK
    assert out.read_text() == "q: 0\np: 0\nr: 1\n"
    s = read_stats(stats)
    assert (s["blocks"], s["iterations"], s["n"], s["n_prime"], s["m"]) == ("2", "2", "3", "3", "6")
    assert int(s["wall_ms"]) >= 0
    assert len(s["peak_rss_bytes_per_worker"].split(",")) == 1


def test_minimize_markov_on_three_workers(tmp_path):
    path = tmp_path / "mc.coalg"
    path.write_text(MARKOV_CHAIN, encoding="utf-8")
    stats = tmp_path / "run.stats"
    out = tmp_path / "out.part"
    code = main(["minimize", str(path), "--engine", "dist-inproc", "-W", "3", "-o", str(out), "--stats", str(stats)])
    assert code == EXIT_OK
    assert read_stats(stats)["blocks"] == "1"
    assert len(read_stats(stats)["peak_rss_bytes_per_worker"].split(",")) == 3


def test_partition_goes_to_stdout(capsys, dfa_file):
    assert main(["minimize", str(dfa_file), "--engine", "seq-hashed"]) == EXIT_OK
    assert capsys.readouterr().out == "q: 0\np: 0\nr: 1\n"


def test_missing_file(tmp_path, capsys):
    assert main(["minimize", str(tmp_path / "nope.coalg")]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_parse_error_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.coalg"
    path.write_text("PX\ns: {t}\n", encoding="utf-8")
    assert main(["minimize", str(path)]) == EXIT_INPUT
    assert "line 2" in capsys.readouterr().err


def test_overflow_exit_code(tmp_path):
    path = tmp_path / "big.coalg"
    path.write_text(f"(Z,+)^X\ns: {{s: {2**63 - 1}, t: 1}}\nt: {{}}\n", encoding="utf-8")
    assert main(["minimize", str(path)]) == EXIT_OVERFLOW


def test_roster_size_must_match_workers(tmp_path, dfa_file):
    roster = tmp_path / "roster.txt"
    write_roster(roster, [("127.0.0.1", p) for p in free_ports(2)])
    assert main(["minimize", str(dfa_file), "--engine", "dist-tcp", "-W", "3", "--roster", str(roster)]) == EXIT_PROTOCOL


def test_dist_tcp_with_roster(tmp_path, dfa_file):
    roster = tmp_path / "roster.txt"
    write_roster(roster, [("127.0.0.1", p) for p in free_ports(2)])
    out = tmp_path / "out.part"
    assert main(["minimize", str(dfa_file), "--engine", "dist-tcp", "--roster", str(roster), "-o", str(out)]) == EXIT_OK
    assert out.read_text() == "q: 0\np: 0\nr: 1\n"


def test_generate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.coalg", tmp_path / "b.coalg"
    for path in (a, b):
        assert main(["generate-wta", "--states", "20", "--rank", "1", "--seed", "7", "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("N x (N,max)^(4 x X^1)\n")


def test_split_counts(tmp_path):
    path = tmp_path / "ten.coalg"
    path.write_text("PX\n" + "".join(f"s{i}: {{s{(i + 1) % 10}}}\n" for i in range(10)), encoding="utf-8")
    assert main(["split", str(path), "-W", "4", "--out", str(tmp_path / "slices")]) == EXIT_OK
    manifest = json.loads((tmp_path / "slices" / "manifest.json").read_text())
    assert [e["states"] for e in manifest["slices"]] == [3, 3, 2, 2]
    assert all((tmp_path / "slices" / e["file"]).exists() for e in manifest["slices"])


def test_worker_with_wrong_roster_size(tmp_path, dfa_file, capsys):
    assert main(["split", str(dfa_file), "-W", "2", "--out", str(tmp_path / "slices")]) == EXIT_OK
    roster = tmp_path / "roster.txt"
    write_roster(roster, [("127.0.0.1", p) for p in free_ports(3)])
    code = main(["worker", "--manifest", str(tmp_path / "slices" / "manifest.json"), "--id", "0", "--roster", str(roster)])
    assert code == EXIT_PROTOCOL
    assert "checksum mismatch" in capsys.readouterr().err


def test_oracle_check(tmp_path, dfa_file, capsys):
    assert main(["oracle-check", str(dfa_file)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "exact: agree" in out and "hashed: agree" in out


def test_oracle_check_refuses_large_inputs(tmp_path):
    path = tmp_path / "big.coalg"
    path.write_text("PX\n" + "".join(f"s{i}: {{}}\n" for i in range(7)), encoding="utf-8")
    assert main(["oracle-check", str(path)]) == EXIT_INPUT


def test_module_entry_point(dfa_file):
    proc = subprocess.run([sys.executable, "-m", "sigrefine", "minimize", str(dfa_file)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == "q: 0\np: 0\nr: 1\n"


def _minimize(path, out, *extra):
    assert main(["minimize", str(path), "-o", str(out), *extra]) == EXIT_OK
    return out.read_bytes()


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_engines_write_identical_files(tmp_path, path):
    reference = _minimize(path, tmp_path / "ref.part")
    assert _minimize(path, tmp_path / "h.part", "--engine", "seq-hashed") == reference
    for w in (1, 2, 4, 8):
        assert _minimize(path, tmp_path / f"d{w}.part", "--engine", "dist-inproc", "-W", str(w), "--seed", str(w)) == reference
    assert _minimize(path, tmp_path / "tcp.part", "--engine", "dist-tcp", "-W", "4") == reference


def test_oracle_check_reports_mismatch(monkeypatch, dfa_file, capsys):
    monkeypatch.setattr(cli, "refine_sequential", lambda enc, mode: RefineResult(Partition((0, 0, 0), 1), 1, [1]))
    assert main(["oracle-check", str(dfa_file)]) == EXIT_MISMATCH
    assert "MISMATCH" in capsys.readouterr().out
