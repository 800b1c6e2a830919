#!/usr/bin/env python3
"""
End-to-end tests for the command-line entry point
"""

import json
import os
import sys

import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, EXIT_UNDERPOWERED, main

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def fixture(name):
    return os.path.join(FIXTURES, name)


class TestRanksCommand:
    def test_permutation_diagonal(self, capsys):
        assert main(["ranks", "3", "1", "2"]) == EXIT_PASS
        out = capsys.readouterr().out
        assert "diagonal: 1 1 2" in out
        assert "permutation: 3 1 2" in out

    def test_identity(self, capsys):
        main(["ranks", "1", "2", "3"])
        assert "diagonal: 1 2 3" in capsys.readouterr().out

    def test_rank_tuple_mode(self, capsys):
        assert main(["ranks", "--mode", "ranks", "1", "1", "2"]) == EXIT_PASS
        assert "permutation: 3 1 2" in capsys.readouterr().out

    def test_invalid_permutation(self, capsys):
        assert main(["ranks", "1", "1", "2"]) == EXIT_CONFIG
        assert capsys.readouterr().out == ""


class TestExact2Command:
    def test_identity_line(self, capsys):
        assert main(["exact2", "--theta", "1/2", "--c", "1/2"]) == EXIT_PASS
        out = capsys.readouterr().out
        assert "1/16 + 1/16 = 1/8 ✓" in out
        assert "l2 = 1/2" in out

    def test_conditionals(self, capsys):
        main(["exact2", "--theta", "1/3", "--c", "1/4", "--format", "json"])
        payload = json.loads(capsys.readouterr().out)
        assert payload["conditionals"]["given_i1"] == "1/3"
        assert payload["conditionals"]["given_i3"] == "1/3"
        assert payload["identity_holds"] is True

    def test_c_must_be_below_one(self):
        assert main(["exact2", "--theta", "1/2", "--c", "1"]) == EXIT_CONFIG


class TestCanonicalizeCommand:
    def test_distance_to_half(self, capsys):
        code = main(["canonicalize", "--breakpoints", "0", "1/2", "1", "--values", "1/2", "0", "1/2"])
        assert code == EXIT_PASS
        assert json.loads(capsys.readouterr().out) == {"breakpoints": [0, "1/2", 1], "values": [1, 0, 1]}

    def test_constant_piece(self):
        code = main(["canonicalize", "--breakpoints", "0", "1/2", "1", "--values", "0", "1", "1"])
        assert code == EXIT_CONFIG


class TestSimulateCommand:
    def test_travellers_dump(self, capsys):
        assert main(["simulate", "--config", fixture("travellers_simulate.json")]) == EXIT_PASS
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 10
        for line in lines:
            record = json.loads(line)
            assert all(r in (1, k) for k, r in enumerate(record["ranks"], start=1))

    def test_byte_identical_reruns(self, tmp_path):
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (first, second):
            main(["simulate", "--config", fixture("travellers_simulate.json"), "--out", str(out)])
        assert first.read_bytes() == second.read_bytes()

    def test_explicit_json_format(self, capsys):
        main(["simulate", "--config", fixture("travellers_simulate.json"), "--format", "json"])
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1
        assert len(json.loads(lines[0])) == 10

    def test_environment_does_not_change_output(self, tmp_path, monkeypatch):
        plain = tmp_path / "plain.jsonl"
        main(["simulate", "--config", fixture("travellers_simulate.json"), "--out", str(plain)])
        for name, value in (("REARRANGE_CHUNK", "4"), ("REARRANGE_TRIALS", "3"),
                            ("REARRANGE_WORKERS", "4"), ("REARRANGE_ALPHA", "0.5")):
            monkeypatch.setenv(name, value)
        noisy = tmp_path / "noisy.jsonl"
        main(["simulate", "--config", fixture("travellers_simulate.json"), "--out", str(noisy)])
        assert plain.read_bytes() == noisy.read_bytes()
        assert len(noisy.read_text().splitlines()) == 10

    def test_worker_count_does_not_change_output(self, tmp_path):
        outputs = []
        # three chunks
        for workers in ("1", "4"):
            out = tmp_path / f"w{workers}.jsonl"
            main(["simulate", "--config", fixture("travellers_simulate.json"), "--trials", "20000",
                  "--workers", workers, "--out", str(out)])
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_zero_n(self):
        assert main(["simulate", "--config", fixture("zero_n.json")]) == EXIT_CONFIG


class TestSriCommand:
    def test_travellers_pass(self, capsys):
        assert main(["sri", "--config", fixture("travellers_sri.json")]) == EXIT_PASS
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True
        assert report["correction"] == "bonferroni"

    def test_trivial_fails(self):
        assert main(["sri", "--config", fixture("trivial_sri.json")]) == EXIT_FAIL

    def test_missing_seed(self):
        assert main(["sri", "--config", fixture("missing_seed.json")]) == EXIT_CONFIG

    def test_seed_flag_fills_missing_seed(self):
        code = main(["sri", "--config", fixture("missing_seed.json"), "--seed", "5", "--trials", "20000"])
        assert code == EXIT_PASS

    def test_underpowered(self):
        code = main(["sri", "--config", fixture("travellers_sri.json"), "--trials", "50"])
        assert code == EXIT_UNDERPOWERED

    def test_example4_single_rank(self, capsys):
        assert main(["sri", "--config", fixture("example4_k4.json")]) == EXIT_PASS
        result = json.loads(capsys.readouterr().out)
        assert result["k"] == 4

    def test_w_shape_fails(self):
        assert main(["sri", "--config", fixture("binary_w_shape.json")]) == EXIT_FAIL

    def test_sublevel_partition_config(self):
        assert main(["sri", "--config", fixture("example3_sublevel.json")]) == EXIT_PASS

    def test_csv_tables(self, capsys):
        main(["sri", "--config", fixture("trivial_sri.json"), "--format", "csv"])
        out = capsys.readouterr().out
        assert out.startswith("# k=2")
        assert "cell,rank_1,rank_2" in out
