import json
import subprocess
import sys

import numpy as np
import pytest

from polarmix import channel as ch
from polarmix import construct as cs
from polarmix import converse as cv
from polarmix.cli import run
from polarmix.kernel import SearchPolicy, kernel_search
from polarmix.sim import SimConfig, simulate


@pytest.fixture
def files(tmp_path):
    bsc = tmp_path / "bsc.json"
    bsc.write_text(json.dumps({"symbols": [[0.89, 0.11], [0.11, 0.89]]}))
    return tmp_path, bsc


def out_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_channel_info(files, capsys):
    _, bsc = files
    assert run(["channel-info", "--channel", str(bsc)]) == 0
    doc = out_json(capsys)
    assert doc["entropy"] == pytest.approx(0.499916, abs=1e-6)
    assert doc["entropy"] == ch.entropy(ch.bsc(0.11))
    assert doc["mixture"] == [[1.0, 0.11]]


def test_construct_encode_decode_round_trip(files, capsys):
    d, bsc = files
    plan_path = d / "plan.json"
    assert run(["construct", "--channel", str(bsc), "--ell", "2", "--t", "4", "--Q", "32",
                "--dimension", "6", "--seed", "1", "--out", str(plan_path)]) == 0
    plan = cs.loads(plan_path.read_text())
    lib = cs.build_plan(ch.bsc(0.11), 2, 4, Q=32, seed=1,
                        selector=cs.SelectorParams(dimension=6))
    assert cs.dumps(plan) == cs.dumps(lib)

    msgs = np.random.default_rng(0).integers(0, 2, (5, 6))
    (d / "msg.txt").write_text("\n".join(" ".join(map(str, m)) for m in msgs) + "\n")
    assert run(["encode", "--plan", str(plan_path), "--in", str(d / "msg.txt"),
                "--out", str(d / "cw.txt")]) == 0
    assert run(["decode", "--plan", str(plan_path), "--in", str(d / "cw.txt"), "--bits",
                "--out", str(d / "dec.txt")]) == 0
    dec = np.loadtxt(d / "dec.txt", dtype=int, ndmin=2)
    assert np.array_equal(dec, msgs)

    # soft input: clamped LLRs of the codeword bits
    cw = np.loadtxt(d / "cw.txt", dtype=int, ndmin=2)
    (d / "llr.txt").write_text("\n".join(" ".join(str(40.0 * (1 - 2 * b)) for b in w)
                                         for w in cw))
    assert run(["decode", "--plan", str(plan_path), "--in", str(d / "llr.txt")]) == 0
    soft = np.array([list(map(int, ln.split())) for ln in capsys.readouterr().out.split("\n")
                     if ln.strip()])
    assert np.array_equal(soft, msgs)


def test_simulate_matches_library_and_repeats(files, capsys):
    d, bsc = files
    plan_path = d / "plan.json"
    run(["construct", "--channel", str(bsc), "--ell", "2", "--t", "5", "--Q", "32",
         "--dimension", "10", "--seed", "2", "--out", str(plan_path)])
    args = ["simulate", "--plan", str(plan_path), "--channel", str(bsc), "--trials", "200",
            "--seed", "7", "--csv", str(d / "runs.csv")]
    assert run(args) == 0
    first = out_json(capsys)
    assert run(args) == 0
    second = out_json(capsys)
    assert first["fer"] == second["fer"]
    first.pop("wall_time"), second.pop("wall_time")
    assert first == second
    lib = simulate(SimConfig(cs.loads(plan_path.read_text()), ch.bsc(0.11), 200, seed=7))
    assert first == lib.to_dict(wall_time=False)
    assert len((d / "runs.csv").read_text().splitlines()) == 3


def test_kernel_search_matches_library(files, capsys):
    _, bsc = files
    assert run(["kernel-search", "--channel", str(bsc), "--ell", "2", "--seed", "0"]) == 0
    doc = out_json(capsys)
    K, rep = kernel_search(ch.bsc(0.11), 0.0, 2, SearchPolicy(seed=0))
    assert doc["kernel"] == K.to_strings()
    assert doc["entropies"] == list(rep.entropies)
    assert doc["branch"] == rep.branch


def test_converse_scan_matches_library(files, capsys):
    d, bsc = files
    assert run(["converse-scan", "--channel", str(bsc), "--ell", "6", "--samples", "4",
                "--seed", "3", "--meta", str(d / "meta.json")]) == 0
    lib = cv.sharp_transition_scan(ch.bsc(0.11), 6, range(1, 7), 4, 3)
    assert capsys.readouterr().out == lib.to_csv()
    assert json.loads((d / "meta.json").read_text()) == json.loads(lib.to_json())


def test_trace(files, capsys):
    d, bsc = files
    run(["construct", "--channel", str(bsc), "--ell", "2", "--t", "3", "--Q", "16",
         "--seed", "0", "--out", str(d / "p.json")])
    assert run(["trace", "--plan", str(d / "p.json"), "--alpha", "0.2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "level,value"
    vals = [float(ln.split(",")[1]) for ln in lines[1:]]
    lib = cs.potential_trace(cs.loads((d / "p.json").read_text()), 0.2)
    assert vals == list(lib)


def test_missing_seed_is_derived_and_printed(files, capsys):
    _, bsc = files
    assert run(["kernel-search", "--channel", str(bsc), "--ell", "2"]) == 0
    err = capsys.readouterr().err
    assert isinstance(json.loads(err)["seed"], int)


def test_config_overlay(files, capsys):
    d, bsc = files
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps({"ell": 2, "t": 3, "Q": 16, "seed": 4}))
    assert run(["construct", "--channel", str(bsc), "--config", str(cfg)]) == 0
    plan = cs.loads(capsys.readouterr().out)
    assert (plan.ell, plan.t, plan.Q, plan.seed) == (2, 3, 16, 4)
    # explicit flags win over the file
    assert run(["construct", "--channel", str(bsc), "--config", str(cfg), "--t", "2"]) == 0
    assert cs.loads(capsys.readouterr().out).t == 2
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(["construct", "--channel", str(bsc), "--config", str(cfg)]) == 2


def test_exit_codes(files, capsys):
    d, bsc = files
    assert run(["channel-info", "--channel", str(d / "missing.json")]) == 3
    (d / "bad.json").write_text("{oops")
    assert run(["channel-info", "--channel", str(d / "bad.json")]) == 4
    (d / "asym.json").write_text(json.dumps({"symbols": [[0.5, 0.9], [0.5, 0.1]]}))
    assert run(["channel-info", "--channel", str(d / "asym.json")]) == 2
    assert run(["channel-info", "--bogus"]) == 2
    assert run(["construct", "--channel", str(bsc)]) == 2
    (d / "plan.json").write_text(json.dumps({"ell": 2}))
    assert run(["trace", "--plan", str(d / "plan.json")]) == 4
    rich = ch.degrade_bin(ch.BmsChannel.from_mixture(
        [[0.2, 0.01], [0.2, 0.05], [0.2, 0.1], [0.2, 0.2], [0.2, 0.3]]), 64)
    (d / "rich.json").write_text(ch.dumps(rich))
    capsys.readouterr()
    assert run(["kernel-search", "--channel", str(d / "rich.json"), "--ell", "8",
                "--seed", "1"]) == 5
    doc = json.loads(capsys.readouterr().err)
    assert {"error", "message", "exit"} <= set(doc) and doc["exit"] == 5


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "construct" in capsys.readouterr().out


def test_module_entry_point(files):
    _, bsc = files
    res = subprocess.run([sys.executable, "-m", "polarmix", "channel-info", "--channel",
                          str(bsc)], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["outputs"] == 2
