import json
import shlex
import subprocess
import sys
from importlib import resources

import pytest

from means_lab import cli

FIXED_KEYS = ["schema_version", "tool_version", "command", "verdict", "case_label", "beta", "witness",
              "samples_used", "seed", "elapsed_ms"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), err


# -- eval ---------------------------------------------------------------------


@pytest.mark.parametrize("argv, expected", [
    (["--mean", "gini", "--q", "2", "--r", "1", "--points", "1,2,3"], 14 / 6),
    (["--mean", "holder", "--p", "0", "--points", "1,4"], 2.0),
    (["--mean", "deviation", "--generator", "power:3", "--weight", "const:1", "--points", "1,2"], 4.5 ** (1 / 3)),
    (["--mean", "arithmetic", "--points", "-1,3"], 1.0),
    (["--mean", "qa", "--generator", "exp", "--points", "0,0"], 0.0),
])
def test_eval_examples(capsys, argv, expected):
    code, rep, _ = run(capsys, "eval", *argv)
    assert code == 0
    assert rep["value"] == pytest.approx(expected, rel=1e-12, abs=1e-15)
    assert list(rep)[:10] == FIXED_KEYS


def test_eval_negative_gini_exponent(capsys):
    code, rep, _ = run(capsys, "eval", "--mean", "gini", "--q", "-1", "--r", "-2", "--points", "1,2")
    # G_{-1,-2}(1,2) = (1 + 1/2) / (1 + 1/4)
    assert code == 0 and rep["value"] == pytest.approx(1.5 / 1.25, rel=1e-14)


def test_eval_domain_error_exit_3(capsys):
    code, rep, err = run(capsys, "eval", "--mean", "holder", "--p", "2", "--points", "1,-2")
    assert code == 3 and rep is None and "domain error" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "eval", "--mean", "holder", "--points", "1,2")[0] == 2
    assert run(capsys, "eval", "--mean", "qa", "--generator", "sin", "--points", "1,2")[0] == 2
    assert run(capsys, "decide", "gini", "--q", "2")[0] == 2
    assert run(capsys, "crossval", "gini", "--q-grid", "1:x:1", "--interval", "1:2")[0] == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2


# -- decide -------------------------------------------------------------------


def test_decide_examples(capsys):
    code, rep, _ = run(capsys, "decide", "gini", "--q", "2", "--r", "3", "--interval", "1:2.9")
    assert code == 0
    assert (rep["verdict"], rep["case_label"], rep["beta"]) == ("Convex", "case-(4)", 3.0)
    assert "decision_margin" in rep["diagnostics"]
    assert run(capsys, "decide", "holder", "--p", "0.5")[1]["verdict"] == "NotConvex"
    assert run(capsys, "decide", "qa", "--generator", "exp", "--interval", "0:5")[1]["verdict"] == "Convex"


def test_decide_gini_arity_rules(capsys):
    assert run(capsys, "decide", "gini", "--q", "0.5", "--r", "0.6", "--nvars", "2")[1]["verdict"] == "Convex"
    assert run(capsys, "decide", "gini", "--q", "0.5", "--r", "0.6")[1]["verdict"] == "NotConvex"


def test_decide_bajraktarevic_and_scale_split(capsys):
    _, rep, _ = run(capsys, "decide", "bajraktarevic", "--generator", "power:-1", "--weight", "power:3",
                    "--interval", "1:4", "--budget", "20000")
    assert rep["verdict"] == "NotConvex" and rep["witness"] is not None
    _, rep, _ = run(capsys, "decide", "scale-split", "--generator", "identity", "--alpha", "2", "--beta", "1",
                    "--interval", "0:10")
    assert rep["verdict"] == "NotConvex"


# -- falsify ------------------------------------------------------------------


def test_falsify_examples(capsys):
    code, rep, _ = run(capsys, "falsify", "--mean", "gini", "--q", "2", "--r", "3", "--interval", "1:4",
                       "--nvars", "2", "--budget", "100000", "--seed", "7")
    assert code == 0 and rep["verdict"] == "NotConvex" and rep["seed"] == 7
    assert set(rep["witness"]) == {"x", "y", "margin"} and rep["witness"]["margin"] > 0
    _, rep, _ = run(capsys, "falsify", "--mean", "holder", "--p", "2", "--interval", "0.1:10",
                    "--budget", "100000", "--seed", "7")
    assert rep["verdict"] == "Inconclusive" and rep["witness"] is None and rep["samples_used"] >= 100000


def test_falsify_scale_split(capsys):
    _, rep, _ = run(capsys, "falsify", "--mean", "scale-split", "--generator", "identity", "--alpha", "2",
                    "--beta", "1", "--interval", "0:10", "--budget", "200000", "--seed", "7")
    assert rep["verdict"] == "NotConvex"


def test_seed_precedence_and_echo(capsys, monkeypatch):
    argv = ["falsify", "--mean", "holder", "--p", "0.5", "--interval", "0.5:5", "--budget", "2000"]
    monkeypatch.setenv("MEANS_LAB_SEED", "41")
    _, env_rep, _ = run(capsys, *argv)
    assert env_rep["seed"] == 41 and env_rep["command"].endswith("--seed 41")
    _, flag_rep, _ = run(capsys, *argv, "--seed", "5")
    assert flag_rep["seed"] == 5
    monkeypatch.delenv("MEANS_LAB_SEED")
    assert run(capsys, *argv)[1]["seed"] == 0
    monkeypatch.setenv("MEANS_LAB_SEED", "abc")
    assert run(capsys, *argv)[0] == 2


def test_echoed_command_reproduces_verdict(capsys, monkeypatch):
    monkeypatch.setenv("MEANS_LAB_SEED", "9")
    _, first, _ = run(capsys, "falsify", "--mean", "gini", "--q", "2", "--r", "3", "--interval", "1:4",
                      "--budget", "10000")
    monkeypatch.delenv("MEANS_LAB_SEED")
    again = shlex.split(first["command"])[1:]
    _, second, _ = run(capsys, *again)
    assert second["verdict"] == first["verdict"] and second["witness"] == first["witness"]


# -- crossval -----------------------------------------------------------------


def test_crossval_small_grid_and_out_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, rep, _ = run(capsys, "crossval", "gini", "--q-grid", "2,3", "--r-grid", "0:1:1", "--interval", "1:2",
                       "--budget", "4000", "--out", str(out))
    assert code == 0 and rep is None
    rep = json.loads(out.read_text())
    assert rep["verdict"] == "agree" and rep["summary"]["cells"] == 4
    coords = [(c["q"], c["r"]) for c in rep["cells"]]
    assert coords == sorted(coords)
    assert rep["elapsed_ms"] is None


def test_crossval_disagreement_exit_1(capsys):
    # a budget of one chunk cannot find the thin n=3 witness of this all-arity decision
    code, rep, _ = run(capsys, "crossval", "gini", "--q-grid", "2", "--r-grid", "2", "--interval", "1:5",
                       "--budget", "1000", "--dead-zone", "0")
    assert code == 1 and rep["verdict"] == "disagree" and rep["summary"]["disagreements"] == [[2.0, 2.0, 1.0, 5.0]]


def test_crossval_empty_grid(capsys):
    code, rep, _ = run(capsys, "crossval", "holder", "--p-grid", "3:1:0.5", "--interval", "0.5:5")
    assert code == 0 and rep["cells"] == [] and rep["summary"]["cells"] == 0


def test_crossval_holder(capsys):
    code, rep, _ = run(capsys, "crossval", "holder", "--p-grid", "-1,0.5,1,2", "--interval", "0.5:5",
                       "--budget", "5000", "--nvars", "2")
    assert code == 0 and [c["decision"] for c in rep["cells"]] == ["NotConvex", "NotConvex", "Convex", "Convex"]


def test_crossval_byte_identical(tmp_path):
    argv = ["crossval", "gini", "--q-grid", "-1,2", "--r-grid", "0.5,3", "--interval", "1:2",
            "--interval", "0.5:4", "--budget", "3000", "--seed", "3"]
    out = tmp_path / "r.json"
    cli.main(argv + ["--out", str(out)])
    first = out.read_bytes()
    cli.main(argv + ["--out", str(out)])
    assert out.read_bytes() == first


def test_timing_flag_sets_elapsed(capsys):
    _, rep, _ = run(capsys, "crossval", "holder", "--p-grid", "1", "--interval", "0.5:5", "--budget", "1000",
                    "--timing")
    assert rep["elapsed_ms"] > 0


# -- grid parsing, schema, entry point ----------------------------------------


def test_parse_grid():
    g = cli.parse_grid("-2:3:0.5")
    assert len(g) == 11 and g[0] == -2.0 and g[-1] == 3.0
    assert cli.parse_grid("0:0.3:0.1") == [0.0, 0.1, 0.2, 0.3]
    assert cli.parse_grid("3, 1, 1, -0") == [0.0, 1.0, 3.0]
    assert cli.parse_grid("") == [] and cli.parse_grid("2:1:0.5") == []
    for bad in ("1:2", "1:2:0", "a"):
        with pytest.raises(cli.UsageError):
            cli.parse_grid(bad)


def test_report_keys_match_schema(capsys):
    schema = json.loads(resources.files("means_lab").joinpath("report_schema.json").read_text())
    _, rep, _ = run(capsys, "decide", "holder", "--p", "2")
    assert set(schema["required"]) <= set(rep)
    assert rep["schema_version"] == schema["properties"]["schema_version"]["const"]


def test_float_serialisation_round_trips(capsys):
    _, rep, _ = run(capsys, "eval", "--mean", "holder", "--p", "3", "--points", "0.1,0.7,2.3")
    from means_lab.means_core import holder_mean

    assert rep["value"] == holder_mean(3, [0.1, 0.7, 2.3]).value


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "means_lab", "eval", "--mean", "holder", "--p", "1",
                           "--points", "1,3"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["value"] == 2.0
