import csv
import io
import json

import numpy as np
import pytest

from gsf.cli import main
from gsf.embedding import pairing_limit, parse_dist
from gsf.report import Report, dumps, emit
from gsf.ring import true

VERDICTS = {"true", "false", "indeterminate"}


def check_schema(doc):
    """The report contract: command, config snapshot, items with verdict+witness or reason, tables, summary."""
    assert list(doc) == ["command", "config", "items", "tables", "summary"]
    assert isinstance(doc["command"], str)
    for key in ("gauge", "kmin", "kmax", "tail_window", "m_max", "n_max"):
        assert key in doc["config"]
    for item in doc["items"]:
        assert isinstance(item["name"], str)
        if "verdict" in item:
            assert item["verdict"] in VERDICTS
            if item["verdict"] == "indeterminate":
                assert item["diagnostics"]
            else:
                assert any(k.startswith("witness") for k in item)
    for t in doc["tables"].values():
        assert set(t) == {"description", "columns", "rows"}
        assert all(len(r) == len(t["columns"]) for r in t["rows"])
    assert set(doc["summary"]) == {"passed", "items"}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# report emission


def test_empty_report_is_valid_json():
    rep = Report("noop", {"gauge": "eps", "kmin": 4, "kmax": 40, "tail_window": 8, "m_max": 30, "n_max": 100})
    doc = json.loads(emit(rep))
    check_schema(doc)
    assert doc["items"] == [] and doc["config"]["gauge"] == "eps"


def test_witness_field_pair():
    rep = Report("x", {})
    rep.add_verdict("pos", true(2, "x > rho^2"), "m")
    item = json.loads(emit(rep))["items"][0]
    assert item["verdict"] == "true" and item["witness_m"] == 2
    text = emit(rep).decode()
    assert text.index('"verdict"') < text.index('"witness_m"')


def test_float_round_trip():
    values = [0.1, 1 / 3, 2.0 ** -40, 1e300, -7.25e-308]
    back = json.loads(dumps({"v": values}))["v"]
    assert back == values


def test_pairing_table_csv(ctx):
    pr = pairing_limit(parse_dist("delta@0"), "exp(-x^2)", (-3.0, 3.0), ctx=ctx)
    rep = Report("pairing", ctx.config.snapshot())
    rep.add_table("pairing", ["eps", "value", "abs_error"], pr.rows, "pairing against the exact value")
    text = emit(rep, "csv").decode()
    assert "# columns: eps, value, abs_error" in text
    block = text.split("# table: pairing\n", 1)[1]
    rows = [r for r in csv.reader(io.StringIO(block)) if r and not r[0].startswith("#")]
    assert rows[0] == ["eps", "value", "abs_error"] and len(rows) - 1 == ctx.size
    assert float(rows[-1][0]) == ctx.eps[-1]


def test_emit_rejects_unknown_format():
    with pytest.raises(ValueError):
        emit(Report("x", {}), "xml")


# command line


def test_check_command(capsys):
    code, out, _ = run(capsys, "check", "--x", "eps^2")
    doc = json.loads(out)
    check_schema(doc)
    names = [i["name"] for i in doc["items"]]
    assert names == ["moderate", "negligible", "positive", "order"]
    assert code == 0 and doc["items"][2]["witness_m"] == 3


def test_check_expectation_failure(capsys):
    code, out, _ = run(capsys, "check", "--x", "eps^2", "--what", "positive", "--expect", "false")
    assert code == 1 and json.loads(out)["summary"]["passed"] is False


def test_set_command(capsys):
    code, out, _ = run(capsys, "set", "--set", "open_box(0, eps)", "--x", "eps/2", "--expect", "true")
    doc = json.loads(out)
    check_schema(doc)
    assert code == 0 and doc["items"][2]["verdict"] == "true"


def test_embed_command_csv(capsys):
    code, out, _ = run(capsys, "--format", "csv", "embed", "--dist", "delta@0", "--d", "0.5", "--psi0", "1",
                       "--x=-0.5,0,0.5", "--phi", "exp(-x^2)", "--support=-3,3")
    assert code == 0
    assert "# table: values\n# columns: eps, x, value" in out
    block = out.split("# table: values\n", 1)[1].split("# table:", 1)[0]
    rows = [r for r in csv.reader(io.StringIO(block)) if r and not r[0].startswith("#")][1:]
    assert len(rows) == 3 * 37
    at_zero = [float(r[2]) for r in rows if float(r[1]) == 0.0]
    np.testing.assert_allclose(at_zero, [1 / float(r[0]) for r in rows if float(r[1]) == 0.0], rtol=1e-12)


def test_embed_command_json(capsys):
    code, out, _ = run(capsys, "embed", "--dist", "H@0", "--d", "0.5")
    doc = json.loads(out)
    check_schema(doc)
    assert code == 0 and "certificate" in [i["name"] for i in doc["items"]]


def test_invert_local_command(capsys):
    code, out, _ = run(capsys, "invert-local", "--fn", "eps*x", "--x0", "0", "--y", "eps^2/4")
    doc = json.loads(out)
    check_schema(doc)
    cert = doc["items"][0]
    assert code == 0 and cert["kind"] == "sharp"
    for key in ("a", "b", "r", "c", "image_radius"):
        assert set(cert[key]) >= {"expression", "exponent"}
    # image radius eps/2: the fit is exact, the median ratio carries the log 2 / log eps offset
    assert cert["image_radius"]["expression"] == "0.5*rho^1"
    assert abs(cert["image_radius"]["exponent"] - 1.0) <= 0.1


def test_invert_local_fermat_rejects(capsys):
    code, out, err = run(capsys, "invert-local", "--fn", "eps*x", "--x0", "0", "--kind", "fermat")
    assert code == 3 and out == "" and "not finite" in err


def test_invert_global_commands(capsys):
    code, out, _ = run(capsys, "invert-global", "--fn", "x + sin(x)/2", "--mode", "1d", "--r", "0.5", "--y", "3")
    check_schema(json.loads(out))
    assert code == 0
    code, out, _ = run(capsys, "invert-global", "--fn", "x1+x1^3; x2+x2^3", "--mode", "hadamard", "--y", "2;2")
    doc = json.loads(out)
    check_schema(doc)
    assert code == 0 and doc["tables"]["properness"]["columns"][:2] == ["R", "inf_norm"]
    code, out, _ = run(capsys, "invert-global", "--fn", "x1+x1^3; x2+x2^3", "--mode", "hadamard-levy",
                       "--beta", "affine,1,1", "--y", "2;2")
    check_schema(json.loads(out))
    assert code == 0


def test_invert_global_numeric_failure(capsys):
    code, _, err = run(capsys, "invert-global", "--fn", "atan(x1); atan(x2)", "--mode", "hadamard")
    assert code == 3 and "properness" in err


def test_examples_command(capsys):
    code, out, _ = run(capsys, "examples", "run", "3")
    doc = json.loads(out)
    check_schema(doc)
    assert code == 0 and doc["summary"]["passed"] is True


def test_examples_all(capsys):
    code, out, _ = run(capsys, "examples", "run", "all", "--format", "csv")
    assert code == 0 and out.startswith("# command: gsf examples run all")


def test_selftest_subset(capsys):
    code, out, err = run(capsys, "selftest", "--only", "1,7a")
    doc = json.loads(out)
    check_schema(doc)
    assert code == 0 and "AC1 PASS" in err and "AC7a PASS" in err


def test_selftest_expected_failure_is_reported(capsys):
    code, out, _ = run(capsys, "selftest", "--only", "7b")
    doc = json.loads(out)
    assert code == 0 and doc["items"][0]["expected_failure"] is True and doc["items"][0]["passed"] is False


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["check"],
    ["check", "--x", "eps +"],
    ["examples", "run", "9"],
    ["--grid", "9:3", "check", "--x", "eps"],
    ["invert-global", "--fn", "x", "--mode", "hadamard-levy", "--beta", "cubic,1"],
    ["set", "--set", "cube(0,1)", "--x", "0"],
])
def test_usage_errors(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 2 and out == ""


def test_global_flags(capsys, tmp_path):
    cfg = tmp_path / "gsf.cfg"
    cfg.write_text("tail_window = 6  # shorter tail\n")
    code, out, _ = run(capsys, "--config", str(cfg), "--grid", "4:24", "--gauge", "eps", "check", "--x", "eps")
    doc = json.loads(out)
    assert code == 0 and doc["config"]["kmax"] == 24 and doc["config"]["tail_window"] == 6
    assert len(doc["tables"]["samples"]["rows"]) == 21
    code, out, _ = run(capsys, "--gauge", "exp", "check", "--x", "exp(1/eps)", "--what", "moderate")
    assert json.loads(out)["items"][0]["witness_n"] == 1


def test_determinism(capsys):
    argv = ["invert-local", "--fn", "x + x^3", "--x0", "0.1", "--y", "0.1"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
