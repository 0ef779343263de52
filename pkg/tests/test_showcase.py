import pytest

from gsf.showcase import run_example


def items(rep):
    return {it["name"]: it for it in rep.items}


@pytest.fixture(scope="module")
def reports(ctx):
    return {i: run_example(i, ctx) for i in range(1, 7)}


@pytest.mark.parametrize("i", range(1, 7))
def test_example_passes(reports, i):
    rep = reports[i]
    failed = [it["name"] for it in rep.items if it.get("passed") is False]
    assert rep.passed and not failed


def test_heaviside_example(reports):
    it = items(reports[1])
    exp = it["exponent of H'(0) equals exponent of b"]
    assert exp["exponent_H1"] == pytest.approx(exp["exponent_b"], abs=1e-9) and exp["exponent_b"] < 0
    assert it["certificate radius exponent > 0"]["exponent_r"] > 0


def test_delta_delta_example(reports):
    it = items(reports[2])
    exp = it["exponent of (delta o delta)'(c) equals exponent of b"]
    assert exp["exponent_derivative"] == pytest.approx(exp["exponent_b"], abs=1e-9)
    assert all(0 < v < 1 for v in it["certificate at c succeeds"]["c_times_b_tail"])


def test_scaled_identity_example(reports):
    it = items(reports[3])
    assert "not finite" in it["Fermat certificate rejects r x"]["error"]
    assert it["sharp certificate accepts, image radius exponent > 0"]["exponent_s"] > 0


def test_fast_sine_example(reports):
    it = items(reports[4])
    for s in ("0.1", "0.5", "1"):
        assert it[f"f(x1) = f(x2) (radius {s})"]["verdict"] == "true"
        assert it[f"x1 != x2 (radius {s})"]["verdict"] == "true"


def test_scaled_sine_example(reports):
    it = items(reports[5])
    assert it["y = 2r outside (-r, r), so the inverse cannot reach it"]["verdict"] == "false"
    assert it["|f| <= r on all probes"]["max_ratio"] <= 1.0


def test_cube_example(reports):
    it = items(reports[6])
    assert it["Df(0) nondegenerate"]["verdict"] == "false"
    d = it["inverse derivative exponent < 0"]
    # (1/3) y^(-2/3) at y = eps^6 is (1/3) eps^-4; the median ratio sits just above -4
    assert -4.1 < d["exponent"] < -3.9
    assert d["max_rel_error_vs_closed_form"] <= 1e-12


def test_unknown_example(ctx):
    with pytest.raises(ValueError):
        run_example(7, ctx)
