"""Smoke test for the mixknap Python bindings.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math
import pathlib
import tempfile

import mixknap

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


def test_lp_and_best_response():
    value, mixture = mixknap.opt_lp([0.0, 1.0], [[0.0], [1.0]], 0.5)
    assert math.isclose(value, 0.5, abs_tol=1e-12)
    assert math.isclose(sum(mixture), 1.0, abs_tol=1e-12)
    v, action = mixknap.best_response([0.0, 1.0], [[0.0], [1.0]], [0.0], 0.5)
    assert (v, action) == (1.0, 1)
    v, action = mixknap.best_response([0.0, 1.0], [[0.0], [1.0]], [2.0], 0.5)
    assert (v, action) == (1.0, 0)


def test_gap_demo():
    r = mixknap.gap_demo(0.01)
    assert r["primal"] == 1.0 and r["dual"] <= 0.02 and r["gap"] >= 0.98


def test_bad_input_raises():
    try:
        mixknap.opt_lp([0.0, 2.0], [[0.0], [1.0]], 0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("reward above 1 was accepted")


def test_run_and_read_back():
    with tempfile.TemporaryDirectory() as out:
        files = mixknap.run(str(CONFIGS / "bwk_stochastic.conf"), out)
        traces = [f for f in files if pathlib.Path(f).name.startswith("trace-seed")]
        assert len(traces) == 5
        t = mixknap.read_trace(traces[0])
        assert len(t["reward"]) == 4000
        assert math.isclose(sum(t["reward"]), t["total_reward"], rel_tol=1e-6)
        assert all(c[0] >= 0.0 for c in t["costs"])
        assert t["commitment"] is None
    base = mixknap.baselines(str(CONFIGS / "bwk_stochastic.conf"))
    assert float(base["rho"]) == 0.5


def test_auction_replay():
    with tempfile.TemporaryDirectory() as out:
        files = mixknap.run(str(CONFIGS / "fpa_continuous.conf"), out)
        streams = [f for f in files if pathlib.Path(f).name.startswith("auction-seed")]
        assert streams
        checks, violations, over = mixknap.good_edges(streams[0])
        assert checks > 0 and violations == 0 and over == 0


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"ok {name}")
