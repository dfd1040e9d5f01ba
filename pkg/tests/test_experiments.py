import json

import pytest

from conflab import cli
from conflab import experiments as ex

TINY = {
    "rqc-homogenize": {"deltas": [0.25, 0.125], "trials": 2, "domain_half_width": 1.0, "extent": 1.0},
    "delaunay-pack": {"intensities": [100, 200], "trials": 2},
    "heschramm-locality": {"intensities": [150], "repetitions": 2, "resamplings": 2, "mesh": 0.125,
                           "per_side": 8},
    "boundary-coverage": {"intensities": [100, 200], "trials": 2},
    "modulus-distortion": {"intensities": [300], "trials": 2, "rectangles": 2, "mesh": 0.125, "per_side": 8},
    "percolation-bound": {"N": 20, "trials": 3, "pairs_per_trial": 3,
                          "deep": {"N": 30, "trials": 3}},
}


def tiny(name, **extra):
    return ex.make_config(name, {**TINY[name], **extra})


# ------------------------------------------------------------------ configs

def test_defaults_valid():
    for name in ex.EXPERIMENTS:
        cfg = ex.make_config(name)
        assert cfg["seed"] == 0 and cfg["workers"] == 1 and "thresholds" in cfg


@pytest.mark.parametrize("over", [
    {"nonsense": 1},
    {"trials": "many"},
    {"trials": 2.5},
    {"thresholds": {"nope": 1}},
    {"thresholds": 3},
    {"experiment": "delaunay-pack"},
    {"seed": -1},
    {"workers": 0},
    {"reference": "banana"},
    {"law": {"kind": "cauchy"}},
    {"law": {"kind": "two_point", "params": [2, 0]}},
])
def test_config_rejected(over):
    with pytest.raises(ex.ConfigError):
        ex.make_config("rqc-homogenize", over)


def test_unknown_experiment():
    with pytest.raises(ex.ConfigError):
        ex.make_config("nope")


def test_nested_merge_and_null_threshold():
    cfg = ex.make_config("percolation-bound", {"deep": {"N": 50}, "thresholds": {"success_fraction_min": None}})
    assert cfg["deep"]["N"] == 50 and cfg["deep"]["m"] == 5
    assert cfg["thresholds"]["success_fraction_min"] is None
    # defaults untouched
    assert ex.DEFAULTS["percolation-bound"]["deep"]["N"] == 200


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"experiment": "boundary-coverage", "trials": 3}))
    assert ex.load_config("boundary-coverage", str(p))["trials"] == 3
    p.write_text("[1, 2]")
    with pytest.raises(ex.ConfigError):
        ex.load_config("boundary-coverage", str(p))


def test_derive_seed():
    assert ex.derive_seed(0, 1, 2) == ex.derive_seed(0, 1, 2)
    assert len({ex.derive_seed(0, i, j) for i in range(5) for j in range(5)}) == 25
    assert ex.derive_seed(0, 1) != ex.derive_seed(1, 1)


# ------------------------------------------------------------------ runs

@pytest.mark.parametrize("name", ex.EXPERIMENTS)
def test_reproducible_byte_for_byte(name, tmp_path):
    cfg = tiny(name)
    a = ex.run(name, cfg, str(tmp_path / "a"))
    b = ex.run(name, cfg, str(tmp_path / "b"))
    ja = (tmp_path / "a" / f"{name}.json").read_bytes()
    assert ja == (tmp_path / "b" / f"{name}.json").read_bytes()
    assert (tmp_path / "a" / f"{name}.txt").read_bytes() == (tmp_path / "b" / f"{name}.txt").read_bytes()
    d = json.loads(ja)
    assert d["experiment"] == name and d["provenance"]["seed"] == 0
    assert a.passed == b.passed == all(c["passed"] for c in d["checks"])


@pytest.mark.parametrize("name", ["delaunay-pack", "percolation-bound"])
def test_workers_do_not_change_results(name):
    one = ex.run(name, tiny(name)).to_json()
    two = ex.run(name, tiny(name, workers=2)).to_json()
    strip = lambda s: {k: v for k, v in json.loads(s).items() if k != "config"}
    assert strip(one) == strip(two)


def test_trial_results_independent_of_order():
    cfg = tiny("boundary-coverage")
    keys = [(0, 0), (0, 1), (1, 0), (1, 1)]
    fwd = ex._map_trials(ex._coverage_trial, cfg, keys)
    rev = ex._map_trials(ex._coverage_trial, cfg, keys[::-1])[::-1]
    assert json.dumps(ex._plain(fwd)) == json.dumps(ex._plain(rev))


def test_seed_changes_results():
    a = ex.run("boundary-coverage", tiny("boundary-coverage")).to_json()
    b = ex.run("boundary-coverage", tiny("boundary-coverage", seed=1)).to_json()
    assert a != b


def test_render_writes_svgs(tmp_path):
    ex.run("delaunay-pack", tiny("delaunay-pack"), str(tmp_path), render=True)
    assert list(tmp_path.glob("*.svg"))


# ------------------------------------------------------------------ CLI

def test_cli_print_config(capsys):
    assert cli.main(["percolation-bound", "--print-config", "--seed", "5"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 5


def test_cli_config_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"trials": "x"}))
    assert cli.main(["boundary-coverage", "--config", str(p)]) == 2
    assert cli.main(["boundary-coverage", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["boundary-coverage", "--seed", "-3"]) == 2
    assert cli.main(["boundary-coverage", "--render"]) == 2


def test_cli_pass_and_fail(tmp_path, capsys):
    # crossings along the outer rows have no deep-blue cells, so only the
    # pair check is scored here
    cfg = dict(TINY["percolation-bound"], r=0.0, thresholds={"deep_crossing_fraction_min": None})
    p = tmp_path / "ok.json"
    p.write_text(json.dumps(cfg))
    assert cli.main(["percolation-bound", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "percolation-bound.json").exists()
    assert "result: PASS" in capsys.readouterr().out
    p.write_text(json.dumps(dict(cfg, r=1.0)))
    assert cli.main(["percolation-bound", "--config", str(p)]) == 1


def test_cli_unknown_experiment():
    with pytest.raises(SystemExit) as exc:
        cli.main(["nope"])
    assert exc.value.code == 2
