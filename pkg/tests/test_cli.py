import json

import pytest

from finslerlab import __version__
from finslerlab.cli import main
from finslerlab.config import ConfigError, ScenarioConfig
from finslerlab.hypersurface import SIGN_CONVENTION


def _write(tmp_path, name, **cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def test_config_roundtrip():
    cfg = ScenarioConfig(metric="hyperbolic-randers:k=1,eps=0.05", k=0.9, delta=0.02, lambdas=[0.5],
                         tolerances={"tol": 1e-5}, seed=2**63)
    again = ScenarioConfig.from_json(cfg.to_json())
    assert again == cfg and again.to_json() == cfg.to_json()
    assert again.tolerance("tol") == 1e-5 and again.tolerance("slack") == 1e-6


@pytest.mark.parametrize("data", [{"T": 0}, {"T": -1.0}, {"bogus": 1}, {"samples": 0}, {"delta": -0.1},
                                  {"tolerances": {"nope": 1}}, [1, 2]])
def test_config_errors(data):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(data)


def test_exit_code_config_error(tmp_path, capsys):
    assert main(["focal", "--config", _write(tmp_path, "c.json", T=0), "--out", str(tmp_path / "o")]) == 2
    assert main(["geodesic", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["geodesic", "--config", _write(tmp_path, "m.json", metric="klein"), "--out",
                 str(tmp_path / "o")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["geodesic", "--config", str(tmp_path / "bad.json")]) == 2


def test_curvature_report_hyperbolic(tmp_path):
    out = tmp_path / "o"
    cfg = _write(tmp_path, "c.json", metric="hyperbolic:k=1", samples=30, k=1.0, delta=0.0)
    assert main(["curvature-report", "--config", cfg, "--out", str(out)]) == 0
    s = _summary(out)
    assert s["version"] == __version__ and s["passed"]
    assert s["results"]["max_K"] == pytest.approx(-1.0, abs=1e-6)
    assert s["results"]["max_abs_T"] < 1e-6
    lines = (out / "curvature.csv").read_text().splitlines()
    assert SIGN_CONVENTION in lines[0]
    assert lines[1] == "x0,x1,y0,y1,v0,v1,K,T"
    assert len(lines) == 32


def test_curvature_report_assertion_failure(tmp_path):
    out = tmp_path / "o"
    cfg = _write(tmp_path, "c.json", metric="hyperbolic:k=1", samples=10, k=2.0)
    assert main(["curvature-report", "--config", cfg, "--out", str(out)]) == 3
    s = _summary(out)
    assert not s["passed"] and s["assertions"][0]["margin"] < 0


def test_euclidean_report(tmp_path):
    out = tmp_path / "o"
    assert main(["curvature-report", "--config", _write(tmp_path, "c.json", metric="euclidean", samples=20),
                 "--out", str(out)]) == 0
    assert abs(_summary(out)["results"]["max_K"]) < 1e-9


def test_focal_commands(tmp_path):
    inward = _write(tmp_path, "a.json", metric="euclidean", surface="sphere:r=1", outward=False, T=1.5,
                    surface_samples=4)
    out = tmp_path / "a"
    assert main(["focal", "--config", inward, "--out", str(out)]) == 0
    s = _summary(out)
    assert s["assertions"] == []
    assert s["results"]["first_focal"] == pytest.approx(1.0, abs=1e-6)
    outward = _write(tmp_path, "b.json", metric="hyperbolic:k=1", surface="sphere:r=1", T=5, surface_samples=4)
    out = tmp_path / "b"
    assert main(["focal", "--config", outward, "--out", str(out)]) == 0
    assert _summary(out)["results"]["first_focal"] is None


def test_geodesic_jacobi_compare(tmp_path):
    cfg = _write(tmp_path, "c.json", metric="hyperbolic:k=1", metric_bar="euclidean", T=3, n_times=31)
    for cmd in ("geodesic", "jacobi", "compare"):
        assert main([cmd, "--config", cfg, "--out", str(tmp_path / cmd)]) == 0
    s = _summary(tmp_path / "jacobi")
    # point-Jacobi field with unit initial derivative: |J(3)| = sinh 3
    assert s["results"]["final_norm"] == pytest.approx(__import__("math").sinh(3.0), rel=1e-6)


def test_compare_hypothesis_failure(tmp_path):
    cfg = _write(tmp_path, "c.json", metric="euclidean", metric_bar="hyperbolic:k=1", T=2)
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "hypothesis" in _summary(tmp_path / "o")["assertions"][0]["name"]


def test_lemma2_and_determinism(tmp_path):
    cfg = _write(tmp_path, "c.json", T=5, trials=5)
    for run in ("r1", "r2"):
        assert main(["lemma2", "--config", cfg, "--out", str(tmp_path / run), "--seed", "9"]) == 0
    assert (tmp_path / "r1" / "lemma2.csv").read_bytes() == (tmp_path / "r2" / "lemma2.csv").read_bytes()
    assert _summary(tmp_path / "r1")["config"]["seed"] == 9
    main(["lemma2", "--config", cfg, "--out", str(tmp_path / "r3"), "--seed", "10"])
    assert (tmp_path / "r1" / "lemma2.csv").read_bytes() != (tmp_path / "r3" / "lemma2.csv").read_bytes()


def test_theorem3_riemannian_cli(tmp_path):
    cfg = _write(tmp_path, "c.json", metric="hyperbolic:k=1", surface="sphere:r=0.5", surface_samples=8, T=1,
                 n_times=5, samples=20, k=1.0, delta=0.0)
    assert main(["theorem3", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "theorem3.csv").read_text().splitlines()[2:]
    assert len(rows) == 5 and all(r.endswith(",1") for r in rows)
