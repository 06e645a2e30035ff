import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from skewthermo import __version__
from skewthermo.cli import main
from skewthermo.systems import GOLDEN

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, args, config=None, name="cfg.json"):
    argv = list(args)
    if config is not None:
        path = tmp_path / name
        path.write_text(json.dumps(config) if not isinstance(config, str) else config)
        argv += ["--config", str(path)]
    out = tmp_path / "out.txt"
    code = main(argv + ["--out", str(out), "--quiet"])
    text = out.read_text() if out.exists() else None
    summary = Path(str(out) + ".json")
    return code, text, json.loads(summary.read_text()) if summary.exists() else None


def csv_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, map(float, l.split(",")))) for l in lines[1:]]


def test_pressure_cantor(tmp_path):
    code, text, _ = run(tmp_path, ["pressure", "--config", str(CONFIGS / "cantor13.json")])
    assert code == 0
    assert text.startswith(f"# skewthermo {__version__}\n# config_hash ")
    rows = csv_rows(text)
    expected = [math.log(2), 0.0, math.log(2) - math.log(3)]
    for row, want in zip(rows, expected):
        assert row["P"] == pytest.approx(want, abs=1e-6)


def test_pressure_gauss_is_monotone(tmp_path):
    code, text, _ = run(tmp_path, ["pressure", "--config", str(CONFIGS / "gauss.json")])
    assert code == 0
    rows = csv_rows(text)
    for n in (50, 200, 1000, 2000):
        col = [r["P"] for r in rows if r["truncation"] == n]
        assert all(a > b for a, b in zip(col, col[1:]))
    at_one = [r["P"] for r in rows if r["t"] == 1.0]
    assert at_one == sorted(at_one) and abs(at_one[-1]) <= 0.01


def test_pressure_on_a_subshift(tmp_path):
    cfg = {"subshift": {"alphabet": [0, 1], "forbidden_pairs": [[1, 1]],
                        "potential": {"kind": "constant", "params": {"c": 0.0}}}, "t": [1.0]}
    code, text, _ = run(tmp_path, ["pressure"], cfg)
    assert code == 0
    assert csv_rows(text)[0]["P"] == pytest.approx(math.log(GOLDEN))


@pytest.mark.parametrize("cfg", [
    {"system": {"kind": "gauss"}},
    {"system": {"kind": "gauss"}, "potential": {"kind": "geometric", "t": [1.0]}, "colour": "red"},
    {"system": {"kind": "gauss"}, "potential": {"kind": "entropy", "t": [1.0]}},
    {"system": {"kind": "gauss"}, "potential": {"kind": "geometric", "t": "1"}},
    {"command": "beta", "system": {"kind": "gauss"}, "potential": {"kind": "geometric", "t": [1.0]}},
    {"system": {"kind": "gauss", "params": {"digits": 50}}, "potential": {"kind": "geometric", "t": [1.0]},
     "schedule": [200, 50]},
    "{not json",
    "[1, 2]",
])
def test_pressure_config_errors_exit_2(tmp_path, cfg):
    code, _, _ = run(tmp_path, ["pressure"], cfg)
    assert code == 2


def test_dimension_commands(tmp_path):
    code, text, _ = run(tmp_path, ["dimension", "bowen", "--config", str(CONFIGS / "cantor13_bowen.json")])
    doc = json.loads(text)
    assert code == 0 and doc["version"] == __version__ and doc["command"] == "dimension bowen"
    assert doc["result"]["value"] == pytest.approx(math.log(2) / math.log(3), abs=1e-9)
    code, text, _ = run(tmp_path, ["dimension", "equilibrium", "--config", str(CONFIGS / "gauss_equilibrium.json")])
    assert json.loads(text)["result"]["value"] == pytest.approx(1.0, abs=0.01)
    m = 0.25
    cfg = {"beta": "golden", "frequencies": [1 - m, m], "h": 0.6}
    code, text, _ = run(tmp_path, ["dimension", "beta"], cfg)
    fiber = json.loads(text)["result"]["fiber"]
    assert fiber["value"] == pytest.approx(0.6 / (math.log(GOLDEN) * (1 + m)))


def test_dimension_global_and_empirical(tmp_path):
    cfg = {"system": {"kind": "gauss", "params": {"digits": 200}}, "s": 1.0,
           "orbit": {"n": 50_000, "seed": 3, "k": 2, "truncation": 200}}
    code, text, _ = run(tmp_path, ["dimension", "global"], cfg)
    res = json.loads(text)["result"]
    assert code == 0
    assert res["global"]["value"] == pytest.approx(2.0, abs=0.02)
    assert res["orbit_formula"]["value"] == pytest.approx(2.0, abs=0.05)
    cfg = {"sample": {"kind": "uniform", "points": 5000}, "seed": 1}
    code, text, _ = run(tmp_path, ["dimension", "empirical"], cfg)
    assert json.loads(text)["result"]["value"] == pytest.approx(1.0, abs=0.03)
    pts = tmp_path / "pts.txt"
    pts.write_text("\n".join(str((i * 0.618033988749895) % 1) for i in range(20000)))
    code, text, _ = run(tmp_path, ["dimension", "empirical"], {"sample": {"kind": "file", "path": str(pts)}})
    assert code == 0


def test_numeric_failure_exit_3(tmp_path):
    code, _, _ = run(tmp_path, ["dimension", "beta"], {"beta": 1.8, "frequencies": [0.5, 0.2], "h": 1.0})
    assert code == 3


def test_resource_cap_exit_4(tmp_path):
    code, _, _ = run(tmp_path, ["doeblin-lenstra", "classical", "--seeds", "100000", "--n", "1000000"])
    assert code == 4
    code, _, _ = run(tmp_path, ["beta", "--beta", "1.8", "--grid", "5000"])
    assert code == 4


def test_doeblin_lenstra_is_deterministic(tmp_path):
    args = ["doeblin-lenstra", "classical", "--seeds", "6", "--n", "20000", "--seed", "77"]
    first = run(tmp_path, args + ["--workers", "1"])
    second = run(tmp_path, args + ["--workers", "4"])
    assert first[0] == 0 and first[1] == second[1] and first[2] == second[2]
    summary = first[2]
    assert summary["summary"]["seed"] == 77 and summary["config"]["n"] == 20000
    assert summary["config_hash"] in first[1]
    rows = csv_rows(first[1])
    assert list(rows[0]) == ["t", "F_emp", "F_exact", "deviation"]
    assert rows[-1]["F_emp"] == 1.0


def test_flags_override_config_and_change_the_hash(tmp_path):
    cfg = {"seeds": 2, "n": 1000, "seed": 1}
    a = run(tmp_path, ["doeblin-lenstra", "classical"], cfg)
    b = run(tmp_path, ["doeblin-lenstra", "classical", "--seed", "2"], cfg)
    c = run(tmp_path, ["doeblin-lenstra", "classical", "--workers", "3"], cfg)
    assert b[2]["config"]["seed"] == 2
    assert a[2]["config_hash"] != b[2]["config_hash"]
    assert a[2]["config_hash"] == c[2]["config_hash"]


def test_doeblin_lenstra_mu_s(tmp_path, monkeypatch):
    monkeypatch.setenv("SKEWTHERMO_CACHE_DIR", str(tmp_path / "cache"))
    (tmp_path / "cache").mkdir()
    args = ["doeblin-lenstra", "mu_s", "--s", "0.75", "--k", "2", "--truncation", "100", "--n", "100000",
            "--seed", "4", "--pairs", "4"]
    code, text, summary = run(tmp_path, args)
    assert code == 0
    assert list(csv_rows(text)[0])[:5] == ["pair", "z", "z_prime", "r", "frequency"]
    assert math.isfinite(summary["summary"]["slope"])
    assert 0 < summary["summary"]["hd_hat"]["value"] < 2
    assert list((tmp_path / "cache").glob("*.npz"))
    assert run(tmp_path, args)[1] == text
    assert run(tmp_path, ["doeblin-lenstra", "mu_s", "--s", "0.5"])[0] == 2


def test_beta_identity_from_configs(tmp_path):
    code, text, summary = run(tmp_path, ["beta", "--config", str(CONFIGS / "beta_golden.json")])
    s = summary["summary"]
    assert code == 0 and s["points"] == 10_000
    assert s["max_residual"] < 1e-12 and s["return_time_mismatches"] == 0
    for entry in s["histogram"].values():
        assert list(entry["return_times"]) == [str(entry["k_plus_1"])]
    assert [row["k"] for row in s["orbit"]] == list(range(13))
    code, _, summary = run(tmp_path, ["beta", "--config", str(CONFIGS / "beta18.json")])
    s = summary["summary"]
    assert s["max_residual"] < 1e-10 and s["return_time_mismatches"] == 0
    assert run(tmp_path, ["beta", "--beta", "1.8"])[0] == 2  # neither grid nor points


def test_every_shipped_config_validates(tmp_path):
    from skewthermo.cli import SCHEMAS, _validate
    for path in CONFIGS.glob("*.json"):
        doc = json.loads(path.read_text())
        command = doc.pop("command")
        _validate(doc, SCHEMAS[command], "config")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "skewthermo.cli", "dimension", "bowen", "--config",
                           str(CONFIGS / "e2.json")], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["value"] == pytest.approx(0.5313, abs=5e-3)
    assert "dimension bowen" in proc.stderr
