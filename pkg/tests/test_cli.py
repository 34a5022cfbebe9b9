import json
from pathlib import Path

import numpy as np
import pytest

from edham import cli, config, csvio, oracles
from edham.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


CONSTANT = {"model": {"kind": "constant", "H0": [[1, 0], [0, 3]]}, "solve": {"interval": [0, 4], "grid_points": 32}}


def test_constant_run(tmp_path, capsys):
    code, out, _ = run(["run", "--config", write(tmp_path, CONSTANT)], capsys)
    assert code == 0
    rep = json.loads(out)
    assert [s["energy"] for s in rep["bound_states"]] == pytest.approx([1.0, 3.0])
    assert rep["biortho"]["biorthonormality_residual"] <= 1e-10
    assert all(v <= 1e-10 for k, v in rep["linearize"]["residuals"].items() if k.startswith("r"))
    assert rep["oracle"][0]["max_abs_error"] <= 1e-10
    assert set(rep) >= {"timestamp", "config", "seed", "versions"}


def test_duplicated_exits_3(capsys):
    code, _, err = run(["run", "--config", str(CONFIGS / "duplicated.json")], capsys)
    assert code == 3
    e = json.loads(err)
    assert e["stage"] == "biortho" and e["reason"] == "rank-deficient"


def test_oscillator_report_matches_oracle(tmp_path, capsys):
    code, _, _ = run(["run", "--config", str(CONFIGS / "oscillator.json"), "--output", str(tmp_path / "r.json")], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    (z0,) = oracles.ho_analytic_roots(0, config.build_model(config.load_config(CONFIGS / "oscillator.json")[0]).oscillator)
    e0 = [s["energy"] for s in rep["bound_states"] if s["alpha"][0] == 0]
    assert len(e0) == 1 and abs(e0[0] - z0) <= 5e-4


@pytest.mark.parametrize(
    "data",
    [
        {"model": {"kind": "constant", "H0": [[1]]}, "solve": {"interval": [1, 0]}},
        {"model": {"kind": "constant", "H0": [[1]]}, "solve": {"interval": [0, 1], "grid_points": 4}},
        {"model": {"kind": "constant", "H0": [[1]]}, "solve": {"interval": [0, 1], "tol": 0}},
        {"model": {"kind": "constant", "H0": [[1]], "extra": 1}},
        {"model": {"kind": "banana"}},
        {"model": {"kind": "constant", "H0": "missing.csv"}, "solve": {"interval": [0, 1]}},
        {"model": {"kind": "constant", "H0": [[1, 2], [3]]}, "solve": {"interval": [0, 1]}},
        {"model": {"kind": "sextic_qes", "N": 7}, "solve": {"interval": [0, 1]}},
        {"model": {"kind": "feshbach", "H_R": [[0, 1], [1, 0]], "P": {"rank": 3}}, "solve": {"interval": [0, 1]}},
        {"model": {"kind": "constant", "H0": [[1]]}},
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, data):
    code, _, err = run(["run", "--config", write(tmp_path, data)], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "config"


def test_missing_config_file(capsys):
    assert run(["solve", "--config", "/nonexistent.json"], capsys)[0] == 2


def test_ambiguity_exits_3(tmp_path, capsys):
    # an overlap threshold of exactly 1 cannot be met once eigenvectors rotate
    data = {
        "model": {"kind": "feshbach", "H_R": {"random_hermitian": 4}, "P": {"rank": 2}},
        "solve": {"interval": [-3, 3], "ambiguity_threshold": 1.0, "grid_points": 16},
    }
    code, _, err = run(["solve", "--config", write(tmp_path, data)], capsys)
    e = json.loads(err)
    assert code == 3 and e["stage"] == "solve" and e["reason"] == "ambiguous-branch"


def test_unsupported_spectrum_exit_3(tmp_path, capsys):
    data = {"model": {"kind": "constant", "H0": [[0, 1], [-1, 0]]}, "solve": {"interval": [-2, 2], "grid_points": 16}}
    code, _, err = run(["run", "--config", write(tmp_path, data)], capsys)
    assert code == 3 and json.loads(err)["stage"] == "solve"


def test_solve_csv(tmp_path, capsys):
    code, out, _ = run(["solve", "--config", write(tmp_path, CONSTANT), "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("n,j,energy") and len(lines) == 3


def test_linearize_csv(tmp_path, capsys):
    out_dir = tmp_path / "lin"
    cfg = write(tmp_path, {**CONSTANT, "model": {"kind": "constant", "H0": [[1, 1], [0, 2]]}})
    code, _, _ = run(["linearize", "--config", cfg, "--format", "csv", "--output", str(out_dir)], capsys)
    assert code == 0
    assert np.allclose(csvio.read_matrix(out_dir / "K.csv"), [[1, 1], [0, 2]], atol=1e-12)
    assert {"K.csv", "L.csv", "mu.csv", "nu.csv", "residuals.json"} <= {p.name for p in out_dir.iterdir()}


def test_verify_and_reduce(capsys):
    code, out, _ = run(["verify", "--config", str(CONFIGS / "feshbach.json")], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["biortho"]["completeness"]["idempotency"] <= 1e-10
    code, out, _ = run(["reduce", "--config", str(CONFIGS / "feshbach.json")], capsys)
    rep = json.loads(out)["reduce"]
    assert code == 0 and rep["rank"] == 2 and len(rep["recoverable_spectrum"]) == 3
    assert run(["reduce", "--config", str(CONFIGS / "constant.json")], capsys)[0] == 2


def test_oracle_command(capsys):
    code, out, _ = run(["oracle", "--qes-N", "0", "1", "--moments-nmax", "2"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["qes"][0]["A_N"] == "-4" and rep["qes"][0]["energies"] == [3.0]
    assert all(rep["qes"][i]["exact_residuals_zero"] for i in range(2))
    assert max(m["rel_diff"] for m in rep["moments"]) <= 1e-12


def test_seed_changes_random_models(tmp_path, capsys):
    cfg = str(CONFIGS / "feshbach_random.json")
    a = json.loads(run(["solve", "--config", cfg], capsys)[1])
    b = json.loads(run(["solve", "--config", cfg, "--seed", "7"], capsys)[1])
    assert b["seed"] == 7 and a["bound_states"] != b["bound_states"]


def test_config_matrix_forms(tmp_path):
    csvio.write_matrix(tmp_path / "h.csv", np.diag([1.0, 2.0]))
    cfg = config.parse_config({"model": {"kind": "constant", "H0": "h.csv"}})
    assert np.array_equal(config.build_model(cfg, tmp_path).H0, np.diag([1.0, 2.0]))
    cfg = config.parse_config({"model": {"kind": "constant", "H0": [[1, [0, 1]], [[0, -1], 2]]}})
    assert np.array_equal(config.build_model(cfg).H0, [[1, 1j], [-1j, 2]])
    cfg = config.parse_config({"model": {"kind": "constant", "H0": {"random_hermitian": 3}}, "seed": 5})
    assert np.array_equal(config.build_model(cfg).H0, config.build_model(cfg).H0)
    with pytest.raises(ConfigError):
        config.parse_config({"model": {"kind": "step", "segments": [{"lo": 2, "hi": 1, "matrix": [[1]]}]}})
