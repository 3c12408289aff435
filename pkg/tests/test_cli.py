"""End-to-end command line checks, driving main() in process."""
import json

import pytest

from dwsim import ControlError
from dwsim.cli import main

CONFIG_DOC = {
    "n": 3,
    "d": 1,
    "r_spec": {"kind": "explicit", "values": [0.5, 0.5, 1.0]},
    "mu_spec": {"kind": "explicit", "values": [1 / 3, 1 / 3, 1 / 3]},
    "init_spec": {"kind": "explicit", "values": [[0.0], [0.75], [1.25]]},
    "horizon": 100000,
    "master_seed": 12345,
    "run_count": 2,
    "stop": {"freeze_window": 30, "diam_tol": 1e-9, "horizon_cap": 100000},
    "tau_eps": [0.1],
    "record_stride": None,
}

# merge-demo input: two near-together singletons plus a spectator far enough
# to stay outside every radius.  Matches the frozen single-bridge oracle.
MERGE_DOC = {
    "n": 3,
    "d": 1,
    "r_spec": {"kind": "explicit", "values": [0.5, 0.5, 0.5]},
    "mu_spec": {"kind": "explicit", "values": [1 / 3, 1 / 3, 1 / 3]},
    "init_spec": {"kind": "explicit", "values": [[0.0], [0.9], [1.1]]},
    "horizon": 1000,
    "master_seed": 7,
    "run_count": 1,
    "stop": None,
    "tau_eps": [],
    "record_stride": None,
}


def _write_config(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_simulate_writes_batch_layout(tmp_path):
    cfg = _write_config(tmp_path / "cfg.json", CONFIG_DOC)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    for idx in range(CONFIG_DOC["run_count"]):
        run_dir = out / f"run_{idx:04d}"
        assert (run_dir / "trace.csv").is_file()
        assert (run_dir / "events.csv").is_file()
        report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
        assert report["convergence"]["converged"] is True
        assert report["context"]["run_index"] == idx
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["stats"]["n_runs"] == 2
    assert summary["stats"]["n_converged"] == 2
    assert summary["config"]["master_seed"] == 12345


def test_simulate_rerun_is_byte_identical(tmp_path):
    cfg = _write_config(tmp_path / "cfg.json", CONFIG_DOC)
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(first)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(second)]) == 0
    assert _tree_bytes(first) == _tree_bytes(second)


def test_simulate_seed_override_changes_outputs(tmp_path):
    doc = dict(CONFIG_DOC)
    doc["r_spec"] = {"kind": "scaled-uniform", "m_bar_r": 1.0}
    doc["mu_spec"] = {"kind": "scaled-uniform", "m_bar_u": 0.5}
    doc["init_spec"] = {"kind": "uniform-box", "low": 0.0, "high": 2.0}
    cfg = _write_config(tmp_path / "cfg.json", doc)
    base = tmp_path / "base"
    other = tmp_path / "other"
    assert main(["simulate", "--config", cfg, "--out", str(base)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(other),
                 "--seed", "999"]) == 0
    assert json.loads((other / "summary.json").read_text(
        encoding="utf-8"))["config"]["master_seed"] == 999
    base_trace = (base / "run_0000" / "trace.csv").read_bytes()
    other_trace = (other / "run_0000" / "trace.csv").read_bytes()
    assert base_trace != other_trace


def test_repro_writes_cell_tree(tmp_path, monkeypatch):
    # The real preset cells carry a 1e7-step horizon; censored runs there
    # cost half a minute each in event reconstruction.  The tree logic is
    # what this test owns, so swap in statically convergent cells.
    from dwsim import config_from_dict

    def tiny_cells(seeds, master_seed=1):
        cells = []
        for k in range(8):
            doc = dict(CONFIG_DOC)
            doc["run_count"] = seeds
            doc["master_seed"] = master_seed + k
            cells.append((f"cell_{k}", config_from_dict(doc)))
        return tuple(cells)

    monkeypatch.setattr("dwsim.cli.fig1_cells", tiny_cells)
    out = tmp_path / "figs"
    assert main(["repro", "fig1", "--out", str(out), "--seeds", "1"]) == 0
    root = out / "fig1"
    summary = json.loads((root / "summary.json").read_text(encoding="utf-8"))
    assert len(summary["cells"]) == 8
    for name, stats in summary["cells"].items():
        assert stats["n_runs"] == 1
        cell_summary = root / name / "summary.json"
        assert cell_summary.is_file()
        assert (root / name / "run_0000" / "report.json").is_file()


def test_slow_writes_certificate(tmp_path):
    out = tmp_path / "slow"
    assert main(["slow", "--K", "5", "--out", str(out)]) == 0
    doc = json.loads((out / "slow.json").read_text(encoding="utf-8"))
    assert doc["ok"] is True
    assert doc["contact_steps"] == 5
    assert doc["checks"]["exact_contact"] is True
    assert doc["checks"]["slowness_certificate"] is True
    assert doc["max_deviation"] <= 1e-9


def test_slow_curve_csv(tmp_path, warmed_kernel):
    out = tmp_path / "slow"
    assert main(["slow", "--K", "5", "--out", str(out),
                 "--curve", "2,6", "--curve-seeds", "4"]) == 0
    lines = (out / "slow_curve.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "contact_steps,median_tau,n_runs,n_censored"
    assert len(lines) == 3
    assert lines[1].startswith("2,") and lines[2].startswith("6,")


def test_slow_rejects_bad_geometry(tmp_path, capsys):
    # chaser radius must stay below the wide agent's radius
    rc = main(["slow", "--K", "5", "--ri", "2.0", "--rj", "1.0",
               "--out", str(tmp_path)])
    assert rc == 2
    assert "parameter error" in capsys.readouterr().err


def test_merge_demo_matches_frozen_oracle(tmp_path):
    cfg = _write_config(tmp_path / "merge.json", MERGE_DOC)
    out = tmp_path / "out"
    rc = main(["merge-demo", "--config", cfg, "--a", "2", "--b", "3",
               "--eps", "0.075", "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "merge.json").read_text(encoding="utf-8"))
    assert doc["bridge"] == [2, 3]
    assert doc["anchor"] == 2
    assert doc["cluster_a"] == [2] and doc["cluster_b"] == [3]
    assert doc["final_opinions"] == [
        [0.0], [0.9666666666666667], [1.0333333333333334]]
    assert doc["phase_times"]["all_done"] <= doc["length_bound"]


def test_merge_demo_rejects_oversized_eps(tmp_path, capsys):
    cfg = _write_config(tmp_path / "merge.json", MERGE_DOC)
    rc = main(["merge-demo", "--config", cfg, "--a", "2", "--b", "3",
               "--eps", "0.4", "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "parameter error" in capsys.readouterr().err


def test_merge_demo_rejects_malformed_members(tmp_path, capsys):
    cfg = _write_config(tmp_path / "merge.json", MERGE_DOC)
    rc = main(["merge-demo", "--config", cfg, "--a", "2;3", "--b", "3",
               "--eps", "0.075", "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file_is_io_error(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "absent.json"),
               "--out", str(tmp_path / "out")])
    assert rc == 3
    assert "i/o error" in capsys.readouterr().err


def test_unparsable_config_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    rc = main(["simulate", "--config", str(bad), "--out",
               str(tmp_path / "out")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_config_with_unknown_key_is_config_error(tmp_path, capsys):
    doc = dict(CONFIG_DOC)
    doc["surprise"] = 1
    cfg = _write_config(tmp_path / "cfg.json", doc)
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "surprise" in capsys.readouterr().err


def test_failed_control_run_maps_to_exit_one(tmp_path, capsys, monkeypatch):
    def explode(*args, **kwargs):
        raise ControlError("staged failure")

    monkeypatch.setattr("dwsim.cli.merge_eps_clusters", explode)
    cfg = _write_config(tmp_path / "merge.json", MERGE_DOC)
    rc = main(["merge-demo", "--config", cfg, "--a", "2", "--b", "3",
               "--eps", "0.075", "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "verification failed" in capsys.readouterr().err


def test_unknown_subcommand_exits_via_argparse():
    with pytest.raises(SystemExit) as err:
        main(["summon"])
    assert err.value.code == 2
