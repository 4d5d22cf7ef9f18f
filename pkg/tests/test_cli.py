"""CLI exit codes, idempotence, manifest rules, env seed handling."""

import json
import math

import pytest

from hm_sim.cli import DEFAULT_SEED, main, resolve_seed
from hm_sim.dynamics import RandomSource
from hm_sim.harness import random_pure_state
from hm_sim.serialize import validate_report_payload


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_spin_machine_pass_and_schema(capsys):
    code, out, _ = run_cli(
        capsys, "spin-machine", "--angle", str(math.pi / 3), "--trials", "20000"
    )
    assert code == 0
    payload = json.loads(out)
    validate_report_payload(payload)
    assert payload["meta"]["closed_form"][0] == pytest.approx(0.75, abs=1e-9)
    assert payload["reports"][0]["expected"][0] == pytest.approx(0.75, abs=1e-9)


def test_spin_machine_at_zero_angle_is_exact(capsys):
    code, out, _ = run_cli(capsys, "spin-machine", "--angle", "0", "--trials", "5000")
    assert code == 0
    report = json.loads(out)["reports"][0]
    assert report["observed"] == [1.0, 0.0]
    assert report["deviation"] == [0.0, 0.0]


def test_verify_born_high_dimension(capsys):
    code, out, _ = run_cli(
        capsys, "verify-born", "--dimension", "8", "--states", "10",
        "--trials", "10000",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["pass"] is True
    assert len(payload["reports"]) == 10


def test_spin_machine_angle_validation(capsys):
    code, _, err = run_cli(capsys, "spin-machine", "--angle", "3.5")
    assert code == 2
    assert "angle" in err


def test_spin_machine_requires_angle(capsys):
    code, _, err = run_cli(capsys, "spin-machine")
    assert code == 2


def test_config_and_inline_are_exclusive(tmp_path, capsys):
    cfg = tmp_path / "spin.json"
    cfg.write_text(
        json.dumps(
            {
                "schema_version": "1",
                "experiment": "spin-machine",
                "angle": 1.0,
                "trials": 1000,
            }
        )
    )
    code, out, _ = run_cli(capsys, "spin-machine", "--config", str(cfg))
    assert code == 0
    code, _, err = run_cli(
        capsys, "spin-machine", "--config", str(cfg), "--angle", "1.0"
    )
    assert code == 2
    assert "not both" in err


def test_config_wrong_experiment_rejected(tmp_path, capsys):
    cfg = tmp_path / "die.json"
    cfg.write_text(json.dumps({"schema_version": "1", "experiment": "die"}))
    code, _, err = run_cli(capsys, "spin-machine", "--config", str(cfg))
    assert code == 2


def test_outputs_are_idempotent(tmp_path, capsys):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    for out in (out1, out2):
        code, _, _ = run_cli(
            capsys,
            "die", "--rolls", "20000", "--seed", "99", "--out", str(out),
        )
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_worker_count_does_not_change_bytes(tmp_path, capsys):
    out1 = tmp_path / "w1.json"
    out3 = tmp_path / "w3.json"
    for out, workers in ((out1, "1"), (out3, "3")):
        code, _, _ = run_cli(
            capsys,
            "verify-born", "--dimension", "3", "--states", "4",
            "--trials", "20000", "--workers", workers, "--out", str(out),
        )
        assert code == 0
    assert out1.read_bytes() == out3.read_bytes()


def test_env_seed_overrides_default_but_not_flag(monkeypatch):
    assert resolve_seed(None, None) == DEFAULT_SEED
    monkeypatch.setenv("HM_SIM_SEED", "123")
    assert resolve_seed(None, None) == 123
    assert resolve_seed(7, None) == 7
    assert resolve_seed(None, 55) == 55
    monkeypatch.setenv("HM_SIM_SEED", "not-a-number")
    from hm_sim.errors import ConfigError

    with pytest.raises(ConfigError):
        resolve_seed(None, None)


def test_env_seed_changes_cli_output(monkeypatch, capsys):
    code, base, _ = run_cli(capsys, "die", "--rolls", "5000", "--format", "csv")
    monkeypatch.setenv("HM_SIM_SEED", "0x5eed")
    code, alt, _ = run_cli(capsys, "die", "--rolls", "5000", "--format", "csv")
    assert base != alt
    monkeypatch.delenv("HM_SIM_SEED")


def test_die_on_table_certain(capsys):
    code, out, _ = run_cli(
        capsys, "die", "--rolls", "500", "--start", "on_table:2"
    )
    assert code == 0
    payload = json.loads(out)
    report = payload["reports"][0]
    assert report["observed"][1] == 1.0
    assert sum(report["observed_counts"]) == 500


def test_die_bad_face(capsys):
    code, _, err = run_cli(capsys, "die", "--start", "on_table:9")
    assert code == 2
    code, _, err = run_cli(capsys, "die", "--start", "levitating")
    assert code == 2


def test_verify_born_dimension_cap(capsys):
    code, _, err = run_cli(capsys, "verify-born", "--dimension", "9")
    assert code == 2
    assert "2..8" in err


def test_verify_born_reports_analytic_gap(capsys):
    code, out, _ = run_cli(
        capsys, "verify-born", "--dimension", "4", "--states", "3",
        "--trials", "5000",
    )
    assert code == 0
    payload = json.loads(out)
    validate_report_payload(payload)
    assert len(payload["reports"]) == 3
    for entry in payload["reports"]:
        assert entry["analytic_max_gap"] <= 1e-9


def test_universal_average_requires_config(capsys):
    code, _, err = run_cli(capsys, "universal-average")
    assert code == 2


def test_universal_average_m1_matches_verify_born_single_state(tmp_path, capsys):
    # With a single full-simplex cell every membrane is uniform, so the
    # grand average must reproduce, draw for draw, the Monte Carlo part of a
    # one-state verify-born run on the same state, seed and trial count.
    seed = 4242
    dim = 3
    psi = random_pure_state(RandomSource(seed), 0, dim)
    cfg = tmp_path / "ua.json"
    cfg.write_text(
        json.dumps(
            {
                "schema_version": "1",
                "experiment": "universal-average",
                "dimension": dim,
                "state": {
                    "kind": "pure",
                    "re": list(psi.amplitudes.real),
                    "im": list(psi.amplitudes.imag),
                },
                "observable": {"kind": "canonical"},
                "cells": 1,
                "membranes": 4,
                "trials_per_membrane": 5000,
                "seed": seed,
            }
        )
    )
    code, ua_out, _ = run_cli(capsys, "universal-average", "--config", str(cfg))
    assert code == 0
    code, vb_out, _ = run_cli(
        capsys, "verify-born", "--dimension", str(dim), "--states", "1",
        "--trials", "20000", "--seed", str(seed),
    )
    assert code == 0
    ua = json.loads(ua_out)["reports"][0]
    vb = json.loads(vb_out)["reports"][0]
    for key in ("observed_counts", "observed", "expected", "deviation",
                "sigma", "chi_square", "degrees_of_freedom", "sigma_model"):
        assert ua[key] == vb[key], key


def test_adversarial_universal_average_fails_with_exit_1(tmp_path, capsys):
    weights = [0.0] * 50
    weights[-1] = 1.0
    cfg = tmp_path / "adversarial.json"
    cfg.write_text(
        json.dumps(
            {
                "schema_version": "1",
                "experiment": "universal-average",
                "dimension": 2,
                "state": {
                    "kind": "bloch",
                    "coordinates": [math.sin(math.pi / 3), 0.0, math.cos(math.pi / 3)],
                },
                "observable": {"kind": "canonical"},
                "cells": 50,
                "membranes": 1,
                "trials_per_membrane": 3000,
                "fixed_cell_weights": weights,
            }
        )
    )
    code, out, _ = run_cli(capsys, "universal-average", "--config", str(cfg))
    assert code == 1
    payload = json.loads(out)
    assert payload["pass"] is False


def test_measure_dumps_trace_and_rejects_csv(tmp_path, capsys):
    cfg = tmp_path / "measure.json"
    cfg.write_text(
        json.dumps(
            {
                "schema_version": "1",
                "experiment": "measure",
                "dimension": 2,
                "state": {"kind": "bloch", "coordinates": [1.0, 0.0, 0.0]},
                "observable": {"kind": "canonical"},
                "membrane": {"kind": "uniform"},
            }
        )
    )
    code, out, _ = run_cli(capsys, "measure", "--config", str(cfg))
    assert code == 0
    payload = json.loads(out)
    validate_report_payload(payload)
    assert payload["trace"]["outcome_block"] in ([0], [1])
    assert payload["trace"]["polar_angle"] == pytest.approx(math.pi / 2, abs=1e-9)

    code, _, err = run_cli(capsys, "measure", "--config", str(cfg), "--format", "csv")
    assert code == 2


def test_malformed_config_gives_field_diagnostics(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(
        json.dumps(
            {
                "schema_version": "1",
                "experiment": "universal-average",
                "dimension": 2,
                "state": {"kind": "bloch", "coordinates": [0, 0, 1]},
                "observable": {"kind": "canonical"},
                "cells": 0,
                "membranes": 1,
                "trials_per_membrane": 10,
            }
        )
    )
    code, _, err = run_cli(capsys, "universal-average", "--config", str(cfg))
    assert code == 2
    assert "cells" in err
