import dataclasses
import json
from pathlib import Path

import pytest

from src.core.errors import AcceptanceFailure, InvalidParameterError
from src.core.pipeline import GateRecord, ScenarioPipeline, double_box_gate, get_scenario, run_scenario


def _with_acceptance(config, *names):
    return dataclasses.replace(config, harness=dataclasses.replace(config.harness, acceptance=list(names)))


def test_unknown_command_and_scenario(run_config):
    with pytest.raises(InvalidParameterError):
        run_scenario(run_config, "teleport")
    with pytest.raises(InvalidParameterError):
        get_scenario("rt-parabolic")


def test_evolve_is_unitary(run_config):
    result = run_scenario(run_config, "evolve", scenario_id="rt-hyperbolic", n=2.0, t=0.5)
    (check,) = result.checks
    assert check.name == "unitarity" and check.passed
    assert result.artifacts[0].exists()
    sidecar = json.loads(result.written[0].sidecar.read_text(encoding="utf-8"))
    assert sidecar["metadata"]["command"] == "evolve"
    assert sidecar["metadata"]["checks"][0]["check"] == "unitarity"


def test_lemma_corpus_reports_are_reproducible(run_config):
    first = run_scenario(run_config, "lemma-corpus")
    first_bytes = first.written[0].data.read_bytes()
    first_meta = first.written[0].sidecar.read_bytes()
    second = run_scenario(run_config, "lemma-corpus")
    assert second.written[0].data.read_bytes() == first_bytes
    assert second.written[0].sidecar.read_bytes() == first_meta
    assert len(first.reports[0].rows) == 3


def test_saddle_annulus_slice(run_config):
    result = run_scenario(run_config, "measure", set_id="saddle-annulus", params={"c0": 0.0}, n_list=[4, 8])
    checks = {check.name: check for check in result.checks}
    assert checks["saddle-slice"].passed
    assert result.written[0].data.name == "measure_saddle-annulus.csv"


def test_single_mode_gate_is_box_independent(run_config):
    record = double_box_gate(ScenarioPipeline(run_config), "rt-hyperbolic", 1.0, "single-mode")
    assert record.passed
    assert record.relative_change < 1e-12
    result = run_scenario(run_config, "gate", scenario_id="rt-hyperbolic", n=1.0, quantity="single-mode")
    assert result.checks[0].passed


def test_requested_failing_check_raises(run_config, monkeypatch):
    failing = GateRecord("ensemble-max", 8.0, 1.0, 0.5, 0.5, run_config.harness.gate_tolerance)
    monkeypatch.setattr("src.core.pipeline.double_box_gate", lambda *args, **kwargs: failing)
    config = _with_acceptance(run_config, "double-box-gate")
    with pytest.raises(AcceptanceFailure) as info:
        run_scenario(config, "gate", scenario_id="rt-hyperbolic", n=1.0)
    (failure,) = info.value.failures
    assert failure["check"] == "double-box-gate"
    assert failure["value"] == 0.5
    # Reports liegen trotzdem vor.
    assert (Path(config.harness.out_dir) / "gate.csv").exists()


def test_unrequested_failure_does_not_raise(run_config, monkeypatch):
    failing = GateRecord("ensemble-max", 8.0, 1.0, 0.5, 0.5, run_config.harness.gate_tolerance)
    monkeypatch.setattr("src.core.pipeline.double_box_gate", lambda *args, **kwargs: failing)
    result = run_scenario(run_config, "gate", scenario_id="rt-hyperbolic", n=1.0)
    assert not result.checks[0].passed


def test_tiny_box_control_runs(run_config):
    record = double_box_gate(ScenarioPipeline(run_config), "rt-hyperbolic", 1.0, box_length=2.0)
    assert record.box_length == 2.0
    assert record.value > 0.0 and record.doubled_value > 0.0


def test_ensemble_gate_converges(run_config):
    record = double_box_gate(ScenarioPipeline(run_config), "rt-hyperbolic", 2.0)
    assert record.passed
    assert record.relative_change < 1e-2


def test_gate_rejects_torus(run_config):
    with pytest.raises(InvalidParameterError):
        double_box_gate(ScenarioPipeline(run_config), "tt-elliptic", 2.0)


def test_nls_command(run_config):
    result = run_scenario(run_config, "nls", n=1.0)
    names = [paths.data.name for paths in result.written]
    assert names == ["nls_diagnostics.csv", "nls_intervals.csv"]
    assert all(check.passed for check in result.checks)


def test_ratio_sweep_runs_box_gate(run_config):
    result = run_scenario(run_config, "ratio-sweep", scenario_id="rt-hyperbolic", n_list=[1, 2, 3, 4])
    checks = {check.name: check for check in result.checks}
    assert set(checks) == {"box-gate", "ratio-bounded"}
    assert "box-gate" in checks["ratio-bounded"].threshold
    metadata = result.reports[0].metadata
    assert metadata["gate_quantity"] == "ensemble-max"
    assert metadata["gate_change"] == checks["box-gate"].value


def test_failed_box_gate_fails_growth_checks(run_config, monkeypatch):
    failing = GateRecord("ensemble-max", 8.0, 1.0, 0.5, 0.5, run_config.harness.gate_tolerance)
    monkeypatch.setattr("src.core.pipeline.double_box_gate", lambda *args, **kwargs: failing)
    result = run_scenario(run_config, "ratio-sweep", scenario_id="rt-mixed", n_list=[1, 2, 3, 4])
    checks = {check.name: check for check in result.checks}
    assert not checks["box-gate"].passed
    assert not checks["ratio-growth"].passed
    assert checks["ratio-growth"].detail == "box-gate failed"


def test_failed_run_leaves_no_fields(run_config, monkeypatch):
    def explode(*args, **kwargs):
        raise InvalidParameterError("abgebrochen")

    monkeypatch.setattr("src.core.pipeline.functional.strichartz_ratio", explode)
    with pytest.raises(InvalidParameterError):
        run_scenario(run_config, "evolve", scenario_id="rt-hyperbolic", n=2.0, t=0.5)
    assert not Path(run_config.harness.out_dir).exists()


def test_nls_checkpoints_are_written_after_the_run(run_config):
    nls_settings = dataclasses.replace(run_config.nls, checkpoint_stride=4)
    config = dataclasses.replace(run_config, nls=nls_settings)
    result = run_scenario(config, "nls", n=1.0)
    assert [path.name for path in result.artifacts] == ["nls_step0000004.field", "nls_step0000008.field"]
    assert all(path.parent.name == "nls" and path.exists() for path in result.artifacts)
