from __future__ import annotations

import math
from typing import Any, Dict

import pytest

from dynamics.scenarios import run
from src.reports import StageStatus, parse_config
from src.reports.models import RunReport
from src.utils.error_handler import ConfigError

LEMMA_SEQUENCE = {"direction": [0.3, 1.0, 1.0], "scale": 0.02, "ratio": 0.7, "count": 20}


def _run(model: str, experiment: str, seed: int = 0, **parameters: Any) -> RunReport:
    name, _, raw = model.partition(":")
    params: Dict[str, Any] = {}
    if raw:
        key, _, value = raw.partition("=")
        params[key] = float(value)
    return run(
        parse_config(
            {
                "model": {"name": name, "params": params},
                "experiment": experiment,
                "parameters": parameters,
                "seed": seed,
            }
        )
    )


def _statuses(report: RunReport) -> Dict[str, StageStatus]:
    return {stage.name: stage.status for stage in report.stages}


def test_certify_sink_on_hopf_cycle() -> None:
    report = _run("hopf:mu=0.5", "certify_sink", alpha=0.5, phases=4)
    assert report.verdicts == {"certify_sink": True}
    cert = report.stage("certify_sink").data
    assert cert["m"] == 1
    assert cert["exponent"] == pytest.approx(1.0, rel=1e-5)
    series = report.series["leg_norms"]
    assert series.columns == ["i", "t_i", "log_norm"]
    assert len(series.rows) == 7
    assert not report.has_numerical_failure
    assert report.provenance.started_at is None


def test_rotation_is_not_a_sink() -> None:
    report = _run("rotation", "certify_sink", alpha=0.1, m_max=2, phases=2)
    assert report.verdicts["certify_sink"] is False
    assert not report.has_numerical_failure


def test_refinement_failure_is_recorded() -> None:
    report = _run(
        "rotation",
        "certify_sink",
        alpha=0.1,
        orbit={"point": [1.0, 0.0], "period": 6.28},
    )
    orbit = report.stage("orbit")
    assert orbit.status == StageStatus.FAILED
    assert orbit.error.code == "SINGULAR_JACOBIAN"
    assert orbit.error.numerical
    assert orbit.error.message
    assert report.stage("certify_sink").status == StageStatus.SKIPPED
    assert report.has_numerical_failure


def test_orbit_required_without_closed_form() -> None:
    with pytest.raises(ConfigError) as exc_info:
        _run("lorenz", "certify_sink", alpha=0.5)
    assert exc_info.value.field_name == "parameters.orbit"


def test_orbit_dimension_is_checked() -> None:
    with pytest.raises(ConfigError) as exc_info:
        _run("hopf", "certify_sink", alpha=0.5, orbit={"point": [1.0, 0.0, 0.0], "period": 6.0})
    assert exc_info.value.field_name == "parameters.orbit.point"


def test_pliss_extract_verifies_contraction() -> None:
    report = _run("hopf:mu=0.5", "pliss_extract", alpha=0.9, eta=0.5, phases=4)
    assert _statuses(report) == {
        "orbit": StageStatus.OK,
        "certify_sink": StageStatus.OK,
        "contracted_point": StageStatus.OK,
        "verify_contracted": StageStatus.OK,
    }
    assert report.stage("contracted_point").data["index"] == 0
    assert report.verdicts["verify_contracted"] is True
    assert report.stage("verify_contracted").data["legs"] == 8 * 7


def test_pliss_extract_skips_uncertified_orbit() -> None:
    report = _run("hopf:mu=0.5", "pliss_extract", alpha=3.0, eta=0.5, m_max=1, phases=2)
    assert report.verdicts["certify_sink"] is False
    assert report.stage("contracted_point").status == StageStatus.SKIPPED
    assert report.stage("verify_contracted").status == StageStatus.SKIPPED
    assert not report.has_numerical_failure


def test_classify_lorenz_equilibria() -> None:
    report = _run("lorenz", "classify")
    assert [stage.name for stage in report.stages] == ["classify[0]", "classify[1]", "classify[2]"]
    assert all(verdict is False for verdict in report.verdicts.values())
    origin = report.stage("classify[0]").data
    assert origin["is_hyperbolic"] is True
    assert origin["max_real_part"] == pytest.approx((-11.0 + math.sqrt(1201.0)) / 2.0)


def test_splitting_without_curve() -> None:
    report = _run("degenerate_sink", "splitting")
    assert report.verdicts["splitting"] is True
    assert report.stage("manifold").status == StageStatus.SKIPPED
    assert report.stage("splitting").data["fitted_lambda"] == pytest.approx(1.0, rel=1e-6)
    assert report.series["domination_ratio"].columns == ["t", "ratio"]


def test_splitting_with_center_curve() -> None:
    report = _run("center_normal_form", "splitting", arclength=0.3)
    manifold = report.stage("manifold")
    assert manifold.status == StageStatus.OK
    assert manifold.data["source"] == "center_curve"
    assert report.stage("conjugacy") is None


def test_splitting_with_taylor_curve() -> None:
    report = _run("lemma_model", "splitting")
    assert report.stage("manifold").data["source"] == "taylor"
    assert report.verdicts["conjugacy"] is True


def test_splitting_failure_for_rotation() -> None:
    report = _run("rotation", "splitting")
    assert report.stage("splitting").error.code == "NO_DOMINATED_F"
    assert report.has_numerical_failure
    assert "domination_ratio" not in report.series


def test_cone_claim_on_split_model() -> None:
    report = _run("lemma_model", "cone_claim", seed=7, alpha=0.5, T_step=1.0, eps=1e-4, trials=50)
    assert report.verdicts["cone_claim"] is True
    assert report.stage("cone_claim").data["item1_failures"] == 0


def test_disk_at_given_point() -> None:
    report = _run("lemma_model", "disk_intersection", delta=0.5, z=[0.05, 0.005, 0.0])
    assert report.verdicts["disk_meets_WF"] is True


def test_entry_time_series() -> None:
    report = _run(
        "lemma_model",
        "entry_time",
        alpha=0.5,
        beta=0.5,
        L_max=4.0,
        points=[[0.3 * s, s, s] for s in (3e-4, 2e-4, 1e-4)],
    )
    assert report.verdicts["entry_time"] is True
    data = report.stage("entry_time").data
    assert data["L_star"] == pytest.approx(1.05)
    rows = report.series["entry_time"].rows
    assert [row[0] for row in rows] == [0, 1, 2]


def test_entry_time_sequence_dimension() -> None:
    with pytest.raises(ConfigError) as exc_info:
        _run("lemma_model", "entry_time", alpha=0.5, beta=0.5, L_max=4.0, sequence={"direction": [1.0, 1.0]})
    assert exc_info.value.field_name == "parameters.sequence.direction"


def test_shrink_probe_on_hopf_cycle() -> None:
    report = _run(
        "hopf:mu=0.5",
        "shrink_probe",
        x=[math.sqrt(0.5), 0.0],
        C=2.0,
        eta=0.5,
        T=1.0,
        r=0.05,
        horizon=8.0,
    )
    assert report.verdicts["shrink_probe"] is True
    assert len(report.series["shrink_probe"].rows) == 8


def test_pipeline_chains_all_stages() -> None:
    report = _run(
        "hopf:mu=0.5",
        "pipeline",
        alpha=0.5,
        eta=0.25,
        beta=0.5,
        L_max=8.0,
        delta=1.0,
        phases=4,
        sequence=LEMMA_SEQUENCE,
    )
    assert [stage.name for stage in report.stages] == [
        "orbit",
        "certify_sink",
        "contracted_point",
        "verify_contracted",
        "uniform_scale",
        "splitting",
        "entry_time",
        "disk_meets_WF",
    ]
    assert all(stage.status == StageStatus.OK for stage in report.stages)
    for name in ("certify_sink", "verify_contracted", "uniform_scale", "splitting"):
        assert report.verdicts[name] is True, name
    assert set(report.series) == {"leg_norms", "domination_ratio", "entry_time"}


def test_identical_runs_give_identical_reports() -> None:
    first = _run("lemma_model", "cone_claim", seed=3, alpha=0.5, T_step=1.0, eps=1e-4, trials=20)
    second = _run("lemma_model", "cone_claim", seed=3, alpha=0.5, T_step=1.0, eps=1e-4, trials=20)
    assert first.model_dump_json() == second.model_dump_json()
    assert first.config["seed"] == 3


def test_pipeline_cone_aperture_is_separate_from_sink_rate() -> None:
    common = dict(alpha=0.5, eta=0.25, beta=0.5, L_max=8.0, delta=1.0, phases=4, sequence=LEMMA_SEQUENCE)
    shared = _run("hopf:mu=0.5", "pipeline", **common)
    assert shared.stage("entry_time").data["alpha"] == 0.5

    report = _run("hopf:mu=0.5", "pipeline", cone_alpha=0.3, **common)
    assert report.verdicts["certify_sink"] is True
    assert report.stage("certify_sink").data["alpha"] == 0.5
    assert report.stage("entry_time").data["alpha"] == 0.3
