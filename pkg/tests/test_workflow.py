import json

import pytest

from src.config import ExperimentConfig
from src.diagnose_workflow import DiagnosticsWorkflow, run_diagnostics
from src.report import (
    ESTIMATES_HEADER,
    ReportWriteError,
    RunReport,
    compute_deltas,
    emit_report,
    multiplicity_label,
)
from src.estimators import Estimate
from src.workflow import ExperimentWorkflow, run_experiment


def _cfg(tmp_path, **fields) -> ExperimentConfig:
    base = {"process": "iid", "n": 500, "replicates": 40, "tau_prime": [1.0], "seed": 11,
            "output_dir": str(tmp_path / "out"), "num_workers": 1}
    return ExperimentConfig(**{**base, **fields})


@pytest.fixture(scope="module")
def ex61_report(tmp_path_factory):
    cfg = ExperimentConfig(process="ex61", n=400, replicates=30, tau_prime=[1.0, 1.0], seed=3, scale=2.0,
                           epsilon_grid=[1.0, 0.5], n_grid=[100, 200], num_workers=2,
                           output_dir=str(tmp_path_factory.mktemp("ex61")))
    return run_experiment(cfg)


def test_results_do_not_depend_on_worker_count(tmp_path):
    texts = {ExperimentWorkflow(_cfg(tmp_path, num_workers=w)).run().to_json(include_wall_clock=False)
             for w in (1, 4, 8)}
    assert len(texts) == 1


def test_seed_changes_results(tmp_path):
    first = ExperimentWorkflow(_cfg(tmp_path, seed=1)).run()
    second = ExperimentWorkflow(_cfg(tmp_path, seed=2)).run()
    assert first.estimates.nu_hat != second.estimates.nu_hat


def test_draw_count(tmp_path):
    report = ExperimentWorkflow(_cfg(tmp_path, process="ex61", tau_prime=[1.0, 1.0])).run()
    assert report.draws == 40 * (500 + 1 + 1 + 3)
    assert report.replicates == 40


def test_config_echo_omits_execution_fields(tmp_path):
    report = ExperimentWorkflow(_cfg(tmp_path)).run()
    assert "num_workers" not in report.config
    assert "output_dir" not in report.config
    assert report.config["seed"] == 11
    assert report.wall_clock.num_workers == 1


def test_iid_run_files(tmp_path):
    report, written = run_experiment(_cfg(tmp_path))
    names = sorted(path.name for path in written)
    assert names == sorted([
        "report.json", "estimates.csv", "multiplicity.csv", "cluster_sizes.csv",
        "cluster_sizes_1.csv", "projected_1.csv", "diagnostics.csv",
    ])
    out = tmp_path / "out"
    assert (out / "estimates.csv").read_text().splitlines()[0] == "estimator,value,std_error,event_count,target,delta"
    assert (out / "multiplicity.csv").read_text().splitlines()[0] == "count_vector,frequency,block_count"
    assert (out / "diagnostics.csv").read_text().splitlines()[0] == "statistic,grid_kind,x,value,std_error,hint"
    loaded = RunReport.from_json((out / "report.json").read_text())
    assert loaded.to_json() == report.to_json()
    assert report.decomposition is None
    assert report.targets["eta_runs"] == 1.0
    assert report.exact_rates["nu_1"] == pytest.approx(1.0 - 1 / 500)


def test_estimates_csv_lists_every_label(tmp_path):
    report, _ = run_experiment(_cfg(tmp_path))
    lines = (tmp_path / "out" / "estimates.csv").read_text().splitlines()
    labels = {line.split(",")[0] for line in lines[1:]}
    assert {"eta_runs", "eta_marginal_1", "phi_hat", "nu_hat_1", "mean_cluster_size"} <= labels
    assert len(lines[0].split(",")) == len(ESTIMATES_HEADER)


def test_custom_process_has_no_targets(tmp_path):
    report = ExperimentWorkflow(_cfg(tmp_path, process="custom", lags=[[0, 1]], name="pair")).run()
    assert report.targets == {}
    assert report.deltas == {}
    assert report.rates.nu_union is None
    assert report.estimates.theta_direct is not None


def test_ex61_run_carries_diagnostics(ex61_report):
    report, written = ex61_report
    statistics = [condition.statistic for condition in report.conditions]
    assert statistics == ["h_sum", "h_sum_both", "h_sum_terms3", "local_osc", "local_osc_1", "local_osc_2"]
    assert report.scaling.c == 2.0
    assert report.continuity.epsilon_grid == [1.0, 0.5]
    assert [projection.margin for projection in report.projections] == [1, 2]
    names = {path.name for path in written}
    assert {"plot_h_sum.csv", "plot_h_sum_first_term.csv", "plot_continuity_eta.csv", "cluster_sizes_2.csv",
            "projected_2.csv"} <= names
    assert (written[0].parent / "plot_h_sum.csv").read_text().splitlines()[0] == "x,y,std_error"


def test_ex61_deltas_cover_targets(ex61_report):
    report, _ = ex61_report
    assert report.targets["eta_runs"] == pytest.approx(1 / 3)
    assert "multiplicity[2;1]" in report.deltas
    for label, delta in report.deltas.items():
        assert delta >= 0.0, label


def test_compute_deltas():
    observed = {"eta_runs": Estimate(value=0.4), "phi_hat": Estimate(flag="undefined")}
    targets = {"eta_runs": 0.5, "phi_hat": 0.1, multiplicity_label((2, 0)): 0.25, "alpha_empty": 1.0}
    deltas = compute_deltas(observed, targets)
    assert deltas == pytest.approx({"eta_runs": 0.1, "multiplicity[2;0]": 0.25})


def test_emit_report_errors(tmp_path):
    report = ExperimentWorkflow(_cfg(tmp_path, replicates=5)).run()
    with pytest.raises(ValueError, match="format"):
        emit_report(report, ["xml"], tmp_path)
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(ReportWriteError) as info:
        emit_report(report, ["json"], blocker / "sub")
    assert "blocker" in info.value.path


def test_emit_report_json_only(tmp_path):
    report = ExperimentWorkflow(_cfg(tmp_path, replicates=5)).run()
    written = emit_report(report, ["json"], tmp_path / "json-only")
    assert [path.name for path in written] == ["report.json"]
    assert json.loads(written[0].read_text())["replicates"] == 5


def test_diagnostics_workflow(tmp_path):
    cfg = _cfg(tmp_path, process="ex62", tau_prime=[1.0, 2.0], replicates=20, n_grid=[100, 400],
               epsilon_grid=[1.0, 0.5])
    report, written = run_diagnostics(cfg)
    assert report.conditions[0].grid == [100, 400]
    assert report.continuity is not None
    assert {path.name for path in written} >= {"diagnostics.json", "diagnostics.csv", "plot_local_osc.csv"}


def test_continuity_is_skipped_for_one_margin(tmp_path):
    workflow = DiagnosticsWorkflow(_cfg(tmp_path, epsilon_grid=[1.0, 0.5]))
    assert workflow.continuity() is None
    assert workflow.conditions() == []
    assert workflow.scaling() is None
    assert workflow.shift() is None


def test_diagnostics_report_carries_shift_check(tmp_path):
    cfg = _cfg(tmp_path, process="ex61", tau_prime=[5.0, 5.0], n=100, replicates=50, shift=20)
    report, written = run_diagnostics(cfg)
    assert report.shift.shift == 20
    assert abs(report.shift.difference) <= 4 * report.shift.std_error + 1e-12
    data = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
    assert data["shift"]["shift"] == 20
    assert "decomposition" not in data
    assert "combination_gap" not in data
    rows = (tmp_path / "out" / "diagnostics.csv").read_text().splitlines()
    assert sum(row.startswith("shift_") for row in rows) == 3


def test_shift_must_fit_in_window(tmp_path):
    with pytest.raises(ValueError, match="shift"):
        _cfg(tmp_path, n=50, shift=49)
