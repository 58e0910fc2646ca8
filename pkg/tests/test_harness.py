import numpy as np
import pytest

from mbhts.errors import InvalidConfigurationError
from mbhts.harness import (CampaignConfig, MetricsRow, TrialRecord, aggregate, check_invariants,
                           emit_csv, emit_trace_csv, read_metrics_csv, run_campaign, run_trial)
from mbhts.learned import LearnedAllocator, MlpModel, NormStats
from mbhts.scenario import SystemParams


@pytest.fixture(scope="module")
def campaign():
    config = CampaignConfig(n_trials=12, xi_levels=(100.0, 500.0, 800.0), base_seed=3)
    rows, records = run_campaign(config)
    return config, rows, records


def test_equal_power_trial_at_default_budget():
    config = CampaignConfig(xi_levels=(500.0,))
    rec = run_trial(config, seed=4, method="equal", precoder="rzf")
    assert rec.method == "EqualPower" and rec.n_users == 7
    assert 10 * np.log10(config.params.max_power_w / 7) == pytest.approx(14.92, abs=0.005)


@pytest.mark.parametrize("method", ["jointopt", "satisset", "sumopt", "equal"])
def test_zero_demand_never_congested(method):
    rec = run_trial(CampaignConfig(xi_levels=(0.0,)), seed=2, method=method, precoder="zf")
    assert rec.n_satisfied == 7 and not rec.congested


def test_trials_are_reproducible():
    config = CampaignConfig(xi_levels=(500.0,))
    a = run_trial(config, 9, "jointopt", "rzf")
    b = run_trial(config, 9, "jointopt", "rzf")
    assert (a.n_satisfied, a.sum_mbps, a.seed) == (b.n_satisfied, b.sum_mbps, b.seed)


def test_campaign_pairs_and_orders(campaign):
    config, rows, records = campaign
    assert len(records) == 12 * 2 * 3 * 4
    assert {r.seed for r in records} == set(range(3, 15))
    assert [(r.method, r.precoder, r.xi) for r in rows[:3]] == [
        ("JointOpt", "zf", 100.0), ("JointOpt", "zf", 500.0), ("JointOpt", "zf", 800.0)]


def test_metrics_definitions(campaign):
    _, rows, records = campaign
    for row in rows:
        group = [r for r in records if (r.method, r.precoder, r.xi) == (row.method, row.precoder, row.xi)]
        assert row.trials == len(group) == 12
        assert row.satisfaction_prob == pytest.approx(np.mean([r.n_satisfied for r in group]) / 7, rel=1e-15)
        assert row.congestion_prob == np.mean([r.congested for r in group])
        assert 0 <= row.congestion_prob <= 1 and 0 <= row.satisfaction_prob <= 1


def test_campaign_invariants_hold(campaign):
    _, rows, records = campaign
    assert check_invariants(records, rows) == []


def test_invariant_checker_flags_dominance_break():
    recs = [TrialRecord(0, 0, "JointOpt", "zf", 500.0, 3, 7, 100.0, 1.0),
            TrialRecord(0, 0, "SumOpt", "zf", 500.0, 4, 7, 90.0, 1.0)]
    problems = check_invariants(recs)
    assert len(problems) == 2


def test_invariant_checker_flags_trend_break():
    rows = [MetricsRow("SumOpt", "zf", 100.0, 0.5, 0.8, 10.0, 0.0, 5, 0),
            MetricsRow("SumOpt", "zf", 500.0, 0.4, 0.9, 11.0, 0.0, 5, 0)]
    assert len(check_invariants([], rows)) == 3


def test_all_satisfied_aggregate():
    recs = [TrialRecord(t, t, "JointOpt", "rzf", 0.0, 7, 7, 5000.0, 1.0) for t in range(4)]
    (row,) = aggregate(recs)
    assert row.congestion_prob == 0.0 and row.satisfaction_prob == 1.0


def test_failed_trials_counted_not_averaged():
    recs = [TrialRecord(0, 0, "SumOpt", "zf", 0.0, 7, 7, 10.0, 1.0),
            TrialRecord(1, 1, "SumOpt", "zf", 0.0, 0, 7, 0.0, 0.0, failed=True, error="boom")]
    (row,) = aggregate(recs)
    assert row.trials == 2 and row.failed == 1 and row.sum_mbps == 10.0


def test_singular_zf_becomes_failed_record():
    # two users at the same spot give identical channel columns
    params = SystemParams(n_beams=2, n_users=2, beam_center_spacing_deg=1e-12)
    rec = run_trial(CampaignConfig(params=params, xi_levels=(100.0,)), 0, "sumopt", "zf")
    assert rec.failed and "singular" in rec.error


def test_config_validation():
    with pytest.raises(InvalidConfigurationError):
        CampaignConfig(n_trials=0).validate()
    with pytest.raises(InvalidConfigurationError):
        CampaignConfig(methods=("magic",)).validate()
    with pytest.raises(InvalidConfigurationError):
        CampaignConfig(methods=("learned",)).validate()


def test_learned_only_for_modelled_precoders():
    model = LearnedAllocator(MlpModel.for_system(7, 7), NormStats(
        np.zeros(49), np.ones(49), np.zeros(7), np.ones(7)), 500.0, "rzf")
    config = CampaignConfig(n_trials=2, xi_levels=(500.0,), methods=("learned",),
                            learned={"rzf": model})
    _, records = run_campaign(config)
    assert {r.precoder for r in records} == {"rzf"} and len(records) == 2


def test_empty_table_is_header_only(tmp_path):
    path = tmp_path / "m.csv"
    emit_csv([], path)
    assert path.read_text().splitlines() == [
        "method,precoder,xi_mbps,congestion_prob,satisfaction_prob,sum_mbps,time_ms,trials,failed"]


def test_row_round_trip(tmp_path):
    row = MetricsRow("JointOpt", "rzf", 250.0, 0.0125, 0.99857142857, 5542.123456789, 19.26, 500, 0)
    path = tmp_path / "m.csv"
    emit_csv([row], path)
    (back,) = read_metrics_csv(path)
    assert back == {"method": "JointOpt", "precoder": "rzf", "xi_mbps": "250.0",
                    "congestion_prob": "0.012500", "satisfaction_prob": "0.998571",
                    "sum_mbps": "5542.123457", "time_ms": "19.260000", "trials": "500",
                    "failed": "0"}


def test_timing_column_blank_when_disabled(tmp_path):
    row = MetricsRow("SumOpt", "zf", 500.0, 0.5, 0.5, 1.0, 3.3, 1, 0)
    path = tmp_path / "m.csv"
    emit_csv([row], path, timing=False)
    assert read_metrics_csv(path)[0]["time_ms"] == ""


def test_trace_csv(tmp_path, campaign):
    _, _, records = campaign
    path = tmp_path / "trace.csv"
    emit_trace_csv(records, path, timing=False)
    lines = path.read_text().splitlines()
    assert len(lines) == len(records) + 1
    assert lines[0].startswith("trial,seed,method,precoder,xi_mbps,n_satisfied,congested")


def test_parallel_matches_serial():
    config = CampaignConfig(n_trials=4, xi_levels=(250.0, 650.0), methods=("jointopt", "equal"))
    serial_rows, serial = run_campaign(config)
    config.n_jobs = 2
    par_rows, parallel = run_campaign(config)
    key = lambda r: (r.trial, r.method, r.precoder, r.xi, r.n_satisfied, r.sum_mbps)
    assert sorted(map(key, serial)) == sorted(map(key, parallel))
    strip = lambda rows: [(r.method, r.precoder, r.xi, r.congestion_prob, r.sum_mbps) for r in rows]
    assert strip(serial_rows) == strip(par_rows)
