"""Monte Carlo campaigns comparing the allocators on paired drops.

Every trial draws one user layout and channel from ``base_seed + trial``
and runs every (precoder, demand level, method) combination on it, so
per-trial comparisons between methods and across demand levels are
meaningful.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .allocators import ALLOCATORS
from .errors import InvalidConfigurationError, MbhtsError
from .precoding import coupling_matrix, make_precoder
from .scenario import SystemParams, draw_channel

__all__ = [
    "METHOD_NAMES",
    "TrialRecord",
    "MetricsRow",
    "CampaignConfig",
    "run_trial",
    "run_campaign",
    "aggregate",
    "check_invariants",
    "emit_csv",
    "emit_trace_csv",
    "read_metrics_csv",
]

METHOD_NAMES = {
    "jointopt": "JointOpt",
    "satisset": "SatisSetOpt",
    "sumopt": "SumOpt",
    "equal": "EqualPower",
    "learned": "Learned",
}
METRIC_COLUMNS = ("method", "precoder", "xi_mbps", "congestion_prob", "satisfaction_prob",
                  "sum_mbps", "time_ms", "trials", "failed")
TRACE_COLUMNS = ("trial", "seed", "method", "precoder", "xi_mbps", "n_satisfied", "congested",
                 "sum_mbps", "time_ms", "failed")


@dataclass
class TrialRecord:
    trial: int
    seed: int
    method: str
    precoder: str
    xi: float
    n_satisfied: int
    n_users: int
    sum_mbps: float
    time_ms: float
    failed: bool = False
    error: str = ""

    @property
    def congested(self):
        return self.n_satisfied < self.n_users


@dataclass
class MetricsRow:
    method: str
    precoder: str
    xi: float
    congestion_prob: float
    satisfaction_prob: float
    sum_mbps: float
    time_ms: float
    trials: int
    failed: int


@dataclass
class CampaignConfig:
    params: SystemParams = field(default_factory=SystemParams)
    n_trials: int = 500
    xi_levels: tuple = (100.0, 250.0, 400.0, 500.0, 650.0, 800.0)
    methods: tuple = ("jointopt", "satisset", "sumopt", "equal")
    precoders: tuple = ("zf", "rzf")
    base_seed: int = 0
    # precoder or (precoder, xi) -> LearnedAllocator; combinations without a model are skipped
    learned: dict = field(default_factory=dict)
    n_jobs: int = 1

    def validate(self):
        if self.n_trials < 1:
            raise InvalidConfigurationError("need at least one trial")
        unknown = set(self.methods) - set(METHOD_NAMES)
        if unknown:
            raise InvalidConfigurationError(f"unknown methods {sorted(unknown)}")
        if "learned" in self.methods and not any(
                self._learned_for(p, x) for p in self.precoders for x in self.xi_levels):
            raise InvalidConfigurationError("method 'learned' needs at least one model")
        self.params.validate()
        return self

    def _learned_for(self, precoder, xi):
        return self.learned.get((precoder, float(xi)), self.learned.get(precoder))


def _run_method(method, channel, mu, precoder, params, xi, config):
    args = (mu, params.noise_power, params.bandwidth_mhz, xi, params.max_power_w)
    if method == "learned":
        return config._learned_for(precoder, xi).allocate(channel, *args)
    return ALLOCATORS[method](*args)


def _coupling(channel, params, precoder):
    W = make_precoder(precoder, channel.H, params.noise_power, params.max_power_w)
    return coupling_matrix(channel.H, W)


def _trial_records(trial, config):
    """All records for one drop: precoders x demand levels x methods."""
    params = config.params
    seed = config.base_seed + trial
    _, channel = draw_channel(params, seed)
    records = []
    for precoder in config.precoders:
        try:
            mu = _coupling(channel, params, precoder)
        except MbhtsError as exc:
            mu, precoder_error = None, exc
        for xi in config.xi_levels:
            for method in config.methods:
                # A model trained for one precoder says nothing about another.
                if method == "learned" and config._learned_for(precoder, xi) is None:
                    continue
                name = METHOD_NAMES[method]
                if mu is None:
                    records.append(TrialRecord(trial, seed, name, precoder, float(xi), 0,
                                               params.n_users, 0.0, 0.0, True, str(precoder_error)))
                    continue
                try:
                    res = _run_method(method, channel, mu, precoder, params, float(xi), config)
                except MbhtsError as exc:
                    records.append(TrialRecord(trial, seed, name, precoder, float(xi), 0,
                                               params.n_users, 0.0, 0.0, True, str(exc)))
                    continue
                records.append(TrialRecord(trial, seed, name, precoder, float(xi),
                                           res.n_satisfied, params.n_users, res.sum_rate,
                                           res.wall_time_ms))
    return records


def run_trial(config, seed, method, precoder, xi=None):
    """One allocator on one drop; ``xi`` defaults to the first configured level."""
    xi = config.xi_levels[0] if xi is None else xi
    single = CampaignConfig(config.params, 1, (float(xi),), (method,), (precoder,),
                            seed, config.learned)
    single.validate()
    return _trial_records(0, single)[0]


def _run_chunk(args):
    trials, config = args
    out = []
    for t in trials:
        out.extend(_trial_records(t, config))
    return out


def run_campaign(config):
    """Run every trial and return ``(metrics_rows, records)``.

    With ``n_jobs > 1`` trials are spread over worker processes; records
    come back in trial order either way.
    """
    config.validate()
    trials = list(range(config.n_trials))
    if config.n_jobs > 1:
        chunks = [trials[i::config.n_jobs] for i in range(config.n_jobs)]
        with ProcessPoolExecutor(config.n_jobs) as pool:
            parts = list(pool.map(_run_chunk, [(c, config) for c in chunks]))
        records = sorted((r for part in parts for r in part),
                         key=lambda r: (r.trial, config.precoders.index(r.precoder),
                                        config.xi_levels.index(r.xi)))
    else:
        records = _run_chunk((trials, config))
    return aggregate(records, config), records


def aggregate(records, config=None):
    """Metrics per (method, precoder, demand level); failed trials are counted, not averaged."""
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.precoder, r.xi), []).append(r)
    if config is not None:
        order = {(METHOD_NAMES[m], p, float(x)): (i, j, k)
                 for i, m in enumerate(config.methods)
                 for j, p in enumerate(config.precoders)
                 for k, x in enumerate(config.xi_levels)}
        keys = sorted(groups, key=lambda key: order[key])
    else:
        keys = list(groups)
    rows = []
    for key in keys:
        group = groups[key]
        ok = [r for r in group if not r.failed]
        if ok:
            K = ok[0].n_users
            n_sat = np.array([r.n_satisfied for r in ok], dtype=float)
            rows.append(MetricsRow(*key, float(np.mean(n_sat < K)), float(n_sat.mean() / K),
                                   float(np.mean([r.sum_mbps for r in ok])),
                                   float(np.mean([r.time_ms for r in ok])),
                                   len(group), len(group) - len(ok)))
        else:
            nan = math.nan
            rows.append(MetricsRow(*key, nan, nan, nan, nan, len(group), len(group)))
    return rows


def check_invariants(records, rows=None, rel_tol=1e-9):
    """Messages for every violated campaign invariant (empty when all hold).

    Per trial: JointOpt satisfies at least as many users as SumOpt while
    SumOpt's sum rate is at least JointOpt's.  Per method over the demand
    sweep: congestion never falls and satisfaction never rises as demands
    grow; the demand-blind baselines keep a constant mean sum rate.
    """
    problems = []
    index = {(r.trial, r.method, r.precoder, r.xi): r for r in records if not r.failed}
    for (trial, method, precoder, xi), joint in index.items():
        if method != "JointOpt":
            continue
        base = index.get((trial, "SumOpt", precoder, xi))
        if base is None:
            continue
        if joint.n_satisfied < base.n_satisfied:
            problems.append(f"trial {trial} {precoder} xi={xi}: |Q| JointOpt "
                            f"{joint.n_satisfied} < SumOpt {base.n_satisfied}")
        if joint.sum_mbps > base.sum_mbps * (1 + rel_tol):
            problems.append(f"trial {trial} {precoder} xi={xi}: sum rate JointOpt "
                            f"{joint.sum_mbps:.6f} > SumOpt {base.sum_mbps:.6f}")
    if rows is not None:
        series = {}
        for row in rows:
            series.setdefault((row.method, row.precoder), []).append(row)
        for (method, precoder), seq in series.items():
            seq = sorted(seq, key=lambda r: r.xi)
            for a, b in zip(seq, seq[1:]):
                if b.congestion_prob < a.congestion_prob:
                    problems.append(f"{method}/{precoder}: congestion falls from xi={a.xi} to {b.xi}")
                if b.satisfaction_prob > a.satisfaction_prob:
                    problems.append(f"{method}/{precoder}: satisfaction rises from xi={a.xi} to {b.xi}")
            if method in ("SumOpt", "EqualPower") and seq:
                ref = seq[0].sum_mbps
                if any(abs(r.sum_mbps - ref) > rel_tol * abs(ref) for r in seq):
                    problems.append(f"{method}/{precoder}: mean sum rate varies with xi")
    return problems


def _fmt(value, digits):
    return "nan" if value != value else f"{value:.{digits}f}"


def emit_csv(rows, path, timing=True):
    """Write the metrics table.  With ``timing=False`` the time column is left
    blank so repeated seeded runs give byte-identical files."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for r in rows:
            writer.writerow([r.method, r.precoder, _fmt(r.xi, 1), _fmt(r.congestion_prob, 6),
                             _fmt(r.satisfaction_prob, 6), _fmt(r.sum_mbps, 6),
                             _fmt(r.time_ms, 6) if timing else "", r.trials, r.failed])


def emit_trace_csv(records, path, timing=True):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow([r.trial, r.seed, r.method, r.precoder, _fmt(r.xi, 1), r.n_satisfied,
                             int(r.congested), _fmt(r.sum_mbps, 6),
                             _fmt(r.time_ms, 6) if timing else "", int(r.failed)])


def read_metrics_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def records_as_dicts(records):
    return [asdict(r) for r in records]
