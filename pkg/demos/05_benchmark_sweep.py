"""Monte Carlo sweep over the demand level with paired drops, as the
``mbhts bench`` command runs it, printed as a small table.

Run with ``python3 demos/05_benchmark_sweep.py [trials]`` (default 100).
"""
# %%
import sys

from mbhts.harness import CampaignConfig, check_invariants, run_campaign

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 100
config = CampaignConfig(n_trials=trials, xi_levels=(100.0, 250.0, 400.0, 500.0, 650.0, 800.0))
rows, records = run_campaign(config)

# %% Congestion probability per method and demand level.
for precoder in config.precoders:
    print(f"\n{precoder.upper()}: congestion probability / mean sum Mbps")
    print(f"{'xi':>6}" + "".join(f"{m:>22}" for m in ("JointOpt", "SatisSetOpt", "SumOpt", "EqualPower")))
    for xi in config.xi_levels:
        cells = [r for r in rows if r.precoder == precoder and r.xi == xi]
        print(f"{xi:6.0f}" + "".join(f"{r.congestion_prob:12.3f} {r.sum_mbps:8.0f}" + " " for r in cells))

# %% Paired-trial and trend invariants.
problems = check_invariants(records, rows)
print(f"\n{len(records)} runs, invariant violations: {len(problems)}")
