"""Compare the four allocators on one congested drop and follow the
set-expansion trace of the joint optimizer.

Run with ``python3 demos/03_joint_allocation.py``.
"""
# %%
import numpy as np

from mbhts.allocators import ALLOCATORS
from mbhts.feasibility import assess
from mbhts.precoding import coupling_matrix, make_precoder
from mbhts.scenario import SystemParams, draw_channel

params = SystemParams()
xi = 650.0  # Mbps per user, enough to congest most ZF drops

# %% Find a congested drop.
for seed in range(100):
    _, channel = draw_channel(params, seed)
    mu = coupling_matrix(channel.H, make_precoder("zf", channel.H, 1.0, params.max_power_w))
    if not assess(mu, 1.0, params.bandwidth_mhz, xi, params.max_power_w).feasible:
        break
print(f"drop {seed} cannot serve all users at {xi:.0f} Mbps with ZF")

# %% Every allocator on the same coupling matrix.
print(f"\n{'method':>12} {'served':>6} {'sum Mbps':>9} {'ms':>7}  powers (W)")
for name, allocate in ALLOCATORS.items():
    res = allocate(mu, params.noise_power, params.bandwidth_mhz, xi, params.max_power_w)
    print(f"{res.method:>12} {res.n_satisfied:>6} {res.sum_rate:9.1f} {res.wall_time_ms:7.2f}  "
          f"{np.array2string(res.powers, precision=1)}")

# %% The joint optimizer's trace: served users never drop, sum rate never rises.
res = ALLOCATORS["jointopt"](mu, 1.0, params.bandwidth_mhz, xi, params.max_power_w)
print("\nround  served  sum Mbps")
for n, q, rate in res.trace:
    print(f"{n:>5}  {q:>6}  {rate:8.1f}")
