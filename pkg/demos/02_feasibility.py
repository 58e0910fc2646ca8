"""When can every demand be met?  Spectral radius, minimal powers and the
power lower bound as the per-user demand grows.

Run with ``python3 demos/02_feasibility.py``.
"""
# %%
import numpy as np

from mbhts.feasibility import assess
from mbhts.link_metrics import rates
from mbhts.precoding import coupling_matrix, make_precoder
from mbhts.scenario import SystemParams, draw_channel

params = SystemParams()
_, channel = draw_channel(params, seed=3)

# %% Sweep the common demand for both precoders.
print(f"budget {params.max_power_w:.1f} W")
print(f"{'precoder':>8} {'xi':>6} {'radius':>8} {'required W':>11} {'bound W':>9} feasible")
for method in ("zf", "rzf"):
    W = make_precoder(method, channel.H, params.noise_power, params.max_power_w)
    mu = coupling_matrix(channel.H, W)
    for xi in (250, 500, 650, 800, 1000):
        rep = assess(mu, params.noise_power, params.bandwidth_mhz, xi, params.max_power_w)
        print(f"{method:>8} {xi:>6} {rep.spectral_radius:8.4f} {rep.required_power:11.2f} "
              f"{rep.power_lower_bound:9.2f} {rep.feasible}")

# %% At the minimal powers every user gets exactly its demand.
mu = coupling_matrix(channel.H, make_precoder("rzf", channel.H, 1.0, params.max_power_w))
rep = assess(mu, 1.0, params.bandwidth_mhz, 500.0, params.max_power_w)
print("\nminimal powers (W):", np.round(rep.minimal_powers, 3))
print("rates at minimal powers (Mbps):", np.round(rates(rep.minimal_powers, mu, 1.0, 500.0), 9))
