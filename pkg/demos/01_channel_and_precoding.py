"""Drop users under a 7-beam cluster, build the channel and look at the
coupling each precoder leaves between users.

Run with ``python3 demos/01_channel_and_precoding.py``.
"""
# %%
import numpy as np

from mbhts.precoding import coupling_matrix, make_precoder
from mbhts.scenario import SystemParams, beam_centers, draw_channel

params = SystemParams()
print("beam centres (deg off nadir):")
print(np.round(beam_centers(params.n_beams, params.beam_center_spacing_deg), 3))

# %% One seeded drop: layout plus complex channel H (feeds x users).
layout, channel = draw_channel(params, seed=7)
print("\nslant ranges (km):", np.round(layout.slant_range_km, 1))
print("offset of each user from its own beam (deg):", np.round(np.diag(layout.offsets_deg), 3))
print("channel magnitudes, own beam vs strongest other beam:")
own = np.diag(channel.amplitude)
other = np.max(channel.amplitude - np.diag(own), axis=0)
print(np.round(np.column_stack((own, other)), 2))

# %% ZF removes inter-user coupling exactly; RZF trades a little leakage for gain.
for method in ("zf", "rzf"):
    W = make_precoder(method, channel.H, params.noise_power, params.max_power_w)
    mu = coupling_matrix(channel.H, W)
    leak = (mu - np.diag(np.diag(mu))).sum(axis=1) / np.diag(mu)
    print(f"\n{method}: useful gain per user {np.round(np.diag(mu), 2)}")
    print(f"{method}: total leakage / useful gain {np.array2string(leak, precision=2)}")
