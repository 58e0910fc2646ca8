"""Train the network surrogate on JointOpt labels and compare it with the
model-based solver on held-out drops.

Run with ``python3 demos/04_learned_allocator.py [n_train] [n_test]``
(defaults 2000 / 400; about ten seconds).
"""
# %%
import sys
import time

import numpy as np

from mbhts.learned import build_dataset, fit_allocator
from mbhts.link_metrics import satisfied_set
from mbhts.scenario import SystemParams, draw_channel

n_train = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
n_test = int(sys.argv[2]) if len(sys.argv) > 2 else 400
params = SystemParams()

# %% Label drops with JointOpt (RZF, 500 Mbps) and fit.
start = time.perf_counter()
data = build_dataset(n_train, n_test, params, seed=0, xi=500.0, precoder="rzf")
print(f"labelled {n_train + n_test} drops in {time.perf_counter() - start:.1f} s")
allocator, history = fit_allocator(data, seed=0)
val = history["validation"]
print(f"{len(val) - 1} epochs, test MSE {val[0]:.4f} -> {min(val):.4f}")

# %% Score on the held-out drops.
served_net, served_label, ms = [], [], []
for i, mu in enumerate(data.test_mu):
    _, channel = draw_channel(params, n_train + i)
    res = allocator.allocate(channel, mu, 1.0, params.bandwidth_mhz, 500.0, params.max_power_w)
    served_net.append(res.n_satisfied)
    served_label.append(len(satisfied_set(data.p_test[i], mu, 1.0, params.bandwidth_mhz, 500.0)))
    ms.append(res.wall_time_ms)
print(f"served users per drop: network {np.mean(served_net):.2f}, JointOpt {np.mean(served_label):.2f}")
print(f"time per drop: network {np.mean(ms):.3f} ms, JointOpt {np.mean(data.test_label_ms):.3f} ms")
