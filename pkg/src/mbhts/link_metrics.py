"""SINR, Shannon rate, sum throughput and the demand-satisfied set.

Powers are plain float arrays of length K.  Rates are in Mbps when the
bandwidth is given in MHz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEMAND_TOL",
    "DemandProfile",
    "sinr_targets",
    "sinr",
    "sinr_all",
    "rate",
    "rates",
    "sum_throughput",
    "satisfied_set",
]

# Absolute slack (Mbps) for membership tests after equality-constrained solves.
DEMAND_TOL = 1e-6


def sinr_targets(xi, bandwidth):
    """SINR needed to carry ``xi`` Mbps over ``bandwidth`` MHz."""
    return np.exp2(np.asarray(xi, dtype=float) / bandwidth) - 1.0


@dataclass(frozen=True)
class DemandProfile:
    """Per-user throughput demands in Mbps with their SINR targets."""

    xi: np.ndarray
    bandwidth: float

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if np.any(xi < 0):
            raise ValueError("demands must be non-negative")
        object.__setattr__(self, "xi", xi)

    @classmethod
    def uniform(cls, level, n_users, bandwidth):
        return cls(np.full(n_users, float(level)), bandwidth)

    @property
    def alpha(self):
        return sinr_targets(self.xi, self.bandwidth)


def sinr_all(p, mu, noise_power):
    p = np.asarray(p, dtype=float)
    signal = p * np.diag(mu)
    interference = mu @ p - signal
    return signal / (interference + noise_power)


def sinr(k, p, mu, noise_power):
    p = np.asarray(p, dtype=float)
    signal = p[k] * mu[k, k]
    interference = mu[k] @ p - signal
    return signal / (interference + noise_power)


def rates(p, mu, noise_power, bandwidth):
    return bandwidth * np.log2(1.0 + sinr_all(p, mu, noise_power))


def rate(k, p, mu, noise_power, bandwidth):
    return bandwidth * np.log2(1.0 + sinr(k, p, mu, noise_power))


def sum_throughput(p, mu, noise_power, bandwidth):
    return float(np.sum(rates(p, mu, noise_power, bandwidth)))


def satisfied_set(p, mu, noise_power, bandwidth, xi, tol=DEMAND_TOL):
    """Indices ``k`` whose rate reaches ``xi[k] - tol``, as a frozenset."""
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (mu.shape[0],))
    r = rates(p, mu, noise_power, bandwidth)
    return frozenset(np.flatnonzero(r >= xi - tol).tolist())
