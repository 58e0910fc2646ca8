"""Congestion test: can every user be served at its demand within the budget?

With ``alpha`` the SINR targets and ``mu`` the coupling matrix, demand
``k`` is met with equality when ``p = R @ Q @ p + nu`` where
``R = diag(alpha / ((alpha + 1) * diag(mu)))``, ``Q = mu`` and
``nu = alpha * noise / ((alpha + 1) * diag(mu))``.  A non-negative solution
exists iff the Perron root of ``RQ`` is below one, and it is then the
componentwise-smallest power vector meeting all demands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError, DegenerateChannelError, MbhtsError
from .link_metrics import sinr_targets

__all__ = [
    "FeasibilityReport",
    "qos_to_sinr_targets",
    "build_R_nu",
    "spectral_radius",
    "check_feasibility",
    "power_lower_bound",
    "assess",
]

# Radii in [1 - BOUNDARY_TOL, 1) count as infeasible: the required power diverges.
BOUNDARY_TOL = 1e-10


@dataclass
class FeasibilityReport:
    spectral_radius: float
    required_power: float
    feasible: bool
    minimal_powers: Optional[np.ndarray]
    power_lower_bound: float

    def as_dict(self):
        return {
            "spectral_radius": self.spectral_radius,
            "required_power": self.required_power,
            "feasible": self.feasible,
            "minimal_powers": None if self.minimal_powers is None else self.minimal_powers.tolist(),
            "power_lower_bound": self.power_lower_bound,
        }


def qos_to_sinr_targets(xi, bandwidth):
    """``alpha_k = 2**(xi_k / B) - 1``."""
    return sinr_targets(xi, bandwidth)


def build_R_nu(alpha, mu, noise_power):
    """Diagonal scaling matrix ``R`` and noise vector ``nu``.

    Raises
    ------
    DegenerateChannelError
        If some user has zero effective gain ``mu[k, k]``.
    """
    alpha = np.asarray(alpha, dtype=float)
    gain = np.diag(mu).astype(float)
    if np.any(gain <= 0):
        bad = np.flatnonzero(gain <= 0).tolist()
        raise DegenerateChannelError(f"users {bad} have zero effective gain")
    r = alpha / ((alpha + 1.0) * gain)
    return np.diag(r), r * noise_power


def spectral_radius(M, tol=1e-10, max_iter=100_000):
    """Perron root of a non-negative matrix by accelerated power iteration.

    The iterate ``x`` stays strictly positive, so ``min(Mx / x)`` and
    ``max(Mx / x)`` bracket the root (Collatz-Wielandt).  Iteration stops
    once the bracket is tighter than ``tol`` relative, or once the upper
    bound stops moving, which is what happens for reducible matrices where
    the lower bound sits on a non-dominant block.  Nilpotent matrices
    (acyclic sparsity graph) are detected exactly and return 0.

    The iteration runs on ``A = M - min(diag M) I + s I`` with ``s`` the
    largest off-diagonal row sum: still non-negative with the same Perron
    vector, but with the shared diagonal removed, so equal SINR targets
    (which make every diagonal entry of RQ equal) do not cluster the
    spectrum.  ``A`` is squared between checks, so check ``m`` applies
    ``2**m`` plain iterations; ``max_iter`` bounds that equivalent count.
    """
    M = np.asarray(M, dtype=float)
    if np.any(M < 0):
        raise ValueError("spectral_radius expects a non-negative matrix")
    if not M.any():
        return 0.0
    diag = np.diag(M)
    off_rows = M.sum(axis=1) - diag
    shift = off_rows.max() if off_rows.max() > 0 else np.abs(M).max()
    A = M + (shift - diag.min()) * np.eye(M.shape[0])
    A /= A.max()
    if not M.any(axis=1).all() and _nilpotent(M):
        return 0.0
    x = np.ones(M.shape[0])
    tiny = np.finfo(float).tiny
    upper_prev = np.inf
    steps = 1
    while True:
        ratios = (M @ x) / x
        lower, upper = ratios.min(), ratios.max()
        if upper - lower <= tol * upper:
            return float(0.5 * (upper + lower))
        if upper_prev - upper <= 1e-3 * tol * upper:
            return float(upper)
        if steps > max_iter:
            break
        upper_prev = upper
        x = A @ x
        x = np.maximum(x / x.max(), tiny)
        A = A @ A
        A /= A.max()
        steps *= 2
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps "
        f"(bracket [{lower:.6g}, {upper:.6g}])", last_iterate=x)


def _nilpotent(M):
    """True when the sparsity pattern has no cycle, i.e. ``M**K == 0``."""
    P = (M > 0).astype(float)
    power = 1
    while power < M.shape[0]:
        P = np.minimum(P @ P, 1.0)
        power *= 2
    return not P.any()


def power_lower_bound(R, Qmat, nu):
    """``sum(nu) / ||I - RQ||_2``, a lower bound on the total power any demand-meeting allocation uses."""
    A = np.eye(len(nu)) - R @ Qmat
    return float(np.sum(nu) / np.linalg.norm(A, 2))


def check_feasibility(R, Qmat, nu, max_power):
    """Evaluate the spectral-radius and total-power conditions.

    ``minimal_powers`` is filled in whenever the radius is below one, even
    if the budget is then exceeded.
    """
    M = R @ Qmat
    rho = spectral_radius(M)
    bound = power_lower_bound(R, Qmat, nu)
    if rho >= 1.0 - BOUNDARY_TOL:
        return FeasibilityReport(rho, float("inf"), False, None, bound)
    try:
        p = np.linalg.solve(np.eye(len(nu)) - M, nu)
    except np.linalg.LinAlgError as exc:
        raise MbhtsError(f"linear solve failed with spectral radius {rho}") from exc
    if not np.all(np.isfinite(p)):
        raise MbhtsError(f"non-finite minimal powers with spectral radius {rho}")
    # Neumann series guarantees p >= 0; clip only round-off.
    p = np.maximum(p, 0.0)
    required = float(p.sum())
    return FeasibilityReport(rho, required, required <= max_power, p, bound)


def assess(mu, noise_power, bandwidth, xi, max_power):
    """Feasibility report straight from coupling matrix and demands."""
    alpha = qos_to_sinr_targets(xi, bandwidth)
    alpha = np.broadcast_to(alpha, (mu.shape[0],))
    R, nu = build_R_nu(alpha, mu, noise_power)
    return check_feasibility(R, mu, nu, max_power)
