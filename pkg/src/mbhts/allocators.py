"""Power allocators: water-filling sum-rate, demand-pinned reallocation,
the joint set-expansion algorithm and the benchmark baselines.

All solvers share the call shape ``(mu, noise_power, bandwidth, xi,
max_power)`` through :data:`ALLOCATORS` so the campaign runner can treat
them uniformly.  Demands ``xi`` are in Mbps, the bandwidth in MHz.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import InvalidConfigurationError, ReallocationInfeasibleError
from .feasibility import BOUNDARY_TOL, assess, build_R_nu, spectral_radius
from .link_metrics import DEMAND_TOL, rates, satisfied_set, sinr_targets

__all__ = [
    "AllocationResult",
    "waterfill",
    "sum_rate_allocate",
    "demand_constrained_reallocate",
    "joint_optimize",
    "satisset_optimize",
    "sum_opt",
    "equal_power",
    "ALLOCATORS",
]

POWER_TOL = 1e-6  # relative to max_power
MAX_ROUNDS = 50


@dataclass
class AllocationResult:
    powers: np.ndarray
    satisfied: frozenset
    rates: np.ndarray
    method: str
    iterations: int = 0
    trace: list = field(default_factory=list)  # (n, |Q|, sum rate) per iteration
    wall_time_ms: float = 0.0

    @property
    def sum_rate(self):
        return float(np.sum(self.rates))

    @property
    def n_satisfied(self):
        return len(self.satisfied)


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        result.wall_time_ms = 1e3 * (time.perf_counter() - start)
        return result
    return wrapper


# -- water-filling ------------------------------------------------------------

def _waterfill_inverse(inverse_gains, budget):
    """Water-fill ``budget`` over channels with the given floor levels.

    Channels are visited by floor level ascending (stable, so ties keep
    index order) and the largest active prefix whose common level clears
    its own highest floor is kept.
    """
    inv = np.asarray(inverse_gains, dtype=float)
    p = np.zeros_like(inv)
    if budget <= 0 or inv.size == 0:
        return p
    order = np.argsort(inv, kind="stable")
    floors = inv[order]
    levels = (budget + np.cumsum(floors)) / np.arange(1, inv.size + 1)
    active = int(np.flatnonzero(levels > floors)[-1]) + 1
    p[order[:active]] = levels[active - 1] - floors[:active]
    return p


def waterfill(gains, max_power):
    """Maximize ``sum(log(1 + g_k p_k))`` subject to ``sum(p) = max_power``.

    Returns ``p_k = max(0, level - 1/g_k)`` with the level set so the
    budget is spent exactly.
    """
    g = np.asarray(gains, dtype=float)
    if max_power <= 0:
        raise InvalidConfigurationError("max_power must be positive")
    if np.any(g <= 0):
        raise InvalidConfigurationError("water-filling needs positive gains")
    return _waterfill_inverse(1.0 / g, max_power)


def _effective_gains(p, mu, noise_power):
    """Per-user SINR per watt with the current interference held fixed."""
    diag = np.diag(mu)
    interference = mu @ p - diag * p
    return diag / (interference + noise_power)


def sum_rate_allocate(mu, noise_power, max_power, tol=POWER_TOL, max_rounds=MAX_ROUNDS):
    """Sum-rate allocation over ``sum(p) <= max_power``.

    Successive fixed-interference water-filling (exact when the coupling
    matrix is diagonal, as with ZF) gives the starting point.  When users
    interfere, that point ignores the interference each user causes, so
    it is polished by SLSQP on the true sum rate and the better of the two
    is returned.
    """
    K = mu.shape[0]
    p = np.full(K, max_power / K)
    best, best_rate = None, -np.inf
    for _ in range(max_rounds):
        new = waterfill(_effective_gains(p, mu, noise_power), max_power)
        value = _log_sum_rate(new, mu, noise_power)
        if value > best_rate:
            best, best_rate = new, value
        done = np.max(np.abs(new - p)) < tol * max_power
        p = new
        if done:
            break
    diag = np.diag(mu)
    leakage = (mu - np.diag(diag)).max(initial=0.0) / diag.min()
    if leakage > 1e-12:
        polished = _polish_sum_rate(best, mu, noise_power, max_power)
        if _log_sum_rate(polished, mu, noise_power) > best_rate:
            best = polished
    return best


def _log_sum_rate(p, mu, noise_power):
    return float(np.sum(np.log2(1.0 + _sinr(p, mu, noise_power))))


def _polish_sum_rate(p0, mu, noise_power, max_power):
    scale = max_power  # optimize over p / max_power for conditioning
    diag = np.diag(mu)

    def negative_rate(x):
        p = x * scale
        total = mu @ p + noise_power
        rest = total - diag * p
        value = -np.sum(np.log(total) - np.log(rest))
        grad = -(mu.T @ (1.0 / total) - mu.T @ (1.0 / rest) + diag / rest) * scale
        return value, grad

    res = optimize.minimize(
        negative_rate, p0 / scale, jac=True, method="SLSQP",
        bounds=[(0.0, 1.0)] * len(p0),
        constraints=[{"type": "ineq", "fun": lambda x: 1.0 - x.sum(),
                      "jac": lambda x: -np.ones_like(x)}],
        options={"ftol": 1e-15, "maxiter": 200})
    p = np.clip(res.x, 0.0, None) * scale
    if p.sum() > max_power:
        p *= max_power / p.sum()
    return p


def _sinr(p, mu, noise_power):
    diag = np.diag(mu)
    signal = diag * p
    return signal / (mu @ p - signal + noise_power)


# -- demand-pinned reallocation ----------------------------------------------------

def demand_constrained_reallocate(mu, noise_power, bandwidth, xi, fixed, max_power,
                                  fill="waterfill", tol=POWER_TOL, max_rounds=MAX_ROUNDS):
    """Hold the users in ``fixed`` at exactly their demand and spend the rest.

    The free users' powers are written as ``t * v`` with ``sum(v) = 1``.
    For a given shape ``v`` the pinned powers are affine in ``t``, so
    both the equality constraints and ``sum(p) = max_power`` are met in
    closed form.  With ``fill="waterfill"`` the shape is refreshed by
    water-filling over the free users with the interference of the
    previous round; with ``fill="equal"`` it stays uniform.

    Raises
    ------
    ReallocationInfeasibleError
        If the pinned users alone need spectral radius >= 1 or more than
        ``max_power``.
    """
    K = mu.shape[0]
    fixed = sorted(set(int(k) for k in fixed))
    if not fixed:
        if fill == "equal":
            return np.full(K, max_power / K)
        return sum_rate_allocate(mu, noise_power, max_power, tol, max_rounds)
    if fixed[0] < 0 or fixed[-1] >= K:
        raise InvalidConfigurationError(f"fixed users {fixed} out of range for K={K}")

    alpha = np.broadcast_to(sinr_targets(xi, bandwidth), (K,))
    R, nu = build_R_nu(alpha, mu, noise_power)
    M = R @ mu
    S = np.array(fixed)
    U = np.setdiff1d(np.arange(K), S)
    M_SS = M[np.ix_(S, S)]
    rho = spectral_radius(M_SS)
    if rho >= 1.0 - BOUNDARY_TOL:
        raise ReallocationInfeasibleError(f"pinned users need spectral radius {rho:.6g} >= 1")
    A = np.eye(S.size) - M_SS
    base = np.linalg.solve(A, nu[S])
    if base.sum() > max_power * (1 + 1e-12):
        raise ReallocationInfeasibleError(
            f"pinned users need {base.sum():.6g} W > max_power {max_power:.6g} W")

    p = np.zeros(K)
    if U.size == 0:
        p[S] = base
        return p

    spill = np.linalg.solve(A, M[np.ix_(S, U)])  # pinned power per watt of free power
    budget = max(max_power - base.sum(), 0.0)

    def place(shape):
        t = budget / (1.0 + spill.sum(axis=0) @ shape)
        out = np.zeros(K)
        out[U] = t * shape
        out[S] = base + t * (spill @ shape)
        return out, t

    shape = np.full(U.size, 1.0 / U.size)
    p, t = place(shape)
    if fill == "equal" or t <= 0:
        return p
    if fill != "waterfill":
        raise InvalidConfigurationError(f"unknown fill rule {fill!r}")
    for _ in range(max_rounds):
        gains = _effective_gains(p, mu, noise_power)[U]
        free = _waterfill_inverse(1.0 / gains, t)
        new_shape = free / free.sum()
        new_p, t = place(new_shape)
        done = np.max(np.abs(new_p - p)) < tol * max_power
        p = new_p
        if done:
            break
    return p


# -- joint set expansion -------------------------------------------------------------

def _result(p, mu, noise_power, bandwidth, xi, method, satisfied=None, iterations=0, trace=None):
    r = rates(p, mu, noise_power, bandwidth)
    if satisfied is None:
        satisfied = satisfied_set(p, mu, noise_power, bandwidth, xi)
    if trace is None:
        trace = [(0, len(satisfied), float(r.sum()))]
    return AllocationResult(p, frozenset(satisfied), r, method, iterations, trace)


def _serve_everyone(mu, noise_power, bandwidth, xi, max_power, minimal):
    """Meet every demand and spend the leftover budget on sum rate.

    Leftover power is water-filled on top of the minimal powers; users
    left on their floor are then pinned at their demand and the free
    users re-optimized.  Any user pushed below its demand by the extra
    interference joins the pinned set, so the loop ends after at most K
    passes with a demand-meeting allocation (the minimal powers at worst).
    """
    K = mu.shape[0]
    leftover = max_power - minimal.sum()
    if leftover <= POWER_TOL * max_power:
        return minimal
    gains = _effective_gains(minimal, mu, noise_power)
    extra = _waterfill_inverse(1.0 / gains + minimal, leftover)
    pinned = set(np.flatnonzero(extra <= 0).tolist())
    candidate = minimal + extra
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (K,))
    while len(pinned) < K:
        if pinned:
            try:
                candidate = demand_constrained_reallocate(
                    mu, noise_power, bandwidth, xi, pinned, max_power)
            except ReallocationInfeasibleError:
                break
        r = rates(candidate, mu, noise_power, bandwidth)
        short = set(np.flatnonzero(r < xi - DEMAND_TOL).tolist()) - pinned
        if not short:
            return candidate
        pinned |= short
    return minimal


def _pin_chain(mu, noise_power, bandwidth, xi, max_power, pins, fill, cache):
    """Candidates for the restricted problem with ``pins`` held at their demand.

    Starting from ``pins``, each candidate pins the previous candidate's
    pinned users plus the users it newly satisfies.  Every candidate holds
    a superset of ``pins`` at exactly its demand within the budget, so all
    are feasible for the restricted problem.  ``cache`` maps pin sets to
    allocations; ``None`` marks an infeasible pin set.
    """
    chain = []
    while True:
        if pins not in cache:
            try:
                cache[pins] = demand_constrained_reallocate(
                    mu, noise_power, bandwidth, xi, pins, max_power, fill=fill)
            except ReallocationInfeasibleError:
                cache[pins] = None
        p = cache[pins]
        if p is None:
            return chain
        chain.append(p)
        new = satisfied_set(p, mu, noise_power, bandwidth, xi) - pins
        if not new:
            return chain
        pins = pins | new


def _expand(mu, noise_power, bandwidth, xi, max_power, fill):
    """Set-expansion loop shared by JointOpt and SatisSetOpt.

    Round ``n`` solves the restricted problem for the current set by
    taking the highest-rate point on its pin chain.  The next round's
    pin set is exactly the chain's next pin set, so its chain is a tail of
    this one and the sum rate cannot go up between rounds.  Users join the
    set and are never dropped.  Returns powers, set, round count and trace.
    """
    p = sum_rate_allocate(mu, noise_power, max_power)
    Q = satisfied_set(p, mu, noise_power, bandwidth, xi)
    trace = [(0, len(Q), float(rates(p, mu, noise_power, bandwidth).sum()))]
    cache = {}
    n, delta = 0, len(Q)
    while delta != 0:
        chain = _pin_chain(mu, noise_power, bandwidth, xi, max_power, Q, fill, cache)
        if not chain:
            break
        n += 1
        sums = [rates(c, mu, noise_power, bandwidth).sum() for c in chain]
        p_new = chain[int(np.argmax(sums))]
        Q_new = Q | satisfied_set(p_new, mu, noise_power, bandwidth, xi)
        delta = len(Q_new) - len(Q)
        p, Q = p_new, Q_new
        trace.append((n, len(Q), float(rates(p, mu, noise_power, bandwidth).sum())))
    return p, Q, n, trace


@_timed
def joint_optimize(mu, noise_power, bandwidth, xi, max_power):
    """Maximize the number of demand-satisfied users, then the sum rate.

    If all demands can be met together the leftover power goes to sum
    rate under the demand constraints.  Otherwise start from the sum-rate
    allocation and repeatedly pin the satisfied users at exactly their
    demand, handing the freed power to the rest, until no new user is
    satisfied.
    """
    K = mu.shape[0]
    report = assess(mu, noise_power, bandwidth, xi, max_power)
    if report.feasible:
        p = _serve_everyone(mu, noise_power, bandwidth, xi, max_power, report.minimal_powers)
        return _result(p, mu, noise_power, bandwidth, xi, "JointOpt", satisfied=range(K))
    p, Q, n, trace = _expand(mu, noise_power, bandwidth, xi, max_power, "waterfill")
    return _result(p, mu, noise_power, bandwidth, xi, "JointOpt", Q, n, trace)


@_timed
def satisset_optimize(mu, noise_power, bandwidth, xi, max_power):
    """Demand-first baseline: leftover power is split equally, not water-filled."""
    K = mu.shape[0]
    report = assess(mu, noise_power, bandwidth, xi, max_power)
    if report.feasible:
        p = report.minimal_powers + (max_power - report.required_power) / K
        return _result(p, mu, noise_power, bandwidth, xi, "SatisSetOpt")
    p, Q, n, trace = _expand(mu, noise_power, bandwidth, xi, max_power, "equal")
    if len(Q) == K:
        p = p + (max_power - p.sum()) / K
        Q = Q & satisfied_set(p, mu, noise_power, bandwidth, xi)
    return _result(p, mu, noise_power, bandwidth, xi, "SatisSetOpt", Q, n, trace)


@_timed
def sum_opt(mu, noise_power, bandwidth, xi, max_power):
    """Sum-rate baseline; the satisfied set is only reported."""
    p = sum_rate_allocate(mu, noise_power, max_power)
    return _result(p, mu, noise_power, bandwidth, xi, "SumOpt")


@_timed
def equal_power(mu, noise_power, bandwidth, xi, max_power):
    """``max_power / K`` to every user."""
    p = np.full(mu.shape[0], max_power / mu.shape[0])
    return _result(p, mu, noise_power, bandwidth, xi, "EqualPower")


ALLOCATORS = {
    "jointopt": joint_optimize,
    "satisset": satisset_optimize,
    "sumopt": sum_opt,
    "equal": equal_power,
}
