"""Linear ZF / RZF precoders and the effective coupling matrix."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigurationError, SingularChannelError

__all__ = [
    "PrecodingMatrix",
    "normalize_columns",
    "zf_precoder",
    "rzf_precoder",
    "make_precoder",
    "coupling_matrix",
    "write_coupling_csv",
    "read_coupling_csv",
]

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class PrecodingMatrix:
    """Unit-norm beamformers, one column per user (N x K)."""

    W: np.ndarray
    method: str


def normalize_columns(W):
    norms = np.linalg.norm(W, axis=0)
    return W / norms[None, :]


def _as_array(H):
    return np.asarray(getattr(H, "H", H))


def zf_precoder(H):
    """Zero-forcing: ``W = H (H^H H)^{-1}`` with unit-norm columns.

    Raises
    ------
    SingularChannelError
        If the Gram matrix condition number exceeds 1e12.
    """
    H = _as_array(H)
    gram = H.conj().T @ H
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularChannelError(cond)
    W = np.linalg.solve(gram.T, H.T).T  # H @ inv(gram)
    return PrecodingMatrix(normalize_columns(W), "zf")


def rzf_precoder(H, noise_power, max_power, n_users=None):
    """Regularized ZF with loading ``K * noise_power / max_power``."""
    if max_power <= 0:
        raise InvalidConfigurationError("max_power must be positive")
    H = _as_array(H)
    K = H.shape[1] if n_users is None else n_users
    gram = H.conj().T @ H + (K * noise_power / max_power) * np.eye(H.shape[1])
    W = np.linalg.solve(gram.T, H.T).T
    return PrecodingMatrix(normalize_columns(W), "rzf")


def make_precoder(method, H, noise_power=1.0, max_power=1.0):
    method = method.lower()
    if method == "zf":
        return zf_precoder(H)
    if method == "rzf":
        return rzf_precoder(H, noise_power, max_power)
    raise InvalidConfigurationError(f"unknown precoder {method!r}")


def coupling_matrix(H, W):
    """``mu[k, l] = |h_k^H w_l|^2`` for every user pair."""
    H = _as_array(H)
    W = np.asarray(getattr(W, "W", W))
    if H.shape != W.shape:
        raise InvalidConfigurationError(f"H {H.shape} and W {W.shape} disagree")
    return np.abs(H.conj().T @ W) ** 2


COUPLING_COLUMNS = ("k", "l", "mu")


def write_coupling_csv(mu, path):
    """One row per ordered user pair, 0-based indices, values via ``repr``."""
    mu = np.asarray(mu, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COUPLING_COLUMNS)
        for k in range(mu.shape[0]):
            for l in range(mu.shape[1]):
                writer.writerow([k, l, repr(float(mu[k, l]))])


def read_coupling_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InvalidConfigurationError(f"{path} has no coupling rows")
    try:
        K = 1 + max(int(r["k"]) for r in rows)
        mu = np.full((K, K), np.nan)
        for r in rows:
            mu[int(r["k"]), int(r["l"])] = float(r["mu"])
    except (KeyError, ValueError, IndexError) as exc:
        raise InvalidConfigurationError(f"{path}: malformed coupling CSV ({exc})") from exc
    if np.isnan(mu).any():
        raise InvalidConfigurationError(f"{path} is missing (k, l) entries")
    if np.any(mu < 0):
        raise InvalidConfigurationError(f"{path} has negative coupling entries")
    return mu
