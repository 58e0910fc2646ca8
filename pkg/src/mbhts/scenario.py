"""System parameters, user drops and the feed-to-user channel matrix.

The satellite antenna pattern is modelled with identical Gaussian spot
beams laid out on a hexagonal grid in the satellite's angular frame
(degrees off nadir).  Beam 0 points at the sub-satellite point and the
remaining beams fill hexagonal rings around it.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfigurationError, NumericRangeError

SPEED_OF_LIGHT = 299_792_458.0  # m/s
EARTH_RADIUS_KM = 6378.137
BOLTZMANN = 1.380649e-23  # J/K

__all__ = [
    "SystemParams",
    "UserLayout",
    "ChannelMatrix",
    "dish_gain",
    "beam_centers",
    "generate_user_layout",
    "beam_gain",
    "build_channel",
    "draw_channel",
    "load_params",
    "save_params",
    "write_channel_csv",
    "read_channel_csv",
]


def dish_gain(diameter_m, frequency_ghz, efficiency=0.65):
    """Linear gain of a parabolic dish of the given diameter."""
    wavelength = SPEED_OF_LIGHT / (frequency_ghz * 1e9)
    return efficiency * (math.pi * diameter_m / wavelength) ** 2


# -118.3 dBW of thermal noise over 500 MHz fixes the receiver temperature.
_DEFAULT_TEMPERATURE = 10 ** (-118.3 / 10) / (BOLTZMANN * 500e6)


@dataclass(frozen=True)
class SystemParams:
    """Static description of one multi-beam downlink.

    Units: bandwidth in MHz, carrier in GHz, powers in W, heights in km,
    angles in degrees, gains linear.  ``noise_power`` is the noise
    variance seen by the SINR expressions; because the channel amplitudes
    are already divided by sqrt(k T B) it stays at 1.
    """

    n_beams: int = 7
    n_users: int = 7
    bandwidth_mhz: float = 500.0
    carrier_frequency_ghz: float = 20.0
    max_power_w: float = 10 ** 2.337  # 23.37 dBW
    noise_power: float = 1.0
    satellite_height_km: float = 35786.0
    rx_antenna_gain: float = dish_gain(0.6, 20.0)
    beam_peak_gain: float = 2.0e4  # 43 dBi
    beam_3db_halfwidth_deg: float = 0.2
    beam_center_spacing_deg: float = 0.4
    noise_temperature_k: float = _DEFAULT_TEMPERATURE
    boltzmann: float = BOLTZMANN
    rng_seed: int = 0

    def validate(self):
        if self.n_users < 1 or self.n_beams < 1:
            raise InvalidConfigurationError("need at least one beam and one user")
        if self.n_users > self.n_beams:
            raise InvalidConfigurationError(
                f"n_users={self.n_users} exceeds n_beams={self.n_beams}")
        positive = ("bandwidth_mhz", "carrier_frequency_ghz", "max_power_w", "noise_power",
                    "satellite_height_km", "rx_antenna_gain", "beam_peak_gain",
                    "beam_3db_halfwidth_deg", "beam_center_spacing_deg",
                    "noise_temperature_k", "boltzmann")
        for name in positive:
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidConfigurationError(f"{name} must be positive and finite, got {value}")
        return self

    @property
    def wavelength_m(self):
        return SPEED_OF_LIGHT / (self.carrier_frequency_ghz * 1e9)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class UserLayout:
    """User positions for one drop.

    Attributes
    ----------
    positions_deg : (K, 2) array
        Angular position of each user as seen from the satellite.
    offsets_deg : (K, N) array
        Angle between each user and each beam boresight.
    slant_range_km : (K,) array
        Satellite-to-user distance.
    """

    positions_deg: np.ndarray
    offsets_deg: np.ndarray
    slant_range_km: np.ndarray


@dataclass(frozen=True)
class ChannelMatrix:
    """Complex channel ``H = Hbar @ diag(exp(j*phases))`` of shape (N, K)."""

    amplitude: np.ndarray
    phases: np.ndarray
    H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=float)
        phi = np.asarray(self.phases, dtype=float)
        if amp.ndim != 2 or phi.shape != (amp.shape[1],):
            raise InvalidConfigurationError(
                f"amplitude shape {amp.shape} does not match phases shape {phi.shape}")
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "phases", phi)
        object.__setattr__(self, "H", amp * np.exp(1j * phi)[None, :])

    @property
    def n_beams(self):
        return self.amplitude.shape[0]

    @property
    def n_users(self):
        return self.amplitude.shape[1]

    def gain_features(self):
        """Channel magnitudes stacked user by user, length K*N.

        Read from the amplitude part, so they are exactly phase-free.
        """
        return self.amplitude.T.reshape(-1)


def beam_centers(n_beams, spacing_deg):
    """Boresight directions of ``n_beams`` beams on a hexagonal grid.

    Beams are ordered by ring (distance from nadir) then by azimuth, so the
    first seven are the classic centre-plus-six cluster.
    """
    rings = 0
    while 3 * rings * (rings + 1) + 1 < n_beams:
        rings += 1
    pts = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if abs(q + r) > rings:
                continue
            x = spacing_deg * (q + 0.5 * r)
            y = spacing_deg * (math.sqrt(3) / 2 * r)
            pts.append((x, y))
    pts = np.array(pts)
    radius = np.round(np.hypot(pts[:, 0], pts[:, 1]) / spacing_deg, 9)
    azimuth = np.round(np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi), 9)
    order = np.lexsort((azimuth, radius))
    return pts[order[:n_beams]]


def _slant_range_km(off_nadir_deg, height_km):
    orbit = EARTH_RADIUS_KM + height_km
    eta = np.radians(off_nadir_deg)
    disc = EARTH_RADIUS_KM ** 2 - (orbit * np.sin(eta)) ** 2
    if np.any(disc < 0):
        raise InvalidConfigurationError("user direction misses the Earth")
    return orbit * np.cos(eta) - np.sqrt(disc)


def layout_from_positions(params, positions_deg):
    """Build a :class:`UserLayout` for users at given angular positions."""
    positions = np.atleast_2d(np.asarray(positions_deg, dtype=float))
    centers = beam_centers(params.n_beams, params.beam_center_spacing_deg)
    offsets = np.linalg.norm(positions[:, None, :] - centers[None, :, :], axis=-1)
    off_nadir = np.hypot(positions[:, 0], positions[:, 1])
    ranges = _slant_range_km(off_nadir, params.satellite_height_km)
    return UserLayout(positions, offsets, ranges)


def generate_user_layout(params, seed=None):
    """Drop one user uniformly inside the footprint of each of the first K beams.

    The footprint is the disc of radius half the beam spacing around the
    boresight.  ``seed`` defaults to ``params.rng_seed``.
    """
    params.validate()
    seed = params.rng_seed if seed is None else seed
    rng = np.random.default_rng((seed, 0))
    K = params.n_users
    centers = beam_centers(params.n_beams, params.beam_center_spacing_deg)[:K]
    radius = 0.5 * params.beam_center_spacing_deg * np.sqrt(rng.random(K))
    angle = 2 * np.pi * rng.random(K)
    positions = centers + np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))
    return layout_from_positions(params, positions)


def beam_gain(params, beam, offset_deg):
    """Gaussian beam gain at ``offset_deg`` from the boresight of ``beam``.

    All beams share the same pattern, so ``beam`` only documents intent.
    Equals half the peak gain at the 3 dB half-width.
    """
    theta = np.asarray(offset_deg, dtype=float)
    return params.beam_peak_gain * np.exp(-math.log(2) * (theta / params.beam_3db_halfwidth_deg) ** 2)


def build_channel(params, layout, seed=None):
    """Feed-to-user channel for ``layout`` with uniform residual payload phases."""
    params.validate()
    seed = params.rng_seed if seed is None else seed
    K, N = layout.offsets_deg.shape
    if K != params.n_users or N != params.n_beams:
        raise InvalidConfigurationError(
            f"layout is {K}x{N}, params expect {params.n_users}x{params.n_beams}")
    gains = beam_gain(params, None, layout.offsets_deg.T)  # (N, K)
    distance_m = layout.slant_range_km * 1e3
    noise = params.boltzmann * params.noise_temperature_k * params.bandwidth_mhz * 1e6
    with np.errstate(all="ignore"):
        amplitude = (params.wavelength_m * np.sqrt(params.rx_antenna_gain * gains)
                     / (4 * np.pi * distance_m[None, :] * np.sqrt(noise)))
    if not np.all(np.isfinite(amplitude)) or np.any(amplitude.max(axis=0) <= 0):
        raise NumericRangeError("channel amplitudes over- or underflowed")
    rng = np.random.default_rng((seed, 1))
    phases = rng.uniform(0.0, 2 * np.pi, size=K)
    return ChannelMatrix(amplitude, phases)


def draw_channel(params, seed):
    """Layout and channel for one Monte Carlo drop."""
    layout = generate_user_layout(params, seed)
    return layout, build_channel(params, layout, seed)


# -- configuration files ---------------------------------------------------

_SECTIONS = {
    "system": ("n_beams", "n_users", "bandwidth_mhz", "carrier_frequency_ghz",
               "max_power_w", "satellite_height_km", "rng_seed"),
    "antenna": ("rx_antenna_gain", "beam_peak_gain", "beam_3db_halfwidth_deg",
                "beam_center_spacing_deg"),
    "noise": ("noise_power", "noise_temperature_k", "boltzmann"),
}


def save_params(params, path):
    cfg = configparser.ConfigParser()
    for section, names in _SECTIONS.items():
        cfg[section] = {name: repr(getattr(params, name)) for name in names}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# noise_power is the normalized variance; physical kTB is about -118.3 dBW\n")
        cfg.write(fh)


def load_params(path):
    """Read a sectioned key-value file; missing keys keep their defaults."""
    cfg = configparser.ConfigParser()
    if not cfg.read(path, encoding="utf-8"):
        raise InvalidConfigurationError(f"cannot read config file {path}")
    types = {f.name: f.type for f in dataclasses.fields(SystemParams)}
    values = {}
    for section, names in _SECTIONS.items():
        if section not in cfg:
            continue
        for key, raw in cfg[section].items():
            if key not in names:
                raise InvalidConfigurationError(f"unknown key {section}.{key}")
            try:
                values[key] = int(raw) if types[key] == "int" else float(raw)
            except ValueError as exc:
                raise InvalidConfigurationError(f"bad value for {key}: {raw!r}") from exc
    return SystemParams(**values).validate()


# -- CSV dumps --------------------------------------------------------------

CHANNEL_COLUMNS = ("n", "k", "magnitude", "phase", "offset_deg", "slant_range_km")


def write_channel_csv(channel, path, layout=None):
    """One row per (feed n, user k) pair; layout columns are blank without a layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHANNEL_COLUMNS)
        for n in range(channel.n_beams):
            for k in range(channel.n_users):
                row = [n, k, repr(float(channel.amplitude[n, k])), repr(float(channel.phases[k]))]
                if layout is not None:
                    row += [repr(float(layout.offsets_deg[k, n])),
                            repr(float(layout.slant_range_km[k]))]
                else:
                    row += ["", ""]
                writer.writerow(row)


def read_channel_csv(path):
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InvalidConfigurationError(f"{path} has no channel rows")
    N = 1 + max(int(r["n"]) for r in rows)
    K = 1 + max(int(r["k"]) for r in rows)
    amplitude = np.full((N, K), np.nan)
    phases = np.zeros(K)
    for r in rows:
        n, k = int(r["n"]), int(r["k"])
        amplitude[n, k] = float(r["magnitude"])
        phases[k] = float(r["phase"])
    if np.isnan(amplitude).any():
        raise InvalidConfigurationError(f"{path} is missing (n, k) entries")
    return ChannelMatrix(amplitude, phases)
