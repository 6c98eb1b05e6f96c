"""System configuration, geometry, unit conversion, and seeded user placement."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from types import SimpleNamespace

import numpy as np

# Table-style convention lambda = 3e8 / f_c.
PROPAGATION_SPEED = 3.0e8

# Sub-stream ids spawned from the master seed, so placement and fading
# draws stay independent and reproducible.
_STREAM_PLACEMENT = 0
_STREAM_FADING = 1
_STREAM_PHASE = 2


def dbm_to_watts(value_dbm: float) -> float:
    """Convert a dBm level to watts."""
    return 10.0 ** (value_dbm / 10.0) * 1e-3


def watts_to_dbm(value_watts: float) -> float:
    """Convert watts to dBm. Rejects non-positive powers."""
    if value_watts <= 0.0:
        raise ValueError(f"power must be positive to express in dBm, got {value_watts}")
    return 10.0 * math.log10(value_watts / 1e-3)


def distance(a, b) -> float:
    """Euclidean distance between two 3D points (meters)."""
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


@dataclass
class SolverOptions:
    """Tolerances and iteration caps for the alternating-optimization solver.

    inner_tol is a relative improvement threshold on the min-rate objective;
    scalar_tol bounds the 1-D golden-section searches; sca_tol stops the
    successive convex refinement of one block.
    """

    inner_tol: float = 1e-4
    max_inner_iters: int = 50
    sca_tol: float = 1e-6
    max_sca_iters: int = 10
    scalar_tol: float = 1e-6
    initial_beta: float = 0.5
    initial_rho: float = 0.5
    initial_tau: float | None = None  # None -> uniform 1/K
    tdma_split_power: bool = False  # True: P/(2K) per slot instead of full P

    def validate(self) -> None:
        for name in ("inner_tol", "sca_tol", "scalar_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_inner_iters", "max_sca_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not (0.0 < self.initial_beta < 1.0 and 0.0 < self.initial_rho < 1.0):
            raise ValueError("initial_beta and initial_rho must lie in (0, 1)")


@dataclass
class SystemConfig:
    """All physical and solver parameters of one downlink scenario.

    Internal units are SI (watts, meters, Hz). The JSON front end accepts
    dBm / dBm-per-Hz / wavelength-relative fields and converts at load time,
    see `config_from_dict`.
    """

    users_per_side: int = 4           # K transmitted + K reflected users
    elements_y: int = 10              # surface elements along y
    elements_z: int = 10              # surface elements along z
    carrier_freq_hz: float = 750e6
    element_spacing_y_m: float | None = None  # None -> wavelength / 10
    element_spacing_z_m: float | None = None
    tx_power_w: float = 1.0           # 30 dBm
    noise_power_w: float = 1e-12      # -150 dBm/Hz over 1 MHz
    bandwidth_hz: float = 1e6
    ref_gain_1m: float = 1e-3         # channel power at 1 m reference distance
    pathloss_exp_direct: float = 3.0
    pathloss_exp_bs_ris: float = 2.0
    pathloss_exp_ris_user: float = 2.3
    ris_position: tuple = (0.0, 0.0, 20.0)
    bs_position: tuple | None = None  # None -> (-bs_ris_2d_distance, 0, bs_height)
    bs_ris_2d_distance_m: float = 50.0
    bs_height_m: float = 25.0
    region_half_extent_m: float = 500.0
    rng_seed: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)

    @property
    def num_users_per_side(self) -> int:
        return self.users_per_side

    @property
    def num_users(self) -> int:
        return 2 * self.users_per_side

    @property
    def num_elements(self) -> int:
        return self.elements_y * self.elements_z

    @property
    def wavelength_m(self) -> float:
        return PROPAGATION_SPEED / self.carrier_freq_hz

    @property
    def d_y_m(self) -> float:
        return self.element_spacing_y_m if self.element_spacing_y_m is not None else self.wavelength_m / 10.0

    @property
    def d_z_m(self) -> float:
        return self.element_spacing_z_m if self.element_spacing_z_m is not None else self.wavelength_m / 10.0

    @property
    def ris_pos(self) -> np.ndarray:
        return np.asarray(self.ris_position, dtype=float)

    @property
    def bs_pos(self) -> np.ndarray:
        if self.bs_position is not None:
            return np.asarray(self.bs_position, dtype=float)
        return np.array([-self.bs_ris_2d_distance_m, 0.0, self.bs_height_m], dtype=float)

    def validate(self) -> None:
        if self.users_per_side < 1:
            raise ValueError("users_per_side must be at least 1")
        if self.elements_y < 1 or self.elements_z < 1:
            raise ValueError("element counts must be at least 1")
        positives = {
            "carrier_freq_hz": self.carrier_freq_hz,
            "tx_power_w": self.tx_power_w,
            "noise_power_w": self.noise_power_w,
            "bandwidth_hz": self.bandwidth_hz,
            "ref_gain_1m": self.ref_gain_1m,
            "region_half_extent_m": self.region_half_extent_m,
            "d_y_m": self.d_y_m,
            "d_z_m": self.d_z_m,
        }
        for name, value in positives.items():
            if value <= 0.0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.pathloss_exp_direct < self.pathloss_exp_bs_ris:
            raise ValueError("direct-link path loss exponent must be >= the BS-RIS exponent")
        if self.ris_pos[2] <= 0.0 or self.bs_pos[2] <= 0.0:
            raise ValueError("RIS and BS must sit above the ground plane (z > 0)")
        self.solver.validate()


@dataclass
class UserSet:
    """2K ground users: indices [0, K) transmitted side, [K, 2K) reflected side."""

    positions: np.ndarray   # (2K, 3), z = 0
    transmitted: np.ndarray  # (2K,) bool mask

    @property
    def num_users(self) -> int:
        return self.positions.shape[0]

    @property
    def users_per_side(self) -> int:
        return self.num_users // 2

    @property
    def tu_indices(self) -> np.ndarray:
        return np.flatnonzero(self.transmitted)

    @property
    def ru_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.transmitted)

    def validate(self) -> None:
        n_t = int(np.count_nonzero(self.transmitted))
        if n_t * 2 != self.num_users:
            raise ValueError(f"sides must split users evenly, got {n_t} of {self.num_users} transmitted")
        if np.any(self.positions[:, 2] != 0.0):
            raise ValueError("users must lie on the ground plane (z = 0)")


def rng_streams(seed: int) -> SimpleNamespace:
    """Independent named PCG64 streams derived from one master seed."""
    entropy = int(seed) & (2**64 - 1)

    def _stream(key):
        return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(key,)))

    return SimpleNamespace(
        placement=_stream(_STREAM_PLACEMENT),
        fading=_stream(_STREAM_FADING),
        phase=_stream(_STREAM_PHASE),
    )


def generate_users(config: SystemConfig, rng: np.random.Generator) -> UserSet:
    """Drop K users uniformly in each half of the square region.

    The surface plane (x = 0) splits the region: transmitted users get
    x > 0 (opposite the BS), reflected users x < 0. Deterministic for a
    fixed generator state.
    """
    half = config.region_half_extent_m
    if half <= 0.0:
        raise ValueError(f"region_half_extent_m must be positive, got {half}")
    k = config.users_per_side
    if k < 1:
        raise ValueError("users_per_side must be at least 1")

    # 1 - random() lies in (0, 1], keeping users strictly off the surface plane.
    x_t = half * (1.0 - rng.random(k))
    y_t = half * (2.0 * rng.random(k) - 1.0)
    x_r = -half * (1.0 - rng.random(k))
    y_r = half * (2.0 * rng.random(k) - 1.0)

    positions = np.zeros((2 * k, 3))
    positions[:k, 0] = x_t
    positions[:k, 1] = y_t
    positions[k:, 0] = x_r
    positions[k:, 1] = y_r

    transmitted = np.zeros(2 * k, dtype=bool)
    transmitted[:k] = True
    return UserSet(positions=positions, transmitted=transmitted)


# ---------------------------------------------------------------------------
# JSON configuration front end.
#
# Unit-bearing keys and their accepted forms:
#   tx_power_dbm (dBm)            or tx_power_w (watts)
#   noise_psd_dbm_per_hz (dBm/Hz) or noise_power_w (watts, total over bandwidth)
#   element_spacing_wavelengths   or element_spacing_y_m / element_spacing_z_m (meters)
#   carrier_freq_hz, bandwidth_hz (Hz); all positions and extents in meters.
# ---------------------------------------------------------------------------

_CONFIG_FIELD_NAMES = {f.name for f in fields(SystemConfig)} - {"solver"}
_SOLVER_FIELD_NAMES = {f.name for f in fields(SolverOptions)}
_UNIT_KEYS = {"tx_power_dbm", "noise_psd_dbm_per_hz", "element_spacing_wavelengths"}


def config_from_dict(raw: dict) -> SystemConfig:
    """Build a validated SystemConfig from a JSON-style dict, converting units."""
    data = dict(raw)
    solver_raw = data.pop("solver", {})
    unknown = set(data) - _CONFIG_FIELD_NAMES - _UNIT_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    unknown_solver = set(solver_raw) - _SOLVER_FIELD_NAMES
    if unknown_solver:
        raise ValueError(f"unknown solver keys: {sorted(unknown_solver)}")

    if "tx_power_dbm" in data:
        if "tx_power_w" in data:
            raise ValueError("give tx power as dBm or watts, not both")
        data["tx_power_w"] = dbm_to_watts(data.pop("tx_power_dbm"))
    if "noise_psd_dbm_per_hz" in data:
        if "noise_power_w" in data:
            raise ValueError("give noise as a PSD or a total power, not both")
        bandwidth = data.get("bandwidth_hz", SystemConfig.bandwidth_hz)
        data["noise_power_w"] = dbm_to_watts(data.pop("noise_psd_dbm_per_hz")) * bandwidth
    if "element_spacing_wavelengths" in data:
        rel = data.pop("element_spacing_wavelengths")
        freq = data.get("carrier_freq_hz", SystemConfig.carrier_freq_hz)
        spacing = rel * PROPAGATION_SPEED / freq
        data.setdefault("element_spacing_y_m", spacing)
        data.setdefault("element_spacing_z_m", spacing)
    for key in ("ris_position", "bs_position"):
        if data.get(key) is not None:
            data[key] = tuple(float(v) for v in data[key])

    config = SystemConfig(**data, solver=SolverOptions(**solver_raw))
    config.validate()
    return config


def load_config(path) -> SystemConfig:
    """Load and validate a JSON configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return config_from_dict(raw)
