"""Channel synthesis: Rayleigh direct links and LoS surface cascade links."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .scenario import SystemConfig, UserSet, distance


@dataclass
class ChannelRealization:
    """One fading draw for a fixed scenario.

    h_direct[k]   : BS -> user k scalar channel.
    h_bs_ris[m]   : BS -> surface element m.
    h_ris_user[k] : surface -> user k, length-M vector.
    """

    h_direct: np.ndarray    # (2K,) complex
    h_bs_ris: np.ndarray    # (M,) complex
    h_ris_user: np.ndarray  # (2K, M) complex

    @property
    def num_users(self) -> int:
        return self.h_direct.shape[0]

    @property
    def num_elements(self) -> int:
        return self.h_bs_ris.shape[0]


def sample_direct(d: float, alpha: float, ref_gain: float, rng: np.random.Generator) -> complex:
    """Rayleigh-faded direct channel with mean power ref_gain / d**alpha."""
    if d <= 0.0:
        raise ValueError(f"direct-link distance must be positive, got {d}")
    g = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
    return complex(np.sqrt(ref_gain / d**alpha) * g)


def array_response(u_y, u_z, m_y, m_z, d_y, d_z, wavelength, path_distance) -> np.ndarray:
    """Planar-array steering vector for direction cosines (u_y, u_z).

    Entry (i, j) is exp(-j*2*pi*path_distance/wavelength)
    * exp(-j*2*pi*(i*d_y*u_y + j*d_z*u_z)/wavelength), flattened in
    Kronecker order (y-axis vector outer z-axis vector), so element index
    m = i * m_z + j. All entries are unit modulus.
    """
    if u_y**2 + u_z**2 > 1.0 + 1e-12:
        raise ValueError(f"direction cosines must satisfy u_y^2 + u_z^2 <= 1, got ({u_y}, {u_z})")
    k0 = 2.0 * np.pi / wavelength
    lead = np.exp(-1j * k0 * path_distance)
    vec_y = np.exp(-1j * k0 * d_y * u_y * np.arange(m_y))
    vec_z = np.exp(-1j * k0 * d_z * u_z * np.arange(m_z))
    return lead * np.kron(vec_y, vec_z)


def _los_vector(config: SystemConfig, endpoint: np.ndarray, alpha: float) -> np.ndarray:
    """Path-gain-scaled steering vector from the surface toward `endpoint`."""
    d = distance(config.ris_pos, endpoint)
    unit = (np.asarray(endpoint, dtype=float) - config.ris_pos) / d
    steer = array_response(
        unit[1], unit[2],
        config.elements_y, config.elements_z,
        config.d_y_m, config.d_z_m,
        config.wavelength_m, d,
    )
    return np.sqrt(config.ref_gain_1m / d**alpha) * steer


def build_channels(config: SystemConfig, users: UserSet, rng: np.random.Generator) -> ChannelRealization:
    """Draw the full channel set for one scenario realization."""
    bs = config.bs_pos
    h_bs_ris = _los_vector(config, bs, config.pathloss_exp_bs_ris)

    n = users.num_users
    h_direct = np.zeros(n, dtype=complex)
    h_ris_user = np.zeros((n, config.num_elements), dtype=complex)
    for k in range(n):
        pos = users.positions[k]
        h_ris_user[k] = _los_vector(config, pos, config.pathloss_exp_ris_user)
        h_direct[k] = sample_direct(distance(bs, pos), config.pathloss_exp_direct, config.ref_gain_1m, rng)

    return ChannelRealization(h_direct=h_direct, h_bs_ris=h_bs_ris, h_ris_user=h_ris_user)


def zero_cascade(channels: ChannelRealization, user_indices=None) -> ChannelRealization:
    """Copy of `channels` with the surface path removed for the given users.

    With user_indices None the cascade is zeroed for everyone (no surface
    in the network); passing the transmitted-side indices models a
    reflecting-only surface.
    """
    h_ris_user = channels.h_ris_user.copy()
    if user_indices is None:
        h_ris_user[:] = 0.0
    else:
        h_ris_user[np.asarray(user_indices, dtype=int)] = 0.0
    return ChannelRealization(
        h_direct=channels.h_direct.copy(),
        h_bs_ris=channels.h_bs_ris.copy(),
        h_ris_user=h_ris_user,
    )


def dump_channels(channels: ChannelRealization, path) -> None:
    """Write every channel coefficient as (link, user, element, re, im) CSV rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["link", "user", "element", "re", "im"])
        for k, h in enumerate(channels.h_direct):
            writer.writerow(["direct", k, "", repr(h.real), repr(h.imag)])
        for m, h in enumerate(channels.h_bs_ris):
            writer.writerow(["bs_ris", "", m, repr(h.real), repr(h.imag)])
        for k in range(channels.num_users):
            for m in range(channels.num_elements):
                h = channels.h_ris_user[k, m]
                writer.writerow(["ris_user", k, m, repr(h.real), repr(h.imag)])
