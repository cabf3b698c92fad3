"""Constellations, channel draws and the uncoded transmit chain.

All quantities use the normalisation ``K * E_s = 1`` so that the SNR in dB
is simply ``-10 log10(noise_variance)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, toeplitz

SUPPORTED_ORDERS = (4, 16, 64)


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one trial, derived from ``seed`` and an integer key.

    The key is typically ``(stream, snr_index, trial_index)``; draws made
    through it do not depend on how many trials run before or after it.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def noise_variance(snr_db: float) -> float:
    return float(10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0))


def _gray_pam_labels(bits: int) -> np.ndarray:
    """Gray label of each PAM level, levels ordered from most negative."""
    levels = np.arange(1 << bits)
    return levels ^ (levels >> 1)


@dataclass(frozen=True)
class Constellation:
    """Square Gray-mapped M-QAM with per-bit index subsets.

    Symbol index ``s`` carries the bits of its binary expansion, MSB first.
    The first ``m/2`` bits label the in-phase level, the remaining ``m/2``
    the quadrature level, each with a reflected Gray code.
    """

    order: int
    points: np.ndarray
    bit_labels: np.ndarray  # (M, m) int8
    energy: float
    pam_levels: np.ndarray  # per-axis amplitudes, ascending
    axis_index: np.ndarray = field(repr=False)  # (M, 2) level index of I and Q

    @property
    def bits_per_symbol(self) -> int:
        return int(self.bit_labels.shape[1])

    def bit_subsets(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        """Index sets of points whose bit ``q`` (0-based) is 0 and 1."""
        col = self.bit_labels[:, q]
        return np.flatnonzero(col == 0), np.flatnonzero(col == 1)

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        """Map ``(..., m)`` bit arrays to complex points."""
        return self.points[self.bits_to_index(bits)]

    def bits_to_index(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        m = self.bits_per_symbol
        if bits.shape[-1] != m:
            raise ValueError(f"expected trailing dimension {m}, got {bits.shape[-1]}")
        weights = 1 << np.arange(m - 1, -1, -1)
        return (bits.astype(np.int64) * weights).sum(axis=-1)

    def index_to_bits(self, index: np.ndarray) -> np.ndarray:
        return self.bit_labels[np.asarray(index)]

    def slice(self, z: np.ndarray) -> np.ndarray:
        """Nearest-point indices; equidistant ties go to the lowest index."""
        z = np.asarray(z)
        d = np.abs(z[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)

    def max_energy(self) -> float:
        return float(np.max(np.abs(self.points) ** 2))


def make_constellation(order: int, users: int = 1) -> Constellation:
    """Gray-mapped square QAM scaled to average energy ``1/users``.

    >>> c = make_constellation(4, 2)
    >>> sorted(set(np.round(c.points.real, 12)))
    [-0.5, 0.5]
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported constellation order {order}; use one of {SUPPORTED_ORDERS}")
    if users < 1:
        raise ValueError("users must be >= 1")
    m = int(np.log2(order))
    half = m // 2
    side = 1 << half
    pam = np.arange(-(side - 1), side, 2, dtype=float)
    labels = _gray_pam_labels(half)
    # level index for a given Gray label
    level_of_label = np.empty(side, dtype=np.int64)
    level_of_label[labels] = np.arange(side)

    idx = np.arange(order)
    i_label = idx >> half
    q_label = idx & (side - 1)
    i_level = level_of_label[i_label]
    q_level = level_of_label[q_label]
    raw = pam[i_level] + 1j * pam[q_level]

    energy = 1.0 / users
    scale = np.sqrt(energy / np.mean(np.abs(raw) ** 2))
    bit_labels = ((idx[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int8)
    return Constellation(
        order=order,
        points=raw * scale,
        bit_labels=bit_labels,
        energy=energy,
        pam_levels=pam * scale,
        axis_index=np.stack([i_level, q_level], axis=1),
    )


def correlation_matrix(n: int, psi: float) -> np.ndarray:
    """Exponential receive correlation, entry (i, j) = psi**|i-j|."""
    return toeplitz(psi ** np.arange(n))


@dataclass
class ChannelRealization:
    H: np.ndarray
    H_hat: np.ndarray
    gamma: float = 0.0
    psi: float = 0.0
    rician_phi: float = 0.0
    noise_variance: float = 0.0


def rician_parameters(phi: float) -> tuple[float, float]:
    """Per-real-dimension mean and variance of a Rician entry with factor ``phi``."""
    mu = np.sqrt(phi / (2.0 * (phi + 1.0)))
    var = 1.0 / (2.0 * (phi + 1.0))
    return float(mu), float(var)


def draw_channel(
    n: int,
    k: int,
    rng: np.random.Generator,
    psi: float = 0.0,
    phi: float = 0.0,
    gamma: float = 0.0,
    noise_var: float = 0.0,
) -> ChannelRealization:
    """Draw one ``n x k`` channel with optional correlation, LOS and CSI error.

    The base entries are complex with real and imaginary parts
    N(mu, var) from :func:`rician_parameters`; correlation is applied as
    ``Q^{1/2} H`` with the lower Cholesky factor of the exponential
    matrix, and the receiver sees ``H + gamma * Delta``.
    """
    if not (n >= k >= 1):
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    if not (0.0 <= psi < 1.0):
        raise ValueError(f"psi must lie in [0, 1), got {psi}")
    if phi < 0:
        raise ValueError(f"phi must be nonnegative, got {phi}")
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")

    mu, var = rician_parameters(phi)
    sd = np.sqrt(var)
    H = (mu + sd * rng.standard_normal((n, k))) + 1j * (mu + sd * rng.standard_normal((n, k)))
    if psi > 0:
        L = cholesky(correlation_matrix(n, psi), lower=True)
        H = L @ H
    if gamma > 0:
        delta = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2.0)
        H_hat = H + gamma * delta
    else:
        H_hat = H.copy()
    return ChannelRealization(H=H, H_hat=H_hat, gamma=gamma, psi=psi, rician_phi=phi,
                              noise_variance=noise_var)


@dataclass
class TransmitFrame:
    bits: np.ndarray
    symbol_index: np.ndarray
    x: np.ndarray
    y: np.ndarray


def random_bits(rng: np.random.Generator, users: int, m: int) -> np.ndarray:
    return rng.integers(0, 2, size=(users, m), dtype=np.int8)


def transmit(
    bits: np.ndarray,
    const: Constellation,
    channel: ChannelRealization,
    rng: np.random.Generator,
) -> TransmitFrame:
    """``y = H x + noise`` with complex noise of variance ``channel.noise_variance``."""
    bits = np.asarray(bits)
    n, k = channel.H.shape
    if bits.shape != (k, const.bits_per_symbol):
        raise ValueError(f"bits must have shape {(k, const.bits_per_symbol)}, got {bits.shape}")
    index = const.bits_to_index(bits)
    x = const.points[index]
    y = channel.H @ x
    s2 = channel.noise_variance
    if s2 > 0:
        y = y + np.sqrt(s2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return TransmitFrame(bits=bits, symbol_index=index, x=x, y=y)
