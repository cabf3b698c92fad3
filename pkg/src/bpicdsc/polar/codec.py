"""Polar transform, bit reversal and the random interleaver."""

from __future__ import annotations

import numpy as np


def log2_length(eta: int) -> int:
    n = int(eta).bit_length() - 1
    if eta < 1 or (1 << n) != eta:
        raise ValueError(f"length must be a power of two, got {eta}")
    return n


def bit_reversal(eta: int) -> np.ndarray:
    """Index permutation ``j -> reverse of the n-bit binary expansion of j``."""
    n = log2_length(eta)
    idx = np.arange(eta)
    out = np.zeros(eta, dtype=np.int64)
    for b in range(n):
        out |= ((idx >> b) & 1) << (n - 1 - b)
    return out


def polar_transform(u) -> np.ndarray:
    """``u F^{(x)n}`` over GF(2) with ``F = [[1, 0], [1, 1]]``; works on a leading batch axis."""
    x = np.array(u, dtype=np.uint8, copy=True)
    eta = x.shape[-1]
    log2_length(eta)
    lead = x.shape[:-1]
    h = 1
    while h < eta:
        v = x.reshape(lead + (eta // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


def encode(u, frozen=None) -> np.ndarray:
    """Codeword ``u B F^{(x)n}`` where ``B`` is the bit-reversal permutation.

    When ``frozen`` (boolean mask) is given the frozen positions of ``u`` must be zero.
    """
    u = np.asarray(u, dtype=np.uint8)
    if frozen is not None and np.any(u[..., np.asarray(frozen, dtype=bool)]):
        raise ValueError("nonzero bit in a frozen position")
    return polar_transform(u)[..., bit_reversal(u.shape[-1])]


def interleaver(eta: int, seed: int) -> np.ndarray:
    """Seeded uniform permutation of ``range(eta)``."""
    return np.random.default_rng(int(seed)).permutation(int(eta))


def interleave(bits, seed: int) -> np.ndarray:
    bits = np.asarray(bits)
    return bits[..., interleaver(bits.shape[-1], seed)]


def deinterleave(values, seed: int) -> np.ndarray:
    values = np.asarray(values)
    perm = interleaver(values.shape[-1], seed)
    out = np.empty_like(values)
    out[..., perm] = values
    return out
