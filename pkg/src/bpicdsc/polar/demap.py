"""Soft demapping of Gaussian symbol observations into bit LLRs."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..mimo import Constellation

LLR_CLIP = 50.0


def demap_llr(soft_symbols, soft_variances, const: Constellation, clip: float = LLR_CLIP):
    """Bit LLRs ``log P(b=0) / P(b=1)`` for each user and bit, flattened user-major.

    Each observation is modelled as the transmitted point plus complex
    Gaussian noise of the given variance. Leading batch axes are kept.
    """
    x = np.asarray(soft_symbols)
    s = np.asarray(soft_variances, dtype=float)
    if np.any(s <= 0):
        raise ValueError("soft variances must be positive")
    logits = -np.abs(x[..., None] - const.points) ** 2 / s[..., None]
    labels = const.bit_labels.T.astype(bool)  # (m, M)
    neg = np.where(labels, -np.inf, 0.0)
    l0 = logsumexp(logits[..., None, :] + neg, axis=-1)
    l1 = logsumexp(logits[..., None, :] + np.where(labels, 0.0, -np.inf), axis=-1)
    llr = np.clip(l0 - l1, -clip, clip)
    return llr.reshape(llr.shape[:-2] + (-1,))


def hard_bits(llr) -> np.ndarray:
    return (np.asarray(llr) < 0).astype(np.uint8)
