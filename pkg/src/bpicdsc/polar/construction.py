"""Code construction by Gaussian-approximation density evolution, and bias tables.

Subchannel ``i`` is the input bit ``u_i``. Splitting on the most significant
index bit first, the lower half of each split sees the check-node combination
and the upper half the variable-node combination of its parent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr

from .codec import interleaver, log2_length
from .crc import CRC, CRC11_POLY

# piecewise approximation of phi(x) = 1 - E[tanh(L/2)], L ~ N(x, 2x)
_A, _B, _C = -0.4527, 0.86, 0.0218
_SPLIT = 10.0


def log_phi(x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x < _SPLIT:
        return _A * x**_B + _C
    return 0.5 * math.log(math.pi / x) - x / 4.0 + math.log1p(-10.0 / (7.0 * x))


def phi(x: float) -> float:
    return math.exp(log_phi(x))


def _log_phi_inv(target: float) -> float:
    """Inverse of :func:`log_phi` for ``target <= 0``."""
    if target >= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while log_phi(hi) > target:
        hi *= 2.0
    return brentq(lambda x: log_phi(x) - target, lo, hi, xtol=1e-13, rtol=1e-14, maxiter=500)


def check_node_mean(m: float) -> float:
    """Mean of the check-node combination of two LLRs with mean ``m``."""
    if m <= 0.0:
        return 0.0
    lp = log_phi(m)
    p = math.exp(lp)
    # 1 - (1 - p)^2 = p (2 - p), kept in logs for tiny p
    return _log_phi_inv(lp + math.log(2.0 - p))


def ga_means(eta: int, m0: float) -> np.ndarray:
    """LLR mean of every subchannel for channel LLR mean ``m0``."""
    n = log2_length(eta)
    means = [float(m0)]
    for _ in range(n):
        nxt = []
        for m in means:
            nxt.append(check_node_mean(m))
            nxt.append(2.0 * m)
        means = nxt
    return np.asarray(means)


def llr_mean_for_variance(v: float, order: int = 4) -> float:
    """Channel LLR mean for observation variance ``v`` (unit-energy units).

    Exact for 4-QAM; for larger orders the nearest-neighbour distance is used.
    """
    if not v > 0:
        raise ValueError("v must be positive")
    return 6.0 / ((order - 1) * v)


def subchannel_log_error(eta: int, v: float, order: int = 4) -> np.ndarray:
    """``log P_j`` with ``P_j = Q(sqrt(m_j / 2))``."""
    m = ga_means(eta, llr_mean_for_variance(v, order))
    return log_ndtr(-np.sqrt(m / 2.0))


def subchannel_error_probabilities(eta: int, v: float, order: int = 4) -> np.ndarray:
    return np.exp(subchannel_log_error(eta, v, order))


@dataclass
class PolarCodeSpec:
    eta: int
    kappa: int
    frozen: np.ndarray  # boolean mask, True where u_i is pinned to zero
    crc: CRC = field(default_factory=lambda: CRC(11, CRC11_POLY))
    interleaver_seed: int = 0
    design_v: float | None = None
    error_probabilities: np.ndarray | None = None

    def __post_init__(self):
        log2_length(self.eta)
        self.frozen = np.asarray(self.frozen, dtype=bool)
        if self.frozen.shape != (self.eta,):
            raise ValueError("frozen mask must have length eta")
        if int((~self.frozen).sum()) != self.kappa:
            raise ValueError("frozen mask does not leave kappa information positions")
        if self.crc.width > self.kappa:
            raise ValueError("CRC longer than the information block")

    @property
    def frozen_set(self) -> np.ndarray:
        return np.flatnonzero(self.frozen)

    @property
    def info_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen)

    @property
    def message_length(self) -> int:
        return self.kappa - self.crc.width

    @property
    def rate(self) -> float:
        return self.message_length / self.eta

    @property
    def permutation(self) -> np.ndarray:
        return interleaver(self.eta, self.interleaver_seed)

    def place_message(self, message) -> np.ndarray:
        """Input vector ``u``: message plus CRC on the information positions, zeros elsewhere."""
        msg = np.asarray(message, dtype=np.uint8)
        if msg.shape != (self.message_length,):
            raise ValueError(f"message must have {self.message_length} bits")
        u = np.zeros(self.eta, dtype=np.uint8)
        u[self.info_positions] = self.crc.attach(msg) if self.crc.width else msg
        return u


def _frozen_from_ranking(eta: int, kappa: int, most_reliable_first) -> np.ndarray:
    frozen = np.ones(eta, dtype=bool)
    frozen[np.asarray(most_reliable_first[:kappa], dtype=np.int64)] = False
    return frozen


def read_reliability_sequence(path, eta: int) -> np.ndarray:
    """Indices from a text file (one per line, most reliable first), restricted to ``< eta``.

    Longer mother sequences are nested: entries ``>= eta`` are skipped.
    """
    seq = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            seq.append(int(s))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: not an integer: {s!r}") from exc
    arr = np.asarray(seq, dtype=np.int64)
    if np.any(arr < 0):
        raise ValueError(f"{path}: negative index")
    arr = arr[arr < eta]
    if len(arr) != eta or len(np.unique(arr)) != eta:
        raise ValueError(f"{path}: does not contain each index below {eta} exactly once")
    return arr


def construct_code(eta: int, kappa: int, crc_len: int = 11, design_v: float = 1.0,
                   frozen_source: str = "ga", frozen_file=None, crc_poly=CRC11_POLY,
                   interleaver_seed: int = 0, order: int = 4) -> PolarCodeSpec:
    """Build a code whose ``kappa`` information positions include ``crc_len`` CRC bits."""
    log2_length(eta)
    if not 0 < kappa <= eta:
        raise ValueError(f"need 0 < kappa <= eta, got kappa={kappa}, eta={eta}")
    crc = CRC.from_hex(crc_len, crc_poly) if crc_len else CRC(0, 0)
    probs = None
    if frozen_source == "ga":
        logp = subchannel_log_error(eta, design_v, order)
        # most reliable first; stable so equal reliabilities prefer the higher index
        ranking = np.argsort(logp[::-1], kind="stable")
        ranking = eta - 1 - ranking
        frozen = _frozen_from_ranking(eta, kappa, ranking)
        probs = np.exp(logp)
    elif frozen_source == "file":
        if frozen_file is None:
            raise ValueError("frozen_source 'file' needs frozen_file")
        frozen = _frozen_from_ranking(eta, kappa, read_reliability_sequence(frozen_file, eta))
    else:
        raise ValueError(f"unknown frozen_source {frozen_source!r}")
    return PolarCodeSpec(eta=eta, kappa=kappa, frozen=frozen, crc=crc,
                         interleaver_seed=interleaver_seed, design_v=design_v,
                         error_probabilities=probs)


def load_code_spec(path, design_v: float = 1.0, order: int = 4) -> PolarCodeSpec:
    """Read a JSON code description.

    Keys: ``eta``, ``kappa``, ``crc_len``, ``crc_poly_hex``, ``frozen_source``
    (``"ga"`` or ``"file"``), ``frozen_file`` (relative to the JSON file) and
    ``interleaver_seed``.
    """
    path = Path(path)
    cfg = json.loads(path.read_text())
    known = {"eta", "kappa", "crc_len", "crc_poly_hex", "frozen_source", "frozen_file",
             "interleaver_seed"}
    extra = set(cfg) - known
    if extra:
        raise ValueError(f"unknown code-spec keys: {sorted(extra)}")
    for key in ("eta", "kappa"):
        if key not in cfg:
            raise ValueError(f"code spec missing {key!r}")
    frozen_file = cfg.get("frozen_file")
    if frozen_file is not None and not Path(frozen_file).is_absolute():
        frozen_file = path.parent / frozen_file
    return construct_code(
        int(cfg["eta"]), int(cfg["kappa"]), int(cfg.get("crc_len", 11)), design_v,
        cfg.get("frozen_source", "ga"), frozen_file, cfg.get("crc_poly_hex", hex(CRC11_POLY)),
        int(cfg.get("interleaver_seed", 0)), order,
    )


@dataclass(frozen=True)
class BiasTable:
    probabilities: np.ndarray  # P_j per subchannel
    log_omega: np.ndarray  # length eta + 1, log of the survival product of frozen j >= i

    def omega(self) -> np.ndarray:
        return np.exp(self.log_omega)


def bias_from_probabilities(frozen, probabilities) -> BiasTable:
    frozen = np.asarray(frozen, dtype=bool)
    p = np.clip(np.asarray(probabilities, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        terms = np.where(frozen, np.log1p(-p), 0.0)
    log_omega = np.zeros(len(frozen) + 1)
    log_omega[:-1] = np.cumsum(terms[::-1])[::-1]
    return BiasTable(probabilities=p, log_omega=log_omega)


def bias_table(spec: PolarCodeSpec, v: float, order: int = 4) -> BiasTable:
    """Bias table for decoding at observation variance ``v`` (unit-energy units).

    ``log_omega[i]`` is the log probability that every frozen subchannel
    ``j >= i`` (0-based) survives, so paths of ``i`` decided bits are scored
    against the frozen bits still ahead of them.
    """
    return bias_from_probabilities(spec.frozen, subchannel_error_probabilities(spec.eta, v, order))
