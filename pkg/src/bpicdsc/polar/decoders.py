"""SC, stack (SCS) and sequential decoding of polar codes.

All decoders take channel LLRs in codeword order, ``log P(c=0)/P(c=1)``.
Stack decoders keep at most ``L * eta`` paths; once ``L`` paths of some
length exist, shorter paths are dropped. ``iterations`` counts path
extensions popped from the queue.

By default a stack decoder stops at the first full path to reach the top of
the queue and the CRC only labels the outcome. With ``crc_aided=True`` full
paths failing the CRC are set aside and the search continues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .codec import bit_reversal, log2_length
from .construction import BiasTable, PolarCodeSpec

OUTCOMES = {
    _kernels.OUTCOME_DECODED: "decoded",
    _kernels.OUTCOME_CRC_PASS: "crc-pass",
    _kernels.OUTCOME_CRC_FAIL: "crc-fail",
    _kernels.OUTCOME_EXHAUSTED: "stack-exhausted",
}


@dataclass
class DecodeStats:
    iterations: int
    flops: dict = field(default_factory=lambda: {"add": 0, "cmp": 0, "mul": 0})
    outcome: str = "decoded"

    @property
    def failed(self) -> bool:
        return self.outcome in ("crc-fail", "stack-exhausted")


@dataclass
class DecodeResult:
    u: np.ndarray
    message: np.ndarray
    stats: DecodeStats


def _tree_llr(llr, eta):
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.shape != (eta,):
        raise ValueError(f"expected {eta} LLRs, got shape {llr.shape}")
    return np.ascontiguousarray(llr[bit_reversal(eta)])


def _flops(f):
    return {"add": int(f[0]), "cmp": int(f[1]), "mul": int(f[2])}


def _result(u, spec, pops, flops, outcome):
    u = np.asarray(u, dtype=np.uint8)
    msg = u[spec.info_positions][: spec.message_length]
    return DecodeResult(u=u, message=msg, stats=DecodeStats(int(pops), _flops(flops), outcome))


def decode_sc(llr, spec: PolarCodeSpec) -> DecodeResult:
    """Successive cancellation; a bit is decided 1 exactly when its LLR is negative."""
    u, fl = _kernels.sc_decode(_tree_llr(llr, spec.eta), spec.frozen.astype(np.uint8))
    return _result(u, spec, spec.eta, fl, _crc_outcome(u, spec))


def _crc_outcome(u, spec):
    if not spec.crc.width:
        return "decoded"
    return "crc-pass" if spec.crc.check(np.asarray(u)[spec.info_positions]) else "crc-fail"


def _stack(llr, spec, log_bias, list_size, mode, crc_aided):
    if list_size < 1:
        raise ValueError("list size must be >= 1")
    aided = crc_aided and spec.crc.width > 0
    u, pops, fl, outcome = _kernels.stack_decode(
        _tree_llr(llr, spec.eta), spec.frozen.astype(np.uint8),
        np.ascontiguousarray(log_bias, dtype=np.float64), int(list_size), mode,
        spec.crc.poly_low if aided else 0, spec.crc.width if aided else 0,
        spec.info_positions if aided else None,
    )
    label = OUTCOMES[outcome]
    if label == "decoded":
        label = _crc_outcome(u, spec)
    return _result(u, spec, pops, fl, label)


def decode_scs(llr, spec: PolarCodeSpec, list_size: int, crc_aided: bool = False) -> DecodeResult:
    """Stack decoding with the exact path log-probability as score."""
    return _stack(llr, spec, np.zeros(spec.eta + 1), list_size, _kernels.MODE_SCS, crc_aided)


def decode_sequential(llr, spec: PolarCodeSpec, bias: BiasTable, list_size: int,
                      crc_aided: bool = False) -> DecodeResult:
    """Stack decoding scored by the max-continuation log-probability plus ``bias``.

    Path scores use additions and comparisons only.
    """
    if len(bias.log_omega) != spec.eta + 1:
        raise ValueError("bias table length does not match the code")
    return _stack(llr, spec, bias.log_omega, list_size, _kernels.MODE_SEQ, crc_aided)


def path_metrics(llr, spec: PolarCodeSpec, u, score: str = "scs") -> np.ndarray:
    """Path metric after each decided bit of ``u`` (length ``eta + 1``, starting at 0).

    ``score="scs"`` gives the exact log path probability, ``"seq"`` the
    max-continuation log probability without bias.
    """
    from .._kernels import _pycore

    if score not in ("scs", "seq"):
        raise ValueError("score must be 'scs' or 'seq'")
    eta = spec.eta
    n = log2_length(eta)
    lam_in = [float(v) for v in _tree_llr(llr, eta)]
    u = np.asarray(u, dtype=np.uint8)
    alpha, betal, fl = [0.0] * eta, [0] * eta, [0, 0, 0]
    out = np.zeros(eta + 1)
    for i in range(eta):
        lam = _pycore._update_alpha(alpha, betal, lam_in, i, n, score == "scs", fl)
        x = lam if u[i] == 0 else -lam
        step = -_pycore._softplus_penalty(x, fl) if score == "scs" else min(0.0, x)
        out[i + 1] = out[i] + step
        _pycore._update_beta(betal, i, int(u[i]), n)
    return out
