"""SINR-variance evolution and closed-form multiplication counts.

The evolution runs in units where the constellation has unit average energy
and the noise variance is ``K * sigma2``; with the ``K * E_s = 1``
normalisation used elsewhere this is just a rescaling by ``K``. Both initial
variances below are already in these units, so ``v_update`` is fed the
rescaled noise ``K * sigma2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .mimo import Constellation, make_constellation

MAX_EVOLUTION_ITERATIONS = 1000
GH_NODES = 64


# ---------------------------------------------------------------------------
# evolution


@dataclass
class EvolutionState:
    t: int
    v: float
    V: float


@dataclass
class EvolutionResult:
    v: float
    iterations: int
    ber: float
    converged: bool
    history: list


def v_initial(N: int, K: int, sigma2: float, variant: str = "b") -> float:
    """Variance of the first PIC estimate.

    ``variant`` is ``"b"`` (matched-filter start) or ``"ib"`` (MMSE start).

    >>> v_initial(4, 4, 1.0, "b")
    1.75
    """
    if N < 1 or K < 1:
        raise ValueError("N and K must be positive")
    v = _variant_key(variant)
    if v == "b":
        return (K - 1 + K * sigma2) / N
    a = K / N
    b = a * sigma2 + (a - 1.0)
    return (b + math.sqrt(b * b + 4.0 * a * sigma2)) / 2.0


def v_update(N: int, K: int, sigma2: float, V: float) -> float:
    """Interference-plus-noise variance after cancelling with residual MSE ``V``."""
    return ((K - 1) * V + sigma2) / N


def _variant_key(variant: str) -> str:
    v = variant.lower().replace("_", "-")
    if v in ("b", "b-pic-dsc"):
        return "b"
    if v in ("ib", "ib-pic-dsc"):
        return "ib"
    raise ValueError(f"unknown evolution variant {variant!r}")


def _unit_constellation(const: Constellation | int) -> Constellation:
    order = const if isinstance(const, (int, np.integer)) else const.order
    return make_constellation(int(order), 1)


def _pam_mse(v: float, levels: np.ndarray, nodes: int) -> float:
    # one real axis: s uniform on levels, r = s + n with n ~ N(0, v/2)
    xi, w = np.polynomial.hermite.hermgauss(nodes)
    n = math.sqrt(v) * xi
    r = levels[:, None] + n[None, :]
    logits = -((r[..., None] - levels) ** 2) / v
    logits -= logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=-1, keepdims=True)
    s_hat = p @ levels
    err = (levels[:, None] - s_hat) ** 2
    return float(np.mean(err @ w) / math.sqrt(math.pi))


def mse_update(v: float, const: Constellation | int = 4, nodes: int = GH_NODES,
               method: str = "separable") -> float:
    """Posterior-mean MSE for an AWGN observation of complex variance ``v``.

    ``method="separable"`` integrates each real axis on its own (exact for
    square QAM); ``"tensor"`` integrates over the complex plane with a
    product rule. Both use ``nodes`` Gauss-Hermite points per axis.
    """
    if not v > 0:
        raise ValueError("v must be positive")
    c = _unit_constellation(const)
    if method == "separable":
        return 2.0 * _pam_mse(v, c.pam_levels, nodes)
    if method != "tensor":
        raise ValueError(f"unknown quadrature method {method!r}")
    xi, w = np.polynomial.hermite.hermgauss(nodes)
    n = math.sqrt(v) * (xi[:, None] + 1j * xi[None, :])
    ww = (w[:, None] * w[None, :]) / math.pi
    pts = c.points
    total = 0.0
    for x in pts:
        r = x + n
        logits = -np.abs(r[..., None] - pts) ** 2 / v
        logits -= logits.max(axis=-1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=-1, keepdims=True)
        x_hat = p @ pts
        total += float(np.sum(ww * np.abs(x - x_hat) ** 2))
    return total / len(pts)


def mse_monte_carlo(v: float, const: Constellation | int, samples: int, rng) -> tuple[float, float]:
    """Sampled estimate of :func:`mse_update` and its standard error."""
    c = _unit_constellation(const)
    idx = rng.integers(0, c.order, samples)
    x = c.points[idx]
    noise = math.sqrt(v / 2.0) * (rng.standard_normal(samples) + 1j * rng.standard_normal(samples))
    r = x + noise
    logits = -np.abs(r[:, None] - c.points) ** 2 / v
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    err = np.abs(x - p @ c.points) ** 2
    return float(err.mean()), float(err.std(ddof=1) / math.sqrt(samples))


def ber_from_sinr(sinr, order: int = 4):
    """Bit error rate of Gray square M-QAM at symbol SNR ``sinr`` (exact per-bit sum).

    For 4-QAM this is ``Q(sqrt(sinr))``.
    """
    sinr = np.asarray(sinr, dtype=float)
    m = int(round(math.log2(order)))
    side = int(round(math.sqrt(order)))
    axis_bits = m // 2
    scale = np.sqrt(3.0 * sinr / (2.0 * (order - 1)))
    total = np.zeros_like(sinr)
    for k in range(1, axis_bits + 1):
        pk = np.zeros_like(sinr)
        for i in range(int((1 - 2.0**-k) * side)):
            a = (i * 2 ** (k - 1)) // side
            weight = (-1) ** a * (2 ** (k - 1) - math.floor(i * 2 ** (k - 1) / side + 0.5))
            pk = pk + weight * erfc((2 * i + 1) * scale)
        total = total + pk / side
    out = total / axis_bits
    return float(out) if out.ndim == 0 else out


def half_erfc_inverse_sqrt(v):
    """``0.5 * erfc(sqrt(1/v))``; equals ``ber_from_sinr(2/v, 4)``."""
    return 0.5 * erfc(np.sqrt(1.0 / np.asarray(v, dtype=float)))


def run_evolution(N: int, K: int, sigma2: float, variant: str = "b",
                  const: Constellation | int = 4, zeta: float = 1e-4,
                  max_iterations: int = MAX_EVOLUTION_ITERATIONS,
                  nodes: int = GH_NODES) -> EvolutionResult:
    """Iterate ``V = mse_update(v)``, ``v = v_update(V)`` until ``|dv| <= zeta``.

    ``sigma2`` is the physical noise variance (``10**(-SNR/10)``). Returns the
    final ``v``, the iteration count, the predicted BER and whether the
    iteration converged before ``max_iterations``.
    """
    order = const if isinstance(const, (int, np.integer)) else const.order
    v = v_initial(N, K, sigma2, variant)
    s2n = K * sigma2
    history = [EvolutionState(0, v, 1.0)]
    converged = False
    t = 0
    for t in range(1, max_iterations + 1):
        V = mse_update(v, order, nodes)
        v_new = v_update(N, K, s2n, V)
        history.append(EvolutionState(t, v_new, V))
        delta = abs(v_new - v)
        v = v_new
        if delta <= zeta:
            converged = True
            break
    return EvolutionResult(v=v, iterations=t, ber=ber_from_sinr(1.0 / v, int(order)),
                           converged=converged, history=history)


def fixed_point_residual(N: int, K: int, sigma2: float, v: float, const=4) -> float:
    """``|v - v_update(mse_update(v))|`` in the evolution's units."""
    return abs(v - v_update(N, K, K * sigma2, mse_update(v, const)))


# ---------------------------------------------------------------------------
# complexity


DETECTORS = (
    "AMI-GS", "HF-ADMM", "HI", "MMSE", "MMSE-SIC", "PIC-DSC", "AMP", "OAMP",
    "B-PIC-DSC", "IB-PIC-DSC", "EP-NSA", "EPA", "D-EP", "EP",
)


@dataclass(frozen=True)
class ComplexitySpec:
    detector: str
    N: int
    K: int
    M: int = 4
    T: int = 1
    Nc: int | None = None
    C: int | None = None


def _canonical(name: str) -> str:
    key = name.upper().replace("_", "-").replace(" ", "-")
    aliases = {"AMI": "AMI-GS", "AMI/GS": "AMI-GS", "DEP": "D-EP", "EPNSA": "EP-NSA"}
    key = aliases.get(key, key)
    if key not in DETECTORS:
        raise ValueError(f"unknown detector {name!r}; choose from {DETECTORS}")
    return key


def multiplication_count(spec: ComplexitySpec) -> int:
    """Closed-form multiplication count for one detector."""
    d = _canonical(spec.detector)
    N, K, M, T = int(spec.N), int(spec.K), int(spec.M), int(spec.T)
    if min(N, K, M, T) < 1:
        raise ValueError("N, K, M and T must be positive")
    if d == "AMI-GS":
        return (4 * N + 4 * T - 2) * K**2 + 2 * (N - 2 * T + 1) * K
    if d == "HF-ADMM":
        return 2 * N * K**2 + (N + 1) * K + (N * K**2 + 9 * K**2) * T
    if d == "HI":
        return 5 * K**2 + K - 6 + (2 * K**2 + 8 * K + 6) * T
    if d == "MMSE":
        return (N + 1) * K**2 + N**2 * K + N * K
    if d == "MMSE-SIC":
        return sum((N + 1) * k**2 + N**2 * k + N * k for k in range(K + 1))
    if d == "PIC-DSC":
        return 4 * (N + 1) * K * T
    if d == "AMP":
        return (4 * N * K + 8 * N + 6 * K + 4 * M * K) * T
    if d == "OAMP":
        return (K - 1) * N * K + (2 * N**2 * K + N * K**2 + 2 * N * K + 12 * K + 4 * M * K + 8) * T
    if d == "B-PIC-DSC":
        return (4 * N * K + 12 * K + 4 * M * K) * T - (N * K + 5 * K)
    if d == "IB-PIC-DSC":
        return N**2 * K + N * K**2 - 4 * K - 2 * N * K + (4 * N * K + 12 * K + 4 * M * K) * T
    if d == "EP-NSA":
        return (N + 1) * K**2 + (N**2 + N + 1) * K + ((K + 1) * 2 * K**2 + (4 * N + 4 * M + 14) * K) * T
    if d == "EPA":
        return (N + 1) * K**2 + (N**2 - 1) * K + (2 * N + 4 * M + 8) * K * T
    if d == "D-EP":
        if spec.Nc is None or spec.C is None:
            raise ValueError("D-EP needs the cluster size Nc and cluster count C")
        Nc, C = int(spec.Nc), int(spec.C)
        return (K**2 + K) * Nc * C + (Nc**2 * C + K * C + 3 * C + 4 * M + 17) * K * T
    # EP
    return N * K**2 + (N - 1) * K + (N**2 * K + K**2 + 19 * K + 4 * M * K) * T
