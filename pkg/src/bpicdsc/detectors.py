"""Bayesian PIC-DSC detectors and the linear / exhaustive baselines.

Every detector consumes ``(y, H_hat, noise_var, constellation)`` and returns a
:class:`DetectionResult`. The iterative detectors are written for a leading
batch axis so many trials can be processed in one call; the single-trial
helpers simply add and remove that axis.

Multiplication counts follow one convention throughout: a complex product,
a complex-by-real scaling and a squared magnitude each count as one
multiplication. Divisions count as multiplications.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .mimo import Constellation

VARIANTS = ("b-pic-dsc", "ib-pic-dsc", "pic-dsc", "mmse", "matched-filter", "ml")

# floor applied to observation variances so the posterior stays finite when noise_var == 0
_SIGMA_FLOOR = 1e-300


@dataclass
class DetectorConfig:
    variant: str = "b-pic-dsc"
    t_max: int = 10
    zeta: float = 1e-4
    exact_sigma: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown detector variant {self.variant!r}; choose from {VARIANTS}")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")


@dataclass
class DetectorState:
    """Snapshot of one iteration of the PIC-DSC loop for a single trial."""

    iteration: int
    x_pic: np.ndarray
    sigma: np.ndarray
    x_hat: np.ndarray
    V: np.ndarray
    x_dsc: np.ndarray
    V_dsc: np.ndarray
    rho: np.ndarray
    e: np.ndarray
    converged: bool = False


@dataclass
class DetectionResult:
    soft_symbols: np.ndarray
    soft_variances: np.ndarray
    hard_symbols: np.ndarray
    hard_bits: np.ndarray
    iterations_used: np.ndarray | int
    flop_count: np.ndarray | int
    per_iteration_trace: list = field(default_factory=list)
    x_hat_history: np.ndarray | None = None


# ---------------------------------------------------------------------------
# building blocks (broadcast over any leading axes)


def _herm_mv(H, r):
    """``H^H r`` for stacked matrices ``(..., N, K)`` and vectors ``(..., N)``."""
    r = np.asarray(r)
    return np.matmul(r.conj()[..., None, :], H)[..., 0, :].conj()


def _mv(H, x):
    return np.matmul(H, np.asarray(x)[..., None])[..., 0]


def _rows_mv(W, r):
    """``W r`` for stacked filter rows ``(..., K, N)``."""
    return np.matmul(W, np.asarray(r)[..., None])[..., 0]


def _gram(H):
    return np.matmul(np.swapaxes(H, -1, -2).conj(), H)


def column_energy(H):
    H = np.asarray(H)
    return np.sum(H.real**2 + H.imag**2, axis=-2)


def matched_filter(y, H):
    """Per-user matched filter ``h_k^H y / ||h_k||^2``."""
    y = np.asarray(y)
    H = np.asarray(H)
    d = column_energy(H)
    if np.any(d == 0):
        raise ValueError("channel has a zero-norm column")
    return _herm_mv(H, y) / d


def _mmse_system(H, noise_var, symbol_energy=1.0):
    """``H^H H + (noise_var/E_s) I``, refusing singular systems."""
    k = H.shape[-1]
    reg = np.asarray(noise_var, dtype=float) / symbol_energy
    G = _gram(H)
    A = G + reg[..., None, None] * np.eye(k) if np.ndim(reg) else G + reg * np.eye(k)
    if np.any(reg == 0) and np.any(np.linalg.cond(A) > 1e14):
        raise np.linalg.LinAlgError("singular MMSE system")
    return A


def mmse_matrix(H, noise_var, symbol_energy=1.0):
    """Rows ``w_k^H`` of ``(H^H H + (noise_var/E_s) I)^{-1} H^H``.

    Raises ``numpy.linalg.LinAlgError`` when the system is singular.
    """
    H = np.asarray(H)
    return np.linalg.solve(_mmse_system(H, noise_var, symbol_energy), np.swapaxes(H.conj(), -1, -2))


def mmse_detect(y, H, noise_var, symbol_energy=1.0):
    """Linear MMSE estimate ``(H^H H + (noise_var/E_s) I)^{-1} H^H y``.

    With the default ``symbol_energy=1`` this is the textbook expression;
    the detectors pass the constellation energy so the regulariser matches
    the actual noise-to-signal ratio.
    """
    H = np.asarray(H)
    A = _mmse_system(H, noise_var, symbol_energy)
    return np.linalg.solve(A, _herm_mv(H, y)[..., None])[..., 0]


def bso_step(y, H, x_prior, V_prior, noise_var, exact_sigma=False, d=None):
    """Parallel interference cancellation with matched filtering.

    Returns ``(x_pic, sigma)`` where ``x_pic[k] = h_k^H (y - H x_prior\\k) / ||h_k||^2``.
    """
    y = np.asarray(y)
    H = np.asarray(H)
    if d is None:
        d = column_energy(H)
    if np.any(d == 0):
        raise ValueError("channel has a zero-norm column")
    x_prior = np.asarray(x_prior, dtype=complex)
    r = y - _mv(H, x_prior)
    x_pic = x_prior + _herm_mv(H, r) / d
    return x_pic, observation_variance(H, V_prior, noise_var, exact_sigma, d)


def observation_variance(H, V_prior, noise_var, exact_sigma=False, d=None):
    """Variance of the PIC estimate, approximate or full form."""
    if d is None:
        d = column_energy(H)
    s2 = np.asarray(noise_var, dtype=float)
    s2 = s2[..., None] if s2.ndim else s2
    if not exact_sigma:
        return s2 / d
    G = _gram(H)
    G2 = np.abs(G) ** 2
    k = H.shape[-1]
    G2 = G2 * (1.0 - np.eye(k))
    interference = np.einsum("...kj,...j->...k", G2, np.asarray(V_prior, dtype=float))
    return (interference + d * s2) / d**2


def bse_step(x_pic, sigma, const: Constellation):
    """Posterior mean and variance over the constellation.

    Returns ``(x_hat, V, posterior)`` with ``posterior`` of shape ``(..., M)``.
    Computed in the log domain with per-user max subtraction.
    """
    x_pic = np.asarray(x_pic)
    sig = np.maximum(np.asarray(sigma, dtype=float), _SIGMA_FLOOR)
    dist = np.abs(x_pic[..., None] - const.points) ** 2
    logits = -dist / sig[..., None]
    logits -= logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=-1, keepdims=True)
    x_hat = p @ const.points
    V = np.einsum("...m,...m->...", p, np.abs(const.points - x_hat[..., None]) ** 2)
    return x_hat, V, p


def dsc_step(x_hat, V, x_hat_prev, V_prev, e, e_prev):
    """Combine consecutive estimates with ``rho = e_prev / (e + e_prev)``.

    A zero denominator yields ``rho = 1``.
    """
    e = np.asarray(e, dtype=float)
    e_prev = np.asarray(e_prev, dtype=float)
    den = e + e_prev
    safe = np.where(den > 0, den, 1.0)
    rho = np.where(den > 0, e_prev / safe, 1.0)
    x_dsc = (1.0 - rho) * x_hat_prev + rho * x_hat
    V_dsc = (1.0 - rho) * V_prev + rho * V
    return x_dsc, V_dsc, rho


def instantaneous_error(y, H, x_hat, W):
    """``e_k = |w_k^H (y - H x_hat)|^2`` for filter rows ``W`` of shape ``(..., K, N)``."""
    r = np.asarray(y) - _mv(np.asarray(H), np.asarray(x_hat))
    return np.abs(_rows_mv(W, r)) ** 2


def matched_filter_rows(H):
    d = column_energy(H)
    return np.swapaxes(H.conj(), -1, -2) / d[..., :, None]


# ---------------------------------------------------------------------------
# iterative detectors


def _hard_from_posterior(p):
    return np.argmax(p, axis=-1)


def pic_dsc_batch(Y, H, noise_var, const: Constellation, config: DetectorConfig,
                  keep_history=False):
    """Run the PIC-DSC loop on a batch of trials.

    ``Y`` is ``(B, N)``, ``H`` is ``(B, N, K)`` and ``noise_var`` a scalar or
    ``(B,)``. The variant in ``config`` selects matched-filter start
    (``b-pic-dsc``), MMSE start (``ib-pic-dsc``) or the hard-decision
    classical loop (``pic-dsc``).
    """
    Y = np.asarray(Y, dtype=complex)
    H = np.asarray(H, dtype=complex)
    B, N, K = H.shape
    M = const.order
    s2 = np.broadcast_to(np.asarray(noise_var, dtype=float), (B,)).copy()
    variant = config.variant
    bayesian = variant != "pic-dsc"

    d = column_energy(H)
    if np.any(d == 0):
        raise ValueError("channel has a zero-norm column")
    flops = np.full(B, N * K, dtype=np.int64)

    if variant == "ib-pic-dsc":
        # W = A^{-1} H^H is applied as A^{-1} (H^H r), never formed
        W = np.linalg.inv(_mmse_system(H, s2, const.energy))
        x_prior = _rows_mv(W, _herm_mv(H, Y))
        # Gram NK^2, solve K^3, W = A^{-1} H^H NK^2, W y NK
        flops += 2 * N * K * K + K**3 + N * K
    else:
        W = None
        x_prior = np.zeros((B, K), dtype=complex)

    V_prior = np.ones((B, K))
    x_dsc_prev = x_prior.copy()
    x_hat_prev = np.zeros((B, K), dtype=complex)
    e_prev = np.zeros((B, K))
    g_prev = None  # H^H (y - H x_hat) of the previous iteration

    active = np.ones(B, dtype=bool)
    iters = np.zeros(B, dtype=np.int64)
    x_pic_out = np.zeros((B, K), dtype=complex)
    sig_out = np.zeros((B, K))
    post_out = np.zeros((B, K, M))
    history = np.zeros((B, config.t_max, K), dtype=complex) if keep_history else None
    trace = [] if config.trace else None
    exact_extra = (N * K * K + K * K) if config.exact_sigma else 0

    for t in range(1, config.t_max + 1):
        # BSO
        if t == 1 and variant != "ib-pic-dsc":
            x_pic = _herm_mv(H, Y) / d
            cost = 2 * N * K + K  # gram diagonal, H^H y, scaling
        elif t == 2 and g_prev is not None:
            # the first combination is the plain estimate, so its residual is already known
            x_pic = x_prior + g_prev / d
            cost = K
        else:
            r = Y - _mv(H, x_prior)
            x_pic = x_prior + _herm_mv(H, r) / d
            cost = 2 * N * K + K
        sigma = observation_variance(H, V_prior, s2, config.exact_sigma, d)
        cost += K + exact_extra

        # BSE
        if bayesian:
            x_hat, V, post = bse_step(x_pic, sigma, const)
            cost += 4 * M * K
        else:
            idx = const.slice(x_pic)
            x_hat = const.points[idx]
            V = np.zeros((B, K))
            post = np.zeros((B, K, M))
            np.put_along_axis(post, idx[..., None], 1.0, axis=-1)
            cost += M * K

        # DSC
        r_hat = Y - _mv(H, x_hat)
        g = _herm_mv(H, r_hat)
        if W is None:
            e = np.abs(g / d) ** 2
        else:
            e = np.abs(_rows_mv(W, g)) ** 2
            g = None
        cost += 2 * N * K + 2 * K
        if t == 1:
            x_dsc, V_dsc, rho = x_hat, V, np.ones((B, K))
            g_prev = g
        else:
            x_dsc, V_dsc, rho = dsc_step(x_hat, V, x_hat_prev, V_prior, e, e_prev)
            cost += 5 * K
            g_prev = None

        # only active trials take the update
        a = active
        flops[a] += cost
        iters[a] = t
        x_pic_out[a] = x_pic[a]
        sig_out[a] = sigma[a]
        post_out[a] = post[a]
        if history is not None:
            history[a, t - 1] = x_hat[a]
            history[~a, t - 1] = history[~a, t - 2]
        if trace is not None:
            trace.append(DetectorState(
                iteration=t, x_pic=x_pic.copy(), sigma=sigma.copy(), x_hat=x_hat.copy(),
                V=np.asarray(V).copy(), x_dsc=x_dsc.copy(), V_dsc=np.asarray(V_dsc).copy(),
                rho=np.asarray(rho).copy(), e=e.copy(),
            ))

        change = np.max(np.abs(x_dsc - x_dsc_prev), axis=1)
        done_now = a & (change <= config.zeta)

        x_prior = np.where(a[:, None], x_dsc, x_prior)
        V_prior = np.where(a[:, None], V_dsc, V_prior)
        x_dsc_prev = np.where(a[:, None], x_dsc, x_dsc_prev)
        x_hat_prev = np.where(a[:, None], x_hat, x_hat_prev)
        e_prev = np.where(a[:, None], e, e_prev)
        if trace is not None:
            trace[-1].converged = bool(done_now.all())
        active = a & ~done_now
        if not active.any():
            if history is not None:
                history[:, t:] = history[:, t - 1 : t]
            break

    hard = _hard_from_posterior(post_out)
    return DetectionResult(
        soft_symbols=x_pic_out,
        soft_variances=sig_out,
        hard_symbols=hard,
        hard_bits=const.index_to_bits(hard),
        iterations_used=iters,
        flop_count=flops,
        per_iteration_trace=trace or [],
        x_hat_history=history,
    )


def _linear_result(x_est, sigma, const, flops, B):
    hard = const.slice(x_est)
    return DetectionResult(
        soft_symbols=x_est,
        soft_variances=sigma,
        hard_symbols=hard,
        hard_bits=const.index_to_bits(hard),
        iterations_used=np.ones(B, dtype=np.int64),
        flop_count=np.full(B, flops, dtype=np.int64),
    )


def ml_batch(Y, H, const: Constellation, method="sphere"):
    """Exact ML symbol indices for a batch of trials.

    ``method="sphere"`` runs the depth-first sphere search kernel;
    ``"exhaustive"`` enumerates all ``M**K`` candidates.
    """
    Y = np.asarray(Y, dtype=complex)
    H = np.asarray(H, dtype=complex)
    B, N, K = H.shape
    if method == "exhaustive":
        return np.stack([_ml_exhaustive(Y[b], H[b], const) for b in range(B)])
    if method != "sphere":
        raise ValueError(f"unknown ML method {method!r}")
    # real-valued model [Re; Im]
    Hr = np.concatenate(
        [np.concatenate([H.real, -H.imag], axis=2), np.concatenate([H.imag, H.real], axis=2)],
        axis=1,
    )
    yr = np.concatenate([Y.real, Y.imag], axis=1)
    Q, R = np.linalg.qr(Hr)
    z = np.einsum("bnk,bn->bk", Q, yr)
    levels = np.ascontiguousarray(const.pam_levels)
    out = np.empty((B, K), dtype=np.int64)
    lookup = {(int(i), int(q)): s for s, (i, q) in enumerate(const.axis_index)}
    for b in range(B):
        lv = _kernels.sphere_search(np.ascontiguousarray(R[b]), np.ascontiguousarray(z[b]), levels)
        out[b] = [lookup[(int(lv[k]), int(lv[k + K]))] for k in range(K)]
    return out


def _ml_exhaustive(y, H, const, max_candidates=1 << 20):
    K = H.shape[1]
    M = const.order
    if M**K > max_candidates:
        raise ValueError(f"ML search space {M}^{K} exceeds {max_candidates} candidates")
    z = H.conj().T @ y
    G = H.conj().T @ H
    best, best_idx = np.inf, None
    # enumerate in blocks over the first users to bound memory
    grid = np.indices((M,) * K).reshape(K, -1).T
    for start in range(0, grid.shape[0], 1 << 14):
        idx = grid[start : start + (1 << 14)]
        X = const.points[idx]
        metric = np.einsum("ck,kj,cj->c", X.conj(), G, X).real - 2 * (X.conj() @ z).real
        j = int(np.argmin(metric))
        if metric[j] < best:
            best, best_idx = metric[j], idx[j]
    return np.asarray(best_idx)


def ml_oracle(y, H, const: Constellation, method="sphere"):
    """ML hard decision ``argmin_x ||y - H x||^2`` for one trial (indices)."""
    return ml_batch(np.asarray(y)[None], np.asarray(H)[None], const, method)[0]


def detect_batch(Y, H, noise_var, const: Constellation, config: DetectorConfig | None = None,
                 keep_history=False):
    config = config or DetectorConfig()
    Y = np.asarray(Y, dtype=complex)
    H = np.asarray(H, dtype=complex)
    B, N, K = H.shape
    s2 = np.broadcast_to(np.asarray(noise_var, dtype=float), (B,))
    v = config.variant
    if v in ("b-pic-dsc", "ib-pic-dsc", "pic-dsc"):
        return pic_dsc_batch(Y, H, s2, const, config, keep_history=keep_history)
    if v == "matched-filter":
        d = column_energy(H)
        return _linear_result(matched_filter(Y, H), s2[:, None] / d, const, 2 * N * K + K, B)
    if v == "mmse":
        x = mmse_detect(Y, H, s2, const.energy)
        # post-filter error variance of the (biased) estimate, used only as a soft output
        d = column_energy(H)
        return _linear_result(x, s2[:, None] / d, const, (N + 1) * K * K + N * N * K + N * K, B)
    idx = ml_batch(Y, H, const)
    hard_bits = const.index_to_bits(idx)
    return DetectionResult(
        soft_symbols=const.points[idx],
        soft_variances=np.zeros((B, K)),
        hard_symbols=idx,
        hard_bits=hard_bits,
        iterations_used=np.ones(B, dtype=np.int64),
        flop_count=np.zeros(B, dtype=np.int64),
    )


def detect(y, H, noise_var, const: Constellation, config: DetectorConfig | None = None):
    """Detect a single received vector; see :func:`detect_batch`."""
    res = detect_batch(np.asarray(y)[None], np.asarray(H)[None], noise_var, const, config)
    return DetectionResult(
        soft_symbols=res.soft_symbols[0],
        soft_variances=res.soft_variances[0],
        hard_symbols=res.hard_symbols[0],
        hard_bits=res.hard_bits[0],
        iterations_used=int(res.iterations_used[0]),
        flop_count=int(res.flop_count[0]),
        per_iteration_trace=_single_trace(res.per_iteration_trace),
    )


def _single_trace(trace):
    return [
        DetectorState(
            iteration=s.iteration, x_pic=s.x_pic[0], sigma=s.sigma[0], x_hat=s.x_hat[0],
            V=s.V[0], x_dsc=s.x_dsc[0], V_dsc=s.V_dsc[0], rho=s.rho[0], e=s.e[0],
            converged=s.converged,
        )
        for s in trace
    ]


def pic_dsc_classical(y, H, noise_var, const: Constellation, config: DetectorConfig | None = None):
    """PIC-DSC with hard slicing in place of the Bayesian estimator."""
    cfg = config or DetectorConfig()
    cfg = DetectorConfig(variant="pic-dsc", t_max=cfg.t_max, zeta=cfg.zeta,
                         exact_sigma=cfg.exact_sigma, trace=cfg.trace)
    return detect(y, H, noise_var, const, cfg)
