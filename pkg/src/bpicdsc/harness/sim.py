"""Monte-Carlo sweeps over SNR for detection, coded transmission and the analytical curves.

Every trial draws from its own generator, keyed by (stream, SNR index,
trial index). Trials are grouped into fixed-size chunks; chunks are folded
in order and the early-stop test is applied after each chunk, so results do
not depend on how many worker processes evaluated them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from .. import analysis
from ..detectors import VARIANTS, DetectorConfig, detect_batch
from ..mimo import draw_channel, make_constellation, noise_variance, trial_rng
from ..polar import (bias_table, construct_code, decode_sc, decode_scs, decode_sequential, deinterleave,
                     demap_llr, encode, interleave, load_code_spec)
from ..polar.construction import PolarCodeSpec

EXPERIMENTS = ("ber-sim", "ber-approx", "fer-sim", "complexity", "correlation")

STREAM_BER = 1
STREAM_FER = 2
STREAM_CORR = 3


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class SimConfig:
    experiment: str = "ber-sim"
    n: int = 32
    k: int = 8
    mod: int = 4
    detectors: list = field(default_factory=lambda: ["b-pic-dsc"])
    snr: list = field(default_factory=lambda: [10.0])
    trials: int = 1_000_000
    max_errors: int = 200
    seed: int = 0
    psi: float = 0.0
    phi: float = 0.0
    gamma: float = 0.0
    tmax: int = 10
    tmax_per_detector: dict = field(default_factory=dict)
    zeta: float = 1e-4
    exact_sigma: bool = False
    code_spec: str | None = None
    list_size: int = 16
    crc_aided: bool = False
    decoders: list = field(default_factory=lambda: ["scs", "seq"])
    alpha: list | None = None
    t_values: list = field(default_factory=lambda: [10])
    nc: int | None = None
    clusters: int | None = None
    chunk: int = 1000
    workers: int = 1
    out: str | None = None

    def t_max_for(self, detector: str) -> int:
        return int(self.tmax_per_detector.get(detector, self.tmax))

    def validate(self) -> "SimConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not (self.n >= self.k >= 1):
            raise ConfigError(f"need n >= k >= 1, got n={self.n}, k={self.k}")
        if self.mod not in (4, 16, 64):
            raise ConfigError(f"unsupported modulation order {self.mod}")
        for d in self.detectors:
            if self.experiment == "complexity":
                try:
                    analysis._canonical(d)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
            elif d not in VARIANTS:
                raise ConfigError(f"unknown detector {d!r}")
        if self.trials < 1 or self.chunk < 1 or self.workers < 1:
            raise ConfigError("trials, chunk and workers must be >= 1")
        if self.max_errors < 0:
            raise ConfigError("max_errors must be >= 0")
        if self.tmax < 1 or not self.zeta > 0:
            raise ConfigError("tmax must be >= 1 and zeta > 0")
        for d, t in self.tmax_per_detector.items():
            if d not in VARIANTS or int(t) < 1:
                raise ConfigError(f"bad per-detector tmax {d}={t}")
        if not 0 <= self.psi < 1 or self.phi < 0 or not 0 <= self.gamma <= 1:
            raise ConfigError("channel parameters out of range")
        if self.list_size < 1:
            raise ConfigError("list size must be >= 1")
        for d in self.decoders:
            if d not in ("sc", "scs", "seq"):
                raise ConfigError(f"unknown decoder {d!r}")
        if self.alpha is not None and any(not 0 < a <= 1 for a in self.alpha):
            raise ConfigError("alpha values must lie in (0, 1]")
        if not self.snr:
            raise ConfigError("empty SNR list")
        return self


@dataclass
class SweepRow:
    detector: str
    n: int
    k: int
    snr_db: float
    trials: int
    bit_errors: int
    ber: float
    frame_errors: int
    fer: float
    avg_iterations: float
    avg_flops_add: float
    avg_flops_cmp: float
    avg_flops_mul: float
    ci95_halfwidth: float


@dataclass
class SweepResult:
    rows: list
    metadata: dict = field(default_factory=dict)

    def select(self, detector: str) -> list:
        return [r for r in self.rows if r.detector == detector]


def wilson_halfwidth(errors: int, n: int, z: float = 1.959963984540054) -> float:
    """Half-width of the Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0
    p = errors / n
    den = 1.0 + z * z / n
    return z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den


def _chunk_ranges(trials, chunk):
    return [(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]


def _fold_chunks(ranges, make_task, fn, absorb, workers):
    """Evaluate chunks in order and fold each result with ``absorb``.

    ``make_task(range)`` builds the work item from the current fold state and
    ``absorb(result)`` returns True once nothing further is needed. With
    several workers chunks run in waves built from the state at dispatch;
    results past the stopping point are dropped, so the fold equals the
    sequential one.
    """
    if workers <= 1:
        for r in ranges:
            if absorb(fn(make_task(r))):
                return
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i in range(0, len(ranges), workers):
            wave = [make_task(r) for r in ranges[i : i + workers]]
            for res in pool.map(fn, wave):
                if absorb(res):
                    return


def _run_chunks(fn, tasks, stop, workers):
    """Fold ``fn`` over ``tasks`` until ``stop(results so far)`` holds."""
    done = []

    def absorb(res):
        done.append(res)
        return stop(done)

    _fold_chunks(tasks, lambda t: t, fn, absorb, workers)
    return done


# ---------------------------------------------------------------------------
# uncoded BER


def _draw_uncoded(cfg: SimConfig, snr_index: int, start: int, stop: int):
    const = make_constellation(cfg.mod, cfg.k)
    s2 = noise_variance(cfg.snr[snr_index])
    m = const.bits_per_symbol
    B = stop - start
    Y = np.empty((B, cfg.n), dtype=complex)
    Hh = np.empty((B, cfg.n, cfg.k), dtype=complex)
    bits = np.empty((B, cfg.k, m), dtype=np.int8)
    for b, i in enumerate(range(start, stop)):
        rng = trial_rng(cfg.seed, STREAM_BER, snr_index, i)
        ch = draw_channel(cfg.n, cfg.k, rng, cfg.psi, cfg.phi, cfg.gamma, s2)
        bb = rng.integers(0, 2, size=(cfg.k, m), dtype=np.int8)
        x = const.points[const.bits_to_index(bb)]
        noise = math.sqrt(s2 / 2.0) * (rng.standard_normal(cfg.n) + 1j * rng.standard_normal(cfg.n))
        Y[b] = ch.H @ x + noise
        Hh[b] = ch.H_hat
        bits[b] = bb
    return const, s2, Y, Hh, bits


def _ber_chunk(task):
    cfg, detectors, snr_index, start, stop = task
    const, s2, Y, Hh, bits = _draw_uncoded(cfg, snr_index, start, stop)
    out = {}
    for det in detectors:
        dc = DetectorConfig(variant=det, t_max=cfg.t_max_for(det), zeta=cfg.zeta, exact_sigma=cfg.exact_sigma)
        res = detect_batch(Y, Hh, s2, const, dc)
        err = (res.hard_bits != bits).reshape(len(Y), -1).sum(axis=1)
        out[det] = (int(err.sum()), int((err > 0).sum()), int(len(Y)),
                    int(np.sum(res.iterations_used)), int(np.sum(res.flop_count)))
    return out


def run_ber_sim(cfg: SimConfig) -> SweepResult:
    """Uncoded bit error rate per detector and SNR.

    All detectors see the same channel, noise and bit draws; each stops on
    its own error count.
    """
    cfg.validate()
    rows = []
    m = int(math.log2(cfg.mod))
    for si, snr in enumerate(cfg.snr):
        totals = {d: [0, 0, 0, 0, 0] for d in cfg.detectors}
        stopped = set()

        def make_task(r, si=si):
            active = tuple(d for d in cfg.detectors if d not in stopped)
            return (cfg, active, si, r[0], r[1])

        def absorb(res, totals=totals, stopped=stopped):
            for det, vals in res.items():
                if det in stopped:
                    continue
                acc = totals[det]
                for j, v in enumerate(vals):
                    acc[j] += v
                if cfg.max_errors > 0 and acc[0] >= cfg.max_errors:
                    stopped.add(det)
            return len(stopped) == len(cfg.detectors)

        _fold_chunks(_chunk_ranges(cfg.trials, cfg.chunk), make_task, _ber_chunk, absorb, cfg.workers)
        for det in cfg.detectors:
            be, fe, n, it, fl = totals[det]
            nbits = n * cfg.k * m
            rows.append(SweepRow(det, cfg.n, cfg.k, float(snr), n, be, be / nbits, fe, fe / n,
                                 it / n, 0.0, 0.0, fl / n, wilson_halfwidth(be, nbits)))
    rows.sort(key=lambda r: (cfg.detectors.index(r.detector), r.snr_db))
    return SweepResult(rows, _metadata(cfg, "bit"))


def _metadata(cfg, kind):
    md = {
        "stopping_rule": f"min({cfg.trials} trials, {cfg.max_errors} {kind} error events) per point",
        "seed": cfg.seed,
        "chunk": cfg.chunk,
    }
    return md


# ---------------------------------------------------------------------------
# analytical BER


def run_ber_approx(cfg: SimConfig) -> SweepResult:
    """Predicted BER from the variance evolution over SNR and the load ``alpha``.

    Without an ``alpha`` list the configured ``k`` is used. Rows carry the
    evolution's iteration count in ``avg_iterations``.
    """
    cfg.validate()
    ks = [cfg.k] if cfg.alpha is None else sorted({max(1, int(round(a * cfg.n))) for a in cfg.alpha})
    rows = []
    failures = 0
    for det in cfg.detectors:
        variant = "ib" if det == "ib-pic-dsc" else "b"
        for k in ks:
            for snr in cfg.snr:
                r = analysis.run_evolution(cfg.n, k, noise_variance(snr), variant, cfg.mod, cfg.zeta)
                failures += not r.converged
                rows.append(SweepRow(det, cfg.n, k, float(snr), 0, 0, r.ber, 0, float("nan"),
                                     float(r.iterations), 0.0, 0.0, 0.0, 0.0))
    rows.sort(key=lambda r: (cfg.detectors.index(r.detector), r.k, r.snr_db))
    md = {"fixed_point_failures": failures}
    return SweepResult(rows, md)


# ---------------------------------------------------------------------------
# coded FER


@dataclass
class _CodeContext:
    spec: PolarCodeSpec
    bias: object
    v: float


def _code_context(cfg: SimConfig, snr: float) -> _CodeContext:
    variant = "ib" if cfg.detectors[0] == "ib-pic-dsc" else "b"
    return _cached_context(cfg.n, cfg.k, cfg.mod, cfg.zeta, variant, float(snr), cfg.code_spec)


@lru_cache(maxsize=64)
def _cached_context(n, k, mod, zeta, variant, snr, code_spec):
    ev = analysis.run_evolution(n, k, noise_variance(snr), variant, mod, zeta)
    if code_spec:
        spec = load_code_spec(code_spec, design_v=ev.v, order=mod)
    else:
        spec = construct_code(256, 139, 11, design_v=ev.v, order=mod)
    return _CodeContext(spec, bias_table(spec, ev.v, mod), ev.v)


def _fer_chunk(task):
    cfg, snr_index, start, stop = task
    snr = cfg.snr[snr_index]
    ctx = _code_context(cfg, snr)
    spec = ctx.spec
    const = make_constellation(cfg.mod, cfg.k)
    m = const.bits_per_symbol
    theta = spec.eta // (m * cfg.k)
    s2 = noise_variance(snr)
    dc = DetectorConfig(variant=cfg.detectors[0], t_max=cfg.t_max_for(cfg.detectors[0]), zeta=cfg.zeta,
                        exact_sigma=cfg.exact_sigma)
    nd = len(cfg.decoders)
    acc = np.zeros((nd, 6), dtype=np.int64)  # frame errors, iterations, add, cmp, mul, bit errors
    frames = stop - start
    for i in range(start, stop):
        rng = trial_rng(cfg.seed, STREAM_FER, snr_index, i)
        msg = rng.integers(0, 2, spec.message_length, dtype=np.uint8)
        u = spec.place_message(msg)
        c = interleave(encode(u), spec.interleaver_seed)
        slot_bits = c.reshape(theta, cfg.k, m)
        Y = np.empty((theta, cfg.n), dtype=complex)
        Hh = np.empty((theta, cfg.n, cfg.k), dtype=complex)
        for s in range(theta):
            ch = draw_channel(cfg.n, cfg.k, rng, cfg.psi, cfg.phi, cfg.gamma, s2)
            x = const.points[const.bits_to_index(slot_bits[s])]
            Y[s] = ch.H @ x + math.sqrt(s2 / 2.0) * (
                rng.standard_normal(cfg.n) + 1j * rng.standard_normal(cfg.n))
            Hh[s] = ch.H_hat
        det = detect_batch(Y, Hh, s2, const, dc)
        sig = np.maximum(det.soft_variances, 1e-300)
        llr = deinterleave(demap_llr(det.soft_symbols, sig, const).reshape(-1), spec.interleaver_seed)
        for j, name in enumerate(cfg.decoders):
            if name == "scs":
                r = decode_scs(llr, spec, cfg.list_size, cfg.crc_aided)
            elif name == "seq":
                r = decode_sequential(llr, spec, ctx.bias, cfg.list_size, cfg.crc_aided)
            else:
                r = decode_sc(llr, spec)
            nerr = int(np.count_nonzero(r.message != msg))
            acc[j, 0] += nerr > 0
            acc[j, 1] += r.stats.iterations
            acc[j, 2] += r.stats.flops["add"]
            acc[j, 3] += r.stats.flops["cmp"]
            acc[j, 4] += r.stats.flops["mul"]
            acc[j, 5] += nerr
    return frames, acc


def run_fer_sim(cfg: SimConfig) -> SweepResult:
    """Polar-coded frame error rate, decoding the same LLRs with each configured decoder."""
    cfg.validate()
    m = int(math.log2(cfg.mod))
    probe = _code_context(cfg, cfg.snr[0]).spec
    if probe.eta % (m * cfg.k):
        raise ConfigError(f"code length {probe.eta} is not a multiple of m*K = {m * cfg.k}")
    rows = []
    for si, snr in enumerate(cfg.snr):
        tasks = [(cfg, si, a, b) for a, b in _chunk_ranges(cfg.trials, cfg.chunk)]

        def stop(parts):
            if cfg.max_errors == 0:
                return False
            fe = sum(p[1][:, 0] for p in parts)
            return int(np.min(fe)) >= cfg.max_errors

        parts = _run_chunks(_fer_chunk, tasks, stop, cfg.workers)
        n = sum(p[0] for p in parts)
        acc = sum(p[1] for p in parts)
        nbits = n * probe.message_length
        for j, name in enumerate(cfg.decoders):
            fe, it, ad, cm, mu, be = (int(v) for v in acc[j])
            rows.append(SweepRow(f"{cfg.detectors[0]}+{name}", cfg.n, cfg.k, float(snr), n, be,
                                 be / nbits, fe, fe / n, it / n, ad / n, cm / n, mu / n,
                                 wilson_halfwidth(fe, n)))
    rows.sort(key=lambda r: (r.detector, r.snr_db))
    return SweepResult(rows, _metadata(cfg, "frame"))


# ---------------------------------------------------------------------------
# iterate correlation


@dataclass
class CorrelationRow:
    iteration: int
    trials: int
    corr_estimates: float | None
    corr_errors: float | None


def pearson(a, b) -> float | None:
    """Real Pearson coefficient of complex samples; ``None`` when a variance vanishes."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.vdot(da, da).real)
    vb = float(np.vdot(db, db).real)
    if va <= 0 or vb <= 0:
        return None
    return float(np.vdot(da, db).real / math.sqrt(va * vb))


def _corr_chunk(task):
    cfg, start, stop = task
    const, s2, Y, Hh, bits = _draw_uncoded(cfg, 0, start, stop)
    dc = DetectorConfig(variant=cfg.detectors[0], t_max=cfg.t_max_for(cfg.detectors[0]), zeta=cfg.zeta,
                        exact_sigma=cfg.exact_sigma)
    res = detect_batch(Y, Hh, s2, const, dc, keep_history=True)
    x = const.points[const.bits_to_index(bits)]
    return res.x_hat_history, x


def run_correlation(cfg: SimConfig) -> list:
    """Pearson correlation between consecutive soft estimates, per iteration.

    Uses the first SNR value. Both the raw estimates and their errors
    against the transmitted symbols are correlated, pooled over trials and
    users. Trials that stopped early hold their last estimate.
    """
    cfg.validate()
    tasks = [(cfg, a, b) for a, b in _chunk_ranges(cfg.trials, cfg.chunk)]
    parts = _run_chunks(_corr_chunk, tasks, lambda _: False, cfg.workers)
    hist = np.concatenate([p[0] for p in parts])
    x = np.concatenate([p[1] for p in parts])
    rows = []
    for t in range(2, cfg.t_max_for(cfg.detectors[0]) + 1):
        a, b = hist[:, t - 1], hist[:, t - 2]
        rows.append(CorrelationRow(t, len(hist), pearson(a, b), pearson(a - x, b - x)))
    return rows


# ---------------------------------------------------------------------------
# complexity


@dataclass
class ComplexityRow:
    detector: str
    n: int
    k: int
    m: int
    t: int
    multiplications: int


def run_complexity(cfg: SimConfig) -> list:
    """Multiplication counts for the configured detectors over ``t_values``.

    D-EP rows need ``nc`` and ``clusters``; without them D-EP is skipped.
    """
    cfg.validate()
    rows = []
    for det in cfg.detectors:
        if analysis._canonical(det) == "D-EP" and (cfg.nc is None or cfg.clusters is None):
            continue
        for t in cfg.t_values:
            spec = analysis.ComplexitySpec(det, cfg.n, cfg.k, cfg.mod, int(t), cfg.nc, cfg.clusters)
            rows.append(ComplexityRow(analysis._canonical(det), cfg.n, cfg.k, cfg.mod, int(t),
                                      analysis.multiplication_count(spec)))
    return rows


def config_dict(cfg: SimConfig) -> dict:
    return asdict(cfg)


def with_overrides(cfg: SimConfig, **kw) -> SimConfig:
    return replace(cfg, **kw)
