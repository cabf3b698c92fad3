import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpicdsc.mimo import make_constellation
from bpicdsc.polar import (CRC, DEFAULT_CRC, BiasTable, bias_from_probabilities, bias_table,
                           bit_reversal, construct_code, crc_attach, crc_check, decode_sc,
                           decode_scs, decode_sequential, deinterleave, demap_llr, encode,
                           interleave, interleaver, load_code_spec, path_metrics,
                           read_reliability_sequence, subchannel_error_probabilities)

GOLDEN = Path(__file__).parent / "golden"


# --- encoder -----------------------------------------------------------------


def test_encode_examples():
    assert encode([0, 1]).tolist() == [1, 1]
    assert encode([0, 0, 0, 1]).tolist() == [1, 1, 1, 1]
    assert not encode(np.zeros(16, np.uint8)).any()


def test_encode_matches_generator_matrix():
    n = 3
    F = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    G = F
    for _ in range(n - 1):
        G = np.kron(G, F)
    B = np.eye(8, dtype=np.uint8)[bit_reversal(8)]
    for bits in itertools.product([0, 1], repeat=8):
        u = np.array(bits, dtype=np.uint8)
        assert np.array_equal(encode(u), (u @ B @ G) % 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_encoder_linearity(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 2, (2, 1 << n), dtype=np.uint8)
    assert np.array_equal(encode(a ^ b), encode(a) ^ encode(b))


@pytest.mark.parametrize("eta", [1, 2, 8, 256])
def test_bit_reversal_involution(eta):
    p = bit_reversal(eta)
    assert np.array_equal(p[p], np.arange(eta))


def test_encode_errors():
    with pytest.raises(ValueError):
        encode(np.zeros(6, np.uint8))
    with pytest.raises(ValueError):
        encode([1, 0], frozen=[True, False])


# --- CRC -----------------------------------------------------------------------


def test_crc_examples():
    assert not crc_attach(np.zeros(20, np.uint8))[20:].any()
    assert crc_check(crc_attach(np.zeros(20, np.uint8)))
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = crc_attach(rng.integers(0, 2, 128, dtype=np.uint8))
        assert crc_check(w)
        j = rng.integers(len(w))
        w[j] ^= 1
        assert not crc_check(w)


def test_crc_polynomial_division_oracle():
    """Remainder from long division of the polynomial over GF(2)."""
    rng = np.random.default_rng(1)
    msg = rng.integers(0, 2, 40, dtype=np.uint8)
    poly = [int(b) for b in bin(DEFAULT_CRC.poly)[2:]]
    reg = list(msg) + [0] * 11
    for i in range(len(msg)):
        if reg[i]:
            for j, p in enumerate(poly):
                reg[i + j] ^= p
    assert DEFAULT_CRC.parity(msg).tolist() == reg[-11:]


def test_crc_hex_forms_and_errors():
    assert CRC.from_hex(11, "0x621") == CRC.from_hex(11, "0xE21")
    with pytest.raises(ValueError):
        crc_check(np.zeros(5, np.uint8))
    with pytest.raises(ValueError):
        CRC(4, 0x3)


# --- interleaver -----------------------------------------------------------------


def test_interleaver_golden():
    expected = [int(v) for v in (GOLDEN / "interleaver_eta4_seed0.txt").read_text().split()]
    assert interleaver(4, 0).tolist() == expected


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(0, 1000))
def test_interleave_round_trip(eta, seed):
    x = np.random.default_rng(seed).standard_normal(eta)
    assert np.array_equal(deinterleave(interleave(x, seed), seed), x)
    assert np.array_equal(interleave(deinterleave(x, seed), seed), x)
    assert sorted(interleaver(eta, seed).tolist()) == list(range(eta))


# --- construction ----------------------------------------------------------------


def test_construction_examples():
    assert construct_code(2, 1, crc_len=0).frozen_set.tolist() == [0]
    spec = construct_code(256, 139)
    assert spec.message_length == 128
    assert spec.rate == 0.5
    assert len(spec.frozen_set) == 256 - 139


def _de_error_probabilities(eta, v, grid=np.linspace(-60, 60, 1201)):
    """Density evolution by direct numerical convolution on an LLR grid."""
    step = grid[1] - grid[0]
    pdf = np.exp(-((grid - 2 / v) ** 2) / (2 * 4 / v))
    pmf = pdf / pdf.sum()

    def var_node(p):
        full = np.convolve(p, p)
        idx = np.clip(np.rint((np.arange(len(full)) * step + 2 * grid[0] - grid[0]) / step), 0,
                      len(grid) - 1).astype(int)
        return np.bincount(idx, weights=full, minlength=len(grid))

    def check_node(p):
        nz = np.flatnonzero(p > 1e-16)
        a, b = np.meshgrid(grid[nz], grid[nz], indexing="ij")
        w = np.outer(p[nz], p[nz])
        f = np.logaddexp(0, a + b) - np.logaddexp(a, b)
        idx = np.clip(np.rint((f - grid[0]) / step), 0, len(grid) - 1).astype(int)
        return np.bincount(idx.ravel(), weights=w.ravel(), minlength=len(grid))

    dens = [pmf]
    for _ in range(int(np.log2(eta))):
        dens = [d for p in dens for d in (check_node(p), var_node(p))]
    zero = len(grid) // 2
    return np.array([p[:zero].sum() + 0.5 * p[zero] for p in dens])


def test_ga_ranking_matches_density_evolution():
    pe = _de_error_probabilities(8, 1.0)
    best = set(np.argsort(pe)[:4].tolist())
    spec = construct_code(8, 4, crc_len=0, design_v=1.0)
    assert set(spec.info_positions.tolist()) == best


def test_ga_against_genie_aided_monte_carlo():
    rng = np.random.default_rng(0)
    v, S = 1.0, 10**6
    L = rng.normal(2 / v, np.sqrt(4 / v), (S, 8))
    mc = []
    for i in range(8):
        x = L
        for k in range(3):
            h = x.shape[1] // 2
            if (i >> (2 - k)) & 1:
                x = x[:, :h] + x[:, h:]
            else:
                x = np.logaddexp(0, x[:, :h] + x[:, h:]) - np.logaddexp(x[:, :h], x[:, h:])
        mc.append(np.mean(x[:, 0] < 0))
    ga = subchannel_error_probabilities(8, v)
    assert np.all(np.abs(ga / np.array(mc) - 1) <= 0.10)


def test_reliability_file(tmp_path):
    f = tmp_path / "rel.txt"
    f.write_text("\n".join(map(str, [15, 7, 11, 13, 14, 3, 5, 6, 9, 10, 12, 1, 2, 4, 8, 0])))
    spec = construct_code(8, 3, crc_len=0, frozen_source="file", frozen_file=f)
    assert spec.info_positions.tolist() == [3, 5, 7]
    bad = tmp_path / "bad.txt"
    bad.write_text("0\n1\n1\n")
    with pytest.raises(ValueError):
        read_reliability_sequence(bad, 4)
    bad.write_text("0\nx\n")
    with pytest.raises(ValueError):
        read_reliability_sequence(bad, 2)


def test_code_spec_json(tmp_path):
    (tmp_path / "rel.txt").write_text("\n".join(map(str, [7, 6, 5, 3, 4, 2, 1, 0])))
    cfg = {"eta": 8, "kappa": 4, "crc_len": 0, "frozen_source": "file",
           "frozen_file": "rel.txt", "interleaver_seed": 3}
    path = tmp_path / "code.json"
    path.write_text(json.dumps(cfg))
    spec = load_code_spec(path)
    assert spec.info_positions.tolist() == [3, 5, 6, 7]
    assert spec.interleaver_seed == 3
    path.write_text(json.dumps({**cfg, "colour": 1}))
    with pytest.raises(ValueError):
        load_code_spec(path)
    path.write_text(json.dumps({"eta": 8}))
    with pytest.raises(ValueError):
        load_code_spec(path)


# --- bias table ------------------------------------------------------------------


def test_bias_examples():
    t = bias_from_probabilities(np.zeros(8, bool), np.full(8, 0.3))
    assert np.all(t.log_omega == 0)
    spec = construct_code(64, 32, crc_len=0)
    assert np.allclose(bias_table(spec, 1e-6).log_omega, 0, atol=1e-12)


def test_bias_direct_product():
    spec = construct_code(16, 8, crc_len=0)
    t = bias_table(spec, 0.7)
    for i in range(17):
        prod = np.prod([1 - t.probabilities[j] for j in range(16) if spec.frozen[j] and j >= i])
        assert t.omega()[i] == pytest.approx(prod)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([8, 64, 256]), st.floats(0.01, 10.0))
def test_bias_monotone(eta, v):
    spec = construct_code(eta, eta // 2, crc_len=0)
    t = bias_table(spec, v)
    assert np.all(np.diff(t.log_omega) >= 0)
    assert t.log_omega[-1] == 0
    assert np.all((t.probabilities >= 0) & (t.probabilities <= 1))


# --- demapper -----------------------------------------------------------------


def test_demap_examples():
    c = make_constellation(4, 1)
    llr = demap_llr(np.zeros(3, complex), np.ones(3), c)
    assert np.allclose(llr, 0)
    p = c.points[2]
    llr = demap_llr(np.array([p]), np.array([1e-9]), c)
    assert np.allclose(llr, np.where(c.bit_labels[2] == 0, 50.0, -50.0))
    a = abs(c.points[0].real)
    x, s = 0.31 - 0.2j, 0.4
    llr = demap_llr(np.array([x]), np.array([s]), c)
    assert llr[0] == pytest.approx(-4 * a * x.real / s)
    assert llr[1] == pytest.approx(-4 * a * x.imag / s)


def test_demap_brute_force_sixteen():
    c = make_constellation(16, 2)
    rng = np.random.default_rng(2)
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    s = np.array([0.3, 0.05])
    llr = demap_llr(x, s, c)
    for k in range(2):
        for q in range(4):
            w = np.exp(-np.abs(x[k] - c.points) ** 2 / s[k])
            ref = np.log(w[c.bit_labels[:, q] == 0].sum() / w[c.bit_labels[:, q] == 1].sum())
            assert llr[4 * k + q] == pytest.approx(np.clip(ref, -50, 50), rel=1e-9, abs=1e-9)


# --- decoders --------------------------------------------------------------------


def _noiseless(spec, rng):
    msg = rng.integers(0, 2, spec.message_length, dtype=np.uint8)
    c = encode(spec.place_message(msg))
    return msg, 20.0 * (1 - 2.0 * c)


def test_noiseless_single_path_recovery():
    spec = construct_code(256, 139)
    bias = bias_table(spec, 0.5)
    msg, llr = _noiseless(spec, np.random.default_rng(3))
    for res in (decode_sc(llr, spec), decode_scs(llr, spec, 1),
                decode_sequential(llr, spec, bias, 1)):
        assert np.array_equal(res.message, msg)
        assert res.stats.iterations == 256
        assert res.stats.outcome == "crc-pass"


def test_scs_single_path_equals_sc():
    spec = construct_code(64, 32, crc_len=6, crc_poly=0x21)
    rng = np.random.default_rng(4)
    for _ in range(1000):
        msg, llr = _noiseless(spec, rng)
        llr = llr / 10 + rng.normal(0, 2.0, 64)
        assert np.array_equal(decode_scs(llr, spec, 1).u, decode_sc(llr, spec).u)


def _toy(kappa):
    spec = construct_code(8, kappa, crc_len=0, design_v=1.0)
    us = np.zeros((2**kappa, 8), np.uint8)
    us[:, spec.info_positions] = list(itertools.product([0, 1], repeat=kappa))
    return spec, us, encode(us)


@pytest.mark.parametrize("kappa", [3, 4, 5])
def test_scs_full_list_is_ml(kappa):
    spec, us, cws = _toy(kappa)
    rng = np.random.default_rng(kappa)
    for _ in range(500):
        c = cws[rng.integers(len(cws))]
        llr = 2.5 * (1 - 2.0 * c) + rng.normal(0, 2.2, 8)
        res = decode_scs(llr, spec, 2**kappa)
        lp = -np.logaddexp(0, -(1 - 2.0 * cws) * llr).sum(1)
        assert np.array_equal(res.u, us[np.argmax(lp)])
        assert path_metrics(llr, spec, res.u, "scs")[-1] == pytest.approx(lp.max())


@pytest.mark.parametrize("kappa", [3, 4, 5])
def test_sequential_without_bias_is_maxlog_ml(kappa):
    spec, us, cws = _toy(kappa)
    flat = BiasTable(np.zeros(8), np.zeros(9))
    rng = np.random.default_rng(10 + kappa)
    for _ in range(500):
        c = cws[rng.integers(len(cws))]
        llr = 2.5 * (1 - 2.0 * c) + rng.normal(0, 2.2, 8)
        res = decode_sequential(llr, spec, flat, 2**kappa)
        metric = -(np.abs(llr) * ((llr < 0) != cws)).sum(1)
        i = np.flatnonzero((us == res.u).all(1))[0]
        assert metric[i] == pytest.approx(metric.max())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["scs", "seq"]))
def test_path_metric_non_increasing(seed, score):
    spec = construct_code(32, 16, crc_len=0)
    rng = np.random.default_rng(seed)
    llr = rng.normal(0, 3, 32)
    u = np.zeros(32, np.uint8)
    u[spec.info_positions] = rng.integers(0, 2, 16)
    m = path_metrics(llr, spec, u, score)
    assert m[0] == 0
    assert np.all(np.diff(m) <= 0)


def test_decoders_on_noisy_frames():
    spec = construct_code(128, 75, design_v=0.5)
    bias = bias_table(spec, 0.5)
    rng = np.random.default_rng(5)
    for _ in range(100):
        msg, llr = _noiseless(spec, rng)
        llr = llr / 5 + rng.normal(0, 2.0, 128)
        seq = decode_sequential(llr, spec, bias, 8)
        scs = decode_scs(llr, spec, 8)
        assert seq.stats.flops["mul"] == 0
        assert scs.stats.flops["mul"] > 0
        assert seq.stats.outcome in ("crc-pass", "crc-fail", "stack-exhausted")
        assert seq.u[spec.frozen].sum() == 0 and scs.u[spec.frozen].sum() == 0


def test_crc_aided_search_recovers_more():
    spec = construct_code(64, 38, crc_len=6, crc_poly=0x21, design_v=0.8)
    rng = np.random.default_rng(6)
    plain = aided = 0
    for _ in range(300):
        msg, llr = _noiseless(spec, rng)
        llr = llr / 10 + rng.normal(0, 2.0, 64)
        plain += np.array_equal(decode_scs(llr, spec, 4).message, msg)
        res = decode_scs(llr, spec, 4, crc_aided=True)
        aided += np.array_equal(res.message, msg)
        if res.stats.outcome == "crc-pass":
            assert crc_check(res.u[spec.info_positions], spec.crc)
    assert aided >= plain


def test_decoder_errors():
    spec = construct_code(8, 4, crc_len=0)
    with pytest.raises(ValueError):
        decode_scs(np.zeros(4), spec, 1)
    with pytest.raises(ValueError):
        decode_scs(np.zeros(8), spec, 0)
    with pytest.raises(ValueError):
        decode_sequential(np.zeros(8), spec, BiasTable(np.zeros(4), np.zeros(5)), 1)
