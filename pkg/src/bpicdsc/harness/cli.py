"""Command-line entry point: ``bpicdsc <experiment> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from . import io as csvio
from .sim import (EXPERIMENTS, ComplexityRow, ConfigError, CorrelationRow, SimConfig, SweepRow,
                  run_ber_approx, run_ber_sim, run_complexity, run_correlation, run_fer_sim)
from ..analysis import DETECTORS

EXIT_CONFIG = 2


def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(t) for t in str(text).replace(",", " ").split()]


def _words(text):
    return [t for t in str(text).replace(",", " ").split()]


def _tmax(text):
    """``10``, ``pic-dsc=5`` or ``10,pic-dsc=5``: default and per-detector overrides."""
    default, per = None, {}
    for tok in _words(text):
        if "=" in tok:
            name, val = tok.split("=", 1)
            per[name] = int(val)
        else:
            default = int(tok)
    return default, per


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bpicdsc", description="Massive-MIMO detection and polar-coded link experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON file whose keys mirror the long options")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--mod", type=int, help="QAM order (4, 16, 64)")
    p.add_argument("--detector", type=_words, help="comma-separated detector names")
    p.add_argument("--snr", type=_floats, help="SNR list in dB, e.g. 0,2,4")
    p.add_argument("--trials", type=int, help="trial cap per point")
    p.add_argument("--max-errors", type=int, help="stop a point after this many error events (0: never)")
    p.add_argument("--seed", type=int)
    p.add_argument("--psi", type=float, help="receive correlation coefficient")
    p.add_argument("--phi", type=float, help="Rician factor")
    p.add_argument("--gamma", type=float, help="channel estimation error magnitude")
    p.add_argument("--tmax", type=_tmax,
                   help="iteration cap, optionally per detector: 10,pic-dsc=5")
    p.add_argument("--zeta", type=float)
    p.add_argument("--exact-sigma", action="store_const", const=True, default=None)
    p.add_argument("--code-spec", help="polar code JSON description")
    p.add_argument("--list-size", type=int)
    p.add_argument("--crc-aided", action="store_const", const=True, default=None,
                   help="keep searching past full paths that fail the CRC")
    p.add_argument("--decoders", type=_words, help="subset of sc,scs,seq")
    p.add_argument("--alpha", type=_floats, help="load values K/N for ber-approx")
    p.add_argument("--t-values", type=_ints, help="iteration counts for complexity")
    p.add_argument("--nc", type=int, help="antennas per cluster (D-EP)")
    p.add_argument("--clusters", type=int, help="cluster count (D-EP)")
    p.add_argument("--chunk", type=int, help="trials per work unit")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return p


_RENAMES = {"detector": "detectors", "max-errors": "max_errors"}


def _normalise_key(key: str) -> str:
    key = _RENAMES.get(key, key)
    return key.replace("-", "_")


def make_config(argv=None) -> SimConfig:
    args = build_parser().parse_args(argv)
    valid = {f.name for f in fields(SimConfig)}
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key, val in raw.items():
            name = _normalise_key(key)
            if name == "experiment":
                continue
            if name not in valid:
                raise ConfigError(f"unknown config key {key!r}")
            if name in ("detectors", "decoders") and isinstance(val, str):
                val = _words(val)
            if name in ("snr", "alpha") and not isinstance(val, list):
                val = [float(val)]
            if name == "tmax" and isinstance(val, str):
                val, per = _tmax(val)
                values.setdefault("tmax_per_detector", {}).update(per)
                if val is None:
                    continue
            values[name] = val
    for key, val in vars(args).items():
        if key in ("experiment", "config") or val is None:
            continue
        if key == "tmax":
            val, per = val
            values.setdefault("tmax_per_detector", {}).update(per)
            if val is None:
                continue
        values[_normalise_key(key)] = val
    if args.experiment == "complexity" and "detectors" not in values:
        values["detectors"] = list(DETECTORS)
    try:
        cfg = SimConfig(experiment=args.experiment, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def run(cfg: SimConfig) -> str:
    if cfg.experiment == "ber-sim":
        res = run_ber_sim(cfg)
        return csvio.rows_to_csv(res.rows, csvio.SWEEP_SCHEMA, SweepRow, res.metadata)
    if cfg.experiment == "ber-approx":
        res = run_ber_approx(cfg)
        return csvio.rows_to_csv(res.rows, csvio.SWEEP_SCHEMA, SweepRow, res.metadata)
    if cfg.experiment == "fer-sim":
        res = run_fer_sim(cfg)
        return csvio.rows_to_csv(res.rows, csvio.SWEEP_SCHEMA, SweepRow, res.metadata)
    if cfg.experiment == "complexity":
        return csvio.rows_to_csv(run_complexity(cfg), csvio.COMPLEXITY_SCHEMA, ComplexityRow)
    rows = run_correlation(cfg)
    return csvio.rows_to_csv(rows, csvio.CORRELATION_SCHEMA, CorrelationRow,
                             {"snr_db": cfg.snr[0]})


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
        text = run(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"bpicdsc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    csvio.write_text(cfg.out, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
