"""Polar codes: construction, CRC, encoding, interleaving, demapping and decoding."""

from .codec import (bit_reversal, deinterleave, encode, interleave, interleaver,
                    polar_transform)
from .construction import (BiasTable, PolarCodeSpec, bias_from_probabilities, bias_table,
                           construct_code, ga_means, load_code_spec, read_reliability_sequence,
                           subchannel_error_probabilities)
from .crc import CRC, CRC11_POLY, DEFAULT_CRC, crc_attach, crc_check
from .decoders import (DecodeResult, DecodeStats, decode_sc, decode_scs, decode_sequential,
                       path_metrics)
from .demap import LLR_CLIP, demap_llr

__all__ = [
    "BiasTable", "CRC", "CRC11_POLY", "DEFAULT_CRC", "DecodeResult", "DecodeStats", "LLR_CLIP",
    "PolarCodeSpec", "bias_from_probabilities", "bias_table", "bit_reversal", "construct_code",
    "crc_attach", "crc_check", "decode_sc", "decode_scs", "decode_sequential", "deinterleave",
    "demap_llr", "encode", "ga_means", "interleave", "interleaver", "load_code_spec", "path_metrics",
    "polar_transform", "read_reliability_sequence", "subchannel_error_probabilities",
]

