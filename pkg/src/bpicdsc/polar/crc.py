"""Cyclic redundancy checks over bit arrays (MSB first, zero initial register)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels

# x^11 + x^10 + x^9 + x^5 + 1
CRC11_POLY = 0xE21


@dataclass(frozen=True)
class CRC:
    width: int
    poly: int  # including the leading x^width term

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("CRC width must be nonnegative")
        if self.width and not (self.poly >> self.width) & 1:
            raise ValueError("polynomial must include the leading term")

    @classmethod
    def from_hex(cls, width: int, poly_hex: str | int) -> "CRC":
        """Accepts the generator with or without its leading ``x^width`` term."""
        poly = int(poly_hex, 16) if isinstance(poly_hex, str) else int(poly_hex)
        if width and poly < (1 << width):
            poly |= 1 << width
        return cls(width, poly)

    @property
    def poly_low(self) -> int:
        return self.poly & ((1 << self.width) - 1) if self.width else 0

    def remainder(self, bits) -> int:
        if self.width == 0:
            return 0
        return int(_kernels.crc_remainder(np.asarray(bits, dtype=np.uint8), self.poly_low, self.width))

    def parity(self, message) -> np.ndarray:
        """Parity bits such that ``message || parity`` has zero remainder."""
        msg = np.asarray(message, dtype=np.uint8)
        rem = self.remainder(np.concatenate([msg, np.zeros(self.width, dtype=np.uint8)]))
        return np.array([(rem >> (self.width - 1 - j)) & 1 for j in range(self.width)], dtype=np.uint8)

    def attach(self, message) -> np.ndarray:
        msg = np.asarray(message, dtype=np.uint8)
        if msg.ndim != 1:
            raise ValueError("message must be one-dimensional")
        return np.concatenate([msg, self.parity(msg)])

    def check(self, bits) -> bool:
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape[-1] < self.width:
            raise ValueError("codeword shorter than the CRC")
        return self.remainder(bits) == 0


DEFAULT_CRC = CRC(11, CRC11_POLY)


def crc_attach(message, crc: CRC = DEFAULT_CRC) -> np.ndarray:
    return crc.attach(message)


def crc_check(bits, crc: CRC = DEFAULT_CRC) -> bool:
    return crc.check(bits)
