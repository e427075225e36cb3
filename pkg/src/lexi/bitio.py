"""MSB-first bit packing used by the container planes and the baseline codecs."""
from __future__ import annotations

from .exceptions import CorruptStreamError


class BitWriter:
    def __init__(self) -> None:
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bit_length = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits == 0:
            return
        if value >> nbits:
            raise ValueError(f"value {value:#x} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._nacc += nbits
        self.bit_length += nbits
        if self._nacc >= 64:
            # flush whole bytes, keep the remainder in the accumulator
            nbytes, rem = divmod(self._nacc, 8)
            self._buf += (self._acc >> rem).to_bytes(nbytes, "big")
            self._acc &= (1 << rem) - 1
            self._nacc = rem

    def getvalue(self) -> bytes:
        """Packed bytes; the final partial byte is zero-padded."""
        out = bytes(self._buf)
        if self._nacc:
            pad = -self._nacc % 8
            out += (self._acc << pad).to_bytes((self._nacc + pad) // 8, "big")
        return out


class BitReader:
    def __init__(self, data: bytes, bit_length: int | None = None) -> None:
        self._data = bytes(data)
        self.bit_length = len(self._data) * 8 if bit_length is None else bit_length
        if self.bit_length > len(self._data) * 8:
            raise ValueError("bit_length exceeds buffer")
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self.bit_length - self.pos

    def peek(self, nbits: int) -> int:
        """Next ``nbits`` bits; positions past the end read as zero."""
        start, off = divmod(self.pos, 8)
        nbytes = (off + nbits + 7) // 8
        chunk = self._data[start:start + nbytes]
        v = int.from_bytes(chunk, "big") << (8 * (nbytes - len(chunk)))
        v >>= nbytes * 8 - off - nbits
        return v & ((1 << nbits) - 1)

    def skip(self, nbits: int) -> None:
        if nbits > self.remaining:
            raise CorruptStreamError("bitstream truncated")
        self.pos += nbits

    def read(self, nbits: int) -> int:
        if nbits > self.remaining:
            raise CorruptStreamError("bitstream truncated")
        v = self.peek(nbits)
        self.pos += nbits
        return v
