"""Reference lossless codecs over exponent byte streams: RLE and base-delta-immediate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bitio import BitReader, BitWriter
from .exceptions import CorruptStreamError

RLE_MAX_RUN = 255

BDI_BLOCK = 32
BDI_DELTA_BITS = 3
BDI_DELTA_MIN = -(1 << (BDI_DELTA_BITS - 1))
BDI_DELTA_MAX = (1 << (BDI_DELTA_BITS - 1)) - 1
BDI_COMPRESSED_BITS = 1 + 8 + (BDI_BLOCK - 1) * BDI_DELTA_BITS
BDI_RAW_BITS = 1 + 8 * BDI_BLOCK


class RleRecord(NamedTuple):
    run_length: int
    value: int


def _as_bytes(exponents) -> np.ndarray:
    a = np.asarray(exponents).ravel()
    if a.size and (a.min() < 0 or a.max() > 255):
        raise ValueError("exponent streams hold values in 0..255")
    return a.astype(np.uint8)


def rle_records(exponents) -> list[RleRecord]:
    data = _as_bytes(exponents)
    if data.size == 0:
        raise ValueError("RLE needs a non-empty stream")
    # run boundaries, then split runs longer than the 8-bit cap
    starts = np.flatnonzero(np.concatenate(([True], data[1:] != data[:-1])))
    ends = np.append(starts[1:], data.size)
    out = []
    for s, e in zip(starts.tolist(), ends.tolist()):
        v = int(data[s])
        n = e - s
        while n > RLE_MAX_RUN:
            out.append(RleRecord(RLE_MAX_RUN, v))
            n -= RLE_MAX_RUN
        out.append(RleRecord(n, v))
    return out


def rle_compress(exponents) -> bytes:
    return b"".join(bytes(r) for r in rle_records(exponents))


def rle_decompress(stream: bytes) -> np.ndarray:
    raw = np.frombuffer(bytes(stream), dtype=np.uint8)
    if raw.size % 2:
        raise CorruptStreamError("RLE stream has a dangling byte")
    counts, values = raw[0::2], raw[1::2]
    if (counts == 0).any():
        raise CorruptStreamError("RLE record with zero run length")
    return np.repeat(values, counts.astype(np.int64))


def rle_compression_ratio(exponents) -> float:
    n = _as_bytes(exponents).size
    return 8 * n / (16 * len(rle_records(exponents)))


@dataclass(frozen=True)
class BdiStream:
    original_length: int
    payload: bytes
    bit_length: int

    @property
    def blocks(self) -> int:
        return -(-self.original_length // BDI_BLOCK)

    @property
    def compression_ratio(self) -> float:
        return 8 * self.original_length / self.bit_length if self.bit_length else float("nan")


def bdi_compress(exponents) -> BdiStream:
    data = _as_bytes(exponents)
    n = int(data.size)
    if n % BDI_BLOCK:
        # pad by repeating the last value so the tail block stays compressible
        data = np.concatenate([data, np.full(BDI_BLOCK - n % BDI_BLOCK, data[-1], dtype=np.uint8)])
    w = BitWriter()
    for block in data.reshape(-1, BDI_BLOCK).astype(np.int16):
        base = int(block[0])
        deltas = block[1:] - base
        if deltas.min() >= BDI_DELTA_MIN and deltas.max() <= BDI_DELTA_MAX:
            w.write(1, 1)
            w.write(base, 8)
            for d in deltas.tolist():
                w.write(d & ((1 << BDI_DELTA_BITS) - 1), BDI_DELTA_BITS)
        else:
            w.write(0, 1)
            for v in block.tolist():
                w.write(v, 8)
    return BdiStream(n, w.getvalue(), w.bit_length)


def bdi_decompress(stream: BdiStream) -> np.ndarray:
    r = BitReader(stream.payload, stream.bit_length)
    out = np.empty(stream.blocks * BDI_BLOCK, dtype=np.uint8)
    sign = 1 << (BDI_DELTA_BITS - 1)
    for b in range(stream.blocks):
        o = b * BDI_BLOCK
        if r.read(1):
            base = r.read(8)
            out[o] = base
            for i in range(1, BDI_BLOCK):
                d = r.read(BDI_DELTA_BITS)
                v = base + ((d ^ sign) - sign)
                if not 0 <= v <= 255:
                    raise CorruptStreamError("BDI delta leaves the exponent range")
                out[o + i] = v
        else:
            for i in range(BDI_BLOCK):
                out[o + i] = r.read(8)
    if r.remaining:
        raise CorruptStreamError("trailing bits after last BDI block")
    return out[: stream.original_length]
