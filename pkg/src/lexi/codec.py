"""Flit-aligned packing of BF16 streams and multi-stage LUT decoding.

Every flit is 128 bits, most significant bit first::

    [count N : 8][N sign bits][N x 7 mantissa bits][N exponent codes][zero pad]

Data flits carry 1..12 whole values. Codebook header flits use ``N == 0`` and
carry the serialized codebook header in their remaining 15 bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bf16 import split_array
from .codebook import ESCAPE, RAW_EXPONENT_BITS, Codebook, DecoderTables, build_decoder_tables
from .exceptions import CorruptStreamError, FramingError

FLIT_BITS = 128
FLIT_BYTES = FLIT_BITS // 8
HEADER_BITS = 8
PAYLOAD_BITS = FLIT_BITS - HEADER_BITS
MAX_VALUES_PER_FLIT = 12
_MASK = (1 << FLIT_BITS) - 1


@dataclass
class EncodedLayer:
    header_flits: list[int]
    data_flits: list[int]
    value_count: int
    exponent_code_bits: int
    stats: dict = field(default_factory=dict)

    @property
    def flits(self) -> list[int]:
        return self.header_flits + self.data_flits

    def to_bytes(self) -> bytes:
        return flits_to_bytes(self.flits)


def flits_to_bytes(flits) -> bytes:
    return b"".join(int(f).to_bytes(FLIT_BYTES, "big") for f in flits)


def flits_from_bytes(raw: bytes) -> list[int]:
    if len(raw) % FLIT_BYTES:
        raise FramingError(f"flit dump length {len(raw)} is not a multiple of {FLIT_BYTES}")
    return [int.from_bytes(raw[i:i + FLIT_BYTES], "big") for i in range(0, len(raw), FLIT_BYTES)]


def flit_count(flit: int) -> int:
    return flit >> (FLIT_BITS - HEADER_BITS)


def header_flits_for(cb: Codebook) -> list[int]:
    raw = cb.to_header_bytes()
    chunk = FLIT_BYTES - 1
    out = []
    for i in range(0, len(raw), chunk):
        part = raw[i:i + chunk].ljust(chunk, b"\x00")
        out.append(int.from_bytes(b"\x00" + part, "big"))
    return out


def pack_flit(signs, mantissas, codes) -> int:
    """Assemble one data flit from per-value fields and ``(bits, nbits)`` codes."""
    n = len(signs)
    acc = n
    used = HEADER_BITS
    for s in signs:
        acc = (acc << 1) | s
    for m in mantissas:
        acc = (acc << 7) | m
    used += 8 * n
    for c, l in codes:
        acc = (acc << l) | c
        used += l
    if used > FLIT_BITS:
        raise ValueError(f"flit overflow: {used} bits")
    return acc << (FLIT_BITS - used)


def encode_layer(values, cb: Codebook) -> EncodedLayer:
    """Greedily pack ``values`` into flits, each holding the longest whole-value prefix that fits."""
    w = np.asarray(values, dtype=np.uint16).ravel()
    if w.size == 0:
        raise ValueError("encode_layer needs at least one value")
    if cb.escape is None:
        raise ValueError("layer codebooks must carry an escape entry")
    signs, exps, mants = split_array(w)
    code_tab, len_tab = cb.encode_tables()
    codes = code_tab[exps].tolist()
    lens = len_tab[exps].tolist()
    signs = signs.tolist()
    mants = mants.tolist()

    data = []
    n = w.size
    i = 0
    while i < n:
        start = i
        used = HEADER_BITS
        while i < n and i - start < MAX_VALUES_PER_FLIT and used + 8 + lens[i] <= FLIT_BITS:
            used += 8 + lens[i]
            i += 1
        data.append(pack_flit(signs[start:i], mants[start:i], zip(codes[start:i], lens[start:i])))

    header = header_flits_for(cb)
    code_bits = int(sum(lens))
    stats = {
        "value_count": int(n),
        "header_flits": len(header),
        "data_flits": len(data),
        "values_per_flit_mean": n / len(data),
        "exponent_code_bits": code_bits,
        "escaped_values": int(sum(1 for e in exps.tolist() if e not in cb.entries)),
        "compression_ratio_exponent": 8 * n / code_bits,
        "compression_ratio_total": 16 * n / (FLIT_BITS * (len(header) + len(data))),
    }
    return EncodedLayer(header, data, int(n), code_bits, stats)


def decode_flit(flit: int, tables: DecoderTables) -> tuple[list[int], list[int]]:
    """Decode one data flit; returns ``(bf16 words, per-stage hit counts)``."""
    if not 0 <= flit <= _MASK:
        raise FramingError("flit wider than 128 bits")
    n = flit_count(flit)
    if n == 0:
        raise FramingError("expected a data flit, found a header flit")
    if n > MAX_VALUES_PER_FLIT:
        raise FramingError(f"flit declares {n} values, at most {MAX_VALUES_PER_FLIT} fit")
    pos = HEADER_BITS
    signs = (flit >> (FLIT_BITS - pos - n)) & ((1 << n) - 1)
    pos += n
    mant_field = (flit >> (FLIT_BITS - pos - 7 * n)) & ((1 << (7 * n)) - 1)
    pos += 7 * n
    stage_hits = [0] * len(tables.widths)
    out = []
    for k in range(n):
        avail = FLIT_BITS - pos
        if avail <= 0:
            raise FramingError("flit exhausted before all declared values were decoded")
        window = ((flit << pos) & _MASK) >> (FLIT_BITS - 32)
        sym, length, stage = tables.resolve(window, avail)
        stage_hits[stage] += 1
        pos += length
        if sym == ESCAPE:
            if FLIT_BITS - pos < RAW_EXPONENT_BITS:
                raise FramingError("escaped exponent runs past the end of the flit")
            sym = (flit >> (FLIT_BITS - pos - RAW_EXPONENT_BITS)) & 0xFF
            pos += RAW_EXPONENT_BITS
            if sym in tables.coded:
                raise CorruptStreamError(f"escaped exponent {sym:#04x} has its own codeword")
        sign = (signs >> (n - 1 - k)) & 1
        mant = (mant_field >> (7 * (n - 1 - k))) & 0x7F
        out.append((sign << 15) | (sym << 7) | mant)
    if flit & ((1 << (FLIT_BITS - pos)) - 1):
        raise FramingError("non-zero bits in flit padding")
    return out, stage_hits


def read_header_flits(flits: list[int], layer_id=None) -> tuple[Codebook, int]:
    """Rebuild the codebook from the leading header flits; returns ``(codebook, flits used)``."""
    if not flits:
        raise FramingError("no codebook header flit")
    chunk = FLIT_BYTES - 1
    raw = bytearray()
    used = 0
    needed = None
    while needed is None or len(raw) < needed:
        if used >= len(flits):
            raise FramingError("codebook header truncated")
        f = flits[used]
        if flit_count(f) != 0:
            raise FramingError("expected a codebook header flit")
        raw += (f & ((1 << (FLIT_BITS - HEADER_BITS)) - 1)).to_bytes(chunk, "big")
        used += 1
        if needed is None:
            needed = 1 + 2 * raw[0]
    cb, consumed = Codebook.from_header_bytes(bytes(raw), layer_id=layer_id)
    if any(raw[consumed:]):
        raise FramingError("non-zero bytes after codebook header")
    return cb, used


@dataclass
class DecodedLayer:
    values: np.ndarray
    codebook: Codebook
    stage_hits: list[int]


def decode_layer_detailed(flits, layer_id=None) -> DecodedLayer:
    flits = [int(f) for f in flits]
    cb, used = read_header_flits(flits, layer_id)
    tables = build_decoder_tables(cb)
    out: list[int] = []
    hits = [0] * len(tables.widths)
    for f in flits[used:]:
        vals, h = decode_flit(f, tables)
        out.extend(vals)
        hits = [a + b for a, b in zip(hits, h)]
    return DecodedLayer(np.asarray(out, dtype=np.uint16), cb, hits)


def decode_layer(flits) -> np.ndarray:
    """Header flits followed by data flits back to the BF16 words."""
    return decode_layer_detailed(flits).values


__all__ = [
    "FLIT_BITS", "HEADER_BITS", "PAYLOAD_BITS", "MAX_VALUES_PER_FLIT",
    "EncodedLayer", "DecodedLayer", "encode_layer", "decode_flit", "decode_layer",
    "decode_layer_detailed", "read_header_flits", "header_flits_for", "pack_flit",
    "flits_to_bytes", "flits_from_bytes", "flit_count", "CorruptStreamError",
]
