"""The ``.lexi`` offline weight container.

Byte layout (all planes packed MSB-first, each zero-padded to a byte)::

    b"LEXC" | version u8 (=1) | value_count u64 LE | codebook header
    | sign plane   ceil(count / 8) bytes
    | mantissa plane ceil(7 * count / 8) bytes
    | exponent bitstream (to end of file)

An empty container stores a codebook header of a single zero byte and no planes.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .bf16 import bf16_from_bytes, join_array, split_array
from .bitio import BitReader
from .codebook import ESCAPE, RAW_EXPONENT_BITS, Codebook, build_decoder_tables, codebook_from_counts
from .exceptions import ContainerError, CorruptStreamError, UnsupportedVersionError

MAGIC = b"LEXC"
VERSION = 1
_FIXED = struct.Struct("<4sBQ")
_CHUNK = 1 << 16


def _pack_exponent_stream(exps: np.ndarray, cb: Codebook) -> tuple[bytes, int]:
    code_tab, len_tab = cb.encode_tables()
    pieces = []
    total_bits = 0
    for lo in range(0, exps.size, _CHUNK):
        e = exps[lo:lo + _CHUNK]
        lens = len_tab[e].astype(np.int64)
        # left-align each code in a 64-bit word, expand to bits, keep the first len bits
        aligned = code_tab[e] << (64 - lens).astype(np.uint64)
        bits = np.unpackbits(aligned.astype(">u8").view(np.uint8).reshape(-1, 8), axis=1)
        keep = np.arange(64) < lens[:, None]
        pieces.append(bits[keep])
        total_bits += int(lens.sum())
    flat = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.uint8)
    return np.packbits(flat).tobytes(), total_bits


def compress_weights(words) -> tuple[bytes, dict]:
    """Compress a BF16 word array with one exact full-histogram codebook."""
    w = np.asarray(words, dtype=np.uint16).ravel()
    n = int(w.size)
    out = bytearray(_FIXED.pack(MAGIC, VERSION, n))
    if n == 0:
        out.append(0)
        return bytes(out), {"value_count": 0, "exponent_cr": None, "total_cr": None,
                            "bytes_in": 0, "bytes_out": len(out)}
    signs, exps, mants = split_array(w)
    cb, _, _ = codebook_from_counts(np.bincount(exps, minlength=256))
    out += cb.to_header_bytes()
    out += np.packbits(signs).tobytes()
    mbits = np.unpackbits(mants[:, None], axis=1)[:, 1:]
    out += np.packbits(mbits.ravel()).tobytes()
    stream, code_bits = _pack_exponent_stream(exps, cb)
    out += stream
    stats = {
        "value_count": n,
        "distinct_exponents": int(np.count_nonzero(np.bincount(exps, minlength=256))),
        "coded_exponents": len(cb.entries),
        "exponent_code_bits": code_bits,
        "exponent_cr": 8 * n / code_bits,
        "total_cr": 2 * n / len(out),
        "bytes_in": 2 * n,
        "bytes_out": len(out),
    }
    return bytes(out), stats


def _decode_exponents(stream: bytes, n: int, cb: Codebook) -> np.ndarray:
    tables = build_decoder_tables(cb)
    reader = BitReader(stream)
    coded = tables.coded
    out = np.empty(n, dtype=np.uint8)
    resolve = tables.resolve
    for i in range(n):
        avail = reader.remaining
        if avail <= 0:
            raise CorruptStreamError(f"exponent bitstream truncated after {i} of {n} values")
        sym, length, _ = resolve(reader.peek(32), avail)
        reader.pos += length
        if sym == ESCAPE:
            sym = reader.read(RAW_EXPONENT_BITS)
            if sym in coded:
                raise CorruptStreamError(f"escaped exponent {sym:#04x} has its own codeword")
        out[i] = sym
    tail = len(stream) * 8 - reader.pos
    if tail >= 8:
        raise ContainerError(f"{tail // 8} unexpected trailing bytes after exponent bitstream")
    if tail and reader.peek(tail):
        raise CorruptStreamError("non-zero padding after exponent bitstream")
    return out


def decompress_weights(blob: bytes) -> np.ndarray:
    blob = bytes(blob)
    if len(blob) < _FIXED.size:
        raise ContainerError("container shorter than its fixed header")
    magic, version, n = _FIXED.unpack_from(blob)
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")
    pos = _FIXED.size
    if n == 0:
        if blob[pos:] != b"\x00":
            raise ContainerError("empty container must end with a zero codebook header")
        return np.zeros(0, dtype=np.uint16)
    cb, used = Codebook.from_header_bytes(blob[pos:])
    pos += used
    sign_len = -(-n // 8)
    mant_len = -(-7 * n // 8)
    if len(blob) < pos + sign_len + mant_len:
        raise ContainerError("container truncated inside the sign or mantissa plane")
    sign_plane = np.frombuffer(blob, dtype=np.uint8, count=sign_len, offset=pos)
    pos += sign_len
    mant_plane = np.frombuffer(blob, dtype=np.uint8, count=mant_len, offset=pos)
    pos += mant_len
    sbits = np.unpackbits(sign_plane)
    mbits = np.unpackbits(mant_plane)
    if sbits[n:].any() or mbits[7 * n:].any():
        raise CorruptStreamError("non-zero padding in sign or mantissa plane")
    signs = sbits[:n]
    mants = np.packbits(
        np.concatenate([np.zeros((n, 1), dtype=np.uint8), mbits[: 7 * n].reshape(n, 7)], axis=1), axis=1
    ).ravel()
    exps = _decode_exponents(blob[pos:], n, cb)
    return join_array(signs, exps, mants).astype(np.uint16)


def compress_weights_file(src: str | Path, dst: str | Path) -> dict:
    raw = Path(src).read_bytes()
    if len(raw) % 2:
        raise ContainerError(f"{src}: odd byte length {len(raw)}, not a BF16 stream")
    blob, stats = compress_weights(bf16_from_bytes(raw))
    Path(dst).write_bytes(blob)
    return stats


def decompress_weights_file(src: str | Path, dst: str | Path) -> int:
    words = decompress_weights(Path(src).read_bytes())
    Path(dst).write_bytes(words.astype("<u2").tobytes())
    return int(words.size)
