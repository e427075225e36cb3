"""BF16 field decomposition and per-field entropy profiling."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

SIGN_BITS = 1
EXPONENT_BITS = 8
MANTISSA_BITS = 7

BF16_DTYPE = np.dtype("<u2")


class Bf16Triple(NamedTuple):
    sign: int
    exponent: int
    mantissa: int


@dataclass(frozen=True)
class FieldEntropyReport:
    sign_entropy_bits: float
    exponent_entropy_bits: float
    mantissa_entropy_bits: float
    distinct_exponents: int
    total_values: int

    def to_dict(self) -> dict:
        return asdict(self)


def split(bits: int) -> Bf16Triple:
    if not 0 <= bits <= 0xFFFF:
        raise ValueError(f"not a 16-bit word: {bits!r}")
    return Bf16Triple((bits >> 15) & 0x1, (bits >> 7) & 0xFF, bits & 0x7F)


def join(t: Bf16Triple) -> int:
    sign, exponent, mantissa = t
    if not (0 <= sign <= 1 and 0 <= exponent <= 0xFF and 0 <= mantissa <= 0x7F):
        raise ValueError(f"BF16 field out of range: {t!r}")
    return (sign << 15) | (exponent << 7) | mantissa


def split_array(words) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised :func:`split` returning ``(sign, exponent, mantissa)`` uint8 arrays."""
    w = np.asarray(words, dtype=np.uint16)
    return (
        (w >> 15).astype(np.uint8),
        ((w >> 7) & 0xFF).astype(np.uint8),
        (w & 0x7F).astype(np.uint8),
    )


def join_array(sign, exponent, mantissa) -> np.ndarray:
    s = np.asarray(sign, dtype=np.uint16)
    e = np.asarray(exponent, dtype=np.uint16)
    m = np.asarray(mantissa, dtype=np.uint16)
    if s.size and (s.max() > 1 or e.max() > 0xFF or m.max() > 0x7F):
        raise ValueError("BF16 field out of range")
    return (s << 15) | (e << 7) | m


def shannon_entropy(counts) -> float:
    """Entropy in bits of an empirical distribution; zero counts contribute nothing."""
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    if c.size == 0:
        return 0.0
    p = c / c.sum()
    h = float(-(p * np.log2(p)).sum())
    return max(h, 0.0)


def exponent_histogram(words) -> np.ndarray:
    _, e, _ = split_array(words)
    return np.bincount(e, minlength=256).astype(np.int64)


def profile_stream(values) -> FieldEntropyReport:
    w = np.asarray(values, dtype=np.uint16).ravel()
    if w.size == 0:
        raise ValueError("cannot profile an empty stream")
    s, e, m = split_array(w)
    exp_counts = np.bincount(e, minlength=256)
    return FieldEntropyReport(
        sign_entropy_bits=shannon_entropy(np.bincount(s, minlength=2)),
        exponent_entropy_bits=shannon_entropy(exp_counts),
        mantissa_entropy_bits=shannon_entropy(np.bincount(m, minlength=128)),
        distinct_exponents=int(np.count_nonzero(exp_counts)),
        total_values=int(w.size),
    )


def read_bf16(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    return bf16_from_bytes(raw)


def bf16_from_bytes(raw: bytes) -> np.ndarray:
    if len(raw) % 2:
        raise ValueError(f"raw BF16 data must hold whole 16-bit words, got {len(raw)} bytes")
    return np.frombuffer(raw, dtype=BF16_DTYPE).astype(np.uint16)


def write_bf16(path: str | Path, words) -> None:
    Path(path).write_bytes(np.asarray(words, dtype=BF16_DTYPE).tobytes())


def bf16_from_float32(x) -> np.ndarray:
    """Truncate float32 values to BF16 bit patterns (upper half of the word)."""
    f = np.ascontiguousarray(x, dtype=np.float32)
    return (f.view(np.uint32) >> 16).astype(np.uint16)


def bf16_to_float32(words) -> np.ndarray:
    w = np.asarray(words, dtype=np.uint32)
    return (w << 16).view(np.float32)


def max_entropy_bits(distinct: int) -> float:
    return math.log2(distinct) if distinct >= 1 else 0.0
