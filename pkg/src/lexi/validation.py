"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np


def check_bf16_array(X, *, allow_empty: bool = False) -> np.ndarray:
    """Coerce ``X`` to a flat ``uint16`` array of BF16 bit patterns.

    Accepts raw little-endian bytes or any integer array-like whose values
    fit in 16 bits. Floating-point input is rejected: converting it would
    silently choose a rounding mode, so use :func:`lexi.bf16.bf16_from_float32`.
    """
    if isinstance(X, (bytes, bytearray, memoryview)):
        raw = bytes(X)
        if len(raw) % 2:
            raise ValueError(f"byte input must hold whole 16-bit words, got {len(raw)} bytes")
        arr = np.frombuffer(raw, dtype="<u2")
    else:
        arr = np.asarray(X)
        if arr.dtype == object:
            arr = np.asarray(arr.tolist())
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            if np.issubdtype(arr.dtype, np.bool_):
                arr = arr.astype(np.uint16)
            else:
                raise TypeError(
                    f"expected integer BF16 bit patterns, got dtype {arr.dtype}; "
                    "convert floats with lexi.bf16.bf16_from_float32"
                )
        if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
            raise ValueError("BF16 bit patterns must lie in 0..0xFFFF")
    arr = np.ascontiguousarray(arr, dtype=np.uint16).ravel()
    if not allow_empty and arr.size == 0:
        raise ValueError("expected at least one BF16 value")
    return arr


def check_exponents(X, *, allow_empty: bool = False) -> np.ndarray:
    arr = np.asarray(X).ravel()
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise TypeError(f"exponents must be integers, got dtype {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("exponents must lie in 0..255")
    if not allow_empty and arr.size == 0:
        raise ValueError("expected at least one exponent")
    return arr.astype(np.uint8)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
