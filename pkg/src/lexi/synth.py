"""Synthetic BF16 streams with controlled exponent statistics.

Exponent ranks are drawn from a Zipf, geometric or uniform law over
``distinct`` symbols and laid out on consecutive binades below
``top_exponent`` (rank 0 is the largest, most frequent binade, as in
normally distributed weights). Signs and mantissas are uniform.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

DISTRIBUTIONS = ("zipf", "geometric", "uniform")
DEFAULT_TOP_EXPONENT = 0x7E


def rank_probabilities(distribution: str, distinct: int, param: float | None = None) -> np.ndarray:
    r = np.arange(distinct, dtype=np.float64)
    if distribution == "zipf":
        w = (r + 1.0) ** -(1.0 if param is None else param)
    elif distribution == "geometric":
        w = (0.5 if param is None else param) ** r
    elif distribution == "uniform":
        w = np.ones(distinct)
    else:
        raise ValueError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")
    return w / w.sum()


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def parameter_for_entropy(distribution: str, distinct: int, target_bits: float) -> float:
    """Zipf exponent or geometric ratio whose rank law has ``target_bits`` of entropy."""
    if not 0 < target_bits < np.log2(distinct):
        raise ValueError(f"target entropy must lie in (0, log2({distinct}))")
    f = lambda x: entropy_bits(rank_probabilities(distribution, distinct, x)) - target_bits
    if distribution == "zipf":
        return brentq(f, 1e-6, 50.0, xtol=1e-12)
    if distribution == "geometric":
        return brentq(f, 1e-9, 1 - 1e-9, xtol=1e-12)
    raise ValueError(f"entropy cannot be tuned for {distribution!r}")


def generate_exponents(distribution: str, distinct: int, count: int, seed: int = 0, *,
                       param: float | None = None, entropy: float | None = None,
                       top_exponent: int = DEFAULT_TOP_EXPONENT) -> np.ndarray:
    if not 1 <= distinct <= top_exponent + 1:
        raise ValueError(f"distinct must lie in 1..{top_exponent + 1}")
    if entropy is not None:
        param = parameter_for_entropy(distribution, distinct, entropy)
    p = rank_probabilities(distribution, distinct, param)
    rng = np.random.default_rng(seed)
    ranks = rng.choice(distinct, size=count, p=p)
    return (top_exponent - ranks).astype(np.uint8)


def generate_bf16(distribution: str, distinct: int, count: int, seed: int = 0, **kw) -> np.ndarray:
    exps = generate_exponents(distribution, distinct, count, seed, **kw)
    rng = np.random.default_rng([seed, 1])
    signs = rng.integers(0, 2, size=count, dtype=np.uint16)
    mants = rng.integers(0, 128, size=count, dtype=np.uint16)
    return (signs << 15) | (exps.astype(np.uint16) << 7) | mants
