"""scikit-learn style wrappers so the codecs compose with pipelines and parameter search.

``fit`` learns a codebook (or nothing, for the baselines), ``transform``
encodes, ``inverse_transform`` decodes and ``score`` returns the exponent
compression ratio, so larger is better as scikit-learn expects.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import BDI_BLOCK, BdiStream, bdi_compress, bdi_decompress, rle_compress, rle_decompress
from .bf16 import profile_stream, split_array
from .codebook import EncoderConfig, build_layer_codebook, codebook_from_counts
from .codec import FLIT_BYTES, decode_layer, encode_layer, flits_from_bytes, flits_to_bytes
from .container import compress_weights
from .validation import check_bf16_array, check_positive_int


class ExponentProfiler(BaseEstimator):
    """Per-field Shannon entropy of a BF16 stream."""

    def fit(self, X, y=None):
        words = check_bf16_array(X)
        self.report_ = profile_stream(words)
        self.exponent_histogram_ = np.bincount(split_array(words)[1], minlength=256)
        self.n_values_ = words.size
        return self


class _ExponentCodec(BaseEstimator, TransformerMixin):
    def _exponent_bits(self, words: np.ndarray) -> int:
        raise NotImplementedError

    def compression_ratios(self, X) -> dict:
        words = check_bf16_array(X)
        bits = self._exponent_bits(words)
        n = words.size
        return {
            "exponent_cr": 8 * n / bits,
            "total_cr": 16 * n / (8 * n + bits),
            "bytes_in": 2 * n,
            "bytes_out": -(-(8 * n + bits) // 8),
        }

    def score(self, X, y=None) -> float:
        return self.compression_ratios(X)["exponent_cr"]


class LexiCodec(_ExponentCodec):
    """Huffman exponent codec emitting 128-bit flits.

    Parameters
    ----------
    lanes, cache_depth, sample_size : int
        Encoder hardware configuration; only the first ``sample_size`` values
        seen by ``fit`` feed the histogram.
    offline : bool
        Build the codebook from the exact histogram of all of ``X`` instead
        of the sampled lane model (the stored-weights path).
    """

    def __init__(self, lanes=10, cache_depth=8, sample_size=512, offline=False):
        self.lanes = lanes
        self.cache_depth = cache_depth
        self.sample_size = sample_size
        self.offline = offline

    def fit(self, X, y=None):
        words = check_bf16_array(X)
        cfg = EncoderConfig(
            lanes=check_positive_int(self.lanes, "lanes"),
            cache_depth=check_positive_int(self.cache_depth, "cache_depth"),
            sample_size=check_positive_int(self.sample_size, "sample_size"),
        )
        exps = split_array(words)[1]
        if self.offline:
            self.codebook_, self.decoder_tables_, _ = codebook_from_counts(np.bincount(exps, minlength=256))
            self.cycle_report_ = None
        else:
            built = build_layer_codebook(exps, cfg)
            self.codebook_, self.decoder_tables_, self.cycle_report_ = built
        return self

    def transform(self, X):
        """Header and data flits as a ``(n_flits, 16)`` uint8 array."""
        check_is_fitted(self, "codebook_")
        enc = encode_layer(check_bf16_array(X), self.codebook_)
        self.last_stats_ = enc.stats
        return np.frombuffer(enc.to_bytes(), dtype=np.uint8).reshape(-1, FLIT_BYTES)

    def inverse_transform(self, F):
        raw = np.ascontiguousarray(F, dtype=np.uint8).tobytes()
        return decode_layer(flits_from_bytes(raw))

    def _exponent_bits(self, words):
        check_is_fitted(self, "codebook_")
        _, lens = self.codebook_.encode_tables()
        return int(lens[split_array(words)[1]].astype(np.int64).sum())

    def container_bytes(self, X) -> bytes:
        return compress_weights(check_bf16_array(X))[0]


class RLECodec(_ExponentCodec):
    """Run-length coding of the exponent plane; signs and mantissas are not touched."""

    def fit(self, X, y=None):
        check_bf16_array(X)
        return self

    def transform(self, X):
        """Interleaved ``(run_length, exponent)`` records as a ``(k, 2)`` uint8 array."""
        exps = split_array(check_bf16_array(X))[1]
        return np.frombuffer(rle_compress(exps), dtype=np.uint8).reshape(-1, 2)

    def inverse_transform(self, R):
        return rle_decompress(np.ascontiguousarray(R, dtype=np.uint8).tobytes())

    def _exponent_bits(self, words):
        return 8 * len(rle_compress(split_array(words)[1]))


class BDICodec(_ExponentCodec):
    """Base-delta-immediate coding of the exponent plane in 32-exponent blocks."""

    block_size = BDI_BLOCK

    def fit(self, X, y=None):
        check_bf16_array(X)
        return self

    def transform(self, X) -> BdiStream:
        return bdi_compress(split_array(check_bf16_array(X))[1])

    def inverse_transform(self, stream: BdiStream):
        return bdi_decompress(stream)

    def _exponent_bits(self, words):
        return bdi_compress(split_array(words)[1]).bit_length


CODECS = {"lexi": LexiCodec, "rle": RLECodec, "bdi": BDICodec}

__all__ = ["ExponentProfiler", "LexiCodec", "RLECodec", "BDICodec", "CODECS", "flits_to_bytes"]
