"""Lossless BF16 exponent coding with a cycle model of its encoder/decoder hardware."""

__version__ = "0.1.0"

from .bf16 import Bf16Triple, FieldEntropyReport, join, profile_stream, split
from .codebook import (
    ESCAPE,
    Codebook,
    CycleReport,
    DecoderTables,
    EncoderConfig,
    LaneCache,
    assign_canonical,
    bitonic_sort_desc,
    build_decoder_tables,
    build_huffman,
    build_layer_codebook,
    lane_ingest,
    run_histogram,
)
from .codec import decode_flit, decode_layer, encode_layer
from .container import compress_weights, decompress_weights
from .estimators import BDICodec, ExponentProfiler, LexiCodec, RLECodec
from .exceptions import ContainerError, CorruptStreamError, FramingError, LexiError

__all__ = [
    "Bf16Triple", "FieldEntropyReport", "join", "profile_stream", "split",
    "ESCAPE", "Codebook", "CycleReport", "DecoderTables", "EncoderConfig", "LaneCache",
    "assign_canonical", "bitonic_sort_desc", "build_decoder_tables", "build_huffman",
    "build_layer_codebook", "lane_ingest", "run_histogram",
    "decode_flit", "decode_layer", "encode_layer", "compress_weights", "decompress_weights",
    "BDICodec", "ExponentProfiler", "LexiCodec", "RLECodec",
    "ContainerError", "CorruptStreamError", "FramingError", "LexiError",
]
