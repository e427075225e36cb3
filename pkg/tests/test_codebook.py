import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lexi.codebook import (
    ESCAPE,
    STAGE_WIDTHS,
    Codebook,
    EncoderConfig,
    assign_canonical,
    bitonic_sort_desc,
    build_decoder_tables,
    build_huffman,
    build_layer_codebook,
    codebook_from_counts,
    fits_decoder_stages,
    kraft_sum_scaled,
)
from lexi.exceptions import CorruptStreamError
from oracles import TrieDecoder, canonical_codes_rfc1951, optimal_prefix_cost, optimal_rank_limited_cost


# -- bitonic sorter ---------------------------------------------------------

def test_bitonic_small():
    out, stages = bitonic_sort_desc([(10, 3), (11, 1), (12, 4), (13, 2)])
    assert [c for _, c in out] == [4, 3, 2, 1]
    assert stages == 15


def test_bitonic_ties_by_ascending_exponent():
    out, _ = bitonic_sort_desc([(0x82, 5), (0x7F, 5), (0x80, 5)])
    assert out == [(0x7F, 5), (0x80, 5), (0x82, 5)]


def test_bitonic_rejects_more_than_32():
    with pytest.raises(ValueError):
        bitonic_sort_desc([(e, 1) for e in range(33)])


def test_bitonic_matches_reference_sort_on_random_histograms():
    rng = random.Random(7)
    for _ in range(1000):
        k = rng.randint(0, 32)
        exps = rng.sample(range(256), k)
        items = [(e, rng.randint(1, 50)) for e in exps]
        out, stages = bitonic_sort_desc(items)
        assert out == sorted(items, key=lambda ec: (-ec[1], ec[0]))
        assert stages == 15


# -- Huffman -----------------------------------------------------------------

def test_huffman_textbook():
    lengths, cycles = build_huffman({0: 4, 1: 2, 2: 1, 3: 1})
    assert lengths == {0: 1, 1: 2, 2: 3, 3: 3}
    assert cycles == 31
    avg = sum(f * lengths[s] for s, f in {0: 4, 1: 2, 2: 1, 3: 1}.items()) / 8
    assert avg == 1.75
    assert 4 * 1 + 2 * 2 + 1 * 3 + 1 * 3 == optimal_prefix_cost([4, 2, 1, 1])


def test_huffman_single_symbol_plus_escape():
    lengths, _ = build_huffman({0x7F: 512, ESCAPE: 1})
    assert lengths == {0x7F: 1, ESCAPE: 1}


def test_huffman_rejects_empty():
    with pytest.raises(ValueError):
        build_huffman({})


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(1, 1000), min_size=2, max_size=6))
def test_huffman_optimal_against_exhaustive_search(freqs):
    lengths, _ = build_huffman(dict(enumerate(freqs)))
    assert sum(f * lengths[i] for i, f in enumerate(freqs)) == optimal_prefix_cost(freqs)


def _random_prefix_code_lengths(rng, n):
    """A random complete code: split random leaves of a growing full binary tree."""
    leaves = [1, 1]
    while len(leaves) < n:
        i = rng.randrange(len(leaves))
        d = leaves.pop(i)
        leaves += [d + 1, d + 1]
    rng.shuffle(leaves)
    return leaves


def test_huffman_beats_random_prefix_codes():
    rng = random.Random(11)
    for _ in range(30):
        n = rng.randint(2, 33)
        freqs = [rng.randint(1, 500) for _ in range(n)]
        lengths, _ = build_huffman(dict(enumerate(freqs)))
        assert kraft_sum_scaled(lengths.values()) == 1 << 32
        cost = sum(f * lengths[i] for i, f in enumerate(freqs))
        for _ in range(10_000 // 30):
            rand = _random_prefix_code_lengths(rng, n)
            assert cost <= sum(f * l for f, l in zip(freqs, rand))


def test_escape_moved_to_longest_codeword():
    freqs = {0x70: 1, 0x71: 1, 0x72: 1, 0x73: 100, ESCAPE: 1}
    base, _ = build_huffman({k: v for k, v in freqs.items()})
    assert base[ESCAPE] == max(base.values())
    cost = sum(freqs[s] * l for s, l in base.items())
    assert cost == optimal_prefix_cost(list(freqs.values()))


# -- canonical assignment -----------------------------------------------------

def test_canonical_textbook():
    cb, cycles = assign_canonical({0: 1, 1: 2, 2: 3, 3: 3})
    assert {s: cw.bits() for s, cw in cb.entries.items()} == {0: "0", 1: "10", 2: "110", 3: "111"}
    assert cycles == 32


def test_canonical_two_symbols():
    cb, _ = assign_canonical({0x7F: 1, ESCAPE: 1})
    assert cb.entries[0x7F].bits() == "0"
    assert cb.escape.bits() == "1"


def test_canonical_rejects_kraft_violation():
    with pytest.raises(ValueError):
        assign_canonical({0: 1, 1: 1, 2: 2})
    with pytest.raises(ValueError):
        assign_canonical({0: 1, 1: 2})


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.integers(0, 255), st.integers(1, 10_000), min_size=1, max_size=32))
def test_canonical_matches_rfc1951_and_roundtrips(hist):
    freqs = dict(hist)
    freqs[ESCAPE] = 1
    lengths, _ = build_huffman(freqs)
    cb, _ = assign_canonical(lengths)
    ref = canonical_codes_rfc1951(lengths)
    assert {s: cw.bits() for s, cw in cb.all_codewords().items()} == ref
    assert cb.is_prefix_free()
    assert kraft_sum_scaled(cb.lengths().values()) == 1 << 32
    assert set(cb.escape.bits()) == {"1"}

    rng = random.Random(len(hist))
    stream = [rng.choice(list(hist)) for _ in range(50)] + [rng.randrange(256) for _ in range(5)]
    bits = "".join(format(c, f"0{l}b") for c, l in map(cb.code_for, stream))
    decoded = TrieDecoder({s: cw.bits() for s, cw in cb.all_codewords().items()}).decode(bits, escape=ESCAPE)
    assert decoded == stream


# -- decoder tables -----------------------------------------------------------

def test_tables_small_codebook_all_in_stage_one():
    cb, _ = assign_canonical({0: 1, 1: 2, 2: 3, ESCAPE: 3})
    t = build_decoder_tables(cb)
    assert len(t.stages[0]) == 4 and all(len(s) == 0 for s in t.stages[1:])


def _chain_counts():
    # exponentially decaying counts force a degenerate chain: lengths 1..31, 31, 32 (escape)
    counts = np.zeros(256, dtype=np.int64)
    for r in range(32):
        counts[0x60 + r] = 2 ** (32 - r)
    return counts


def test_tables_degenerate_chain():
    cb, t, _ = codebook_from_counts(_chain_counts())
    assert len(cb) == 33
    lens = sorted(cb.lengths().values())
    assert lens == list(range(1, 32)) + [32, 32]
    assert [len(s) for s in t.stages] == [8, 8, 8, 9]
    for width, stage in zip(STAGE_WIDTHS, t.stages):
        assert all(e.length <= width for e in stage)
    assert t.stages[3][-1].symbol == ESCAPE
    assert cb.escape.bits() == "1" * 32


def _check_tables(cb, t):
    entries = t.entries()
    assert sorted((e.symbol for e in entries)) == sorted(cb.all_codewords())
    prev_max = 0
    for width, stage in zip(STAGE_WIDTHS, t.stages):
        for e in stage:
            assert e.length <= width
            assert e.length >= prev_max
        if stage:
            prev_max = max(e.length for e in stage)


def test_tables_random_histograms():
    rng = np.random.default_rng(3)
    for _ in range(10_000 // 10):
        k = int(rng.integers(1, 33))
        counts = np.zeros(256, dtype=np.int64)
        counts[rng.choice(256, size=k, replace=False)] = rng.geometric(rng.uniform(0.01, 0.9), size=k)
        cb, t, _ = codebook_from_counts(counts)
        _check_tables(cb, t)


def test_kth_shortest_code_can_exceed_k():
    # a complete Huffman code where the 2nd shortest codeword has 3 bits
    lengths, _ = build_huffman({0: 4, 1: 1, 2: 1, 3: 1, 4: 1})
    assert sorted(lengths.values()) == [1, 3, 3, 3, 3]


# counts seen in a 512-sample geometric stream; one of the tied Huffman codes
# is 1..7, 9, 9, 9, 10, 10 which puts a 9-bit code at rank 8
TIGHT_COUNTS = [210, 121, 74, 40, 33, 14, 11, 3, 3, 2, 1]


def test_plain_huffman_can_overflow_first_stage():
    assert not fits_decoder_stages([1, 2, 3, 4, 5, 6, 7, 9, 9, 9, 10, 10])
    assert fits_decoder_stages([1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 11])


def test_tight_histogram_builds_valid_tables_at_optimal_cost():
    counts = np.zeros(256, dtype=np.int64)
    counts[0x70:0x70 + len(TIGHT_COUNTS)] = TIGHT_COUNTS
    cb, t, _ = codebook_from_counts(counts)
    _check_tables(cb, t)
    lens = cb.lengths()
    cost = sum(int(counts[e]) * lens[e] for e in cb.entries) + lens[ESCAPE]
    weights = TIGHT_COUNTS + [1]
    assert cost == optimal_rank_limited_cost(weights, _rank_limits(len(weights)))
    # the stage limit binds: one bit more than the unconstrained optimum
    assert cost == optimal_rank_limited_cost(weights, [64] * len(weights)) + 1


def _rank_limits(n):
    return [STAGE_WIDTHS[min(r // 8, 3)] for r in range(n)]


@pytest.mark.parametrize("seed", range(12))
def test_rank_limited_fallback_is_optimal(seed):
    # steep tails make the stage limits bind; compare against exhaustive search
    rng = random.Random(seed)
    n = rng.randint(10, 14)
    weights = [4 ** (n - i) for i in range(9)] + [1] * (n - 9)
    rng.shuffle(weights)
    lengths, _ = build_huffman(dict(enumerate(weights)))
    assert fits_decoder_stages(lengths.values())
    assert kraft_sum_scaled(lengths.values()) == 1 << 32
    cost = sum(weights[s] * l for s, l in lengths.items())
    assert cost == optimal_rank_limited_cost(weights, _rank_limits(n))


def test_tables_resolve_every_codeword():
    cb, t, _ = codebook_from_counts(_chain_counts())
    for sym, cw in cb.all_codewords().items():
        window = cw.code << (32 - cw.length)
        got, length, stage = t.resolve(window, 32)
        assert (got, length) == (sym, cw.length)
        rank = [s for s, _ in cb.canonical_order()].index(sym)
        assert stage == min(rank // 8, 3)


def test_resolve_detects_overrun():
    cb, t, _ = codebook_from_counts(_chain_counts())
    cw = cb.escape
    with pytest.raises(CorruptStreamError):
        t.resolve(cw.code << (32 - cw.length), cw.length - 1)


# -- whole layer ----------------------------------------------------------------

def test_layer_within_alphabet_codes_every_exponent():
    rng = np.random.default_rng(1)
    exps = rng.integers(0x70, 0x80, size=512)
    built = build_layer_codebook(exps)
    assert set(built.codebook.entries) == set(np.unique(exps).tolist())
    c = built.cycles
    assert (c.sort_cycles, c.tree_cycles, c.lut_program_cycles, c.total_pipeline_cycles) == (15, 31, 32, 78)


def test_layer_overflow_keeps_32_most_frequent():
    exps = []
    for r in range(40):
        exps += [0x50 + r] * (60 - r)
    built = build_layer_codebook(np.array(exps), EncoderConfig(sample_size=len(exps)))
    assert set(built.codebook.entries) == {0x50 + r for r in range(32)}
    assert len(built.codebook) == 33


def test_layer_uses_only_leading_sample():
    exps = np.array([0x7F] * 512 + [0x10] * 5000)
    built = build_layer_codebook(exps)
    assert set(built.codebook.entries) == {0x7F}


def test_layer_is_deterministic():
    rng = np.random.default_rng(9)
    exps = rng.integers(0x60, 0x90, size=2000)
    a = build_layer_codebook(exps)
    b = build_layer_codebook(exps.copy())
    assert a.codebook == b.codebook and a.tables == b.tables and a.cycles == b.cycles


def test_header_roundtrip_and_validation():
    cb, _, _ = codebook_from_counts(_chain_counts())
    raw = cb.to_header_bytes()
    assert raw[0] == 32 and len(raw) == 65
    back, used = Codebook.from_header_bytes(raw)
    assert used == 65 and back.all_codewords() == cb.all_codewords()
    for bad in (b"", b"\x00", b"\x21", raw[:10], bytes([1, 0x7F, 2])):
        with pytest.raises(CorruptStreamError):
            Codebook.from_header_bytes(bad)
    swapped = bytearray(raw)
    swapped[1:3], swapped[3:5] = raw[3:5], raw[1:3]
    with pytest.raises(CorruptStreamError):
        Codebook.from_header_bytes(bytes(swapped))


def test_header_rejects_duplicate_exponent():
    with pytest.raises(CorruptStreamError):
        Codebook.from_header_bytes(bytes([2, 0x7F, 1, 0x7F, 2]))


def test_header_rejects_lengths_outside_stage_widths():
    # complete with a 9-bit escape, but only seven codes fit the 8-bit stage
    recs = [(e, e + 1) for e in range(7)] + [(7, 9), (8, 9), (9, 9)]
    raw = bytes([len(recs)] + [b for rec in recs for b in rec])
    with pytest.raises(CorruptStreamError):
        Codebook.from_header_bytes(raw)


def test_expected_length_within_entropy_plus_one():
    rng = np.random.default_rng(4)
    for _ in range(200):
        k = int(rng.integers(1, 33))
        counts = np.zeros(256, dtype=np.int64)
        counts[rng.choice(256, size=k, replace=False)] = rng.integers(1, 1000, size=k)
        cb, _, _ = codebook_from_counts(counts)
        p = counts[counts > 0] / counts.sum()
        h = float(-(p * np.log2(p)).sum())
        assert cb.expected_length(counts) <= h + 1 + 1e-9
