"""Per-layer codebook construction with a cycle model of the encoder hardware.

The path is: multi-lane histogramming (local FIFO caches feeding a global
histogram through a 3-cycle arbiter), a 32-slot bitonic sorter, Huffman tree
construction, canonical code assignment and decoder table generation.
"""
from __future__ import annotations

import heapq
from collections import OrderedDict
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .exceptions import CorruptStreamError

ESCAPE = 256
"""Pseudo-symbol routed to a raw 8-bit exponent. Sorts after every real exponent."""

MAX_CODED_SYMBOLS = 32
MAX_CODE_LENGTH = 32
RAW_EXPONENT_BITS = 8

SORT_CYCLES = 15  # log2(32) * (log2(32) + 1) / 2 comparator stages
TREE_CYCLES = 31  # one merge per cycle, worst case 32 leaves
LUT_PROGRAM_CYCLES = 32
PIPELINE_CYCLES = SORT_CYCLES + TREE_CYCLES + LUT_PROGRAM_CYCLES
ARBITER_HOLD_CYCLES = 3

STAGE_WIDTHS = (8, 16, 24, 32)
STAGE_CAPACITIES = (8, 8, 8, 9)


@dataclass(frozen=True)
class EncoderConfig:
    lanes: int = 10
    cache_depth: int = 8
    sample_size: int = 512
    max_coded_symbols: int = field(default=MAX_CODED_SYMBOLS, init=False)

    def __post_init__(self):
        for name in ("lanes", "cache_depth", "sample_size"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")


# ---------------------------------------------------------------------------
# Histogram stage
# ---------------------------------------------------------------------------

class LaneEvent(NamedTuple):
    kind: str  # "hit", "insert" or "evict"
    exponent: int | None = None
    count: int = 0


HIT = LaneEvent("hit")
INSERT = LaneEvent("insert")


class LaneCache:
    """Fixed-capacity exponent counter cache with oldest-first eviction."""

    def __init__(self, capacity: int = 8):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._entries: OrderedDict[int, list[int]] = OrderedDict()
        self._next_index = 0

    def __len__(self):
        return len(self._entries)

    def __contains__(self, exponent):
        return exponent in self._entries

    @property
    def entries(self) -> list[tuple[int, int, int]]:
        """``(exponent, count, insertion_index)`` in insertion order."""
        return [(e, c, i) for e, (c, i) in self._entries.items()]

    def count(self, exponent: int) -> int:
        return self._entries[exponent][0] if exponent in self._entries else 0

    def ingest(self, exponent: int) -> LaneEvent:
        entry = self._entries.get(exponent)
        if entry is not None:
            entry[0] += 1
            return HIT
        event = INSERT
        if len(self._entries) >= self.capacity:
            old_exp, (old_count, _) = self._entries.popitem(last=False)
            event = LaneEvent("evict", old_exp, old_count)
        self._entries[exponent] = [1, self._next_index]
        self._next_index += 1
        return event

    def drain(self) -> list[tuple[int, int]]:
        out = [(e, c) for e, (c, _) in self._entries.items()]
        self._entries.clear()
        return out


def lane_ingest(cache: LaneCache, exponent: int) -> tuple[LaneCache, LaneEvent]:
    return cache, cache.ingest(int(exponent))


@dataclass(frozen=True)
class HistogramResult:
    counts: np.ndarray
    histogram_cycles: int
    arbiter_stall_cycles: int
    hits: int
    misses: int
    evictions: int
    arbiter_wait_cycles: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def lane_hit_rate(self) -> float:
        return self.hits / (self.hits + self.misses)


def arbitrate(requests: Iterable[tuple[int, int]], hold_cycles: int = ARBITER_HOLD_CYCLES) -> tuple[int, int]:
    """Serve ``(arrival_cycle, lane)`` write requests first-come first-served.

    Same-cycle requests are ordered by lane index. Returns the cycle at which
    the port is released after the last write and the summed queueing delay.
    """
    busy_until = 0
    waited = 0
    for arrival, _lane in sorted(requests):
        grant = max(arrival, busy_until)
        waited += grant - arrival
        busy_until = grant + hold_cycles
    return busy_until, waited


def run_histogram(exponents, cfg: EncoderConfig = EncoderConfig()) -> HistogramResult:
    ex = np.asarray(exponents).ravel()
    if ex.size == 0:
        raise ValueError("run_histogram needs at least one exponent")
    if ex.min() < 0 or ex.max() > 255:
        raise ValueError("exponents must lie in 0..255")
    m = cfg.lanes
    caches = [LaneCache(cfg.cache_depth) for _ in range(m)]
    counts = np.zeros(256, dtype=np.int64)
    requests = []
    hits = misses = 0
    for i, e in enumerate(ex.tolist()):
        lane = i % m
        ev = caches[lane].ingest(e)
        if ev is HIT:
            hits += 1
            continue
        misses += 1
        if ev.kind == "evict":
            counts[ev.exponent] += ev.count
            requests.append((i // m, lane))
    ingest_cycles = -(-ex.size // m)
    # the closing flush is read in parallel by the sorter front end, not arbitrated
    for cache in caches:
        for e, c in cache.drain():
            counts[e] += c
    release, waited = arbitrate(requests)
    return HistogramResult(
        counts=counts,
        histogram_cycles=ingest_cycles,
        arbiter_stall_cycles=max(0, release - ingest_cycles),
        hits=hits,
        misses=misses,
        evictions=len(requests),
        arbiter_wait_cycles=waited,
    )


# ---------------------------------------------------------------------------
# Sort / tree / canonical assignment
# ---------------------------------------------------------------------------

def bitonic_sort_desc(items: Iterable[tuple[int, int]], width: int = MAX_CODED_SYMBOLS) -> tuple[list[tuple[int, int]], int]:
    """Sort ``(exponent, count)`` pairs by count descending, exponent ascending.

    Runs a ``width``-input bitonic network after padding with zero-count
    sentinels; sentinels are dropped from the result. The second return value
    is the number of comparator stages (15 for 32 inputs).
    """
    items = [(int(e), int(c)) for e, c in items]
    if len(items) > width:
        raise ValueError(f"bitonic sorter takes at most {width} items, got {len(items)}")
    if width & (width - 1):
        raise ValueError("sorter width must be a power of two")
    # key order: (-count, exponent); sentinels carry exponent >= 256 so they sort last
    keys = [(-c, e) for e, c in items]
    keys += [(0, 256 + k) for k in range(width - len(keys))]
    stages = 0
    k = 2
    while k <= width:
        j = k // 2
        while j > 0:
            for i in range(width):
                partner = i ^ j
                if partner > i:
                    ascending = (i & k) == 0
                    if (keys[i] > keys[partner]) == ascending:
                        keys[i], keys[partner] = keys[partner], keys[i]
            stages += 1
            j //= 2
        k *= 2
    return [(e, -nc) for nc, e in keys if e < 256], stages


def build_huffman(freqs: Mapping[int, int]) -> tuple[dict[int, int], int]:
    """Huffman code lengths for ``freqs``; returns ``(lengths, tree_cycles)``.

    When the escape pseudo-symbol is present it is moved to a longest
    codeword (a cost-neutral swap, since it carries the minimum count), which
    makes its canonical codeword the all-ones pattern.
    """
    syms = sorted((int(s), int(w)) for s, w in freqs.items())
    if not syms:
        raise ValueError("cannot build a Huffman code over zero symbols")
    if any(w < 0 for _, w in syms):
        raise ValueError("symbol frequencies must be non-negative")
    if len(syms) == 1:
        return {syms[0][0]: 1}, TREE_CYCLES

    lengths = {s: 0 for s, _ in syms}
    heap = [(w, seq, (s,)) for seq, (s, w) in enumerate(syms)]
    heapq.heapify(heap)
    seq = len(heap)
    while len(heap) > 1:
        w1, _, a = heapq.heappop(heap)
        w2, _, b = heapq.heappop(heap)
        for s in a + b:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, seq, a + b))
        seq += 1

    if not fits_decoder_stages(lengths.values()):
        lengths = _rank_limited_lengths(freqs)

    if ESCAPE in lengths:
        longest = max(lengths.values())
        if lengths[ESCAPE] < longest:
            victim = max(s for s, l in lengths.items() if l == longest)
            if freqs[victim] >= freqs[ESCAPE]:
                lengths[victim], lengths[ESCAPE] = lengths[ESCAPE], longest
    return lengths, TREE_CYCLES


def fits_decoder_stages(lengths: Iterable[int]) -> bool:
    """True when the r-th shortest length fits the width of the stage holding rank r."""
    ordered = sorted(lengths)
    if len(ordered) > sum(STAGE_CAPACITIES):
        return False
    return all(l <= _rank_width(r) for r, l in enumerate(ordered))


def _rank_width(rank: int) -> int:
    stage, start = 0, STAGE_CAPACITIES[0]
    while rank >= start:
        stage += 1
        start += STAGE_CAPACITIES[stage]
    return STAGE_WIDTHS[stage]


def _rank_limited_lengths(freqs: Mapping[int, int]) -> dict[int, int]:
    """Minimum-cost code lengths subject to the per-rank stage widths.

    Plain Huffman can leave fewer than eight codes of at most 8 bits (for
    instance lengths 1..7 followed by four 9-bit codes), which the first
    decoder stage cannot hold. Lengths of an optimal code are monotone in
    frequency, so the rank limit becomes a per-symbol limit on the symbols
    sorted by descending weight. The search walks the tree level by level:
    state ``(depth, placed, open_slots)``, choosing how many of the next
    symbols become leaves at this depth.
    """
    syms = sorted(freqs, key=lambda s: (-freqs[s], s))
    w = [int(freqs[s]) for s in syms]
    n = len(w)
    limits = [_rank_width(r) for r in range(n)]
    prefix = [0]
    for x in w:
        prefix.append(prefix[-1] + x)
    choice: dict[tuple[int, int, int], int] = {}

    @lru_cache(maxsize=None)
    def best(depth: int, placed: int, slots: int) -> float:
        top = float("inf")
        for k in range(min(slots, n - placed) + 1):
            cost = depth * (prefix[placed + k] - prefix[placed])
            if placed + k < n:
                if slots == k or depth + 1 > limits[placed + k]:
                    continue
                rest = n - placed - k
                cost += best(depth + 1, placed + k, min(2 * (slots - k), rest))
            if cost < top:
                top = cost
                choice[depth, placed, slots] = k
        return top

    if best(1, 0, 2) == float("inf"):
        raise ValueError("no code satisfies the decoder stage widths")
    lengths = {}
    depth, placed, slots = 1, 0, 2
    while placed < n:
        k = choice[depth, placed, slots]
        for s in syms[placed:placed + k]:
            lengths[s] = depth
        placed += k
        slots = min(2 * (slots - k), n - placed)
        depth += 1
    return lengths


def kraft_sum_scaled(lengths: Iterable[int]) -> int:
    """Kraft sum scaled by 2**32 so that equality is an exact integer test."""
    return sum(1 << (MAX_CODE_LENGTH - l) for l in lengths)


class Codeword(NamedTuple):
    code: int
    length: int

    def bits(self) -> str:
        return format(self.code, f"0{self.length}b")


@dataclass(frozen=True)
class Codebook:
    entries: dict[int, Codeword]
    escape: Codeword | None = None
    layer_id: str | int | None = None

    def __post_init__(self):
        if len(self.entries) > MAX_CODED_SYMBOLS:
            raise ValueError(f"at most {MAX_CODED_SYMBOLS} coded exponents allowed")

    def __len__(self):
        return len(self.entries) + (self.escape is not None)

    def all_codewords(self) -> dict[int, Codeword]:
        out = dict(self.entries)
        if self.escape is not None:
            out[ESCAPE] = self.escape
        return out

    def canonical_order(self) -> list[tuple[int, Codeword]]:
        return sorted(self.all_codewords().items(), key=lambda kv: (kv[1].length, kv[0]))

    def lengths(self) -> dict[int, int]:
        return {s: cw.length for s, cw in self.all_codewords().items()}

    def is_prefix_free(self) -> bool:
        words = sorted(cw.bits() for cw in self.all_codewords().values())
        return all(not b.startswith(a) for a, b in zip(words, words[1:]))

    def code_for(self, exponent: int) -> tuple[int, int]:
        """``(bits, nbits)`` emitted for one exponent, escape path included."""
        cw = self.entries.get(exponent)
        if cw is not None:
            return cw.code, cw.length
        if self.escape is None:
            raise KeyError(f"exponent {exponent:#04x} not coded and no escape entry")
        return (self.escape.code << RAW_EXPONENT_BITS) | exponent, self.escape.length + RAW_EXPONENT_BITS

    def encode_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """256-entry ``(code, length)`` arrays indexed by exponent."""
        codes = np.zeros(256, dtype=np.uint64)
        lens = np.zeros(256, dtype=np.uint8)
        for e in range(256):
            if e in self.entries or self.escape is not None:
                c, l = self.code_for(e)
                codes[e], lens[e] = c, l
        return codes, lens

    def expected_length(self, counts) -> float:
        """Mean exponent code bits under ``counts`` (256 slots), escape included."""
        counts = np.asarray(counts, dtype=np.float64)
        _, lens = self.encode_tables()
        total = counts.sum()
        return float((counts * lens).sum() / total) if total else 0.0

    # wire header: n, then n x (exponent, length) in canonical order
    def to_header_bytes(self) -> bytes:
        if self.escape is None:
            raise ValueError("layer codebooks must carry an escape entry")
        recs = [(s, cw) for s, cw in self.canonical_order() if s != ESCAPE]
        out = bytearray([len(recs)])
        for s, cw in recs:
            out += bytes([s, cw.length])
        return bytes(out)

    @classmethod
    def from_header_bytes(cls, data: bytes, layer_id=None) -> tuple["Codebook", int]:
        """Parse a codebook header; returns the codebook and bytes consumed."""
        if len(data) < 1:
            raise CorruptStreamError("codebook header truncated")
        n = data[0]
        if not 1 <= n <= MAX_CODED_SYMBOLS:
            raise CorruptStreamError(f"codebook symbol count {n} outside 1..{MAX_CODED_SYMBOLS}")
        end = 1 + 2 * n
        if len(data) < end:
            raise CorruptStreamError("codebook header truncated")
        recs = [(data[1 + 2 * i], data[2 + 2 * i]) for i in range(n)]
        prev = None
        for e, l in recs:
            if not 1 <= l <= MAX_CODE_LENGTH:
                raise CorruptStreamError(f"code length {l} outside 1..{MAX_CODE_LENGTH}")
            if prev is not None and (l, e) <= prev:
                raise CorruptStreamError("codebook records not in canonical order")
            prev = (l, e)
        used = kraft_sum_scaled(l for _, l in recs)
        rest = (1 << MAX_CODE_LENGTH) - used
        if rest <= 0 or rest & (rest - 1):
            raise CorruptStreamError("codebook lengths leave no valid escape slot")
        esc_len = MAX_CODE_LENGTH - (rest.bit_length() - 1)
        if esc_len < recs[-1][1]:
            raise CorruptStreamError("escape codeword is not last in canonical order")
        lengths = {e: l for e, l in recs}
        if len(lengths) != n:
            raise CorruptStreamError("codebook lists an exponent twice")
        lengths[ESCAPE] = esc_len
        if not fits_decoder_stages(lengths.values()):
            raise CorruptStreamError("codebook lengths do not fit the decoder stages")
        cb, _ = assign_canonical(lengths, layer_id=layer_id)
        return cb, end


def assign_canonical(lengths: Mapping[int, int], layer_id=None) -> tuple[Codebook, int]:
    """Canonical codewords from code lengths; returns ``(codebook, lut_program_cycles)``."""
    if not lengths:
        raise ValueError("no code lengths given")
    for s, l in lengths.items():
        if not 1 <= l <= MAX_CODE_LENGTH:
            raise ValueError(f"code length {l} for symbol {s} outside 1..{MAX_CODE_LENGTH}")
    if len(lengths) > 1 and kraft_sum_scaled(lengths.values()) != 1 << MAX_CODE_LENGTH:
        raise ValueError("code lengths violate the Kraft equality")
    code = 0
    prev_len = 0
    words: dict[int, Codeword] = {}
    for s, l in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        code <<= l - prev_len
        words[s] = Codeword(code, l)
        code += 1
        prev_len = l
    escape = words.pop(ESCAPE, None)
    return Codebook(words, escape, layer_id), LUT_PROGRAM_CYCLES


# ---------------------------------------------------------------------------
# Decoder tables
# ---------------------------------------------------------------------------

class StageEntry(NamedTuple):
    code: int
    length: int
    symbol: int


@dataclass(frozen=True)
class DecoderTables:
    """Four-stage prefix lookup: stage k matches codes of up to ``STAGE_WIDTHS[k]`` bits."""

    stages: tuple[tuple[StageEntry, ...], ...]
    widths: tuple[int, ...] = STAGE_WIDTHS

    def __post_init__(self):
        # per stage: [(length, {code: symbol})] for lookup
        index = []
        for stage in self.stages:
            by_len: dict[int, dict[int, int]] = {}
            for ent in stage:
                by_len.setdefault(ent.length, {})[ent.code] = ent.symbol
            index.append(tuple(sorted(by_len.items())))
        object.__setattr__(self, "_index", tuple(index))
        coded = frozenset(e.symbol for st in self.stages for e in st if e.symbol != ESCAPE)
        object.__setattr__(self, "coded", coded)

    def __iter__(self):
        return iter(self.stages)

    def entries(self) -> list[StageEntry]:
        return [e for stage in self.stages for e in stage]

    def resolve(self, window: int, available: int) -> tuple[int, int, int]:
        """Match the codeword at the top of a 32-bit ``window``.

        Returns ``(symbol, length, stage)``. ``available`` is the number of
        genuine bits in the window; a match longer than that is a framing error.
        """
        for k, (width, stage) in enumerate(zip(self.widths, self._index)):
            prefix = window >> (32 - width)
            for length, codes in stage:
                sym = codes.get(prefix >> (width - length))
                if sym is not None:
                    if length > available:
                        raise CorruptStreamError("codeword runs past the end of the stream")
                    return sym, length, k
        raise CorruptStreamError("no decoder stage matched the bitstream")


def build_decoder_tables(cb: Codebook) -> DecoderTables:
    order = cb.canonical_order()
    if len(order) > sum(STAGE_CAPACITIES):
        raise ValueError(f"codebook has {len(order)} entries, tables hold {sum(STAGE_CAPACITIES)}")
    stages = []
    start = 0
    for width, cap in zip(STAGE_WIDTHS, STAGE_CAPACITIES):
        chunk = order[start:start + cap]
        start += cap
        for sym, cw in chunk:
            if cw.length > width:
                raise AssertionError(
                    f"rank {start - cap + 1}+ code length {cw.length} exceeds stage width {width}"
                )
        stages.append(tuple(StageEntry(cw.code, cw.length, sym) for sym, cw in chunk))
    return DecoderTables(tuple(stages))


# ---------------------------------------------------------------------------
# Whole-layer build
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CycleReport:
    histogram_cycles: int
    arbiter_stall_cycles: int
    sort_cycles: int
    tree_cycles: int
    lut_program_cycles: int
    lane_hit_rate: float

    @property
    def total_pipeline_cycles(self) -> int:
        return self.sort_cycles + self.tree_cycles + self.lut_program_cycles

    @property
    def histogram_phase_cycles(self) -> int:
        return self.histogram_cycles + self.arbiter_stall_cycles

    def to_dict(self) -> dict:
        return {
            "histogram_cycles": self.histogram_cycles,
            "arbiter_stall_cycles": self.arbiter_stall_cycles,
            "sort_cycles": self.sort_cycles,
            "tree_cycles": self.tree_cycles,
            "lut_program_cycles": self.lut_program_cycles,
            "total_pipeline_cycles": self.total_pipeline_cycles,
            "lane_hit_rate": self.lane_hit_rate,
        }


class LayerCodebook(NamedTuple):
    codebook: Codebook
    tables: DecoderTables
    cycles: CycleReport


def select_coded_symbols(counts, limit: int = MAX_CODED_SYMBOLS) -> list[tuple[int, int]]:
    """The ``limit`` most frequent exponents, ties to the smaller exponent."""
    counts = np.asarray(counts)
    present = [(int(e), int(counts[e])) for e in np.flatnonzero(counts)]
    present.sort(key=lambda ec: (-ec[1], ec[0]))
    return present[:limit]


def codebook_from_counts(counts, layer_id=None) -> tuple[Codebook, DecoderTables, tuple[int, int, int]]:
    """Sort, tree and canonical stages over a finished 256-slot histogram."""
    coded = select_coded_symbols(counts)
    if not coded:
        raise ValueError("histogram is empty")
    ordered, sort_cycles = bitonic_sort_desc(coded)
    freqs = dict(ordered)
    freqs[ESCAPE] = 1
    lengths, tree_cycles = build_huffman(freqs)
    cb, lut_cycles = assign_canonical(lengths, layer_id=layer_id)
    return cb, build_decoder_tables(cb), (sort_cycles, tree_cycles, lut_cycles)


def build_layer_codebook(exponents, cfg: EncoderConfig = EncoderConfig(), layer_id=None) -> LayerCodebook:
    ex = np.asarray(exponents).ravel()
    if ex.size == 0:
        raise ValueError("need at least one exponent to build a codebook")
    hist = run_histogram(ex[: cfg.sample_size], cfg)
    cb, tables, (sort_c, tree_c, lut_c) = codebook_from_counts(hist.counts, layer_id)
    cycles = CycleReport(
        histogram_cycles=hist.histogram_cycles,
        arbiter_stall_cycles=hist.arbiter_stall_cycles,
        sort_cycles=sort_c,
        tree_cycles=tree_c,
        lut_program_cycles=lut_c,
        lane_hit_rate=hist.lane_hit_rate,
    )
    return LayerCodebook(cb, tables, cycles)
