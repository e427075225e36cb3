"""Link-level latency accounting for uncompressed, weights-only and full compression modes.

Both modes share one flit format: an 8-bit count header plus whole values in
the remaining 120 bits, one flit per cycle. Raw values therefore travel seven
per flit. The inter-chiplet mesh is reduced to per-link serialization time.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bf16 import read_bf16, split_array
from .codebook import PIPELINE_CYCLES, EncoderConfig, build_layer_codebook, codebook_from_counts, run_histogram
from .codec import FLIT_BITS, HEADER_BITS, MAX_VALUES_PER_FLIT, encode_layer

KINDS = ("weight", "activation", "hybrid_cache")
MODES = ("uncompressed", "weights", "lexi")
FULL_CODEBOOK_HEADER_FLITS = math.ceil((1 + 2 * 32) / (FLIT_BITS // 8 - 1))
_KIND_ALIASES = {
    "weight": "weight", "weights": "weight",
    "activation": "activation", "activations": "activation", "act": "activation",
    "hybrid_cache": "hybrid_cache", "hybridcache": "hybrid_cache", "cache": "hybrid_cache",
    "kv": "hybrid_cache", "state": "hybrid_cache",
}


@dataclass(frozen=True)
class LinkModel:
    bandwidth_bits_per_ns: float = 100.0
    flit_bits: int = FLIT_BITS
    header_bits: int = HEADER_BITS
    cycle_ns: float = 1.0
    decode_lanes: int = 10

    @property
    def payload_bits(self) -> int:
        return self.flit_bits - self.header_bits

    @property
    def saturates_link(self) -> bool:
        return self.payload_bits >= self.bandwidth_bits_per_ns * self.cycle_ns


def codebook_latency(cfg: EncoderConfig = EncoderConfig(), sample=None, sample_size: int | None = None,
                     link: LinkModel = LinkModel()) -> dict:
    """Histogram phase plus the fixed sort/tree/LUT pipeline.

    With ``sample`` (exponents) the arbiter is simulated; otherwise only the
    stall-free ingest bound ``ceil(sample_size / lanes)`` is reported.
    """
    if sample is not None:
        ex = np.asarray(sample).ravel()[: cfg.sample_size]
        hist = run_histogram(ex, cfg)
        ingest, stalls, hit = hist.histogram_cycles, hist.arbiter_stall_cycles, hist.lane_hit_rate
    else:
        n = cfg.sample_size if sample_size is None else sample_size
        ingest, stalls, hit = -(-n // cfg.lanes), 0, None
    hist_phase = ingest + stalls
    return {
        "histogram_cycles": ingest,
        "arbiter_stall_cycles": stalls,
        "histogram_phase_cycles": hist_phase,
        "pipeline_cycles": PIPELINE_CYCLES,
        "pipeline_ns": PIPELINE_CYCLES * link.cycle_ns,
        "total_ns": (hist_phase + PIPELINE_CYCLES) * link.cycle_ns,
        "lane_hit_rate": hit,
    }


def uncompressed_flits(value_count: int, link: LinkModel = LinkModel(), framing: bool = True) -> int:
    if not framing:
        return math.ceil(16 * value_count / link.payload_bits)
    per_flit = link.payload_bits // 16
    return math.ceil(value_count / per_flit)


def compressed_flits(value_count: int, exponent_cr: float, link: LinkModel = LinkModel(),
                     framing: bool = True, header_flits: int = 0) -> int:
    """Analytic flit count for ``value_count`` values at exponent compression ``exponent_cr``.

    With framing, each flit loses on average half a value to whole-value
    packing and carries at most twelve values.
    """
    if exponent_cr < 1:
        raise ValueError("compressed modes need an exponent CR >= 1")
    if value_count == 0:
        return 0
    bits_per_value = 8 + 8 / exponent_cr
    if not framing:
        return math.ceil(value_count * bits_per_value / link.payload_bits) + header_flits
    per_flit = min(MAX_VALUES_PER_FLIT, (link.payload_bits - bits_per_value / 2) / bits_per_value)
    return math.ceil(value_count / per_flit) + header_flits


def transfer_time(value_count: int, compressed: bool, exponent_cr: float | None = None,
                  link: LinkModel = LinkModel(), framing: bool = True,
                  header_flits: int = FULL_CODEBOOK_HEADER_FLITS) -> float:
    """Serialization time in ns at one flit per cycle.

    ``header_flits`` charges the codebook header of a compressed layer; the
    default is the size of a full 32-symbol header.
    """
    if compressed:
        flits = compressed_flits(value_count, exponent_cr, link, framing, header_flits)
    else:
        flits = uncompressed_flits(value_count, link, framing)
    return flits * link.cycle_ns


def analytic_reduction(exponent_cr: float) -> float:
    """Closed-form fractional reduction ignoring framing: 1 - (8 + 8/CR) / 16."""
    return 1 - (8 + 8 / exponent_cr) / 16


@dataclass
class TransferRecord:
    layer_id: str
    kind: str
    value_count: int
    src: str = ""
    dst: str = ""
    data_file: str | None = None

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).strip().lower())
        if kind is None:
            raise ValueError(f"unknown transfer kind {self.kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.value_count = int(self.value_count)
        if self.value_count < 1:
            raise ValueError("value_count must be >= 1")


def load_trace(path: str | Path) -> list[TransferRecord]:
    """Read ``layerId,kind,valueCount,src,dst[,dataFile]`` rows; a header row is optional."""
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if row[0].strip().lower() in ("layerid", "layer_id", "layer"):
                continue
            if len(row) < 5:
                raise ValueError(f"{path}: trace row needs at least 5 fields: {row}")
            data = row[5].strip() if len(row) > 5 and row[5].strip() else None
            if data is not None and not Path(data).is_absolute():
                data = str(path.parent / data)
            out.append(TransferRecord(row[0].strip(), row[1], int(row[2]), row[3].strip(), row[4].strip(), data))
    return out


@dataclass
class SimulationReport:
    mode: str
    transfers: list[dict]
    totals_ns: dict[str, float]
    reduction_percent: dict[str, float]
    startup_cycles_per_layer: int = PIPELINE_CYCLES
    startup_layers: int = 0
    config: dict = field(default_factory=dict)

    @property
    def total_ns(self) -> float:
        return self.totals_ns[self.mode]

    @property
    def reduction(self) -> float:
        return self.reduction_percent[self.mode]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_ns"] = self.total_ns
        d["total_reduction_percent"] = self.reduction
        return d


def _measured_flits(rec: TransferRecord, cfg: EncoderConfig) -> tuple[int, float]:
    words = read_bf16(rec.data_file)[: rec.value_count]
    if words.size != rec.value_count:
        raise ValueError(f"{rec.data_file}: holds {words.size} values, trace says {rec.value_count}")
    _, exps, _ = split_array(words)
    if rec.kind == "weight":
        cb = codebook_from_counts(np.bincount(exps, minlength=256))[0]
    else:
        cb = build_layer_codebook(exps, cfg).codebook
    enc = encode_layer(words, cb)
    return len(enc.flits), enc.stats["compression_ratio_exponent"]


def simulate_trace(trace, mode: str = "lexi", *, exponent_cr: float | None = None,
                   cr_by_layer: dict | None = None, link: LinkModel = LinkModel(),
                   cfg: EncoderConfig = EncoderConfig(), framing: bool = True) -> SimulationReport:
    """Latency of ``trace`` under every mode; ``mode`` selects the headline figure.

    Records with a ``data_file`` are encoded with the real codec and charged
    their actual flit count; the rest use the analytic model at the per-layer
    or default exponent CR.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    trace = list(trace)
    if not trace:
        raise ValueError("trace is empty")
    cr_by_layer = cr_by_layer or {}
    rows = []
    totals = dict.fromkeys(MODES, 0.0)
    startup_layers = set()
    for rec in trace:
        if not isinstance(rec, TransferRecord):
            rec = TransferRecord(**rec)
        base = uncompressed_flits(rec.value_count, link, framing) * link.cycle_ns
        if rec.data_file:
            flits, cr = _measured_flits(rec, cfg)
            comp = flits * link.cycle_ns
        else:
            cr = cr_by_layer.get(rec.layer_id, exponent_cr)
            if cr is None:
                raise ValueError(f"no exponent CR for layer {rec.layer_id!r} and no data file")
            comp = transfer_time(rec.value_count, True, cr, link, framing)
        startup = 0.0
        if rec.kind != "weight" and (rec.layer_id, rec.kind) not in startup_layers:
            startup_layers.add((rec.layer_id, rec.kind))
            startup = PIPELINE_CYCLES * link.cycle_ns
        per_mode = {
            "uncompressed": base,
            "weights": comp if rec.kind == "weight" else base,
            "lexi": comp + startup,
        }
        for m in MODES:
            totals[m] += per_mode[m]
        rows.append({
            "layer_id": rec.layer_id, "kind": rec.kind, "value_count": rec.value_count,
            "src": rec.src, "dst": rec.dst, "exponent_cr": cr, "measured": bool(rec.data_file),
            "startup_ns": startup, "ns": per_mode,
        })
    base_total = totals["uncompressed"]
    reduction = {m: 100.0 * (1 - totals[m] / base_total) for m in MODES}
    return SimulationReport(
        mode=mode,
        transfers=rows,
        totals_ns=totals,
        reduction_percent=reduction,
        startup_layers=len(startup_layers),
        config={"link": asdict(link), "encoder": {"lanes": cfg.lanes, "cache_depth": cfg.cache_depth,
                                                  "sample_size": cfg.sample_size},
                "framing": framing, "default_exponent_cr": exponent_cr},
    )
