"""Seeded Monte Carlo BER/SER sweeps, decoder comparisons and reports.

Every frame draws its bits, channel and unit-variance noise from streams
keyed by ``(seed, frame, component)``. The noise is scaled by sqrt(N0) per
SNR point, so all points and all detectors see common realizations and
the totals do not depend on chunking or the number of workers.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .codebook import CodebookSet, KpiReport, default_codebook, kpi
from .decoder import DecoderConfig, DecoderConfigError, decode
from .io import CodebookFileError, load_codebook
from .link import (
    CHANNEL_MODELS,
    STREAM_TAGS,
    bit_labels,
    ChannelRealization,
    complex_normal,
    ebn0_db_to_n0,
    encode,
    frame_rng,
    realize_channel,
    transmit,
)
from .oracle import DEFAULT_BUDGET, OracleBudgetError, check_budget, ml_detect_batch

BUILTIN_CODEBOOK = "star-qam-4x6"
ORACLE_VARIANT = "ml"
DEFAULT_CHUNK = 1024
CSV_COLUMNS = (
    "snr_db",
    "decoder",
    "frames",
    "bits",
    "bit_errors",
    "ber",
    "symbol_errors",
    "ser",
    "avg_fn_multiplies",
    "avg_iterations",
    "wall_ms",
)
SNR_COMMENT = (
    "# snr_db is Eb/N0 per user in dB with E_avg = (1/M) sum_m ||x_j^m||^2, "
    "Eb = E_avg / log2(M) and N0 the complex noise variance per resource"
)
SIM_FIELDS = {
    "codebook",
    "channel",
    "snr_db",
    "frames",
    "decoders",
    "seed",
    "min_bit_errors",
    "output",
    "timing",
    "workers",
    "gray",
    "chunk",
}
OUTPUT_FIELDS = {"csv", "plot_data"}


class ConfigError(ValueError):
    """Invalid simulation configuration, detected before any work starts."""


@dataclass(frozen=True)
class MLDetector:
    """Exhaustive joint maximum-likelihood detection."""

    label: str | None = None
    budget: int = DEFAULT_BUDGET

    @property
    def name(self) -> str:
        return self.label or ORACLE_VARIANT


Detector = DecoderConfig | MLDetector


@dataclass(frozen=True)
class SimConfig:
    """A sweep definition. ``decoders`` holds validated detectors."""

    snr_db: tuple[float, ...]
    frames: int
    decoders: tuple
    seed: int
    codebook: str = BUILTIN_CODEBOOK
    channel: str = "rayleigh-uplink"
    min_bit_errors: int | None = None
    csv: str | None = None
    plot_data: str | None = None
    timing: bool = False
    workers: int = 1
    gray: bool = False
    chunk: int = DEFAULT_CHUNK

    @property
    def labels(self) -> list[str]:
        return [d.name for d in self.decoders]


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    decoder: str
    frames: int
    bits: int
    bit_errors: int
    ber: float
    symbol_errors: int
    ser: float
    avg_fn_multiplies: float
    avg_iterations: float
    wall_ms: float

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber {self.ber} outside [0, 1]")

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    # snr_db -> (D, D) fraction of bits on which two detectors agree
    agreement: dict = field(default_factory=dict)
    labels: list[str] = field(default_factory=list)

    def row(self, snr_db: float, decoder: str) -> SweepRow:
        for r in self.rows:
            if r.decoder == decoder and math.isclose(r.snr_db, snr_db, abs_tol=1e-9):
                return r
        raise KeyError((snr_db, decoder))

    def series(self, decoder: str) -> list[tuple[float, float]]:
        return [(r.snr_db, r.ber) for r in self.rows if r.decoder == decoder]


# ---------------------------------------------------------------- config


def parse_snr_axis(value) -> tuple[float, ...]:
    """A list of dB values or an inclusive ``"start:step:stop"`` string."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"snr_db range must be 'start:step:stop', got {value!r}")
        try:
            a, s, b = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"snr_db range {value!r}: {exc}") from None
        if s == 0 or (b - a) / s < -1e-9:
            raise ConfigError(f"snr_db range {value!r} is empty")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        axis = tuple(round(a + i * s, 10) for i in range(n))
    elif isinstance(value, (list, tuple)):
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError("snr_db entries must be numbers")
        axis = tuple(float(v) for v in value)
    else:
        raise ConfigError("snr_db must be a list or a 'start:step:stop' string")
    if not axis:
        raise ConfigError("snr_db must not be empty")
    if not all(math.isfinite(v) for v in axis):
        raise ConfigError("snr_db values must be finite")
    return axis


def detector_from_dict(d: dict, gray: bool = False) -> Detector:
    if not isinstance(d, dict):
        raise ConfigError(f"decoder entry must be an object, got {d!r}")
    if d.get("variant") == ORACLE_VARIANT:
        extra = set(d) - {"variant", "label", "budget"}
        if extra:
            raise ConfigError(f"unknown field(s) for the ml detector: {sorted(extra)}")
        return MLDetector(label=d.get("label"), budget=int(d.get("budget", DEFAULT_BUDGET)))
    if "gray" in d and bool(d["gray"]) != gray:
        raise ConfigError("decoder 'gray' must match the simulation-level 'gray' setting")
    try:
        return DecoderConfig.from_dict({**d, "gray": gray})
    except (DecoderConfigError, TypeError) as exc:
        raise ConfigError(f"decoder {d.get('label') or d.get('variant')}: {exc}") from None


def sim_config_from_dict(doc: dict, base_dir=None) -> SimConfig:
    """Validate a configuration document; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be an object")
    unknown = set(doc) - SIM_FIELDS
    if unknown:
        raise ConfigError(f"unknown configuration field(s): {sorted(unknown)}")
    for req in ("snr_db", "frames", "decoders", "seed"):
        if req not in doc:
            raise ConfigError(f"missing required field {req!r}")

    seed = doc["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    frames = doc["frames"]
    if not isinstance(frames, int) or isinstance(frames, bool) or frames < 1:
        raise ConfigError(f"frames must be an integer >= 1, got {frames!r}")
    channel = doc.get("channel", "rayleigh-uplink")
    if channel not in CHANNEL_MODELS:
        raise ConfigError(f"unknown channel {channel!r}; expected one of {CHANNEL_MODELS}")
    gray = doc.get("gray", False)
    if not isinstance(gray, bool):
        raise ConfigError("gray must be true or false")

    decs = doc["decoders"]
    if not isinstance(decs, list) or not decs:
        raise ConfigError("decoders must be a nonempty list")
    detectors = tuple(detector_from_dict(d, gray) for d in decs)
    labels = [d.name for d in detectors]
    dup = {x for x in labels if labels.count(x) > 1}
    if dup:
        raise ConfigError(f"duplicate decoder label(s) {sorted(dup)}; set 'label' to disambiguate")

    mbe = doc.get("min_bit_errors")
    if mbe is not None and (not isinstance(mbe, int) or mbe < 1):
        raise ConfigError("min_bit_errors must be a positive integer or null")
    workers = doc.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be an integer >= 1")
    chunk = doc.get("chunk", DEFAULT_CHUNK)
    if not isinstance(chunk, int) or chunk < 1:
        raise ConfigError("chunk must be an integer >= 1")
    timing = doc.get("timing", False)
    if not isinstance(timing, bool):
        raise ConfigError("timing must be true or false")

    out = doc.get("output") or {}
    if not isinstance(out, dict) or set(out) - OUTPUT_FIELDS:
        raise ConfigError(f"output accepts only {sorted(OUTPUT_FIELDS)}")

    def _path(p):
        if p is None or base_dir is None:
            return p
        return str(Path(base_dir) / p)

    codebook = doc.get("codebook", BUILTIN_CODEBOOK)
    if not isinstance(codebook, str):
        raise ConfigError("codebook must be the built-in name or a file path")
    if codebook != BUILTIN_CODEBOOK:
        codebook = _path(codebook)

    return SimConfig(
        snr_db=parse_snr_axis(doc["snr_db"]),
        frames=frames,
        decoders=detectors,
        seed=seed,
        codebook=codebook,
        channel=channel,
        min_bit_errors=mbe,
        csv=_path(out.get("csv")),
        plot_data=_path(out.get("plot_data")),
        timing=timing,
        workers=workers,
        gray=gray,
        chunk=chunk,
    )


def load_sim_config(path) -> SimConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from None
    return sim_config_from_dict(doc, base_dir=path.parent)


def resolve_codebook(config: SimConfig) -> CodebookSet:
    if config.codebook == BUILTIN_CODEBOOK:
        return default_codebook()
    return load_codebook(config.codebook)


def prepare(config: SimConfig) -> CodebookSet:
    """Load the codebook and check every detector against it."""
    try:
        cbs = resolve_codebook(config)
    except CodebookFileError as exc:
        raise ConfigError(str(exc)) from None
    for det in config.decoders:
        try:
            if isinstance(det, MLDetector):
                check_budget(cbs.M, cbs.J, det.budget)
            else:
                det.validate(cbs.J, cbs.M)
        except (DecoderConfigError, OracleBudgetError) as exc:
            raise ConfigError(f"decoder {det.name}: {exc}") from None
    return cbs


# ---------------------------------------------------------------- frames


def draw_frames(config: SimConfig, cbs: CodebookSet, f0: int, f1: int):
    """Bits (n, J, B), channel (n, K, J) and unit noise (n, K) for frames f0..f1-1."""
    g = cbs.graph
    n = f1 - f0
    bits = np.empty((n, g.J, cbs.B), dtype=np.int8)
    H = np.empty((n, g.K, g.J), dtype=complex)
    noise = np.empty((n, g.K), dtype=complex)
    for i, f in enumerate(range(f0, f1)):
        bits[i] = frame_rng(config.seed, f, "bits").integers(0, 2, (g.J, cbs.B))
        H[i] = realize_channel(config.channel, g, frame_rng(config.seed, f, "channel")).H
        noise[i] = complex_normal(frame_rng(config.seed, f, "noise"), g.K)
    return bits, H, noise


def noise_variance(cbs: CodebookSet, snr_db: float) -> float:
    return float(ebn0_db_to_n0(snr_db, cbs.M, float(np.mean(cbs.energies()))))


def run_detector(det: Detector, y, H, cbs: CodebookSet, N0, rng=None, gray: bool = False):
    """Hard bits (n, J, B), symbols (n, J) and per-frame work counters."""
    n = y.shape[0]
    if isinstance(det, MLDetector):
        sym = ml_detect_batch(y, H, cbs, np.full(n, N0), budget=det.budget)
        return bit_labels(cbs.M, gray)[sym], sym, np.zeros(n), np.zeros(n)
    res = decode(y, H, cbs, np.full(n, N0), det, rng=rng)
    c = res.counters
    return res.hard_bits, res.hard_symbols, np.asarray(c.get("fn_multiplies", np.zeros(n)), float), \
        np.asarray(c["iterations"], float)


def _run_chunk(args):
    config, cbs, f0, f1, snr_idx = args
    bits, H, unit = draw_frames(config, cbs, f0, f1)
    X = encode(bits, cbs, config.gray)
    # labelling is a bijection, so a symbol is wrong iff any of its bits is
    D = len(config.decoders)
    out = {}
    for si in snr_idx:
        N0 = noise_variance(cbs, config.snr_db[si])
        y = transmit(X, ChannelRealization(config.channel, H, N0), noise=unit)
        stats = np.zeros((D, 5))
        hard = []
        for di, det in enumerate(config.decoders):
            rng = np.random.default_rng([config.seed, f0, STREAM_TAGS["decoder"], si, di])
            t = time.perf_counter()
            hb, _, mults, iters = run_detector(det, y, H, cbs, N0, rng, config.gray)
            dt = time.perf_counter() - t
            bit_err = hb != bits
            stats[di] = (bit_err.sum(), bit_err.any(axis=-1).sum(), mults.sum(), iters.sum(),
                         dt * 1e3 if config.timing else 0.0)
            hard.append(hb.reshape(len(hb), -1))
        agree = np.zeros((D, D))
        for a in range(D):
            for b in range(D):
                agree[a, b] = np.sum(hard[a] == hard[b])
        out[si] = (stats, agree)
    return f1 - f0, out


def _chunks(config: SimConfig):
    return [(s, min(s + config.chunk, config.frames)) for s in range(0, config.frames, config.chunk)]


def run_sweep(config: SimConfig, progress=None) -> SweepResult:
    """BER/SER for every (SNR point, detector) on common realizations.

    With ``min_bit_errors`` set, a point stops after the first chunk (in
    frame order) at which every detector has reached that many errors.
    """
    cbs = prepare(config)
    P, D = len(config.snr_db), len(config.decoders)
    acc = np.zeros((P, D, 5))
    agree = np.zeros((P, D, D))
    frames = np.zeros(P, dtype=np.int64)
    active = set(range(P))
    chunks = _chunks(config)

    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        i = 0
        while i < len(chunks) and active:
            wave = chunks[i: i + config.workers]
            snap = sorted(active)
            tasks = [(config, cbs, f0, f1, snap) for f0, f1 in wave]
            results = list(pool.map(_run_chunk, tasks)) if pool else [_run_chunk(t) for t in tasks]
            for n, out in results:
                for si in snap:
                    if si not in active:
                        continue
                    stats, ag = out[si]
                    acc[si] += stats
                    agree[si] += ag
                    frames[si] += n
                    if config.min_bit_errors is not None and np.all(acc[si, :, 0] >= config.min_bit_errors):
                        active.discard(si)
            i += len(wave)
            if progress is not None:
                progress(min(i, len(chunks)), len(chunks))
    finally:
        if pool is not None:
            pool.shutdown()

    J, B = cbs.J, cbs.B
    res = SweepResult(labels=config.labels)
    for si, snr in enumerate(config.snr_db):
        nf = int(frames[si])
        nbits, nsym = nf * J * B, nf * J
        for di, det in enumerate(config.decoders):
            be, se, mu, it, wall = acc[si, di]
            res.rows.append(SweepRow(
                snr_db=float(snr),
                decoder=det.name,
                frames=nf,
                bits=nbits,
                bit_errors=int(be),
                ber=int(be) / nbits,
                symbol_errors=int(se),
                ser=int(se) / nsym,
                avg_fn_multiplies=float(mu) / nf,
                avg_iterations=float(it) / nf,
                wall_ms=float(wall),
            ))
        res.agreement[float(snr)] = agree[si] / nbits
    return res


def compare_decoders(config: SimConfig, progress=None) -> tuple[SweepResult, dict]:
    """Sweep plus the pairwise hard-decision agreement matrix per SNR point."""
    if len(config.decoders) < 2:
        raise ConfigError("compare needs at least two decoders")
    res = run_sweep(config, progress)
    return res, res.agreement


# ---------------------------------------------------------------- reports


def kpi_report(cbs: CodebookSet) -> list[tuple[str, KpiReport]]:
    """KPIs for the mother constellation (when known) and every user codebook."""
    rows = []
    if cbs.mother is not None:
        rows.append(("mother", kpi(cbs.mother.points)))
    for j in range(cbs.J):
        rows.append((f"user {j + 1}", kpi(cbs.codewords[j])))
    return rows


def format_kpi_table(rows) -> str:
    lines = ["constellation,M,d_E_min,tau_E,tau_E_avg,d_P_min,tau_P,L"]
    for name, r in rows:
        lines.append(f"{name},{r.M},{r.d_E_min!r},{r.tau_E},{r.tau_E_avg!r},{r.d_P_min!r},{r.tau_P},{r.L}")
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(result: SweepResult) -> str:
    lines = [SNR_COMMENT, ",".join(CSV_COLUMNS)]
    for r in result.rows:
        lines.append(",".join(_cell(v) for v in r.as_tuple()))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list[SweepRow]:
    """Rows of a CSV written by ``format_csv``; comment lines are skipped."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    types = {f.name: f.type for f in fields(SweepRow)}
    conv = {"int": int, "float": float, "str": str}
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise ValueError(f"malformed CSV row {ln!r}")
        rows.append(SweepRow(**{c: conv[types[c]](v) for c, v in zip(CSV_COLUMNS, cells)}))
    return rows


def plot_data(result: SweepResult) -> dict:
    return {
        "x": "snr_db",
        "y": "ber",
        "series": {lab: [list(p) for p in result.series(lab)] for lab in result.labels},
    }


def format_agreement(result: SweepResult) -> str:
    labs = result.labels
    lines = []
    for snr, mat in result.agreement.items():
        lines.append(f"# hard-decision agreement at {snr:g} dB")
        lines.append("decoder," + ",".join(labs))
        for a, lab in enumerate(labs):
            lines.append(lab + "," + ",".join(f"{mat[a, b]:.6f}" for b in range(len(labs))))
    return "\n".join(lines) + "\n"


def _write(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_outputs(result: SweepResult, csv_path=None, plot_path=None) -> None:
    if csv_path is not None:
        _write(csv_path, format_csv(result))
    if plot_path is not None:
        _write(plot_path, json.dumps(plot_data(result), indent=1) + "\n")


# ---------------------------------------------------------------- single frame


def parse_bits_hex(text: str, J: int, B: int) -> np.ndarray:
    """(J, B) bits from a big-endian hex string, user 1 first."""
    s = text.strip().lower()
    if s.startswith("0x"):
        s = s[2:]
    n = J * B
    if not s or any(ch not in "0123456789abcdef" for ch in s):
        raise ConfigError(f"bits must be a hex string, got {text!r}")
    v = int(s, 16)
    if v >> n:
        raise ConfigError(f"bits {text!r} exceed the {n} bits of one frame")
    flat = [(v >> (n - 1 - i)) & 1 for i in range(n)]
    return np.array(flat, dtype=np.int8).reshape(J, B)


def _msg_records(arr, graph):
    recs = []
    for k in range(graph.K):
        for s, j in enumerate(graph.xi[k]):
            recs.append({"resource": k + 1, "user": j + 1, "message": arr[k, s].tolist()})
    return recs


def _pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def decode_one(config: SimConfig, bits_hex: str, snr_db: float, frame: int = 0) -> dict:
    """Debug dump of one frame: realization plus per-iteration messages of
    every detector. User, resource and symbol indices are 1-based."""
    cbs = prepare(config)
    g = cbs.graph
    bits = parse_bits_hex(bits_hex, cbs.J, cbs.B)
    H = realize_channel(config.channel, g, frame_rng(config.seed, frame, "channel")).H
    unit = complex_normal(frame_rng(config.seed, frame, "noise"), g.K)
    N0 = noise_variance(cbs, snr_db)
    X = encode(bits, cbs, config.gray)
    y = transmit(X, ChannelRealization(config.channel, H, N0), noise=unit)
    labels = bit_labels(cbs.M, config.gray)
    tx_sym = [int(np.flatnonzero((labels == b).all(axis=1))[0]) for b in bits]

    doc = {
        "snr_db": float(snr_db),
        "N0": N0,
        "bits": bits.tolist(),
        "symbols": [m + 1 for m in tx_sym],
        "H": _pairs(H),
        "y": _pairs(y),
        "decoders": [],
    }
    for det in config.decoders:
        entry = {"decoder": det.name}
        if isinstance(det, MLDetector):
            hb, sym, _, _ = run_detector(det, y[None], H[None], cbs, N0, gray=config.gray)
            entry.update(hard_bits=hb[0].tolist(), hard_symbols=(sym[0] + 1).tolist())
        else:
            iters = []

            def record(state):
                iters.append({
                    "iteration": state.iteration,
                    "fn_to_vn": _msg_records(state.fn_to_vn[0], g),
                    "vn_to_fn": _msg_records(state.vn_to_fn[0], g),
                })

            rng = np.random.default_rng([config.seed, frame, STREAM_TAGS["decoder"]])
            res = decode(y, H, cbs, N0, det, callback=record, rng=rng)
            entry.update(
                domain="prob" if det.domain == "prob" else "log",
                iterations=iters,
                llr=res.llr.tolist(),
                hard_bits=res.hard_bits.tolist(),
                hard_symbols=(np.asarray(res.hard_symbols) + 1).tolist(),
            )
        doc["decoders"].append(entry)
    return doc


def with_overrides(config: SimConfig, seed: int | None = None, csv: str | None = None) -> SimConfig:
    kw = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        kw["seed"] = seed
    if csv is not None:
        kw["csv"] = csv
    return replace(config, **kw) if kw else config
