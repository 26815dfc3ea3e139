"""Message state, node updates and the standard MPA / Log-MPA / Max-Log-MPA.

Every array carries a leading frame axis ``N`` so a batch of independent
frames is decoded in one pass. Messages live on edges addressed by
``(k, slot)`` where ``slot`` is the user's position inside ``xi[k]``;
both message arrays have shape ``(N, K, d_f, M)``.
"""

from __future__ import annotations

import string
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..codebook import CodebookSet
from ..link import bit_labels
from .maxstar import MODE_ALIASES, MODES, max_star_reduce

VARIANTS = ("mpa", "log-mpa", "max-log", "pm-mpa", "eml", "dmpa")
# short names accepted on input and mapped to the canonical variant
VARIANT_ALIASES = {"pm": "pm-mpa"}
SCHEDULES = ("flooding", "serial-vn")

PROB_FLOOR = 1e-30
LOG_FLOOR = -700.0
LLR_MAX = 50.0


class DecoderConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    """Detector variant and its parameters.

    ``pm_t`` defaults to ``iterations`` (no partial marginalisation) and
    ``eml_mc`` to M (no truncation).
    """

    variant: str = "mpa"
    iterations: int = 10
    max_star_mode: str = "exact"
    lut_intervals: int = 8
    schedule: str = "flooding"
    pm_t: int | None = None
    pm_u: int = 0
    pm_selection: str = "reliability"
    eml_mc: int | None = None
    dmpa_w: float = 0.05
    dmpa_wid: float | None = None
    gray: bool = False
    llr_max: float = LLR_MAX
    label: str | None = None

    def __post_init__(self):
        if self.variant in VARIANT_ALIASES:
            object.__setattr__(self, "variant", VARIANT_ALIASES[self.variant])
        if self.max_star_mode in MODE_ALIASES:
            object.__setattr__(self, "max_star_mode", MODE_ALIASES[self.max_star_mode])

    @property
    def name(self) -> str:
        return self.label or self.variant

    @property
    def domain(self) -> str:
        return "prob" if self.variant in ("mpa", "pm-mpa", "dmpa") else "log"

    @property
    def mode(self) -> str:
        return "plain-max" if self.variant == "max-log" else self.max_star_mode

    def validate(self, J: int | None = None, M: int | None = None) -> "DecoderConfig":
        if self.variant not in VARIANTS:
            raise DecoderConfigError(f"unknown decoder variant {self.variant!r}")
        if self.iterations < 0:
            raise DecoderConfigError("iterations must be >= 0")
        if self.max_star_mode not in MODES:
            raise DecoderConfigError(f"unknown max_star_mode {self.max_star_mode!r}")
        if self.lut_intervals < 1:
            raise DecoderConfigError("lut_intervals must be >= 1")
        if self.schedule not in SCHEDULES:
            raise DecoderConfigError(f"unknown schedule {self.schedule!r}")
        if self.schedule != "flooding" and self.variant not in ("mpa", "log-mpa", "max-log"):
            raise DecoderConfigError(f"variant {self.variant} supports only the flooding schedule")
        if self.pm_t is not None and not 1 <= self.pm_t <= max(self.iterations, 1):
            raise DecoderConfigError(f"pm_t must satisfy 1 <= t' <= N_t, got {self.pm_t}")
        if self.pm_u < 0 or (J is not None and self.pm_u > J):
            raise DecoderConfigError(f"pm_u must satisfy 0 <= u' <= J, got {self.pm_u}")
        if self.pm_selection not in ("reliability", "random"):
            raise DecoderConfigError(f"unknown pm_selection {self.pm_selection!r}")
        if self.eml_mc is not None and (self.eml_mc < 1 or (M is not None and self.eml_mc > M)):
            raise DecoderConfigError(f"eml_mc must satisfy 1 <= m_c <= M, got {self.eml_mc}")
        if not self.dmpa_w > 0:
            raise DecoderConfigError("dmpa_w must be positive")
        if self.dmpa_wid is not None and not self.dmpa_wid > 0:
            raise DecoderConfigError("dmpa_wid must be positive")
        if not self.llr_max > 0:
            raise DecoderConfigError("llr_max must be positive")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "DecoderConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise DecoderConfigError(f"unknown decoder field(s): {sorted(unknown)}")
        return cls(**d).validate()

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class Problem:
    """Per-batch inputs shared by every update of one decoding session."""

    cbs: CodebookSet
    y: np.ndarray  # (N, K)
    H: np.ndarray  # (N, K, J)
    N0: np.ndarray  # (N,)
    tables: np.ndarray  # (N, K, M, ..., M) log-likelihood exponents
    log_prior: np.ndarray  # (N, J, M)

    @property
    def N(self) -> int:
        return self.y.shape[0]

    @property
    def prior(self) -> np.ndarray:
        return np.exp(self.log_prior)


@dataclass
class MessageState:
    fn_to_vn: np.ndarray  # (N, K, d_f, M)
    vn_to_fn: np.ndarray  # (N, K, d_f, M)
    domain: str
    problem: Problem = field(repr=False)
    iteration: int = 0
    degenerate: np.ndarray | None = None  # (N,) uniform-fallback flags
    counters: dict = field(default_factory=dict)

    def count(self, key: str, value) -> None:
        self.counters[key] = self.counters.get(key, 0) + value


@dataclass
class DecodeResult:
    llr: np.ndarray  # (N, J, B)
    hard_bits: np.ndarray  # (N, J, B)
    hard_symbols: np.ndarray  # (N, J), 0-based
    beliefs: np.ndarray  # (N, J, M), normalised
    counters: dict

    def squeeze(self) -> "DecodeResult":
        """Drop the frame axis of a single-frame result."""
        c = {k: (v[0] if isinstance(v, np.ndarray) and v.ndim else v) for k, v in self.counters.items()}
        return DecodeResult(self.llr[0], self.hard_bits[0], self.hard_symbols[0], self.beliefs[0], c)

    def equals(self, other: "DecodeResult") -> bool:
        return (
            np.array_equal(self.llr, other.llr)
            and np.array_equal(self.hard_bits, other.hard_bits)
            and np.array_equal(self.hard_symbols, other.hard_symbols)
            and np.array_equal(self.beliefs, other.beliefs)
        )


# ---------------------------------------------------------------- inputs


def _as_batch(y, H, N0):
    y = np.asarray(y, dtype=complex)
    H = np.asarray(H, dtype=complex)
    single = y.ndim == 1
    if single:
        y = y[None]
    if H.ndim == 2:
        H = np.broadcast_to(H, (y.shape[0],) + H.shape)
    N0 = np.broadcast_to(np.asarray(N0, dtype=float), (y.shape[0],)).copy()
    if np.any(N0 <= 0):
        raise ValueError("N0 must be positive")
    return y, H, N0, single


def fn_likelihood(y, H, cbs: CodebookSet, k: int, N0) -> np.ndarray:
    """Log-likelihood exponent table -|y_k - sum_i h_k,i x_k,i|^2 / N0.

    Axis ``i`` of the result (after any frame axes) indexes the symbol of
    the ``i``-th user in ``xi[k]``; the table has M**d_f entries per frame.
    """
    y = np.asarray(y, dtype=complex)
    H = np.asarray(H, dtype=complex)
    users = cbs.graph.xi[k]
    d_f, M = len(users), cbs.M
    C = cbs.fn_elements(k)  # (d_f, M)
    lead = y.shape[:-1]
    s = np.zeros(lead + (M,) * d_f, dtype=complex)
    for i, j in enumerate(users):
        shape = lead + tuple(M if a == i else 1 for a in range(d_f))
        s = s + (H[..., k, j][..., None] * C[i]).reshape(shape)
    yk = y[..., k].reshape(lead + (1,) * d_f)
    N0 = np.asarray(N0, dtype=float).reshape(np.shape(N0) + (1,) * d_f)
    return -np.abs(yk - s) ** 2 / N0


def likelihood_tables(y, H, cbs: CodebookSet, N0) -> np.ndarray:
    """Stack fn_likelihood over all resources: (N, K, M, ..., M)."""
    return np.stack([fn_likelihood(y, H, cbs, k, N0) for k in range(cbs.K)], axis=1)


def superposition_constellation(cbs: CodebookSet, k: int) -> np.ndarray:
    """All M**d_f superposed points z on resource ``k`` (unit channel)."""
    C = cbs.fn_elements(k)
    d_f, M = C.shape
    z = np.zeros((M,) * d_f, dtype=complex)
    for i in range(d_f):
        z = z + C[i].reshape(tuple(M if a == i else 1 for a in range(d_f)))
    return z.ravel()


def superposition_metric(y_k, h_k, z, N0=None, sigma2=None):
    """-|y_k - h_k z|^2 / (2 sigma^2) for a shared downlink coefficient.

    Pass either the per-dimension variance ``sigma2`` or ``N0 = 2 sigma2``.
    """
    if (N0 is None) == (sigma2 is None):
        raise ValueError("give exactly one of N0 or sigma2")
    denom = N0 if N0 is not None else 2.0 * sigma2
    return -np.abs(np.asarray(y_k) - np.asarray(h_k) * np.asarray(z)) ** 2 / denom


def make_problem(y, H, cbs: CodebookSet, N0, priors=None) -> tuple[Problem, bool]:
    y, H, N0, single = _as_batch(y, H, N0)
    if y.shape[1] != cbs.K or H.shape[1:] != (cbs.K, cbs.J):
        raise ValueError(f"shape mismatch: y {y.shape}, H {H.shape} for K={cbs.K}, J={cbs.J}")
    N, J, M = y.shape[0], cbs.J, cbs.M
    if priors is None:
        log_prior = np.full((N, J, M), -np.log(M))
    else:
        p = np.broadcast_to(np.asarray(priors, dtype=float), (N, J, M))
        with np.errstate(divide="ignore"):
            log_prior = np.log(p / p.sum(axis=-1, keepdims=True))
    tables = likelihood_tables(y, H, cbs, N0)
    return Problem(cbs, y, H, N0, tables, log_prior), single


# ---------------------------------------------------------------- messages


def init_messages(problem: Problem, config: DecoderConfig) -> MessageState:
    """Uniform 1/M on every edge, both directions (log domain: -log M)."""
    g = problem.cbs.graph
    shape = (problem.N, g.K, g.d_f, problem.cbs.M)
    M = problem.cbs.M
    if config.domain == "prob":
        vn = np.full(shape, 1.0 / M)
        fn = np.full(shape, 1.0 / M)
    else:
        vn = np.full(shape, -np.log(M))
        fn = np.full(shape, -np.log(M))
    return MessageState(fn_to_vn=fn, vn_to_fn=vn, domain=config.domain, problem=problem,
                        degenerate=np.zeros(problem.N, dtype=bool))


def _user_edges(graph):
    """(J, d_v) arrays of resource index and slot for every user's edges."""
    ks = np.array(graph.zeta)
    slots = np.array([[graph.slot(k, j) for k in graph.zeta[j]] for j in range(graph.J)])
    return ks, slots


def _einsum_spec(d_f: int, out_slot: int) -> str:
    letters = string.ascii_lowercase[:d_f]
    ins = ["n" + letters] + ["n" + letters[i] for i in range(d_f) if i != out_slot]
    return ",".join(ins) + "->n" + letters[out_slot]


def _fn_node_prob(table, incoming, slots=None):
    """Sum-product FN update for one resource over a batch.

    table: (N, M, ..., M) exponents; incoming: (N, d_f, M) probabilities.
    Returns (N, len(slots), M) unnormalised-then-normalised messages.
    """
    d_f = incoming.shape[1]
    axes = tuple(range(1, d_f + 1))
    P = np.exp(table - table.max(axis=axes, keepdims=True))
    slots = range(d_f) if slots is None else slots
    out = []
    for i in slots:
        ops = [incoming[:, a] for a in range(d_f) if a != i]
        msg = np.einsum(_einsum_spec(d_f, i), P, *ops)
        s = msg.sum(axis=-1, keepdims=True)
        out.append(np.divide(msg, s, out=np.zeros_like(msg), where=s > 0))
    return np.stack(out, axis=1)


def _fn_node_log(table, incoming, mode, intervals, slots=None):
    """Log-domain FN update: max* over the other users' symbol combinations."""
    d_f, M = incoming.shape[1], incoming.shape[2]
    N = incoming.shape[0]
    slots = range(d_f) if slots is None else slots
    out = []
    for i in slots:
        S = table
        for a in range(d_f):
            if a != i:
                shape = (N,) + tuple(M if b == a else 1 for b in range(d_f))
                S = S + incoming[:, a].reshape(shape)
        others = tuple(1 + a for a in range(d_f) if a != i)
        msg = max_star_reduce(S, others, mode, intervals) if others else S
        msg = msg - msg.max(axis=-1, keepdims=True)
        out.append(np.maximum(msg, LOG_FLOOR))
    return np.stack(out, axis=1)


def fn_operation_count(d_f: int, M: int) -> dict:
    """Work for one full FN-to-VN message: M**d_f combinations, each
    combining the likelihood with d_f - 1 incoming messages."""
    combos = M**d_f
    return {"fn_combinations": combos, "fn_multiplies": combos * (d_f - 1), "fn_max": combos - M}


def _count_fn(state: MessageState, n_edges: int):
    cbs = state.problem.cbs
    c = fn_operation_count(cbs.graph.d_f, cbs.M)
    state.count("fn_edge_updates", n_edges)
    state.count("fn_combinations", n_edges * c["fn_combinations"])
    state.count("fn_multiplies", n_edges * c["fn_multiplies"])
    if state.domain == "log":
        state.count("fn_max", n_edges * c["fn_max"])


def fn_update(state: MessageState, k: int, j: int, config: DecoderConfig | None = None) -> np.ndarray:
    """Message from resource ``k`` to user ``j`` for every frame: (N, M).

    Reads the current VN-to-FN messages; does not modify ``state``.
    """
    config = config or DecoderConfig(variant="mpa" if state.domain == "prob" else "log-mpa")
    slot = state.problem.cbs.graph.slot(k, j)
    table = state.problem.tables[:, k]
    if state.domain == "prob":
        return _fn_node_prob(table, state.vn_to_fn[:, k], [slot])[:, 0]
    return _fn_node_log(table, state.vn_to_fn[:, k], config.mode, config.lut_intervals, [slot])[:, 0]


def update_all_fns(state: MessageState, config: DecoderConfig) -> None:
    tables = state.problem.tables
    K = tables.shape[1]
    for k in range(K):
        if state.domain == "prob":
            state.fn_to_vn[:, k] = _fn_node_prob(tables[:, k], state.vn_to_fn[:, k])
        else:
            state.fn_to_vn[:, k] = _fn_node_log(tables[:, k], state.vn_to_fn[:, k], config.mode,
                                                config.lut_intervals)
    g = state.problem.cbs.graph
    _count_fn(state, g.K * g.d_f)


def _normalize(msg, domain):
    """Floor + normalise along the last axis; returns (msg, all_floored)."""
    if domain == "prob":
        degenerate = np.all(msg < PROB_FLOOR, axis=-1)
        msg = np.maximum(msg, PROB_FLOOR)
        return msg / msg.sum(axis=-1, keepdims=True), degenerate
    msg = msg - np.logaddexp.reduce(msg, axis=-1)[..., None]
    return np.clip(msg, LOG_FLOOR, 0.0), np.zeros(msg.shape[:-1], dtype=bool)


def _vn_outgoing(incoming, log_prior_j, domain):
    """Extrinsic VN messages from (N, d_v, M) incoming FN messages."""
    d_v = incoming.shape[1]
    out = []
    for e in range(d_v):
        rest = [incoming[:, a] for a in range(d_v) if a != e]
        if domain == "prob":
            msg = np.exp(log_prior_j)
            for r in rest:
                msg = msg * r
        else:
            msg = log_prior_j + sum(rest) if rest else log_prior_j.copy()
        out.append(msg)
    return np.stack(out, axis=1)


def vn_update(state: MessageState, j: int, k: int | None = None):
    """Normalised message(s) from user ``j``: (N, M) towards resource ``k``,
    or (N, d_v, M) towards all of its resources when ``k`` is None.

    Does not modify ``state``; the all-floored flags are returned second.
    """
    g = state.problem.cbs.graph
    ks = g.zeta[j]
    incoming = np.stack([state.fn_to_vn[:, kk, g.slot(kk, j)] for kk in ks], axis=1)
    out = _vn_outgoing(incoming, state.problem.log_prior[:, j], state.domain)
    out, degenerate = _normalize(out, state.domain)
    if k is not None:
        e = ks.index(k)
        return out[:, e], degenerate[:, e]
    return out, degenerate


def update_all_vns(state: MessageState, users=None) -> None:
    g = state.problem.cbs.graph
    users = range(g.J) if users is None else users
    for j in users:
        out, degenerate = vn_update(state, j)
        for e, kk in enumerate(g.zeta[j]):
            state.vn_to_fn[:, kk, g.slot(kk, j)] = out[:, e]
        state.degenerate |= degenerate.any(axis=1)
    if state.degenerate.any():
        warnings.warn("VN message product underflowed; reset to uniform", RuntimeWarning, stacklevel=2)


# ---------------------------------------------------------------- output


def log_beliefs(state: MessageState) -> np.ndarray:
    """(N, J, M) log of prior times every incoming FN message."""
    g = state.problem.cbs.graph
    ks, slots = _user_edges(g)
    inc = state.fn_to_vn[:, ks, slots]  # (N, J, d_v, M)
    if state.domain == "prob":
        with np.errstate(divide="ignore"):
            return state.problem.log_prior + np.log(inc).sum(axis=2)
    return state.problem.log_prior + inc.sum(axis=2)


def llr_from_log_beliefs(logI, labels, mode="exact", intervals=8, llr_max=LLR_MAX):
    """Bit LLRs log(sum_{bit=0} I / sum_{bit=1} I), clamped to +-llr_max."""
    B = labels.shape[1]
    out = np.empty(logI.shape[:-1] + (B,))
    for i in range(B):
        zero = labels[:, i] == 0
        with np.errstate(invalid="ignore"):
            num = max_star_reduce(logI[..., zero], -1, mode, intervals)
            den = max_star_reduce(logI[..., ~zero], -1, mode, intervals)
            llr = num - den
        llr = np.where(np.isnan(llr), 0.0, llr)
        out[..., i] = np.clip(llr, -llr_max, llr_max)
    return out


def hard_decisions(llr):
    return (llr < 0).astype(np.int8)


def _normalized_beliefs(logI):
    with np.errstate(invalid="ignore"):
        b = np.exp(logI - logI.max(axis=-1, keepdims=True))
        b = b / b.sum(axis=-1, keepdims=True)
    return np.where(np.isnan(b), 1.0 / logI.shape[-1], b)


def beliefs_and_llr(state: MessageState, config: DecoderConfig | None = None) -> DecodeResult:
    config = config or DecoderConfig()
    logI = log_beliefs(state)
    labels = bit_labels(state.problem.cbs.M, config.gray)
    mode = "exact" if state.domain == "prob" else config.mode
    llr = llr_from_log_beliefs(logI, labels, mode, config.lut_intervals, config.llr_max)
    beliefs = _normalized_beliefs(logI)
    counters = {k: np.full(state.problem.N, v) for k, v in state.counters.items()}
    counters["iterations"] = np.full(state.problem.N, state.iteration)
    counters["degenerate"] = state.degenerate.copy()
    return DecodeResult(
        llr=llr,
        hard_bits=hard_decisions(llr),
        hard_symbols=np.argmax(logI, axis=-1),
        beliefs=beliefs,
        counters=counters,
    )


# ---------------------------------------------------------------- drivers


def run_iterations(state: MessageState, config: DecoderConfig, n_iter: int,
                   callback: Callable[[MessageState], None] | None = None) -> None:
    g = state.problem.cbs.graph
    for _ in range(n_iter):
        if config.schedule == "flooding":
            update_all_fns(state, config)
            update_all_vns(state)
        else:
            _serial_vn_iteration(state, config)
        state.iteration += 1
        state.count("vn_updates", g.J * g.d_v)
        if callback is not None:
            callback(state)


def _serial_vn_iteration(state: MessageState, config: DecoderConfig) -> None:
    # users in natural order; each user's FNs are refreshed from the latest
    # VN messages, then the user itself is updated immediately
    g = state.problem.cbs.graph
    for j in range(g.J):
        for k in g.zeta[j]:
            state.fn_to_vn[:, k, g.slot(k, j)] = fn_update(state, k, j, config)
        _count_fn(state, g.d_v)
        update_all_vns(state, [j])


def decode_standard(problem: Problem, config: DecoderConfig, callback=None) -> DecodeResult:
    state = init_messages(problem, config)
    run_iterations(state, config, config.iterations, callback)
    return beliefs_and_llr(state, config)


def decode(y, H, cbs: CodebookSet, N0, config: DecoderConfig | None = None, priors=None,
           callback=None, rng: np.random.Generator | None = None) -> DecodeResult:
    """Detect every user's symbol from one frame ``y`` (K,) or a batch (N, K).

    ``H`` is (K, J) or (N, K, J); ``N0`` a scalar or one value per frame.
    ``callback(state)`` runs after each iteration of the flooding and
    serial schedules.
    """
    config = (config or DecoderConfig()).validate(cbs.J, cbs.M)
    problem, single = make_problem(y, H, cbs, N0, priors)
    if config.variant in ("mpa", "log-mpa", "max-log"):
        res = decode_standard(problem, config, callback)
    elif config.variant == "pm-mpa":
        from .pm import decode_pm_problem

        res = decode_pm_problem(problem, config, rng=rng, callback=callback)
    elif config.variant == "eml":
        from .eml import decode_eml_problem

        res = decode_eml_problem(problem, config, callback=callback)
    else:
        from .dmpa import decode_dmpa_problem

        res = decode_dmpa_problem(problem, config, callback=callback)
    return res.squeeze() if single else res


def with_variant(config: DecoderConfig, variant: str, **kw) -> DecoderConfig:
    return replace(config, variant=variant, **kw)
