"""Bit mapping, channel draws and received-signal synthesis.

Arrays with a leading frame axis are accepted throughout: ``X`` is
``(K, J)`` or ``(N, K, J)``, ``H`` likewise, ``y`` is ``(K,)`` or ``(N, K)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codebook import CodebookSet
from .graph import FactorGraph

CHANNEL_MODELS = ("awgn", "rayleigh-uplink", "rayleigh-downlink")

# stream tags for per-frame random generators
STREAM_TAGS = {"bits": 1, "channel": 2, "noise": 3, "decoder": 4}


@lru_cache(maxsize=None)
def bit_labels(M: int, gray: bool = False) -> np.ndarray:
    """(M, B) table of the bits carried by each symbol index.

    Natural binary, MSB first: symbol 0 <-> 00..0, symbol M-1 <-> 11..1.
    With ``gray=True`` symbol ``m`` carries the Gray code of ``m``.
    """
    B = int(np.log2(M))
    if 2**B != M:
        raise ValueError(f"M={M} is not a power of two")
    m = np.arange(M)
    if gray:
        m = m ^ (m >> 1)
    table = ((m[:, None] >> np.arange(B - 1, -1, -1)) & 1).astype(np.int8)
    table.setflags(write=False)
    return table


def bits_to_symbol(bits, gray: bool = False) -> np.ndarray | int:
    """Map bit strings (last axis of length B) to 0-based symbol indices."""
    b = np.asarray(bits, dtype=np.int64)
    B = b.shape[-1]
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    weights = 1 << np.arange(B - 1, -1, -1)
    m = b @ weights
    if gray:
        # inverse Gray: prefix XOR
        out = m.copy()
        shift = m >> 1
        while np.any(shift):
            out ^= shift
            shift >>= 1
        m = out
    return int(m) if np.ndim(m) == 0 else m


def symbol_to_bits(m, B: int, gray: bool = False) -> np.ndarray:
    return bit_labels(2**B, gray)[np.asarray(m)]


def encode_symbols(symbols, cbs: CodebookSet) -> np.ndarray:
    """Column j of the result is user j's codeword for ``symbols[..., j]``."""
    s = np.asarray(symbols)
    users = np.arange(cbs.J)
    # codewords: (J, K, M) -> pick (..., J, K) then move K before J
    X = cbs.codewords[users, :, s]
    return np.swapaxes(X, -1, -2)


def encode(bits, cbs: CodebookSet, gray: bool = False) -> np.ndarray:
    """Encode (J, B) or (N, J, B) bits into K x J codeword matrices."""
    b = np.asarray(bits)
    if b.shape[-2:] != (cbs.J, cbs.B):
        raise ValueError(f"bits must have trailing shape {(cbs.J, cbs.B)}, got {b.shape}")
    return encode_symbols(bits_to_symbol(b, gray), cbs)


@dataclass(frozen=True)
class ChannelRealization:
    model: str
    H: np.ndarray
    N0: float | np.ndarray

    def __post_init__(self):
        if self.model not in CHANNEL_MODELS:
            raise ValueError(f"unknown channel model {self.model!r}")
        if np.any(np.asarray(self.N0) <= 0):
            raise ValueError("N0 must be positive")

    def with_noise(self, N0) -> "ChannelRealization":
        return ChannelRealization(self.model, self.H, N0)


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with total variance ``variance``."""
    s = np.sqrt(variance / 2.0)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def realize_channel(model: str, graph: FactorGraph, rng: np.random.Generator, N0: float = 1.0,
                    n_frames: int | None = None) -> ChannelRealization:
    if model not in CHANNEL_MODELS:
        raise ValueError(f"unknown channel model {model!r}; expected one of {CHANNEL_MODELS}")
    lead = () if n_frames is None else (n_frames,)
    K, J = graph.K, graph.J
    if model == "awgn":
        H = np.ones(lead + (K, J), dtype=complex)
    elif model == "rayleigh-uplink":
        H = complex_normal(rng, lead + (K, J))
    else:
        h = complex_normal(rng, lead + (K, 1))
        H = np.repeat(h, J, axis=-1)
    return ChannelRealization(model, H, N0)


def superimpose(X, H) -> np.ndarray:
    """Noise-free received signal sum_j h_kj x_kj."""
    return np.sum(np.asarray(H) * np.asarray(X), axis=-1)


def transmit(X, channel: ChannelRealization, rng: np.random.Generator | None = None,
             noise: np.ndarray | None = None) -> np.ndarray:
    """y_k = sum_j h_kj x_kj + n_k with n_k ~ CN(0, N0).

    ``noise`` may carry a unit-variance CN(0, 1) draw to be scaled by
    sqrt(N0); otherwise it is drawn from ``rng``.
    """
    s = superimpose(X, channel.H)
    if noise is None:
        if rng is None:
            raise ValueError("need an rng or a pre-drawn noise sample")
        noise = complex_normal(rng, s.shape)
    N0 = np.asarray(channel.N0, dtype=float)
    if N0.ndim:
        N0 = N0.reshape(N0.shape + (1,) * (s.ndim - N0.ndim))
    return s + np.sqrt(N0) * noise


def average_symbol_energy(cbs: CodebookSet) -> float:
    """Per-user average codeword energy (1/M) sum_m ||x^m||^2, averaged over users."""
    return float(np.mean(cbs.energies()) / cbs.M)


def ebn0_db_to_n0(ebn0_db, M: int, codebook_energy: float = 1.0):
    """N0 for a given per-user Eb/N0, with E_avg = codebook_energy / M."""
    Eb = codebook_energy / M / np.log2(M)
    return Eb / 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)


def n0_to_ebn0_db(N0, M: int, codebook_energy: float = 1.0):
    Eb = codebook_energy / M / np.log2(M)
    return 10.0 * np.log10(Eb / np.asarray(N0, dtype=float))


def frame_rng(seed: int, frame: int, tag: str) -> np.random.Generator:
    """Independent stream for one (seed, frame, component) triple."""
    return np.random.default_rng([int(seed), int(frame), STREAM_TAGS[tag]])
