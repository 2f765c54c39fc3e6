"""Conventional CPM building blocks: alphabets, phase pulse, phase accumulation,
waveform synthesis.

Conventions used throughout the package:

* Phases are stored in **cycles** (the 2*pi enters only at synthesis), so all
  phase-memory bookkeeping stays on exact rationals.
* Source symbols are 1-based: d_1, d_2, ...; slot n occupies
  t in [(n-1)T, nT].  A code block l >= 0 spans the two slots 2l+1, 2l+2.
* The phase of slot n is  theta(n) + h * sum_i d_i q(t - (i-1)T)  with the sum
  over the gamma most recent symbols i = n-gamma+1 .. n, plus an optional
  per-antenna correction term.  theta advances once per slot by the
  contribution of the symbol whose pulse just saturated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

Number = "int | float | Fraction"


@dataclass(frozen=True)
class CpmParams:
    """Modulation parameters; h = 2*m0/p with m0, p coprime."""

    m0: int = 1
    p: int = 4
    M: int = 8
    gamma: int = 2
    pulse: str = "rec"
    samples_per_symbol: int = 16
    es: float = 1.0
    t_symbol: float = 1.0

    def __post_init__(self):
        if self.m0 < 1 or self.p < 1:
            raise ValueError("m0 and p must be positive")
        if math.gcd(self.m0, self.p) != 1:
            raise ValueError(f"m0={self.m0} and p={self.p} must be coprime")
        if self.M < 2 or self.M & (self.M - 1):
            raise ValueError(f"alphabet size M={self.M} must be a power of 2")
        if self.gamma < 1:
            raise ValueError("memory length gamma must be >= 1")
        if self.samples_per_symbol < 8:
            raise ValueError("need at least 8 samples per symbol")
        if self.pulse not in PULSES:
            raise ValueError(f"unknown pulse shape {self.pulse!r}")

    @property
    def h(self) -> Fraction:
        return Fraction(2 * self.m0, self.p)

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def dt(self) -> float:
        return self.t_symbol / self.samples_per_symbol

    def amplitude(self, n_tx: int = 1, energy_split: str = "total") -> float:
        """Per-antenna envelope.  With the default total-energy split, n_tx
        antennas radiate Es per symbol in aggregate; "per-antenna" gives each
        antenna the full Es (shifts BER curves by 3 dB for n_tx=2)."""
        if energy_split not in ("total", "per-antenna"):
            raise ValueError(f"unknown energy split {energy_split!r}")
        div = n_tx if energy_split == "total" else 1
        return math.sqrt(self.es / (div * self.t_symbol))


@dataclass(frozen=True)
class Alphabet:
    """Equally spaced symbol levels -M+1+offset, -M+3+offset, ..., M-1+offset."""

    values: tuple
    offset: Fraction = Fraction(0)

    @classmethod
    def natural(cls, M: int) -> "Alphabet":
        return cls(values=tuple(Fraction(v) for v in range(-M + 1, M, 2)))

    @classmethod
    def shifted(cls, M: int, offset: Fraction) -> "Alphabet":
        """Alphabet with every level moved by a constant (e.g. 1/h for the
        second antenna of the parallel code)."""
        offset = Fraction(offset)
        return cls(
            values=tuple(Fraction(v) + offset for v in range(-M + 1, M, 2)),
            offset=offset,
        )

    def __len__(self) -> int:
        return len(self.values)


def gray_encode(index: int) -> int:
    return index ^ (index >> 1)


def gray_decode(code: int) -> int:
    index = 0
    while code:
        index ^= code
        code >>= 1
    return index


def gray_map(bits: Sequence[int], alphabet: Alphabet) -> Fraction:
    """Map a bit vector (MSB first) onto a symbol level via reflected Gray
    coding, so adjacent levels differ in exactly one bit."""
    nbits = len(alphabet).bit_length() - 1
    if len(bits) != nbits:
        raise ValueError(f"expected {nbits} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    code = 0
    for b in bits:
        code = (code << 1) | b
    return alphabet.values[gray_decode(code)]


def gray_bits(index: int, nbits: int) -> tuple:
    """Bit label (MSB first) of the alphabet level at position ``index``."""
    code = gray_encode(index)
    return tuple((code >> (nbits - 1 - k)) & 1 for k in range(nbits))


def bit_label_table(M: int) -> np.ndarray:
    """(M, log2 M) array of Gray bit labels; row i labels level -M+1+2i."""
    nbits = M.bit_length() - 1
    return np.array([gray_bits(i, nbits) for i in range(M)], dtype=np.int8)


def bit_distance_table(M: int) -> np.ndarray:
    """(M, M) Hamming distances between the Gray labels of level indices."""
    labels = bit_label_table(M)
    return (labels[:, None, :] != labels[None, :, :]).sum(axis=2).astype(np.int64)


def q_rec(t, gamma: int, T: float = 1.0):
    """Phase smoothing function of the LREC pulse family: 0 for t <= 0,
    a linear ramp of total height 1/2 over gamma symbol times, 1/2 after."""
    return np.clip(t, 0.0, gamma * T) / (2.0 * gamma * T)


def q_rec_exact(k, gamma: int) -> Fraction:
    """q at integer symbol offsets, k in symbol units, as an exact rational."""
    kk = min(max(k, 0), gamma)
    return Fraction(kk, 2 * gamma)


PULSES = {"rec": q_rec}


def update_theta(theta, xi):
    """Advance the phase memory by xi and reduce mod 1 (cycles).  Works for
    floats and Fractions alike."""
    return (theta + xi) % 1


@dataclass
class PhaseTrack:
    """Uniformly sampled phase (cycles) over one symbol slot, endpoints
    included, plus the phase memory the slot was built from."""

    samples: np.ndarray
    theta: float
    dt: float


@dataclass
class Waveform:
    """Complex baseband samples at spacing dt; constant envelope by
    construction."""

    samples: np.ndarray
    dt: float

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt


def accumulate_phase(
    params: CpmParams,
    window: Sequence,
    correction: Callable | None = None,
    theta0: float = 0.0,
) -> PhaseTrack:
    """Phase track for one slot from the gamma-symbol window (oldest first,
    newest last; the newest pulse starts at the slot's left edge).

    Evaluates the defining sum  theta0 + h * sum_k w_k q(tau - start_k) + c(tau)
    directly at every sample; tau is slot-local time with samples at
    j*T/L for j = 0..L (both endpoints).  Endpoint continuity with the next
    slot is the caller's obligation via theta updates.
    """
    gamma, T, L = params.gamma, params.t_symbol, params.samples_per_symbol
    if len(window) != gamma:
        raise ValueError(f"window must hold exactly gamma={gamma} symbols")
    q = PULSES[params.pulse]
    tau = np.arange(L + 1) * (T / L)
    phi = np.full(L + 1, float(theta0))
    h = float(params.h)
    for k, lvl in enumerate(window):
        start = (k - gamma + 1) * T
        phi += h * float(lvl) * q(tau - start, gamma, T)
    if correction is not None:
        phi += correction(tau)
    return PhaseTrack(samples=phi, theta=float(theta0), dt=T / L)


def synthesize(track: PhaseTrack, params: CpmParams, n_tx: int = 1,
               energy_split: str = "total") -> Waveform:
    """Turn a phase track into constant-envelope complex baseband."""
    amp = params.amplitude(n_tx, energy_split)
    return Waveform(samples=amp * np.exp(2j * np.pi * track.samples), dt=track.dt)
