"""Space-time coding layer for two transmit antennas.

Three transmit schemes share one exact representation.  With REC pulses the
phase of each antenna within any slot is an affine function of time, so a
slot is fully described by a (start, slope) pair of rationals:

* ``conventional``  - single antenna, plain CPM over the natural alphabet.
* ``parallel-l2``   - both antennas carry the same data in the same order;
  antenna 2 runs conventional CPM over the alphabet shifted by 1/h, which is
  the alphabet form of a per-slot correction ramp.  The per-slot phase-memory
  increments of the two antennas then differ by exactly half a cycle, which
  makes the two-slot block integral of s1*conj(s2) vanish identically.
* ``wang-xia``      - antenna 1 is conventional; antenna 2 carries the
  negated, time-crossed data (slot 1 anticipates the next source symbol,
  slot 2 repeats the previous one) plus a data-dependent correction ramp.
  The same half-cycle increment offset results, hence the same exact
  orthogonality, but every slot of antenna 2 depends on both block symbols.
* ``repetition``    - both antennas send identical conventional CPM; kept as
  the maximally correlated negative control.

All state arithmetic is done with ``fractions.Fraction`` so orthogonality and
continuity checks are sharp to rounding rather than to quadrature error.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .cpm import Alphabet, CpmParams, PULSES, q_rec_exact

HALF = Fraction(1, 2)

SCHEME_KINDS = ("conventional", "parallel-l2", "wang-xia", "repetition")


@dataclass(frozen=True)
class CodeScheme:
    """Which code to run, plus the mapping/correction structure it uses."""

    kind: str
    data_mapping: str
    correction: tuple
    n_tx: int

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")

    def alphabet(self, params: CpmParams, antenna: int = 0) -> Alphabet:
        """Constellation realized on the given antenna (0-based)."""
        if self.kind == "parallel-l2" and antenna == 1:
            return Alphabet.shifted(params.M, 1 / params.h)
        return Alphabet.natural(params.M)

    @property
    def orthogonal(self) -> bool:
        return self.kind in ("conventional", "parallel-l2", "wang-xia")


def conventional() -> CodeScheme:
    return CodeScheme("conventional", "none", ("zero",), n_tx=1)


def parallel_l2() -> CodeScheme:
    return CodeScheme("parallel-l2", "parallel", ("zero", "alphabet-offset"), n_tx=2)


def wang_xia() -> CodeScheme:
    return CodeScheme("wang-xia", "crosswise", ("zero", "crosswise-ramp"), n_tx=2)


def repetition() -> CodeScheme:
    return CodeScheme("repetition", "repetitive", ("zero", "zero"), n_tx=2)


_FACTORIES = {
    "conventional": conventional,
    "parallel-l2": parallel_l2,
    "wang-xia": wang_xia,
    "repetition": repetition,
}


def scheme_by_name(name: str) -> CodeScheme:
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}") from None


class SourceSymbols:
    """1-based view of the source level sequence.

    Indices i <= 0 read as level 0 (silent history before the first block);
    reading inside a gap (0 < i < first_index) or past the end raises, since
    that means the caller failed to supply required history or lookahead.
    """

    def __init__(self, levels: Sequence[int], first_index: int = 1):
        self.levels = [int(v) for v in levels]
        self.first_index = int(first_index)

    def __call__(self, i: int) -> int:
        j = i - self.first_index
        if 0 <= j < len(self.levels):
            return self.levels[j]
        if i <= 0:
            return 0
        if i < self.first_index:
            raise ValueError(
                f"symbol d_{i} not provided (history starts at d_{self.first_index})")
        raise ValueError(
            f"symbol d_{i} not provided (have up to d_{self.last_index})")

    @property
    def last_index(self) -> int:
        return self.first_index + len(self.levels) - 1


@dataclass(frozen=True)
class DataBlock:
    """Per-antenna, per-slot symbol windows of one code block.

    ``D[antenna][slot][k]`` is the level multiplying the pulse that started
    k - gamma + 1 symbols before the slot (oldest first, freshest last).
    """

    l: int
    d: tuple
    D: tuple


@dataclass(frozen=True)
class EncoderState:
    """Explicit value threaded through the encoder: per-antenna phase memory
    (cycles, reduced mod 1, exact) and the trailing gamma-1 source levels."""

    theta: tuple
    tail: tuple
    block_index: int = 0


@dataclass(frozen=True)
class SlotLine:
    """Affine slot phase in cycles: phi(t) = start + slope * (t - t_slot)/T."""

    start: Fraction
    slope: Fraction

    @property
    def end(self) -> Fraction:
        return self.start + self.slope


@dataclass
class EncodedBlock:
    """Sending matrix for one block: sampled waveforms plus the exact phase
    lines they were synthesized from (per antenna, per slot)."""

    l: int
    samples: np.ndarray  # (n_tx, 2, L) complex
    lines: tuple
    dt: float
    amplitude: float


# ---------------------------------------------------------------------------
# kernel assembly
#
# A kernel is a (weight, start_symbol) pair contributing weight * q(t - s*T)
# to the slot phase; weights already include the factor h where appropriate.
# ---------------------------------------------------------------------------

def _window(n: int, gamma: int):
    return range(n - gamma + 1, n + 1)


def slot_kernels(scheme: CodeScheme, params: CpmParams, src: SourceSymbols,
                 antenna: int, n: int) -> list:
    """All phase kernels of one antenna during slot n, data plus correction."""
    if antenna >= scheme.n_tx:
        raise ValueError(f"scheme {scheme.kind!r} has no antenna {antenna}")
    h = params.h
    gamma = params.gamma
    if antenna == 0 or scheme.kind == "repetition":
        return [(h * src(i), i - 1) for i in _window(n, gamma)]
    if scheme.kind == "parallel-l2":
        # alphabet shifted by 1/h: level d_i + 1/h, so weight h*d_i + 1
        return [(h * src(i) + 1, i - 1) for i in _window(n, gamma)]
    # wang-xia antenna 2
    l, r = divmod(n - 1, 2)  # block index, slot-in-block (0 or 1)
    kernels = []
    if r == 0:
        for j in range(2 * l + 2 - gamma, 2 * l + 2):
            kernels.append((-h * src(j + 1), j - 1))
    else:
        for j in range(2 * l + 3 - gamma, 2 * l + 3):
            kernels.append((-h * src(j - 1), j - 1))
    for i in range(gamma):
        w = h * (src(2 * l + 1 - i) + src(2 * l + 2 - i)) + 1
        kernels.append((w, 2 * l + r - i))
    return kernels


def line_from_kernels(kernels, n: int, gamma: int, theta) -> SlotLine:
    """Collapse a kernel list into the slot's affine phase (exact).

    A kernel of age 0..gamma-1 at the slot start ramps through the slot; an
    older one is saturated and only shifts the intercept.
    """
    start = Fraction(theta)
    slope = Fraction(0)
    for w, s in kernels:
        age = (n - 1) - s
        start += w * q_rec_exact(age, gamma)
        if 0 <= age < gamma:
            slope += Fraction(w) / (2 * gamma)
    return SlotLine(start=start % 1, slope=slope)


def slot_phase_line(scheme: CodeScheme, params: CpmParams, src: SourceSymbols,
                    antenna: int, n: int, theta) -> SlotLine:
    return line_from_kernels(slot_kernels(scheme, params, src, antenna, n),
                             n, params.gamma, theta)


# ---------------------------------------------------------------------------
# data mapping
# ---------------------------------------------------------------------------

def map_block(scheme: CodeScheme, params: CpmParams, src: SourceSymbols,
              l: int) -> DataBlock:
    """Fill the per-antenna, per-slot symbol windows for block l.

    Raises if src does not cover d_{2l+2-gamma} .. d_{2l+2} (indices <= 0 are
    implicitly silent).
    """
    gamma = params.gamma
    windows = []
    for m in range(scheme.n_tx):
        per_slot = []
        for r in (1, 2):
            n = 2 * l + r
            if m == 0 or scheme.kind in ("repetition", "parallel-l2"):
                w = tuple(src(i) for i in _window(n, gamma))
            elif r == 1:
                w = tuple(-src(j + 1) for j in range(2 * l + 2 - gamma, 2 * l + 2))
            else:
                w = tuple(-src(j - 1) for j in range(2 * l + 3 - gamma, 2 * l + 3))
            per_slot.append(w)
        windows.append(tuple(per_slot))
    return DataBlock(l=l, d=(src(2 * l + 1), src(2 * l + 2)), D=tuple(windows))


def recover_block_symbols(scheme: CodeScheme, block: DataBlock) -> tuple:
    """Invert the data mapping: the two source levels carried by the block."""
    if scheme.kind == "wang-xia":
        # cross structure: slot-1 window of antenna 2 ends in -d_{2l+2},
        # slot-2 window ends in -d_{2l+1}
        return (-block.D[1][1][-1], -block.D[1][0][-1])
    return (block.D[0][0][-1], block.D[0][1][-1])


# ---------------------------------------------------------------------------
# correction factors (the explicit-function realizations)
# ---------------------------------------------------------------------------

def correction_parallel(t, n: int, params: CpmParams):
    """Antenna-2 correction of the parallel code during slot n, as a function
    of absolute time: one unit-weight pulse ramp per window symbol.  Equal to
    the phase surplus of the 1/h-shifted alphabet over the natural one.
    """
    T = params.t_symbol
    t = np.asarray(t, dtype=float)
    if np.any(t < (n - 1) * T - 1e-12) or np.any(t > n * T + 1e-12):
        raise ValueError(f"t outside slot {n}")
    q = PULSES[params.pulse]
    c = np.zeros_like(t)
    for i in _window(n, params.gamma):
        c = c + q(t - (i - 1) * T, params.gamma, T)
    return c


def correction_wang_xia(t, n: int, src: SourceSymbols, params: CpmParams,
                        q0: Callable | None = None):
    """Antenna-2 correction of the crosswise code during slot n: per window
    position i a ramp weighted by h*(d_{2l+1-i} + d_{2l+2-i}) + 1.

    q0 defaults to the scheme's own phase smoothing function; it is pluggable
    because the construction only needs q0(0) = 0 and q0 = 1/2 beyond the
    memory span.
    """
    T = params.t_symbol
    t = np.asarray(t, dtype=float)
    if np.any(t < (n - 1) * T - 1e-12) or np.any(t > n * T + 1e-12):
        raise ValueError(f"t outside slot {n}")
    if q0 is None:
        q0 = PULSES[params.pulse]
    l, r = divmod(n - 1, 2)
    h = float(params.h)
    c = np.zeros_like(t)
    for i in range(params.gamma):
        w = h * (src(2 * l + 1 - i) + src(2 * l + 2 - i)) + 1.0
        c = c + w * q0(t - (2 * l + r - i) * T, params.gamma, T)
    return c


# ---------------------------------------------------------------------------
# phase-memory increments
# ---------------------------------------------------------------------------

def xi_increment(scheme: CodeScheme, params: CpmParams, src: SourceSymbols,
                 antenna: int, n: int) -> Fraction:
    """Closed-form increment theta(n+1) - theta(n).

    Antenna 1 retires one data pulse per slot: (h/2) * d_{n+1-gamma}.  For
    both two-antenna codes, antenna 2 adds exactly half a cycle on top - the
    offset that cancels the block cross-correlation.
    """
    base = params.h * src(n + 1 - params.gamma) / 2
    if antenna == 1 and scheme.kind in ("parallel-l2", "wang-xia"):
        return base + HALF
    return base


def xi_from_continuity(scheme: CodeScheme, params: CpmParams, src: SourceSymbols,
                       antenna: int, n: int) -> Fraction:
    """Increment derived from first principles: the jump the phase memory must
    absorb so the waveform stays continuous across t = nT.

    Independent of :func:`xi_increment` (which is its closed form); needs the
    slot n+1 kernels, i.e. one symbol of lookahead at block boundaries.
    """
    gamma = params.gamma

    def boundary_value(slot):
        total = Fraction(0)
        for w, s in slot_kernels(scheme, params, src, antenna, slot):
            total += w * q_rec_exact(n - s, gamma)
        return total

    return (boundary_value(n) - boundary_value(n + 1)) % 1


def xi_half_cycle_condition(scheme: CodeScheme, params: CpmParams,
                            src: SourceSymbols, l: int) -> bool:
    """True iff the two antennas' mid-block increments differ by half a cycle
    (mod 1) - the sufficient condition for exact block orthogonality.
    Evaluated in exact rational arithmetic."""
    if scheme.n_tx != 2:
        raise ValueError("condition is defined for two-antenna schemes")
    n = 2 * l + 1
    xi1 = xi_from_continuity(scheme, params, src, 0, n)
    xi2 = xi_from_continuity(scheme, params, src, 1, n)
    return (xi1 - xi2 - HALF) % 1 == 0


# ---------------------------------------------------------------------------
# block encoder
# ---------------------------------------------------------------------------

def initial_state(scheme: CodeScheme, params: CpmParams,
                  tail: Sequence[int] | None = None) -> EncoderState:
    """State before block 0.  Default history is silence (level 0)."""
    if tail is None:
        tail = (0,) * (params.gamma - 1)
    tail = tuple(int(v) for v in tail)
    if len(tail) != params.gamma - 1:
        raise ValueError(f"tail must hold gamma-1={params.gamma - 1} levels")
    return EncoderState(theta=(Fraction(0),) * scheme.n_tx, tail=tail, block_index=0)


def encode_block(scheme: CodeScheme, params: CpmParams, state: EncoderState,
                 symbols: Sequence[int], energy_split: str = "total"):
    """Encode one block (two new source levels) into the 2-slot sending
    matrix.  Returns the encoded block and the advanced state."""
    if len(symbols) != 2:
        raise ValueError("a block carries exactly two source symbols")
    l = state.block_index
    gamma = params.gamma
    # source coverage d_{2l+2-gamma} .. d_{2l+2}: tail + the two new symbols
    src = SourceSymbols(list(state.tail) + [int(symbols[0]), int(symbols[1])],
                        first_index=2 * l + 2 - gamma)

    L = params.samples_per_symbol
    amp = params.amplitude(scheme.n_tx, energy_split)
    frac = np.arange(L) / L
    samples = np.empty((scheme.n_tx, 2, L), dtype=np.complex128)
    lines = []
    theta = list(state.theta)
    for m in range(scheme.n_tx):
        per_slot = []
        th = theta[m]
        for r in (1, 2):
            n = 2 * l + r
            line = slot_phase_line(scheme, params, src, m, n, th)
            per_slot.append(line)
            samples[m, r - 1] = amp * np.exp(
                2j * np.pi * (float(line.start) + float(line.slope) * frac))
            th = (th + xi_increment(scheme, params, src, m, n)) % 1
        theta[m] = th
        lines.append(tuple(per_slot))

    combined = tuple(state.tail) + (int(symbols[0]), int(symbols[1]))
    new_tail = combined[-(gamma - 1):] if gamma > 1 else ()
    block = EncodedBlock(l=l, samples=samples, lines=tuple(lines),
                         dt=params.dt, amplitude=amp)
    new_state = EncoderState(theta=tuple(theta), tail=new_tail, block_index=l + 1)
    return block, new_state


def encode_stream(scheme: CodeScheme, params: CpmParams, levels: Sequence[int],
                  state: EncoderState | None = None, energy_split: str = "total"):
    """Encode a whole level sequence (even length) block by block.

    Returns (waveforms with shape (n_tx, n_slots*L), list of EncodedBlock,
    final state).
    """
    levels = list(levels)
    if len(levels) % 2:
        raise ValueError("level sequence must pair up into blocks")
    if state is None:
        state = initial_state(scheme, params)
    blocks = []
    for k in range(0, len(levels), 2):
        block, state = encode_block(scheme, params, state, levels[k:k + 2],
                                    energy_split)
        blocks.append(block)
    if blocks:
        wave = np.concatenate([b.samples.reshape(scheme.n_tx, -1) for b in blocks], axis=1)
    else:
        wave = np.zeros((scheme.n_tx, 0), dtype=np.complex128)
    return wave, blocks, state


# ---------------------------------------------------------------------------
# orthogonality measurement
# ---------------------------------------------------------------------------

def _unit_segment_integral(a: float, b: float) -> complex:
    """integral_0^1 exp(2j pi (a + b u)) du, exact in closed form."""
    if abs(b) < 1e-15:
        return np.exp(2j * np.pi * a)
    w = 2j * np.pi * b
    return np.exp(2j * np.pi * a) * (np.exp(w) - 1.0) / w


def l2_residual(block: EncodedBlock, params: CpmParams) -> float:
    """|integral over the block of s1 * conj(s2)|, computed in closed form
    from the exact phase lines (REC pulses make the phase difference affine
    per slot).  Zero up to rounding for the orthogonal two-antenna codes."""
    if block.samples.shape[0] != 2:
        raise ValueError("cross-correlation needs two transmit antennas")
    total = 0j
    for r in range(2):
        d_start = block.lines[0][r].start - block.lines[1][r].start
        d_slope = block.lines[0][r].slope - block.lines[1][r].slope
        total += _unit_segment_integral(float(d_start % 1), float(d_slope))
    return abs(total) * block.amplitude ** 2 * params.t_symbol


def l2_residual_sampled(block: EncodedBlock) -> float:
    """Riemann-sum counterpart of :func:`l2_residual`; independent route used
    to cross-check the closed form (agrees only to quadrature accuracy)."""
    if block.samples.shape[0] != 2:
        raise ValueError("cross-correlation needs two transmit antennas")
    s1 = block.samples[0].ravel()
    s2 = block.samples[1].ravel()
    return abs(np.sum(s1 * np.conj(s2)) * block.dt)


def max_boundary_jump(blocks: Sequence[EncodedBlock]) -> Fraction:
    """Largest phase discontinuity (cycles, exact) across all slot boundaries
    of consecutively encoded blocks, per antenna; 0 for a correct encoder."""
    worst = Fraction(0)
    n_tx = blocks[0].samples.shape[0]
    for m in range(n_tx):
        prev_end = None
        for b in blocks:
            for r in range(2):
                line = b.lines[m][r]
                if prev_end is not None:
                    gap = (line.start - prev_end) % 1
                    worst = max(worst, min(gap, 1 - gap))
                prev_end = line.end % 1
    return worst
