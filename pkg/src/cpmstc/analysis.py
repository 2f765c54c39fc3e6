"""Experiment harnesses: Monte Carlo BER over Rayleigh block fading,
diversity-slope estimation, Welch PSD estimation and spectrum-shift
measurement.

The BER engine is vectorized over a batch of independent streams.  Each
stream starts from a known preamble state, is encoded by table walking
through the receiver's own candidate bank (bit-identical to the reference
encoder, which is asserted in the test suite), faded per block, and decoded
with survivor truncation.  Batches draw from counter-based substreams keyed
by (seed, grid point, batch index), so results do not depend on worker
scheduling; the stopping rule is applied in batch order for the same reason.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .cpm import CpmParams, bit_distance_table
from .codes import scheme_by_name
from .channel import NoiseParams
from .receiver import Decoder, ReceiverContext


@dataclass(frozen=True)
class BerRecord:
    scheme: str
    n_tx: int
    n_rx: int
    ebn0_db: float
    blocks: int
    bit_errors: int
    bits_per_symbol: int = 1

    @property
    def bits(self) -> int:
        return self.blocks * 2 * self.bits_per_symbol

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0


@dataclass(frozen=True)
class PsdRecord:
    scheme: str
    f_td: np.ndarray
    psd_db: np.ndarray  # (n_tx, F)
    power: float


@dataclass(frozen=True)
class BerConfig:
    scheme: str = "parallel-l2"
    m0: int = 1
    p: int = 4
    M: int = 8
    gamma: int = 2
    samples_per_symbol: int = 16
    n_rx: int = 1
    ebn0_grid: tuple = (0.0, 4.0, 8.0, 12.0)
    seed: int = 0
    target_errors: int = 100
    max_blocks: int = 2_000_000
    truncation_blocks: int = 10
    energy_split: str = "total"
    batch_streams: int = 192
    blocks_per_stream: int = 64
    threads: int = 1

    def params(self) -> CpmParams:
        return CpmParams(m0=self.m0, p=self.p, M=self.M, gamma=self.gamma,
                         samples_per_symbol=self.samples_per_symbol)


def synthesize_batch(ctx: ReceiverContext, sym_idx: np.ndarray) -> np.ndarray:
    """Encode a batch of index streams by walking the trellis tables and
    gathering candidate waveforms: (B, n_slots) -> (B, n_tx, n_slots, L)."""
    scheme, p = ctx.scheme, ctx.params
    B, n_slots = sym_idx.shape
    L, M = p.samples_per_symbol, p.M
    tx = np.empty((B, scheme.n_tx, n_slots, L), dtype=np.complex128)
    state = np.full(B, ctx.initial_state_index(), dtype=np.int64)
    if scheme.n_tx == 2:
        for l in range(n_slots // 2):
            pair = sym_idx[:, 2 * l] * M + sym_idx[:, 2 * l + 1]
            cand = ctx.block_cand_of[state, pair]
            for r in (0, 1):
                for m in (0, 1):
                    tx[:, m, 2 * l + r] = ctx.block_banks[r].waves[m][cand]
            state = ctx.block_next_state[state, pair]
    else:
        for n in range(n_slots):
            cand = ctx.cand_of[state, sym_idx[:, n]]
            tx[:, 0, n] = ctx.slot_banks[n % 2].waves[0][cand]
            state = ctx.next_state[state, sym_idx[:, n]]
    return tx


def _run_batch(ctx, decoder, noise, n_rx, batch_streams, blocks_per_stream,
               seed, point_idx, batch_idx, bitdist):
    """One self-contained batch: returns (scored blocks, bit_errors).

    Each stream carries a short unscored guard tail so every scored symbol
    has its full pulse transmitted and future context for the survivor
    search; without it the final, half-punctured symbol of each stream
    dominates the error count at high SNR.
    """
    p = ctx.params
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(point_idx, batch_idx))))
    B, NB = batch_streams, blocks_per_stream
    guard = max(1, (p.gamma + 1) // 2)
    n_slots = 2 * (NB + guard)
    L = p.samples_per_symbol
    n_tx = ctx.scheme.n_tx

    sym = rng.integers(0, p.M, size=(B, n_slots))
    tx = synthesize_batch(ctx, sym)  # (B, n_tx, n_slots, L)
    alpha = (rng.standard_normal((B, NB + guard, n_tx, n_rx))
             + 1j * rng.standard_normal((B, NB + guard, n_tx, n_rx))) / math.sqrt(2.0)
    txb = tx.reshape(B, n_tx, NB + guard, 2 * L)
    y = np.einsum("blmn,bmlk->blnk", alpha, txb)
    sigma2 = noise.sigma2_per_sample(p.dt)
    y += math.sqrt(sigma2 / 2.0) * (rng.standard_normal(y.shape)
                                    + 1j * rng.standard_normal(y.shape))
    y = y.transpose(0, 2, 1, 3).reshape(B, n_rx, n_slots * L)
    decided = decoder.decode_batch(y, alpha)
    scored = slice(0, 2 * NB)
    errors = int(bitdist[sym[:, scored], decided[:, scored]].sum())
    return B * NB, errors


def run_ber(config: BerConfig, progress=None) -> list:
    """Simulate the BER curve: for each Eb/N0 grid point, accumulate blocks
    until target_errors bit errors or the block cap, deterministically for a
    given (config, seed) regardless of thread count."""
    scheme = scheme_by_name(config.scheme)
    params = config.params()
    if config.n_rx < 1:
        raise ValueError("need at least one receive antenna")
    if not config.ebn0_grid or any(
            b <= a for a, b in zip(config.ebn0_grid, config.ebn0_grid[1:])):
        raise ValueError("Eb/N0 grid must be non-empty and increasing")
    ctx = ReceiverContext(scheme, params, config.energy_split)
    bitdist = bit_distance_table(params.M)
    blocks_per_batch = config.batch_streams * config.blocks_per_stream
    records = []
    for point_idx, ebn0 in enumerate(config.ebn0_grid):
        noise = NoiseParams.from_ebn0(params, float(ebn0))
        decoder = Decoder(scheme, params, n_rx=config.n_rx,
                          truncation_blocks=config.truncation_blocks,
                          energy_split=config.energy_split, context=ctx)
        total_blocks = 0
        total_errors = 0
        batch_idx = 0
        pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
        try:
            while total_errors < config.target_errors and total_blocks < config.max_blocks:
                wave = max(1, config.threads)
                args = [(ctx, Decoder(scheme, params, n_rx=config.n_rx,
                                      truncation_blocks=config.truncation_blocks,
                                      energy_split=config.energy_split, context=ctx)
                         if pool else decoder,
                         noise, config.n_rx, config.batch_streams,
                         config.blocks_per_stream, config.seed, point_idx,
                         batch_idx + i, bitdist) for i in range(wave)]
                if pool:
                    results = list(pool.map(lambda a: _run_batch(*a), args))
                else:
                    results = [_run_batch(*args[0])]
                # consume results strictly in batch order so the stopping
                # point does not depend on scheduling
                for blocks, errors in results:
                    total_blocks += blocks
                    total_errors += errors
                    batch_idx += 1
                    if total_errors >= config.target_errors or total_blocks >= config.max_blocks:
                        break
        finally:
            if pool:
                pool.shutdown()
        rec = BerRecord(scheme=config.scheme, n_tx=scheme.n_tx, n_rx=config.n_rx,
                        ebn0_db=float(ebn0), blocks=total_blocks,
                        bit_errors=total_errors,
                        bits_per_symbol=params.bits_per_symbol)
        records.append(rec)
        if progress:
            progress(rec)
    return records


def ber_confidence_radius(record: BerRecord, z: float = 1.96) -> float:
    """Binomial normal-approximation half width on the BER estimate."""
    n = record.bits
    if n == 0:
        return 0.0
    p = record.ber
    return z * math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)


def diversity_slope(records, top_decade_db: float = 10.0,
                    min_errors: int = 100) -> float:
    """Least-squares slope of log10(BER) per decade of SNR, fitted over the
    top decade of the simulated grid using only reliable points."""
    pts = [(r.ebn0_db, r.ber) for r in records
           if r.bit_errors >= min_errors and r.ber > 0]
    if not pts:
        raise ValueError("no reliable BER points (need >= min_errors errors)")
    top = max(e for e, _ in pts)
    pts = [(e, b) for e, b in pts if e >= top - top_decade_db]
    if len(pts) < 3:
        raise ValueError(f"need >= 3 reliable points in the top decade, have {len(pts)}")
    x = np.array([e / 10.0 for e, _ in pts])
    yv = np.array([math.log10(b) for _, b in pts])
    slope, _ = np.polyfit(x, yv, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# spectral analysis
# ---------------------------------------------------------------------------

def psd_welch(samples: np.ndarray, dt: float, nperseg: int = 1024,
              overlap: float = 0.5, window: str = "hann"):
    """Two-sided Welch estimate of a complex baseband stream.

    Returns (f, psd) with f in cycles per time unit, ascending (fftshifted);
    density scaling, so sum(psd) * df equals the mean-square signal value
    (exactly, for a constant-envelope input).
    """
    samples = np.asarray(samples)
    if samples.size < 2 * nperseg:
        raise ValueError("stream too short for a stable Welch estimate")
    f, pxx = sp_signal.welch(samples, fs=1.0 / dt, window=window,
                             nperseg=nperseg, noverlap=int(nperseg * overlap),
                             detrend=False, return_onesided=False,
                             scaling="density")
    return np.fft.fftshift(f), np.fft.fftshift(pxx)


def run_psd(scheme_name: str, params: CpmParams, n_blocks: int = 4096,
            seed: int = 0, energy_split: str = "total",
            nperseg: int = 1024, overlap: float = 0.5) -> PsdRecord:
    """Estimate the per-antenna PSD of a scheme from one long random stream.
    Frequencies are reported in bit-time units f*Td, Td = T / log2(M)."""
    scheme = scheme_by_name(scheme_name)
    ctx = ReceiverContext(scheme, params, energy_split)
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(1,))))
    sym = rng.integers(0, params.M, size=(1, 2 * n_blocks))
    tx = synthesize_batch(ctx, sym)  # (1, n_tx, n_slots, L)
    td = params.t_symbol / params.bits_per_symbol
    psds = []
    for m in range(scheme.n_tx):
        f, pxx = psd_welch(tx[0, m].ravel(), params.dt, nperseg, overlap)
        psds.append(pxx / td)  # density per unit of f*Td
    psd = np.array(psds)
    power = float(np.mean(np.abs(tx[0, 0].ravel()) ** 2))
    return PsdRecord(scheme=scheme_name, f_td=f * td,
                     psd_db=10.0 * np.log10(np.maximum(psd, 1e-300)),
                     power=power)


def spectrum_shift(psd_ref_db: np.ndarray, psd_other_db: np.ndarray,
                   df: float, floor_db: float = -80.0) -> float:
    """Frequency displacement that best aligns the reference spectrum with
    the other one: argmin over cyclic grid shifts of the L2 distance between
    the dB spectra (floored for robustness), refined to sub-bin accuracy by a
    parabolic fit.  Positive means the other spectrum sits higher in
    frequency."""
    a = np.asarray(psd_ref_db, dtype=float)
    b = np.asarray(psd_other_db, dtype=float)
    if a.shape != b.shape:
        raise ValueError("spectra must share one frequency grid")
    peak = max(a.max(), b.max())
    a = np.maximum(a - peak, floor_db)
    b = np.maximum(b - peak, floor_db)
    n = len(a)
    dist = np.empty(n)
    for k in range(n):
        dist[k] = np.sum((np.roll(a, k) - b) ** 2)
    k0 = int(np.argmin(dist))
    dm, d0, dp = dist[(k0 - 1) % n], dist[k0], dist[(k0 + 1) % n]
    denom = dm - 2.0 * d0 + dp
    frac = 0.5 * (dm - dp) / denom if denom > 0 else 0.0
    shift_bins = k0 + frac
    if shift_bins > n / 2:
        shift_bins -= n
    return float(shift_bins * df)


def psd_power_integral(record: PsdRecord) -> float:
    """Integral of the PSD over frequency (per antenna 0), for the power
    conservation check."""
    df = float(record.f_td[1] - record.f_td[0])
    return float(np.sum(10.0 ** (record.psd_db[0] / 10.0)) * df)
