"""Frequency-flat Rayleigh block fading with complex AWGN.

Gains are i.i.d. circularly symmetric complex Gaussian with unit mean-square,
constant over one code block and independent across blocks; the receiver is
assumed coherent (gains known).  Noise is calibrated so that a discrete
correlation sum(y * conj(s)) * dt reproduces the continuous-time statistics:
per-sample complex variance N0/dt, with Eb = Es / log2(M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cpm import CpmParams


@dataclass(frozen=True)
class NoiseParams:
    """Eb/N0 operating point and the derived noise scale."""

    ebn0_db: float
    n0: float

    @classmethod
    def from_ebn0(cls, params: CpmParams, ebn0_db: float) -> "NoiseParams":
        eb = params.es / params.bits_per_symbol
        return cls(ebn0_db=float(ebn0_db), n0=eb / 10.0 ** (ebn0_db / 10.0))

    def sigma2_per_sample(self, dt: float) -> float:
        """Complex variance of one noise sample (N0/dt, split evenly between
        the real and imaginary parts)."""
        return self.n0 / dt


@dataclass(frozen=True)
class ChannelRealization:
    """Complex gains alpha[(...,) m, n] from Tx antenna m to Rx antenna n."""

    alpha: np.ndarray


def draw_channel(rng: np.random.Generator, n_tx: int, n_rx: int,
                 shape: tuple = ()) -> ChannelRealization:
    """Draw unit-variance Rayleigh gains; leading axes in ``shape`` index
    independent realizations (e.g. (streams, blocks))."""
    full = tuple(shape) + (n_tx, n_rx)
    g = rng.standard_normal(full) + 1j * rng.standard_normal(full)
    return ChannelRealization(alpha=g / math.sqrt(2.0))


def awgn(rng: np.random.Generator, shape: tuple, sigma2: float) -> np.ndarray:
    scale = math.sqrt(sigma2 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def transmit(s: np.ndarray, ch: ChannelRealization,
             noise: NoiseParams | None = None,
             rng: np.random.Generator | None = None,
             dt: float | None = None) -> np.ndarray:
    """Propagate a block waveform through the channel.

    s     : (..., n_tx, n_samples) transmit matrix
    alpha : (..., n_tx, n_rx) gains, broadcast against s's leading axes
    returns (..., n_rx, n_samples); pass noise=None to switch noise off.
    """
    alpha = ch.alpha
    if alpha.shape[-2] != s.shape[-2]:
        raise ValueError(
            f"gain/waveform antenna mismatch: {alpha.shape[-2]} vs {s.shape[-2]}")
    # y[..., n, k] = sum_m alpha[..., m, n] * s[..., m, k]
    y = np.einsum("...mn,...mk->...nk", alpha, s)
    if noise is not None:
        if rng is None or dt is None:
            raise ValueError("noisy transmission needs an rng and the sample spacing")
        y = y + awgn(rng, y.shape, noise.sigma2_per_sample(dt))
    return y
