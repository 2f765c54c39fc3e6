"""Coherent ML detection for the space-time CPM codes.

The receiver correlates received slots against precomputed candidate
waveforms (one filterbank per slot parity, p * M**gamma entries per antenna)
and runs a Viterbi search over the trellis of (phase state, last gamma-1
symbols).  Two metric modes exist:

* ``split`` - per-slot branch metrics f1 + f2 with the inter-antenna cross
  term dropped.  Exactly ML for the parallel code (and plain CPM): block
  orthogonality cancels the cross term over every two-slot block, and the
  mid-block remainder is the same for all candidates, so survivor decisions
  are unaffected.  Costs 2M branch metrics per state per block.
* ``joint`` - per-block metrics over symbol pairs, including the exact
  per-slot inter-antenna cross energy; M**2 branch metrics per state per
  block.  Required for the crosswise code, whose antenna-2 slots depend on
  both block symbols; also serves as the complexity baseline.

Decisions are released a fixed number of blocks late (survivor truncation)
or by full traceback when truncation is disabled.  Heavy paths are
vectorized over a batch of independent streams.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cpm import CpmParams
from .codes import (CodeScheme, SourceSymbols, encode_stream, initial_state,
                    line_from_kernels, slot_kernels, xi_increment, HALF)

EXHAUSTIVE_GUARD = 1 << 20


def phase_state_closure(params: CpmParams) -> list:
    """All phase-memory values reachable from 0 under the per-slot increments
    (h/2) * level (natural alphabet, plus silence).  Finite because h is
    rational; p evenly spaced states for the odd alphabets used here."""
    h2 = params.h / 2
    incs = {h2 * lvl % 1 for lvl in range(-params.M + 1, params.M, 2)}
    incs.add(Fraction(0))
    seen = {Fraction(0)}
    frontier = [Fraction(0)]
    while frontier:
        th = frontier.pop()
        for inc in incs:
            nxt = (th + inc) % 1
            if nxt not in seen:
                if len(seen) > 64 * params.p:
                    raise ValueError("phase state set does not close")
                seen.add(nxt)
                frontier.append(nxt)
    return sorted(seen)


def _level(params: CpmParams, idx: int) -> int:
    return -params.M + 1 + 2 * idx


def _digits(idx: int, M: int, n: int) -> tuple:
    return tuple((idx // M ** k) % M for k in range(n - 1, -1, -1))


def _unit_integrals(d_start, d_slope):
    """Vector of integral_0^1 exp(2j pi (a + b u)) du."""
    a = np.asarray(d_start, dtype=float)
    b = np.asarray(d_slope, dtype=float)
    out = np.empty(a.shape, dtype=np.complex128)
    small = np.abs(b) < 1e-12
    out[small] = np.exp(2j * np.pi * a[small])
    w = 2j * np.pi * b[~small]
    out[~small] = np.exp(2j * np.pi * a[~small]) * (np.exp(w) - 1.0) / w
    return out


@dataclass
class SlotCandidates:
    """One filterbank: candidate slot waveforms with their exact phase lines
    and per-candidate inter-antenna cross energy."""

    waves: np.ndarray         # (n_tx, C, L) complex
    start: np.ndarray         # (n_tx, C) cycles
    slope: np.ndarray         # (n_tx, C) cycles per slot
    cross_energy: np.ndarray  # (C,) complex <s1, s2> over the slot; zeros for 1 Tx


class ReceiverContext:
    """Precomputed filterbanks and trellis tables for one (scheme, params)."""

    def __init__(self, scheme: CodeScheme, params: CpmParams,
                 energy_split: str = "total"):
        self.scheme = scheme
        self.params = params
        self.energy_split = energy_split
        self.amplitude = params.amplitude(scheme.n_tx, energy_split)

        self.theta_values = phase_state_closure(params)
        self.n_theta = len(self.theta_values)
        self.theta_index = {v: i for i, v in enumerate(self.theta_values)}
        M, gamma = params.M, params.gamma
        self.n_tails = M ** (gamma - 1)
        self.n_states = self.n_theta * self.n_tails

        h2 = params.h / 2
        self.theta_next = np.empty((self.n_theta, M), dtype=np.int64)
        for ti, th in enumerate(self.theta_values):
            for j in range(M):
                self.theta_next[ti, j] = self.theta_index[(th + h2 * _level(params, j)) % 1]

        self.slot_banks = None
        self.block_banks = None
        if scheme.kind in ("conventional", "parallel-l2"):
            self._build_slot_tables()
        if scheme.n_tx == 2:
            self._build_block_tables()

    # -- state helpers ------------------------------------------------------

    def state_index(self, theta, tail_indices=()) -> int:
        ti = self.theta_index[Fraction(theta) % 1]
        tail_idx = 0
        for a in tail_indices:
            tail_idx = tail_idx * self.params.M + int(a)
        return ti * self.n_tails + tail_idx

    def initial_state_index(self, tail_levels=None) -> int:
        gamma, M = self.params.gamma, self.params.M
        if tail_levels is None:
            tail_levels = (-M + 1,) * (gamma - 1)
        idx = [(int(lvl) + M - 1) // 2 for lvl in tail_levels]
        return self.state_index(Fraction(0), idx)

    def _antenna_theta(self, theta, antenna: int, slot_parity_even: bool):
        """theta of the given antenna when the trellis tracks antenna 1: the
        two orthogonal codes hold theta2 - theta1 = 0 on odd slots and 1/2 on
        even slots (both memories start at 0)."""
        if antenna == 1 and self.scheme.kind in ("parallel-l2", "wang-xia"):
            return (theta + (HALF if slot_parity_even else 0)) % 1
        return theta

    # -- filterbank / trellis construction ----------------------------------

    def _build_slot_tables(self):
        p = self.params
        M, gamma, L = p.M, p.gamma, p.samples_per_symbol
        S, n_tx = self.n_states, self.scheme.n_tx
        C = self.n_theta * M ** gamma
        frac = np.arange(L) / L

        self.slot_banks = []
        for parity in (0, 1):  # 0: odd slot (first of a block), 1: even slot
            n_ref = 4 * gamma + 3 + parity
            waves = np.empty((n_tx, C, L), dtype=np.complex128)
            start = np.empty((n_tx, C))
            slope = np.empty((n_tx, C))
            for ti, th in enumerate(self.theta_values):
                for w_idx, window in enumerate(itertools.product(range(M), repeat=gamma)):
                    c = ti * M ** gamma + w_idx
                    levels = [_level(p, a) for a in window]
                    src = SourceSymbols(levels, first_index=n_ref - gamma + 1)
                    for m in range(n_tx):
                        th_m = self._antenna_theta(th, m, parity == 1)
                        line = line_from_kernels(
                            slot_kernels(self.scheme, p, src, m, n_ref),
                            n_ref, gamma, th_m)
                        start[m, c] = float(line.start)
                        slope[m, c] = float(line.slope)
                        waves[m, c] = self.amplitude * np.exp(
                            2j * np.pi * (start[m, c] + slope[m, c] * frac))
            cross = np.zeros(C, dtype=np.complex128)
            if n_tx == 2:
                cross = (self.amplitude ** 2 * p.t_symbol *
                         _unit_integrals(start[0] - start[1], slope[0] - slope[1]))
            self.slot_banks.append(SlotCandidates(waves, start, slope, cross))

        self.cand_of = np.empty((S, M), dtype=np.int64)
        self.next_state = np.empty((S, M), dtype=np.int64)
        for s in range(S):
            ti, tail_idx = divmod(s, self.n_tails)
            tail = _digits(tail_idx, M, gamma - 1)
            for a in range(M):
                self.cand_of[s, a] = ti * M ** gamma + tail_idx * M + a
                retiring = tail[0] if gamma > 1 else a
                ti_next = self.theta_next[ti, retiring]
                tail_next = (tail_idx * M + a) % self.n_tails
                self.next_state[s, a] = ti_next * self.n_tails + tail_next
        self.pred_state, self.pred_sym, self.pred_cand = _invert_transitions(
            self.next_state, self.cand_of, S, M)

    def _build_block_tables(self):
        p = self.params
        M, gamma, L = p.M, p.gamma, p.samples_per_symbol
        S = self.n_states
        Cb = self.n_theta * M ** (gamma + 1)
        frac = np.arange(L) / L
        n_ref = 4 * gamma + 3  # odd: first slot of a reference block
        l_ref = (n_ref - 1) // 2

        waves = np.empty((2, 2, Cb, L), dtype=np.complex128)  # (slot, antenna, C, L)
        start = np.empty((2, 2, Cb))
        slope = np.empty((2, 2, Cb))
        for ti, th in enumerate(self.theta_values):
            for w_idx, window in enumerate(itertools.product(range(M), repeat=gamma + 1)):
                c = ti * M ** (gamma + 1) + w_idx
                levels = [_level(p, a) for a in window]  # tail + (a1, a2)
                src = SourceSymbols(levels, first_index=2 * l_ref + 2 - gamma)
                th_slot = [Fraction(th)]
                th_slot.append((th + xi_increment(self.scheme, p, src, 0, n_ref)) % 1)
                for r in (0, 1):
                    n = n_ref + r
                    for m in (0, 1):
                        th_m = self._antenna_theta(th_slot[r], m, n % 2 == 0)
                        line = line_from_kernels(
                            slot_kernels(self.scheme, p, src, m, n), n, gamma, th_m)
                        start[r, m, c] = float(line.start)
                        slope[r, m, c] = float(line.slope)
                        waves[r, m, c] = self.amplitude * np.exp(
                            2j * np.pi * (start[r, m, c] + slope[r, m, c] * frac))
        self.block_banks = [
            SlotCandidates(waves[r], start[r], slope[r],
                           self.amplitude ** 2 * p.t_symbol * _unit_integrals(
                               start[r, 0] - start[r, 1], slope[r, 0] - slope[r, 1]))
            for r in (0, 1)
        ]

        M2 = M * M
        self.block_cand_of = np.empty((S, M2), dtype=np.int64)
        self.block_next_state = np.empty((S, M2), dtype=np.int64)
        for s in range(S):
            ti, tail_idx = divmod(s, self.n_tails)
            tail = _digits(tail_idx, M, gamma - 1)
            for a1 in range(M):
                for a2 in range(M):
                    pair = a1 * M + a2
                    self.block_cand_of[s, pair] = (
                        ti * M ** (gamma + 1) + (tail_idx * M + a1) * M + a2)
                    ext = tail + (a1, a2)
                    ti_next = self.theta_next[self.theta_next[ti, ext[0]], ext[1]]
                    tail_next = ((tail_idx * M + a1) * M + a2) % self.n_tails
                    self.block_next_state[s, pair] = ti_next * self.n_tails + tail_next
        self.block_pred_state, self.block_pred_sym, self.block_pred_cand = \
            _invert_transitions(self.block_next_state, self.block_cand_of, S, M2)


def _invert_transitions(next_state, cand_of, S, K):
    """Incoming-edge tables, ordered by (transition symbol, predecessor) so
    metric ties resolve toward the lowest symbol index deterministically."""
    preds = [[] for _ in range(S)]
    for s in range(S):
        for a in range(K):
            preds[next_state[s, a]].append((a, s))
    pred_state = np.empty((S, K), dtype=np.int64)
    pred_sym = np.empty((S, K), dtype=np.int64)
    pred_cand = np.empty((S, K), dtype=np.int64)
    for s2, lst in enumerate(preds):
        if len(lst) != K:
            raise AssertionError(f"trellis not regular: state {s2} has {len(lst)} preds")
        lst.sort()
        for k, (a, s) in enumerate(lst):
            pred_sym[s2, k] = a
            pred_state[s2, k] = s
            pred_cand[s2, k] = cand_of[s, a]
    return pred_state, pred_sym, pred_cand


def slot_branch_metrics(y_slot, alpha, bank: SlotCandidates, dt: float,
                        include_y_energy: bool = True) -> np.ndarray:
    """Separable slot metric sum over antennas and Rx of |y - alpha s|^2 dt,
    per candidate.  Nonnegative with the y energy kept; dropping it shifts
    all candidates equally.  y_slot (n_rx, L) or (L,), alpha (n_tx, n_rx)."""
    yk = np.atleast_2d(np.asarray(y_slot))
    alpha = np.asarray(alpha)
    n_tx, C, L = bank.waves.shape
    es_slot = dt * L * float(np.abs(bank.waves[0, 0, 0]) ** 2)
    corr = np.einsum("nk,mck->mnc", yk, np.conj(bank.waves)) * dt
    metric = np.zeros(C)
    for m in range(n_tx):
        for n in range(yk.shape[0]):
            metric += (-2.0 * np.real(np.conj(alpha[m, n]) * corr[m, n])
                       + np.abs(alpha[m, n]) ** 2 * es_slot)
    if include_y_energy:
        metric += n_tx * float(np.sum(np.abs(yk) ** 2) * dt)
    return metric


class Decoder:
    """Truncated-survivor Viterbi demodulator for one scheme."""

    def __init__(self, scheme: CodeScheme, params: CpmParams, n_rx: int = 1,
                 mode: str | None = None, truncation_blocks: int | None = 10,
                 energy_split: str = "total",
                 context: ReceiverContext | None = None):
        if mode is None:
            mode = "split" if scheme.kind in ("conventional", "parallel-l2") else "joint"
        if mode == "split" and scheme.kind not in ("conventional", "parallel-l2"):
            raise ValueError(f"split metrics are not exact for {scheme.kind!r}")
        if mode == "joint" and scheme.n_tx != 2:
            raise ValueError("joint block decoding needs two transmit antennas")
        self.scheme = scheme
        self.params = params
        self.n_rx = n_rx
        self.mode = mode
        self.truncation_blocks = truncation_blocks
        self.ctx = context if context is not None else ReceiverContext(
            scheme, params, energy_split)
        self.total_branch_evals = 0
        self.blocks_decoded = 0

    @property
    def branch_evals_per_state_per_block(self) -> float:
        if self.blocks_decoded == 0:
            return 0.0
        return self.total_branch_evals / (self.blocks_decoded * self.ctx.n_states)

    def decode(self, y, alpha, tail_levels=None):
        """Decode one stream: y (n_rx, n_samples) or (n_samples,),
        alpha (n_blocks, n_tx, n_rx).  Returns per-slot alphabet indices."""
        y = np.asarray(y)
        if y.ndim == 1:
            y = y[None, :]
        alpha = np.asarray(alpha)
        return self.decode_batch(y[None], alpha[None], tail_levels)[0]

    def decode_batch(self, y, alpha, tail_levels=None):
        """y (B, n_rx, n_blocks*2*L), alpha (B, n_blocks, n_tx, n_rx) ->
        (B, 2*n_blocks) decided alphabet indices."""
        p = self.params
        L = p.samples_per_symbol
        B, n_rx, total = y.shape
        n_slots = total // L
        n_blocks = n_slots // 2
        if n_slots * L != total or n_blocks * 2 != n_slots or n_blocks == 0:
            raise ValueError("stream length must be a whole number of blocks")
        y = y.reshape(B, n_rx, n_slots, L)
        if self.mode == "split":
            out = self._run_split(y, alpha, tail_levels)
        else:
            out = self._run_joint(y, alpha, tail_levels)
        self.blocks_decoded += B * n_blocks
        return out

    # -- forward passes ------------------------------------------------------

    def _run_split(self, y, alpha, tail_levels):
        ctx, p = self.ctx, self.params
        B, n_rx, n_slots, L = y.shape
        S, M = ctx.n_states, p.M
        dt = p.dt

        cost = np.full((B, S), 1e30)
        cost[:, ctx.initial_state_index(tail_levels)] = 0.0
        bp = np.empty((B, n_slots, S), dtype=np.uint8)
        best_at = np.empty((B, n_slots), dtype=np.int64)

        for n in range(n_slots):
            bank = ctx.slot_banks[n % 2]
            al = alpha[:, n // 2]  # (B, n_tx, n_rx)
            corr = np.einsum("bnk,mck->bmnc", y[:, :, n], np.conj(bank.waves)) * dt
            bm = -2.0 * np.real(np.einsum("bmn,bmnc->bc", np.conj(al), corr))
            tmp = cost[:, ctx.pred_state] + bm[:, ctx.pred_cand]
            k = np.argmin(tmp, axis=2)
            cost = np.take_along_axis(tmp, k[:, :, None], axis=2)[:, :, 0]
            bp[:, n] = k
            best_at[:, n] = np.argmin(cost, axis=1)
            self.total_branch_evals += B * S * M
        depth = None if self.truncation_blocks is None else 2 * self.truncation_blocks
        return self._traceback(bp, best_at, ctx.pred_state, ctx.pred_sym, depth)

    def _run_joint(self, y, alpha, tail_levels):
        ctx, p = self.ctx, self.params
        B, n_rx, n_slots, L = y.shape
        n_blocks = n_slots // 2
        S, M = ctx.n_states, p.M
        dt = p.dt

        cost = np.full((B, S), 1e30)
        cost[:, ctx.initial_state_index(tail_levels)] = 0.0
        bp = np.empty((B, n_blocks, S), dtype=np.uint8 if M * M <= 256 else np.uint16)
        best_at = np.empty((B, n_blocks), dtype=np.int64)

        for l in range(n_blocks):
            al = alpha[:, l]
            z = (al[:, 0, :] * np.conj(al[:, 1, :])).sum(axis=1)  # (B,)
            bm = np.zeros((B, ctx.block_banks[0].waves.shape[1]))
            for r in (0, 1):
                bank = ctx.block_banks[r]
                corr = np.einsum("bnk,mck->bmnc", y[:, :, 2 * l + r],
                                 np.conj(bank.waves)) * dt
                bm -= 2.0 * np.real(np.einsum("bmn,bmnc->bc", np.conj(al), corr))
                bm += 2.0 * np.real(z[:, None] * bank.cross_energy[None, :])
            tmp = cost[:, ctx.block_pred_state] + bm[:, ctx.block_pred_cand]
            k = np.argmin(tmp, axis=2)
            cost = np.take_along_axis(tmp, k[:, :, None], axis=2)[:, :, 0]
            bp[:, l] = k
            best_at[:, l] = np.argmin(cost, axis=1)
            self.total_branch_evals += B * S * M * M
        depth = self.truncation_blocks
        pairs = self._traceback(bp, best_at, ctx.block_pred_state,
                                ctx.block_pred_sym, depth)
        out = np.empty((pairs.shape[0], 2 * pairs.shape[1]), dtype=np.int64)
        out[:, 0::2] = pairs // M
        out[:, 1::2] = pairs % M
        return out

    # -- survivor release ----------------------------------------------------

    @staticmethod
    def _traceback(bp, best_at, pred_state, pred_sym, depth):
        """Release the decision for step t from the survivor of the state that
        led at step t+depth (or from the final best state near the stream
        end); depth=None means full traceback from the final best state."""
        B, T, S = bp.shape
        if depth is None:
            depth = T
        t_idx = np.arange(T)
        anchor = np.minimum(t_idx + depth, T - 1)  # (T,)
        steps = anchor - t_idx
        batch = np.arange(B)[:, None]
        cur = best_at[:, anchor]  # (B, T) state after the anchor step
        for j in range(int(steps.max())):
            active = j < steps  # columns still walking back
            s_vec = np.maximum(anchor - j, 0)
            k = bp[batch, s_vec[None, :], cur]
            stepped = pred_state[cur, k]
            cur = np.where(active[None, :], stepped, cur)
        k_final = bp[batch, t_idx[None, :], cur]
        return pred_sym[cur, k_final]


# ---------------------------------------------------------------------------
# exhaustive ML oracle
# ---------------------------------------------------------------------------

def candidate_frames(scheme: CodeScheme, params: CpmParams, n_blocks: int,
                     tail_levels=None, energy_split: str = "total"):
    """Every possible transmit frame from the known initial state: index
    sequences (n_seq, 2*n_blocks) and waveforms (n_seq, n_tx, n_samples)."""
    M = params.M
    n_seq = M ** (2 * n_blocks)
    if n_seq > EXHAUSTIVE_GUARD:
        raise ValueError(f"{n_seq} candidate frames exceed the enumeration guard")
    seqs = np.array(list(itertools.product(range(M), repeat=2 * n_blocks)),
                    dtype=np.int64)
    n_samples = n_blocks * 2 * params.samples_per_symbol
    frames = np.empty((n_seq, scheme.n_tx, n_samples), dtype=np.complex128)
    for i, seq in enumerate(seqs):
        levels = [_level(params, a) for a in seq]
        st = initial_state(scheme, params, tail_levels)
        wave, _, _ = encode_stream(scheme, params, levels, st, energy_split)
        frames[i] = wave
    return seqs, frames


def exhaustive_ml(y, alpha, scheme: CodeScheme, params: CpmParams,
                  tail_levels=None, energy_split: str = "total",
                  frames=None):
    """Brute-force ML: global minimizer of the summed block distances over
    all symbol sequences.  y (n_rx, n_samples) or (n_samples,); alpha
    (n_blocks, n_tx, n_rx).  Pass precomputed ``frames`` to amortize the
    candidate synthesis across trials."""
    y = np.atleast_2d(np.asarray(y))
    alpha = np.asarray(alpha)
    n_blocks = alpha.shape[0]
    if frames is None:
        frames = candidate_frames(scheme, params, n_blocks, tail_levels,
                                  energy_split)
    seqs, fw = frames
    L2 = 2 * params.samples_per_symbol
    D = np.zeros(len(seqs))
    for l in range(n_blocks):
        sl = slice(l * L2, (l + 1) * L2)
        mixed = np.einsum("mn,cmk->cnk", alpha[l], fw[:, :, sl])
        D += np.sum(np.abs(y[None, :, sl] - mixed) ** 2, axis=(1, 2)) * params.dt
    return seqs[int(np.argmin(D))]
