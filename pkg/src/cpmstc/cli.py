"""Command line front end.

Four subcommands: ``ber`` (Monte Carlo BER curve), ``psd`` (per-antenna Welch
spectra + measured inter-antenna shift), ``verify`` (exact orthogonality /
continuity report), ``waveform`` (IQ dump).  Every config-file key has a
matching flag; precedence is flag > config file > built-in default, with the
CPMSTC_SEED environment variable as a seed fallback before the default.

Exit codes: 0 success, 1 usage/config error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction

import numpy as np

from .cpm import CpmParams
from .codes import (SourceSymbols, encode_stream, l2_residual,
                    max_boundary_jump, scheme_by_name, xi_half_cycle_condition)
from .analysis import BerConfig, run_ber, run_psd, spectrum_shift

_SENTINEL = object()


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


@dataclass
class RunConfig:
    scheme: str = "parallel-l2"
    ntx: int = 0            # 0: derived from the scheme
    nrx: int = 1
    h: str = "1/2"
    M: int = 8
    gamma: int = 2
    sps: int = 16
    ebn0: str = "0:2:12"
    seed: int = 1
    max_blocks: int = 2_000_000
    target_errors: int = 100
    truncation: int = 10
    energy_split: str = "total"
    blocks: int = 64        # waveform/psd stream length (psd scales it up)
    data: str = "random"    # waveform payload: random | zeros
    outdir: str = "."
    threads: int = 0        # 0: machine parallelism

    def resolved_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def h_fraction(self) -> Fraction:
        try:
            parts = self.h.split("/")
            num = int(parts[0])
            den = int(parts[1]) if len(parts) > 1 else 1
            value = Fraction(num, den)
        except (ValueError, IndexError, ZeroDivisionError):
            raise ValueError(f"h must look like 'm/n', got {self.h!r}") from None
        if value <= 0:
            raise ValueError("h must be positive")
        return value

    def m0_p(self) -> tuple:
        half = self.h_fraction() / 2
        return half.numerator, half.denominator

    def params(self) -> CpmParams:
        m0, p = self.m0_p()
        return CpmParams(m0=m0, p=p, M=self.M, gamma=self.gamma,
                         samples_per_symbol=self.sps)

    def scheme_obj(self):
        scheme = scheme_by_name(self.scheme)
        if self.ntx and self.ntx != scheme.n_tx:
            raise ValueError(
                f"scheme {self.scheme!r} uses {scheme.n_tx} Tx antennas, not {self.ntx}")
        return scheme

    def ebn0_grid(self) -> tuple:
        try:
            start, step, stop = (float(v) for v in self.ebn0.split(":"))
        except ValueError:
            raise ValueError(f"ebn0 must look like 'start:step:stop', got {self.ebn0!r}") from None
        if step <= 0 or stop < start:
            raise ValueError("ebn0 grid must be increasing")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + k * step for k in range(n))


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` format, '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    cfg = RunConfig()
    known = {f.name: f.type for f in fields(RunConfig)}
    for key, raw in file_values.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        setattr(cfg, key, type(current)(raw))
    seed_env = os.environ.get("CPMSTC_SEED")
    if seed_env is not None and "seed" not in file_values:
        cfg.seed = int(seed_env)
    for key in known:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
    return cfg


def _add_common_flags(sp):
    sp.add_argument("--config", help="flat key = value config file")
    sp.add_argument("--scheme", choices=("conventional", "parallel-l2",
                                         "wang-xia", "repetition"))
    sp.add_argument("--ntx", type=int, help="transmit antennas (checked against scheme)")
    sp.add_argument("--nrx", type=int, help="receive antennas")
    sp.add_argument("--h", help="modulation index as a fraction, e.g. 1/2")
    sp.add_argument("--M", type=int, help="alphabet size (power of 2)")
    sp.add_argument("--gamma", type=int, help="phase pulse memory in symbols")
    sp.add_argument("--sps", type=int, help="samples per symbol")
    sp.add_argument("--ebn0", help="Eb/N0 grid start:step:stop in dB")
    sp.add_argument("--seed", type=int, help="master seed (env CPMSTC_SEED as fallback)")
    sp.add_argument("--max-blocks", dest="max_blocks", type=int)
    sp.add_argument("--target-errors", dest="target_errors", type=int)
    sp.add_argument("--truncation", type=int, help="survivor depth in code blocks")
    sp.add_argument("--energy-split", dest="energy_split",
                    choices=("total", "per-antenna"))
    sp.add_argument("--blocks", type=int, help="stream length in code blocks")
    sp.add_argument("--data", choices=("random", "zeros"), help="waveform payload")
    sp.add_argument("--outdir", help="output directory")
    sp.add_argument("--threads", type=int, help="worker threads (0 = machine)")


def _write_csv(path: str, lines) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _fmt(x) -> str:
    return f"{x:.12g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ber(cfg: RunConfig) -> int:
    scheme = cfg.scheme_obj()
    params = cfg.params()
    if cfg.scheme == "repetition":
        raise ValueError("the repetition control has no ML decoder; use verify")
    valid = {("conventional", 1), ("parallel-l2", 1), ("parallel-l2", 2),
             ("wang-xia", 1), ("wang-xia", 2)}
    if (cfg.scheme, cfg.nrx) not in valid:
        raise ValueError(
            f"unsupported configuration: {cfg.scheme} with {cfg.nrx} Rx antennas")
    bc = BerConfig(scheme=cfg.scheme, m0=params.m0, p=params.p, M=params.M,
                   gamma=params.gamma, samples_per_symbol=params.samples_per_symbol,
                   n_rx=cfg.nrx, ebn0_grid=cfg.ebn0_grid(), seed=cfg.seed,
                   target_errors=cfg.target_errors, max_blocks=cfg.max_blocks,
                   truncation_blocks=cfg.truncation, energy_split=cfg.energy_split,
                   threads=cfg.resolved_threads())
    lines = ["scheme,n_tx,n_rx,ebn0_db,blocks,bit_errors,ber"]
    def progress(rec):
        print(f"ebn0={rec.ebn0_db:g} dB: ber={rec.ber:.3e} "
              f"({rec.bit_errors} errors / {rec.blocks} blocks)")
    for rec in run_ber(bc, progress=progress):
        lines.append(",".join([rec.scheme, str(rec.n_tx), str(rec.n_rx),
                               _fmt(rec.ebn0_db), str(rec.blocks),
                               str(rec.bit_errors), _fmt(rec.ber)]))
    out = os.path.join(cfg.outdir, "ber.csv")
    _write_csv(out, lines)
    print(f"wrote {out}")
    return 0


def cmd_psd(cfg: RunConfig) -> int:
    scheme = cfg.scheme_obj()
    params = cfg.params()
    if params.samples_per_symbol < 64:
        params = CpmParams(m0=params.m0, p=params.p, M=params.M,
                           gamma=params.gamma, samples_per_symbol=64)
    n_blocks = max(cfg.blocks, 2048)
    rec = run_psd(cfg.scheme, params, n_blocks=n_blocks, seed=cfg.seed,
                  energy_split=cfg.energy_split)
    lines = []
    if scheme.n_tx == 2:
        df = float(rec.f_td[1] - rec.f_td[0])
        shift = spectrum_shift(rec.psd_db[0], rec.psd_db[1], df)
        lines.append(f"# antenna2_shift_ftd = {_fmt(shift)}")
        lines.append("f_td,psd_db_tx1,psd_db_tx2")
        for k in range(len(rec.f_td)):
            lines.append(",".join(_fmt(v) for v in
                                  (rec.f_td[k], rec.psd_db[0, k], rec.psd_db[1, k])))
        print(f"measured antenna-2 spectrum shift: {shift:.4f} f*Td")
    else:
        lines.append("f_td,psd_db_tx1")
        for k in range(len(rec.f_td)):
            lines.append(",".join(_fmt(v) for v in (rec.f_td[k], rec.psd_db[0, k])))
    out = os.path.join(cfg.outdir, "psd.csv")
    _write_csv(out, lines)
    print(f"wrote {out}")
    return 0


def cmd_verify(cfg: RunConfig, n_random: int = 2000) -> int:
    scheme = cfg.scheme_obj()
    params = cfg.params()
    rng = np.random.default_rng(cfg.seed)
    M = params.M
    levels_of = np.arange(-M + 1, M, 2)

    # random-data encoding: residual + continuity
    n_blocks = max(64, min(n_random, 4096))
    idx = rng.integers(0, M, size=2 * n_blocks)
    levels = [int(levels_of[a]) for a in idx]
    wave, blocks, _ = encode_stream(scheme, params, levels,
                                    energy_split=cfg.energy_split)
    max_jump = float(max_boundary_jump(blocks))
    env = np.abs(wave)
    env_err = float(np.max(np.abs(env - params.amplitude(scheme.n_tx, cfg.energy_split))))
    checks = [("max_phase_jump_cycles", max_jump, 1e-12, max_jump < 1e-12),
              ("max_envelope_error", env_err, 1e-12, env_err < 1e-12)]

    if scheme.n_tx == 2:
        res = max(l2_residual(b, params) for b in blocks)
        checks.append(("max_l2_cross_correlation", res, 1e-10 * params.es,
                       res < 1e-10 * params.es))
        # half-cycle condition: exhaustive over one block's symbol pairs with
        # random history, plus the random stream
        src = SourceSymbols(levels)
        ok = all(xi_half_cycle_condition(scheme, params, src, l)
                 for l in range(n_blocks - 1))
        hist = [int(levels_of[a]) for a in rng.integers(0, M, size=max(params.gamma - 1, 0))]
        for a1 in range(M):
            for a2 in range(M):
                block_src = SourceSymbols(
                    hist + [int(levels_of[a1]), int(levels_of[a2])],
                    first_index=2 - params.gamma)
                ok = ok and xi_half_cycle_condition(scheme, params, block_src, 0)
        checks.append(("half_cycle_condition", 1.0 if ok else 0.0, 1.0, ok))

    lines = ["check,value,threshold,status"]
    all_ok = True
    for name, value, thr, ok in checks:
        status = "PASS" if ok else "FAIL"
        all_ok &= ok
        lines.append(f"{name},{_fmt(value)},{_fmt(thr)},{status}")
        print(f"{status}  {name} = {value:.3e} (threshold {thr:g})")
    out = os.path.join(cfg.outdir, "verify.csv")
    _write_csv(out, lines)
    print(f"wrote {out}")
    return 0 if all_ok else 2


def cmd_waveform(cfg: RunConfig) -> int:
    scheme = cfg.scheme_obj()
    params = cfg.params()
    rng = np.random.default_rng(cfg.seed)
    M = params.M
    if cfg.data == "zeros":
        levels = [0] * (2 * cfg.blocks)
    else:
        levels = [int(v) for v in rng.choice(np.arange(-M + 1, M, 2),
                                             size=2 * cfg.blocks)]
    wave, blocks, _ = encode_stream(scheme, params, levels,
                                    energy_split=cfg.energy_split)
    L = params.samples_per_symbol
    dt = params.dt
    frac = np.arange(L) / L
    outputs = []
    for m in range(scheme.n_tx):
        phases = np.concatenate([
            (float(b.lines[m][r].start) + float(b.lines[m][r].slope) * frac) % 1.0
            for b in blocks for r in (0, 1)])
        lines = ["t,re,im,phase_cycles"]
        for k in range(wave.shape[1]):
            lines.append(",".join(_fmt(v) for v in
                                  (k * dt, wave[m, k].real, wave[m, k].imag, phases[k])))
        path = os.path.join(cfg.outdir, f"waveform_tx{m + 1}.csv")
        _write_csv(path, lines)
        outputs.append(path)
    print("wrote " + ", ".join(outputs))
    return 0


def main(argv=None) -> int:
    parser = _Parser(prog="cpmstc",
                     description="L2-orthogonal space-time coded CPM simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("ber", "simulate a BER curve and write ber.csv"),
                           ("psd", "estimate per-antenna spectra and write psd.csv"),
                           ("verify", "check orthogonality and phase continuity"),
                           ("waveform", "dump per-antenna IQ waveforms")):
        _add_common_flags(sub.add_parser(name, help=helptext))
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        os.makedirs(cfg.outdir, exist_ok=True)
        cfg.params()          # validate modulation parameters early
        cfg.scheme_obj()
        handler = {"ber": cmd_ber, "psd": cmd_psd,
                   "verify": cmd_verify, "waveform": cmd_waveform}[args.command]
        return handler(cfg)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
