#!/usr/bin/env python3
"""Per-antenna power spectral densities and the antenna-2 frequency shift.

Antenna 1 carries plain CPM, so its spectrum matches the single-antenna
reference.  Antenna 2 carries the data-independent half-cycle-per-symbol
ramp, which translates its spectrum up by h/2 cycles per symbol time
(1/6 in f*Td units for h=1/2, M=8).  The measured displacement comes from
minimizing the L2 distance between the dB spectra over cyclic shifts.

Note: with the correction pulse equal to the data pulse, the crosswise code
transmits the same antenna-2 signal as the parallel code, so its spectrum
and measured shift coincide exactly (see README "Known deviations").

Generates demos/out/psd.png.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from cpmstc.cpm import CpmParams
from cpmstc.analysis import run_psd, spectrum_shift

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

params = CpmParams(m0=1, p=4, M=8, gamma=2, samples_per_symbol=64)
conv = run_psd("conventional", params, n_blocks=4096, seed=101,
               energy_split="per-antenna")
par = run_psd("parallel-l2", params, n_blocks=4096, seed=202,
              energy_split="per-antenna")

df = float(par.f_td[1] - par.f_td[0])
shift = spectrum_shift(par.psd_db[0], par.psd_db[1], df)
print(f"measured antenna-2 shift: {shift:.4f} f*Td "
      f"(exact translate prediction: h/2 per symbol = {0.5 / 3:.4f})")

fig, ax = plt.subplots(figsize=(8, 5))
peak = conv.psd_db[0].max()
ax.plot(conv.f_td, conv.psd_db[0] - peak, lw=1.0, color="k",
        label="single-antenna reference")
ax.plot(par.f_td, par.psd_db[0] - peak, lw=1.0, ls="--", label="antenna 1")
ax.plot(par.f_td, par.psd_db[1] - peak, lw=1.0, label="antenna 2 (shifted)")
ax.set_xlim(-2.5, 2.5)
ax.set_ylim(-80, 5)
ax.set_xlabel("f * Td")
ax.set_ylabel("PSD / dB (peak-normalized)")
ax.grid(alpha=0.4)
ax.legend()
ax.set_title(f"per-antenna spectra; measured antenna-2 shift {shift:.3f} f*Td")
fig.tight_layout()
path = os.path.join(OUT, "psd.png")
fig.savefig(path, dpi=130)
print("wrote", path)
