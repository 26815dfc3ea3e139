"""BER of MPA and exhaustive joint ML on the 4x6 uplink.

A few thousand frames per point keeps this under a minute. The same
run is available from the command line as
``scmalab simulate --config demos/sweep.json``.
"""

from scmalab import DecoderConfig
from scmalab.harness import MLDetector, SimConfig, format_csv, run_sweep

cfg = SimConfig(
    snr_db=(0.0, 4.0, 8.0, 12.0, 16.0),
    frames=3000,
    decoders=(DecoderConfig(variant="mpa"), DecoderConfig(variant="max-log"), MLDetector()),
    seed=1,
)
res = run_sweep(cfg, progress=lambda i, n: print(f"chunk {i}/{n}", end="\r"))
print()
print(f"{'Eb/N0':>6} " + " ".join(f"{lab:>10}" for lab in cfg.labels))
for snr in cfg.snr_db:
    print(f"{snr:6.1f} " + " ".join(f"{res.row(snr, lab).ber:10.3e}" for lab in cfg.labels))
print()
print(format_csv(res))
