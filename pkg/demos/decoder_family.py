"""Accuracy against work for every detector variant at one SNR point.

The counters report function-node multiplications (probability domain)
or max* combinations (log domain) per frame.
"""

from scmalab import DecoderConfig
from scmalab.harness import MLDetector, SimConfig, run_sweep

variants = (
    DecoderConfig(variant="mpa"),
    DecoderConfig(variant="mpa", schedule="serial-vn", label="mpa serial"),
    DecoderConfig(variant="log-mpa"),
    DecoderConfig(variant="log-mpa", max_star_mode="lut", label="log-mpa lut8"),
    DecoderConfig(variant="max-log"),
    DecoderConfig(variant="pm-mpa", pm_t=5, pm_u=3),
    DecoderConfig(variant="eml", eml_mc=2),
    DecoderConfig(variant="dmpa", dmpa_w=0.05),
    MLDetector(),
)
cfg = SimConfig(snr_db=(8.0,), frames=1000, decoders=variants, seed=3, timing=True)
res = run_sweep(cfg)
print(f"{'decoder':>14} {'ber':>9} {'ser':>9} {'fn mults/frame':>15} {'ms/frame':>9}")
for r in res.rows:
    print(f"{r.decoder:>14} {r.ber:9.4f} {r.ser:9.4f} {r.avg_fn_multiplies:15.0f} {r.wall_ms / r.frames:9.3f}")
