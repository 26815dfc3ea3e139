"""Build the 4x6 star-QAM system and print its structure and distance KPIs.

Run with ``python3 demos/codebook_kpis.py``.
"""

import numpy as np

from scmalab import build_regular_factor_graph, default_codebook, kpi, star_qam_mother
from scmalab.harness import format_kpi_table, kpi_report

np.set_printoptions(precision=4, suppress=True)

g = build_regular_factor_graph(4, 6, 2)
print("factor graph F (resources x users):")
print(g.F)
print(f"d_v={g.d_v} d_f={g.d_f} overloading={g.overloading:.0%}")
for k, users in enumerate(g.xi):
    print(f"  resource {k + 1} carries users {[j + 1 for j in users]}")

mc = star_qam_mother(3.0, 1 / 0.62)
print("\nmother constellation (rows are dimensions):")
print(mc.points.real)
print(f"R1={mc.R1:.6f} R2={mc.R2:.6f} energy={np.sum(np.abs(mc.points) ** 2):.12f}")

cbs = default_codebook()
print("\nuser 4 codebook (K x M):")
print(cbs.codewords[3])
print()
print(format_kpi_table(kpi_report(cbs)))

# the ring ratio trades minimum distance against product distance
print("beta sweep at alpha=3:")
for beta in (1.2, 1 / 0.62, 2.0, 2.5):
    r = kpi(star_qam_mother(3.0, beta).points)
    print(f"  beta={beta:.3f}  d_E_min={r.d_E_min:.4f}  d_P_min={r.d_P_min:.4f}  L={r.L}")
