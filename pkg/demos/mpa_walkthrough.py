"""Follow message passing on one 4x6 frame, iteration by iteration.

Prints the function-node messages towards user 1 and the evolving
symbol beliefs, then compares the final LLRs with the exact posterior.
"""

import numpy as np

from scmalab import DecoderConfig, decode, default_codebook, encode, realize_channel, transmit
from scmalab.harness import noise_variance
from scmalab.oracle import exact_bit_llr, joint_posterior

np.set_printoptions(precision=4, suppress=True)
rng = np.random.default_rng(7)
cbs = default_codebook()
g = cbs.graph

bits = rng.integers(0, 2, (g.J, cbs.B))
N0 = noise_variance(cbs, 8.0)
ch = realize_channel("rayleigh-uplink", g, rng, N0)
y = transmit(encode(bits, cbs), ch, rng)
print("transmitted bits per user:", ["".join(map(str, b)) for b in bits])


def show(state):
    it = state.iteration
    rows = []
    for k in g.zeta[0]:
        rows.append(state.fn_to_vn[0, k, g.slot(k, 0)])
    print(f"iteration {it}: FN->user1 from resources {[k + 1 for k in g.zeta[0]]}")
    print("   ", np.array(rows))


res = decode(y, ch.H, cbs, N0, DecoderConfig(variant="mpa", iterations=4), callback=show)
print("\nbeliefs after 4 iterations:")
print(res.beliefs)
print("hard bits:", ["".join(map(str, b)) for b in res.hard_bits])

jp = joint_posterior(y, ch.H, cbs, N0)
exact = np.stack([exact_bit_llr(jp, j) for j in range(g.J)])
print("\nMPA LLR vs exact posterior LLR (graph has cycles, so they differ slightly):")
print(np.column_stack([res.llr.reshape(-1), exact.reshape(-1)]))
