"""
Optimal thresholds and asymptotic relative efficiency
=====================================================

Designs 1- to 3-bit quantizers for a range of channel crossover
probabilities and prints the ARE, i.e. how many quantized sensors are
needed per unquantized one for the same asymptotic performance.
"""

import numpy as np

from qlmpt.design import LQU, design
from qlmpt.quantizer import LQ, RQ

PES = (0.0, 0.01, 0.1, 0.2)

print(f"{'kind':>5} {'q':>2} " + " ".join(f"pe={pe:<6g}" for pe in PES))
for kind in (RQ, LQU, LQ):
    for q in (1, 2, 3):
        row = [design(kind, q, pe).are for pe in PES]
        print(f"{kind:>5} {q:>2} " + " ".join(f"{v:9.3f}" for v in row))

# the level quantizer only sees |y|, so it spends all its levels on the magnitude
res = design(LQ, 3, 0.1)
print("\n3-bit LQ thresholds at pe = 0.1:", np.round(res.spec.thresholds, 3))
print("normalized Fisher information:", round(res.normalized_fi, 4))
