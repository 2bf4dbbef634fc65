"""
One-bit level quantizer: Fisher information versus threshold
============================================================

The optimal threshold moves toward zero as the channel gets noisier.
"""

import numpy as np

from qlmpt.design import fi_sweep_1d, grid_search_1d
from qlmpt.quantizer import LQ

taus = np.arange(0.05, 4.0, 0.05)
for pe in (0.0, 0.1, 0.2, 0.3):
    fi = fi_sweep_1d(pe, taus)
    best = grid_search_1d(LQ, pe)
    print(f"pe={pe:.1f}  peak on coarse grid tau={taus[np.argmax(fi)]:.2f}  "
          f"optimum tau={best.spec.thresholds[0]:.3f}  normalized FI={best.normalized_fi:.4f}")
