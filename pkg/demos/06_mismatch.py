"""
Misestimated crossover probability
==================================

The fusion center builds its statistic for an assumed pe while the channel
flips bits with pe = 0.2. The threshold is set under the true channel, so
pfa stays nominal and only the statistic's shape is mismatched. Running
with ``calibration="assumed"`` shows what happens when the threshold is
also taken from the assumed model.
"""

from _common import load_config, print_rows
from qlmpt.harness import run_mismatch

for calibration in ("true", "assumed"):
    print(f"\nthreshold calibrated under the {calibration} channel")
    res = run_mismatch(load_config("mismatch.json", calibration=calibration, trials=2000), workers=4)
    print_rows(res)
