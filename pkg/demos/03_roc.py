"""
ROC at M = 300 sensors
======================

Monte Carlo detection rates against the asymptotic Gaussian prediction for
3-bit level and rectangular quantizers and the unquantized detector.
"""

import sys

from _common import load_config, print_rows
from qlmpt.harness import run_roc

cfg = load_config("roc.json")
res = run_roc(cfg, workers=4)
print_rows(res)

if len(sys.argv) > 1:
    with open(sys.argv[1], "w", newline="") as fh:
        fh.write(res.to_csv())
