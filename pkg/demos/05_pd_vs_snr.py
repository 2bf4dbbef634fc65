"""
Detection probability versus SNR
================================

The signal variance is derived from each SNR point; 300 sensors, pe = 0.2.
"""

from _common import load_config, print_rows
from qlmpt.harness import run_pd_vs_snr

res = run_pd_vs_snr(load_config("pd_vs_snr.json"), workers=4)
print_rows(res)
