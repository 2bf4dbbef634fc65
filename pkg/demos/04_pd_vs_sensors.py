"""
Detection probability versus number of sensors
==============================================

Exact sparse-signal simulation at a fixed false-alarm rate of 0.1.
"""

from _common import load_config, print_rows
from qlmpt.harness import run_pd_vs_sensors

res = run_pd_vs_sensors(load_config("pd_vs_m.json"), workers=4)
print_rows(res)
