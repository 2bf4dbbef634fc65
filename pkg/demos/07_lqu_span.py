"""
Span of the uniform level quantizer
===================================

A uniform grid of level thresholds needs a span. Fitting it to a target
one-bit ARE of 3.19 gives two solutions; the wide one covers the bulk of
|y| and is the one returned by calibrate_lqu_span.
"""

from qlmpt.design import LQU, design
from qlmpt.quantizer import calibrate_lqu_span, lqu_span_roots

print("roots:", [round(r, 4) for r in lqu_span_roots(1, 0.0, 3.19)])
rf = calibrate_lqu_span(1, 0.0, 3.19)
for q in (1, 2, 3):
    row = [design(LQU, q, pe, range_factor=rf).are for pe in (0.0, 0.01, 0.1, 0.2)]
    print(f"q={q}  " + "  ".join(f"{v:8.3f}" for v in row))
