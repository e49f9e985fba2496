"""The Hopf SKT surface: which sign of I is a holomorphic section.

On the chart 1/2 < |z| < 2 of C^2 minus the origin with g = |z|^-2 delta,
H = -d^c w is closed and of type (2,1)+(1,2).  With nabla = nabla^- the
twistor structure on T(M, g) is integrable, I is a holomorphic section and
-I is not.  The modified connection nabla + (1/2)(nabla I) I reproduces the
Chern connection.

Run with ``python demos/hopf_sections.py``.
"""

import numpy as np

from twistorlab.connections import curvature_components, r02_components
from twistorlab.gallery import build
from twistorlab.twistor_total import pseudoholo_pm_I

case = build("hopf_skt")
f = case.fields
rng = np.random.default_rng(2)
print(f"{'point':>34}  {'|R^02| nabla-':>13}  {'+I':>8}  {'-I':>8}  {'|nabla_mod - Ch|':>16}")
for x in case.chart.sample_points(4, rng):
    R = curvature_components(f["bismut_minus"], x, 1e-3)
    r02 = np.max(np.abs(r02_components(R, f["I"](x))))
    plus, minus = pseudoholo_pm_I(f["bismut_minus"], f["I"], x)
    gap = np.max(np.abs(f["section_modified"](x) - f["chern"](x)))
    print(f"{np.array2string(x, precision=3):>34}  {r02:13.1e}  {plus:8.1e}  {minus:8.3f}  {gap:16.1e}")
