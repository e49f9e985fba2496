"""Where integrability of J^(nabla, I) fails, and where it survives.

Two connections on the flat rank-4 bundle over R^4 share the same
(0,2)-curvature profile sin(x1) dx2 but differ in the fiber factor:

* a traceless rotation E: the twistor structure on T(E, g) is not
  integrable, and [R^{0,2}, J] restricted to E^{0,1}_J pins the failure;
* the identity: R^{0,2} is a scalar, the criterion vanishes identically and
  C(E) stays integrable even though R^{0,2} != 0.

Run with ``python demos/integrability_dichotomy.py``.
"""

from itertools import combinations

import numpy as np

from twistorlab.core_linalg import random_acs
from twistorlab.gallery import build
from twistorlab.twistor_total import TotalChart, integrability_report, total_chart


def max_nijenhuis(chart, y):
    E = np.eye(chart.dim)
    m = chart.space.m
    return max(max(np.max(np.abs(p)) for p in chart.nijenhuis_fd(y, E[k], E[l]))
               for k, l in combinations(range(m), 2))


torus = build("torus_02_control")
spec = torus.spaces[0]
x, J = torus.fields["witness_x"], torus.fields["witness_J"]
chart = TotalChart(spec.space, J, spec.fiber_metric_const)
y = np.concatenate([x, np.zeros(chart.fiber.dim)])
rep = integrability_report(spec.space, x, [J])
print("torus_02_control at the frozen witness")
print(f"  |R^02|              {rep['r02']:.4f}   (trace-free part {rep['r02_trace_free']:.4f})")
print(f"  criterion           {rep['criterion'][0]:.4f}")
print(f"  max |N| (FD)        {max_nijenhuis(chart, y):.4f}")

loop = build("scalar_02_loophole")
space = loop.spaces[0].space
rng = np.random.default_rng(0)
print("\nscalar_02_loophole at random points of C(E)")
for _ in range(3):
    x = loop.chart.sample_points(1, rng)[0]
    J = random_acs(2, rng, scale=1.0)
    rep = integrability_report(space, x, [J])
    ch = total_chart(space, J)
    yy = np.concatenate([x, np.zeros(ch.fiber.dim)])
    print(f"  |R^02| {rep['r02']:.4f}  criterion {rep['criterion'][0]:.1e}  max |N| {max_nijenhuis(ch, yy):.1e}")
