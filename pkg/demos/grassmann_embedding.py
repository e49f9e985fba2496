"""The embedding (x, J) -> E^{0,1}_J into the Grassmann bundle of E_C.

Fiberwise the derivative of J -> V^{0,1}_J along J A0 is -A0/2 in the graph
chart.  Over the Hopf surface with nabla^- the total map is holomorphic,
commutes with parallel transport, and lands in maximal isotropic planes.

Run with ``python demos/grassmann_embedding.py``.
"""

import numpy as np

from twistorlab.core_linalg import random_acs, random_tangent
from twistorlab.gallery import build
from twistorlab.grassmann_embed import (
    holomorphicity_residual,
    horizontal_preservation_residual,
    maximal_isotropic_residual,
)
from twistorlab.twistor_fiber import acs_from_plane, fiber_embed, fiber_embed_pushforward, fiber_embed_pushforward_fd

rng = np.random.default_rng(4)

J = random_acs(3, rng, scale=1.0)
A0 = random_tangent(J, rng)
closed = fiber_embed_pushforward(J, J @ A0)
fd = fiber_embed_pushforward_fd(J, J @ A0)
print("fiber C(R^6)")
print(f"  -A0/2 law vs FD           {np.max(np.abs(closed - fd)):.1e}")
print(f"  J -> plane -> J           {np.max(np.abs(acs_from_plane(fiber_embed(J)) - J)):.1e}")

case = build("hopf_skt")
space = case.spaces[0].space
print("\nhopf_skt with nabla^-")
for x in case.chart.sample_points(3, rng):
    J = random_acs(2, rng, g=np.eye(4), scale=1.0)
    v, P = rng.standard_normal(4), random_tangent(J, rng, g=np.eye(4))
    print(f"  holomorphic {holomorphicity_residual(space, x, J, v, P):.1e}"
          f"  transport {horizontal_preservation_residual(space, x, J, v):.1e}"
          f"  isotropic {maximal_isotropic_residual(J, case.fields['g'](x)):.1e}")
