"""Mirror steps on the simplex and the box.

The entropic step is multiplicative weights; the Euclidean step is a
projected gradient step. Both are Bregman projections of a dual step.
"""

import numpy as np

from dsmd.geometry import (
    ConstraintSet,
    MirrorGeometry,
    bregman_divergence,
    entropic_step,
    mirror_step,
    project_simplex,
)

rng = np.random.default_rng(0)
simplex = ConstraintSet.simplex(5)
ent = MirrorGeometry.entropy()
euc = MirrorGeometry.euclidean()

x = simplex.sample(rng)
g = rng.normal(size=5)
print("x               ", np.round(x, 4))
print("g               ", np.round(g, 4))

# generic mirror step vs closed form
z = mirror_step(ent, simplex, x, g, eta=0.5)
print("entropic step   ", np.round(z, 4))
print("closed form diff", np.max(np.abs(z - entropic_step(x, g, 0.5))))

# Euclidean step on the simplex: gradient step + sort-and-threshold projection
z2 = mirror_step(euc, simplex, x, g, eta=0.5)
print("euclidean step  ", np.round(z2, 4))
print("same as project ", np.allclose(z2, project_simplex(x - 0.5 * g)))

# KL is the Bregman divergence of the negative entropy
print("KL(z || x)      ", bregman_divergence(ent, z, x))

# huge steps stay finite: exponents are shifted before exp
print("eta = 1e6       ", np.round(entropic_step(x, g, 1e6), 4))

box = ConstraintSet.box(-1.0, 1.0, 3)
y = np.array([0.9, -0.2, 0.0])
print("box step        ", mirror_step(euc, box, y, np.array([-5.0, 1.0, 0.0]), eta=0.1))
