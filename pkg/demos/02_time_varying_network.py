"""Random edge activation on a ring, and how fast products of mixing matrices forget.

Half the ring edges are active in a regular round; every B-th round the
whole ring is switched on. Products of the Metropolis matrices approach
``1/m`` at a geometric rate ``alpha * beta ** length``.
"""

import numpy as np

from dsmd.network import (
    MixingSchedule,
    mixing_bound_check,
    sample_matrix,
    schedule_constants,
    transition_product,
    verify_assumption1,
)

sched = MixingSchedule(m=40, topology="ring", activation=0.5, B=2, seed=1)
print(sched)
print("edges", sched.n_edges, "active per regular round", sched.n_active, "xi", sched.xi)

A1 = sample_matrix(sched, 1)
A2 = sample_matrix(sched, 2)  # forced round: full ring
print("round 1: active edges", len(sched.active_edges(1)), "row sums", np.ptp(A1.sum(axis=1)))
print("round 2: active edges", len(sched.active_edges(2)), "symmetric", np.allclose(A2, A2.T))

print(verify_assumption1(sched, T=500))

const = schedule_constants(sched)
print(f"alpha = {const.alpha:.6f}, beta = {const.beta:.9f}")

# the bound is valid but loose: beta is very close to 1 for 40 nodes
for length in (1, 10, 100, 400):
    P = transition_product(sched, length, 1)
    print(f"length {length:4d}: max |P - 1/m| = {np.abs(P - 1 / 40).max():.3e}, bound {const.bound(length):.4f}")

print("worst bound violation over 1000 windows:", mixing_bound_check(sched, samples=1000, max_length=200))
