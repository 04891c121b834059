"""Epoch-DSMD: constant steps in doubling epochs, restarted from the last average.

With ``T`` rounds the method completes ``floor(log2(T/4 + 1))`` epochs and
drops the leftover rounds. A single node shows the faster 1/T behavior; on
a sparse network the consensus error of the larger final step dominates.
"""

import numpy as np

from dsmd.algorithms import epoch_schedule, run_dsmd, run_epoch_dsmd
from dsmd.geometry import ConstraintSet, MirrorGeometry
from dsmd.network import MixingSchedule
from dsmd.problem import global_optimum, random_instance

s = epoch_schedule(4096, sigma_F=1.0)
print("epochs:", s.k_dagger, "rounds used:", s.total_rounds, "of", s.T)
print("epoch ends:", s.boundaries)

cset = ConstraintSet.box(-1.0, 1.0, 10)
geom = MirrorGeometry.euclidean()

for m in (1, 40):
    inst = random_instance(m, cset, geom, noise_std=0.25, seed=3)
    x_star = global_optimum(inst)
    wins = 0
    for seed in range(10):
        sched = MixingSchedule(m, activation=0.5, B=2, seed=seed)
        plain = run_dsmd(inst, geom, sched, 4096, seed=seed)
        ep = run_epoch_dsmd(inst, geom, sched, 4096, seed=seed)
        e_plain = np.mean(np.sum((plain.x_avg - x_star) ** 2, axis=1))
        e_ep = np.mean(np.sum((ep.x - x_star) ** 2, axis=1))
        wins += e_ep <= e_plain
    print(f"m = {m:2d}: epoch version better in {wins}/10 seeds")
