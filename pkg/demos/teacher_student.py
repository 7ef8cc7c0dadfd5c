"""
A student network finds the teacher's direction
===============================================

The teacher is ``tanh(theta . x)`` with ``theta = (1, 1)/sqrt(2)``. A
two-layer student with a smooth ReLU is trained by perturbed gradient
descent on squared error plus a small weight penalty. We track the part of
its first-layer weights orthogonal to ``theta``.
"""

import math

import numpy as np

from sospderand import PGDConfig
from sospderand.reparam import MCConfig
from sospderand.nn import init_student, perp_ratio, single_index_teacher, train_student

theta = np.ones(2) / math.sqrt(2)
teacher = single_index_teacher(theta, noise_std=0.1, seed=0)
student = init_student(2, 50, seed=0)

final, traj = train_student(teacher, student, PGDConfig(T=1500, seed=0), 1e-5, MCConfig(2000, seed=0))

for row in traj[:: len(traj) // 6]:
    print(f"iter {row.iter:5d}   |W_perp|/|W| = {row.perp_norm / row.total_norm:.4f}   risk = {row.risk:.4f}")
print(f"final ratio {perp_ratio(final, teacher):.4f} (started at {perp_ratio(student, teacher):.4f})")

# the surviving rows point along +theta or -theta
rows = final.W / np.linalg.norm(final.W, axis=1, keepdims=True)
print("median |cos(row, theta)|:", float(np.median(np.abs(rows @ theta))))
