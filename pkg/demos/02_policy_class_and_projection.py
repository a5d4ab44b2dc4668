"""
The disturbance-action policy class and its projection
======================================================

Policies are H matrix blocks acting on past disturbances on top of a
certified gain: u_t = -K x_t + sum_i M^[i-1] w_{t-i}. The class shrinks
geometrically with the block index, ||M^[i]|| <= 2 kappa_B kappa^3 (1-gamma)^i,
so learning updates must be projected back after every gradient step.
"""
import numpy as np

from onlinectrl.policy import (PolicyParams, admissible_radii, is_admissible,
                               policy_class_diameter, project)

H, n_u, n_x = 5, 2, 2
kappa, gamma, kappa_B = 1.5, 0.4, 1.0

radii = admissible_radii(H, kappa, gamma, kappa_B)
print("per-block radii:", np.round(radii, 4))
print("class diameter D:", policy_class_diameter(max(n_x, n_u), kappa, gamma, kappa_B))

# Take a point far outside the class and project it back.
rng = np.random.default_rng(3)
raw = PolicyParams(4.0 * rng.standard_normal((H, n_u, n_x)))
proj = project(raw, kappa, gamma, kappa_B)
print("raw admissible: ", is_admissible(raw, kappa, gamma, kappa_B))
print("proj admissible:", is_admissible(proj, kappa, gamma, kappa_B))

# The projection clips each block's singular values at that block's radius,
# so blocks already inside are untouched and the largest ones land on the
# boundary exactly.
for i in range(H):
    before = np.linalg.svd(raw.blocks[i], compute_uv=False)[0]
    after = np.linalg.svd(proj.blocks[i], compute_uv=False)[0]
    print(f"  block {i}: top sv {before:.4f} -> {after:.4f} (radius {radii[i]:.4f})")

# Projections never move points apart (the property the regret analysis needs).
a = PolicyParams(rng.standard_normal((H, n_u, n_x)))
b = PolicyParams(rng.standard_normal((H, n_u, n_x)))
d_before = np.linalg.norm(a.blocks - b.blocks)
d_after = np.linalg.norm(project(a, kappa, gamma, kappa_B).blocks
                         - project(b, kappa, gamma, kappa_B).blocks)
print(f"distance {d_before:.4f} -> {d_after:.4f} (nonexpansive)")
