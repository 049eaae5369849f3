"""The parameter-free split of the trust radius.

A trial step is w + Z u with the normal part w pulling toward the
linearized constraints and the tangential part Z u reducing the objective
model in the constraint null space. Their radii split the trust radius in
proportion to the rescaled feasibility and optimality residuals, so
breve^2 + tilde^2 = delta^2, and - because the residuals are rescaled by
the Jacobian and Hessian norms - the split ratios do not move when the
objective is multiplied by a constant.
"""

import numpy as np

import trsqp
from trsqp import estimator, linalg, steps

problem = trsqp.make_saddle()
x = np.array([0.8, 0.7])  # infeasible: |x| != 1
delta = 0.5

c = problem.constraint(x)
G = problem.jacobian(x)
Z = linalg.nullspace_basis(G).Z

print(f"at x = {x}: feasibility residual |c| = {np.linalg.norm(c):.4f}")
for scale in (1e-3, 1.0, 1e3):
    grad = scale * problem.noiseless.gradient(x)
    lam = estimator.estimate_multiplier(G, grad)
    grad_l = grad + G.T @ lam
    H = scale * problem.noiseless.hessian(x) + np.tensordot(
        lam, problem.constraint_hessians(x), axes=1
    )
    c_rs, grad_l_rs, _ = steps.rescaled_residuals(c, G, grad_l, H)
    split = steps.split_radius(
        steps.GRADIENT_STEP, delta, float(np.linalg.norm(c_rs)), float(np.linalg.norm(grad_l_rs))
    )
    v, gamma, w = steps.normal_step(c, G, split.normal)
    u = steps.tangential_gradient(H, grad, w, Z, split.tangential)
    dx = w + Z @ u
    print(
        f"objective x {scale:>6g}: normal/delta = {split.normal/delta:.6f}, "
        f"tangential/delta = {split.tangential/delta:.6f}, gamma = {gamma:.6f}, "
        f"|dx| = {np.linalg.norm(dx):.4f} <= {delta}"
    )
    assert abs(split.normal**2 + split.tangential**2 - delta**2) < 1e-12

print("\nthe split ratios and the linearized-feasibility shrink factor are")
print("untouched by the objective scale; only the model values change.")
