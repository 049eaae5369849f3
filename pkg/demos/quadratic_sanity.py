"""Deterministic sanity run: an equality-constrained quadratic.

min 0.5 ||x||^2  subject to  x1 + x2 = 1

has the unique solution (0.5, 0.5) with multiplier -0.5. With exact oracles
(zero noise) and the identity Hessian strategy, the solver should land on
it in a handful of iterations.
"""

import numpy as np

import trsqp

problem = trsqp.make_quadratic()
config = trsqp.SolverConfig(
    alpha=0, hessian="identity", kkt_tol=1e-10, max_iters=100, seed=0
)
result = trsqp.run(problem, np.array([3.0, -1.0]), config)

print(f"{'k':>3} {'outcome':<24} {'delta':>10} {'pred':>12} {'ared':>12} {'kkt':>10}")
for rec in result.records:
    print(
        f"{rec.k:>3} {rec.outcome:<24} {rec.delta:>10.3e} "
        f"{rec.pred:>12.3e} {rec.ared:>12.3e} {rec.kkt_true:>10.2e}"
    )

print()
print(f"stopped: {result.stop_reason} after {result.state.k} iterations")
print(f"solution: {result.state.x}   (expected [0.5, 0.5])")
print(f"KKT residual: {result.final_kkt:.3e}")
assert np.max(np.abs(result.state.x - 0.5)) < 1e-8
