"""Self-contained diagnostic suite behind the ``check`` command.

Each check re-derives an expected quantity through an independent route
(finite differences, Monte Carlo frequencies, closed forms) and compares
the library against it. Checks are grouped by module name so the command
line can filter them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import benchmarks, estimator, linalg, steps
from .problem import GaussianNoiseSpec, gaussian_noisy
from .rng import RngStream
from .solver import SolverConfig, run

__all__ = ["CheckResult", "run_checks", "finite_difference_gradient", "finite_difference_hessian"]


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str


def finite_difference_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient, the independent oracle for exact ones."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def finite_difference_hessian(grad, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of a gradient oracle."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    H = np.zeros((d, d))
    for i in range(d):
        e = np.zeros_like(x)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def _check_linalg(rng) -> list[CheckResult]:
    out = []
    worst_res = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 8))
        m = int(rng.integers(1, d))
        G = rng.standard_normal((m, d))
        Z = linalg.nullspace_basis(G).Z
        worst_res = max(
            worst_res,
            float(np.max(np.abs(G @ Z))),
            float(np.max(np.abs(Z.T @ Z - np.eye(d - m)))),
        )
    out.append(
        CheckResult("linalg", "nullspace residuals", worst_res <= 1e-10, f"worst {worst_res:.2e}")
    )
    worst_gap = -np.inf
    for _ in range(200):
        n = int(rng.integers(1, 7))
        H = rng.standard_normal((n, n))
        H = 0.5 * (H + H.T)
        g = rng.standard_normal(n)
        radius = float(rng.uniform(0.1, 2.0))
        u = linalg.trs_solve(H, g, radius, method="exact")
        uc = linalg.cauchy_point(H, g, radius)
        gap = linalg.model_value(H, g, u) - linalg.model_value(H, g, uc)
        worst_gap = max(worst_gap, gap)
    out.append(
        CheckResult(
            "linalg",
            "exact TRS beats Cauchy point",
            worst_gap <= 1e-10,
            f"worst reduction gap {worst_gap:.2e}",
        )
    )
    return out


def _check_problem(rng) -> list[CheckResult]:
    out = []
    for make in (benchmarks.make_quadratic, benchmarks.make_saddle):
        prob = make()
        oracle = prob.noiseless
        worst = 0.0
        for _ in range(10):
            x = rng.uniform(-2.0, 2.0, size=prob.dim)
            fd_g = finite_difference_gradient(oracle.value, x)
            fd_h = finite_difference_hessian(oracle.gradient, x)
            scale = max(1.0, float(np.max(np.abs(oracle.gradient(x)))))
            worst = max(
                worst,
                float(np.max(np.abs(fd_g - oracle.gradient(x)))) / scale,
                float(np.max(np.abs(fd_h - oracle.hessian(x)))) / scale,
            )
        out.append(
            CheckResult(
                "problem",
                f"finite-difference consistency ({prob.name})",
                worst <= 1e-5,
                f"worst rel err {worst:.2e}",
            )
        )
    prob = gaussian_noisy(benchmarks.make_quadratic(), GaussianNoiseSpec(1e-2))
    x = np.array([0.7, -0.2])
    stream = RngStream(0, ("diag", "noise"))
    vals = prob.sampler.values(x, 10_000, stream)
    f = prob.noiseless.value(x)
    mean_ok = abs(np.mean(vals) - f) <= 4 * 0.1 / 100.0
    var_ok = abs(np.var(vals) - 1e-2) <= 0.1 * 1e-2
    out.append(
        CheckResult(
            "problem",
            "gaussian value moments",
            mean_ok and var_ok,
            f"mean err {abs(np.mean(vals)-f):.2e}, var {np.var(vals):.3e}",
        )
    )
    return out


def _check_estimator(rng) -> list[CheckResult]:
    out = []
    params = estimator.AccuracyParams(alpha=0)
    n = estimator.batch_size(estimator.GRADIENT, 1.0, 1.0, params)
    out.append(
        CheckResult(
            "estimator", "gradient batch rule at unit radius", n == 2223, f"got {n}, want 2223"
        )
    )
    prob = gaussian_noisy(benchmarks.make_quadratic(), GaussianNoiseSpec(1e-2))
    x = np.array([0.4, 0.1])
    g_true = prob.noiseless.gradient(x)
    failures = 0
    trials = 200
    for t in range(trials):
        g_bar, _ = estimator.estimate_gradient(prob, x, 1.0, params, RngStream(t, ("diag",)))
        if np.linalg.norm(g_bar - g_true) > params.kappa_g * 1.0:
            failures += 1
    freq = failures / trials
    out.append(
        CheckResult(
            "estimator",
            "gradient accuracy event frequency",
            freq <= params.p_g,
            f"failure rate {freq:.3f} vs p_g={params.p_g}",
        )
    )
    G = rng.standard_normal((2, 5))
    g = rng.standard_normal(5)
    lam = estimator.estimate_multiplier(G, g)
    resid = g + G.T @ lam
    out.append(
        CheckResult(
            "estimator",
            "multiplier residual in kernel",
            float(np.linalg.norm(G @ resid)) <= 1e-10,
            f"|G resid| = {np.linalg.norm(G @ resid):.2e}",
        )
    )
    return out


def _check_steps(rng, fault: str | None) -> list[CheckResult]:
    out = []
    worst = 0.0
    pred_ok = True
    pred_detail = ""
    for trial in range(100):
        d = int(rng.integers(3, 7))
        m = int(rng.integers(1, d - 1))
        G = rng.standard_normal((m, d))
        c = rng.standard_normal(m)
        grad = rng.standard_normal(d)
        H = rng.standard_normal((d, d))
        H = 0.5 * (H + H.T)
        delta = float(rng.uniform(0.2, 2.0))
        lam = estimator.estimate_multiplier(G, grad)
        grad_l = grad + G.T @ lam
        Z = linalg.nullspace_basis(G).Z
        step = steps.build_trial_step(
            steps.GRADIENT_STEP, c, G, Z, grad, H, grad_l, delta, method="exact"
        )
        split = step.split
        worst = max(
            worst,
            abs(split.normal**2 + split.tangential**2 - delta**2) / delta**2,
            max(0.0, (float(np.linalg.norm(step.dx)) - delta) / delta),
            abs(float(step.w @ step.t))
            / max(np.linalg.norm(step.w) * np.linalg.norm(step.t), 1e-300),
        )
        lin = float(np.linalg.norm(c + G @ step.dx))
        target = (1.0 - step.gamma) * float(np.linalg.norm(c))
        worst = max(worst, abs(lin - target) / max(np.linalg.norm(c), 1e-300) * 1e-2)
        # Merit-parameter escalation must push the model reduction to its
        # threshold; a sign fault here must be caught.
        kkt = float(np.sqrt(grad_l @ grad_l + c @ c))
        h_norm = linalg.spectral_norm(H)
        curv = kkt / h_norm if h_norm > 0 else np.inf
        thr = -0.5 * kkt * min(delta, curv)
        mu = 1.0
        pred = steps.predicted_reduction(grad, H, mu, c, G, step.dx)
        for _ in range(200):
            if pred <= thr + 1e-12 * abs(thr):
                break
            mu *= 1.2
            pred = steps.predicted_reduction(grad, H, mu, c, G, step.dx)
        if fault == "pred-sign":
            pred = -pred
        if pred > thr + 1e-12 * abs(thr):
            pred_ok = False
            pred_detail = f"trial {trial}: pred {pred:.3e} above threshold {thr:.3e}"
    out.append(
        CheckResult("steps", "split/orthogonality/feasibility invariants", worst <= 1e-8, f"worst {worst:.2e}")
    )
    out.append(
        CheckResult("steps", "merit loop reaches reduction threshold", pred_ok, pred_detail or "all trials")
    )
    return out


def _check_solver(rng) -> list[CheckResult]:
    out = []
    prob = benchmarks.make_quadratic()
    cfg = SolverConfig(alpha=0, hessian="identity", kkt_tol=1e-8, max_iters=100, seed=0)
    res = run(prob, np.array([2.0, -3.0]), cfg)
    ok = res.converged and float(np.max(np.abs(res.state.x - 0.5))) <= 1e-6
    out.append(
        CheckResult(
            "solver",
            "quadratic benchmark converges",
            ok,
            f"x={res.state.x}, kkt={res.final_kkt:.2e}",
        )
    )
    noisy = gaussian_noisy(benchmarks.make_saddle(), GaussianNoiseSpec(1e-4))
    cfg = SolverConfig(alpha=1, kkt_tol=1e-4, max_iters=500, seed=7)
    rows = []
    for _ in range(2):
        r = run(noisy, np.array([1.0, 0.005]), cfg)
        rows.append([rec.csv_row() for rec in r.records])
    out.append(
        CheckResult(
            "solver",
            "seeded runs reproduce bitwise",
            rows[0] == rows[1],
            f"{len(rows[0])} iterations compared",
        )
    )
    viol = run(noisy, np.array([1.0, 0.005]), cfg).invariants.total_violations
    out.append(
        CheckResult("solver", "per-iteration invariants", viol == 0, f"{viol} violations")
    )
    return out


def run_checks(module_filter: str | None = None, fault: str | None = None) -> list[CheckResult]:
    """Run the diagnostic suite, optionally restricted to one module.

    ``fault`` is a test hook that corrupts a known quantity so the suite's
    ability to detect regressions can itself be verified.
    """
    rng = np.random.default_rng(20240)
    groups = {
        "linalg": lambda: _check_linalg(rng),
        "problem": lambda: _check_problem(rng),
        "estimator": lambda: _check_estimator(rng),
        "steps": lambda: _check_steps(rng, fault),
        "solver": lambda: _check_solver(rng),
    }
    if module_filter is not None:
        if module_filter not in groups:
            raise ValueError(f"unknown check module {module_filter!r}; pick from {sorted(groups)}")
        return groups[module_filter]()
    results = []
    for fn in groups.values():
        results.extend(fn())
    return results
