"""Problem abstraction: deterministic equality constraints plus stochastic
objective oracles.

A :class:`Problem` pairs exact constraint oracles (value, Jacobian, and the
per-constraint Hessians) with an objective sampler that draws realizations
of the objective value, gradient, and Hessian from a keyed random stream.
Two wrappers are provided: Gaussian noise injection around exact oracles,
and finite-sum subsampling over a dataset of per-record oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import EmptyDataset, MissingNoiselessOracle
from .rng import RngStream

__all__ = [
    "NoiselessOracle",
    "ObjectiveSampler",
    "Problem",
    "GaussianNoiseSpec",
    "exact_problem",
    "gaussian_noisy",
    "finite_sum_problem",
    "load_labeled_csv",
]


@dataclass(frozen=True)
class NoiselessOracle:
    """Exact objective oracles, available on benchmark problems."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]


class ObjectiveSampler(Protocol):
    """Draws realizations of the stochastic objective.

    A call with the same ``stream`` key identifies one logical sample set:
    evaluating it at two points reuses that set, which is how shared-sample
    value estimation works.
    """

    def values(self, x: np.ndarray, n: int, stream: RngStream) -> np.ndarray: ...

    def gradients(self, x: np.ndarray, n: int, stream: RngStream) -> np.ndarray: ...

    def hessians(self, x: np.ndarray, n: int, stream: RngStream) -> np.ndarray: ...


@dataclass(frozen=True)
class Problem:
    """Equality-constrained stochastic problem.

    Constraint oracles are deterministic; the objective is accessed only
    through ``sampler`` unless a noiseless oracle is attached for
    benchmarking.
    """

    dim: int
    num_constraints: int
    constraint: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    constraint_hessians: Callable[[np.ndarray], np.ndarray]
    sampler: ObjectiveSampler
    noiseless: NoiselessOracle | None = None
    name: str = "problem"

    def __post_init__(self):
        if not (0 < self.num_constraints < self.dim):
            raise ValueError("need 0 < num_constraints < dim")

    def require_noiseless(self) -> NoiselessOracle:
        if self.noiseless is None:
            raise MissingNoiselessOracle(f"problem {self.name!r} has no exact oracle")
        return self.noiseless


@dataclass(frozen=True)
class GaussianNoiseSpec:
    """Variance of the Gaussian noise injected around exact oracles."""

    variance: float = 0.0

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError("variance must be nonnegative")


class _GaussianSampler:
    """Noise model around exact oracles.

    Per draw: value ~ N(f, sigma^2); gradient realized as
    grad + sigma * (z + z0 * ones) with z ~ N(0, I) and scalar z0 ~ N(0, 1),
    whose covariance is sigma^2 (I + ones ones^T); Hessian noise fills the
    upper triangle (diagonal included) with i.i.d. N(0, sigma^2) and mirrors
    it. Draws are keyed by (stream, evaluation point), so identical points
    see identical noise and distinct points are independent.
    """

    def __init__(self, oracle: NoiselessOracle, dim: int, variance: float):
        self._oracle = oracle
        self._dim = dim
        self._sigma = float(np.sqrt(variance))

    def values(self, x, n, stream):
        f = self._oracle.value(x)
        if self._sigma == 0.0:
            return np.full(n, f, dtype=float)
        rng = stream.point_generator(x)
        return f + self._sigma * rng.standard_normal(n)

    def gradients(self, x, n, stream):
        g = self._oracle.gradient(x)
        if self._sigma == 0.0:
            return np.tile(g, (n, 1))
        rng = stream.point_generator(x)
        z = rng.standard_normal((n, self._dim))
        z0 = rng.standard_normal((n, 1))
        return g[None, :] + self._sigma * (z + z0)

    def hessians(self, x, n, stream):
        H = self._oracle.hessian(x)
        d = self._dim
        if self._sigma == 0.0:
            return np.tile(H, (n, 1, 1))
        rng = stream.point_generator(x)
        iu = np.triu_indices(d)
        draws = self._sigma * rng.standard_normal((n, len(iu[0])))
        noise = np.zeros((n, d, d))
        noise[:, iu[0], iu[1]] = draws
        noise[:, iu[1], iu[0]] = draws
        return H[None, :, :] + noise


def exact_problem(
    dim: int,
    num_constraints: int,
    oracle: NoiselessOracle,
    constraint: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    constraint_hessians: Callable[[np.ndarray], np.ndarray],
    name: str = "problem",
) -> Problem:
    """Problem whose sampler reproduces the exact oracle (zero noise)."""
    return Problem(
        dim=dim,
        num_constraints=num_constraints,
        constraint=constraint,
        jacobian=jacobian,
        constraint_hessians=constraint_hessians,
        sampler=_GaussianSampler(oracle, dim, 0.0),
        noiseless=oracle,
        name=name,
    )


def gaussian_noisy(base: Problem, spec: GaussianNoiseSpec) -> Problem:
    """Wrap a problem's exact oracles in the Gaussian noise model.

    Constraints are never perturbed. The wrapped problem keeps the exact
    oracle attached, so true residuals remain available for benchmarking.
    """
    oracle = base.require_noiseless()
    sampler = _GaussianSampler(oracle, base.dim, spec.variance)
    return Problem(
        dim=base.dim,
        num_constraints=base.num_constraints,
        constraint=base.constraint,
        jacobian=base.jacobian,
        constraint_hessians=base.constraint_hessians,
        sampler=sampler,
        noiseless=oracle,
        name=f"{base.name}+noise{spec.variance:g}",
    )


class _FiniteSumSampler:
    """Subsampling over per-record oracles, uniform with replacement.

    Record indices are a deterministic function of the stream key alone, so
    one sample set evaluated at two points reuses the same records.
    """

    def __init__(self, value_fn, gradient_fn, hessian_fn, n_records):
        self._value = value_fn
        self._gradient = gradient_fn
        self._hessian = hessian_fn
        self._n = n_records

    def _indices(self, n, stream):
        return stream.generator().integers(0, self._n, size=n)

    def values(self, x, n, stream):
        return self._value(x, self._indices(n, stream))

    def gradients(self, x, n, stream):
        return self._gradient(x, self._indices(n, stream))

    def hessians(self, x, n, stream):
        return self._hessian(x, self._indices(n, stream))


def finite_sum_problem(
    dim: int,
    value_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    gradient_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    hessian_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_records: int,
    constraint: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    constraint_hessians: Callable[[np.ndarray], np.ndarray],
    num_constraints: int,
    name: str = "finite-sum",
) -> Problem:
    """Problem whose objective is the mean of per-record losses.

    ``value_fn(x, idx)`` (and the gradient/Hessian analogues) evaluate the
    selected records at ``x``; batches are drawn uniformly with replacement.
    The full-data mean serves as the noiseless oracle.
    """
    if n_records < 1:
        raise EmptyDataset("finite-sum problem needs at least one record")
    all_idx = np.arange(n_records)
    oracle = NoiselessOracle(
        value=lambda x: float(np.mean(value_fn(x, all_idx))),
        gradient=lambda x: np.mean(gradient_fn(x, all_idx), axis=0),
        hessian=lambda x: np.mean(hessian_fn(x, all_idx), axis=0),
    )
    sampler = _FiniteSumSampler(value_fn, gradient_fn, hessian_fn, n_records)
    return Problem(
        dim=dim,
        num_constraints=num_constraints,
        constraint=constraint,
        jacobian=jacobian,
        constraint_hessians=constraint_hessians,
        sampler=sampler,
        noiseless=oracle,
        name=name,
    )


def load_labeled_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a dataset CSV: first column is the label in {-1, +1}, the rest
    are features. Returns ``(features, labels)``."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    labels = data[:, 0]
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1 in the first CSV column")
    return data[:, 1:], labels
