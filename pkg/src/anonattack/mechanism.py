"""Differentially private release of count workloads.

Two noise distributions are supported for a workload with L1 sensitivity
``s`` and privacy parameter ``eps``:

* geometric: integer noise with pmf ``(1-a)/(1+a) * a**|z|``, ``a = exp(-eps/s)``
* laplace: continuous noise with density ``exp(-|x|/b) / (2b)``, ``b = s/eps``

For the Laplace mechanism the density ratio at any point between a count
vector and one shifted by ``d`` (``||d||_1 <= s``) is
``exp((|x-d|-|x|)/b) <= exp(||d||_1/b) <= exp(eps)`` by the triangle
inequality; :func:`verify_dp_ratio` only enumerates the discrete case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .workload import CountWorkload

MECHANISMS = ("geometric", "laplace", "none")


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    sensitivity: int = 1
    mechanism: str = "geometric"

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ConfigError(f"unknown mechanism {self.mechanism!r}; choose from {MECHANISMS}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if int(self.sensitivity) != self.sensitivity or self.sensitivity < 1:
            raise ConfigError("sensitivity must be a positive integer")


def noise_scale(params: PrivacyParams) -> float:
    """Laplace scale ``b = s/eps`` or geometric ratio ``alpha = exp(-eps/s)``.

    Returns 0 for ``mechanism="none"``.
    """
    if params.mechanism == "laplace":
        return params.sensitivity / params.epsilon
    if params.mechanism == "geometric":
        return math.exp(-params.epsilon / params.sensitivity)
    return 0.0


def geometric_pmf(alpha: float, z):
    """Two-sided geometric pmf ``(1-alpha)/(1+alpha) * alpha**|z|``."""
    if not 0.0 <= alpha < 1.0:
        raise ConfigError("alpha must lie in [0, 1)")
    z = np.abs(np.asarray(z, dtype=np.float64))
    p = (1.0 - alpha) / (1.0 + alpha) * np.power(alpha, z)
    return p if p.ndim else float(p)


def log_geometric_pmf(alpha: float, z):
    z = np.abs(np.asarray(z, dtype=np.float64))
    return math.log((1.0 - alpha) / (1.0 + alpha)) + z * math.log(alpha)


def sample_geometric(alpha: float, rng: np.random.Generator, size=None):
    """Difference of two iid one-sided geometric variables.

    ``rng.geometric(1 - alpha) - 1`` has pmf ``(1-alpha) alpha**k`` on
    ``k >= 0``; the difference of two such draws is the two-sided law above.
    """
    if alpha == 0.0:
        return np.zeros(size, dtype=np.int64) if size is not None else 0
    p = 1.0 - alpha
    return rng.geometric(p, size) - rng.geometric(p, size)


def sample_noise(params: PrivacyParams, rng: np.random.Generator, size=None):
    if params.mechanism == "none":
        return np.zeros(size, dtype=np.int64) if size is not None else 0
    if params.mechanism == "geometric":
        return sample_geometric(noise_scale(params), rng, size)
    return rng.laplace(0.0, noise_scale(params), size)


def release(counts: CountWorkload, params: PrivacyParams, rng: np.random.Generator) -> CountWorkload:
    """Add one independent noise draw to every workload entry.

    Draws are taken in canonical key order (attribute, value, SA value), so
    the output depends only on ``counts`` and the generator state.
    """
    if params.mechanism == "none":
        return counts.with_values(counts.values.copy(), clipped=counts.clipped)
    mask = counts.mask
    noise = np.zeros(counts.values.shape)
    noise[mask] = sample_noise(params, rng, int(mask.sum()))
    return counts.with_values(counts.values + noise, clipped=False)


def clip_nonnegative(counts: CountWorkload) -> CountWorkload:
    return counts.with_values(np.maximum(counts.values, 0.0), clipped=True)


def verify_dp_ratio(params: PrivacyParams, max_shift: int, z_range: int = 40) -> float:
    """Largest output-probability ratio between neighbouring count vectors.

    A neighbour moves the true counts by an integer vector ``d`` with
    ``|d_j| <= max_shift`` and ``||d||_1 <= sensitivity``. Under iid
    geometric noise the ratio at output offset ``z`` is
    ``prod_j pmf(z_j) / pmf(z_j - d_j)``. Per-coordinate ratios are
    enumerated over ``|z| <= z_range`` and combined across coordinates by
    a knapsack over the L1 budget.
    """
    if params.mechanism != "geometric":
        raise ConfigError(
            "verify_dp_ratio enumerates the geometric mechanism only; "
            "the Laplace bound is the analytic triangle-inequality identity"
        )
    if max_shift < 0 or max_shift > params.sensitivity:
        raise ConfigError("max_shift must lie in [0, sensitivity]")
    alpha = noise_scale(params)
    z = np.arange(-z_range, z_range + 1)
    best_single = np.zeros(max_shift + 1)  # log of the best ratio for |d| = k
    for k in range(1, max_shift + 1):
        vals = []
        for d in (k, -k):
            vals.append(np.max(log_geometric_pmf(alpha, z) - log_geometric_pmf(alpha, z - d)))
        best_single[k] = max(vals)
    budget = params.sensitivity
    best = np.zeros(budget + 1)
    for b in range(1, budget + 1):
        best[b] = max(best[b - 1], max(best_single[k] + best[b - k] for k in range(0, min(b, max_shift) + 1)))
    return float(math.exp(best[budget]))
