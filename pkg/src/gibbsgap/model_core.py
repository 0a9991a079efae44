"""Model configuration, sufficient statistics, and the exact conditional
parameter maps of the three random-effects models (simple, replicated with a
flat location prior, replicated with a shrinkage location prior).

Every map here is a pure function from numbers to a distribution spec; all
randomness lives in the chain modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DistSpec, Gamma, InverseGamma, Normal

__all__ = [
    "Shrinkage",
    "Hyperparams",
    "DataSummary",
    "ThetaStats",
    "summarize",
    "cond_A_given_theta",
    "cond_mu_given_theta_A",
    "cond_theta_i",
    "noncentrality",
    "cond_eta0_given_B",
    "cond_eta_i_given_eta0_B",
    "cond_B_given_effects",
    "cond_mu_given_beta",
]


@dataclass(frozen=True)
class Shrinkage:
    """Normal shrinkage prior on the location: mean w, precision z."""

    w: float
    z: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError(f"shrinkage precision z must be > 0, got {self.z}")


@dataclass(frozen=True)
class Hyperparams:
    """Prior and model constants: variance prior (a, b), known error
    variance V, optional shrinkage pair (w, z)."""

    a: float
    b: float
    V: float
    shrinkage: Shrinkage | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.V > 0):
            raise ValueError(
                f"a, b, V must all be > 0, got a={self.a}, b={self.b}, V={self.V}"
            )

    @property
    def U(self) -> float:
        """Error precision, 1/V."""
        return 1.0 / self.V

    def require_shrinkage(self) -> Shrinkage:
        if self.shrinkage is None:
            raise ValueError("this operation needs the shrinkage prior (w, z)")
        return self.shrinkage


@dataclass(frozen=True, eq=False)
class DataSummary:
    """Sufficient statistics of a dataset.

    n groups, r replicates per group; grand mean y_bar; per-group means;
    delta = sum of squared deviations of the observations from y_bar
    (for r=1 this is the usual spread statistic of the simple model);
    delta_prime = sum of squared deviations of the group means from y_bar.
    """

    n: int
    r: int
    y_bar: float
    group_means: np.ndarray
    delta: float
    delta_prime: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 groups, got n={self.n}")
        if self.r < 1:
            raise ValueError(f"need at least 1 replicate, got r={self.r}")
        if len(self.group_means) != self.n:
            raise ValueError(
                f"group_means has length {len(self.group_means)}, expected n={self.n}"
            )
        if self.delta < 0 or self.delta_prime < 0:
            raise ValueError("delta and delta_prime must be nonnegative")


@dataclass(frozen=True)
class ThetaStats:
    """Compressed chain state: mean of the random effects and their sum of
    squared deviations from that mean."""

    theta_bar: float
    ss: float

    def __post_init__(self):
        if self.ss < 0:
            raise ValueError(f"ss must be >= 0, got {self.ss}")


def summarize(y, r: int = 1) -> DataSummary:
    """Compute the sufficient statistics of a dataset.

    `y` is a length-n vector when r=1, or an n-by-r matrix when r>1.
    Two-pass summation (numpy's pairwise reduction on centered values), so
    delta stays accurate at n = 1e7 where one-pass formulas cancel badly.
    """
    try:
        arr = np.asarray(y, dtype=float)
    except ValueError as exc:
        raise ValueError(f"ragged or non-numeric input: {exc}") from exc
    if arr.size == 0:
        raise ValueError("empty input")
    if r == 1:
        arr = arr.reshape(-1)
        n = arr.shape[0]
        if n < 2:
            raise ValueError(f"need at least 2 observations, got {n}")
        y_bar = _mean_exact_on_constant(arr)
        delta = float(np.sum((arr - y_bar) ** 2))
        return DataSummary(
            n=n, r=1, y_bar=y_bar, group_means=arr.copy(),
            delta=delta, delta_prime=delta,
        )
    if arr.ndim != 2 or arr.shape[1] != r:
        raise ValueError(
            f"replicated input must be an n-by-{r} matrix, got shape {arr.shape}"
        )
    n = arr.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 groups, got {n}")
    group_means = arr.mean(axis=1)
    y_bar = _mean_exact_on_constant(arr)
    delta = float(np.sum((arr - y_bar) ** 2))
    delta_prime = float(np.sum((group_means - y_bar) ** 2))
    return DataSummary(
        n=n, r=r, y_bar=y_bar, group_means=group_means,
        delta=delta, delta_prime=delta_prime,
    )


def _mean_exact_on_constant(arr: np.ndarray) -> float:
    # Constant data must yield exactly zero spread; the pairwise mean of n
    # equal values can otherwise pick up one ulp of round-off.
    lo = float(arr.min())
    if lo == float(arr.max()):
        return lo
    return float(arr.mean())


# ---------------------------------------------------------------------------
# Simple-model conditionals (one observation per group).
# ---------------------------------------------------------------------------

def cond_A_given_theta(stats: ThetaStats, h: Hyperparams, n: int) -> InverseGamma:
    """Variance conditional: InverseGamma(a + (n-1)/2, b + ss/2)."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    return InverseGamma(shape=h.a + (n - 1) / 2.0, scale=h.b + stats.ss / 2.0)


def cond_mu_given_theta_A(stats: ThetaStats, A: float, n: int) -> Normal:
    """Location conditional: Normal(theta_bar, A/n)."""
    if not A > 0:
        raise ValueError(f"A must be > 0, got {A}")
    return Normal(mean=stats.theta_bar, variance=A / n)


def cond_theta_i(mu: float, A: float, y_i: float, h: Hyperparams) -> Normal:
    """Per-effect conditional: Normal((V*mu + A*y_i)/(A+V), A*V/(A+V))."""
    if not A > 0:
        raise ValueError(f"A must be > 0, got {A}")
    V = h.V
    return Normal(mean=(V * mu + A * y_i) / (A + V), variance=A * V / (A + V))


def noncentrality(A: float, h: Hyperparams, d: DataSummary) -> float:
    """Noncentrality of the sum-of-squares draw: A*delta / (2V(A+V))."""
    if not A > 0:
        raise ValueError(f"A must be > 0, got {A}")
    return A * d.delta / (2.0 * h.V * (A + h.V))


# ---------------------------------------------------------------------------
# Replicated-model conditionals.  The state is transformed: eta_0 is the
# scaled location sqrt(n)*mu, eta_i (and beta_i) are centered effects, and
# B = 1/A is the effect precision.  U = 1/V throughout.
# ---------------------------------------------------------------------------

def cond_eta0_given_B(B: float, d: DataSummary, h: Hyperparams) -> Normal:
    """Scaled-location conditional: Normal(sqrt(n)*y_bar, (B+rU)/(r*B*U))."""
    if not B > 0:
        raise ValueError(f"B must be > 0, got {B}")
    rU = d.r * h.U
    return Normal(mean=math.sqrt(d.n) * d.y_bar, variance=(B + rU) / (rU * B))


def cond_eta_i_given_eta0_B(
    eta0: float, B: float, y_bar_i: float, d: DataSummary, h: Hyperparams
) -> Normal:
    """Centered-effect conditional under the flat location prior."""
    if not B > 0:
        raise ValueError(f"B must be > 0, got {B}")
    rU = d.r * h.U
    mean = rU / (B + rU) * (y_bar_i - eta0 / math.sqrt(d.n))
    return Normal(mean=mean, variance=1.0 / (B + rU))


def cond_B_given_effects(sum_sq_effects: float, h: Hyperparams, n: int) -> Gamma:
    """Precision conditional: Gamma(a + n/2, rate = b + sum_sq/2).

    Rate convention: the density kernel is B**(a+n/2-1) * exp(-B*rate).
    """
    if sum_sq_effects < 0:
        raise ValueError(f"sum of squares must be >= 0, got {sum_sq_effects}")
    return Gamma(shape=h.a + n / 2.0, rate=h.b + sum_sq_effects / 2.0)


def cond_mu_given_beta(beta_bar: float, d: DataSummary, h: Hyperparams) -> Normal:
    """Location conditional under the shrinkage prior:
    Normal((nrU(y_bar - beta_bar) + z*w)/(nrU + z), 1/(nrU + z))."""
    sh = h.require_shrinkage()
    nrU = d.n * d.r * h.U
    mean = (nrU * (d.y_bar - beta_bar) + sh.z * sh.w) / (nrU + sh.z)
    return Normal(mean=mean, variance=1.0 / (nrU + sh.z))
