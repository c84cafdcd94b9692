"""Almost-stochastic-dominance test between two loss samples.

The violation ratio epsilon compares the empirical quantile functions of
the two samples on a fixed grid: it is the share of squared
quantile-difference mass on the region where the supposedly better model
(A, the first sample) is actually worse. epsilon near 0 means A's losses
are smaller nearly everywhere; 0.5 means no ordering. The decision rule
rejects "A is not dominant" at level alpha when the bootstrap-corrected
estimate stays below the violation threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

DEFAULT_GRID = 1000
DEFAULT_BOOTSTRAP = 1000
DEFAULT_EPSILON0 = 0.33
DEFAULT_ALPHA = 0.01
TIE_RTOL = 1e-15


class TieError(ValueError):
    """The two samples have identical quantile functions on the grid."""


@dataclass
class DominanceReport:
    epsilon_hat: float
    sigma_hat: float
    threshold: float
    alpha: float
    decision: str               # A_dominates | no_decision | tie
    n: int
    m: int
    bootstrap_b: int
    seed: int
    grid: int

    def to_dict(self) -> dict:
        return {
            "epsilon_hat": self.epsilon_hat, "sigma_hat": self.sigma_hat,
            "threshold": self.threshold, "alpha": self.alpha, "decision": self.decision,
            "n": self.n, "m": self.m, "bootstrap_b": self.bootstrap_b,
            "seed": self.seed, "grid": self.grid,
        }


def _quantiles(sample: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Inverse-ECDF quantiles at probabilities t (t strictly inside (0,1))."""
    srt = np.sort(sample)
    idx = np.clip(np.ceil(t * len(srt)).astype(int) - 1, 0, len(srt) - 1)
    return srt[idx]


def _epsilon(x: np.ndarray, y: np.ndarray, grid: int) -> tuple[float, float, float]:
    """Returns (epsilon, violation mass, total mass) on the midpoint grid."""
    t = (np.arange(grid) + 0.5) / grid
    qx = _quantiles(x, t)
    qy = _quantiles(y, t)
    diff = qx - qy
    sq = diff * diff
    total = float(sq.sum())
    violation = float(sq[diff > 0].sum())
    if total == 0.0:
        return 0.0, violation, total
    return violation / total, violation, total


def epsilon_hat(x, y, grid: int = DEFAULT_GRID) -> float:
    """Violation ratio of sample x (model A) against sample y (model B).

    Raises TieError when the quantile functions coincide everywhere on the
    grid (relative to the scale of the samples).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2 or len(y) < 2:
        raise ValueError("epsilon_hat: need at least 2 values per sample")
    if grid < 100:
        raise ValueError("epsilon_hat: grid must be >= 100")
    eps, _, total = _epsilon(x, y, grid)
    scale = float(np.mean(np.concatenate([x, y]) ** 2))
    if total <= TIE_RTOL * max(1.0, scale):
        raise TieError("epsilon_hat: all quantile differences are zero")
    return eps


def dominance_test(x, y, epsilon0: float = DEFAULT_EPSILON0, alpha: float = DEFAULT_ALPHA,
                   bootstrap_b: int = DEFAULT_BOOTSTRAP, seed: int = 0,
                   grid: int = DEFAULT_GRID) -> DominanceReport:
    """Decide whether sample x (model A) almost stochastically dominates y.

    sigma is the standard deviation of epsilon over seeded bootstrap
    resamples (x and y resampled independently, one derived seed per
    replicate, so the result is independent of scheduling). A_dominates is
    declared when epsilon_hat <= epsilon0 - z_{1-alpha} * sigma.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if bootstrap_b < 200:
        raise ValueError("dominance_test: bootstrap_b must be >= 200")
    base = dict(threshold=epsilon0, alpha=alpha, n=len(x), m=len(y),
                bootstrap_b=bootstrap_b, seed=seed, grid=grid)
    try:
        eps = epsilon_hat(x, y, grid)
    except TieError:
        return DominanceReport(epsilon_hat=0.5, sigma_hat=0.0, decision="tie", **base)

    replicates = np.empty(bootstrap_b)
    for k in range(bootstrap_b):
        rng = np.random.default_rng([seed, k])
        xs = x[rng.integers(0, len(x), size=len(x))]
        ys = y[rng.integers(0, len(y), size=len(y))]
        eps_k, _, total = _epsilon(xs, ys, grid)
        replicates[k] = eps_k if total > 0 else 0.5
    sigma = float(np.std(replicates))
    z = NormalDist().inv_cdf(1.0 - alpha)
    decision = "A_dominates" if eps <= epsilon0 - z * sigma else "no_decision"
    return DominanceReport(epsilon_hat=eps, sigma_hat=sigma, decision=decision, **base)


def read_losses(path) -> np.ndarray:
    """Read a loss-sample file: one real number per line."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{line_no}: not a number: {line!r}") from None
    return np.asarray(values, dtype=np.float64)
