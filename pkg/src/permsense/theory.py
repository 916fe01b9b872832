"""Evaluation of the reconstruction-error bound and Monte-Carlo checks of
the concentration lemmas behind it.

The bound is evaluated literally, with the unspecified constants exposed
as inputs defaulting to 1.0 -- the underlying result only asserts their
existence, so dominance checks that depend on them are diagnostics, not
sharp tests.  Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, DegenerateDenominator
from .linalg import extreme_singular_values, gaussian_matrix
from .model import generate_instance, ProblemConfig
from .solver import EstimatorConfig, lambda_from_theorem, lasso_projected
from .linalg import projector_pair

LEMMA_IDS = ("L1_opnorm", "L1_sigmamin", "L3_pinv_noise", "L4_lasso_error")


@dataclass(frozen=True)
class BoundParams:
    """Inputs of the error bound; c1, c2, epsilon_const are the bound's
    unspecified constants, configurable and surfaced in every report."""

    sigma: float
    d: int
    p: int
    m: int
    k: int
    M: float = 0.0
    alpha: float = 0.1
    c1: float = 1.0
    c2: float = 1.0
    epsilon_const: float = 1.0

    def __post_init__(self):
        if self.p <= self.d:
            raise ConfigInvalid(f"need p > d, got p={self.p}, d={self.d}")
        if self.m < 0 or self.k < 0:
            raise ConfigInvalid("m and k must be nonnegative")
        if self.sigma < 0:
            raise ConfigInvalid("sigma must be nonnegative")
        if self.alpha <= 0:
            raise ConfigInvalid("alpha must be positive")
        if self.M < 0:
            raise ConfigInvalid("M must be nonnegative")
        for name in ("c1", "c2", "epsilon_const"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be positive")

    def denominator(self) -> float:
        return math.sqrt(self.m + self.p) - math.sqrt(self.d) - self.alpha * math.log(self.p)


@dataclass(frozen=True)
class BoundResult:
    """The bound split into its two additive terms, the probability lower
    bound, and the two side conditions."""

    term_known_corr: float
    term_excess: float
    total: float
    prob_lower: float
    k_condition_ok: bool
    alpha_condition_ok: bool

    @property
    def vacuous(self) -> bool:
        """True when the probability lower bound is nonpositive."""
        return self.prob_lower <= 0.0


def theorem1_bound(params: BoundParams) -> BoundResult:
    """Evaluate the error bound and its side conditions literally."""
    denom = params.denominator()
    if denom <= 0:
        raise DegenerateDenominator(
            f"sqrt(m+p) - sqrt(d) - alpha*log(p) = {denom:.6g} <= 0"
        )
    sigma, d, p, m, k = params.sigma, params.d, params.p, params.m, params.k
    alpha, big_m = params.alpha, params.M
    log_p = math.log(p)

    term1 = sigma * math.sqrt(d + 2.0 * math.sqrt(d * alpha * log_p) + 2.0 * alpha * log_p) / denom
    term2 = (
        48.0 * (1.0 + big_m) * sigma / params.epsilon_const
        * (math.sqrt(p) + math.sqrt(d) + log_p) / (denom * denom)
        * (p / (p - d))
        * math.sqrt(k * log_p)
    )
    prob = (
        1.0
        - 2.0 * math.exp(-params.c2 * (p - d))
        - 2.0 * p ** (-big_m * big_m)
        - math.exp(-(log_p ** 2) / 2.0)
        - 2.0 * math.exp(-(alpha ** 2) * (log_p ** 2) / 2.0)
        - math.exp(-alpha * log_p)
    )
    if k == 0:
        k_ok = True
    else:
        k_ok = k <= params.c1 * (p - d) / math.log(p / k) if k < p else False
    alpha_ok = alpha * log_p < math.sqrt(m + p) - math.sqrt(d)
    return BoundResult(
        term_known_corr=term1,
        term_excess=term2,
        total=term1 + term2,
        prob_lower=prob,
        k_condition_ok=bool(k_ok),
        alpha_condition_ok=bool(alpha_ok),
    )


def bound_monotonicity_scan(params: BoundParams, m_grid) -> list[BoundResult]:
    """Bound evaluations over an ascending grid of trusted-row counts."""
    results = []
    for m in sorted(int(v) for v in m_grid):
        results.append(theorem1_bound(
            BoundParams(
                sigma=params.sigma, d=params.d, p=params.p, m=m, k=params.k,
                M=params.M, alpha=params.alpha, c1=params.c1, c2=params.c2,
                epsilon_const=params.epsilon_const,
            )
        ))
    return results


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # Per-trial streams keyed by (seed, trial) so violation counting is
    # order independent and safely parallelizable.
    return np.random.default_rng((seed, trial))


def lemma_empirical_check(
    lemma_id: str,
    *,
    t_or_m: float,
    trials: int,
    seed: int = 0,
    rows: int | None = None,
    cols: int | None = None,
    identity: bool = False,
    noise_sigma: float = 1.0,
    d: int | None = None,
    p: int | None = None,
    k: int | None = None,
    sigma: float | None = None,
    epsilon_const: float = 1.0,
    estimator_config: EstimatorConfig | None = None,
) -> float:
    """Empirical violation rate of one concentration event.

    L1_opnorm     : ||X||_2 >= sqrt(rows) + sqrt(cols) + t    (bound exp(-t^2/2))
    L1_sigmamin   : sigma_min(X) < sqrt(rows) - sqrt(cols) - t (bound 2 exp(-t^2/2))
    L3_pinv_noise : ||X^+ g||^2 > sigma^2 (n + 2 sqrt(n t) + 2 t) / sigma_min(X)^2
                    with g ~ N(0, sigma^2 I) in the row space   (bound exp(-t))
    L4_lasso_error: ||e_hat - e0||_2 > 48 (1+M) sigma (p/(p-d)) eps^-1
                    sqrt(k log p / p) for the projected l1 recovery, with the
                    weight from the theorem at M = t_or_m.  Diagnostic only:
                    the true constants are unknown.

    Each trial draws a fresh realization from a stream keyed by
    (seed, trial); the caller compares the returned rate against the
    lemma's stated probability.
    """
    if lemma_id not in LEMMA_IDS:
        raise ConfigInvalid(f"unknown lemma id {lemma_id!r}")
    if trials < 1:
        raise ConfigInvalid("trials must be at least 1")

    if lemma_id in ("L1_opnorm", "L1_sigmamin"):
        if rows is None or cols is None or rows < cols:
            raise ConfigInvalid("L1 checks need rows >= cols")
        t = t_or_m
        violations = 0
        for trial in range(trials):
            x = gaussian_matrix(rows, cols, _trial_rng(seed, trial))
            s_max, s_min = extreme_singular_values(x)
            if lemma_id == "L1_opnorm":
                violations += s_max >= math.sqrt(rows) + math.sqrt(cols) + t
            else:
                violations += s_min < math.sqrt(rows) - math.sqrt(cols) - t
        return violations / trials

    if lemma_id == "L3_pinv_noise":
        if rows is None or cols is None or rows < cols:
            raise ConfigInvalid("L3 check needs rows >= cols")
        if identity and rows != cols:
            raise ConfigInvalid("identity matrix needs rows == cols")
        t = t_or_m
        violations = 0
        for trial in range(trials):
            rng = _trial_rng(seed, trial)
            if identity:
                x = np.eye(rows)
                s_min = 1.0
            else:
                x = gaussian_matrix(rows, cols, rng)
                _, s_min = extreme_singular_values(x)
            g = rng.standard_normal(rows) * noise_sigma
            pinv_g, *_ = np.linalg.lstsq(x, g, rcond=None)
            lhs = float(pinv_g @ pinv_g)
            rhs = noise_sigma ** 2 * (cols + 2.0 * math.sqrt(cols * t) + 2.0 * t) / s_min ** 2
            violations += lhs > rhs
        return violations / trials

    # L4_lasso_error
    if d is None or p is None or k is None or sigma is None:
        raise ConfigInvalid("L4 check needs d, p, k, sigma")
    cfg = estimator_config or EstimatorConfig()
    big_m = t_or_m
    lam = lambda_from_theorem(sigma, p, big_m, cfg.log_base)
    bound = (
        48.0 * (1.0 + big_m) * sigma * (p / (p - d)) / epsilon_const
        * math.sqrt(k * math.log(p) / p)
    )
    violations = 0
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        config = ProblemConfig(d=d, m=0, p=p, k=k, sigma=sigma, seed=0)
        inst = generate_instance(config, rng)
        proj = projector_pair(inst.a2)
        e_hat, _, _ = lasso_projected(proj, inst.y2, p, lam, cfg)
        e0 = inst.z0 / math.sqrt(p)
        violations += float(np.linalg.norm(e_hat - e0)) > bound
    return violations / trials
