"""Type II error study on simulated Gaussian-process curve groups.

Each run draws a shared latent curve from a squared-exponential GP,
builds two groups of noisy copies, perturbs one group in the quantile
tails, and runs the two tail mean tests.  The perturbed group plays the
role of the earlier (rougher) stage: the perturbation raises the peaks
region and deepens the valleys region, so both tail tests are oriented
toward detecting the improvement.  Failures to reject are type II
errors; a delta-free variant measures the type I error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .permutation import PermutationConfig, PointwiseTest, westfall_young

# Cholesky jitter escalation, relative to sigma_f^2
_JITTER_START = 1e-10
_JITTER_MAX = 1e-6


@dataclass
class SimConfig:
    n_curves_per_group: int = 9
    n_input_points: int = 100
    sigma_f: float = 5.0
    theta: float = 0.2
    sigma_eps: float = 0.5
    tau: float = 0.25
    alpha: float = 0.03
    runs: int = 1000
    perm: PermutationConfig = field(default_factory=lambda: PermutationConfig(n_permutations=2000))
    seed: int = 0
    null_model: bool = False  # force delta to 0 for type I studies

    def __post_init__(self):
        if min(self.sigma_f, self.theta, self.sigma_eps) <= 0:
            raise ValueError("scale parameters must be positive")
        if self.runs < 1:
            raise ValueError("need at least one run")
        if self.n_curves_per_group < 2:
            raise ValueError("need at least two curves per group")


@dataclass
class SimResult:
    type2_upper: float
    type2_lower: float
    avg_l2_pct: float
    runs_used: int


def se_kernel(x, x2, sigma_f, theta):
    """Squared exponential covariance sigma_f^2 * exp(-0.5 ((x-x')/theta)^2)."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    d = (np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)) / theta
    return sigma_f**2 * np.exp(-0.5 * d * d)


def perturbation(x):
    """Tail perturbation delta(x), implemented exactly as defined.

    -1/3 * sin(pi (x - 0.2) / 0.6) on x <= 0.25, zero on the middle
    body, +1/3 * sin(pi (x - 0.2) / 0.6) on x >= 0.75.  The jump
    discontinuities at 0.25 and 0.75 are intentional.
    """
    x = np.asarray(x, dtype=float)
    s = np.sin(np.pi * (x - 0.2) / 0.6) / 3.0
    out = np.where(x <= 0.25, -s, np.where(x >= 0.75, s, 0.0))
    if out.ndim == 0:
        return float(out)
    return out


def _chol_with_jitter(k, sigma_f):
    jitter = _JITTER_START * sigma_f**2
    while True:
        try:
            return np.linalg.cholesky(k + jitter * np.eye(k.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > _JITTER_MAX * sigma_f**2:
                raise


def sample_gp_groups(cfg, rng):
    """One run's input points, latent curve, and two curve groups.

    The latent z(x) is shared between the groups, so with delta forced
    to zero the groups are exchangeable.  Noise is iid per curve and
    evaluation point.

    Returns ``(x, z, group1, group2)`` with groups of shape (N, n).
    """
    n = cfg.n_input_points
    x = np.sort(rng.uniform(0.0, 1.0, n))
    k = se_kernel(x[:, None], x[None, :], cfg.sigma_f, cfg.theta)
    chol = _chol_with_jitter(k, cfg.sigma_f)
    z = chol @ rng.standard_normal(n)
    delta = np.zeros(n) if cfg.null_model else perturbation(x)
    shape = (cfg.n_curves_per_group, n)
    group1 = z + rng.normal(0.0, cfg.sigma_eps, shape)
    group2 = z + delta + rng.normal(0.0, cfg.sigma_eps, shape)
    return x, z, group1, group2


def l2_distance_pct(mu1, mu2, x=None):
    """100 * ||mu1 - mu2|| / ||mu1||, L2 norms by trapezoidal quadrature."""
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    norm1 = np.sqrt(np.trapezoid(mu1 * mu1, x=x))
    if norm1 == 0:
        raise ValueError("reference mean function has zero L2 norm")
    diff = mu1 - mu2
    return 100.0 * np.sqrt(np.trapezoid(diff * diff, x=x)) / norm1


def run_tail_tests(x, prev, curr, tau, perm_cfg):
    """Upper- and lower-tail mean tests on raw curve groups.

    Same construction as the stage-pair tests: prev > curr on x <= tau,
    prev < curr on x >= 1 - tau, both maxP-combined.
    """
    upper = westfall_young(
        prev, curr, PointwiseTest(kind="mean", direction="greater"),
        "maxP", perm_cfg, domain=x <= tau)
    lower = westfall_young(
        prev, curr, PointwiseTest(kind="mean", direction="less"),
        "maxP",
        PermutationConfig(n_permutations=perm_cfg.n_permutations,
                          seed=perm_cfg.seed ^ 1,
                          exhaustive=perm_cfg.exhaustive),
        domain=x >= 1.0 - tau)
    return upper, lower


def estimate_type2(cfg):
    """Monte Carlo type II error of the two tail tests.

    Each tail is compared to cfg.alpha directly (no Bonferroni inside
    the simulation).  Deterministic given cfg.seed; run r of a master
    seed reuses the same draws for any smaller group count, so power is
    comparable across group sizes.
    """
    miss_upper = 0
    miss_lower = 0
    l2_total = 0.0
    for run in range(cfg.runs):
        run_rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(run,))))
        x, z, group1, group2 = sample_gp_groups(cfg, run_rng)
        delta = np.zeros_like(x) if cfg.null_model else perturbation(x)
        l2_total += l2_distance_pct(z, z + delta, x=x)
        perm_cfg = PermutationConfig(
            n_permutations=cfg.perm.n_permutations,
            seed=(cfg.perm.seed << 20) ^ run,
            exhaustive=cfg.perm.exhaustive,
        )
        upper, lower = run_tail_tests(x, group2, group1, cfg.tau, perm_cfg)
        if upper.corrected_p > cfg.alpha:
            miss_upper += 1
        if lower.corrected_p > cfg.alpha:
            miss_lower += 1
    return SimResult(
        type2_upper=miss_upper / cfg.runs,
        type2_lower=miss_lower / cfg.runs,
        avg_l2_pct=l2_total / cfg.runs,
        runs_used=cfg.runs,
    )
