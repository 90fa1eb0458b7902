"""Whole-curve permutation engine with minP / maxP / medP family statistics.

Entire curves are relabeled between the two groups, which preserves the
within-curve correlation structure.  The corrected p-value is the rank of
the observed family statistic within its permutation null distribution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .statcore import (
    PointwisePValues,
    _as_curves,
    variance_f_p,
    welch_mean_p,
)

FAMILY_KINDS = ("minP", "maxP", "medP")

# relabelings are drawn in fixed-size blocks; block k is keyed by
# (seed, k) so a run is reproducible regardless of execution order
_DRAW_BLOCK = 512

# refuse exhaustive enumeration beyond this many label assignments
_MAX_EXHAUSTIVE = 500_000


@dataclass(frozen=True)
class PointwiseTest:
    """Which univariate test to run at every grid point."""

    kind: str = "mean"  # 'mean' or 'variance'
    direction: str = "greater"  # mean test only
    pooled: bool = False

    def __post_init__(self):
        if self.kind not in ("mean", "variance"):
            raise ValueError(f"unknown pointwise test kind {self.kind!r}")
        if self.direction not in ("greater", "less"):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass
class PermutationConfig:
    n_permutations: int = 50_000
    seed: int = 0
    exhaustive: bool = False

    def __post_init__(self):
        if self.n_permutations < 1:
            raise ValueError("need at least one permutation")


@dataclass
class FamilyTestResult:
    observed_stat: float
    corrected_p: float
    stat_kind: str
    n_used: int
    degenerate_points: int = 0


def family_stat(p, kind):
    """Reduce a p-vector over its domain to a single family statistic.

    ``p`` may be a PointwisePValues or a plain array; for ``medP`` the
    median of an even count is the mean of the two middle order
    statistics.
    """
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family statistic {kind!r}")
    values = p.masked if isinstance(p, PointwisePValues) else np.asarray(p, dtype=float)
    if values.size == 0:
        raise ValueError("empty p-value family")
    if kind == "minP":
        return float(values.min())
    if kind == "maxP":
        return float(values.max())
    return float(np.median(values))


def draw_relabeling(rng, j1, j2):
    """Uniform random assignment of j1 of the j1+j2 curves to group 1.

    Returns a boolean membership vector of length j1+j2.
    """
    if j1 < 1 or j2 < 1:
        raise ValueError("both groups must be nonempty")
    u = rng.random(j1 + j2)
    members = np.zeros(j1 + j2, dtype=bool)
    members[np.argsort(u, kind="stable")[:j1]] = True
    return members


def _block_rng(seed, block):
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), block]))


def _batch_relabelings(seed, start, count, j_total, j1):
    """Membership matrix for permutations [start, start+count)."""
    rows = []
    b0 = start // _DRAW_BLOCK
    b1 = (start + count - 1) // _DRAW_BLOCK
    for block in range(b0, b1 + 1):
        rng = _block_rng(seed, block)
        u = rng.random((_DRAW_BLOCK, j_total))
        lo = max(start, block * _DRAW_BLOCK) - block * _DRAW_BLOCK
        hi = min(start + count, (block + 1) * _DRAW_BLOCK) - block * _DRAW_BLOCK
        rows.append(u[lo:hi])
    u = np.concatenate(rows, axis=0)
    order = np.argsort(u, axis=1, kind="stable")
    members = np.zeros((count, j_total), dtype=bool)
    np.put_along_axis(members, order[:, :j1], True, axis=1)
    return members


def _batch_pvalues(xd, members, j1, j2, test):
    """Pointwise p-values for a batch of relabelings.

    ``xd`` is the pooled (j1+j2, md) data restricted to the tested
    domain, ``members`` a (n, j1+j2) boolean matrix selecting group 1.
    Returns an (n, md) p matrix plus the degenerate-point mask.
    """
    b = members.astype(float)
    s_tot = xd.sum(axis=0)
    q_tot = (xd * xd).sum(axis=0)
    s1 = b @ xd
    q1 = b @ (xd * xd)
    s2 = s_tot - s1
    q2 = q_tot - q1
    mean1 = s1 / j1
    mean2 = s2 / j2
    var1 = np.clip((q1 - s1 * mean1) / (j1 - 1), 0.0, None)
    var2 = np.clip((q2 - s2 * mean2) / (j2 - 1), 0.0, None)
    # the matmul moments leave cancellation residue when curves coincide;
    # snap sub-roundoff variances and mean gaps to exact zero so the
    # degenerate-point policy can fire
    scale = q_tot / (j1 + j2)
    vtol = 1e-10 * scale
    var1 = np.where(var1 <= vtol, 0.0, var1)
    var2 = np.where(var2 <= vtol, 0.0, var2)
    mean2 = np.where(np.abs(mean1 - mean2) ** 2 <= vtol, mean1, mean2)
    if test.kind == "mean":
        return welch_mean_p(mean1, var1, j1, mean2, var2, j2,
                            test.direction, pooled=test.pooled)
    return variance_f_p(var1, j1, var2, j2)


def _permutation_reductions(g1, g2, test, cfg, domain=None):
    """Observed and permuted family statistics for all three reductions.

    Returns ``(observed, counts, n_used, degenerate_points)`` where
    ``observed`` and ``counts`` are dicts keyed by family kind and
    ``counts[k]`` is the number of permuted statistics <= observed.
    """
    x1 = _as_curves(g1)
    x2 = _as_curves(g2)
    if x1.ndim != 2 or x2.ndim != 2 or x1.shape[1] != x2.shape[1]:
        raise ValueError("curve groups must share one evaluation grid")
    j1, j2 = x1.shape[0], x2.shape[0]
    if j1 < 2 or j2 < 2:
        raise ValueError("each group needs at least 2 curves")
    m = x1.shape[1]
    mask = np.ones(m, dtype=bool) if domain is None else np.asarray(domain, dtype=bool)
    if not np.any(mask):
        raise ValueError("domain mask selects no grid points")
    xd = np.vstack([x1, x2])[:, mask]
    j_total = j1 + j2

    identity = np.zeros((1, j_total), dtype=bool)
    identity[0, :j1] = True
    p_obs, deg = _batch_pvalues(xd, identity, j1, j2, test)
    observed = {
        "minP": float(p_obs.min()),
        "maxP": float(p_obs.max()),
        "medP": float(np.median(p_obs, axis=1)[0]),
    }

    n_planned = comb(j_total, j1) if cfg.exhaustive else cfg.n_permutations
    if bool(np.all(deg)):
        # the groups coincide at every tested point: there is no evidence
        # for any one-sided alternative, so the corrected p is 1 rather
        # than the rank of the all-0.5 vector among mixed relabelings
        return observed, dict.fromkeys(FAMILY_KINDS, n_planned), n_planned, int(deg.size)

    counts = dict.fromkeys(FAMILY_KINDS, 0)
    # ties count as <=; the tolerance absorbs ulp-level drift between the
    # batched and single-row BLAS paths
    cut = {k: v + 1e-12 + 1e-9 * v for k, v in observed.items()}

    def tally(members):
        p, _ = _batch_pvalues(xd, members, j1, j2, test)
        counts["minP"] += int(np.count_nonzero(p.min(axis=1) <= cut["minP"]))
        counts["maxP"] += int(np.count_nonzero(p.max(axis=1) <= cut["maxP"]))
        counts["medP"] += int(np.count_nonzero(np.median(p, axis=1) <= cut["medP"]))

    if cfg.exhaustive:
        n_used = comb(j_total, j1)
        if n_used > _MAX_EXHAUSTIVE:
            raise ValueError(f"{n_used} label assignments is too many to enumerate")
        batch = []
        for picks in itertools.combinations(range(j_total), j1):
            row = np.zeros(j_total, dtype=bool)
            row[list(picks)] = True
            batch.append(row)
            if len(batch) == _DRAW_BLOCK:
                tally(np.array(batch))
                batch = []
        if batch:
            tally(np.array(batch))
    else:
        n_used = cfg.n_permutations
        done = 0
        while done < n_used:
            take = min(_DRAW_BLOCK, n_used - done)
            tally(_batch_relabelings(cfg.seed, done, take, j_total, j1))
            done += take

    return observed, counts, n_used, int(np.count_nonzero(deg))


def westfall_young(g1, g2, test, kind, cfg, domain=None):
    """Permutation-corrected family test of two groups of curves.

    Parameters
    ----------
    g1, g2 : StageSample or (J, m) array
    test : PointwiseTest
    kind : {'minP', 'maxP', 'medP'}
    cfg : PermutationConfig
    domain : bool array over the grid, optional

    Returns
    -------
    FamilyTestResult
    """
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family statistic {kind!r}")
    observed, counts, n_used, deg = _permutation_reductions(g1, g2, test, cfg, domain)
    count = counts[kind]
    if not cfg.exhaustive:
        # sampled draws need not include the identity assignment
        count = max(count, 1)
    return FamilyTestResult(
        observed_stat=observed[kind],
        corrected_p=count / n_used,
        stat_kind=kind,
        n_used=n_used,
        degenerate_points=deg,
    )


def westfall_young_all(g1, g2, test, cfg, domain=None):
    """All three family reductions from a single permutation pass."""
    observed, counts, n_used, deg = _permutation_reductions(g1, g2, test, cfg, domain)
    out = {}
    for kind in FAMILY_KINDS:
        count = counts[kind] if cfg.exhaustive else max(counts[kind], 1)
        out[kind] = FamilyTestResult(
            observed_stat=observed[kind],
            corrected_p=count / n_used,
            stat_kind=kind,
            n_used=n_used,
            degenerate_points=deg,
        )
    return out
