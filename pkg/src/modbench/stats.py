"""Multi-seed comparison protocol: noise floor, z-scores, corrections.

The floor is a small set of per-seed aggregate scores for the reference
method. Every other method (usually run at one seed) is scored as
z = (x - floor_mean) / sigma, with sigma defaulting to the floor's unbiased
sample std but overridable with a pinned operational value when reproducing
published tables whose underlying seed values are only available rounded.
Raw two-sided normal-tail p-values are corrected for the 19 simultaneous
hypotheses by Bonferroni, Holm, or Benjamini-Hochberg.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sps


@dataclass
class SeedSet:
    """Per-seed aggregate scores for one method at one scale."""

    values: list
    seeds: list | None = None
    per_task: dict | None = None

    def __post_init__(self):
        self.values = [float(v) for v in self.values]
        if not self.values:
            raise ValueError("SeedSet needs at least one value")
        if self.seeds is not None and len(self.seeds) != len(self.values):
            raise ValueError("seeds and values must pair up 1:1")

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


def sample_std(values) -> float:
    """Unbiased (n-1) sample standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("sample_std needs at least two values")
    return float(v.std(ddof=1))


def zscore(x: float, floor: SeedSet, sigma: float | None = None) -> float:
    """(x - floor mean) / sigma; sigma defaults to the floor's sample std."""
    if sigma is None:
        sigma = sample_std(floor.values)
    if sigma <= 0:
        raise ValueError("noise floor sigma must be positive")
    return (float(x) - floor.mean) / sigma


def p_two_sided(z: float) -> float:
    return float(2.0 * _sps.norm.sf(abs(z)))


def bonferroni_p(p_raw: float, m: int = 19) -> float:
    return min(1.0, m * p_raw)


def bootstrap_floor(floor: SeedSet, other: SeedSet | None = None,
                    n_resamples: int = 10000, rng_seed: int = 0):
    """Percentile bootstrap of the floor mean, plus a paired comparison.

    Resamples the floor values with replacement n_resamples times and takes
    the (2.5, 97.5) percentile interval of the resampled means. If `other`
    is given, its values are resampled from the same generator stream and
    p_leq = Pr(other's resampled mean <= floor's), counting exact ties as
    one half (so a set compared against itself sits at 0.5 by symmetry).
    Fully deterministic for a given rng_seed.
    """
    rng = np.random.default_rng(rng_seed)
    fv = np.asarray(floor.values, dtype=np.float64)
    idx = rng.integers(0, fv.size, size=(n_resamples, fv.size))
    floor_means = fv[idx].mean(axis=1)
    ci = (float(np.percentile(floor_means, 2.5)),
          float(np.percentile(floor_means, 97.5)))
    if other is None:
        return ci, None
    ov = np.asarray(other.values, dtype=np.float64)
    oidx = rng.integers(0, ov.size, size=(n_resamples, ov.size))
    other_means = ov[oidx].mean(axis=1)
    less = np.count_nonzero(other_means < floor_means)
    ties = np.count_nonzero(other_means == floor_means)
    p_leq = (less + 0.5 * ties) / n_resamples
    return ci, float(p_leq)


def welch_t(a: SeedSet, b: SeedSet):
    """Welch's unequal-variance t-test of b against a.

    Returns (t, df, p_two_sided) with t > 0 when b's mean is above a's;
    df by Welch-Satterthwaite.
    """
    av = np.asarray(a.values, dtype=np.float64)
    bv = np.asarray(b.values, dtype=np.float64)
    if av.size < 2 or bv.size < 2:
        raise ValueError("welch_t needs at least two values per side")
    va, vb = av.var(ddof=1), bv.var(ddof=1)
    na, nb = av.size, bv.size
    se2 = va / na + vb / nb
    t = (bv.mean() - av.mean()) / np.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = float(2.0 * _sps.t.sf(abs(t), df))
    return float(t), float(df), p


def correct_multiplicity(p_raw: dict, scheme: str = "bonferroni",
                         alpha: float = 0.05, q: float = 0.05) -> dict:
    """Reject/accept decision per hypothesis under one correction scheme.

    p_raw maps hypothesis name -> raw p-value; m is the number of entries.
    bonferroni: reject when min(1, m*p) < alpha.
    holm: step-down; sorted ascending, reject while p_(i) <= alpha/(m-i+1).
    bh: Benjamini-Hochberg at FDR q; reject the smallest i* hypotheses where
        i* is the largest i with p_(i) <= i*q/m.
    """
    items = sorted(p_raw.items(), key=lambda kv: (kv[1], kv[0]))
    m = len(items)
    if m == 0:
        return {}
    decisions = {k: False for k in p_raw}
    if scheme == "bonferroni":
        for k, p in items:
            decisions[k] = bonferroni_p(p, m) < alpha
    elif scheme == "holm":
        for i, (k, p) in enumerate(items, start=1):
            if p <= alpha / (m - i + 1):
                decisions[k] = True
            else:
                break
        # step-down: nothing after the first failure is rejected
    elif scheme == "bh":
        cut = 0
        for i, (k, p) in enumerate(items, start=1):
            if p <= i * q / m:
                cut = i
        for i, (k, p) in enumerate(items, start=1):
            if i <= cut:
                decisions[k] = True
    else:
        raise ValueError(f"unknown correction scheme {scheme!r}")
    return decisions


def holm_p(p_raw: dict) -> dict:
    """Holm step-down adjusted p-values (monotone, capped at 1)."""
    items = sorted(p_raw.items(), key=lambda kv: (kv[1], kv[0]))
    m = len(items)
    out = {}
    running = 0.0
    for i, (k, p) in enumerate(items, start=1):
        running = max(running, min(1.0, (m - i + 1) * p))
        out[k] = running
    return out


def stouffer_combine(p_one_sided) -> tuple:
    """Combine one-sided p-values with equal weights.

    Z = sum(Phi^-1(1 - p_i)) / sqrt(n); returns (Z, p, n_clamped) where p is
    the one-sided tail of Z. Inputs outside (0, 1) are clamped to
    [1e-12, 1 - 1e-12] and counted in n_clamped.
    """
    p = np.asarray(list(p_one_sided), dtype=np.float64)
    if p.size == 0:
        raise ValueError("stouffer_combine needs at least one p-value")
    clamped = np.clip(p, 1e-12, 1.0 - 1e-12)
    n_clamped = int(np.count_nonzero(clamped != p))
    z = float(_sps.norm.ppf(1.0 - clamped).sum() / np.sqrt(p.size))
    return z, float(_sps.norm.sf(z)), n_clamped


def spearman_rho(scores_a, scores_b) -> float:
    """Spearman rank correlation with average ranks on ties."""
    a = np.asarray(list(scores_a), dtype=np.float64)
    b = np.asarray(list(scores_b), dtype=np.float64)
    if a.size != b.size or a.size < 2:
        raise ValueError("spearman_rho needs two equal-length lists (n >= 2)")
    ra = _sps.rankdata(a)
    rb = _sps.rankdata(b)
    if np.all(ra == ra[0]) or np.all(rb == rb[0]):
        raise ValueError("spearman_rho undefined for a constant ranking")
    return float(np.corrcoef(ra, rb)[0, 1])


@dataclass
class StatReport:
    """z-scored comparison of many methods against one noise floor."""

    floor_mean: float
    sigma: float
    m: int
    alpha: float
    rows: list = field(default_factory=list)

    def row(self, method: str) -> dict:
        for r in self.rows:
            if r["method"] == method:
                return r
        raise KeyError(method)


def stat_report(values: dict, floor: SeedSet, sigma: float | None = None,
                alpha: float = 0.05, q: float = 0.05,
                baseline_tag: str = "baseline",
                seed_sets: dict | None = None) -> StatReport:
    """Score every method against the floor and attach correction decisions.

    values maps tag -> aggregate score. The baseline row (if present) is
    scored but excluded from the hypothesis count m and from corrections.
    seed_sets optionally maps tags to their own multi-seed SeedSet; such
    rows additionally carry a bootstrap CI and a Welch test vs the floor.
    Rows are sorted by descending score; ties broken by tag for determinism.
    """
    if sigma is None:
        sigma = sample_std(floor.values)
    seed_sets = seed_sets or {}
    hypo = {t: v for t, v in values.items() if t != baseline_tag}
    m = len(hypo)
    p_raw = {t: p_two_sided(zscore(v, floor, sigma)) for t, v in hypo.items()}
    p_holm = holm_p(p_raw)
    dec = {s: correct_multiplicity(p_raw, s, alpha=alpha, q=q)
           for s in ("bonferroni", "holm", "bh")}

    report = StatReport(floor_mean=floor.mean, sigma=sigma, m=m, alpha=alpha)
    for tag in sorted(values, key=lambda t: (-values[t], t)):
        v = values[tag]
        z = zscore(v, floor, sigma)
        is_base = tag == baseline_tag
        own = floor if is_base else seed_sets.get(tag)
        row = {
            "method": tag,
            "value": v,
            "delta": v - floor.mean,
            "z": z,
            "p_raw": None if is_base else p_raw[tag],
            "p_bonf": None if is_base else bonferroni_p(p_raw[tag], m),
            "p_holm": None if is_base else p_holm[tag],
            "reject_bonferroni": False if is_base else dec["bonferroni"][tag],
            "reject_holm": False if is_base else dec["holm"][tag],
            "bh_significant": False if is_base else dec["bh"][tag],
            "bootstrap_ci": (bootstrap_floor(own)[0]
                             if own is not None and len(own.values) >= 2
                             else None),
            "welch": (welch_t(floor, own)
                      if not is_base and own is not None
                      and len(own.values) >= 2 and len(floor.values) >= 2
                      else None),
        }
        report.rows.append(row)
    return report
