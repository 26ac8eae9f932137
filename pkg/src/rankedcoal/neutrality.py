"""Neutrality tests on tree balance: G_E, W_F, W_SE, and a Hotelling
baseline, plus the Monte-Carlo level/power harness they are judged by.

All statistics depend on a sample only through its means and E-counts,
so the harness never materializes F-matrices.
"""

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from scipy.stats import chi2, norm

from ._common import ValidationError
from .betasplit import BetaConfig, sample_beta_stats
from .fmatrix import nonfixed_vector

DEFAULT_K = 10
MIN_EXPECTED = 5.0
EIG_FLOOR = 1e-12


@dataclass
class TestReport:
    statistic: float
    null_dist: str
    p_value: float
    config: dict


@dataclass
class SampleStats:
    """Sufficient summaries: mean non-fixed vector, mean S and E, E values."""

    n: int
    m: int
    nf_mean: np.ndarray
    s_mean: float
    e_mean: float
    e_values: np.ndarray

    @classmethod
    def from_fmatrices(cls, sample):
        if not sample:
            raise ValidationError("empty sample")
        n = sample[0].n
        if any(f.n != n for f in sample):
            raise ValidationError("mixed n in sample")
        nf = np.stack([nonfixed_vector(f) for f in sample])
        e_values = np.array([int(f.entries[-1].sum()) for f in sample], dtype=np.int64)
        return cls(
            n=n,
            m=len(sample),
            nf_mean=nf.mean(axis=0),
            s_mean=float(nf.sum(axis=1).mean()),
            e_mean=float(e_values.mean()),
            e_values=e_values,
        )

    @classmethod
    def from_arrays(cls, n, s, e, nf):
        return cls(
            n=n,
            m=len(s),
            nf_mean=nf.mean(axis=0),
            s_mean=float(np.mean(s)),
            e_mean=float(np.mean(e)),
            e_values=np.asarray(e, dtype=np.int64),
        )


def _coerce_sample(sample):
    if isinstance(sample, SampleStats):
        return sample
    return SampleStats.from_fmatrices(list(sample))


def _as_float(arr):
    return np.asarray(arr, dtype=np.float64) if np.asarray(arr).dtype == object else np.asarray(arr, dtype=np.float64)


def sym_inv_sqrt(sigma, floor=EIG_FLOOR):
    """The symmetric PSD inverse square root of a covariance matrix."""
    sigma = _as_float(sigma)
    vals, vecs = np.linalg.eigh((sigma + sigma.T) / 2)
    if vals.min() < floor:
        raise ValidationError(
            f"covariance is numerically singular (smallest eigenvalue {vals.min():.3e})"
        )
    return (vecs / np.sqrt(vals)) @ vecs.T


@dataclass
class BoxScheme:
    """Right-closed value boxes over the support of E with null probs."""

    uppers: list
    probs: np.ndarray

    @property
    def K(self):
        return len(self.uppers)

    def counts(self, values):
        edges = np.asarray(self.uppers[:-1], dtype=np.float64)
        idx = np.searchsorted(edges, values, side="right")
        return np.bincount(idx, minlength=self.K)


def e_boxes(null_E, K=DEFAULT_K, m=None, min_expected=MIN_EXPECTED):
    """Equiprobable boxes from the null E-distribution, merged until
    every expected count m p_k reaches ``min_expected``."""
    from .phasetype import dph_pmf_range

    if K < 2:
        raise ValidationError(f"need at least 2 boxes, got K = {K}")
    if m is None or m < 1:
        raise ValidationError("sample size m required for expected counts")
    cap = 4 * null_E.order + 100
    pmf = np.array([float(v) for v in dph_pmf_range(null_E, cap)])
    total = pmf.sum()
    if total < 1 - 1e-8:
        raise ValidationError(f"E PMF sums to {total}; support cap too small")
    pmf = pmf / total
    support = np.nonzero(pmf > 1e-15)[0]
    lo, hi = int(support[0]), int(support[-1])
    uppers = []
    probs = []
    cum = 0.0
    box = 0.0
    for v in range(lo, hi + 1):
        box += pmf[v]
        cum += pmf[v]
        if cum >= (len(uppers) + 1) / K * pmf[lo:hi + 1].sum() and v < hi:
            # pmf[v] is P(E = v + 1), so the right-open upper is v + 2
            uppers.append(v + 2)
            probs.append(box)
            box = 0.0
    uppers.append(hi + 2)
    probs.append(box)
    probs = np.array(probs)
    probs = probs / probs.sum()
    while len(uppers) > 1 and (m * probs < min_expected).any():
        k = int(np.argmin(m * probs))
        j = k + 1 if k + 1 < len(uppers) else k - 1
        a, b = sorted((k, j))
        probs[a] += probs[b]
        probs = np.delete(probs, b)
        del uppers[a]
    if len(uppers) < 2:
        raise ValidationError(
            f"boxing degenerated to {len(uppers)} box(es); increase m or lower K"
        )
    return BoxScheme(uppers=uppers, probs=probs)


def test_GE(sample, null_E, K=DEFAULT_K, boxes=None):
    """Likelihood-ratio test of the E distribution against its null."""
    stats = _coerce_sample(sample)
    if boxes is None:
        boxes = e_boxes(null_E, K=K, m=stats.m)
    observed = boxes.counts(stats.e_values)
    expected = stats.m * boxes.probs
    statistic = 2.0 * sum(
        o * log(o / a) for o, a in zip(observed, expected) if o > 0
    )
    df = boxes.K - 1
    p = float(chi2.sf(statistic, df))
    return TestReport(
        statistic=float(statistic),
        null_dist=f"chi2({df})",
        p_value=p,
        config={"n": stats.n, "m": stats.m, "K": boxes.K,
                "boxes": list(boxes.uppers), "engine": "GE"},
    )


def test_WF(sample, mean, sigma):
    """Signed CLT statistic on the mean non-fixed vector."""
    stats = _coerce_sample(sample)
    mean = _as_float(mean)
    n, m = stats.n, stats.m
    q = (n - 2) * (n - 3) // 2
    if len(mean) != q:
        raise ValidationError(f"mean vector must have length {q}, got {len(mean)}")
    root = sym_inv_sqrt(sigma)
    diff = stats.nf_mean - mean
    statistic = sqrt(2 * m / ((n - 2) * (n - 3))) * float((root @ diff).sum())
    p = 2 * float(norm.sf(abs(statistic)))
    return TestReport(
        statistic=statistic,
        null_dist="normal",
        p_value=p,
        config={"n": n, "m": m, "K": None, "boxes": None, "engine": "WF"},
    )


def test_WSE(sample, mu_se, sigma_se):
    """Signed CLT statistic on the (S, E) pair."""
    stats = _coerce_sample(sample)
    mu_se = _as_float(mu_se)
    root = sym_inv_sqrt(sigma_se)
    diff = np.array([stats.s_mean, stats.e_mean]) - mu_se
    statistic = sqrt(stats.m / 2) * float((root @ diff).sum())
    p = 2 * float(norm.sf(abs(statistic)))
    return TestReport(
        statistic=statistic,
        null_dist="normal",
        p_value=p,
        config={"n": stats.n, "m": stats.m, "K": None, "boxes": None, "engine": "WSE"},
    )


def test_hotelling(sample, mean, sigma):
    """Chi-square baseline m (Fbar - M)' Sigma^{-1} (Fbar - M)."""
    stats = _coerce_sample(sample)
    mean = _as_float(mean)
    root = sym_inv_sqrt(sigma)
    diff = root @ (stats.nf_mean - mean)
    statistic = stats.m * float(diff @ diff)
    df = len(mean)
    p = float(chi2.sf(statistic, df))
    return TestReport(
        statistic=statistic,
        null_dist=f"chi2({df})",
        p_value=p,
        config={"n": stats.n, "m": stats.m, "K": None, "boxes": None, "engine": "HT"},
    )


@dataclass
class KingmanNull:
    """Everything the tests need under the Kingman null, as floats."""

    n: int
    mean: np.ndarray
    sigma: np.ndarray
    mu_se: np.ndarray
    sigma_se: np.ndarray
    e_dph: object


def kingman_null(n):
    from .bcp import bcp_E_distribution
    from .feedforward import nonfixed_moments, se_moments
    from .statespace import enumerate_states

    space = enumerate_states(n)
    summary = nonfixed_moments(space)
    mu_se, sigma_se = se_moments(space, summary=summary)
    return KingmanNull(
        n=n,
        mean=_as_float(summary.mean),
        sigma=_as_float(summary.cov),
        mu_se=_as_float(mu_se),
        sigma_se=_as_float(sigma_se),
        e_dph=bcp_E_distribution(n, mode="float"),
    )


ALL_TESTS = ("GE", "WF", "WSE", "HT")


def run_tests(sample, null, tests=ALL_TESTS, K=DEFAULT_K, boxes=None):
    """All requested reports against a prepared null."""
    stats = _coerce_sample(sample)
    out = {}
    for name in tests:
        if name == "GE":
            out[name] = test_GE(stats, null.e_dph, K=K, boxes=boxes)
        elif name == "WF":
            out[name] = test_WF(stats, null.mean, null.sigma)
        elif name == "WSE":
            out[name] = test_WSE(stats, null.mu_se, null.sigma_se)
        elif name == "HT":
            out[name] = test_hotelling(stats, null.mean, null.sigma)
        else:
            raise ValidationError(f"unknown test {name!r}")
    return out


def replicate_statistics(null, beta, m, replicates, seed, tests=ALL_TESTS, K=DEFAULT_K):
    """Per-replicate statistics from independent seeded streams."""
    n = null.n
    boxes = e_boxes(null.e_dph, K=K, m=m) if "GE" in tests else None
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(replicates)
    out = {name: np.empty(replicates) for name in tests}
    config = BetaConfig(beta=beta, n=n, seed=0)
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        s, e, nf = sample_beta_stats(config, m, rng=rng)
        stats = SampleStats.from_arrays(n, s, e, nf)
        reports = run_tests(stats, null, tests=tests, K=K, boxes=boxes)
        for name in tests:
            out[name][r] = reports[name].statistic
    return out, boxes


def _rejections(stats_by_test, null, boxes, alpha):
    n = null.n
    q = (n - 2) * (n - 3) // 2
    z = norm.isf(alpha / 2)
    out = {}
    for name, values in stats_by_test.items():
        if name == "GE":
            out[name] = values > chi2.isf(alpha, boxes.K - 1)
        elif name in ("WF", "WSE"):
            out[name] = np.abs(values) > z
        else:
            out[name] = values > chi2.isf(alpha, q)
    return out


def power_curve(beta_grid, n, m, replicates, seed, alpha=0.05,
                tests=ALL_TESTS, K=DEFAULT_K, null=None):
    """Rejection rates per (beta, test) with Monte-Carlo standard errors.

    Deterministic given the seed: stream g of the grid uses the g-th
    spawned child sequence.
    """
    if null is None:
        null = kingman_null(n)
    grid_seeds = np.random.SeedSequence(seed).spawn(len(beta_grid))
    rows = []
    for g, beta in enumerate(beta_grid):
        stats_by_test, boxes = replicate_statistics(
            null, beta, m, replicates, grid_seeds[g], tests=tests, K=K
        )
        rejected = _rejections(stats_by_test, null, boxes, alpha)
        for name in tests:
            rate = float(np.mean(rejected[name]))
            se = sqrt(rate * (1 - rate) / replicates)
            rows.append({
                "beta": float(beta), "test": name, "m": m, "replicates": replicates,
                "rejection_rate": rate, "mc_se": se,
            })
    return rows
