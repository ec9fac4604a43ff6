"""Descriptive statistics, two-sample tests, bootstrap, and power analysis.

All randomized procedures take an explicit 64-bit seed and are
bit-reproducible; there is no global RNG state. The t and normal tail
functions are computed locally (continued fraction / rational
approximation) so p-values do not depend on an external stats stack.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

__all__ = [
    "SampleSummary",
    "TestResult",
    "PowerSpec",
    "summarize",
    "welch_t_test",
    "permutation_test",
    "bootstrap_mean_diff_ci",
    "required_sample_size",
    "norm_cdf",
    "norm_ppf",
    "student_t_two_sided_p",
]

# Smallest positive double; reported instead of an impossible p = 0.
TINY_P = math.ulp(0.0)

# Default ceiling on full enumeration in exact permutation mode.
EXACT_PERMUTATION_CAP = 200_000

# Rows per chunk are capped so resampling matrices stay ~32 MB.
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class SampleSummary:
    """Count, mean, and unbiased (n-1) variance of one sample.

    variance is None when n == 1 (undefined).
    """

    n: int
    mean: float
    variance: float | None


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-sample test.

    method is "welch-t", "permutation-exact", or "permutation-montecarlo".
    detail carries the Welch degrees of freedom or the permutation count;
    it is None when degenerate (both variances zero). p_value lies in
    (0, 1].
    """

    method: str
    statistic: float
    p_value: float
    detail: float | None
    degenerate: bool = False


@dataclass(frozen=True)
class PowerSpec:
    """Inputs for a two-group mean-difference sample size calculation."""

    delta: float
    sigma: float
    alpha: float
    power: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta != 0):
            raise ValueError(f"delta must be finite and non-zero, got {self.delta}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")
        if not 0 < self.power < 1:
            raise ValueError(f"power must be in (0,1), got {self.power}")


# ---------------------------------------------------------------------------
# Descriptive statistics
# ---------------------------------------------------------------------------

def summarize(samples: Sequence[float]) -> SampleSummary:
    """Single-pass (Welford) mean and unbiased variance.

    Order of the input changes the result only at floating rounding
    level (<= 1e-12 relative).
    """
    n = 0
    mean = 0.0
    m2 = 0.0
    for x in samples:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"non-finite sample value {x!r} at position {n}")
        n += 1
        d = x - mean
        mean += d / n
        m2 += d * (x - mean)
    if n == 0:
        raise ValueError("cannot summarize an empty sample")
    variance = m2 / (n - 1) if n >= 2 else None
    if variance is not None and variance < 0.0:  # rounding guard
        variance = 0.0
    return SampleSummary(n=n, mean=mean, variance=variance)


# ---------------------------------------------------------------------------
# Tail functions (local implementations)
# ---------------------------------------------------------------------------

def norm_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# Acklam's rational approximation for the normal quantile, then one
# Halley refinement with erfc; absolute error is near machine epsilon.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def norm_ppf(p: float) -> float:
    """Standard normal quantile, accurate to ~1 ulp over (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must be in (0,1), got {p}")
    a, b, c, d = _PPF_A, _PPF_B, _PPF_C, _PPF_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # Halley step against the exact CDF.
    e = norm_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability P(|T_df| >= |t|)."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be > 0, got {df}")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    p = _betainc_reg(df / 2.0, 0.5, x)
    return min(1.0, max(TINY_P, p))


# ---------------------------------------------------------------------------
# Two-sample tests
# ---------------------------------------------------------------------------

def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Welch's unequal-variance two-sample t-test, two-sided.

    Degenerate inputs (both groups constant): equal means report p = 1;
    unequal means report the smallest positive p with the degenerate
    flag set.
    """
    sa = summarize(a)
    sb = summarize(b)
    if sa.n < 2 or sb.n < 2:
        raise ValueError(
            f"welch_t_test needs n >= 2 per group, got {sa.n} and {sb.n}"
        )
    assert sa.variance is not None and sb.variance is not None
    diff = sa.mean - sb.mean
    va_n = sa.variance / sa.n
    vb_n = sb.variance / sb.n
    se2 = va_n + vb_n
    if se2 == 0.0:
        if diff == 0.0:
            return TestResult("welch-t", 0.0, 1.0, None, degenerate=True)
        return TestResult(
            "welch-t", math.copysign(math.inf, diff), TINY_P, None, degenerate=True
        )
    t = diff / math.sqrt(se2)
    df = se2 * se2 / (
        va_n * va_n / (sa.n - 1) + vb_n * vb_n / (sb.n - 1)
    )
    p = student_t_two_sided_p(t, df)
    return TestResult("welch-t", t, p, df)


def _mean_diff_tolerance(pooled: np.ndarray) -> float:
    # Re-summation noise guard so float ties count as ties.
    scale = float(np.max(np.abs(pooled))) if pooled.size else 0.0
    return 1e-12 * scale


def permutation_test(
    a: Sequence[float],
    b: Sequence[float],
    mode: str = "montecarlo",
    iterations: int = 10_000,
    seed: int = 0,
    exact_cap: int = EXACT_PERMUTATION_CAP,
) -> TestResult:
    """Two-sided permutation test on the difference of group means.

    Exact mode enumerates every split of the pooled sample (requires
    C(na+nb, na) <= exact_cap). Monte-Carlo mode draws `iterations`
    random relabelings and includes the observed labeling in both the
    numerator and denominator, so p > 0 always. Deterministic given
    seed.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size == 0 or xb.size == 0:
        raise ValueError("permutation_test needs non-empty groups")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(xb))):
        raise ValueError("permutation_test requires finite samples")
    na = int(xa.size)
    nb = int(xb.size)
    pooled = np.concatenate([xa, xb])
    observed = abs(float(np.mean(xa)) - float(np.mean(xb)))
    tol = _mean_diff_tolerance(pooled)
    threshold = observed - tol

    if mode == "exact":
        total = math.comb(na + nb, na)
        if total > exact_cap:
            raise ValueError(
                f"exact mode would enumerate C({na + nb},{na}) = {total} splits "
                f"(cap {exact_cap}); use montecarlo mode"
            )
        count = _exact_extreme_count(pooled, na, threshold)
        return TestResult("permutation-exact", observed, count / total, float(total))

    if mode != "montecarlo":
        raise ValueError(f"unknown permutation mode {mode!r}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    rng = np.random.default_rng(_seed_key(seed))
    n = na + nb
    count = 0
    max_rows = max(1, _CHUNK_ELEMENTS // n)
    done = 0
    while done < iterations:
        rows = min(max_rows, iterations - done)
        block = np.broadcast_to(pooled, (rows, n)).copy()
        block = rng.permuted(block, axis=1)
        ma = block[:, :na].mean(axis=1)
        mb = block[:, na:].mean(axis=1)
        count += int(np.count_nonzero(np.abs(ma - mb) >= threshold))
        done += rows
    p = (count + 1) / (iterations + 1)
    return TestResult("permutation-montecarlo", observed, p, float(iterations))


def _exact_extreme_count(pooled: np.ndarray, na: int, threshold: float) -> int:
    """Splits of `pooled` whose |mean difference| >= threshold."""
    n = pooled.size
    nb = n - na
    total_sum = float(pooled.sum())
    # Enumerate the smaller side; the complement is implied.
    k, swap = (na, False) if na <= nb else (nb, True)
    count = 0
    values = pooled.tolist()
    for combo in combinations(range(n), k):
        s = 0.0
        for idx in combo:
            s += values[idx]
        mean_small = s / k
        mean_rest = (total_sum - s) / (n - k)
        diff = mean_small - mean_rest if not swap else mean_rest - mean_small
        if abs(diff) >= threshold:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------

def _seed_key(seed: int) -> int:
    # Accept any 64-bit signed seed; SeedSequence wants non-negative.
    return seed & 0xFFFFFFFFFFFFFFFF


def _group_rng(seed: int, values: np.ndarray) -> np.random.Generator:
    # Stream keyed by group content, not argument position, so swapping
    # the two groups resamples each group identically.
    digest = hashlib.blake2b(values.tobytes(), digest_size=8).digest()
    return np.random.default_rng([_seed_key(seed), int.from_bytes(digest, "big")])


def _bootstrap_means(
    values: np.ndarray, iterations: int, rng: np.random.Generator
) -> np.ndarray:
    n = values.size
    out = np.empty(iterations, dtype=float)
    max_rows = max(1, _CHUNK_ELEMENTS // n)
    done = 0
    while done < iterations:
        rows = min(max_rows, iterations - done)
        idx = rng.integers(0, n, size=(rows, n))
        out[done:done + rows] = values[idx].mean(axis=1)
        done += rows
    return out


def bootstrap_mean_diff_ci(
    a: Sequence[float],
    b: Sequence[float],
    level: float = 0.95,
    iterations: int = 2_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for mean(a) - mean(b).

    Deterministic given seed; swapping the groups negates and swaps the
    endpoints (resampling streams are keyed by group content).
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size < 2 or xb.size < 2:
        raise ValueError("bootstrap_mean_diff_ci needs n >= 2 per group")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0,1), got {level}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    means_a = _bootstrap_means(xa, iterations, _group_rng(seed, xa))
    means_b = _bootstrap_means(xb, iterations, _group_rng(seed, xb))
    diffs = means_a - means_b
    tail = (1.0 - level) / 2.0
    lo = float(np.quantile(diffs, tail))
    hi = float(np.quantile(diffs, 1.0 - tail))
    return lo, hi


# ---------------------------------------------------------------------------
# Power analysis
# ---------------------------------------------------------------------------

def required_sample_size(spec: PowerSpec) -> int:
    """Per-group n to detect |delta| at the given alpha and power.

    Normal-approximation formula for a two-sided two-sample comparison:
    n = ceil(2 * (z_{1-alpha/2} + z_power)^2 * sigma^2 / delta^2).
    """
    z_alpha = norm_ppf(1.0 - spec.alpha / 2.0)
    z_power = norm_ppf(spec.power)
    raw = 2.0 * (z_alpha + z_power) ** 2 * spec.sigma ** 2 / spec.delta ** 2
    return math.ceil(raw)
