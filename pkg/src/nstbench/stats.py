"""Statistical tests for benchmark records.

One-way ANOVA with eta-squared, pooled-variance two-sample t tests with
Cohen's d, and Bonferroni adjustment for test families. Everything here is
plain sum-of-squares arithmetic in float64; p-values come from the local
incomplete-beta implementation, so the module has no dependency beyond
numpy.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .special import f_sf, student_t_two_sided


def _as_group(values, name) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigurationError(f"group {name!r} must be a non-empty 1-d sequence")
    if not np.isfinite(arr).all():
        raise ConfigurationError(f"group {name!r} contains non-finite values")
    return arr


@dataclass
class AnovaResult:
    """Classic one-way decomposition (between/within/total rows)."""

    df_between: int
    df_within: int
    ss_between: float
    ss_within: float
    ms_between: float
    ms_within: float
    f_stat: float
    p_value: float
    eta_squared: float

    @property
    def df_total(self) -> int:
        return self.df_between + self.df_within

    @property
    def ss_total(self) -> float:
        return self.ss_between + self.ss_within


def one_way_anova(groups: Dict[str, Sequence[float]]) -> AnovaResult:
    if len(groups) < 2:
        raise ConfigurationError(f"ANOVA needs at least 2 groups, got {len(groups)}")
    arrays = [_as_group(v, k) for k, v in groups.items()]
    n_total = sum(a.size for a in arrays)
    k = len(arrays)
    if n_total <= k:
        raise ConfigurationError(
            f"ANOVA needs more observations ({n_total}) than groups ({k})"
        )
    grand = float(sum(a.sum() for a in arrays)) / n_total
    ss_between = float(sum(a.size * (a.mean() - grand) ** 2 for a in arrays))
    ss_within = float(sum(((a - a.mean()) ** 2).sum() for a in arrays))
    df_between = k - 1
    df_within = n_total - k
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within

    if ss_between == 0.0:
        f_stat, p = 0.0, 1.0
    elif ms_within == 0.0:
        f_stat, p = math.inf, 0.0
    else:
        f_stat = ms_between / ms_within
        p = f_sf(f_stat, df_between, df_within)

    ss_total = ss_between + ss_within
    if ss_total == 0.0:
        raise ConfigurationError("eta-squared undefined: total sum of squares is zero")
    return AnovaResult(
        df_between=df_between,
        df_within=df_within,
        ss_between=ss_between,
        ss_within=ss_within,
        ms_between=ms_between,
        ms_within=ms_within,
        f_stat=f_stat,
        p_value=p,
        eta_squared=ss_between / ss_total,
    )


def eta_squared(groups: Dict[str, Sequence[float]]) -> float:
    return one_way_anova(groups).eta_squared


def pooled_std(a: np.ndarray, b: np.ndarray) -> float:
    """Pooled sample standard deviation (ddof=1 variances)."""
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ConfigurationError("pooled std needs at least 2 samples per group")
    va = float(((a - a.mean()) ** 2).sum()) / (na - 1)
    vb = float(((b - b.mean()) ** 2).sum()) / (nb - 1)
    return math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))


def cohens_d(a, b) -> float:
    a = _as_group(a, "a")
    b = _as_group(b, "b")
    sp = pooled_std(a, b)
    diff = float(a.mean() - b.mean())
    if sp == 0.0:
        if diff == 0.0:
            return 0.0
        raise ConfigurationError("Cohen's d undefined: zero pooled standard deviation")
    return diff / sp


@dataclass
class PairwiseTest:
    label_a: str
    label_b: str
    n_a: int
    n_b: int
    mean_diff: float
    df: int
    t_stat: float
    p_value: float
    cohens_d: float
    significant: bool
    p_bonferroni: Optional[float] = None
    degenerate_variance: bool = False


def t_test_pair(a, b, label_a="a", label_b="b", alpha: float = 0.05) -> PairwiseTest:
    """Two-sided pooled-variance Student t test."""
    a = _as_group(a, label_a)
    b = _as_group(b, label_b)
    na, nb = a.size, b.size
    df = na + nb - 2
    if df < 1:
        raise ConfigurationError("t test needs n_a + n_b >= 3")
    sp = pooled_std(a, b)
    diff = float(a.mean() - b.mean())
    degenerate = sp == 0.0
    if degenerate:
        # identical constant groups are a well-defined no-effect case;
        # distinct constant groups have no finite statistic
        if diff == 0.0:
            t, p, d = 0.0, 1.0, 0.0
        else:
            t = math.inf if diff > 0 else -math.inf
            p, d = 0.0, math.nan
    else:
        t = diff / (sp * math.sqrt(1.0 / na + 1.0 / nb))
        p = student_t_two_sided(t, df)
        d = diff / sp
    return PairwiseTest(
        label_a=label_a, label_b=label_b, n_a=na, n_b=nb, mean_diff=diff, df=df,
        t_stat=t, p_value=p, cohens_d=d, significant=bool(p < alpha),
        degenerate_variance=degenerate,
    )


def pairwise_tests(groups: Dict[str, Sequence[float]], alpha: float = 0.05) -> List[PairwiseTest]:
    """All unordered pairs, with Bonferroni-adjusted p per family size."""
    labels = list(groups)
    tests: List[PairwiseTest] = []
    pairs: List[Tuple[str, str]] = [
        (labels[i], labels[j]) for i in range(len(labels)) for j in range(i + 1, len(labels))
    ]
    for la, lb in pairs:
        tests.append(t_test_pair(groups[la], groups[lb], la, lb, alpha=alpha))
    m = len(tests)
    for t in tests:
        t.p_bonferroni = min(1.0, t.p_value * m)
    return tests
