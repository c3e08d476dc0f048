"""Monte Carlo audit of the parameter-estimation tail bounds.

`run` draws random PE subsets for a block with a fixed number of planted
errors, counts how often the joint bad event fires (PE sample passes while
the key side is noisy) and reports the frequency with a 99% confidence
interval next to the exact hypergeometric value.  `validate_bounds` runs a
whole grid of such cases and checks each one against both closed-form
bounds; the bound functions are injectable so a test double can prove the
check would actually catch a broken bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.stats import beta as _beta_dist

from .bounds import (
    BlockShape,
    BoundUnavailableError,
    SlackParams,
    exact_joint_ppe,
    lemma2_ppe_bound,
    max_passing_pe_errors,
    min_alarming_key_errors,
    serfling_epe,
)

__all__ = [
    "SimConfig",
    "SimReport",
    "ValidationCase",
    "ValidationRow",
    "run",
    "validate_bounds",
    "default_serfling_bound",
    "default_lemma2_bound",
    "default_validation_grid",
]

# Two-sided 99% normal quantile.
_Z99 = 2.5758293035489004
# Below this count the normal interval is replaced by Clopper-Pearson.
_EXACT_CI_COUNT = 30
# Trials per chunk: fixed function of m alone (memory cap ~8 MiB per chunk),
# so the substream layout depends only on the config, never on the host.
_CHUNK_BYTES = 8 * 1024 * 1024


@dataclass(frozen=True)
class SimConfig:
    """One simulation: block shape, planted errors and thresholds."""

    shape: BlockShape
    w: int
    delta: float
    nu: float
    trials: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.w <= self.shape.m:
            raise ValueError(f"w must lie in [0, m], got {self.w}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True)
class SimReport:
    """Frequency estimate of the bad event with its exact counterpart."""

    trials: int
    seed: int
    bad_event_count: int
    frequency: float
    ci_low: float
    ci_high: float
    exact: float


@dataclass(frozen=True)
class ValidationCase:
    """One grid entry for `validate_bounds`."""

    shape: BlockShape
    w: int
    delta: float
    nu: float
    xi: float
    trials: int
    seed: int

    def sim(self) -> SimConfig:
        return SimConfig(
            shape=self.shape,
            w=self.w,
            delta=self.delta,
            nu=self.nu,
            trials=self.trials,
            seed=self.seed,
        )


@dataclass(frozen=True)
class ValidationRow:
    """Outcome of one case: simulated, exact and both bound values."""

    case: ValidationCase
    exact: float
    frequency: float
    ci_low: float
    ci_high: float
    serfling_bound: float
    lemma2_bound: float
    passed: bool
    note: Optional[str] = None


def _confidence_interval(count: int, trials: int):
    """Two-sided 99% interval for a binomial proportion.

    Normal approximation with continuity correction; exact Clopper-Pearson
    when the count (or its complement) is small enough that the normal shape
    cannot be trusted.
    """
    p = count / trials
    if count < _EXACT_CI_COUNT or trials - count < _EXACT_CI_COUNT:
        lo = 0.0 if count == 0 else float(_beta_dist.ppf(0.005, count, trials - count + 1))
        hi = 1.0 if count == trials else float(_beta_dist.ppf(0.995, count + 1, trials - count))
        return lo, hi
    half = _Z99 * math.sqrt(p * (1.0 - p) / trials) + 0.5 / trials
    return max(0.0, p - half), min(1.0, p + half)


def _count_bad(rng, size, shape, w, pe_max, key_min):
    """Vectorised trials: shuffle error positions into the first k slots.

    Only the first k steps of a Fisher-Yates shuffle are executed; after
    them the leading k columns are a uniform PE subset of the block.
    """
    m, k = shape.m, shape.k
    block = np.zeros((size, m), dtype=np.int8)
    block[:, :w] = 1
    rows = np.arange(size)
    for i in range(k):
        j = rng.integers(i, m, size=size)
        vi = block[rows, i].copy()
        block[rows, i] = block[rows, j]
        block[rows, j] = vi
    pe_errors = block[:, :k].sum(axis=1, dtype=np.int64)
    key_errors = w - pe_errors
    return int(np.count_nonzero((pe_errors <= pe_max) & (key_errors >= key_min)))


def run(config: SimConfig) -> SimReport:
    """Estimate the joint bad-event probability at fixed error count ``w``.

    Deterministic for a given config: trials are split into fixed-size
    chunks, each driven by one spawn of ``SeedSequence(seed)``, so the
    result is independent of how the chunks are executed.
    """
    shape = config.shape
    pe_max = max_passing_pe_errors(shape, config.delta)
    key_min = min_alarming_key_errors(shape, config.delta, config.nu)
    chunk = max(1, min(1 << 16, _CHUNK_BYTES // shape.m))
    n_chunks = (config.trials + chunk - 1) // chunk
    children = np.random.SeedSequence(config.seed).spawn(n_chunks)
    bad = 0
    done = 0
    if key_min <= shape.n:
        for child in children:
            size = min(chunk, config.trials - done)
            rng = np.random.default_rng(child)
            bad += _count_bad(rng, size, shape, config.w, pe_max, key_min)
            done += size
    freq = bad / config.trials
    ci_low, ci_high = _confidence_interval(bad, config.trials)
    exact = exact_joint_ppe(shape, config.delta, config.nu, config.w)
    return SimReport(
        trials=config.trials,
        seed=config.seed,
        bad_event_count=bad,
        frequency=freq,
        ci_low=ci_low,
        ci_high=ci_high,
        exact=exact,
    )


def default_serfling_bound(
    shape: BlockShape, delta: float, slack: SlackParams
) -> float:
    """Single-application bound on the bad-event probability: epe squared."""
    return min(1.0, serfling_epe(shape, slack.nu) ** 2)


def default_lemma2_bound(shape: BlockShape, delta: float, slack: SlackParams) -> float:
    """Two-term bound on the bad-event probability."""
    return lemma2_ppe_bound(shape, delta, slack)


def validate_bounds(
    cases: Sequence[ValidationCase],
    serfling_bound_fn: Optional[Callable] = None,
    lemma2_bound_fn: Optional[Callable] = None,
) -> List[ValidationRow]:
    """Check every case: exact value within CI and below both bounds.

    A row passes when the simulated CI contains the exact probability and
    the exact probability does not exceed either closed-form bound.  Cases
    where a bound precondition fails are reported as failed rows with a
    note rather than raised, so one bad grid entry cannot hide the rest.
    """
    if serfling_bound_fn is None:
        serfling_bound_fn = default_serfling_bound
    if lemma2_bound_fn is None:
        lemma2_bound_fn = default_lemma2_bound
    rows = []
    for case in cases:
        slack = SlackParams(nu=case.nu, xi=case.xi)
        try:
            s_bound = serfling_bound_fn(case.shape, case.delta, slack)
            l_bound = lemma2_bound_fn(case.shape, case.delta, slack)
        except (BoundUnavailableError, ValueError) as exc:
            rows.append(
                ValidationRow(
                    case=case,
                    exact=math.nan,
                    frequency=math.nan,
                    ci_low=math.nan,
                    ci_high=math.nan,
                    serfling_bound=math.nan,
                    lemma2_bound=math.nan,
                    passed=False,
                    note=str(exc),
                )
            )
            continue
        report = run(case.sim())
        passed = (
            report.exact <= s_bound
            and report.exact <= l_bound
            and report.ci_low <= report.exact <= report.ci_high
        )
        rows.append(
            ValidationRow(
                case=case,
                exact=report.exact,
                frequency=report.frequency,
                ci_low=report.ci_low,
                ci_high=report.ci_high,
                serfling_bound=s_bound,
                lemma2_bound=l_bound,
                passed=passed,
            )
        )
    return rows


def default_validation_grid(trials: int = 100_000, seed: int = 20260821):
    """The standard 50-case audit grid.

    Block sizes 20, 40 and 60 with half the block given to PE, two tolerated
    rates, a spread of planted error counts, and a fixed slack split chosen
    so the two-term bound is defined at every entry (n (nu - xi) > 1).
    """
    nu, xi = 0.35, 0.12
    cases = []
    w_lists = {
        20: (1, 3, 5, 7, 9, 11, 13, 15),
        40: (2, 6, 10, 14, 18, 22, 26, 30),
        60: (3, 9, 15, 21, 27, 33, 39, 45, 51),
    }
    for m in (20, 40, 60):
        for delta in (0.05, 0.1):
            ws = w_lists[m]
            if m < 60:
                ws = ws[:8]
            for w in ws:
                cases.append(
                    ValidationCase(
                        shape=BlockShape(m=m, k=m // 2),
                        w=w,
                        delta=delta,
                        nu=nu,
                        xi=xi,
                        trials=trials,
                        seed=seed + len(cases),
                    )
                )
    return cases
