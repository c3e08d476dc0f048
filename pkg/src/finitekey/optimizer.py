"""Parameter search: best extractable key length over (beta, nu, xi).

For a fixed block size ``m``, tolerated error rate ``delta`` and failure
budget, `optimize` searches the PE fraction ``beta = k/m``, the deviation
``nu`` and the split ``xi`` for the point that maximises the extractable
length ``ell``.  The search is a fixed coarse grid followed by two
shrinking-box refinement rounds around the incumbent; every surviving
candidate is re-evaluated through the scalar `security.feasible` path, so
the reported result never rests on the vectorised fast path alone.

`min_block_length` inverts the search over ``m``: the smallest block size in
a range whose optimised ``ell`` reaches one.  `sweep` evaluates a whole list
of block sizes for tabulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .bounds import BlockShape, SlackParams, binary_entropy, snap_floor
from .security import (
    VARIANTS,
    EpsilonBreakdown,
    ProtocolSettings,
    SecurityBudget,
    ec_leakage,
    feasible,
    max_ell_at,
)

__all__ = [
    "OptimizationPoint",
    "KeyRateResult",
    "optimize",
    "min_block_length",
    "sweep",
]

# Coarse grid: 10 PE fractions, 60 log-spaced deviations, 40 split fractions.
_BETAS = np.arange(1, 11) * 0.05
_NU_POINTS = 60
_XI_FRACTIONS = np.linspace(0.0, 1.0, 42)[1:-1]
# Refinement: two rounds of 9 x 21 x 21 boxes around the incumbent.  The
# first box spans the coarse grid spacing (the optimum can sit strictly
# between coarse points); each further round shrinks the box by factor 4.
_REFINE_ROUNDS = 2
_BETA_HALF = 0.05
_NU_LOG_HALF = 0.223
_XI_FRAC_HALF = 0.25
# Vectorised candidates re-verified through the scalar path per stage.
_TOP_K = 12


@dataclass(frozen=True)
class OptimizationPoint:
    """One parameter point: key fraction ``alpha = ell/m`` plus the knobs."""

    alpha: float
    beta: float
    nu: float
    xi: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0.0 <= self.xi < self.nu:
            raise ValueError(f"xi must lie in [0, nu), got {self.xi}")


@dataclass(frozen=True)
class KeyRateResult:
    """Outcome of `optimize` at one block size.

    ``point`` and ``breakdown`` are None when no parameter point in the grid
    admitted a defined bound at all.  ``feasible`` reports whether the best
    point satisfies the budget condition at the returned ``ell``; an ``ell``
    of zero with ``feasible=True`` means the attempt passes but yields no
    key.
    """

    m: int
    variant: str
    ell: int
    point: Optional[OptimizationPoint]
    breakdown: Optional[EpsilonBreakdown]
    feasible: bool


def _evaluate_grid(m, delta, budget, variant, k, nus, xi_fracs):
    """Vectorised ell over a (nu, xi) grid at fixed k; returns candidate rows.

    Returns a list of (ell, total, nu, xi) tuples for the best _TOP_K grid
    points.  ell is -1 where the point is infeasible even at ell = 0, and
    the total is then taken at ell = 0 for ranking.
    """
    n = m - k
    eps_c = 2.0 ** (-budget.t)
    r = ec_leakage(n, delta)
    nus = np.asarray(nus, dtype=float)
    if variant == "serfling":
        nu_g = nus
        xi_g = np.zeros_like(nus)
        valid = np.ones_like(nus, dtype=bool)
        pe = np.exp(-(n * k**2 * nu_g**2) / (m * (k + 1)))
    else:
        nu_g = np.repeat(nus, len(xi_fracs))
        xi_g = nu_g * np.tile(np.asarray(xi_fracs, dtype=float), len(nus))
        nu_p = nu_g - xi_g
        valid = (n * nu_p) ** 2 > 1.0
        sample_term = np.exp(-2.0 * m * k * xi_g**2 / (n + 1))
        scaled = m * (delta + xi_g)
        rounded = np.round(scaled)
        m_err = np.where(
            np.abs(scaled - rounded) <= 1e-9, rounded, np.ceil(scaled)
        ).astype(np.int64)
        gamma = 1.0 / (m_err + 1) + 1.0 / (m - m_err + 1)
        sharp = np.maximum(1.0 / (n + 1) + 1.0 / (k + 1), gamma)
        factor = np.where(m_err <= m // 2, gamma, sharp)
        with np.errstate(invalid="ignore"):
            key_term = np.exp(-2.0 * factor * ((n * nu_p) ** 2 - 1.0))
        pe = np.sqrt(np.minimum(sample_term + key_term, 1.0))
    deficit = n * (1.0 - binary_entropy(np.minimum(delta + nu_g, 1.0)))
    headroom = budget.eps_qkd - eps_c - 2.0 * pe
    with np.errstate(divide="ignore", invalid="ignore"):
        guess = deficit - r - budget.t + 2.0 * np.log2(2.0 * np.maximum(headroom, 0.0))
    # guess < 0 means the PA term exceeds the headroom already at ell = 0.
    ell = np.where(
        valid & (headroom > 0.0) & (guess >= 0.0),
        np.clip(np.floor(np.where(np.isfinite(guess), guess, -1.0)), 0, n),
        -1.0,
    ).astype(np.int64)
    pa = 0.5 * np.exp2(np.minimum(0.5 * (-deficit + r + budget.t + np.maximum(ell, 0)), 2.0))
    total = np.where(valid, eps_c + 2.0 * pe + np.minimum(pa, 1.0), np.inf)
    order = np.lexsort((xi_g, nu_g, total, -ell))
    rows = []
    seen = set()
    for idx in order[: 4 * _TOP_K]:
        key = (float(nu_g[idx]), float(xi_g[idx]))
        if key in seen:
            continue
        seen.add(key)
        rows.append((int(ell[idx]), float(total[idx]), key[0], key[1]))
        if len(rows) == _TOP_K:
            break
    return rows


def _nu_range(n, delta):
    lo = 1.1 / n
    hi = (0.5 - delta) * (1.0 - 1e-9)
    if lo >= hi:
        return None
    return lo, hi


def _verify_candidates(m, delta, budget, variant, k, rows, state):
    """Push grid candidates through the scalar path, updating the incumbent.

    ``state`` holds the incumbent as a dict with keys ``key`` (ordering
    tuple), ``result`` fields, and the diagnostic least-total infeasible
    point.
    """
    n = m - k
    beta = k / m
    shape = BlockShape(m=m, k=k)
    settings0 = ProtocolSettings.for_budget(shape, delta, budget)
    for _, _, nu, xi in rows:
        if not (0.0 < nu and 0.0 <= xi < nu):
            continue
        slack = SlackParams(nu=nu, xi=xi)
        if variant == "lemma2" and xi <= 0.0:
            continue
        ell = max_ell_at(settings0, budget, slack, variant)
        bd, ok = feasible(
            ProtocolSettings.for_budget(shape, delta, budget, ell=ell),
            budget,
            slack,
            variant,
        )
        if ok:
            key = (-ell, bd.total, nu, xi, beta)
            if state["best"] is None or key < state["best"][0]:
                state["best"] = (key, ell, beta, nu, xi, bd)
        else:
            key = (bd.total, nu, xi, beta)
            if state["diag"] is None or key < state["diag"][0]:
                state["diag"] = (key, beta, nu, xi, bd)


def _stage(m, delta, budget, variant, betas, nu_grids, xi_fracs, state):
    for beta, nus in zip(betas, nu_grids):
        k = min(max(snap_floor(beta * m), 1), m - 1)
        if len(nus) == 0:
            continue
        rows = _evaluate_grid(m, delta, budget, variant, k, nus, xi_fracs)
        _verify_candidates(m, delta, budget, variant, k, rows, state)


def optimize(m: int, delta: float, budget: SecurityBudget, variant: str) -> KeyRateResult:
    """Best extractable length at block size ``m`` for one bound variant.

    Searches beta in {0.05, ..., 0.50}, nu log-spaced in (1.1/n, 1/2 - delta)
    and xi on a fractional grid inside (0, nu), then refines twice around the
    incumbent with boxes shrinking by a factor of four.  Grid points where a
    bound precondition fails are skipped.  Deterministic: equal-ell ties are
    broken by smaller total, then smaller nu, xi and beta.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if m < 10:
        raise ValueError(f"m must be at least 10, got {m}")
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")

    state = {"best": None, "diag": None}
    xi_fracs = _XI_FRACTIONS if variant == "lemma2" else np.array([0.0])

    betas = []
    nu_grids = []
    for beta in _BETAS:
        k = min(max(snap_floor(float(beta) * m), 1), m - 1)
        rng = _nu_range(m - k, delta)
        betas.append(float(beta))
        nu_grids.append(
            np.geomspace(rng[0], rng[1], _NU_POINTS) if rng else np.array([])
        )
    _stage(m, delta, budget, variant, betas, nu_grids, xi_fracs, state)

    for round_idx in range(1, _REFINE_ROUNDS + 1):
        # Centre on the best feasible point; with none yet, the least-total
        # infeasible point is the best lead (the feasible window can sit
        # strictly between coarse grid points).
        if state["best"] is not None:
            _, _, beta0, nu0, xi0, _ = state["best"]
        elif state["diag"] is not None:
            _, beta0, nu0, xi0, _ = state["diag"]
        else:
            break
        shrink = 4.0 ** (round_idx - 1)
        b_lo = max(1.0 / m, beta0 - _BETA_HALF / shrink)
        b_hi = min(0.5, beta0 + _BETA_HALF / shrink)
        betas = list(np.linspace(b_lo, b_hi, 9))
        half = _NU_LOG_HALF / shrink
        frac0 = xi0 / nu0 if variant == "lemma2" else 0.0
        f_half = _XI_FRAC_HALF / shrink
        if variant == "lemma2":
            fr = np.linspace(
                max(1e-3, frac0 - f_half), min(1.0 - 1e-3, frac0 + f_half), 21
            )
        else:
            fr = np.array([0.0])
        nu_grids = []
        for beta in betas:
            k = min(max(snap_floor(beta * m), 1), m - 1)
            rng = _nu_range(m - k, delta)
            if rng is None:
                nu_grids.append(np.array([]))
                continue
            lo = max(rng[0], nu0 * math.exp(-half))
            hi = min(rng[1], nu0 * math.exp(half))
            nu_grids.append(
                np.geomspace(lo, hi, 21) if lo < hi else np.array([])
            )
        _stage(m, delta, budget, variant, betas, nu_grids, fr, state)

    if state["best"] is not None:
        _, ell, beta, nu, xi, bd = state["best"]
        point = OptimizationPoint(alpha=ell / m, beta=beta, nu=nu, xi=xi)
        return KeyRateResult(
            m=m, variant=variant, ell=ell, point=point, breakdown=bd, feasible=True
        )
    if state["diag"] is not None:
        _, beta, nu, xi, bd = state["diag"]
        point = OptimizationPoint(alpha=0.0, beta=beta, nu=nu, xi=xi)
        return KeyRateResult(
            m=m, variant=variant, ell=0, point=point, breakdown=bd, feasible=False
        )
    return KeyRateResult(
        m=m, variant=variant, ell=0, point=None, breakdown=None, feasible=False
    )


def min_block_length(
    delta: float,
    budget: SecurityBudget,
    variant: str,
    m_lo: int,
    m_hi: int,
) -> Optional[int]:
    """Smallest m in [m_lo, m_hi] whose optimised ell reaches one, else None.

    Coarse forward strides locate the first block size with a positive key,
    then single backward steps find the boundary.  The backward walk retests
    every block size it passes, so the answer does not lean on monotonicity
    of the optimiser output.
    """
    if not 10 <= m_lo <= m_hi:
        raise ValueError(f"need 10 <= m_lo <= m_hi, got [{m_lo}, {m_hi}]")
    stride = max(1, min(500, (m_hi - m_lo) // 128))
    grid = list(range(m_lo, m_hi + 1, stride))
    if grid[-1] != m_hi:
        grid.append(m_hi)
    hit = None
    for m in grid:
        if optimize(m, delta, budget, variant).ell >= 1:
            hit = m
            break
    if hit is None:
        return None
    best = hit
    m = hit - 1
    while m >= m_lo:
        if optimize(m, delta, budget, variant).ell >= 1:
            best = m
            m -= 1
        else:
            break
    return best


def sweep(
    m_values: Iterable[int],
    delta: float,
    budget: SecurityBudget,
    variant: str = "both",
) -> List[KeyRateResult]:
    """Optimise every block size in ``m_values``; rows sorted by (m, variant)."""
    if variant == "both":
        chosen = VARIANTS
    elif variant in VARIANTS:
        chosen = (variant,)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    results = []
    for m in sorted(set(int(v) for v in m_values)):
        for var in sorted(chosen):
            results.append(optimize(m, delta, budget, var))
    return results
