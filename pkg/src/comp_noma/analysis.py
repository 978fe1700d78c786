"""Numerical concavity verification for the cluster sum-rate and
spectral/energy-efficiency bookkeeping.

The sum-rate Hessian of an M-user cluster with ascending gains has
closed-form leading principal minors built from squared per-user terms
x_r = (g_r / (T_r g_r + 1))^2 and x'_r = (g_r / (T_{r+1} g_r + 1))^2, where
T_r is the total power of users r.. M-1:

    minor_m = (-1)^m * x_0 * prod_{r=1..m-1} (x_r - x'_{r-1})

(0-based r; the closed forms drop the 1/ln2 factor common to every entry,
which does not affect signs).  Strict concavity shows as alternating signs
starting negative.  A central-difference Hessian of the actual log2 objective
serves as the independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

LN2 = math.log(2.0)


@dataclass(frozen=True)
class MinorReport:
    minors: tuple[float, ...]
    signs: tuple[int, ...]
    passed: bool
    fd_minors: tuple[float, ...] | None = None
    fd_max_rel_err: float | None = None


@dataclass(frozen=True)
class EfficiencyReport:
    se_bits_per_hz: float
    ee_mb_per_joule: float
    total_power_watts: float
    scope: str


def sum_rate_objective(gains: Sequence[float]) -> Callable[[np.ndarray], float]:
    """The cluster sum-rate as a function of the power vector (log2)."""
    g = np.asarray(gains, dtype=float)

    def f(p: np.ndarray) -> float:
        p = np.asarray(p, dtype=float)
        tails = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
        return float(np.sum(np.log2(1.0 + p * g / (tails * g + 1.0))))

    return f


def finite_diff_hessian(
    objective: Callable[[np.ndarray], float],
    point: Sequence[float],
    h: float,
) -> np.ndarray:
    """Central-difference Hessian at an interior point (all coordinates must
    stay positive under +-h perturbation)."""
    x = np.asarray(point, dtype=float)
    if h <= 0.0:
        raise ValueError("step h must be positive")
    if np.any(x - h <= 0.0):
        raise ValueError("point too close to the boundary for the given step")
    m = x.size
    hess = np.empty((m, m))
    f0 = objective(x)
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = h
        hess[i, i] = (objective(x + ei) - 2.0 * f0 + objective(x - ei)) / h**2
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = h
            val = (
                objective(x + ei + ej)
                - objective(x + ei - ej)
                - objective(x - ei + ej)
                + objective(x - ei - ej)
            ) / (4.0 * h**2)
            hess[i, j] = hess[j, i] = val
    return hess


def hessian_minors(
    powers: Sequence[float],
    gains: Sequence[float],
    cross_check: bool | None = None,
    fd_step: float | None = None,
) -> MinorReport:
    """Leading principal minors of the sum-rate Hessian in product form.

    ``cross_check`` (default: on for M <= 3) also evaluates the minors from a
    finite-difference Hessian of the log2 objective and reports the largest
    relative disagreement; the ln2 scale difference is compensated.
    """
    p = tuple(float(v) for v in powers)
    g = tuple(float(v) for v in gains)
    m = len(p)
    if m < 2:
        raise ValueError("need at least 2 users")
    if len(g) != m:
        raise ValueError("powers and gains must have equal length")
    for a, b in zip(g, g[1:]):
        if b <= a:
            raise ValueError("gains must be strictly ascending")

    tails = [sum(p[r:]) for r in range(m)] + [0.0]
    x = [(g[r] / (tails[r] * g[r] + 1.0)) ** 2 for r in range(m)]
    xp = [(g[r] / (tails[r + 1] * g[r] + 1.0)) ** 2 for r in range(m)]

    minors = []
    prod = -x[0]
    minors.append(prod)
    for r in range(1, m):
        prod *= -(x[r] - xp[r - 1])
        minors.append(prod)
    signs = tuple(int(math.copysign(1.0, v)) if v != 0.0 else 0 for v in minors)
    passed = all(s == (-1) ** (i + 1) for i, s in enumerate(signs))

    fd_minors = None
    fd_max_rel = None
    if cross_check is None:
        cross_check = m <= 3
    if cross_check:
        if m > 3:
            raise ValueError("finite-difference cross-check is limited to M <= 3")
        h = fd_step if fd_step is not None else 1e-4 * sum(p)
        hess = finite_diff_hessian(sum_rate_objective(g), p, h) * LN2
        fd_minors = tuple(
            float(np.linalg.det(hess[: r + 1, : r + 1])) for r in range(m)
        )
        fd_max_rel = max(
            abs(a - b) / max(abs(a), 1e-300) for a, b in zip(minors, fd_minors)
        )
    return MinorReport(
        minors=tuple(minors),
        signs=signs,
        passed=passed,
        fd_minors=fd_minors,
        fd_max_rel_err=fd_max_rel,
    )


def efficiency(
    rates: Sequence[float],
    powers: Sequence[float],
    rb_count: int,
    rb_bandwidth_hz: float,
    scope: str = "cluster",
) -> EfficiencyReport:
    """Spectral efficiency (summed per-RB rates) and energy efficiency
    (delivered bits per Joule, over rb_count resource blocks)."""
    if rb_count < 1:
        raise ValueError("rb_count must be >= 1")
    if rb_bandwidth_hz <= 0.0:
        raise ValueError("bandwidth must be positive")
    se = float(sum(rates))
    total_power = float(sum(powers))
    if se < 0.0:
        raise ValueError("rates must be nonnegative")
    if se == 0.0:
        ee = 0.0
    else:
        if total_power <= 0.0:
            raise ValueError("nonzero rate with zero transmit power")
        ee = se * rb_count * rb_bandwidth_hz / total_power / 1e6
    return EfficiencyReport(
        se_bits_per_hz=se,
        ee_mb_per_joule=ee,
        total_power_watts=total_power,
        scope=scope,
    )
