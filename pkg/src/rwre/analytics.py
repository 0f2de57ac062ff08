"""Top-level quantities of the ladder-time branching structure.

Quenched expected ladder time as the branching series, the invariant density
of the environment chain seen from the particle, the law-of-large-numbers
drift as a ratio of two annealed expectations, closed forms for homogeneous
R=2 laws, Wald's identity checks, and the environment-chain kernel itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._backend import as_state
from ._rng_py import stream_for
from .decompose import time_weights, type_index
from .env import (
    Environment,
    EnvironmentLaw,
    SiteLaw,
    homogeneous_law,
    kernel_args,
    sample_environment,
    shift,
)
from .errors import (
    ConditioningStarved,
    DegenerateDenominator,
    DenominatorNonpositive,
    NotDriftPositive,
    SeriesDiverged,
    SpectralRadiusAtLeastOne,
)
from .exitprob import CrossingBackProbs, MeanMatrix, crossing_back_range, mean_matrix
from .walk import _as_stream


def immigration_law(env: Environment, depth: int = 100, tol: float = 1e-10) -> np.ndarray:
    """Distribution of the immigrant type (the final ladder jump).

    Entry (l, 1) carries weight p_{l+1}(0) (final jump from 0 to l+1);
    entry (l, k >= 2) carries the crossing-back value of type (l+1, k-1)
    at site 0; everything is normalized by 1 minus the base crossing-back
    mass at 0.
    """
    R = env.R
    cb0 = crossing_back_range(env, 0, 0, depth, tol)[0].values
    law0 = env.law_at(0)
    T = (R * (R + 1)) // 2
    w = np.empty(T)
    for l in range(R):
        w[type_index(R, l, 1)] = law0.p[l]
        for k in range(2, R - l + 1):
            w[type_index(R, l, k)] = cb0[type_index(R, l + 1, k - 1)]
    denom = 1.0 - float(cb0[:R].sum())
    if denom <= 0.0:
        raise DegenerateDenominator("base crossing-back mass at 0 reaches 1")
    return w / denom


def expected_t1(env: Environment, depth: int = 400, tol: float = 1e-12) -> float:
    """Quenched expected ladder time: 1 + <weights, sum of mean-offspring rows>.

    The mean type counts at level -d are u . N(0) N(-1) ... N(-d) with u the
    immigrant mean row; the series is truncated once the added row's max
    norm drops below ``tol`` (after at least 5 terms).  Raises
    :class:`SeriesDiverged` when ``depth`` terms do not get there.
    """
    R = env.R
    cbs = crossing_back_range(env, -depth, 0)
    u = immigration_law(env, tol=min(tol, 1e-10))
    w = time_weights(R).astype(np.float64)
    row = u
    acc = 0.0
    for d in range(depth + 1):
        row = row @ mean_matrix(cbs[-d]).entries
        acc += float(w @ row)
        if d >= 4 and row.max() < tol:
            return 1.0 + acc
    raise SeriesDiverged(
        f"mean type counts still {row.max():.3e} after {depth} levels"
    )


@dataclass(frozen=True)
class HomogeneousSolution:
    """Every closed-form quantity of a homogeneous R<=2 law."""

    law: SiteLaw
    delta: float
    lambda1: float
    lambda2: float
    exit1: float
    exit2: float
    e_xT1: float
    e_t1: float
    alpha: float
    beta: float
    gamma: float


def homogeneous_closed_forms(site: SiteLaw) -> HomogeneousSolution:
    """Exact solution of the constant-environment case from the companion
    matrix eigenvalues lambda_{1,2} = (p1+p2 +- delta)/(2q),
    delta = sqrt((p1+p2)^2 + 4 q p2).

    Requires q > 0 and positive mean jump (else :class:`NotDriftPositive`);
    R=1 laws are treated as p2 = 0.
    """
    if site.R > 2:
        raise ValueError("closed forms cover R <= 2 only")
    if site.q <= 0.0:
        raise ValueError("closed forms need q > 0")
    q = site.q
    p1 = site.p[0]
    p2 = site.p[1] if site.R == 2 else 0.0
    if p1 + 2.0 * p2 - q <= 0.0:
        raise NotDriftPositive(f"mean jump {p1 + 2.0 * p2 - q} is not positive")
    delta = math.sqrt((p1 + p2) ** 2 + 4.0 * q * p2)
    lambda1 = (p1 + p2 + delta) / (2.0 * q)
    lambda2 = (p1 + p2 - delta) / (2.0 * q)
    gamma = -q * lambda2
    denom = p1 - q * lambda2
    alpha = q * (1.0 + lambda2) * p1 / denom
    beta = q * (1.0 + lambda2) * gamma / denom
    e_t1 = 2.0 * delta / (
        1.0 - q - q * p1 + 3.0 * q * p2 + (1.0 - 3.0 * q) * delta
    )
    return HomogeneousSolution(
        law=site,
        delta=delta,
        lambda1=lambda1,
        lambda2=lambda2,
        exit1=1.0 + lambda2,
        exit2=-lambda2,
        e_xT1=1.0 - lambda2,
        e_t1=e_t1,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
    )


@dataclass(frozen=True)
class WaldResiduals:
    """|E(X_T1) - E(T1) E(X_1)| with E(T1) from two independent routes."""

    closed: float
    series: float


def wald_check(site: SiteLaw) -> WaldResiduals:
    """Wald's identity residuals for a homogeneous law.

    ``closed`` uses the closed-form E(T1); ``series`` recomputes E(T1)
    through the branching series on the constant environment.
    """
    sol = homogeneous_closed_forms(site)
    mean = site.mean_jump
    env = sample_environment(homogeneous_law(site), (0, 0))
    e_t1_series = expected_t1(env)
    return WaldResiduals(
        closed=abs(sol.e_xT1 - sol.e_t1 * mean),
        series=abs(sol.e_xT1 - e_t1_series * mean),
    )


def _spectral_radius(A: np.ndarray, iters: int = 200) -> float:
    v = np.ones(A.shape[0])
    rho = 0.0
    for _ in range(iters):
        w = A @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        rho = norm / float(np.linalg.norm(v))
        v = w / norm
    return rho


@dataclass(frozen=True)
class GeometricSeries:
    """Closed form and partial-sum evaluation of sum_{n >= 1} N^n."""

    closed: np.ndarray
    partial: np.ndarray
    spectral_radius: float
    terms: int


def geometric_series_mean_matrix(N: MeanMatrix, terms: int = 200) -> GeometricSeries:
    """Closed-form geometric series of an R=2 mean matrix, with cross-check.

    The closed form is [[a,b,b],[2a,2b,1-2a-b],[a,b,b]] / (1-2a-3b) where
    (a, b) are recovered from N's first row; subcriticality is certified by
    power iteration before anything is summed.
    """
    if N.R != 2:
        raise ValueError("the closed form is specific to R=2 (3x3) matrices")
    A = N.entries
    rho = _spectral_radius(A)
    if rho >= 1.0:
        raise SpectralRadiusAtLeastOne(f"spectral radius {rho:.6f}")
    d = 1.0 / (1.0 + A[0, 0] + A[0, 1])
    a = A[0, 0] * d
    b = A[0, 1] * d
    denom = 1.0 - 2.0 * a - 3.0 * b
    if denom <= 0.0:
        raise SpectralRadiusAtLeastOne(
            f"series normalizer 1-2a-3b = {denom} is not positive"
        )
    closed = np.array(
        [
            [a, b, b],
            [2.0 * a, 2.0 * b, 1.0 - 2.0 * a - b],
            [a, b, b],
        ]
    ) / denom
    partial = A.copy()
    power = A.copy()
    for _ in range(2, terms + 1):
        power = power @ A
        partial += power
    return GeometricSeries(closed, partial, rho, terms)


def invariant_density(env: Environment, depth: int = 200, tol: float = 1e-12) -> float:
    """Density of the invariant measure of the environment seen from the
    particle, relative to the sampling law, evaluated at this environment.

    Equal to [2 + sum_{i>=1} <(1,1,1), r(i) . N(i)...N(1)>] / (1 - alpha(0)
    - beta(0)) with r(i) = (p1(i), gamma(i), p1(i)+gamma(i)) / (p1(i)+gamma(i)).
    """
    if env.R != 2:
        raise ValueError("the density formula is specific to R=2")
    cbs = crossing_back_range(env, 0, depth)
    a0, b0 = cbs[0].values[0], cbs[0].values[1]
    denom = 1.0 - a0 - b0
    if denom <= 0.0:
        raise DegenerateDenominator("base crossing-back mass at 0 reaches 1")
    prod = np.eye(3)
    acc = 0.0
    for i in range(1, depth + 1):
        prod = mean_matrix(cbs[i]).entries @ prod
        p1 = env.law_at(i).p[0]
        g = cbs[i].values[2]
        r = np.array([p1 / (p1 + g), g / (p1 + g), 1.0])
        term = r @ prod
        acc += float(term.sum())
        if i >= 5 and term.max() < tol:
            return (2.0 + acc) / denom
    raise SeriesDiverged(f"density series terms still large after {depth} levels")


@dataclass(frozen=True)
class DensityEstimate:
    """Monte Carlo local-time estimate of the invariant density."""

    value: float
    stderr: float
    shift_depth: int
    paths_per_shift: int


def estimate_density_mc(
    env: Environment,
    paths_per_shift: int = 10_000,
    shift_depth: int = 30,
    seed: int = 0,
    max_steps: int = 10_000_000,
    min_events: int = 10,
) -> DensityEstimate:
    """Estimate the invariant density by conditional mean local times.

    For each j in 0..shift_depth, walk ladder excursions in the environment
    shifted by j and average the visit count of site -j conditionally on
    each ending offset; the density is the sum of all those conditional
    means.  Raises :class:`ConditioningStarved` when some ending offset is
    seen fewer than ``min_events`` times at some shift.
    """
    if shift_depth < 1:
        raise ValueError("shift_depth must be >= 1")
    R = env.R
    value = 0.0
    var_total = 0.0
    for j in range(shift_depth + 1):
        kind, qs, thr, cumw, eseed, offset = kernel_args(shift(env, j))
        count, sum_v, sum_v2, _ = _kernels.batch_local_time(
            kind, qs, thr, cumw, as_state(eseed), offset,
            as_state(stream_for(seed, j)), paths_per_shift, max_steps, -j, R,
        )
        for k in range(R):
            n = int(count[k])
            if n < min_events:
                raise ConditioningStarved(
                    f"ending offset {k + 1} seen {n} times at shift {j}"
                )
            mean = sum_v[k] / n
            var = (sum_v2[k] - n * mean * mean) / (n - 1)
            value += mean
            var_total += var / n
    return DensityEstimate(value, math.sqrt(var_total), shift_depth, paths_per_shift)


def kernel_step(env: Environment, rng) -> Environment:
    """One step of the environment chain seen from the particle.

    Shifts by -1 with probability q(0) and by +k with probability p_k(0) —
    the same categorical draw as one walk step, so coupled streams move the
    walk and the chain together.
    """
    law = env.law_at(0)
    u = _as_stream(rng).u01()
    if u < law.q:
        return shift(env, -1)
    acc = law.q
    for k in range(law.R - 1):
        acc += law.p[k]
        if u < acc:
            return shift(env, k + 1)
    return shift(env, law.R)


@dataclass(frozen=True)
class DriftReport:
    """The LLN velocity as a ratio of two annealed expectations."""

    v_p: float
    numerator: float
    denominator: float
    depth: int
    estimator: str
    samples: int | None = None
    stderr: float | None = None


def _num_den_series(env: Environment, depth: int, tol: float):
    """Per-environment numerator and denominator terms of the drift ratio."""
    cbs = crossing_back_range(env, 0, min(depth, 64))
    hi = min(depth, 64)
    a0, b0 = cbs[0].values[0], cbs[0].values[1]
    denom0 = 1.0 - a0 - b0
    if denom0 <= 0.0:
        raise DegenerateDenominator("base crossing-back mass at 0 reaches 1")
    pref = env.law_at(0).mean_jump / denom0
    N0 = mean_matrix(cbs[0]).entries
    w = np.array([2.0, 2.0, 1.0])
    r0 = _density_row(env, cbs, 0)
    num_acc = 2.0
    den_acc = 2.0 + float(w @ (r0 @ N0))
    prod = np.eye(3)
    i = 1
    while True:
        if i > hi:
            if hi >= depth:
                raise SeriesDiverged(
                    f"drift series terms still large after {depth} levels"
                )
            hi = depth
            cbs = crossing_back_range(env, 0, hi)
        prod = mean_matrix(cbs[i]).entries @ prod
        row = _density_row(env, cbs, i) @ prod
        num_acc += float(row.sum())
        den_acc += float(w @ (row @ N0))
        if i >= 5 and row.max() < tol:
            return pref * num_acc, den_acc, i
        i += 1


def _density_row(env: Environment, cbs, i: int) -> np.ndarray:
    p1 = env.law_at(i).p[0]
    g = cbs[i].values[2]
    return np.array([p1 / (p1 + g), g / (p1 + g), 1.0])


def drift(
    law: EnvironmentLaw,
    depth: int = 200,
    tol: float = 1e-12,
    env_samples: int = 10_000,
    seed: int = 0,
) -> DriftReport:
    """LLN velocity v of X_n / n under the environment law.

    Homogeneous laws are solved exactly (closed-form crossing-backs and a
    3x3 linear solve for the geometric series); periodic laws average the
    per-shift series exactly over one period; i.i.d. laws estimate the two
    expectations over ``env_samples`` fresh environment realizations and
    report a delta-method standard error.
    """
    if law.R != 2:
        raise ValueError("the drift formula is specific to R=2")
    if law.kind == "homogeneous":
        atom = law.atoms[0]
        sol = homogeneous_closed_forms(atom)
        cb = CrossingBackProbs(
            np.array([sol.alpha, sol.beta, sol.gamma]), 0, 2, atom.q
        )
        N = mean_matrix(cb).entries
        G = np.linalg.solve(np.eye(3) - N, N)
        r = np.array(
            [atom.p[0] / (atom.p[0] + sol.gamma),
             sol.gamma / (atom.p[0] + sol.gamma), 1.0]
        )
        rG = r @ G
        num = (atom.mean_jump / (1.0 - sol.alpha - sol.beta)) * (2.0 + float(rG.sum()))
        den = 2.0 + float(np.array([2.0, 2.0, 1.0]) @ rG)
        if den <= 0.0:
            raise DenominatorNonpositive(f"expected ladder duration sum {den}")
        return DriftReport(num / den, num, den, 0, "exact")
    base = sample_environment(law, (0, 0), seed=seed)
    if law.kind == "periodic":
        L = len(law.atoms)
        nums, dens, deps = [], [], []
        for s in range(L):
            n_s, d_s, used = _num_den_series(shift(base, s), depth, tol)
            nums.append(n_s)
            dens.append(d_s)
            deps.append(used)
        num, den = float(np.mean(nums)), float(np.mean(dens))
        if den <= 0.0:
            raise DenominatorNonpositive(f"expected ladder duration sum {den}")
        return DriftReport(num / den, num, den, max(deps), "exact")
    # i.i.d.: Monte Carlo over environment realizations
    nums = np.empty(env_samples)
    dens = np.empty(env_samples)
    used_max = 0
    for k in range(env_samples):
        env_k = sample_environment(law, (0, 0), seed=stream_for(seed, k))
        nums[k], dens[k], used = _num_den_series(env_k, depth, tol)
        used_max = max(used_max, used)
    num = float(nums.mean())
    den = float(dens.mean())
    if den <= 0.0:
        raise DenominatorNonpositive(f"expected ladder duration sum {den}")
    v = num / den
    s_nn = float(np.var(nums, ddof=1))
    s_dd = float(np.var(dens, ddof=1))
    s_nd = float(np.cov(nums, dens, ddof=1)[0, 1])
    var_v = (s_nn - 2.0 * v * s_nd + v * v * s_dd) / (env_samples * den * den)
    stderr = math.sqrt(max(var_v, 0.0))
    return DriftReport(v, num, den, used_max, "monte-carlo", env_samples, stderr)
