"""Exit probabilities, crossing-back probabilities, and offspring mean matrices.

The walk's chance of leaving an interval to the right is an inner-product
ratio of accumulated companion-matrix products: with M(m) the R x R matrix
whose first row is ((p_1+...+p_R)/q, (p_2+...+p_R)/q, ..., p_R/q) at site m
and subdiagonal 1s,

    P[ from i, reach i+j before falling below -n ]
        = <e_1, S (e_j - e_{j+1})> / (1 + <e_1, S e_1>),
    S = M(i) + M(i-1)M(i) + ... + M(-n)...M(i),   e_{R+1} = 0.

Everything else here is derived from the n -> infinity limits of these
ratios: the probability a down-step from level i crosses back at i+l having
reached k below (the type-(l, k) probabilities; (alpha, beta, gamma) for
R=2), and the per-level offspring mean matrix N(i) of the branching
decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from ._backend import as_state
from ._kernels import type_index
from .env import Environment, SiteLaw, law_args
from .errors import DegenerateDenominator, NotConverged, NumericalOverflow

_SCALE_CAP = 1e100
_OVERFLOW_CAP = 1e290

DEFAULT_TOL = 1e-10
DEFAULT_MAX_N = 10_000


@dataclass(frozen=True)
class ExitDistribution:
    """Probabilities of exiting to the right at i+1..i+R from level i."""

    probs: np.ndarray
    truncation_n: int
    converged: bool

    @property
    def R(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class CrossingBackProbs:
    """Joint probabilities of a down-step from ``level`` by crossing-back type.

    ``values[t]`` is the probability that the walk at ``level`` steps down
    AND its crossing-back has type t (ordering of
    :func:`rwre.decompose.type_index`); the entries sum to q(level).
    """

    values: np.ndarray
    level: int
    R: int
    q: float

    def _r2(self, idx: int) -> float:
        if self.R != 2:
            raise ValueError("alpha/beta/gamma named entries exist only for R=2")
        return float(self.values[idx])

    @property
    def alpha(self) -> float:
        return self._r2(0)

    @property
    def beta(self) -> float:
        return self._r2(1)

    @property
    def gamma(self) -> float:
        return self._r2(2)


@dataclass(frozen=True)
class MeanMatrix:
    """Offspring mean matrix N at one level: entries[parent, child]."""

    entries: np.ndarray
    R: int
    level: int


def companion_matrix(site: SiteLaw) -> np.ndarray:
    """The R x R transfer matrix M of a site law (q > 0 required)."""
    if site.q <= 0.0:
        raise ValueError("companion matrix needs q > 0")
    R = site.R
    M = np.zeros((R, R))
    M[0] = np.cumsum(site.p[::-1])[::-1]
    M[0] /= site.q
    if R > 1:
        M[np.arange(1, R), np.arange(0, R - 1)] = 1.0
    return M


def _exit_ratio(S: np.ndarray, inv: float) -> np.ndarray:
    """Exit probabilities from the accumulated (scaled) product sum."""
    num = S[0].copy()
    num[:-1] -= S[0, 1:]
    return num / (inv + S[0, 0])


def exit_probs_finite(env: Environment, i: int, n: int) -> ExitDistribution:
    """Exit distribution from level i before first falling below -n.

    Accumulates the matrix products without rescaling, so it is exact to
    float arithmetic but raises :class:`NumericalOverflow` once entries pass
    ~1e290 (use :func:`exit_probs_limit` for deep truncations).
    """
    if n < 2:
        raise ValueError("truncation depth n must be >= 2")
    R = env.R
    P = np.eye(R)
    S = np.zeros((R, R))
    for m in range(i, -n - 1, -1):
        P = companion_matrix(env.law_at(m)) @ P
        S += P
        if S[0, 0] > _OVERFLOW_CAP or not np.isfinite(S[0, 0]):
            raise NumericalOverflow(
                f"product sum exceeded float range at depth {i - m}"
            )
    return ExitDistribution(_exit_ratio(S, 1.0), n, False)


def _env_base(env: Environment) -> Environment:
    """The unshifted, unwindowed view of ``env`` (stable cache key)."""
    return Environment(env.kind, env.atoms, env.seed, 0, env.cum_weights)


def _base_site(env: Environment, i: int) -> int:
    base = i + env.offset
    if env.kind == "table":
        return base % len(env.atoms)
    return base


@lru_cache(maxsize=16384)
def _exit_limit_cached(base: Environment, site: int, tol: float, max_n: int):
    R = base.R
    P = np.eye(R)       # product M(site-d)...M(site), shared scale with S
    S = np.zeros((R, R))
    inv = 1.0           # scale carried by the implicit identity term
    prev = None
    for d in range(max_n + 1):
        P = companion_matrix(base.law_at(site - d)) @ P
        S += P
        mx = S.max()
        if mx > _SCALE_CAP:
            P /= mx
            S /= mx
            inv /= mx
        probs = _exit_ratio(S, inv)
        if (
            prev is not None
            and np.max(np.abs(probs - prev)) < tol
            and abs(probs.sum() - 1.0) < tol
        ):
            return probs, d, True
        prev = probs
    raise NotConverged(
        f"exit probabilities at {site}: no convergence within depth {max_n} "
        "(non-transient regime or max_n too small)"
    )


def exit_probs_limit(
    env: Environment,
    i: int,
    tol: float = DEFAULT_TOL,
    max_n: int = DEFAULT_MAX_N,
) -> ExitDistribution:
    """Limiting exit distribution from level i (interval floor at -infinity).

    Iterates the truncation depth until successive distributions differ by
    less than ``tol`` in max norm AND the entries sum to 1 within ``tol``
    (the sum converges to 1 only in transient regimes, so this doubles as a
    transience probe).  Raises :class:`NotConverged` at ``max_n``.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    probs, d, ok = _exit_limit_cached(_env_base(env), _base_site(env, i), tol, max_n)
    return ExitDistribution(probs.copy(), d, ok)


def exit_limits_range(
    env: Environment, lo: int, hi: int, warm: int = 200
) -> np.ndarray:
    """Exit-limit vectors at all levels lo..hi in one sweep (row m-lo).

    Fast path used by the series evaluators: a single upward recursion
    S(m) = (I + S(m-1)) @ M(m) from lo-warm, so every returned row carries
    truncation depth >= warm.  Agreement with :func:`exit_probs_limit` is
    part of the test suite.
    """
    kind, qs, ps, cumw, seed, offset = law_args(env)
    return _kernels.exit_chain(
        kind, qs, ps, cumw, as_state(seed), offset, lo, hi, warm
    )


def _split_group(q_i: float, exits_im1: np.ndarray, law_im1: SiteLaw,
                 v_im1: np.ndarray, R: int) -> np.ndarray:
    """One level of the crossing-back recursion: v(i) from v(i-1)."""
    T = (R * (R + 1)) // 2
    v = np.zeros(T)
    for l in range(R):
        mass = q_i * exits_im1[l]
        w = np.empty(R - l)
        w[0] = law_im1.p[l]
        for k in range(2, R - l + 1):
            w[k - 1] = v_im1[type_index(R, l + 1, k - 1)]
        tot = w.sum()
        if tot <= 0.0:
            if mass > 1e-15:
                raise DegenerateDenominator(
                    f"crossing-back split weights vanish for landing offset {l}"
                )
            continue
        for k in range(1, R - l + 1):
            v[type_index(R, l, k)] = mass * w[k - 1] / tot
    return v


def crossing_back_probs_r2(
    env: Environment,
    i: int,
    tol: float = DEFAULT_TOL,
    max_n: int = DEFAULT_MAX_N,
) -> CrossingBackProbs:
    """(alpha, beta, gamma) at level i for an R=2 environment.

    gamma(i) = q(i) * P[from i-1, cross to i+1]; the remaining down-step mass
    q(i) * P[from i-1, cross to i] splits between alpha and beta in the ratio
    p_1(i-1) : gamma(i-1).
    """
    if env.R != 2:
        raise ValueError("crossing_back_probs_r2 needs an R=2 environment")
    q_i = env.q_at(i)
    ex1 = exit_probs_limit(env, i - 1, tol, max_n).probs
    gamma = q_i * ex1[1]
    same_level = q_i * ex1[0]
    ex2 = exit_probs_limit(env, i - 2, tol, max_n).probs
    gamma_prev = env.q_at(i - 1) * ex2[1]
    w1 = env.law_at(i - 1).p[0]
    tot = w1 + gamma_prev
    if tot <= 0.0:
        raise DegenerateDenominator("p1(i-1) + gamma(i-1) vanishes")
    alpha = same_level * w1 / tot
    beta = same_level * gamma_prev / tot
    return CrossingBackProbs(np.array([alpha, beta, gamma]), i, 2, q_i)


def crossing_back_range(
    env: Environment,
    lo: int,
    hi: int,
    depth: int = 100,
    tol: float = DEFAULT_TOL,
    warm: int = 200,
) -> dict[int, CrossingBackProbs]:
    """Crossing-back vectors at every level in [lo, hi], one chain pass.

    The level recursion (v(i) needs v(i-1)) is truncated ``depth`` levels
    below ``lo`` and seeded with zeros; the influence of the seed decays
    geometrically, and only levels >= lo are returned.

    The crossing-back interpretation needs the walk to escape rightward, so
    sub-stochastic exit rows (mass visibly below 1) are rejected instead of
    being fed into the recursion.
    """
    R = env.R
    floor = lo - depth
    exits = exit_limits_range(env, floor - 1, hi - 1, warm)
    short = float(exits.sum(axis=1).min())
    if short < 1.0 - 1e-6:
        raise NotConverged(
            f"exit mass reaches only {short:.6f} somewhere in "
            f"[{floor - 1}, {hi - 1}]: environment does not look transient "
            "to the right"
        )
    T = (R * (R + 1)) // 2
    v = np.zeros(T)
    out: dict[int, CrossingBackProbs] = {}
    for m in range(floor, hi + 1):
        v = _split_group(
            env.q_at(m), exits[m - 1 - (floor - 1)], env.law_at(m - 1), v, R
        )
        if m >= lo:
            out[m] = CrossingBackProbs(v, m, R, env.q_at(m))
    return out


def crossing_back_probs_general(
    env: Environment,
    i: int,
    R: int | None = None,
    depth: int = 100,
    tol: float = DEFAULT_TOL,
    max_n: int = DEFAULT_MAX_N,
    max_iter: int = 1000,
) -> CrossingBackProbs:
    """Full crossing-back vector at level i for any jump bound.

    Homogeneous and periodic environments close the downward recursion by
    fixed-point iteration over one period (successive sweeps until stable);
    realized i.i.d. environments truncate ``depth`` levels down and seed the
    recursion with the fixed point of the truncation site's law.
    """
    if R is not None and R != env.R:
        raise ValueError(f"environment has R={env.R}, not {R}")
    R = env.R
    T = (R * (R + 1)) // 2
    if env.kind == "table":
        L = len(env.atoms)
        levels = [i - d for d in range(L)]  # i, i-1, ..., i-L+1
        exits = {m: exit_probs_limit(env, m - 1, tol, max_n).probs for m in levels}
        laws = {m: env.law_at(m - 1) for m in levels}
        qv = {m: env.q_at(m) for m in levels}
        vs = {m: np.zeros(T) for m in levels}
        for _ in range(max_iter):
            delta = 0.0
            for m in levels:
                below = levels[(levels.index(m) + 1) % L]  # level m-1 mod period
                new = _split_group(qv[m], exits[m], laws[m], vs[below], R)
                delta = max(delta, float(np.max(np.abs(new - vs[m]))))
                vs[m] = new
            if delta < tol:
                return CrossingBackProbs(vs[i], i, R, qv[i])
        raise NotConverged(f"crossing-back fixed point: {max_iter} sweeps at level {i}")
    # realized (i.i.d.) environment: truncate and seed with a frozen-law fixed point
    seed_law = env.law_at(i - depth - 1)
    seed_env = Environment("table", (seed_law,))
    v = crossing_back_probs_general(seed_env, 0, None, depth, tol, max_n, max_iter).values
    for m in range(i - depth, i + 1):
        ex = exit_probs_limit(env, m - 1, tol, max_n).probs
        v = _split_group(env.q_at(m), ex, env.law_at(m - 1), v, R)
    return CrossingBackProbs(v, i, R, env.q_at(i))


def mean_matrix(cb: CrossingBackProbs, R: int | None = None) -> MeanMatrix:
    """Offspring mean matrix N built from one level's crossing-back vector.

    Every parent type begets base-landing types with the same mean row
    values[j] / (1 - sum of base values); a parent of type (l, k >= 2)
    additionally begets exactly one child of type (l+1, k-1).
    """
    if R is not None and R != cb.R:
        raise ValueError(f"crossing-back vector has R={cb.R}, not {R}")
    R = cb.R
    T = (R * (R + 1)) // 2
    base = cb.values[:R]
    denom = 1.0 - float(base.sum())
    if denom <= 0.0:
        raise DegenerateDenominator(
            f"base crossing-back mass {base.sum()} leaves no escape probability"
        )
    N = np.zeros((T, T))
    N[:, :R] = base / denom
    for l in range(R):
        for k in range(2, R - l + 1):
            N[type_index(R, l, k), type_index(R, l + 1, k - 1)] = 1.0
    return MeanMatrix(N, R, cb.level)
