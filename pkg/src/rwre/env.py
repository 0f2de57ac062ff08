"""Site laws, realized random environments, and the laws that generate them.

A *site law* gives the jump distribution at one lattice site: step -1 with
probability ``q``, step +k with probability ``p[k-1]`` for k = 1..R.  An
*environment* assigns a site law to every integer site; it is realized lazily
and deterministically from ``(seed, site)``, so extending the realized window
never changes already-realized sites and shifted views stay consistent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._rng_py import site_u01
from .errors import EllipticityViolated, NotSimplex

SIMPLEX_TOL = 1e-12
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class SiteLaw:
    """Jump distribution at a single site: -1 w.p. q, +k w.p. p[k-1].

    Instances built by :func:`site_law` are validated and renormalized;
    constructing the dataclass directly skips validation (used in tests for
    deliberately degenerate laws such as q = 0).
    """

    q: float
    p: tuple[float, ...]

    @property
    def R(self) -> int:
        """Largest right jump with positive support length."""
        return len(self.p)

    @property
    def mean_jump(self) -> float:
        """E(X_1) under this law: sum_k k*p[k] - q."""
        return sum((k + 1) * pk for k, pk in enumerate(self.p)) - self.q

    def thresholds(self) -> np.ndarray:
        """Cumulative category bounds (q, q+p1, ..., q+p1+...+pR)[1:]."""
        return self.q + np.cumsum(self.p)


def site_law(q: float, p, epsilon: float = DEFAULT_EPSILON) -> SiteLaw:
    """Validate and build a :class:`SiteLaw`.

    Parameters
    ----------
    q : float
        Probability of the -1 jump.
    p : sequence of float
        Probabilities of the +1, ..., +R jumps; R = len(p) >= 1.
    epsilon : float
        Ellipticity floor: every ratio p[k]/q must be >= epsilon.

    Raises
    ------
    NotSimplex
        Negative entries, empty p, or total differing from 1 by more
        than 1e-12 (smaller discrepancies are renormalized away once).
    EllipticityViolated
        q = 0, or some p[k]/q < epsilon.
    """
    q = float(q)
    p = tuple(float(x) for x in p)
    if not p:
        raise NotSimplex("need at least one right-jump probability")
    if q < 0.0 or any(x < 0.0 for x in p):
        raise NotSimplex(f"negative entries in ({q}, {p})")
    total = q + sum(p)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise NotSimplex(f"probabilities sum to {total!r}, not 1")
    if total != 1.0:
        q = q / total
        p = tuple(x / total for x in p)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if q == 0.0:
        raise EllipticityViolated("division by q=0: ratios p[k]/q are undefined")
    bad = [k + 1 for k, x in enumerate(p) if x / q < epsilon]
    if bad:
        raise EllipticityViolated(f"p[k]/q < {epsilon} for k in {bad}")
    return SiteLaw(q, p)


# Alias kept so the constructor is reachable under its contract name.
site_law_new = site_law


_KIND_TABLE = "table"
_KIND_IID = "iid"


@dataclass(frozen=True)
class Environment:
    """A realized environment: a deterministic map site -> SiteLaw.

    ``law_at(x)`` reads the base assignment at ``x + offset``; shifting an
    environment only moves ``offset``, so all views of the same base share
    one realization.  For ``kind="table"`` the base assignment is the atom
    table cycled with site 0 at entry 0; for ``kind="iid"`` each base site
    draws an atom index from a stateless hash of ``(seed, site)``.
    """

    kind: str
    atoms: tuple[SiteLaw, ...]
    seed: int = 0
    offset: int = 0
    cum_weights: tuple[float, ...] = ()
    window: tuple[int, int] = (0, 0)

    @property
    def R(self) -> int:
        return self.atoms[0].R

    def _atom_index(self, base_site: int) -> int:
        if self.kind == _KIND_TABLE:
            return base_site % len(self.atoms)
        u = site_u01(self.seed, base_site)
        for a, cw in enumerate(self.cum_weights):
            if u < cw:
                return a
        return len(self.atoms) - 1

    def law_at(self, x: int) -> SiteLaw:
        """Site law seen at position ``x`` by this (possibly shifted) view."""
        return self.atoms[self._atom_index(x + self.offset)]

    def q_at(self, x: int) -> float:
        return self.law_at(x).q

    def p_at(self, x: int) -> tuple[float, ...]:
        return self.law_at(x).p


def shift(env: Environment, k: int) -> Environment:
    """View of ``env`` translated by ``k``: shifted(x) = env(x + k)."""
    if k == 0:
        return env
    return Environment(
        env.kind, env.atoms, env.seed, env.offset + k, env.cum_weights, env.window
    )


@dataclass(frozen=True)
class EnvironmentLaw:
    """Distribution over environments: homogeneous, periodic, or i.i.d.

    ``kind`` is one of ``"homogeneous"`` (single atom everywhere),
    ``"periodic"`` (atom table cycled over the lattice), or ``"iid"``
    (independent atom draw per site with the given weights).
    """

    kind: str
    atoms: tuple[SiteLaw, ...]
    weights: tuple[float, ...] = ()

    @property
    def R(self) -> int:
        return self.atoms[0].R


def _check_atoms(atoms) -> tuple[SiteLaw, ...]:
    atoms = tuple(atoms)
    if not atoms:
        raise ValueError("environment law needs at least one site law")
    if len({a.R for a in atoms}) != 1:
        raise ValueError("all atoms of one law must share the same R")
    return atoms


def homogeneous_law(atom: SiteLaw) -> EnvironmentLaw:
    """The degenerate law putting ``atom`` at every site."""
    return EnvironmentLaw("homogeneous", _check_atoms([atom]))


def periodic_law(table) -> EnvironmentLaw:
    """Deterministic cyclic environment given by ``table``, anchored at 0."""
    return EnvironmentLaw("periodic", _check_atoms(table))


def iid_law(atoms, weights) -> EnvironmentLaw:
    """I.i.d. environment: each site draws one of ``atoms`` independently."""
    atoms = _check_atoms(atoms)
    weights = tuple(float(w) for w in weights)
    if len(weights) != len(atoms):
        raise ValueError("one weight per atom required")
    if any(w < 0.0 for w in weights):
        raise NotSimplex("negative atom weight")
    total = sum(weights)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise NotSimplex(f"atom weights sum to {total!r}, not 1")
    weights = tuple(w / total for w in weights)
    return EnvironmentLaw("iid", atoms, weights)


def sample_environment(law: EnvironmentLaw, window, seed: int = 0) -> Environment:
    """Realize one environment from ``law`` over ``window = (lo, hi)``.

    Realization is replay-stable: the same ``(law, seed)`` always produces
    the same assignment at every site, regardless of the window requested,
    so later extensions agree with earlier ones.
    """
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise ValueError(f"empty window {window!r}")
    if law.kind in ("homogeneous", "periodic"):
        env = Environment(_KIND_TABLE, law.atoms, 0, 0, (), (lo, hi))
    elif law.kind == "iid":
        cw = tuple(itertools.accumulate(law.weights))
        env = Environment(_KIND_IID, law.atoms, int(seed), 0, cw, (lo, hi))
    else:
        raise ValueError(f"unknown environment-law kind {law.kind!r}")
    for x in range(lo, hi + 1):  # touch the window; realization is pure
        env.law_at(x)
    return env


@lru_cache(maxsize=128)
def _tables_core(kind: str, atoms, cum_weights):
    """Numeric tables for the jitted kernels."""
    L = len(atoms)
    R = atoms[0].R
    qs = np.empty(L, dtype=np.float64)
    thr = np.empty((L, R), dtype=np.float64)
    ps = np.empty((L, R), dtype=np.float64)
    for a, atom in enumerate(atoms):
        qs[a] = atom.q
        thr[a] = atom.thresholds()
        ps[a] = atom.p
    cumw = np.asarray(cum_weights, dtype=np.float64)
    kind_code = 0 if kind == _KIND_TABLE else 1
    return kind_code, qs, thr, ps, cumw


def kernel_args(env: Environment):
    """(kind, qs, thr, cumw, seed, offset) tuple consumed by the walk kernels."""
    kind_code, qs, thr, _, cumw = _tables_core(env.kind, env.atoms, env.cum_weights)
    return kind_code, qs, thr, cumw, env.seed, env.offset


def law_args(env: Environment):
    """(kind, qs, ps, cumw, seed, offset) tuple for the analytic chain kernel."""
    kind_code, qs, _, ps, cumw = _tables_core(env.kind, env.atoms, env.cum_weights)
    return kind_code, qs, ps, cumw, env.seed, env.offset
