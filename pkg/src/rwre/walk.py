"""Quenched walk simulation: single steps, ladder excursions, trajectories.

The walk starts at 0, jumps -1 with probability q(x) and +k with probability
p_k(x), and the *ladder time* t1 is the first time it exceeds 0.  All
randomness flows through :class:`RngStream`, a splitmix64 stream whose state
round-trips through the compiled kernels, so a path is a pure function of
``(environment, stream state)`` on either backend.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._backend import as_state
from ._rng_py import next_u01, stream_for
from .env import Environment, kernel_args
from .errors import MaxStepsExceeded

DEFAULT_MAX_STEPS = 10_000_000


class RngStream:
    """Deterministic uniform stream; substream ``stream`` of ``seed``."""

    __slots__ = ("state",)

    def __init__(self, seed: int, stream: int = 0):
        self.state = stream_for(int(seed), int(stream))

    def u01(self) -> float:
        """Next uniform in [0, 1)."""
        self.state, u = next_u01(self.state)
        return u

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(state={self.state:#018x})"


def _as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))


@dataclass(frozen=True)
class WalkPath:
    """A ladder excursion: positions X_0 = 0, ..., X_t1 with X_t1 >= 1.

    ``ended_by`` records the final step as (jump size, origin site).
    """

    sites: np.ndarray
    t1: int
    ended_by: tuple[int, int]


@dataclass(frozen=True)
class LocalTimes:
    """Visit counts v[site] over steps 0 .. t1-1 (terminal site excluded)."""

    v: dict[int, int]
    t1: int


def step(env: Environment, x: int, rng) -> int:
    """One jump of the walk from site ``x``; advances ``rng`` in place."""
    rng = _as_stream(rng)
    kind, qs, thr, cumw, seed, offset = kernel_args(env)
    y, state = _kernels.step_site(
        kind, qs, thr, cumw, as_state(seed), offset, x, as_state(rng.state)
    )
    rng.state = int(state)
    return int(y)


def simulate_until_ladder(
    env: Environment, rng, max_steps: int = DEFAULT_MAX_STEPS
) -> WalkPath:
    """Run from 0 until the walk first exceeds 0; return the full path.

    Raises :class:`MaxStepsExceeded` after ``max_steps`` jumps without a
    ladder point — either the regime is not transient to the right or the
    cap is too small; the caller decides which.
    """
    rng = _as_stream(rng)
    kind, qs, thr, cumw, seed, offset = kernel_args(env)
    state0 = rng.state
    cap = 256
    while True:
        buf = np.empty(cap, dtype=np.int64)
        n, status, state = _kernels.ladder_path(
            kind, qs, thr, cumw, as_state(seed), offset,
            as_state(state0), max_steps, buf,
        )
        if status == 1:  # buffer too small: re-run the same stream, larger
            cap = min(cap * 4, max_steps + 2)
            continue
        rng.state = int(state)
        if status == 2:
            raise MaxStepsExceeded(f"no ladder point within {max_steps} steps")
        sites = buf[: n + 1].copy()
        jump = int(sites[-1] - sites[-2])
        return WalkPath(sites, int(n), (jump, int(sites[-2])))


def local_times(path: WalkPath) -> LocalTimes:
    """Occupation counts of each site before the ladder time."""
    counts = Counter(int(x) for x in path.sites[:-1])
    return LocalTimes(dict(counts), path.t1)


def simulate_fixed_n(env: Environment, n: int, rng) -> np.ndarray:
    """Trajectory X_0, ..., X_n (length n+1) as an int64 array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _as_stream(rng)
    kind, qs, thr, cumw, seed, offset = kernel_args(env)
    out = np.empty(n + 1, dtype=np.int64)
    _, state = _kernels.fixed_n_walk(
        kind, qs, thr, cumw, as_state(seed), offset, as_state(rng.state), n, out
    )
    rng.state = int(state)
    return out


def final_position(env: Environment, n: int, rng) -> int:
    """X_n without storing the trajectory (for long LLN runs)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _as_stream(rng)
    kind, qs, thr, cumw, seed, offset = kernel_args(env)
    x, state = _kernels.fixed_n_walk(
        kind, qs, thr, cumw, as_state(seed), offset, as_state(rng.state),
        n, _kernels._EMPTY_I64,
    )
    rng.state = int(state)
    return int(x)
