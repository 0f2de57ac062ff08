"""End-to-end acceptance battery.

Each test is one criterion, sized and tolerated as committed: a single
pass/fail line per criterion under ``pytest -v``, with the measured detail
printed alongside.
"""

import math
import time

import numpy as np
import pytest

import rwre
from rwre import _kernels
from rwre._backend import as_state
from rwre.env import kernel_args

from conftest import absorption_exit_solve

CANON = (0.2, [0.5, 0.3])


def _law_grid_100():
    """Exactly 100 drift-positive R=2 laws on a (q, p1, split) lattice."""
    grid = []
    for q in np.linspace(0.05, 0.3, 5):
        for p1 in np.linspace(0.2, 0.6, 5):
            for frac in np.linspace(0.1, 0.9, 5):
                p2 = (1.0 - q - p1) * frac
                p1x = 1.0 - q - p2
                law = rwre.site_law(float(q), [float(p1x), float(p2)])
                if law.mean_jump > 0.05:
                    grid.append(law)
    assert len(grid) >= 100
    return grid[:100]


def _homog(law):
    return rwre.sample_environment(rwre.homogeneous_law(law), (0, 0))


def _batch(env, master, n, R, weights=None, max_steps=10_000_000):
    kind, qs, thr, cumw, eseed, offset = kernel_args(env)
    w = rwre.time_weights(R) if weights is None else np.asarray(weights, np.int64)
    return _kernels.batch_ladder(kind, qs, thr, cumw, as_state(eseed), offset,
                                 as_state(master), n, max_steps, R, w)


def _line(num, name, detail, t0):
    print(f"[PASS] criterion {num} ({name}): {detail} [{time.time() - t0:.1f}s]")


def test_criterion_1_time_identity_100k_paths():
    t0 = time.time()
    env = _homog(rwre.site_law(*CANON))
    n = 100_000
    t1, _, _, _, _, _, ident_ok, n_exc = _batch(env, 20250801, n, 2)
    assert int(n_exc) == 0
    bad = int(np.sum(ident_ok == 0))
    assert bad == 0, f"{bad} paths violate the integer duration identity"
    assert t1.min() >= 1
    _line(1, "time identity", f"0 of {n} paths violate; max t1 = {t1.max()}", t0)
    assert time.time() - t0 < 10


def test_criterion_2_wald_equality_grid():
    t0 = time.time()
    worst_closed = worst_series = 0.0
    for law in _law_grid_100():
        res = rwre.wald_check(law)
        worst_closed = max(worst_closed, res.closed)
        worst_series = max(worst_series, res.series)
    assert worst_closed < 1e-10
    assert worst_series < 1e-8
    _line(2, "Wald equality",
          f"closed {worst_closed:.2e} < 1e-10, series {worst_series:.2e} < 1e-8 "
          "on 100 laws", t0)
    assert time.time() - t0 < 5


def test_criterion_3_exit_probabilities():
    t0 = time.time()
    worst = 0.0
    laws = {1: rwre.site_law(0.3, [0.7]),
            2: rwre.site_law(*CANON),
            3: rwre.site_law(0.2, [0.4, 0.25, 0.15])}
    for R, law in laws.items():
        env = _homog(law)
        for n in range(2, 21):
            got = rwre.exit_probs_finite(env, 0, n).probs
            want = absorption_exit_solve(env, 0, n)
            worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst < 1e-10
    worst_sum = 0.0
    for law in _law_grid_100()[::5] + list(laws.values()):
        d = rwre.exit_probs_limit(_homog(law), 0)
        worst_sum = max(worst_sum, abs(float(d.probs.sum()) - 1.0))
    assert worst_sum < 1e-8
    _line(3, "exit probabilities",
          f"absorption-solve gap {worst:.2e} < 1e-10 (n<=20, R in 1..3), "
          f"limit sum gap {worst_sum:.2e} < 1e-8", t0)
    assert time.time() - t0 < 5


def test_criterion_4_crossing_back_sums():
    t0 = time.time()
    worst = 0.0
    envs = [_homog(rwre.site_law(*CANON))]
    envs.append(rwre.sample_environment(rwre.periodic_law([
        rwre.site_law(0.2, [0.5, 0.3]),
        rwre.site_law(0.3, [0.45, 0.25]),
        rwre.site_law(0.15, [0.55, 0.3]),
        rwre.site_law(0.25, [0.5, 0.25]),
    ]), (0, 0)))
    two_atom = rwre.iid_law(
        [rwre.site_law(0.2, [0.5, 0.3]), rwre.site_law(0.25, [0.45, 0.3])],
        [0.5, 0.5],
    )
    for k in range(100):
        envs.append(rwre.sample_environment(two_atom, (0, 0), seed=1000 + k))
    for env in envs:
        for i in (0, -1, 2):
            cb = rwre.crossing_back_probs_r2(env, i, tol=1e-12)
            worst = max(worst, abs(float(cb.values.sum()) - cb.q))
    assert worst < 1e-8
    _line(4, "crossing-back identity",
          f"max |alpha+beta+gamma - q| = {worst:.2e} < 1e-8 over "
          f"{len(envs)} environments x 3 levels", t0)
    assert time.time() - t0 < 10


def test_criterion_5_offspring_and_immigration_laws():
    t0 = time.time()
    env = _homog(rwre.site_law(*CANON))
    n = 100_000
    _, _, _, _, imm, u0, _, _ = _batch(env, 424242, n, 2)
    sol = rwre.homogeneous_closed_forms(rwre.site_law(*CANON))
    a, b = sol.alpha, sol.beta
    worst_tv = 0.0
    for parent in range(3):
        rows = u0[imm == parent]
        assert rows.shape[0] > 1000
        want_c = 1 if parent == 1 else 0
        assert np.all(rows[:, 2] == want_c)
        tv = 0.0
        for i in range(11):
            for j in range(11 - i):
                p = (1 - a - b) * math.comb(i + j, i) * a**i * b**j
                emp = float(np.sum((rows[:, 0] == i) & (rows[:, 1] == j)))
                tv += abs(emp / rows.shape[0] - p)
        worst_tv = max(worst_tv, 0.5 * tv)
    assert worst_tv < 0.02
    want = rwre.immigration_law(env)
    worst_se = 0.0
    for t in range(3):
        emp = float(np.mean(imm == t))
        se = math.sqrt(want[t] * (1 - want[t]) / n)
        worst_se = max(worst_se, abs(emp - want[t]) / se)
    assert worst_se < 4.0
    _line(5, "offspring laws",
          f"max TV (outcomes a+b<=10) = {worst_tv:.4f} < 0.02; "
          f"immigration within {worst_se:.2f} SE < 4", t0)
    assert time.time() - t0 < 30


def test_criterion_6_geometric_series():
    t0 = time.time()
    worst = 0.0
    for law in _law_grid_100()[::4]:
        cb = rwre.crossing_back_probs_r2(_homog(law), 0, tol=1e-12)
        gs = rwre.geometric_series_mean_matrix(rwre.mean_matrix(cb), terms=200)
        assert gs.spectral_radius < 1.0
        worst = max(worst, float(np.max(np.abs(gs.closed - gs.partial))))
    assert worst < 1e-8
    _line(6, "geometric series",
          f"closed vs n=200 partial sums gap {worst:.2e} < 1e-8 "
          "(25 subcritical laws)", t0)
    assert time.time() - t0 < 1


def test_criterion_7_invariant_density_million_paths():
    t0 = time.time()
    period2 = rwre.sample_environment(rwre.periodic_law([
        rwre.site_law(0.2, [0.5, 0.3]), rwre.site_law(0.3, [0.45, 0.25]),
    ]), (0, 0))
    details = []
    for env, seed in ((_homog(rwre.site_law(*CANON)), 7001), (period2, 7002)):
        want = rwre.invariant_density(env)
        est = rwre.estimate_density_mc(env, paths_per_shift=40_000,
                                       shift_depth=25, seed=seed)
        dev = abs(est.value - want) / est.stderr
        assert dev < 4.0, f"density off by {dev:.2f} SE"
        details.append(f"{want:.5f} vs {est.value:.5f} ({dev:.2f} SE)")
    _line(7, "invariant density",
          "analytic vs 10^6-path MC: " + "; ".join(details) + ", both < 4 SE", t0)
    assert time.time() - t0 < 120


def test_criterion_8_drift_closed_form_and_lln():
    t0 = time.time()
    worst = 0.0
    for law in _law_grid_100():
        rep = rwre.drift(rwre.homogeneous_law(law))
        worst = max(worst, abs(rep.v_p - law.mean_jump))
    assert worst < 1e-10
    two_atom = rwre.iid_law(
        [rwre.site_law(0.2, [0.5, 0.3]), rwre.site_law(0.25, [0.45, 0.3])],
        [0.5, 0.5],
    )
    rep = rwre.drift(two_atom, env_samples=10_000, seed=808)
    n, reps = 10_000_000, 20
    vals = np.empty(reps)
    for r in range(reps):
        env = rwre.sample_environment(two_atom, (0, 0), seed=60_000 + r)
        vals[r] = rwre.final_position(env, n, rwre.RngStream(808, r + 1)) / n
    emp, se_emp = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps))
    se = math.sqrt(se_emp**2 + rep.stderr**2)
    dev = abs(emp - rep.v_p) / se
    assert dev < 4.0
    _line(8, "drift",
          f"homogeneous max |v - (p1+2p2-q)| = {worst:.2e} < 1e-10; "
          f"iid formula {rep.v_p:.6f} vs empirical {emp:.6f} "
          f"({dev:.2f} combined SE < 4)", t0)
    assert time.time() - t0 < 180


def test_criterion_9_general_r3():
    t0 = time.time()
    law3 = rwre.site_law(0.2, [0.4, 0.25, 0.15])
    env = _homog(law3)
    n = 10_000
    t1, _, _, _, imm, u0, ident_ok, n_exc = _batch(env, 31337, n, 3)
    assert int(n_exc) == 0
    bad = int(np.sum(ident_ok == 0))
    assert bad == 0, f"{bad} R=3 paths violate the weight-rule identity"
    worst = 0.0
    r3_envs = [env,
               rwre.sample_environment(rwre.periodic_law([
                   law3, rwre.site_law(0.25, [0.35, 0.25, 0.15])]), (0, 0))]
    iid3 = rwre.iid_law([law3, rwre.site_law(0.25, [0.35, 0.25, 0.15])],
                        [0.5, 0.5])
    for k in range(10):
        r3_envs.append(rwre.sample_environment(iid3, (0, 0), seed=900 + k))
    for e in r3_envs:
        for i in (0, -1):
            cb = rwre.crossing_back_probs_general(e, i)
            worst = max(worst, abs(float(cb.values.sum()) - e.q_at(i)))
    assert worst < 1e-8
    want = rwre.immigration_law(env)
    worst_se = 0.0
    for t in range(6):
        emp = float(np.mean(imm == t))
        se = math.sqrt(max(want[t] * (1 - want[t]), 1e-12) / n)
        worst_se = max(worst_se, abs(emp - want[t]) / se)
    assert worst_se < 4.0
    _line(9, "general R",
          f"identity 0/{n} violations; cb sum gap {worst:.2e} < 1e-8 "
          f"({len(r3_envs)} envs); type frequencies within {worst_se:.2f} SE < 4",
          t0)
    assert time.time() - t0 < 60
