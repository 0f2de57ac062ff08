import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rwre
from rwre import env as envmod
from rwre.errors import EllipticityViolated, NotSimplex


def test_site_law_basic(canonical):
    assert canonical.q == 0.2
    assert canonical.p == (0.5, 0.3)
    assert canonical.R == 2
    assert canonical.mean_jump == pytest.approx(0.9)


def test_site_law_renormalizes_tiny_drift():
    law = rwre.site_law(0.2, [0.5, 0.3 + 5e-13])
    assert law.q + sum(law.p) == 1.0


@pytest.mark.parametrize(
    "q,p",
    [
        (0.2, [0.5, 0.31]),      # sums to 1.01
        (0.2, [0.9]),            # sums to 1.1
        (-0.1, [0.6, 0.5]),      # negative q
        (0.2, [0.9, -0.1]),      # negative jump prob
        (0.2, []),               # no right jumps at all
        (1.0, [0.0]),
    ],
)
def test_site_law_rejects_non_simplex(q, p):
    with pytest.raises((NotSimplex, EllipticityViolated)):
        rwre.site_law(q, p)


def test_ellipticity_q_zero():
    with pytest.raises(EllipticityViolated, match="q=0"):
        rwre.site_law(0.0, [0.7, 0.3])


def test_ellipticity_ratio():
    # p2/q = 2e-9 is below the default floor of 1e-6
    with pytest.raises(EllipticityViolated):
        rwre.site_law(0.5, [0.499999999, 1e-9])
    # but fine with an explicit smaller epsilon
    law = rwre.site_law(0.5, [0.499999999, 1e-9], epsilon=1e-12)
    assert law.p[1] == pytest.approx(1e-9)


def test_site_law_new_alias(canonical):
    assert rwre.site_law_new(0.2, [0.5, 0.3]) == canonical


def test_homogeneous_env(homog_env, canonical):
    for x in (-5, -1, 0, 1, 100):
        assert homog_env.law_at(x) == canonical
        assert homog_env.q_at(x) == 0.2
    assert homog_env.R == 2


def test_periodic_anchoring(period2_env):
    s0 = rwre.site_law(0.2, [0.5, 0.3])
    s1 = rwre.site_law(0.3, [0.45, 0.25])
    assert period2_env.law_at(0) == s0
    assert period2_env.law_at(1) == s1
    assert period2_env.law_at(4) == s0
    assert period2_env.law_at(-1) == s1
    assert period2_env.law_at(-2) == s0


def test_shift_relabels_sites(period2_env):
    sh = rwre.shift(period2_env, 3)
    for x in range(-6, 7):
        assert sh.law_at(x) == period2_env.law_at(x + 3)
    assert rwre.shift(period2_env, 0) is period2_env


def test_shift_composes(iid_env):
    a = rwre.shift(rwre.shift(iid_env, 2), -5)
    b = rwre.shift(iid_env, -3)
    for x in range(-8, 9):
        assert a.law_at(x) == b.law_at(x)


def test_iid_sampling_is_replay_stable(iid_law):
    e1 = rwre.sample_environment(iid_law, (-3, 3), seed=19)
    e2 = rwre.sample_environment(iid_law, (-3, 3), seed=19)
    e3 = rwre.sample_environment(iid_law, (-50, 50), seed=19)
    for x in range(-40, 41):
        assert e1.law_at(x) == e2.law_at(x) == e3.law_at(x)


def test_iid_seeds_differ(iid_law):
    e1 = rwre.sample_environment(iid_law, (0, 0), seed=1)
    e2 = rwre.sample_environment(iid_law, (0, 0), seed=2)
    diffs = sum(e1.law_at(x) != e2.law_at(x) for x in range(200))
    assert diffs > 50


def test_iid_atom_frequencies(iid_law):
    """Site draws should hit each atom at its configured weight (4 SE)."""
    e = rwre.sample_environment(iid_law, (0, 0), seed=99)
    n = 40_000
    hits = sum(e.law_at(x) == iid_law.atoms[0] for x in range(n))
    se = (0.5 * 0.5 / n) ** 0.5
    assert abs(hits / n - 0.5) < 4 * se


def test_iid_weights_validated():
    atoms = [rwre.site_law(0.2, [0.5, 0.3]), rwre.site_law(0.25, [0.45, 0.3])]
    with pytest.raises(NotSimplex):
        rwre.iid_law(atoms, [0.5, -0.5])
    with pytest.raises(ValueError):
        rwre.iid_law(atoms, [0.5])
    with pytest.raises(NotSimplex):
        rwre.iid_law(atoms, [2.0, 6.0])  # not a probability vector
    law = rwre.iid_law(atoms, [0.25, 0.75 + 1e-13])  # tiny drift renormalized
    assert sum(law.weights) == pytest.approx(1.0, abs=1e-15)


def test_mixed_r_rejected():
    with pytest.raises(ValueError):
        rwre.periodic_law([rwre.site_law(0.2, [0.5, 0.3]), rwre.site_law(0.3, [0.7])])


def test_shift_iid_consistent_with_kernel_tables(iid_env):
    """The table handed to compiled kernels must describe the same laws."""
    from rwre import _kernels
    from rwre._backend import as_state

    sh = rwre.shift(iid_env, 5)
    kind, qs, thr, cumw, seed, offset = envmod.kernel_args(sh)
    for x in (-3, 0, 2):
        row = _kernels._site_row(kind, qs.shape[0], cumw, as_state(seed),
                                 np.int64(offset), np.int64(x))
        assert sh.q_at(x) == qs[row]


@settings(max_examples=60, deadline=None)
@given(
    q=st.floats(0.1, 0.5),
    w1=st.floats(0.1, 1.0),
    w2=st.floats(0.1, 1.0),
)
def test_site_law_simplex_property(q, w1, w2):
    rest = 1.0 - q
    p = [rest * w1 / (w1 + w2), rest * w2 / (w1 + w2)]
    law = rwre.site_law(q, p)
    assert law.q + sum(law.p) == pytest.approx(1.0, abs=1e-12)
    assert min(law.p) / law.q >= 1e-6


@settings(max_examples=40, deadline=None)
@given(k=st.integers(-30, 30), x=st.integers(-20, 20), seed=st.integers(0, 2**32))
def test_shift_identity_property(iid_law, k, x, seed):
    e = rwre.sample_environment(iid_law, (0, 0), seed=seed)
    assert rwre.shift(e, k).law_at(x) == e.law_at(x + k)
