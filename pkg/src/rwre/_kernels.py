"""Hot loops, written once and compiled (or not) by the selected backend.

Generator state is opaque here: a masked python int on the python backend,
np.uint64 under numba.  The rng primitives imported from ``_backend`` match
whichever backend decorated these functions, and both emit identical streams.

Site-law lookup convention: an environment is (kind, qs, thr, cumw, seed,
offset) as produced by ``env.kernel_args``.  ``thr[row, z]`` is the cumulative
probability q + p1 + ... + p_{z+1}; a uniform draw u maps to jump -1 when
u < qs[row], else to the first z with u < thr[row, z] (last category absorbs
the rounding tail).
"""

import numpy as np

from ._backend import jit, next_u01, site_u01, stream_for


@jit
def _site_row(kind, n_rows, cumw, env_seed, offset, x):
    base = x + offset
    if kind == 0:
        return base % n_rows
    u = site_u01(env_seed, base)
    for a in range(n_rows - 1):
        if u < cumw[a]:
            return a
    return n_rows - 1


@jit
def _draw_jump(qs, thr, row, state):
    state, u = next_u01(state)
    if u < qs[row]:
        return -1, state
    R = thr.shape[1]
    for z in range(R - 1):
        if u < thr[row, z]:
            return z + 1, state
    return R, state


@jit
def step_site(kind, qs, thr, cumw, env_seed, offset, x, state):
    """One jump from site x; returns (new_site, new_state)."""
    row = _site_row(kind, qs.shape[0], cumw, env_seed, offset, x)
    jump, state = _draw_jump(qs, thr, row, state)
    return x + jump, state


@jit
def ladder_path(kind, qs, thr, cumw, env_seed, offset, state, max_steps, buf):
    """Fill buf with positions until the walk first exceeds 0.

    Returns (n, status, state): status 0 done (positions buf[0..n], t1 = n),
    1 buffer too small (caller re-runs with the same initial state and a
    larger buffer), 2 max_steps hit.
    """
    x = 0
    buf[0] = 0
    n = 0
    cap = buf.shape[0]
    while x <= 0:
        if n >= max_steps:
            return n, 2, state
        if n + 1 >= cap:
            return n, 1, state
        x, state = step_site(kind, qs, thr, cumw, env_seed, offset, x, state)
        n += 1
        buf[n] = x
    return n, 0, state


@jit
def type_index(R, l, k):
    """0-based type id for a down-step crossing back k below, landing l above."""
    return l * R - (l * (l - 1)) // 2 + (k - 1)


@jit
def ladder_scan(kind, qs, thr, cumw, env_seed, offset, state, max_steps, R,
                weights, u0):
    """Ladder walk with on-the-fly branching classification, no path buffer.

    Each up-jump o -> e closes the unique open down-step at every level j in
    (o, min(e, 0)]: that down-step's type is (l=e-j, k=j-o).  The final jump
    (e >= 1) defines the immigrant type (e-1, 1-o).  ``weights[t]`` scores
    each closed type toward the duration identity; ``u0`` accumulates the
    level-0 type counts for this path (caller zeroes it).

    Returns (t1, end_jump, end_origin, min_site, imm, ident_ok, state);
    t1 = -1 flags a max_steps overrun (other outputs then meaningless).
    """
    x = 0
    n = 0
    min_site = 0
    wsum = 0
    o = 0
    while x <= 0:
        if n >= max_steps:
            return -1, -1, 0, min_site, -1, 1, state
        o = x
        x, state = step_site(kind, qs, thr, cumw, env_seed, offset, x, state)
        n += 1
        if x < min_site:
            min_site = x
        if x > o:
            top = x if x < 0 else 0
            j = o + 1
            while j <= top:
                t = type_index(R, x - j, j - o)
                wsum += weights[t]
                if j == 0:
                    u0[t] += 1
                j += 1
    imm = type_index(R, x - 1, 1 - o)
    ident_ok = 1 if n == 1 + wsum else 0
    return n, x - o, o, min_site, imm, ident_ok, state


@jit
def batch_ladder(kind, qs, thr, cumw, env_seed, offset, master_seed, n_paths,
                 max_steps, R, weights):
    """Simulate n_paths independent ladder excursions; per-path summaries.

    Path p runs on substream p of master_seed.  Returns (t1, end_jump,
    end_origin, min_site, imm, u0, ident_ok, n_exceeded); overrun paths have
    t1 = -1 and zeroed u0.
    """
    T = (R * (R + 1)) // 2
    t1 = np.empty(n_paths, dtype=np.int64)
    end_jump = np.empty(n_paths, dtype=np.int64)
    end_origin = np.empty(n_paths, dtype=np.int64)
    min_site = np.empty(n_paths, dtype=np.int64)
    imm = np.empty(n_paths, dtype=np.int64)
    u0 = np.zeros((n_paths, T), dtype=np.int64)
    ident_ok = np.empty(n_paths, dtype=np.uint8)
    n_exceeded = 0
    for p in range(n_paths):
        state = stream_for(master_seed, p)
        res = ladder_scan(kind, qs, thr, cumw, env_seed, offset, state,
                          max_steps, R, weights, u0[p])
        t1[p] = res[0]
        end_jump[p] = res[1]
        end_origin[p] = res[2]
        min_site[p] = res[3]
        imm[p] = res[4]
        ident_ok[p] = res[5]
        if res[0] < 0:
            n_exceeded += 1
            for t in range(T):
                u0[p, t] = 0
    return t1, end_jump, end_origin, min_site, imm, u0, ident_ok, n_exceeded


@jit
def batch_local_time(kind, qs, thr, cumw, env_seed, offset, master_seed,
                     n_paths, max_steps, target, R):
    """Visit counts of ``target`` before the ladder time, split by ending offset.

    Returns (count, sum_v, sum_v2, n_exceeded) where index k-1 aggregates the
    paths that ended at k in 1..R.
    """
    count = np.zeros(R, dtype=np.int64)
    sum_v = np.zeros(R, dtype=np.float64)
    sum_v2 = np.zeros(R, dtype=np.float64)
    n_exceeded = 0
    for p in range(n_paths):
        state = stream_for(master_seed, p)
        x = 0
        n = 0
        v = 0
        ok = True
        while x <= 0:
            if n >= max_steps:
                n_exceeded += 1
                ok = False
                break
            if x == target:
                v += 1
            x, state = step_site(kind, qs, thr, cumw, env_seed, offset, x, state)
            n += 1
        if ok:
            k = x - 1
            count[k] += 1
            sum_v[k] += v
            sum_v2[k] += v * v
    return count, sum_v, sum_v2, n_exceeded


@jit
def fixed_n_walk(kind, qs, thr, cumw, env_seed, offset, state, n_steps, out):
    """n_steps jumps from 0; fills out[0..n_steps] if out is big enough,
    else records nothing but still walks.  Returns (final_site, state)."""
    x = 0
    record = out.shape[0] >= n_steps + 1
    if record:
        out[0] = 0
    for n in range(n_steps):
        x, state = step_site(kind, qs, thr, cumw, env_seed, offset, x, state)
        if record:
            out[n + 1] = x
    return x, state


@jit
def exit_chain(kind, qs, ps, cumw, env_seed, offset, lo, hi, warm):
    """Right-exit probability vectors at every site in [lo, hi], one pass.

    The truncated companion-product sums obey S(m) = (I + S(m-1)) @ M(m), so
    a single upward sweep from lo - warm yields the depth-(warm + m - lo)
    truncation at each site m, with joint rescaling of the accumulated sum
    and the identity coefficient to dodge overflow.  Needs q > 0 at every
    visited site.  Returns out[m - lo, j-1] = P[exit right at m + j].
    """
    R = ps.shape[1]
    A = np.zeros((R, R))
    M = np.empty((R, R))
    B = np.empty((R, R))
    inv = 1.0
    out = np.empty((hi - lo + 1, R))
    for m in range(lo - warm, hi + 1):
        row = _site_row(kind, qs.shape[0], cumw, env_seed, offset, m)
        q = qs[row]
        tail = 0.0
        for z in range(R - 1, -1, -1):
            tail += ps[row, z]
            M[0, z] = tail / q
        for r in range(1, R):
            for c in range(R):
                M[r, c] = 1.0 if c == r - 1 else 0.0
        mx = 0.0
        for r in range(R):
            for c in range(R):
                acc = 0.0
                for t in range(R):
                    a = A[r, t]
                    if t == r:
                        a += inv
                    acc += a * M[t, c]
                B[r, c] = acc
                if acc > mx:
                    mx = acc
        for r in range(R):
            for c in range(R):
                A[r, c] = B[r, c]
        if mx > 1e100:
            for r in range(R):
                for c in range(R):
                    A[r, c] /= mx
            inv /= mx
        if m >= lo:
            den = inv + A[0, 0]
            for j in range(R):
                nxt = A[0, j + 1] if j + 1 < R else 0.0
                out[m - lo, j] = (A[0, j] - nxt) / den
    return out


_EMPTY_I64 = np.empty(0, dtype=np.int64)


def warmup():
    """Force-compile every kernel on a tiny workload (no-op on python backend)."""
    qs = np.array([0.2], dtype=np.float64)
    thr = np.array([[0.7, 1.0]], dtype=np.float64)
    cumw = np.empty(0, dtype=np.float64)
    w = np.array([2, 2, 1], dtype=np.int64)
    from ._backend import as_state

    s = as_state(1)
    batch_ladder(0, qs, thr, cumw, s, 0, s, 2, 1000, 2, w)
    batch_local_time(0, qs, thr, cumw, s, 0, s, 2, 1000, 0, 2)
    buf = np.empty(64, dtype=np.int64)
    ladder_path(0, qs, thr, cumw, s, 0, s, 1000, buf)
    fixed_n_walk(0, qs, thr, cumw, s, 0, s, 8, buf)
    ps = np.array([[0.5, 0.3]], dtype=np.float64)
    exit_chain(0, qs, ps, cumw, s, 0, -2, 0, 8)
