"""Command-line front end.

Subcommands: ``simulate`` (ladder excursions, per-path records), ``decompose``
(branching type counts and offspring frequencies), ``exact`` (per-level exit /
crossing-back / mean-matrix values), ``drift`` (LLN velocity), ``wald``
(identity residuals), and ``validate`` (the full invariant battery; exit
status 0 iff every check passes).

Configuration comes from an optional JSON/TOML file plus flags; flags win.
All randomness of a run flows from the single configured seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import _kernels, analytics, decompose as dec, exitprob, walk
from ._backend import BACKEND, as_state
from ._rng_py import stream_for
from .env import (
    Environment,
    EnvironmentLaw,
    SiteLaw,
    homogeneous_law,
    iid_law,
    kernel_args,
    periodic_law,
    sample_environment,
    shift,
    site_law,
)
from .errors import RwreError

DEFAULT_LAW_CFG = {"kind": "homogeneous", "atoms": [{"q": 0.2, "p": [0.5, 0.3]}]}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one subcommand run needs, after merging file and flags."""

    law: EnvironmentLaw
    R: int
    seed: int | None
    paths: int
    n_steps: int
    depth: int
    tol: float
    fmt: str
    out: str | None
    max_steps: int
    env_samples: int
    input_path: str | None = None

    def require_seed(self) -> int:
        if self.seed is None:
            raise SystemExit("a seed is required for stochastic subcommands "
                             "(--seed or config seed)")
        return self.seed


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        with open(path, "rb") as f:
            return tomllib.load(f)
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def build_law(cfg: dict) -> EnvironmentLaw:
    """Environment law from a config mapping (kind, atoms/period, epsilon)."""
    kind = cfg.get("kind", "homogeneous")
    eps = float(cfg.get("epsilon", 1e-6))
    entries = cfg.get("period") if kind == "periodic" else None
    entries = entries or cfg.get("atoms")
    if not entries:
        raise ValueError("config needs a nonempty 'atoms' (or 'period') list")
    atoms = [site_law(e["q"], e["p"], eps) for e in entries]
    if "R" in cfg and atoms[0].R != int(cfg["R"]):
        raise ValueError(f"atoms have R={atoms[0].R}, config says R={cfg['R']}")
    if kind == "homogeneous":
        if len(atoms) != 1:
            raise ValueError("homogeneous law takes exactly one atom")
        return homogeneous_law(atoms[0])
    if kind == "periodic":
        return periodic_law(atoms)
    if kind == "iid":
        weights = [float(e.get("weight", 1.0 / len(entries))) for e in entries]
        return iid_law(atoms, weights)
    raise ValueError(f"unknown environment kind {kind!r}")


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}
    law_cfg = file_cfg if ("atoms" in file_cfg or "period" in file_cfg) else DEFAULT_LAW_CFG
    law = build_law(law_cfg)

    def pick(flag, key, default):
        if flag is not None:
            return flag
        if key in file_cfg:
            return type(default)(file_cfg[key]) if default is not None else file_cfg[key]
        return default

    return ExperimentConfig(
        law=law,
        R=law.R,
        seed=pick(args.seed, "seed", None),
        paths=pick(args.paths, "paths", 1000),
        n_steps=pick(getattr(args, "n_steps", None), "n_steps", 100_000),
        depth=pick(args.depth, "depth", 200),
        tol=pick(args.tol, "tol", 1e-10),
        fmt=pick(args.format, "format", "pretty"),
        out=pick(args.out, "out", None),
        max_steps=pick(getattr(args, "max_steps", None), "max_steps", 10_000_000),
        env_samples=pick(getattr(args, "env_samples", None), "env_samples", 10_000),
        input_path=getattr(args, "input", None),
    )


# ---------------------------------------------------------------------------
# output rendering

def _render(records: list[dict], fmt: str, out) -> None:
    if not records:
        return
    if fmt == "jsonl":
        for rec in records:
            out.write(json.dumps(rec) + "\n")
        return
    if fmt == "csv":
        keys: list[str] = []
        for rec in records:
            for k in rec:
                if k not in keys:
                    keys.append(k)
        writer = csv.writer(out)
        writer.writerow(keys)
        for rec in records:
            writer.writerow([_csv_cell(rec.get(k)) for k in keys])
        return
    # pretty: aligned key: value blocks, one record per line when short
    for rec in records:
        parts = [f"{k}={_pretty_cell(v)}" for k, v in rec.items()]
        out.write("  ".join(parts) + "\n")


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(v)
    return v


def _pretty_cell(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_pretty_cell(x) for x in v) + "]"
    return str(v)


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(cfg: ExperimentConfig) -> list[dict]:
    """Per-path ladder records plus a trailing summary record."""
    seed = cfg.require_seed()
    env = sample_environment(cfg.law, (-8, 8), seed=seed)
    kind, qs, thr, cumw, eseed, offset = kernel_args(env)
    weights = dec.time_weights(env.R)
    t1, end_jump, _, min_site, _, _, _, n_exceeded = _kernels.batch_ladder(
        kind, qs, thr, cumw, as_state(eseed), offset, as_state(seed),
        cfg.paths, cfg.max_steps, env.R, weights,
    )
    done = t1 >= 0
    records = [
        {
            "record": "path",
            "path": i,
            "t1": int(t1[i]) if done[i] else None,
            "end_jump": int(end_jump[i]) if done[i] else None,
            "min_site": int(min_site[i]),
        }
        for i in range(cfg.paths)
    ]
    vals = t1[done].astype(np.float64)
    mean = float(vals.mean()) if vals.size else float("nan")
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan")
    records.append(
        {
            "record": "summary",
            "paths": cfg.paths,
            "completed": int(done.sum()),
            "exceeded_max_steps": int(n_exceeded),
            "mean_t1": mean,
            "se_t1": se,
        }
    )
    return records


def _paths_for_decompose(cfg: ExperimentConfig):
    if cfg.input_path:
        with open(cfg.input_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                sites = np.asarray(json.loads(line)["sites"], dtype=np.int64)
                jump = int(sites[-1] - sites[-2])
                yield walk.WalkPath(sites, sites.shape[0] - 1, (jump, int(sites[-2])))
        return
    seed = cfg.require_seed()
    env = sample_environment(cfg.law, (-8, 8), seed=seed)
    rng = walk.RngStream(seed)
    for _ in range(cfg.paths):
        yield walk.simulate_until_ladder(env, rng, cfg.max_steps)


def cmd_decompose(cfg: ExperimentConfig) -> list[dict]:
    """Branching records per path and pooled offspring frequencies."""
    R = cfg.R
    recs = []
    per_path = []
    for i, path in enumerate(_paths_for_decompose(cfg)):
        rec = dec.decompose_general(path, R)
        recs.append(rec)
        per_path.append(
            {
                "record": "path",
                "path": i,
                "t1": path.t1,
                "identity": dec.verify_time_identity(path, rec),
                "immigrant": int(np.argmax(rec.immigration)),
                "levels": {str(k): [int(c) for c in v] for k, v in sorted(rec.counts.items(), reverse=True)},
            }
        )
    if cfg.fmt == "jsonl":
        return per_path
    tables = dec.empirical_offspring(recs, R, min_events=1)
    rows = []
    for parent in sorted(tables.pooled):
        counter = tables.pooled[parent]
        total = sum(counter.values())
        for outcome, count in sorted(counter.items()):
            rows.append(
                {
                    "record": "offspring",
                    "parent": parent,
                    "outcome": list(outcome),
                    "count": count,
                    "frequency": count / total,
                }
            )
    return rows


def cmd_exact(cfg: ExperimentConfig) -> list[dict]:
    """Exit, crossing-back, and mean-matrix values at levels 0..-(depth-1)."""
    seed = cfg.seed if cfg.seed is not None else 0
    env = sample_environment(cfg.law, (-8, 8), seed=seed)
    levels = range(0, -min(cfg.depth, 64), -1)
    out = []
    for i in levels:
        ex = exitprob.exit_probs_limit(env, i, cfg.tol)
        cb = exitprob.crossing_back_probs_general(env, i, tol=cfg.tol)
        N = exitprob.mean_matrix(cb)
        out.append(
            {
                "level": i,
                "exit_probs": [float(x) for x in ex.probs],
                "exit_depth": ex.truncation_n,
                "crossing_back": [float(x) for x in cb.values],
                "q": cb.q,
                "mean_matrix": [[float(x) for x in row] for row in N.entries],
            }
        )
    return out


def cmd_drift(cfg: ExperimentConfig) -> list[dict]:
    """LLN velocity report for the configured law."""
    seed = cfg.seed if cfg.seed is not None else 0
    if cfg.law.kind == "iid":
        seed = cfg.require_seed()
    rep = analytics.drift(cfg.law, cfg.depth, min(cfg.tol, 1e-10),
                          cfg.env_samples, seed)
    return [
        {
            "value": rep.v_p,
            "stderr": rep.stderr,
            "numerator": rep.numerator,
            "denominator": rep.denominator,
            "depth": rep.depth,
            "samples": rep.samples,
            "estimator": rep.estimator,
            "seed": seed,
        }
    ]


def cmd_wald(cfg: ExperimentConfig) -> list[dict]:
    """Wald residuals for the configured homogeneous law."""
    if cfg.law.kind != "homogeneous":
        raise SystemExit("wald needs a homogeneous law")
    atom = cfg.law.atoms[0]
    res = analytics.wald_check(atom)
    return [
        {
            "q": atom.q,
            "p": list(atom.p),
            "residual_closed": res.closed,
            "residual_series": res.series,
        }
    ]


# ---------------------------------------------------------------------------
# validation battery

def _exit_absorption_solve(env: Environment, i: int, n: int) -> np.ndarray:
    """First-step linear system for the finite-interval exit distribution.

    Transient states are {-n, ..., i}; falling below -n absorbs left,
    jumping above i absorbs right at i+1..i+R.  Independent of the
    matrix-product evaluation, so it serves as its oracle.
    """
    states = list(range(-n, i + 1))
    index = {s: k for k, s in enumerate(states)}
    m = len(states)
    R = env.R
    T = np.zeros((m, m))
    rhs = np.zeros((m, R))
    for s in states:
        law = env.law_at(s)
        if s - 1 in index:
            T[index[s], index[s - 1]] = law.q
        for z, pz in enumerate(law.p, start=1):
            t = s + z
            if t in index:
                T[index[s], index[t]] = pz
            elif t > i:
                rhs[index[s], t - i - 1] += pz
    sol = np.linalg.solve(np.eye(m) - T, rhs)
    return sol[index[i]]


def _canonical_r2() -> SiteLaw:
    return site_law(0.2, [0.5, 0.3])


def _canonical_r3() -> SiteLaw:
    return site_law(0.2, [0.4, 0.25, 0.15])


def _two_atom_iid() -> EnvironmentLaw:
    return iid_law(
        [site_law(0.2, [0.5, 0.3]), site_law(0.25, [0.45, 0.3])], [0.5, 0.5]
    )


def _law_grid(count: int = 100):
    """Drift-positive homogeneous R=2 laws covering a q/p1/p2 lattice."""
    grid = []
    for q in np.linspace(0.05, 0.3, 5):
        for p1 in np.linspace(0.2, 0.6, 5):
            for frac in np.linspace(0.1, 0.9, 4):
                p2 = (1.0 - q - p1) * frac
                p1x = 1.0 - q - p2
                law = SiteLaw(float(q), (float(p1x), float(p2)))
                if law.mean_jump > 0.05:
                    grid.append(law)
    return grid[:count]


def _check_time_identity(cfg, master, weights_override=None):
    env = sample_environment(homogeneous_law(_canonical_r2()), (0, 0))
    weights = np.asarray(
        weights_override if weights_override is not None else dec.time_weights(2),
        dtype=np.int64,
    )
    kind, qs, thr, cumw, eseed, offset = kernel_args(env)
    t1, *_rest = _kernels.batch_ladder(
        kind, qs, thr, cumw, as_state(eseed), offset, as_state(master),
        cfg.paths, cfg.max_steps, 2, weights,
    )
    ident_ok = _rest[5]
    bad = int(np.sum((t1 >= 0) & (ident_ok == 0)))
    return bad == 0, f"{bad} of {cfg.paths} paths violate the duration identity"


def _check_time_identity_r3(cfg, master):
    env = sample_environment(homogeneous_law(_canonical_r3()), (0, 0))
    kind, qs, thr, cumw, eseed, offset = kernel_args(env)
    n = max(cfg.paths // 2, 1000)
    t1, *_rest = _kernels.batch_ladder(
        kind, qs, thr, cumw, as_state(eseed), offset, as_state(master),
        n, cfg.max_steps, 3, dec.time_weights(3),
    )
    ident_ok = _rest[5]
    bad = int(np.sum((t1 >= 0) & (ident_ok == 0)))
    return bad == 0, f"{bad} of {n} R=3 paths violate the weight-rule identity"


def _check_crossing_back_sum(cfg, master):
    tol = max(cfg.tol, 1e-8)
    worst = 0.0
    envs = [
        sample_environment(homogeneous_law(_canonical_r2()), (0, 0)),
        sample_environment(
            periodic_law([site_law(0.2, [0.5, 0.3]), site_law(0.3, [0.45, 0.25])]),
            (0, 0),
        ),
    ]
    for k in range(20):
        envs.append(sample_environment(_two_atom_iid(), (0, 0), seed=stream_for(master, k)))
    for env in envs:
        for i in (0, -1, -2, 3):
            cb = exitprob.crossing_back_probs_r2(env, i, tol=1e-12)
            worst = max(worst, abs(float(cb.values.sum()) - cb.q))
    return worst < tol, f"max |sum - q| = {worst:.3e} (tol {tol:.0e})"


def _analytic_offspring_r2(alpha, beta, cap):
    probs = {}
    for a in range(cap + 1):
        for b in range(cap + 1 - a):
            probs[(a, b)] = (
                (1.0 - alpha - beta) * math.comb(a + b, a) * alpha**a * beta**b
            )
    return probs


def _check_offspring(cfg, master):
    env = sample_environment(homogeneous_law(_canonical_r2()), (0, 0))
    kind, qs, thr, cumw, eseed, offset = kernel_args(env)
    n = cfg.paths
    _, _, _, _, imm, u0, _, _ = _kernels.batch_ladder(
        kind, qs, thr, cumw, as_state(eseed), offset, as_state(master),
        n, cfg.max_steps, 2, dec.time_weights(2),
    )
    sol = analytics.homogeneous_closed_forms(_canonical_r2())
    analytic = _analytic_offspring_r2(sol.alpha, sol.beta, 10)
    worst_tv = 0.0
    for parent in range(3):
        rows = u0[imm == parent]
        if rows.shape[0] == 0:
            return False, f"no paths with immigrant type {parent}"
        want_c = 1 if parent == 1 else 0
        if np.any(rows[:, 2] != want_c):
            return False, f"deterministic overshoot count wrong for parent {parent}"
        tv = 0.0
        total = rows.shape[0]
        for (a, b), p in analytic.items():
            emp = float(np.sum((rows[:, 0] == a) & (rows[:, 1] == b))) / total
            tv += abs(emp - p)
        worst_tv = max(worst_tv, 0.5 * tv)
    threshold = max(0.02, 0.02 * math.sqrt(1e5 / n))
    return worst_tv < threshold, f"max TV over a+b<=10 = {worst_tv:.4f} (< {threshold:.3f})"


def _check_immigration(cfg, master):
    env = sample_environment(homogeneous_law(_canonical_r2()), (0, 0))
    kind, qs, thr, cumw, eseed, offset = kernel_args(env)
    n = cfg.paths
    _, _, _, _, imm, _, _, _ = _kernels.batch_ladder(
        kind, qs, thr, cumw, as_state(eseed), offset, as_state(master),
        n, cfg.max_steps, 2, dec.time_weights(2),
    )
    want = analytics.immigration_law(env)
    worst = 0.0
    for t in range(3):
        emp = float(np.mean(imm == t))
        se = math.sqrt(max(want[t] * (1 - want[t]), 1e-12) / n)
        worst = max(worst, abs(emp - want[t]) / se)
    return worst < 4.0, f"max immigrant-frequency deviation = {worst:.2f} SE"


def _check_wald(cfg, master):
    worst_closed = worst_series = 0.0
    for law in _law_grid():
        res = analytics.wald_check(law)
        worst_closed = max(worst_closed, res.closed)
        worst_series = max(worst_series, res.series)
    ok = worst_closed < 1e-10 and worst_series < 1e-8
    return ok, f"closed {worst_closed:.2e} (<1e-10), series {worst_series:.2e} (<1e-8)"


def _check_geometric_series(cfg, master):
    env = sample_environment(homogeneous_law(_canonical_r2()), (0, 0))
    cb = exitprob.crossing_back_probs_r2(env, 0, tol=1e-12)
    N = exitprob.mean_matrix(cb)
    series = analytics.geometric_series_mean_matrix(N)
    gap = float(np.max(np.abs(series.closed - series.partial)))
    return gap < 1e-8, f"closed vs partial sums gap = {gap:.2e} (< 1e-8)"


def _check_exits(cfg, master):
    worst = 0.0
    laws = {1: site_law(0.3, [0.7]), 2: _canonical_r2(), 3: _canonical_r3()}
    for R, law in laws.items():
        env = sample_environment(homogeneous_law(law), (0, 0))
        for n in (2, 5, 12):
            got = exitprob.exit_probs_finite(env, 0, n).probs
            want = _exit_absorption_solve(env, 0, n)
            worst = max(worst, float(np.max(np.abs(got - want))))
        lim = exitprob.exit_probs_limit(env, 0, min(cfg.tol, 1e-10))
        worst_sum = abs(float(lim.probs.sum()) - 1.0)
        if worst_sum > 1e-8:
            return False, f"limit sum deviates by {worst_sum:.2e} for R={R}"
    return worst < 1e-10, f"finite vs absorption solve gap = {worst:.2e} (< 1e-10)"


def _check_density(cfg, master):
    env = sample_environment(homogeneous_law(_canonical_r2()), (0, 0))
    exact = analytics.invariant_density(env)
    mc = analytics.estimate_density_mc(
        env, paths_per_shift=max(cfg.paths, 2000), shift_depth=25, seed=master
    )
    dev = abs(exact - mc.value) / mc.stderr
    return dev < 4.0, f"analytic {exact:.5f} vs MC {mc.value:.5f} = {dev:.2f} SE"


def _check_drift_homogeneous(cfg, master):
    worst = 0.0
    for law in _law_grid():
        rep = analytics.drift(homogeneous_law(law))
        worst = max(worst, abs(rep.v_p - law.mean_jump))
    return worst < 1e-10, f"max |v - (p1+2p2-q)| = {worst:.2e} (< 1e-10)"


def _check_drift_lln(cfg, master):
    law = _two_atom_iid()
    rep = analytics.drift(law, env_samples=min(cfg.env_samples, 2000), seed=master)
    reps, steps = 10, 200_000
    vals = []
    for r in range(reps):
        env = sample_environment(law, (0, 0), seed=stream_for(master, 1000 + r))
        x = walk.final_position(env, steps, walk.RngStream(master, r))
        vals.append(x / steps)
    emp = float(np.mean(vals))
    se_emp = float(np.std(vals, ddof=1) / math.sqrt(reps))
    se = math.sqrt(se_emp**2 + (rep.stderr or 0.0) ** 2)
    dev = abs(emp - rep.v_p) / se
    return dev < 5.0, f"formula {rep.v_p:.6f} vs empirical {emp:.6f} = {dev:.2f} SE"


_CHECKS = [
    ("time_identity_r2", _check_time_identity),
    ("time_identity_r3", _check_time_identity_r3),
    ("crossing_back_sum", _check_crossing_back_sum),
    ("offspring_tv", _check_offspring),
    ("immigration_freq", _check_immigration),
    ("wald_grid", _check_wald),
    ("geometric_series", _check_geometric_series),
    ("exit_probs", _check_exits),
    ("density_analytic_vs_mc", _check_density),
    ("drift_homogeneous", _check_drift_homogeneous),
    ("drift_lln_iid", _check_drift_lln),
]


def cmd_validate(cfg: ExperimentConfig, _weights_override=None) -> tuple[list[dict], bool]:
    """Run the invariant battery; returns (per-check records, all_passed)."""
    seed = cfg.require_seed()
    _kernels.warmup()
    rows = []
    all_ok = True
    for idx, (name, fn) in enumerate(_CHECKS):
        master = stream_for(seed, idx)
        try:
            if name == "time_identity_r2":
                ok, detail = fn(cfg, master, _weights_override)
            else:
                ok, detail = fn(cfg, master)
        except RwreError as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        all_ok = all_ok and ok
        rows.append({"check": name, "passed": ok, "detail": detail})
    return rows, all_ok


# ---------------------------------------------------------------------------
# entry point

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or TOML experiment config")
    p.add_argument("--seed", type=int, help="master seed (required when stochastic)")
    p.add_argument("--paths", type=int, help="number of simulated paths")
    p.add_argument("--depth", type=int, help="series / level depth")
    p.add_argument("--tol", type=float, help="convergence tolerance")
    p.add_argument("--format", choices=["csv", "jsonl", "pretty"], help="output format")
    p.add_argument("--out", help="output file (default stdout)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rwre",
        description="Ladder-structure toolkit for transient (1,R) walks in "
                    "random environments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_sim = sub.add_parser("simulate", help="ladder excursion records")
    p_sim.add_argument("--max-steps", dest="max_steps", type=int)
    p_dec = sub.add_parser("decompose", help="branching type counts")
    p_dec.add_argument("--input", help="JSON-lines path records to decompose")
    p_dec.add_argument("--max-steps", dest="max_steps", type=int)
    sub.add_parser("exact", help="per-level analytic values")
    p_drift = sub.add_parser("drift", help="LLN velocity report")
    p_drift.add_argument("--env-samples", dest="env_samples", type=int)
    sub.add_parser("wald", help="Wald identity residuals")
    p_val = sub.add_parser("validate", help="full invariant battery")
    p_val.add_argument("--env-samples", dest="env_samples", type=int)
    for p in sub.choices.values():
        _add_common(p)
    args = parser.parse_args(argv)
    cfg = _merge_config(args)

    status = 0
    if args.command == "simulate":
        records = cmd_simulate(cfg)
    elif args.command == "decompose":
        records = cmd_decompose(cfg)
    elif args.command == "exact":
        records = cmd_exact(cfg)
    elif args.command == "drift":
        records = cmd_drift(cfg)
    elif args.command == "wald":
        records = cmd_wald(cfg)
    else:
        records, ok = cmd_validate(cfg)
        status = 0 if ok else 1

    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as f:
            _render(records, cfg.fmt, f)
    else:
        out = sys.stdout
        if cfg.fmt == "csv":
            out = io.TextIOWrapper(sys.stdout.buffer, newline="")
        _render(records, cfg.fmt, out)
        out.flush()
    if args.command == "validate":
        failed = [r["check"] for r in records if not r["passed"]]
        print(
            f"[{BACKEND}] {len(records) - len(failed)}/{len(records)} checks passed"
            + (f"; FAILED: {', '.join(failed)}" if failed else ""),
            file=sys.stderr,
        )
    return status


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
