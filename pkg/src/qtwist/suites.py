"""Verification suites behind the CLI: each returns a list of named checks."""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arithmetic import odd_squarefree_mask
from .cache import LValueStore, load_kernel, load_table
from .config import RunConfig
from .eigenform import EigenformTable
from .kernel import AfeKernel
from .lcentral import (TWO_PI, afe_length, central_derivative, central_value, central_value_trivial_twist,
                       completed_lambda, derivative_from_lambda, gamma_factor, predicted_first_moment,
                       predicted_first_moment_derivative, root_number)
from .mollifier import (build_blocks, build_schedule, ebound_check, lem1_check, mollifier_direct,
                        mollifier_expansion, mollifier_values, schedule_mertens_check, stirling_check,
                        MollifierSchedule, PrimeBlocks)
from .sweep import (MomentReport, charsum_average, empirical_first_moment, family_members, family_sweep,
                    holder_check, holder_holds, lower_bound_ratio, mertens_sums, s1_s2_diagnostics)


@dataclass
class Check:
    name: str
    passed: bool | None      # None: informational only
    detail: str = ""


@dataclass
class Context:
    """Lazily loaded tables, kernels and L-value stores shared by the suites of one run."""

    cfg: RunConfig
    tables: dict = field(default_factory=dict)
    kernels: dict = field(default_factory=dict)
    stores: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def table(self, weight: int, n_max: int) -> EigenformTable:
        cur = self.tables.get(weight)
        if cur is None or cur.n_max < n_max:
            t0 = time.perf_counter()
            cur = load_table(weight, n_max, self.cfg.cache_dir)
            self.timings[f"table {weight}"] = time.perf_counter() - t0
            self.tables[weight] = cur
        return cur

    def kernel(self, weight: int, m: int, g: str | None = None) -> AfeKernel:
        key = (weight, m, g or self.cfg.test_function)
        if key not in self.kernels:
            self.kernels[key] = load_kernel(*key, cache_dir=self.cfg.cache_dir)
        return self.kernels[key]

    def store(self, kernel: AfeKernel) -> LValueStore:
        key = (kernel.weight, kernel.m, kernel.test_function)
        if key not in self.stores:
            self.stores[key] = LValueStore(kernel, self.cfg.cache_dir)
        return self.stores[key]

    def digests(self) -> list[str]:
        out = [f"eigenform weight {w} n_max {t.n_max}: {t.hex_digest}" for w, t in sorted(self.tables.items())]
        out += [f"kernel weight {w} m {m} G {g}: {k.digest}" for (w, m, g), k in sorted(self.kernels.items())]
        return out

    def schedule(self, X: float | None = None) -> tuple[MollifierSchedule, PrimeBlocks]:
        c = self.cfg
        s = build_schedule(c.N, c.M, X or c.X, c.mode, c.ell1, c.R, c.Y)
        return s, build_blocks(s)


def _order(cfg: RunConfig) -> int:
    return 1 if cfg.resolved_quantity == "value" else 2


def _sweep_table(ctx: Context, X: float, m: int) -> EigenformTable:
    kern = ctx.kernel(ctx.cfg.weight, m)
    return ctx.table(ctx.cfg.weight, afe_length(kern, int(math.ceil(X * 7 / 8))) + 1)


def _sample_family(cfg: RunConfig, hi: int, count: int) -> list[int]:
    ds = np.nonzero(odd_squarefree_mask(hi + 1))[0]
    rng = np.random.default_rng(cfg.seed)
    return sorted(int(d) for d in rng.choice(ds, size=min(count, len(ds)), replace=False))


# ---------------------------------------------------------------------------


def verify_afe(ctx: Context) -> list[Check]:
    cfg = ctx.cfg
    w = cfg.weight
    a = (w - 1) / 2
    need = int((60 + 3 * a) * 1.2 * 8 * 5000 / TWO_PI) + 2
    table = ctx.table(w, need)
    out = []
    ds = _sample_family(cfg, 5000, cfg.samples)
    few = ds[:: max(1, len(ds) // 10)][:10]
    v1 = ctx.kernel(w, 1, "one")
    out.append(Check("V_1(1e-6) = 1 within 1e-6", abs(v1(1e-6) - 1) < 1e-6, f"{v1(1e-6):.15f}"))
    out.append(Check("V_1(1e3) < 1e-10", abs(v1(1e3)) < 1e-10, f"{v1(1e3):.3e}"))
    out.append(Check("x_cut of order-1 kernel", None, f"{v1.x_cut:.4g}"))
    if w % 4 == 0:
        k1, k2 = ctx.kernel(w, 1, "one"), ctx.kernel(w, 1, "cos6")
        diff = max(abs(central_value(table, k1, d) - central_value(table, k2, d)) for d in ds)
        out.append(Check(f"G-swap L(1/2), {len(ds)} d <= 5000", diff < 1e-8, f"max diff {diff:.3e}"))
        gap = abs(central_value(table, k1, 1) - central_value_trivial_twist(table, k1))
        out.append(Check("d = 1 specialisation agrees", gap < 1e-10, f"{gap:.3e}"))
        cons = max(abs(completed_lambda(table, 0.5, d) / gamma_factor(w, d, 0.5) - central_value(table, k1, d)) for d in few)
        out.append(Check("completed function vs AFE value", cons < 1e-7, f"max diff {cons:.3e}"))
    else:
        k1, k2 = ctx.kernel(w, 2, "one"), ctx.kernel(w, 2, "cos6")
        diff = max(abs(central_derivative(table, k1, d) - central_derivative(table, k2, d)) for d in ds)
        out.append(Check(f"G-swap L'(1/2), {len(ds)} d <= 5000", diff < 1e-8, f"max diff {diff:.3e}"))
        vanish = max(abs(central_value(table, v1, d)) for d in ds[:20])
        out.append(Check("central values vanish (root number -1)", vanish < 1e-8, f"max {vanish:.3e}"))
        lam_half = max(abs(completed_lambda(table, 0.5, d) / completed_lambda(table, 0.3, d)) for d in few)
        out.append(Check("Lambda(1/2) = 0 relative to Lambda(0.3)", lam_half < 1e-8, f"max {lam_half:.3e}"))
        fd = max(abs(central_derivative(table, k1, d) / derivative_from_lambda(table, d) - 1) for d in few)
        out.append(Check("L'(1/2) vs finite difference of Lambda", fd < 1e-5, f"max rel {fd:.3e}"))
    fe = 0.0
    for d in few:
        l3, l7 = completed_lambda(table, 0.3, d), completed_lambda(table, 0.7, d)
        fe = max(fe, abs(l3 - root_number(w, 8 * d) * l7) / abs(l3))
    out.append(Check("functional equation residual s = 0.3 / 0.7", fe < 1e-8, f"max rel {fe:.3e}"))
    return out


def verify_charsum(ctx: Context) -> list[Check]:
    cfg = ctx.cfg
    out = []
    for n in cfg.charsum_n:
        emp, main, budget = charsum_average(n, cfg.X)
        if main:
            r = emp / main
            out.append(Check(f"char average n={n} (square)", 0.95 <= r <= 1.05,
                             f"empirical {emp:.6f} main {main:.6f} ratio {r:.5f}"))
        else:
            out.append(Check(f"char average n={n} (non-square)", abs(emp) <= budget,
                             f"|empirical| {abs(emp):.4f} budget {budget:.1f}"))
    return out


def _fit_log_slope(Xs, vals) -> tuple[float, float]:
    A = np.array([[x * math.log(x), x] for x in Xs])
    c, *_ = np.linalg.lstsq(A, np.array(vals), rcond=None)
    return float(c[0]), float(c[1])


def verify_first_moment(ctx: Context) -> list[Check]:
    cfg = ctx.cfg
    m = _order(cfg)
    kern = ctx.kernel(cfg.weight, m)
    table = ctx.table(cfg.weight, max(afe_length(kern, int(cfg.X * 7 / 8) + 1) + 1, cfg.euler_cutoff))
    store = ctx.store(kern)
    out = []
    if m == 1:
        for l in cfg.twists:
            emp = empirical_first_moment(table, kern, l, cfg.X, cfg.threads, store)
            pred, tail = predicted_first_moment(table, l, cfg.X, cfg.euler_cutoff)
            r = emp / pred
            out.append(Check(f"first moment l={l}, X={cfg.X:g}", abs(r - 1) <= 0.10,
                             f"empirical {emp:.6f} predicted {pred:.6f} ratio {r:.5f} euler tail {tail:.2e}"))
        return out
    emp = empirical_first_moment(table, kern, 1, cfg.X, cfg.threads, store)
    pred = predicted_first_moment_derivative(table, 1, cfg.X, prime_cutoff=cfg.euler_cutoff)
    r = emp / pred
    out.append(Check(f"derivative moment l=1, X={cfg.X:g}", abs(r - 1) <= 0.10,
                     f"empirical {emp:.6f} predicted {pred:.6f} ratio {r:.5f}"))
    Xs = [cfg.X / 4, cfg.X / 2, cfg.X]
    e_vals = [empirical_first_moment(table, kern, 1, x, cfg.threads, store) for x in Xs]
    p_vals = [predicted_first_moment_derivative(table, 1, x, prime_cutoff=cfg.euler_cutoff) for x in Xs]
    ce, cp = _fit_log_slope(Xs, e_vals)[0], _fit_log_slope(Xs, p_vals)[0]
    ok = ce * cp > 0 and abs(ce / cp - 1) <= 0.25
    out.append(Check("X log X slope of derivative moment", ok,
                     f"empirical c1 {ce:.6f} predicted c1 {cp:.6f} over X={[f'{x:g}' for x in Xs]}"))
    return out


def _ebound_grid():
    for K in (10, 20, 40):
        for a in (0.5, 1.0, 2.0):
            rmax = a * K / 20
            for rf in (0.1, 0.5, 0.9, 1.0):
                for th in np.linspace(0, 2 * math.pi, 8, endpoint=False):
                    yield complex(rf * rmax * math.cos(th), rf * rmax * math.sin(th)), K, a


def mollifier_check(ctx: Context) -> list[Check]:
    cfg = ctx.cfg
    alpha = cfg.resolved_alpha
    ds, _ = family_members(cfg.X)
    table = ctx.table(cfg.weight, 10**5)
    sched, blocks = ctx.schedule()
    out = []
    small = build_schedule(cfg.N, cfg.M, cfg.X, "practical", 6, 1, 13.0)
    sblocks = build_blocks(small)
    rng = np.random.default_rng(cfg.seed)
    sample = rng.choice(ds, size=min(100, len(ds)), replace=False)
    worst = 0.0
    for d in sample:
        a = mollifier_direct(int(d), alpha, small, sblocks, table).value
        b = mollifier_expansion(int(d), alpha, small, sblocks, table)
        worst = max(worst, abs(a - b) / abs(a))
    out.append(Check(f"direct vs expansion, block {[int(p) for p in sblocks.primes[0]]}, l=6", worst < 1e-10,
                     f"max rel {worst:.3e}"))
    N = mollifier_values(ds, alpha, sched, blocks, table)
    out.append(Check(f"mollifier positive on all {len(ds)} family rows", bool(np.all(N > 0)),
                     f"min {N.min():.6g}"))
    sample = rng.choice(ds, size=min(1000, len(ds)), replace=False)
    for k in (0.75, 1.0, 2.0):
        res = [r for d in sample for r in lem1_check(int(d), k, sched, blocks, table)]
        out.append(Check(f"block inequality k={k}, {len(sample)} d", all(ok for ok, _ in res),
                         f"min slack {min(s for _, s in res):.3e}"))
    grid = list(_ebound_grid())
    res = [ebound_check(z, K, a) for z, K, a in grid]
    out.append(Check(f"truncated exponential bound, {len(grid)} points", all(r[0] for r in res),
                     f"max err/mid {max(r[1] / r[2] for r in res):.3e}, "
                     f"max mid/outer {max(r[2] / r[3] for r in res):.3e}"))
    left1, right1 = stirling_check(1)
    out.append(Check("Stirling bounds at n=1 (boundary, reported)", None, f"left {left1}, right {right1}"))
    ok = all(all(stirling_check(n)) for n in range(7, 171))
    first = min(n for n in range(1, 171) if all(stirling_check(m)[1] for m in range(n, 171)))
    out.append(Check("Stirling bounds for 7 <= n <= 170", ok, f"right bound holds from n={first}"))
    for row in schedule_mertens_check(sched, blocks, table):
        out.append(Check(f"block prime sum band (l={row['length']})", None,
                         f"sum {row['sum']:.5f} band [{row['lo']:.3f}, {row['hi']:.3f}] in_band {row['in_band']}"))
    return out


def run_sweep(ctx: Context, X: float | None = None, k: float | None = None) -> MomentReport:
    cfg = ctx.cfg
    X = X or cfg.X
    k = k or cfg.k
    m = _order(cfg)
    table = _sweep_table(ctx, X, m)
    kern = ctx.kernel(cfg.weight, m)
    sched, blocks = ctx.schedule(X)
    alpha = cfg.alpha if cfg.mollifier else 0.0
    return family_sweep(table, kern, X, k, sched, blocks, alpha, cfg.threads, ctx.store(kern), cfg.csv)


def sweep_checks(ctx: Context) -> list[Check]:
    r = run_sweep(ctx)
    ctx.timings["sweep"] = r.seconds
    return [Check("sweep rows", None, f"{len(r.d)} rows, tree {r.tree}, tiny |L| rows {r.tiny_rows}"),
            Check("S_moll", None, repr(r.S_moll)), Check("S_norm", None, repr(r.S_norm)),
            Check("S_raw", None, repr(r.S_raw)),
            Check("mollifier positive on all rows", bool(np.all(r.mollifier > 0)), f"min {r.mollifier.min():.6g}")]


def holder_suite(ctx: Context) -> list[Check]:
    r = run_sweep(ctx)
    slack = holder_check(r)
    return [Check(f"Hoelder chain k={r.k}, X={r.X:g}", holder_holds(r),
                  f"slack {slack!r} S_moll {r.S_moll!r} S_norm {r.S_norm!r} S_raw {r.S_raw!r}"),
            Check("mollifier positive on all rows", bool(np.all(r.mollifier > 0)), f"min {r.mollifier.min():.6g}")]


def lower_bound_suite(ctx: Context) -> list[Check]:
    reps = [run_sweep(ctx, X) for X in ctx.cfg.x_grid]
    res = lower_bound_ratio(reps)
    detail = ", ".join(f"c({x:g})={c:.6g}" for x, c in zip(res["X"], res["c"]))
    return [Check("c(X) positive", res["positive"], detail),
            Check("c(X) max/min <= 2", res["spread"] <= 2, f"spread {res['spread']:.4f}"),
            Check("functional bounds S_raw at each X", all(res["bounds_raw"]), "")]


def mertens_suite(ctx: Context) -> list[Check]:
    top = ctx.cfg.mertens_max
    table = ctx.table(ctx.cfg.weight, top)
    grid = [x for x in (10**3, 10**4, 10**5, 10**6, 10**7) if x <= top]
    rows = mertens_sums(table, grid)
    out = [Check(f"log p/p residual at x={r['x']:g} in [-2, 0]", -2 <= r["logp_resid"] <= 0,
                 f"{r['logp_resid']:.6f}") for r in rows]
    by = {r["x"]: r for r in rows}
    if 10**5 in by and 10**7 in by:
        drift = abs(by[10**7]["lam2_resid"] - by[10**5]["lam2_resid"])
        out.append(Check("lam^2/p residual drift 1e5 -> 1e7 <= 0.2", drift <= 0.2, f"{drift:.6f}"))
    mono = all(b["logp"] > a["logp"] and b["lam2"] > a["lam2"] for a, b in zip(rows, rows[1:]))
    out.append(Check("both sums increase along the grid", mono, ""))
    return out


def s1s2_suite(ctx: Context) -> list[Check]:
    cfg = ctx.cfg
    table = ctx.table(cfg.weight, 10**5)
    sched, blocks = ctx.schedule()
    res = s1_s2_diagnostics(table, sched, blocks, cfg.X, cfg.k)
    return [Check("S_1 - S_2 > 0", None, f"S1 {res['S1']!r} S2 {res['S2']!r} positive {res['positive']}")]


SUITES = {
    "verify-afe": verify_afe,
    "verify-charsum": verify_charsum,
    "verify-first-moment": verify_first_moment,
    "mollifier-check": mollifier_check,
    "sweep": sweep_checks,
    "holder-check": holder_suite,
    "lower-bound": lower_bound_suite,
    "mertens": mertens_suite,
    "s1s2": s1s2_suite,
}


# settings that change how a run executes but not what it computes
RUN_ONLY_KEYS = {"threads", "cache_dir", "out_dir", "csv", "dump_family"}


def render(ctx: Context, results: dict[str, list[Check]]) -> tuple[str, str]:
    """Report text and its digest (the digest skips the timing section)."""
    cfg_lines = ctx.cfg.as_lines()
    run_lines = [l for l in cfg_lines if l.split(" = ", 1)[0] in RUN_ONLY_KEYS]
    cfg_lines = [l for l in cfg_lines if l not in run_lines]
    lines = ["# qtwist report", "", "## config"] + cfg_lines + ["", "## cache digests"]
    lines += ctx.digests()
    for name, checks in results.items():
        lines += ["", f"## {name}"]
        for c in checks:
            tag = "INFO" if c.passed is None else ("PASS" if c.passed else "FAIL")
            lines.append(f"[{tag}] {c.name}: {c.detail}".rstrip(": "))
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    timing = ["", "## run settings (excluded from digest)"] + run_lines
    timing += ["", "## timing (excluded from digest)"] + [f"{k}: {v:.3f} s" for k, v in ctx.timings.items()]
    return body + f"\nreport digest: {digest}\n" + "\n".join(timing) + "\n", digest


def run_suite(cfg: RunConfig, names) -> tuple[int, str, str]:
    """Run the named suites in order; exit status 0 iff no hard check failed."""
    ctx = Context(cfg)
    results = {}
    for name in names:
        t0 = time.perf_counter()
        results[name] = SUITES[name](ctx)
        ctx.timings[name] = time.perf_counter() - t0
    text, digest = render(ctx, results)
    failed = any(c.passed is False for checks in results.values() for c in checks)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{'-'.join(names) if len(names) == 1 else 'report'}.txt").write_text(text)
    return (1 if failed else 0), text, digest
