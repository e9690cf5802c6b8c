"""The acceptance suite: ten end-to-end checks with pinned seeds.

Each criterion returns a :class:`CriterionResult`; ``scale`` multiplies every
numeric tolerance (stderr multiples, absolute error tolerances, relative
exponent windows) so the suite can be tightened to show which checks are
sensitive. Analytic inequalities are never scaled.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import batch
from .charfn import functional_log, mc_char_functional
from .growth import DichotomyConfig, bump_probe, dichotomy_experiment, dyadic_experiment
from .levy_measure import (FiniteAtomic, GaussianDensity, LevyTriplet, LogSquaredTail, ParetoTail,
                           custom_from_expression)
from .pairing import fubini_consistency
from .path_sim import simulate_path
from .schwartz import (Mollifier, Tensor, antiderivative_I, bump_family_1d, bump_family_dd, from_id, gaussian,
                       grando_constant, hermite, iphi_constant, np2_constant, seminorm, tensor_I_d)
from .sheet_sim import simulate_sheet

SEEDS = {1: 20261, 2: 20262, 3: 20263, 4: 20264, 5: 7, 8: 20268, 9: 20269, 10: 202610}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name} ({self.seconds:.1f}s): {self.detail.get('summary', '')}"

    def to_record(self) -> dict:
        return {"criterion": self.number, "name": self.name, "pass": self.passed, "seconds": self.seconds,
                **self.detail}


def small_jump_density():
    return custom_from_expression("where(abs(x) <= 1, abs(x)**-1.5, 0)")


def full_triplet() -> LevyTriplet:
    return LevyTriplet(1.0, 1.0, ParetoTail(0.5) + small_jump_density())


# ---------------------------------------------------------------------------


def gamma_moments(scale=1.0):
    res = batch.gamma_inverse_moments(SEEDS[1], 10 ** 6, (5, 8))
    rows, ok = [], True
    for n, r in res.items():
        for key, exact in (("inv2", 1.0 / ((n - 1) * (n - 2))), ("inv3", 1.0 / ((n - 1) * (n - 2) * (n - 3)))):
            m = r[key]
            z = abs(m.mean - exact) / m.stderr
            good = z <= 3 * scale
            ok &= good
            rows.append({"n": n, "moment": key, "mc": m.mean, "exact": exact, "stderr": m.stderr, "z": z,
                         "pass": good})
    worst = max(rows, key=lambda r: r["z"])
    return ok, {"rows": rows, "summary": f"max |z| = {worst['z']:.2f} (n={worst['n']}, {worst['moment']})"}


def _hit_errors(rows):
    errs = [r.error for r in rows if r.hit]
    return len(errs), max(errs, default=0.0)


def bump_1d(scale=1.0):
    ns = range(4, 51)
    freq = batch.bump_miss_1d(SEEDS[2], 10 ** 5, ns)
    slack = [(n, f.mean - batch.miss_bound_1d(n) - 3 * scale * f.stderr) for n, f in freq.items()]
    bound_ok = all(s <= 0 for _, s in slack)
    tr = LevyTriplet(0.0, 0.0, ParetoTail(1.5))
    hits, worst = 0, 0.0
    for i in range(500):
        path = simulate_path(tr, 100.0, grid_dt=100.0, eps=1.0, seed=SEEDS[2] + i)
        h, e = _hit_errors(bump_probe(path, ns))
        hits, worst = hits + h, max(worst, e)
    pair_ok = worst <= 1e-6 * scale
    n_worst, s_worst = max(slack, key=lambda x: x[1])
    return bound_ok and pair_ok, {
        "miss": {n: f.mean for n, f in freq.items()}, "hits": hits, "max_hit_error": worst,
        "summary": f"worst miss - bound - 3se = {s_worst:.2e} at n={n_worst}; {hits} hits, max |<X,phi_n> - X_Sn| "
                   f"= {worst:.1e}"}


def bump_2d(scale=1.0):
    ns = range(5, 31)
    freq, short = batch.bump_miss_dd(SEEDS[3], 10 ** 5, ns, d=2, horizon=80.0)
    slack = [(n, f.mean - batch.miss_bound_dd(n, 2) - 3 * scale * f.stderr) for n, f in freq.items()]
    bound_ok = all(s <= 0 for _, s in slack)
    tr = LevyTriplet(0.0, 0.0, ParetoTail(1.5))
    hits, worst = 0, 0.0
    for i in range(200):
        sk = simulate_sheet(tr, (2.0, 80.0), grid_dt=80.0, eps=1.0, seed=SEEDS[3] + i)
        h, e = _hit_errors(bump_probe(sk, ns))
        hits, worst = hits + h, max(worst, e)
    pair_ok = worst <= 1e-6 * scale
    n_worst, s_worst = max(slack, key=lambda x: x[1])
    return bound_ok and pair_ok, {
        "miss": {n: f.mean for n, f in freq.items()}, "short_replicates": short, "hits": hits,
        "max_hit_error": worst,
        "summary": f"worst miss - bound - 3se = {s_worst:.2e} at n={n_worst}; {hits} hits, max |pairing - L_Sn| "
                   f"= {worst:.1e}"}


FUBINI_PHIS = ("mollifier", "bump1d:2:1", "bump1d:1.5:2", "bump1d:3:1")


def fubini(scale=1.0):
    tr = full_triplet()
    T, dts = 4.0, (4.0 / 500, 4.0 / 1000, 4.0 / 2000)
    fails, ratios, worst = 0, [], 0.0
    for i in range(25):
        seed = SEEDS[4] + i
        sks = [simulate_path(tr, T, grid_dt=h, seed=seed) for h in dts]
        for name in FUBINI_PHIS:
            phi = from_id(name)
            reps = [fubini_consistency(sk, phi) for sk in sks]
            fails += sum(r.difference > r.budget * scale for r in reps)
            worst = max(worst, max(r.difference / r.budget for r in reps))
            ratios += [reps[j].budget / reps[j + 1].budget for j in range(len(reps) - 1)]
    shrink_ok = min(ratios) >= 1.3
    return fails == 0 and shrink_ok, {
        "pairs": 25 * len(FUBINI_PHIS), "budget_violations": fails, "max_difference_over_budget": worst,
        "min_shrink": min(ratios),
        "summary": f"100 pairs x 3 grids: {fails} budget violations (max diff/budget {worst:.3f}); "
                   f"min budget shrink per halving {min(ratios):.2f}"}


CHARFN_TRIPLETS = (("(0,1,0)", LevyTriplet(0.0, 1.0, FiniteAtomic())),
                   ("(0,0,atom(2,1))", LevyTriplet(0.0, 0.0, FiniteAtomic(((2.0, 1.0),)))),
                   ("(1,1,Pareto(0.5))", LevyTriplet(1.0, 1.0, ParetoTail(0.5))))
CHARFN_PHIS = ("mollifier", "bump1d:2:1", "gaussian")


def charfn(scale=1.0):
    rows, ok, worst = [], True, 0.0
    for tid, tr in CHARFN_TRIPLETS:
        for pid in CHARFN_PHIS:
            phi = from_id(pid)
            exact = complex(np.exp(functional_log(tr, phi)))
            mean, se = mc_char_functional(tr, phi, 10 ** 5, SEEDS[5])
            zr = abs(mean.real - exact.real) / se.real if se.real > 0 else (0.0 if mean.real == exact.real else math.inf)
            zi = abs(mean.imag - exact.imag) / se.imag if se.imag > 0 else (0.0 if mean.imag == exact.imag else math.inf)
            good = max(zr, zi) <= 5 * scale
            ok &= good
            worst = max(worst, zr, zi)
            rows.append({"phi_id": pid, "triplet_id": tid, "analytic_re": exact.real, "analytic_im": exact.imag,
                         "mc_re": mean.real, "mc_im": mean.imag, "stderr_re": se.real, "stderr_im": se.imag,
                         "pass": good})
    return ok, {"rows": rows, "summary": f"9 pairs, max componentwise |z| = {worst:.2f} (limit {5 * scale:g})"}


def operator_I(scale=1.0):
    ok, worst, bound_rows = True, 0.0, []
    for name, f in (("gaussian", gaussian()), ("hermite-3", hermite(3))):
        lo, hi = f.window()
        t = np.linspace(lo, hi, 200001)
        err = float(np.max(np.abs(antiderivative_I(f.derivative(1))(t) - f(t))))
        worst = max(worst, err)
        If = antiderivative_I(f)
        for p in (0, 1, 2):
            lhs = If.sup_cert(p, 0)
            rhs = iphi_constant(p) * seminorm(Tensor((f,)), p + 2).lower
            bound_rows.append({"phi": name, "p": p, "lhs": lhs, "rhs": rhs, "pass": lhs <= rhs})
    g = gaussian()
    G = Tensor((g, g))
    u = np.linspace(-g.window()[1], g.window()[1], 801)
    pts = np.stack(np.meshgrid(u, u, indexing="ij"), -1).reshape(-1, 2)
    terr = float(np.max(np.abs(tensor_I_d(G.mixed_derivative())(pts) - G(pts))))
    ok = worst <= 1e-9 * scale and terr <= 1e-9 * scale and all(r["pass"] for r in bound_rows)
    return ok, {"I_error": worst, "I_d_error": terr, "bounds": bound_rows,
                "summary": f"sup|I(phi') - phi| = {worst:.1e}, tensor {terr:.1e}; "
                           f"{sum(r['pass'] for r in bound_rows)}/{len(bound_rows)} weighted bounds hold"}


def seminorm_bounds(scale=1.0):
    rows = []
    base1 = {p: seminorm(Tensor((Mollifier(),)), p) for p in range(3)}
    base2 = {p: seminorm(Tensor((Mollifier(), Mollifier())), p) for p in range(3)}
    for S in (1.0, 2.0, 4.0, 8.0, 16.0):
        for p in (0, 1, 2):
            lhs = seminorm(Tensor((bump_family_1d(S, 2),)), p)
            rhs = np2_constant(p) * S ** (3 * p + 2)
            rows.append({"bound": "np2", "S_n": S, "p": p, "lhs": lhs.lower, "rhs": rhs * base1[p].upper,
                         "pass": lhs.lower <= rhs * base1[p].upper,
                         "certified": lhs.upper <= rhs * base1[p].lower})
            lhs = seminorm(bump_family_dd(S, 2), p)
            rhs = grando_constant(p, 2) * S ** (6 + 4 * p)
            rows.append({"bound": "grando", "S_n": S, "p": p, "lhs": lhs.lower, "rhs": rhs * base2[p].upper,
                         "pass": lhs.lower <= rhs * base2[p].upper,
                         "certified": lhs.upper <= rhs * base2[p].lower})
    mono = []
    for f in (from_id("gaussian"), from_id("hermite-3"), from_id("mollifier"), from_id("bump1d:4:2"),
              from_id("gaussian", 2), from_id("bump-dd:2", 2)):
        vals = [seminorm(f, p).lower for p in range(5)]
        mono.append(all(a <= b for a, b in zip(vals, vals[1:])))
    ok = all(r["pass"] for r in rows) and all(mono)
    cert = sum(r["certified"] for r in rows)
    return ok, {"rows": rows, "monotone": mono,
                "summary": f"{sum(r['pass'] for r in rows)}/{len(rows)} bounds hold ({cert} certified strictly); "
                           f"N_p <= N_(p+1) on {sum(mono)}/{len(mono)} functions"}


def dichotomy(scale=1.0):
    rows, ok = [], True
    for label, nu in (("Pareto(0.5)", ParetoTail(0.5)), ("LogSquaredTail", LogSquaredTail())):
        for d in (1, 2):
            rep = dichotomy_experiment(LevyTriplet(0.0, 0.0, nu), d, DichotomyConfig(seeds=200, seed=SEEDS[8]))
            ok &= rep.consistent
            rows.append({"measure": label, "d": d, **rep.to_record()})
    summ = "; ".join(f"{r['measure']} d={r['d']}: {r['pam_verdict']}/{r['trend']}" for r in rows)
    return ok, {"rows": rows, "summary": summ}


def dyadic(scale=1.0):
    rows, ok = [], True
    for d in (1, 2):
        rep = dyadic_experiment(LevyTriplet(0.0, 1.0, FiniteAtomic()), d, seeds=200, seed=SEEDS[9])
        pred = rep.predicted(d)
        rel = abs(rep.exponent - pred) / pred
        good = rel <= 0.25 * scale
        ok &= good
        rows.append({"d": d, "alpha": rep.alpha, "exponent": rep.exponent, "predicted": pred, "rel_error": rel,
                     "blocks": rep.to_rows(), "pass": good})
    summ = "; ".join(f"d={r['d']}: exponent {r['exponent']:.3f} vs {r['predicted']:.3f}" for r in rows)
    return ok, {"rows": rows, "summary": summ}


def band_sums(scale=1.0):
    measures = (("gaussian(1,1)", GaussianDensity(1.0, 1.0)),
                ("atomic", FiniteAtomic(((0.3, 2.0), (-0.05, 5.0), (0.7, 1.0), (3.0, 1.0)))),
                ("x^-1.5 on (0,1]", custom_from_expression("where((x > 0) & (x <= 1), x**-1.5, 0)")),
                ("pareto(1.5)+|x|^-1.5", ParetoTail(1.5) + small_jump_density()))
    rows, ok = [], True
    for label, nu in measures:
        target = nu.small_second_moment()
        total = math.fsum(nu.band_variance(n) for n in range(200))
        rel = abs(total - target) / target
        mc = batch.compensated_small_sum(nu, 10, SEEDS[10], 10 ** 5)
        z = abs(mc.mean) / mc.stderr
        good = rel <= 1e-6 * scale and z <= 3 * scale
        ok &= good
        rows.append({"measure": label, "band_sum": total, "second_moment": target, "rel_error": rel,
                     "mc_mean": mc.mean, "stderr": mc.stderr, "z": z, "pass": good})
    worst_rel = max(r["rel_error"] for r in rows)
    worst_z = max(r["z"] for r in rows)
    return ok, {"rows": rows, "summary": f"max relative band-sum error {worst_rel:.1e}; max |z| {worst_z:.2f}"}


CRITERIA = (
    (1, "gamma inverse moments", gamma_moments),
    (2, "bump probe d=1", bump_1d),
    (3, "bump probe d=2", bump_2d),
    (4, "Fubini consistency", fubini),
    (5, "characteristic functional", charfn),
    (6, "operator I", operator_I),
    (7, "seminorm bounds", seminorm_bounds),
    (8, "growth dichotomy", dichotomy),
    (9, "dyadic-block decay", dyadic),
    (10, "small-jump bands", band_sums),
)


def run_criterion(number: int, scale: float = 1.0) -> CriterionResult:
    for num, name, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            try:
                passed, detail = fn(scale)
            except Exception as exc:  # numeric failures become records, not crashes
                passed, detail = False, {"error": f"{type(exc).__name__}: {exc}",
                                         "summary": f"error: {type(exc).__name__}: {exc}"}
            return CriterionResult(num, name, bool(passed), detail, time.perf_counter() - t0)
    raise ValueError(f"no criterion {number}")


def run_suite(scale: float = 1.0, only=None, threads: int = 1) -> list:
    """Run the selected criteria; results come back in criterion order."""
    numbers = [n for n, _, _ in CRITERIA if only is None or n in only]
    if threads <= 1:
        return [run_criterion(n, scale) for n in numbers]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda n: run_criterion(n, scale), numbers))
