"""Acceptance criteria 1 to 11, one verdict line each.

Every test records its verdict through the ``criterion`` fixture before
asserting, so the summary section lists all of them even when one fails.
"""

import math
import time

import numpy as np
import pytest

from orlicz_lab import registry
from orlicz_lab.convex_core import (
    SearchConfig,
    conjugate_oracle,
    directional_derivatives,
    fenchel_gap,
    legendre_values,
    monotone_quotient_excess,
)
from orlicz_lab.delta2 import (
    delta2_diagnostic,
    gamma,
    gamma_grid_oracle,
    growth_exponents,
    young_estimate,
)
from orlicz_lab.errors import PrecisionLoss
from orlicz_lab.func_dsl import NormSpec, lift_radial, parse_young
from orlicz_lab.orlicz import (
    DiscreteProbabilitySpace,
    convolution_check,
    holder_check,
    luxemburg,
    luxemburg_norm,
    mixture_concavity_check,
    orlicz_norm,
    perturbation_sweep,
    sandwich_check,
)
from orlicz_lab.subgrad import (
    barycenter_subgradient,
    mollified_subgradient,
    sphere_average_subgradient,
)

SUITE = registry.DEFAULT_SUITE
HOMOGENEOUS = ("pow1", "pow1.5", "pow2", "pow3", "quadratic")


def lift(text, dim=1):
    return lift_radial(parse_young(text), NormSpec(), dim)


def random_instance(rng, atoms, dim, scale):
    sp = DiscreteProbabilitySpace.random(rng, atoms)
    return sp, rng.standard_normal((atoms, dim)) * scale


# -- 1: Legendre transform of |x| max(|x|, 1) -------------------------------------

GRID_1D = np.round(np.linspace(-5.0, 5.0, 1001), 12)[:, None]
LITERAL = np.maximum.reduce([np.zeros(1001), np.abs(GRID_1D[:, 0]) - 1.0, GRID_1D[:, 0] ** 2 / 4])


def hinge_conjugate_oracle(s):
    """sup_r (r s - r max(r, 1)) by cases: the maximiser is r = 1 on [1, 2]
    and r = s/2 beyond; on [0, 1] the objective is non-increasing."""
    s = np.abs(s)
    return np.where(s <= 1.0, 0.0, np.where(s <= 2.0, s - 1.0, s * s / 4.0))


@pytest.fixture(scope="module")
def hinge_numeric():
    f = registry.make("hinge_power:1")
    t0 = time.perf_counter()
    values = legendre_values(f, GRID_1D, numeric=True)
    return values, time.perf_counter() - t0


def test_criterion_01_legendre_hinge(criterion, hinge_numeric):
    values, elapsed = hinge_numeric
    err = float(np.abs(values - hinge_conjugate_oracle(GRID_1D[:, 0])).max())
    ok = err <= 1e-6 and elapsed < 10.0
    criterion("1", ok, f"numeric L* vs case-by-case conjugate: max err {err:.2e}, "
                       f"{elapsed:.2f}s (literal closed form: see 1-literal)")
    assert ok


@pytest.mark.xfail(strict=True, reason="the stated closed form max{0,|x|-1,x^2/4} is not the "
                                        "conjugate on 1 < |x| < 2 or |x| < 1; see decisions ledger")
def test_criterion_01_literal_closed_form(criterion, hinge_numeric):
    values, _ = hinge_numeric
    dev = np.abs(values - LITERAL)
    k = int(np.argmax(dev))
    ok = dev[k] <= 1e-6
    criterion("1-literal", ok, f"numeric L* vs max{{0,|x|-1,x^2/4}}: max dev {dev[k]:.4f} at "
                               f"x={GRID_1D[k, 0]:g} (L*={values[k]:.4f}, formula={LITERAL[k]:.4f})")
    assert ok


def test_hinge_conjugate_oracle_by_brute_force():
    # the case-by-case oracle against a dense grid sup, independent of the library
    r = np.linspace(0.0, 10.0, 1_000_001)
    v = r * np.maximum(r, 1.0)
    for s in (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0):
        assert float(np.max(s * r - v)) == pytest.approx(float(hinge_conjugate_oracle(s)), abs=1e-9)


# -- 2: Orlicz over Luxemburg ratio for powers -------------------------------------


def test_criterion_02_orlicz_ratio(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst, ratio_dev = 0.0, 0.0
    for p in (1.5, 2.0, 3.0):
        q = p / (p - 1.0)
        const = p ** (1 / p) * q ** (1 / q)
        for n in (1, 3):
            f = registry.make(f"pow{p:g}", n)
            for _ in range(20):
                sp, u = random_instance(rng, 64, n, rng.uniform(0.1, 5.0))
                res = orlicz_norm(f, sp, u)
                target = const * res.luxemburg
                worst = max(worst, abs(res.orlicz_lower / target - 1), abs(res.orlicz_upper / target - 1))
                if p == 2.0:
                    ratio_dev = max(ratio_dev, abs(res.orlicz_lower / res.luxemburg - 2),
                                    abs(res.orlicz_upper / res.luxemburg - 2))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and ratio_dev <= 1e-3 and elapsed < 60.0
    criterion("2", ok, f"120 instances: max rel dev {worst:.2e}, |ratio-2| at p=2 {ratio_dev:.2e}, "
                       f"{elapsed:.1f}s")
    assert ok


# -- 3: sandwich ------------------------------------------------------------------


def test_criterion_03_sandwich(criterion):
    rng = np.random.default_rng(3)
    failures, low, high = [], math.inf, math.inf
    for name in SUITE:
        for i in range(100):
            dim = 1 + i % 3
            f = registry.make(name, dim)
            sp, u = random_instance(rng, int(rng.integers(2, 65)), dim, rng.uniform(0.1, 5.0))
            rep = sandwich_check(f, sp, u)
            lux, lo, up = (rep.values[k] for k in ("luxemburg", "orlicz_lower", "orlicz_upper"))
            s1, s2 = lo + 1e-7 - lux, 2 * lux + 1e-7 - up
            low, high = min(low, s1), min(high, s2)
            if s1 < 0 or s2 < 0:
                failures.append((name, i))
    ok = not failures
    criterion("3", ok, f"{100 * len(SUITE)} instances, failures {len(failures)}, "
                       f"min slack lower {low:.2e}, upper {high:.2e}")
    assert ok, failures[:5]


# -- 4: Hoelder-type bound ----------------------------------------------------------


def test_criterion_04_holder(criterion):
    rng = np.random.default_rng(4)
    worst, failures = math.inf, []
    for name in SUITE:
        for dim in (1, 2):
            f = registry.make(name, dim)
            conj = conjugate_oracle(f)
            for i in range(50):
                sp = DiscreteProbabilitySpace.random(rng, 16)
                u = rng.standard_normal((16, dim)) * rng.uniform(0.1, 5.0)
                v = rng.standard_normal((16, dim)) * rng.uniform(0.1, 5.0)
                slack = holder_check(f, sp, u, v, conj=conj).slacks["rhs_minus_lhs"]
                worst = min(worst, slack)
                if not slack >= 0.0:
                    failures.append((name, dim, i))
    ok = not failures
    criterion("4", ok, f"{100 * len(SUITE)} pairs, negative slacks {len(failures)}, "
                       f"min slack {worst:.3e}")
    assert ok, failures[:5]


# -- 5: Young function closed forms ---------------------------------------------------

R_GRID = np.round(np.logspace(-1, 1, 21), 12)


def test_criterion_05_young_closed_forms(criterion):
    devs = {}
    for p in (1.0, 2.0, 3.0):
        target = R_GRID**p * np.maximum(R_GRID, 1.0)
        est = young_estimate(lift(f"pow(r,{p:g})*log1p(r)", 2), "Phi", R_GRID)
        devs[f"plog p={p:g}"] = (float(np.abs(est.values / target - 1).max()), 0.02)
        est = young_estimate(lift(f"pow(r,{p:g})*max(r,1)", 2), "Phi", R_GRID)
        devs[f"hinge p={p:g}"] = (float(np.abs(est.values / target - 1).max()), 0.02)
    for name in HOMOGENEOUS:
        f = registry.make(name, 2)
        p = f.homogeneity_order
        est = young_estimate(f, "Phi", R_GRID)
        devs[name] = (float(np.abs(est.values / R_GRID**p - 1).max()), 0.01)
    # V(r) = r^2 log(2 + r): V / log 3 <= Phi <= (1 + 1 / log 2) V
    V = R_GRID**2 * np.log(2 + R_GRID)
    phi = young_estimate(registry.make("plog2:2", 2), "Phi", R_GRID).values
    lower = float((phi - V / math.log(3)).min() / V.max())
    upper = float(((1 + 1 / math.log(2)) * V - phi).min() / V.max())
    bad = [k for k, (d, tol) in devs.items() if d > tol]
    ok = not bad and lower >= -1e-9 and upper >= -1e-9
    worst = max(devs, key=lambda k: devs[k][0] / devs[k][1])
    criterion("5", ok, f"worst {worst} rel dev {devs[worst][0]:.2e} (tol {devs[worst][1]:g}); "
                       f"plog2 sandwich slacks {lower:.2e}, {upper:.2e}")
    assert ok, (bad, lower, upper)


# -- 6: Delta2 diagnostic ------------------------------------------------------------------


def test_criterion_06_delta2(criterion):
    notes, bad = [], []
    for name in HOMOGENEOUS:
        f = registry.make(name, 2)
        est = delta2_diagnostic(f).sup_ratio_estimate
        if abs(est / f.homogeneity_order - 1) > 0.01:
            bad.append((name, est))
    for p in (1.0, 1.5, 2.0):
        est = delta2_diagnostic(lift(f"pow(r,{p:g})*max(r,1)", 2)).sup_ratio_estimate
        if abs(est / (p + 1) - 1) > 0.02:
            bad.append((f"hinge p={p:g}", est))
    worst_excess = -math.inf
    for name in SUITE:
        rep = delta2_diagnostic(registry.make(name, 2))
        excess = rep.sup_ratio_estimate / rep.p_plus - 1
        worst_excess = max(worst_excess, excess)
        if excess > 0.02:
            bad.append((name, rep.sup_ratio_estimate, rep.p_plus))
    ok = not bad
    notes.append(f"max estimate/p_plus - 1 = {worst_excess:.2e}")
    criterion("6", ok, f"Euler and hinge values within tolerance, {'; '.join(notes)}")
    assert ok, bad


# -- 7: subgradient certificates ----------------------------------------------------------

METHODS = {
    "sphere_average": sphere_average_subgradient,
    "barycenter": barycenter_subgradient,
    "mollified": lambda f, x: mollified_subgradient(f, x, 1e-6),
}


def certificate_points(rng, total=200):
    """Per registry function: the origin, points on the unit sphere (the kink
    radius of the hinge profiles), and Gaussian points, in dimensions 1 to 3."""
    pts = []
    per = total // len(SUITE) + 1
    for name in SUITE:
        for i in range(per):
            dim = (1, 2, 3)[i % 3]
            if i < 3:
                x = np.zeros(dim)
            elif i < 9:
                x = rng.standard_normal(dim)
                x /= np.linalg.norm(x)
            else:
                x = rng.standard_normal(dim) * 2.0
            pts.append((name, x))
    return pts[:total]


def one_sided_oracle(name, x):
    """(L'(x+) + L'(x-)) / 2 in dimension 1 from hand-derived profile slopes."""
    kind, p = registry.parse_name(name)
    r = abs(x)

    def slope(r, side):
        if kind == "quadratic":
            return r
        if kind == "power":
            return p * r ** (p - 1) if r > 0 or p == 1 else 0.0
        if kind == "hinge_power":
            below = p * r ** (p - 1) if r > 0 or p == 1 else 0.0
            return below if r < 1 or (r == 1 and side < 0) else (p + 1) * r**p
        if kind == "plog":
            return p * r ** (p - 1) * math.log1p(r) + r**p / (1 + r)
        if kind == "plog2":
            return p * r ** (p - 1) * math.log(2 + r) + r**p / (2 + r)
        raise KeyError(kind)

    if x == 0:
        return 0.0
    s = math.copysign(1.0, x)
    right = s * slope(r, s)
    left = s * slope(r, -s)
    return 0.5 * (right + left)


def test_one_sided_oracle_examples():
    assert one_sided_oracle("hinge_power:1", 1.0) == 1.5
    assert one_sided_oracle("hinge_power:1", -1.0) == -1.5
    assert one_sided_oracle("pow1", -2.0) == -1.0
    assert one_sided_oracle("pow2", 0.5) == pytest.approx(1.0)


def test_criterion_07_subgradient_certificates(criterion):
    rng = np.random.default_rng(7)
    worst, failures, probes, unresolved = math.inf, [], math.inf, 0
    mid_err = 0.0
    for name, x in certificate_points(rng):
        f = registry.make(name, x.size)
        for method, select in METHODS.items():
            y, cert = select(f, x)
            worst = min(worst, cert.min_slack)
            probes = min(probes, cert.probe_count)
            unresolved += not cert.resolved
            if cert.min_slack < -1e-7:
                failures.append((name, x.tolist(), method, cert.min_slack))
            if method == "sphere_average" and x.size == 1:
                mid_err = max(mid_err, abs(y[0] - one_sided_oracle(name, float(x[0]))))
    ok = not failures and probes >= 1000 and mid_err <= 1e-8
    criterion("7", ok, f"200 points x 3 maps: min slack {worst:.2e}, probes >= {probes}, "
                       f"1D midpoint err {mid_err:.1e}, best-effort derivatives {unresolved}")
    assert ok, failures[:5]


# -- 8: gamma -------------------------------------------------------------------------


def test_criterion_08_gamma(criterion):
    exact = all(gamma(p, p) == 1.0 for p in (1.0, 1.25, 2.0, 3.7, 10.0))
    g21, o21 = gamma(2.0, 1.0), gamma_grid_oracle(2.0, 1.0)
    in_range = all(0.0 < gamma(p0 + d, p0) <= 1.0
                   for p0 in np.linspace(1.0, 5.0, 9) for d in np.linspace(0.0, 5.0, 11))
    ok = exact and abs(g21 - o21) <= 1e-6 and abs(g21 - 0.75) <= 1e-6 and in_range
    criterion("8", ok, f"gamma(p,p)=1 {exact}, gamma(2,1)={g21:.10f} oracle {o21:.10f}, "
                       f"range over 99-point grid {in_range}")
    assert ok


# -- 9: mixtures and convolutions ------------------------------------------------------------


def convolution_instance(rng, dim):
    size = 3
    pts = lambda: {tuple(int(c) for c in rng.integers(0, size, dim)) for _ in range(3)}
    lam_keys, kap_keys = sorted(pts()), sorted(pts())
    lam = dict(zip(lam_keys, rng.dirichlet(np.ones(len(lam_keys)))))
    kap = dict(zip(kap_keys, rng.dirichlet(np.ones(len(kap_keys)))))
    grid = np.stack(np.meshgrid(*[np.arange(2 * size)] * dim, indexing="ij"), -1).reshape(-1, dim)
    return lam, kap, grid


def test_criterion_09_mixtures_and_convolution(criterion):
    rng = np.random.default_rng(9)
    homog = math.inf
    for i in range(50):
        name = HOMOGENEOUS[i % len(HOMOGENEOUS)]
        dim = 1 + i % 2
        f = registry.make(name, dim)
        atoms = int(rng.integers(4, 33))
        spaces = [DiscreteProbabilitySpace.random(rng, atoms) for _ in range(2)]
        t = rng.uniform()
        u = rng.standard_normal((atoms, dim)) * rng.uniform(0.1, 5.0)
        rep = mixture_concavity_check(f, u, spaces, [t, 1 - t])
        homog = min(homog, rep.slacks["concavity"])
    f = lift("pow(r,2)*max(r,1)")
    p_minus, p_plus = growth_exponents(f)
    g_expected = gamma(max(p_plus, p_minus), min(p_plus, p_minus))
    inhomog_ok = True
    for _ in range(20):
        spaces = [DiscreteProbabilitySpace.random(rng, 12) for _ in range(2)]
        t = rng.uniform()
        rep = mixture_concavity_check(f, rng.standard_normal((12, 1)) * rng.uniform(0.1, 5.0),
                                      spaces, [t, 1 - t], exponents=(p_minus, p_plus))
        inhomog_ok &= rep.passed and rep.values["gamma"] == g_expected
    conv_fail = 0
    for i in range(20):
        dim = 1 + i % 2
        f = registry.make(HOMOGENEOUS[i % len(HOMOGENEOUS)], 1)
        lam, kap, grid = convolution_instance(rng, dim)
        u = {tuple(int(c) for c in g): rng.standard_normal(1) for g in grid}
        conv_fail += not convolution_check(f, u, lam, kap).passed
    ok = homog >= -1e-8 and inhomog_ok and conv_fail == 0
    criterion("9", ok, f"homogeneous min slack {homog:.2e}; hinge lift with gamma={g_expected:.6f} "
                       f"(p-={p_minus:.4f}, p+={p_plus:.4f}) {inhomog_ok}; "
                       f"convolution failures {conv_fail}/20")
    assert ok


# -- 10: perturbation ---------------------------------------------------------------------


def test_criterion_10_perturbation(criterion):
    rng = np.random.default_rng(10)
    eps = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    f, f0 = registry.make("abs"), registry.make("quadratic")
    gaps, bad = [], []
    for i in range(10):
        sp, u = random_instance(rng, 16, 1, rng.uniform(0.1, 5.0))
        rep = perturbation_sweep(f, f0, sp, u, eps)
        dec = all(a >= b for a, b in zip(rep.norms, rep.norms[1:]))
        inc = all(a <= b for a, b in zip(rep.conj_norms, rep.conj_norms[1:]))
        gaps.append(rep.terminal_gap)
        if not (dec and inc and rep.terminal_gap < 1e-4 and rep.passed):
            bad.append((i, rep.violations))
    ok = not bad
    criterion("10", ok, f"10 fields: monotone norms, max terminal gap {max(gaps):.2e}")
    assert ok, bad


# -- 11: property suites over seeds 1..10 ------------------------------------------------------


def _property_failures(seed):
    rng = np.random.default_rng(seed)
    cfg = SearchConfig(seed=seed)
    fails = {k: 0 for k in ("monotone_quotient", "homogeneity", "subadditivity", "young_fenchel",
                            "biconjugacy", "triangle", "attainment", "reciprocal")}
    discarded = 0
    for name in SUITE:
        f = registry.make(name, 2)
        X = rng.standard_normal((4, 2)) * 2
        T = rng.standard_normal((4, 2))
        S = rng.standard_normal((4, 2))
        for x, t, s in zip(X, T, S):
            if monotone_quotient_excess(f, x, t, cfg) > 0.0:
                fails["monotone_quotient"] += 1
            a = rng.uniform(0.1, 10)
            try:
                d = directional_derivatives(f, np.array([x] * 4), np.array([t, a * t, s, t + s]), cfg)
            except PrecisionLoss:
                discarded += 1
                continue
            if abs(d[1] - a * d[0]) > 1e-5 * (1 + abs(a * d[0])):
                fails["homogeneity"] += 1
            if d[3] > d[0] + d[2] + 1e-5 * (1 + abs(d[0]) + abs(d[2])):
                fails["subadditivity"] += 1
        g = registry.make(name, 1)
        Y = rng.standard_normal((6, 1)) * 2
        for x, y in zip(rng.standard_normal((6, 1)) * 2, Y):
            if fenchel_gap(g, x, y, cfg) < -cfg.tol_fenchel:
                fails["young_fenchel"] += 1
        if g.analytic_conjugate is not None:
            P = rng.uniform(-3, 3, (5, 1))
            back = legendre_values(conjugate_oracle(g, cfg), P, cfg, numeric=True)
            fails["biconjugacy"] += int(np.sum(np.abs(back - g.values(P)) >
                                               cfg.tol_biconj * (1 + np.abs(g.values(P)))))
        sp, u = random_instance(rng, 16, 2, rng.uniform(0.1, 5))
        v = rng.standard_normal((16, 2)) * rng.uniform(0.1, 5)
        nu, nv, nuv = (luxemburg_norm(f, sp, w, cfg) for w in (u, v, u + v))
        if nuv > (nu + nv) * (1 + 1e-9):
            fails["triangle"] += 1
        res = luxemburg(f, sp, u, cfg)
        if not res.attained:
            fails["attainment"] += 1
        if f.homogeneity_order is None:
            r = np.round(np.exp(rng.uniform(-2, 2, 3)), 12)
            phi = young_estimate(f, "Phi", 1 / r, cfg).values
            psi = young_estimate(f, "Psi", r, cfg).values
            fails["reciprocal"] += int(np.sum(np.abs(phi * psi - 1) > 0.05))
    return fails, discarded


def test_criterion_11_property_suites(criterion):
    totals, discarded = {}, 0
    for seed in range(1, 11):
        fails, d = _property_failures(seed)
        discarded += d
        for k, v in fails.items():
            totals[k] = totals.get(k, 0) + v
    ok = sum(totals.values()) == 0
    failing = {k: v for k, v in totals.items() if v} or "none"
    criterion("11", ok, f"seeds 1..10, {len(totals)} properties, failures {failing}, "
                        f"near-kink discards {discarded}")
    assert ok, totals
