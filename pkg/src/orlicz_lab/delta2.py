"""Associated Young functions, Delta_2 diagnostics and the mixture constant.

For a convex L positive off the origin,

    R(r)   = sup_{|x| >= 1} L(rx) / L(x)
    Phi(r) = sup_{x != 0}   L(rx) / L(x)
    Psi(r) = inf_{x != 0}   L(rx) / L(x) = 1 / Phi(1/r)

A sup over all of R^n cannot be certified from evaluations, so Phi and R
estimates are lower bounds of the sup and Psi estimates upper bounds of the
inf; every estimate records the witness that attains it.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .convex_core import DEFAULT_CONFIG, directional_derivatives
from .errors import GridNotClosed, PMinusNotGreaterThanOne
from .sphere import direction_set

KINDS = ("R", "Phi", "Psi")
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class YoungFunctionEstimate:
    kind: str
    r_grid: np.ndarray
    values: np.ndarray
    bound_side: str
    witnesses: list = field(default_factory=list)
    exact: bool = False
    p_minus: Optional[float] = None
    p_plus: Optional[float] = None


def _search_points(f, cfg, kind):
    n = f.dim
    lo = 0.0 if kind == "R" else cfg.young_log10_min
    radii = np.logspace(lo, cfg.young_log10_max, cfg.young_radial_points)
    dirs = direction_set(n, cfg.young_directions_per_dim * n if n > 1 else None,
                         rng=cfg.rng(salt=29))
    X = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    return radii, dirs, X


def _refine(f, r, theta, log_lo, log_hi, sign, rounds):
    """Golden-section search of sign * L(r s theta) / L(s theta) over log s."""

    def ratio(t):
        x = math.exp(t) * theta
        with np.errstate(all="ignore"):
            den, num = f.values(np.stack([x, r * x]))
            v = num / den
        return sign * v if np.isfinite(v) and den > 0 else -math.inf

    a, b = log_lo, log_hi
    best_t, best = None, -math.inf
    for _ in range(rounds):
        c, d = b - _GOLD * (b - a), a + _GOLD * (b - a)
        fc, fd = ratio(c), ratio(d)
        for _ in range(80):
            if b - a <= 1e-13 * max(1.0, abs(b)):
                break
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _GOLD * (b - a)
                fc = ratio(c)
            else:
                a, c, fc = c, d, fd
                d = a + _GOLD * (b - a)
                fd = ratio(d)
        for t, v in ((c, fc), (d, fd)):
            if v > best:
                best, best_t = v, t
        if best_t is None:
            break
        # recentre a shrinking window on the best point for the next round
        half = (log_hi - log_lo) / 4.0
        a, b = max(log_lo, best_t - half), min(log_hi, best_t + half)
        log_lo, log_hi = a, b
    return sign * best, best_t


def young_estimate(f, kind, r_grid, cfg=None):
    """Estimate R, Phi or Psi of ``f`` on ``r_grid``.

    Ratios are scanned over radii on a log grid times sphere directions and
    the best cell is refined by golden-section search in log-radius.
    Homogeneous oracles short-circuit to r^p. Phi estimates also carry the
    growth exponents p_minus and p_plus.
    """
    cfg = cfg or DEFAULT_CONFIG
    est = _estimate(f, kind, r_grid, cfg)
    if kind == "Phi" and not est.exact:
        est.p_minus, est.p_plus = growth_exponents(f, cfg)
    return est


def _estimate(f, kind, r_grid, cfg):
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    r_grid = np.asarray(r_grid, dtype=float)
    if (r_grid < 0).any():
        raise ValueError("r_grid must be non-negative")
    side = "upper_bound_of_inf" if kind == "Psi" else "lower_bound_of_sup"
    if f.homogeneity_order is not None:
        p = f.homogeneity_order
        return YoungFunctionEstimate(kind, r_grid, r_grid**p, side, [None] * r_grid.size,
                                     exact=True, p_minus=p, p_plus=p)
    radii, dirs, X = _search_points(f, cfg, kind)
    base = f.values(X)
    usable = np.isfinite(base) & (base > 0)
    sign = -1.0 if kind == "Psi" else 1.0
    values = np.empty(r_grid.size)
    witnesses = []
    log_r = np.log(radii)
    for i, r in enumerate(r_grid):
        if r == 1.0:
            values[i] = 1.0
            witnesses.append(X[int(np.flatnonzero(usable)[0])].tolist())
            continue
        if r == 0.0:
            values[i] = 0.0
            witnesses.append(X[int(np.flatnonzero(usable)[0])].tolist())
            continue
        with np.errstate(all="ignore"):
            ratio = f.values(r * X) / base
        ok = usable & np.isfinite(ratio)
        if not ok.any():
            values[i] = math.inf if kind != "Psi" else 0.0
            witnesses.append(None)
            continue
        score = np.where(ok, sign * ratio, -np.inf)
        k = int(np.argmax(score))
        best = float(ratio[k])
        j, d = divmod(k, dirs.shape[0])
        lo = log_r[max(j - 1, 0)]
        hi = log_r[min(j + 1, radii.size - 1)]
        refined, t = _refine(f, r, dirs[d], lo, hi, sign, cfg.golden_rounds)
        witness = X[k]
        if t is not None and sign * refined > sign * best:
            best = refined
            witness = math.exp(t) * dirs[d]
        values[i] = best
        witnesses.append(np.asarray(witness).tolist())
    return YoungFunctionEstimate(kind, r_grid, values, side, witnesses)


def _richardson_slopes(slopes):
    # secant slopes at halving offsets have O(h) error
    s = np.asarray(slopes, dtype=float)
    if s.size == 1:
        return float(s[0])
    r1 = 2.0 * s[1:] - s[:-1]
    if r1.size == 1:
        return float(r1[0])
    r2 = (4.0 * r1[1:] - r1[:-1]) / 3.0
    return float(r2[-1])


def growth_exponents(f, cfg=None):
    """``(p_minus, p_plus)``: one-sided log-log slopes of Phi at r = 1."""
    cfg = cfg or DEFAULT_CONFIG
    if f.homogeneity_order is not None:
        p = f.homogeneity_order
        return p, p
    h = np.asarray(cfg.exponent_offsets, dtype=float)
    grid = np.concatenate([1.0 + h, 1.0 - h])
    est = _estimate(f, "Phi", grid, cfg)
    plus = np.log(est.values[: h.size]) / np.log1p(h)
    minus = np.log(est.values[h.size:]) / np.log1p(-h)
    return _richardson_slopes(minus), _richardson_slopes(plus)


@dataclass
class PropertyReport:
    kind: str
    pairs_tested: int
    violations: list
    shortfalls: list

    @property
    def passed(self):
        return not self.violations


def young_properties_check(est, tol=1e-6):
    """Check the structural properties of an estimated Young function.

    Violations of a bound that an under-estimated sup (or over-estimated
    inf) could produce spuriously are listed as ``shortfalls`` rather than
    ``violations``.
    """
    r = np.asarray(est.r_grid, dtype=float)
    v = np.asarray(est.values, dtype=float)
    violations, shortfalls = [], []
    order = np.argsort(r)
    rs, vs = r[order], v[order]
    for a, b, va, vb in zip(rs[:-1], rs[1:], vs[:-1], vs[1:]):
        if vb < va * (1 - tol) - tol:
            (shortfalls if est.kind != "Psi" else violations).append(("monotone", a, b, va, vb))
    pairs = 0
    lookup = {round(float(x), 12): float(y) for x, y in zip(r, v)}
    for i, a in enumerate(r):
        for b in r[i:]:
            key = round(float(a * b), 12)
            if key not in lookup or a == 0 or b == 0:
                continue
            pairs += 1
            prod = lookup[key]
            fa, fb = lookup[round(float(a), 12)], lookup[round(float(b), 12)]
            if est.kind == "Psi":
                if prod < fa * fb * (1 - tol) - tol:
                    shortfalls.append(("super_multiplicative", a, b, prod, fa * fb))
            elif prod > fa * fb * (1 + tol) + tol:
                shortfalls.append(("sub_multiplicative", a, b, prod, fa * fb))
    if pairs == 0:
        raise GridNotClosed("no pair (r, s) of the grid has rs on the grid")
    pm, pp = est.p_minus, est.p_plus
    if pm is not None and pp is not None:
        for x, y in zip(r, v):
            if x <= 0:
                continue
            if est.kind in ("Phi", "R"):
                bound = x**pm if x <= 1 else x**pp
                if y > bound * (1 + tol) + tol:
                    violations.append(("growth_bound", x, y, bound))
            else:
                bound = x**pp if x <= 1 else x**pm
                if y < bound * (1 - tol) - tol:
                    violations.append(("growth_bound", x, y, bound))
    return PropertyReport(est.kind, pairs, violations, shortfalls)


@dataclass
class Delta2Report:
    domain: str
    sup_ratio_estimate: float
    witness: list
    p_minus: float
    p_plus: float
    verdict: str
    doubling_constant: float
    bound_side: str = "lower_bound_of_sup"


def delta2_diagnostic(f, domain="all", cfg=None, tol=0.02):
    """Estimate sup L'(x, x) / L(x) over ``|x| >= 1`` or over ``x != 0``.

    A finite value c is evidence of L(2x) <= 2^c L(x) on the domain; it is
    compared with the estimated p_plus, which bounds it from above.
    """
    cfg = cfg or DEFAULT_CONFIG
    if domain not in ("all", "outside"):
        raise ValueError("domain must be 'all' (x != 0) or 'outside' (|x| >= 1)")
    _, _, X = _search_points(f, cfg, "R" if domain == "outside" else "Phi")
    L = f.values(X)
    keep = np.isfinite(L) & (L > 0)
    X, L = X[keep], L[keep]
    with np.errstate(all="ignore"):
        D = directional_derivatives(f, X, X, cfg, strict=False)
        ratio = D / L
    ratio = np.where(np.isfinite(ratio), ratio, -np.inf)
    k = int(np.argmax(ratio))
    c = float(ratio[k])
    p_minus, p_plus = growth_exponents(f, cfg)
    ok = math.isfinite(c) and c <= p_plus * (1 + tol)
    verdict = "delta2_evidence" if ok else "violation_witness"
    return Delta2Report(domain, c, X[k].tolist(), p_minus, p_plus, verdict,
                        2.0**c if math.isfinite(c) else math.inf)


def dual_exponent_bounds(p_minus, p_plus):
    """Bounds ``(q_plus, q_minus)`` on the growth exponents of the conjugate."""
    if not p_minus > 1:
        raise PMinusNotGreaterThanOne(f"p_minus = {p_minus} must exceed 1")
    if p_plus < p_minus:
        raise ValueError("p_plus must be >= p_minus")
    return p_minus / (p_minus - 1.0), p_plus / (p_plus - 1.0)


# -- mixture constant ------------------------------------------------------------


def _tangent_feasible(t, p1, p0):
    # tangent to r^p1 at t: A + B r; must stay below r^p0 on r >= 1
    B = p1 * t ** (p1 - 1.0)
    A = t**p1 - B * t
    if p0 == 1.0:
        return B <= 1.0 and 1.0 - A - B >= 0.0
    log_r = math.log(B / p0) / (p0 - 1.0) if B > 0 else -math.inf
    if log_r > 700.0:
        # the minimum -B r (1 - 1/p0) - A sits at an astronomically large r
        return False
    r_star = max(1.0, math.exp(log_r))
    return r_star**p0 - A - B * r_star >= -1e-15 * max(1.0, r_star**p0)


def gamma(p1, p0):
    """sup{a + b : a + b r <= min(r^p1, r^p0) for all r >= 0}, p1 >= p0 >= 1.

    The optimal line is tangent to r^p1 at some t <= 1; its value at 1 grows
    with t and feasibility against r^p0 is monotone, so the largest feasible
    tangent point is found by bisection.
    """
    if not (p1 >= p0 >= 1.0):
        raise ValueError("need p1 >= p0 >= 1")
    if p1 == p0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _tangent_feasible(mid, p1, p0):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    t = lo
    return float(t**p1 + p1 * t ** (p1 - 1.0) * (1.0 - t))


def gamma_grid_oracle(p1, p0, r_max=100.0, points=10_001):
    """Dense-grid version of the gamma program, solved as a 2D search.

    For a fixed slope b the best intercept is min_j (m(r_j) - b r_j), refined
    locally; a + b is then concave in b and maximised by golden section. The
    recession constraint b <= lim m(r)/r is imposed explicitly: without it a
    finite grid admits slopes that fail beyond r_max.
    """
    r = np.linspace(0.0, r_max, points)

    def m(x):
        return np.minimum(x**p1, x**p0)

    mr = m(r)
    b_max = 1.0 if p0 == 1.0 else float(p1)

    def intercept(b):
        vals = mr - b * r
        # the optimum can touch twice (tangency below 1 and the kink at 1), so
        # refine every discrete local minimum rather than only the argmin
        padded = np.concatenate(([np.inf], vals, [np.inf]))
        local = np.flatnonzero((padded[1:-1] <= padded[:-2]) & (padded[1:-1] <= padded[2:]))
        best = float(vals.min())
        for j in local:
            lo, hi = r[max(j - 1, 0)], r[min(j + 1, r.size - 1)]
            res = optimize.minimize_scalar(lambda x: float(m(x) - b * x), bounds=(lo, hi),
                                           method="bounded", options={"xatol": 1e-14})
            best = min(best, float(res.fun))
        return best

    res = optimize.minimize_scalar(lambda b: -(intercept(b) + b), bounds=(0.0, b_max),
                                   method="bounded", options={"xatol": 1e-12})
    return float(-res.fun)
