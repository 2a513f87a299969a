"""Luxemburg and Orlicz pseudo-norms of vector fields on finite probability spaces.

For u: atoms -> R^n and weights lambda,

    ||u||_L = inf{r > 0 : sum_i lambda_i L(u_i / r) <= 1}           (Luxemburg)
    |u|_L   = sup{sum_i lambda_i <u_i, v_i> : ||v||_{L*} <= 1}       (Orlicz)

The Orlicz norm is bracketed: above by inf_mu mu (1 + sum lambda L(u/mu)),
below by the value of an explicit feasible dual witness.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from . import delta2
from .convex_core import (
    DEFAULT_CONFIG,
    ConvexFunctionOracle,
    RadialStructure,
    conjugate_oracle,
)
from .errors import AtomMismatch, DimensionMismatch, SupportNotCovered

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DiscreteProbabilitySpace:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if (w <= 0).any():
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def atom_count(self):
        return self.weights.size

    @classmethod
    def uniform(cls, n_atoms):
        return cls(np.full(n_atoms, 1.0 / n_atoms))

    @classmethod
    def random(cls, rng, n_atoms):
        w = rng.dirichlet(np.ones(n_atoms))
        return cls(w / w.sum())


def _field(f, sp, u):
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1) if f.dim == 1 else u.reshape(1, -1)
    if u.shape != (sp.atom_count, f.dim):
        raise DimensionMismatch(f"field of shape {u.shape} does not match "
                                f"{sp.atom_count} atoms in dimension {f.dim}")
    if not np.isfinite(u).all():
        raise ValueError("field values must be finite")
    return u


def modular(f, sp, u, r):
    """G(r) = sum_i lambda_i L(u_i / r), with +inf absorbing."""
    vals = f.values(u / r)
    if np.isinf(vals).any():
        return math.inf
    return float(sp.weights @ vals)


@dataclass
class LuxemburgResult:
    value: float
    modular_at_value: float
    attained: bool
    bracket: tuple


def luxemburg(f, sp, u, cfg=None):
    """Luxemburg norm with its bisection bracket and the attainment check."""
    cfg = cfg or DEFAULT_CONFIG
    u = _field(f, sp, u)
    if not np.any(u):
        return LuxemburgResult(0.0, 0.0, True, (0.0, 0.0))
    ceiling = 2.0**cfg.bracket_ceiling_log2 * (1.0 + float(np.abs(u).max()))
    lo, hi = 1.0, 1.0
    if modular(f, sp, u, 1.0) > 1.0:
        while modular(f, sp, u, hi) > 1.0:
            lo = hi
            hi *= 2.0
            if hi > ceiling:
                return LuxemburgResult(math.inf, math.inf, False, (lo, math.inf))
    else:
        while modular(f, sp, u, lo) <= 1.0:
            hi = lo
            lo *= 0.5
            if lo < 1e-300:
                return LuxemburgResult(0.0, modular(f, sp, u, hi), False, (0.0, hi))
    # invariant: G(lo) > 1 >= G(hi)
    while hi - lo > cfg.bisection_rel_width * hi:
        mid = 0.5 * (lo + hi)
        if modular(f, sp, u, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    g = modular(f, sp, u, hi)
    return LuxemburgResult(hi, g, abs(g - 1.0) <= 1e-8, (lo, hi))


def luxemburg_norm(f, sp, u, cfg=None):
    """inf{r > 0 : sum_i lambda_i L(u_i / r) <= 1}, possibly +inf."""
    return luxemburg(f, sp, u, cfg).value


# -- Orlicz norm brackets --------------------------------------------------------


@dataclass
class NormResult:
    luxemburg: float
    orlicz_lower: float
    orlicz_upper: float
    witness_v: np.ndarray
    gap: float
    mu_star: float
    attained: bool


def amemiya(f, sp, u, lux=None, cfg=None):
    """(inf_mu mu (1 + G(mu)), argmin) by golden section over log mu.

    The minimiser lies below 2 ||u||_L because the objective exceeds mu and
    equals 2 ||u||_L at mu = ||u||_L.
    """
    cfg = cfg or DEFAULT_CONFIG
    s = luxemburg_norm(f, sp, u, cfg) if lux is None else lux

    def F(t):
        mu = math.exp(t)
        return mu * (1.0 + modular(f, sp, u, mu))

    a, b = math.log(s) - 50.0, math.log(2.0 * s)
    c, d = b - _GOLD * (b - a), a + _GOLD * (b - a)
    fc, fd = F(c), F(d)
    while b - a > 1e-12:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = F(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = F(d)
    candidates = [(fc, c), (fd, d), (2.0 * s, math.log(s))]
    val, t = min(candidates)
    return val, math.exp(t)


def _selection(f, cfg):
    grad = f.gradient_like()
    if grad is not None:
        return grad
    from .subgrad import _sphere_average_batch

    return lambda X: _sphere_average_batch(f, X, cfg, cfg.directions_per_dim * f.dim)


def _conj_values(f, cfg):
    conj = conjugate_oracle(f, cfg)
    return conj.values


def _largest_feasible_scale(conj_values, sp, v, cfg):
    """Largest s >= 0 with sum lambda L*(s v) <= 1."""

    def G(s):
        vals = conj_values(s * v)
        return math.inf if np.isinf(vals).any() else float(sp.weights @ vals)

    lo, hi = 0.0, 1.0
    while G(hi) <= 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > 2.0**cfg.bracket_ceiling_log2:
            return lo
    if math.isfinite(G(hi)):
        # continuous on the bracket: Brent, then step back onto the feasible side
        s = optimize.brentq(lambda x: G(x) - 1.0, lo, hi, xtol=1e-14 * hi, rtol=1e-14)
        for _ in range(60):
            if G(s) <= 1.0:
                return max(s, lo)
            s *= 1.0 - 1e-13
        return lo
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if G(mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo


def orlicz_norm(f, sp, u, cfg=None):
    """Two-sided bracket for the Orlicz norm.

    Upper: the Amemiya value inf_mu mu (1 + sum lambda L(u/mu)). Lower: the
    pairing with v = s * y(u/mu*) where y is a subgradient selection at the
    Amemiya minimiser and s the largest scale keeping sum lambda L*(s v) <= 1.
    """
    cfg = cfg or DEFAULT_CONFIG
    u = _field(f, sp, u)
    lux = luxemburg(f, sp, u, cfg)
    if lux.value == 0.0:
        z = np.zeros_like(u)
        return NormResult(0.0, 0.0, 0.0, z, 0.0, 0.0, True)
    if math.isinf(lux.value):
        return NormResult(math.inf, math.inf, math.inf, np.zeros_like(u), 0.0, math.inf, False)
    upper, mu = amemiya(f, sp, u, lux.value, cfg)
    select = _selection(f, cfg)
    conj_values = _conj_values(f, cfg)

    def witness(v):
        pairing = float(sp.weights @ np.einsum("ij,ij->i", u, v))
        if pairing <= 0:
            return -math.inf, v
        s = _largest_feasible_scale(conj_values, sp, v, cfg)
        return s * pairing, s * v

    v_mid = np.asarray(select(u / mu), dtype=float)
    lower, v_best = witness(v_mid)
    if upper - lower > 1e-9 * upper:
        # Atoms sitting on a kink of L at the minimiser: blend the one-sided
        # selections instead of taking the midpoint.
        v_in = np.asarray(select(u / (mu * (1 + 1e-7))), dtype=float)
        v_out = np.asarray(select(u / (mu * (1 - 1e-7))), dtype=float)
        a, b = 0.0, 1.0
        for _ in range(40):
            c, d = b - _GOLD * (b - a), a + _GOLD * (b - a)
            lc, vc = witness(c * v_in + (1 - c) * v_out)
            ld, vd = witness(d * v_in + (1 - d) * v_out)
            for val, vec in ((lc, vc), (ld, vd)):
                if val > lower:
                    lower, v_best = val, vec
            if lc >= ld:
                b = d
            else:
                a = c
            if upper - lower <= 1e-9 * upper:
                break
    if not math.isfinite(lower):
        v = u / np.linalg.norm(u, axis=1, keepdims=True).clip(1e-300)
        lower, v_best = witness(v)
    return NormResult(lux.value, lower, upper, v_best, upper - lower, mu, lux.attained)


# -- checks ------------------------------------------------------------------


@dataclass
class CheckReport:
    name: str
    passed: bool
    values: dict
    slacks: dict
    witnesses: dict = field(default_factory=dict)


def holder_check(f, sp, u, v, cfg=None, tol=1e-9, conj=None):
    """sum lambda <u, v>^+ <= 2 ||u||_L ||v||_{L*}."""
    cfg = cfg or DEFAULT_CONFIG
    u = _field(f, sp, u)
    v = _field(f, sp, v)
    conj = conj or conjugate_oracle(f, cfg)
    lhs = float(sp.weights @ np.maximum(np.einsum("ij,ij->i", u, v), 0.0))
    nu = luxemburg_norm(f, sp, u, cfg)
    nv = luxemburg_norm(conj, sp, v, cfg)
    if nu == 0.0 or nv == 0.0:
        rhs = 0.0
    else:
        rhs = 2.0 * nu * nv
    slack = rhs - lhs
    scale = tol * (1.0 + abs(rhs))
    return CheckReport("holder", slack >= -scale,
                       {"lhs": lhs, "rhs": rhs, "norm_u": nu, "norm_v_conj": nv},
                       {"rhs_minus_lhs": slack}, {"u": u.tolist(), "v": v.tolist()})


def sandwich_check(f, sp, u, cfg=None, tol=1e-7):
    """||u||_L <= lower <= |u|_L <= upper <= 2 ||u||_L, plus attainment."""
    cfg = cfg or DEFAULT_CONFIG
    res = orlicz_norm(f, sp, u, cfg)
    s1 = res.orlicz_lower - res.luxemburg
    s2 = 2.0 * res.luxemburg - res.orlicz_upper
    s3 = res.gap
    ok = s1 >= -tol and s2 >= -tol and s3 >= -tol
    values = {"luxemburg": res.luxemburg, "orlicz_lower": res.orlicz_lower,
              "orlicz_upper": res.orlicz_upper, "gap": res.gap}
    if 0.0 < res.luxemburg < math.inf:
        g = modular(f, sp, _field(f, sp, u), res.luxemburg)
        values["modular_at_norm"] = g
        ok = ok and abs(g - 1.0) <= 1e-8
    return CheckReport("sandwich", ok, values,
                       {"lower_minus_lux": s1, "two_lux_minus_upper": s2, "gap": s3},
                       {"u": np.asarray(u).tolist()} if not ok else {})


# -- perturbation --------------------------------------------------------------


def is_superlinear(f0, rng=None, rays=8):
    """Probe f0(R x)/R along random rays for growth under doubling R."""
    rng = rng or np.random.default_rng(5)
    X = rng.standard_normal((rays, f0.dim))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    prev = f0.values(X)
    for k in range(1, 12):
        R = 2.0**k
        cur = f0.values(R * X) / R
        if not (cur >= prev * (1 - 1e-12)).all():
            return False
        prev = cur
    return bool((prev >= 64.0 * f0.values(X)).all())


def perturb(f, f0, eps):
    """The oracle L + eps L0; homogeneity is dropped."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if f.dim != f0.dim:
        raise DimensionMismatch("f and f0 live in different dimensions")
    if not is_superlinear(f0):
        raise ValueError("f0 must grow superlinearly")

    def func(X):
        return f.values(X) + eps * f0.values(X)

    radial = None
    if f.radial is not None and f0.radial is not None and f.radial.norm == f0.radial.norm:
        p, p0 = f.radial.profile, f0.radial.profile
        radial = RadialStructure(lambda r: np.asarray(p(r)) + eps * np.asarray(p0(r)),
                                 f.radial.norm, f"({f.radial.text}) + {eps:g} * ({f0.radial.text})")
    g, g0 = f.gradient_like(), f0.gradient_like()
    selection = (lambda X: g(X) + eps * g0(X)) if g is not None and g0 is not None else None
    return ConvexFunctionOracle(
        func=func, dim=f.dim, name=f"{f.name} + {eps:g}*{f0.name}",
        finite_everywhere=f.finite_everywhere and f0.finite_everywhere,
        radial=radial, subgradient_selection=selection,
    )


@dataclass
class SweepReport:
    eps_grid: list
    norms: list
    conj_norms: list
    base_norm: float
    base_conj_norm: float
    terminal_gap: float
    terminal_conj_gap: float
    violations: list

    @property
    def passed(self):
        return not self.violations


def perturbation_sweep(f, f0, sp, u, eps_grid, cfg=None, tol=1e-9, probes=None):
    """Monotonicity and convergence of L + eps L0 and its conjugate as eps -> 0."""
    cfg = cfg or DEFAULT_CONFIG
    eps_grid = sorted((float(e) for e in eps_grid), reverse=True)
    u = _field(f, sp, u)
    conj = conjugate_oracle(f, cfg)
    base = luxemburg_norm(f, sp, u, cfg)
    base_c = luxemburg_norm(conj, sp, u, cfg)
    if probes is None:
        probes = cfg.rng(salt=31).standard_normal((32, f.dim)) * 3.0
    norms, conj_norms, violations = [], [], []
    prev_vals = prev_conj = None
    lf = f.values(probes)
    lc = conj.values(probes)
    for eps in eps_grid:
        g = perturb(f, f0, eps)
        gc = conjugate_oracle(g, cfg)
        vals, cvals = g.values(probes), gc.values(probes)
        if (vals < lf - tol * (1 + np.abs(lf))).any():
            violations.append(("L_eps >= L", eps))
        if (cvals > lc + tol * (1 + np.abs(cvals))).any():
            violations.append(("L*_eps <= L*", eps))
        if prev_vals is not None:
            if (vals > prev_vals + tol * (1 + np.abs(vals))).any():
                violations.append(("L_eps decreasing in eps", eps))
            if (cvals < prev_conj - tol * (1 + np.abs(cvals))).any():
                violations.append(("L*_eps increasing as eps decreases", eps))
        prev_vals, prev_conj = vals, cvals
        n_eps = luxemburg_norm(g, sp, u, cfg)
        c_eps = luxemburg_norm(gc, sp, u, cfg)
        if n_eps < base * (1 - tol):
            violations.append(("||u||_{L_eps} >= ||u||_L", eps))
        if c_eps > base_c * (1 + tol):
            violations.append(("||u||_{L*_eps} <= ||u||_{L*}", eps))
        if norms and n_eps > norms[-1] * (1 + tol):
            violations.append(("||u||_{L_eps} monotone", eps))
        if conj_norms and c_eps < conj_norms[-1] * (1 - tol):
            violations.append(("||u||_{L*_eps} monotone", eps))
        norms.append(n_eps)
        conj_norms.append(c_eps)
    return SweepReport(eps_grid, norms, conj_norms, base, base_c,
                       abs(norms[-1] - base), abs(conj_norms[-1] - base_c), violations)


# -- mixtures and convolutions -------------------------------------------------------------


def mixture_concavity_check(f, u, spaces, t, cfg=None, tol=1e-8, exponents=None):
    """Concavity of lambda -> ||u||_{L(lambda)} under mixing.

    Quasi-concavity always; full concavity for homogeneous f; otherwise the
    bound weakened by gamma(p_plus, p_minus).
    """
    cfg = cfg or DEFAULT_CONFIG
    t = np.asarray(t, dtype=float)
    if (t < 0).any() or abs(t.sum() - 1.0) > 1e-12 or t.size != len(spaces):
        raise ValueError("t must be a probability vector with one entry per space")
    sizes = {sp.atom_count for sp in spaces}
    if len(sizes) != 1:
        raise AtomMismatch("spaces do not share an atom set")
    mix = DiscreteProbabilitySpace(sum(ti * sp.weights for ti, sp in zip(t, spaces)) /
                                   sum(ti * sp.weights for ti, sp in zip(t, spaces)).sum())
    u = _field(f, mix, u)
    S = np.array([luxemburg_norm(f, sp, u, cfg) for sp in spaces])
    s_mix = luxemburg_norm(f, mix, u, cfg)
    avg = float(t @ S)
    quasi = s_mix - float(S.min())
    if f.homogeneity_order is not None:
        g = 1.0
        p_minus = p_plus = f.homogeneity_order
    else:
        p_minus, p_plus = exponents or delta2.growth_exponents(f, cfg)
        # convexity with L(0) = 0 forces both exponents >= 1; clamp estimation noise
        lo = max(1.0, min(p_plus, p_minus))
        g = delta2.gamma(max(lo, p_plus, p_minus), lo)
    concave = s_mix - g * avg
    scale = tol * (1.0 + s_mix)
    return CheckReport(
        "mixture", quasi >= -scale and concave >= -scale,
        {"S_mix": s_mix, "S": S.tolist(), "weighted_average": avg, "gamma": g,
         "p_minus": p_minus, "p_plus": p_plus},
        {"quasi_concavity": quasi, "concavity": concave},
    )


def convolve(lam, kap):
    """Law of X + Y for independent X ~ lam, Y ~ kap on an integer lattice.

    Measures are dicts mapping integer index tuples to weights; duplicate
    atoms are merged by exact index equality.
    """
    out = {}
    for x, wx in lam.items():
        for y, wy in kap.items():
            z = tuple(int(a) + int(b) for a, b in zip(x, y))
            out[z] = out.get(z, 0.0) + wx * wy
    return out


def _space_and_field(f, measure, u, shift=None):
    keys = sorted(measure)
    vals = []
    for k in keys:
        kk = k if shift is None else tuple(a + b for a, b in zip(k, shift))
        if kk not in u:
            raise SupportNotCovered(f"u has no value at lattice point {kk}")
        vals.append(np.asarray(u[kk], dtype=float).reshape(f.dim))
    w = np.array([measure[k] for k in keys], dtype=float)
    return DiscreteProbabilitySpace(w / w.sum()), np.vstack(vals)


def convolution_check(f, u, lam, kap, cfg=None, tol=1e-9):
    """||u||_{L(lam * kap)} >= sum_y kap(y) ||u(. + y)||_{L(lam)}.

    ``u`` maps lattice index tuples to vectors; ``lam`` and ``kap`` map index
    tuples to weights.
    """
    cfg = cfg or DEFAULT_CONFIG
    if f.homogeneity_order is None:
        raise ValueError("the convolution inequality needs a homogeneous L")
    conv = convolve(lam, kap)
    sp, uf = _space_and_field(f, conv, u)
    lhs = luxemburg_norm(f, sp, uf, cfg)
    rhs = 0.0
    for y in sorted(kap):
        sp_y, u_y = _space_and_field(f, lam, u, shift=y)
        rhs += kap[y] * luxemburg_norm(f, sp_y, u_y, cfg)
    slack = lhs - rhs
    return CheckReport("convolution", slack >= -tol * (1.0 + lhs),
                       {"lhs": lhs, "rhs": rhs}, {"lhs_minus_rhs": slack})


# -- IO ------------------------------------------------------------------------


def load_field(source, dim: Optional[int] = None):
    """Read ``{dim, atoms: [{weight, value: [...]}, ...]}`` from a path or dict."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = source
    d = int(doc["dim"])
    if dim is not None and d != dim:
        raise DimensionMismatch(f"field has dim {d}, expected {dim}")
    atoms = doc["atoms"]
    w = np.array([float(a["weight"]) for a in atoms])
    u = np.array([np.asarray(a["value"], dtype=float).reshape(d) for a in atoms])
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"atom weights sum to {total}, not 1")
    return DiscreteProbabilitySpace(w / total), u
