"""Convex function oracles, directional derivatives and Legendre transforms.

Every function handled here maps R^n to [0, +inf]. Oracles are vectorised:
``f.values(X)`` takes an array of shape ``(m, n)`` and returns ``(m,)``.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import (
    InfinityTimesZero,
    NonFiniteNearPoint,
    OracleConstructionError,
    PrecisionLoss,
)
from .sphere import direction_set, uniform_ball

INF = math.inf
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


# -- extended non-negative reals ---------------------------------------------


def ext_check(value):
    """Validate an element of [0, +inf] and return it as a float."""
    v = float(value)
    if math.isnan(v) or v < 0.0:
        raise ValueError(f"{value!r} is not in [0, +inf]")
    return v


def ext_add(a, b):
    return ext_check(a) + ext_check(b)


def ext_mul(c, a):
    """Product of two extended non-negative reals; 0 * inf is an error."""
    c, a = ext_check(c), ext_check(a)
    if (c == 0.0 and math.isinf(a)) or (a == 0.0 and math.isinf(c)):
        raise InfinityTimesZero("0 * inf is undefined")
    return c * a


def ext_scale_array(c, values):
    """Multiply an array of [0, inf] values by ``c >= 0`` with the same rule."""
    values = np.asarray(values, dtype=float)
    if c == 0.0 and np.isinf(values).any():
        raise InfinityTimesZero("0 * inf is undefined")
    return c * values


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    """Every numerical knob used by the package, with its default.

    Reports echo the config they were produced with, so a run can be
    reproduced from its output alone.
    """

    seed: int = 0
    # directional derivatives
    eps_start: float = 1e-2
    eps_floor: float = 1e-7
    quotient_tol: float = 1e-8
    tol_mono: float = 1e-9
    # Legendre transform
    legendre_starts: int = 16
    divergence_threshold: float = 1e12
    radius_cap: float = 2.0**60
    golden_rel_tol: float = 1e-15
    # oracle probes and certificates
    tol_convexity: float = 1e-9
    tol_fenchel: float = 1e-7
    tol_biconj: float = 1e-6
    tol_slack: float = 1e-7
    probe_count: int = 1000
    probe_radius: float = 10.0
    # sphere sampling / subdifferentials
    directions_per_dim: int = 4096
    rank_tol: float = 1e-7
    hit_and_run_samples: int = 50_000
    mollifier_samples: int = 2048
    oscillation_directions: int = 256
    # associated Young functions
    young_log10_min: float = -12.0
    young_log10_max: float = 100.0
    young_radial_points: int = 225
    young_directions_per_dim: int = 16
    golden_rounds: int = 3
    exponent_offsets: tuple = (1e-2, 5e-3, 2.5e-3)
    # Luxemburg / Orlicz
    bisection_rel_width: float = 1e-10
    bracket_ceiling_log2: int = 60
    tol_norm: float = 1e-7

    def eps_schedule(self):
        k = int(math.floor(math.log2(self.eps_start / self.eps_floor)))
        return self.eps_start * 2.0 ** -np.arange(k + 1)

    def rng(self, salt=0):
        return np.random.default_rng([self.seed, salt])

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["exponent_offsets"] = list(d["exponent_offsets"])
        return d


DEFAULT_CONFIG = SearchConfig()


# -- oracles -----------------------------------------------------------------


@dataclass(frozen=True)
class RadialStructure:
    """Marks L(x) = V(norm(x)) with V a Young profile.

    ``profile`` is a vectorised map r -> V(r) on r >= 0 and ``norm`` any object
    with ``norm``, ``dual`` and ``subgradient`` methods acting on ``(m, n)``
    arrays (see :class:`orlicz_lab.func_dsl.NormSpec`).
    """

    profile: Callable
    norm: object
    text: str = ""


def _as_batch(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, dim) if dim == 1 and X.shape[0] != 1 else X.reshape(1, -1)
    if X.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {X.shape}")
    return X


@dataclass(frozen=True, eq=False)
class ConvexFunctionOracle:
    """Evaluation oracle for a convex L: R^n -> [0, +inf] with L(0) = 0.

    Parameters
    ----------
    func : callable
        Vectorised evaluation, ``(m, n) -> (m,)``. May return ``inf``.
    dim : int
        Ambient dimension.
    analytic_gradient : callable, optional
        ``(m, n) -> (m, n)``; the gradient where it exists and some
        subgradient elsewhere.
    analytic_conjugate : callable, optional
        Closed-form conjugate, ``(m, n) -> (m,)``.
    homogeneity_order : float, optional
        ``p`` such that L(rx) = r^p L(x).
    subgradient_selection : callable, optional
        Cheap measurable subgradient selection (e.g. a chain rule for radial
        functions) used when no analytic gradient is known.
    require_positive : bool
        Enforce L(x) > 0 off the origin. Conjugates may vanish near zero and
        are built with ``False``.
    """

    func: Callable
    dim: int
    name: str = "L"
    analytic_gradient: Optional[Callable] = None
    analytic_conjugate: Optional[Callable] = None
    homogeneity_order: Optional[float] = None
    finite_everywhere: bool = True
    radial: Optional[RadialStructure] = None
    subgradient_selection: Optional[Callable] = None
    require_positive: bool = True
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise OracleConstructionError(f"dim must be a positive integer, got {self.dim}")
        if self.homogeneity_order is not None and self.homogeneity_order < 1:
            raise OracleConstructionError("homogeneity order must be >= 1")
        if self.check:
            self._probe()

    # evaluation

    def values(self, X):
        X = np.asarray(X, dtype=float)
        out = np.asarray(self.func(X.reshape(-1, self.dim)), dtype=float)
        return out.reshape(X.shape[:-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or (x.ndim == 1 and x.shape[0] == self.dim):
            return float(self.values(x.reshape(1, self.dim))[0])
        return self.values(x)

    def gradient_like(self):
        """Best available cheap subgradient selection, or ``None``."""
        return self.analytic_gradient or self.subgradient_selection

    # construction probes

    def _probe(self, count=48, seed=20240611):
        rng = np.random.default_rng(seed)
        n = self.dim
        scales = np.repeat([0.1, 1.0, 3.0], count // 3)[:, None]
        P = rng.standard_normal((scales.shape[0], n)) * scales
        zero = self.values(np.zeros((1, n)))[0]
        if not (abs(zero) <= 1e-12):
            raise OracleConstructionError(f"{self.name}: L(0) = {zero}, expected 0")
        vals = self.values(P)
        if np.isnan(vals).any() or (vals < 0).any():
            raise OracleConstructionError(f"{self.name}: negative or NaN values on probes")
        if self.require_positive and not (vals > 0).all():
            bad = P[~(vals > 0)][0]
            raise OracleConstructionError(f"{self.name}: L vanishes at {bad.tolist()}")
        i = rng.integers(0, len(P), size=count)
        j = rng.integers(0, len(P), size=count)
        t = rng.uniform(0.05, 0.95, size=count)
        mid = t[:, None] * P[i] + (1 - t[:, None]) * P[j]
        lhs = self.values(mid)
        rhs = t * vals[i] + (1 - t) * vals[j]
        finite = np.isfinite(rhs)
        bad = finite & (lhs > rhs + 1e-9 * (1.0 + np.abs(rhs)))
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise OracleConstructionError(
                f"{self.name}: convexity violated between {P[i[k]].tolist()} and "
                f"{P[j[k]].tolist()} at t={t[k]:.3f}"
            )
        if self.homogeneity_order is not None:
            p = self.homogeneity_order
            for r in (0.5, 2.0, 3.0):
                scaled = self.values(r * P)
                ok = np.isclose(scaled, r**p * vals, rtol=1e-8, atol=1e-12)
                ok |= ~np.isfinite(vals)
                if not ok.all():
                    raise OracleConstructionError(
                        f"{self.name}: not homogeneous of order {p} (r={r})"
                    )

    @classmethod
    def from_pointwise(cls, fn, dim, **kwargs):
        """Wrap a scalar function ``fn(x) -> float`` of one point."""

        def func(X):
            return np.array([fn(x) for x in X], dtype=float)

        return cls(func=func, dim=dim, **kwargs)


# -- directional derivatives ---------------------------------------------------


def _quotient_table(func, X, Theta, cfg):
    eps = cfg.eps_schedule()
    m, n = X.shape
    base = np.asarray(func(X), dtype=float)
    pts = X[:, None, :] + eps[None, :, None] * Theta[:, None, :]
    vals = np.asarray(func(pts.reshape(-1, n)), dtype=float).reshape(m, eps.size)
    with np.errstate(invalid="ignore"):
        Q = (vals - base[:, None]) / eps[None, :]
    return base, Q


def _extrapolate(base, Q, cfg):
    """Two-level Richardson extrapolation of a halving-step quotient table.

    Returns ``(estimate, ok)``; ``ok`` is False where no two successive
    extrapolated values agree within tolerance.
    """
    with np.errstate(invalid="ignore"):
        R1 = 2.0 * Q[:, 1:] - Q[:, :-1]
        R2 = (4.0 * R1[:, 1:] - R1[:, :-1]) / 3.0
        D = np.abs(np.diff(R2, axis=1))
    tol = cfg.quotient_tol * (1.0 + np.abs(base))
    D = np.where(np.isfinite(D), D, np.inf)
    stable = D < tol[:, None]
    rows = np.arange(Q.shape[0])
    # Take the smallest stable step: a kink at distance below eps_start gives
    # a spurious, perfectly linear quotient regime at coarse steps.
    last = D.shape[1] - 1 - np.argmax(stable[:, ::-1], axis=1)
    # Within the stable run ending there, the best-agreeing pair balances
    # truncation (coarse steps) against rounding (fine steps).
    cols = np.arange(D.shape[1])
    tail = stable | (cols[None, :] > last[:, None])
    run = np.flip(np.cumprod(np.flip(tail, axis=1), axis=1), axis=1).astype(bool)
    run &= cols[None, :] <= last[:, None]
    best = np.argmin(np.where(run, D, np.inf), axis=1)
    k = np.where(stable.any(axis=1), best, np.argmin(D, axis=1))
    ok = stable[rows, k]
    est = R2[rows, k + 1]
    with np.errstate(invalid="ignore"):
        qmin = np.min(np.where(np.isfinite(Q), Q, np.inf), axis=1)
    est = np.minimum(est, qmin)
    return est, ok


def directional_derivatives(f, X, Theta, cfg=None, *, strict=True):
    """Batched one-sided directional derivatives L'(x_i, theta_i).

    With ``strict=False`` nothing is raised: rows whose quotients never
    stabilise get the best available extrapolation, and rows at which the
    function is infinite get NaN.
    """
    cfg = cfg or DEFAULT_CONFIG
    func = f.values if isinstance(f, ConvexFunctionOracle) else f
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    X, Theta = np.broadcast_arrays(X, Theta)
    base, Q = _quotient_table(func, X, Theta, cfg)
    zero = np.linalg.norm(Theta, axis=1) == 0.0
    nonfinite = ~np.isfinite(base) | (~np.isfinite(Q)).all(axis=1)
    est, ok = _extrapolate(base, Q, cfg)
    est[zero] = 0.0
    ok[zero] = True
    if strict:
        if (nonfinite & ~zero).any():
            i = int(np.flatnonzero(nonfinite & ~zero)[0])
            raise NonFiniteNearPoint(f"function is infinite near {X[i].tolist()}")
        if not ok.all():
            i = int(np.flatnonzero(~ok)[0])
            raise PrecisionLoss(
                f"difference quotients at {X[i].tolist()} along {Theta[i].tolist()} "
                "did not stabilise"
            )
        return est
    return np.where(nonfinite & ~zero, np.nan, est)


def directional_derivative(f, x, theta, cfg=None):
    """L'(x, theta) as the limit of difference quotients along a halving schedule.

    Raises
    ------
    NonFiniteNearPoint
        If L(x) is infinite or every scheduled step lands on +inf.
    PrecisionLoss
        If the extrapolated quotients never stabilise before the step floor.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    return float(directional_derivatives(f, x, theta, cfg)[0])


def difference_quotients(f, x, theta, cfg=None):
    """The raw quotients (L(x + eps theta) - L(x)) / eps and their steps."""
    cfg = cfg or DEFAULT_CONFIG
    x = np.asarray(x, dtype=float).reshape(1, -1)
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    _, Q = _quotient_table(f.values, x, theta, cfg)
    return cfg.eps_schedule(), Q[0]


def monotone_quotient_excess(f, x, theta, cfg=None):
    """Largest increase of the quotient as the step shrinks, net of tolerance.

    The allowance is tol_mono plus the rounding error of each quotient,
    a few ulps of L divided by the step. A value <= 0 means monotone.
    """
    cfg = cfg or DEFAULT_CONFIG
    eps, q = difference_quotients(f, x, theta, cfg)
    x = np.asarray(x, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    vals = f.values(np.vstack([x, x + eps[:, None] * theta]))
    rounding = 4.0 * np.finfo(float).eps * (abs(vals[0]) + np.abs(vals[1:])) / eps
    allow = cfg.tol_mono * (1.0 + np.abs(q).max()) + rounding[1:] + rounding[:-1]
    return float(np.max(np.diff(q) - allow))


def one_sided_slopes(profile, t, cfg=None):
    """Right and left derivatives of a scalar convex profile at points ``t``."""
    cfg = cfg or DEFAULT_CONFIG
    t = np.asarray(t, dtype=float).reshape(-1, 1)

    def func(R):
        return np.asarray(profile(R[:, 0]), dtype=float)

    right = directional_derivatives(func, t, np.ones_like(t), cfg, strict=False)
    left = -directional_derivatives(func, t, -np.ones_like(t), cfg, strict=False)
    return right, left


def radial_selection(radial, cfg=None):
    """Chain-rule subgradient selection for L(x) = V(N(x)).

    Uses the midpoint of the one-sided slopes of V times a subgradient of the
    norm; this is a subgradient whenever V is convex and non-decreasing.
    """
    cfg = cfg or DEFAULT_CONFIG

    def select(X):
        X = np.asarray(X, dtype=float)
        t = radial.norm.norm(X)
        right, left = one_sided_slopes(radial.profile, t, cfg)
        left = np.where(t > 0, left, -right)
        slope = 0.5 * (right + left)
        return slope[:, None] * radial.norm.subgradient(X)

    return select


# -- Legendre transform --------------------------------------------------------


def _golden_max(phi, lo, hi, cfg, best):
    """Vectorised golden-section maximisation of unimodal ``phi`` on [lo, hi].

    ``best`` holds values already known to be attained; the returned array is
    the maximum of everything evaluated.
    """
    a, b = lo.copy(), hi.copy()
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = phi(c), phi(d)
    best = np.fmax(best, np.fmax(fc, fd))
    for _ in range(400):
        width = b - a
        if (width <= cfg.golden_rel_tol * np.maximum(1.0, np.abs(b))).all():
            break
        left = fc >= fd
        # maximum lies in [a, d] where fc >= fd, else in [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_d = np.where(left, c, a + _GOLD * (b - a))
        new_c = np.where(left, b - _GOLD * (b - a), d)
        # exactly one interior point is new on each row
        fnew = phi(np.where(left, new_c, new_d))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = new_c, new_d
        best = np.fmax(best, fnew)
    return best


def sup_concave_halfline(phi, m, cfg=None):
    """sup_{r >= 0} phi_i(r) for ``m`` concave functions evaluated jointly.

    ``phi(r)`` maps an ``(m,)`` array of radii to ``(m,)`` values. The
    bracket is found by doubling r until phi stops increasing; a value above
    the divergence threshold, or a positive slope at the radius cap, gives
    +inf. A non-positive slope at the cap is a bounded (finite) supremum.
    """
    cfg = cfg or DEFAULT_CONFIG
    R = np.ones(m)
    f0 = np.asarray(phi(np.zeros(m)), dtype=float)
    fR = np.asarray(phi(R), dtype=float)
    best = np.maximum(np.nan_to_num(f0, nan=-INF), np.nan_to_num(fR, nan=-INF))
    infinite = fR > cfg.divergence_threshold
    active = ~infinite
    while active.any():
        f2 = np.asarray(phi(2.0 * R), dtype=float)
        f2 = np.nan_to_num(f2, nan=-INF)
        best = np.where(active, np.maximum(best, f2), best)
        diverged = active & (f2 > cfg.divergence_threshold)
        infinite |= diverged
        growing = active & ~diverged & (f2 > fR)
        at_cap = growing & (2.0 * R >= cfg.radius_cap)
        if at_cap.any():
            # Still increasing at the cap: positive slope means unbounded.
            slope = (f2 - fR) / R
            infinite |= at_cap & (slope > 0)
            growing &= ~at_cap
        R = np.where(growing, 2.0 * R, R)
        fR = np.where(growing, f2, fR)
        active = growing
    out = np.full(m, INF)
    finite = ~infinite
    if finite.any():
        idx = np.flatnonzero(finite)

        def sub(r):
            full = np.zeros(m)
            full[idx] = r
            return np.asarray(phi(full), dtype=float)[idx]

        lo = np.zeros(idx.size)
        hi = 2.0 * R[idx]
        def sub_clean(r):
            v = sub(r)
            return np.where(np.isnan(v), -INF, v)

        vals = _golden_max(sub_clean, lo, hi, cfg, best[idx])
        out[idx] = vals
    return out


def _legendre_radial(f, X, cfg):
    s = f.radial.norm.dual(X)
    profile = f.radial.profile

    def phi(r):
        return r * s - np.asarray(profile(r), dtype=float)

    return np.maximum(sup_concave_halfline(phi, s.size, cfg), 0.0)


def _legendre_1d(f, X, cfg):
    x = X[:, 0]

    def right(r):
        return x * r - f.values(r[:, None])

    def left(r):
        return -x * r - f.values(-r[:, None])

    m = x.size
    return np.maximum(sup_concave_halfline(right, m, cfg), sup_concave_halfline(left, m, cfg))


def _legendre_nd(f, x, cfg, rng):
    n = f.dim

    def phi(Y):
        return Y @ x - f.values(Y)

    axes = np.vstack([np.eye(n), -np.eye(n)])
    R = 1.0
    best = phi(np.zeros((1, n)))[0]
    while True:
        f1 = phi(R * axes)
        f2 = phi(2.0 * R * axes)
        best = max(best, float(np.max(f1)), float(np.max(f2)))
        if best > cfg.divergence_threshold:
            return INF
        if (f2 <= f1).all():
            break
        if 2.0 * R >= cfg.radius_cap:
            slope = (f2 - f1) / R
            if (slope > 0).any():
                return INF
            break
        R *= 2.0
    starts = np.vstack([np.zeros((1, n)), uniform_ball(rng, cfg.legendre_starts - 1, n, 2.0 * R)])

    def neg(y):
        v = phi(y.reshape(1, n))[0]
        return -v if np.isfinite(v) else 1e300

    for y0 in starts:
        res = optimize.minimize(neg, y0, method="Powell", options={"xtol": 1e-12, "ftol": 1e-15, "maxfev": 20000})
        val = -float(res.fun)
        if val > cfg.divergence_threshold:
            return INF
        best = max(best, val)
    return max(best, 0.0)


def legendre_values(f, X, cfg=None, *, numeric=False, rng=None):
    """Conjugate values L*(x_i) for a batch of points.

    The closed form is used when the oracle carries one (unless ``numeric``).
    Otherwise each value is a lower bound of the supremum attained by the
    search: a 1D golden-section ascent for radial and one-dimensional
    functions, multi-start Powell ascent in higher dimension.
    """
    cfg = cfg or DEFAULT_CONFIG
    X = np.asarray(X, dtype=float).reshape(-1, f.dim)
    if f.analytic_conjugate is not None and not numeric:
        return np.asarray(f.analytic_conjugate(X), dtype=float)
    if f.radial is not None:
        return _legendre_radial(f, X, cfg)
    if f.dim == 1:
        return _legendre_1d(f, X, cfg)
    rng = rng if rng is not None else cfg.rng(salt=7)
    return np.array([_legendre_nd(f, x, cfg, rng) for x in X])


def legendre(f, x, cfg=None, *, numeric=False):
    """L*(x) = sup_y <x, y> - L(y); +inf when the objective is unbounded."""
    x = np.asarray(x, dtype=float).reshape(1, f.dim)
    return float(legendre_values(f, x, cfg, numeric=numeric)[0])


@dataclass(frozen=True)
class LegendreResult:
    value: float
    numeric: float
    analytic: Optional[float]
    gap: Optional[float]
    bound_side: str


def legendre_report(f, x, cfg=None):
    """Numeric conjugate value alongside the closed form when one exists."""
    numeric = legendre(f, x, cfg, numeric=True)
    if f.analytic_conjugate is None:
        return LegendreResult(numeric, numeric, None, None, "lower_bound_of_sup")
    analytic = legendre(f, x, cfg)
    gap = analytic - numeric if math.isfinite(analytic) and math.isfinite(numeric) else None
    return LegendreResult(analytic, numeric, analytic, gap, "exact")


def conjugate_oracle(f, cfg=None):
    """The conjugate L* as an oracle (closed form when available)."""
    cfg = cfg or DEFAULT_CONFIG
    radial = None
    homog = None
    if f.homogeneity_order is not None and f.homogeneity_order > 1:
        p = f.homogeneity_order
        homog = p / (p - 1.0)
    if f.analytic_conjugate is not None:
        func = f.analytic_conjugate
    else:
        def func(Y):
            return legendre_values(f, Y, cfg)

        if f.radial is not None:
            dual = f.radial.norm.dual_spec()
            profile = f.radial.profile

            def conj_profile(s):
                s = np.asarray(s, dtype=float)

                def phi(r):
                    return r * s - np.asarray(profile(r), dtype=float)

                return np.maximum(sup_concave_halfline(phi, s.size, cfg), 0.0)

            radial = RadialStructure(conj_profile, dual, f"conj({f.radial.text})")
    return ConvexFunctionOracle(
        func=func,
        dim=f.dim,
        name=f"{f.name}*",
        homogeneity_order=homog,
        finite_everywhere=False,
        radial=radial,
        require_positive=False,
        analytic_conjugate=None,
    )


def fenchel_gap(f, x, y, cfg=None):
    """L(x) + L*(y) - <x, y>; zero exactly when y is a subgradient at x."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    lx = f(x)
    if not math.isfinite(lx):
        raise NonFiniteNearPoint(f"L is infinite at {x.tolist()}")
    ly = legendre(f, y, cfg)
    if math.isinf(ly):
        return INF
    return lx + ly - float(x @ y)


def local_oscillation(f, x, r, cfg=None):
    """Estimate of sup_{|h| <= r} L(x + h) - L(x).

    A convex function attains its maximum over a ball on the sphere, so the
    search samples |h| = r and refines the best direction locally.
    """
    cfg = cfg or DEFAULT_CONFIG
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    lx = f(x)
    if not math.isfinite(lx):
        raise NonFiniteNearPoint(f"L is infinite at {x.tolist()}")
    dirs = direction_set(n, cfg.oscillation_directions * n if n > 1 else None, cfg.rng(salt=3))
    vals = f.values(x + r * dirs)
    if not np.isfinite(vals).all():
        raise NonFiniteNearPoint(f"L is infinite on the sphere of radius {r} around {x.tolist()}")
    best = float(np.max(vals))
    if n > 1:
        theta0 = dirs[int(np.argmax(vals))]

        def neg(t):
            th = theta0 + t
            th = th / np.linalg.norm(th)
            v = f(x + r * th)
            if not math.isfinite(v):
                raise NonFiniteNearPoint(f"L is infinite near {x.tolist()}")
            return -v

        res = optimize.minimize(neg, np.zeros(n), method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "initial_simplex": None})
        best = max(best, -float(res.fun))
    return best - lx
