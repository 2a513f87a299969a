"""Subdifferentials through their support functions, and subgradient selections.

The support function of the subdifferential at x is the directional
derivative, h(theta) = L'(x, theta). Three selections are provided:

* the sphere average ``n * E[L'(x, theta) theta]`` over uniform theta,
* the barycenter of the subdifferential,
* the mollified gradient, the average of the gradient over a small ball.

Each returns a :class:`SubgradientCertificate` obtained by probing the
subgradient inequality L(z) >= L(x) + <y, z - x>.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .convex_core import DEFAULT_CONFIG, directional_derivatives
from .errors import DimensionMismatch, HullDegenerate, NonFiniteNearPoint, PrecisionLoss
from .sphere import direction_set, orthonormal_complement, uniform_ball


@dataclass(frozen=True)
class CompactConvexSetApprox:
    """A compact convex set described by support values on a direction set."""

    directions: np.ndarray
    support_values: np.ndarray
    dim: int

    def __post_init__(self):
        D = np.asarray(self.directions, dtype=float)
        if D.ndim != 2 or D.shape[1] != self.dim:
            raise DimensionMismatch(f"directions must have shape (M, {self.dim})")
        if np.abs(np.linalg.norm(D, axis=1) - 1.0).max() > 1e-12:
            raise ValueError("directions must be unit vectors")
        if np.shape(self.support_values) != (D.shape[0],):
            raise DimensionMismatch("one support value per direction is required")

    @classmethod
    def from_points(cls, points, directions):
        """Support table of the convex hull of finitely many points."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        D = np.asarray(directions, dtype=float)
        return cls(D, np.max(D @ P.T, axis=1), D.shape[1])

    def width(self):
        half = self.directions.shape[0] // 2
        return self.support_values[:half] + self.support_values[half:]


@dataclass
class SubgradientCertificate:
    point: np.ndarray
    candidate: np.ndarray
    probe_count: int
    min_slack: float
    method: str
    tol: float
    witness: np.ndarray = None
    std_error: float = 0.0
    resolved: bool = True

    @property
    def valid(self):
        return self.min_slack >= -self.tol


def support_of_subdifferential(f, x, theta, cfg=None):
    """h_{dL(x)}(theta) = L'(x, theta)."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    return float(directional_derivatives(f, x, theta, cfg)[0])


def _support_fn(f, x, cfg, fallback=None):
    """Support function of dL(x). With a ``fallback`` list, quotients that do
    not settle before the step floor get the best-effort extrapolation and
    the list records that this happened."""
    x = np.asarray(x, dtype=float).reshape(1, -1)

    def h(D):
        D = np.atleast_2d(D)
        X = np.repeat(x, D.shape[0], axis=0)
        try:
            return directional_derivatives(f, X, D, cfg)
        except PrecisionLoss:
            if fallback is None:
                raise
            fallback.append(True)
            return directional_derivatives(f, X, D, cfg, strict=False)

    return h


def subdifferential_hull(f, x, cfg=None, directions=None):
    """Support values of dL(x) on a deterministic antipodal direction set."""
    cfg = cfg or DEFAULT_CONFIG
    n = f.dim
    D = direction_set(n, rng=cfg.rng(salt=11), per_dim=cfg.directions_per_dim) \
        if directions is None else np.asarray(directions, dtype=float)
    return CompactConvexSetApprox(D, _support_fn(f, x, cfg)(D), n)


def hausdorff_distance(K1, K2):
    """max_j |h1(theta_j) - h2(theta_j)| on a shared direction set."""
    if K1.dim != K2.dim:
        raise DimensionMismatch(f"dimensions differ: {K1.dim} vs {K2.dim}")
    if K1.directions.shape != K2.directions.shape or not np.array_equal(K1.directions, K2.directions):
        raise DimensionMismatch("sets are sampled on different direction sets; resample first")
    return float(np.max(np.abs(K1.support_values - K2.support_values)))


# -- certificates --------------------------------------------------------------


def certify(f, x, y, method, cfg=None, rng=None, radius=None, std_error=0.0, resolved=True):
    """Probe L(z) - L(x) - <y, z - x> at uniform z in B(x, 10) plus x +- e_i."""
    cfg = cfg or DEFAULT_CONFIG
    rng = rng if rng is not None else cfg.rng(salt=17)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    radius = cfg.probe_radius if radius is None else radius
    Z = np.vstack([x + uniform_ball(rng, cfg.probe_count, n, radius), x + np.eye(n), x - np.eye(n)])
    lx = f(x)
    with np.errstate(invalid="ignore"):
        slack = f.values(Z) - lx - (Z - x) @ y
    slack = np.where(np.isnan(slack), np.inf, slack)
    k = int(np.argmin(slack))
    return SubgradientCertificate(
        point=x, candidate=y, probe_count=Z.shape[0], min_slack=float(slack[k]),
        method=method, tol=cfg.tol_slack * (1.0 + abs(lx)), witness=Z[k], std_error=std_error,
        resolved=resolved,
    )


# -- sphere average --------------------------------------------------------------


def _moment_average(D, H):
    # least-squares linear fit h ~ <y, theta>; equals n * mean(h theta) for
    # an exact spherical design and is exact whenever h is linear
    M = D.T @ D
    return np.linalg.solve(M, D.T @ H)


def sphere_average_subgradient(f, x, cfg=None, directions=None):
    """The selection y(x) = n * E_sigma[L'(x, theta) theta].

    In dimension 1 this is (L'(x+) + L'(x-)) / 2 exactly. Where the
    directional derivatives cannot be resolved the best-effort values are
    used and the certificate is marked ``resolved=False``; its probes still
    decide validity.
    """
    cfg = cfg or DEFAULT_CONFIG
    x = np.asarray(x, dtype=float).ravel()
    D = direction_set(f.dim, rng=cfg.rng(salt=11), per_dim=cfg.directions_per_dim) \
        if directions is None else np.asarray(directions, dtype=float)
    lossy = []
    y = _moment_average(D, _support_fn(f, x, cfg, lossy)(D))
    return y, certify(f, x, y, "sphere_average", cfg, resolved=not lossy)


def _sphere_average_batch(f, X, cfg, m_dirs):
    n = f.dim
    D = direction_set(n, m_dirs if n > 1 else None, rng=cfg.rng(salt=13))
    m, k = X.shape[0], D.shape[0]
    Xr = np.repeat(X, k, axis=0)
    Dr = np.tile(D, (m, 1))
    H = directional_derivatives(f, Xr, Dr, cfg, strict=False).reshape(m, k)
    Minv = np.linalg.inv(D.T @ D)
    return (H @ D) @ Minv.T


# -- barycenter -------------------------------------------------------------------


def _refine_min_width(h, theta0, n):
    def width(t):
        th = t / np.linalg.norm(t)
        return float(np.sum(h(np.vstack([th, -th]))))

    res = optimize.minimize(width, theta0, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400 * n})
    th = res.x / np.linalg.norm(res.x)
    return th, float(res.fun)


def _polytope_centroid(D, H):
    n = D.shape[1]
    # Chebyshev centre as the interior point
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([D, np.ones((D.shape[0], 1))])
    res = optimize.linprog(c, A_ub=A, b_ub=H, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise HullDegenerate("support values do not describe a full-dimensional set")
    centre = res.x[:n]
    hs = HalfspaceIntersection(np.hstack([D, -H[:, None]]), centre)
    V = hs.intersections
    hull = ConvexHull(V)
    apex = V.mean(axis=0)
    vols, cents = [], []
    for simplex in hull.simplices:
        P = V[simplex]
        vols.append(abs(np.linalg.det(P - apex)) / math.factorial(n))
        cents.append((apex + P.sum(axis=0)) / (n + 1))
    vols = np.asarray(vols)
    return (vols[:, None] * np.asarray(cents)).sum(axis=0) / vols.sum()


def _hit_and_run(D, H, start, cfg, rng):
    n = D.shape[1]
    y = start.copy()
    total = np.zeros(n)
    samples = cfg.hit_and_run_samples
    burn = samples // 10
    trace = np.empty((samples, n))
    for i in range(burn + samples):
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        a = D @ d
        s = H - D @ y
        with np.errstate(divide="ignore"):
            t = s / a
        hi = np.min(t[a > 0])
        lo = np.max(t[a < 0])
        y = y + rng.uniform(lo, hi) * d
        if i >= burn:
            trace[i - burn] = y
            total += y
    mean = total / samples
    # batch-means standard error
    batches = trace.reshape(50, -1, n).mean(axis=1)
    se = float(np.linalg.norm(batches.std(axis=0, ddof=1) / math.sqrt(50)))
    return mean, se


def _barycenter(h, n, cfg, scale, rng):
    """Barycenter of the compact convex set with support function ``h``."""
    if n == 1:
        H = h(np.array([[1.0], [-1.0]]))
        if H[0] + H[1] < -cfg.rank_tol * (1.0 + scale):
            raise HullDegenerate(f"h(1) + h(-1) = {H[0] + H[1]} < 0")
        return np.array([(H[0] - H[1]) / 2.0]), 0.0
    per_dim = cfg.directions_per_dim if n <= 3 else max(cfg.directions_per_dim // 8, 64)
    D = direction_set(n, rng=rng, per_dim=per_dim)
    H = h(D)
    half = D.shape[0] // 2
    W = H[:half] + H[half:]
    tol = cfg.rank_tol * (1.0 + scale)
    if W.min() < -tol:
        raise HullDegenerate(f"negative width {W.min():.3g}: support values are inconsistent")
    if W.max() <= tol:
        return _moment_average(D, H), 0.0
    theta, wmin = _refine_min_width(h, D[int(np.argmin(W))], n)
    if wmin <= cfg.rank_tol * W.max() + tol:
        # the set lies in the hyperplane <y, theta> = h(theta)
        hv = h(np.vstack([theta, -theta]))
        offset = 0.5 * (hv[0] - hv[1]) * theta
        B = orthonormal_complement(theta[:, None], n)

        def h_sub(Phi):
            return h(np.atleast_2d(Phi) @ B.T)

        sub, se = _barycenter(h_sub, n - 1, cfg, scale, rng)
        return offset + B @ sub, se
    if n <= 3:
        return _polytope_centroid(D, H), 0.0
    start = _polytope_chebyshev(D, H)
    return _hit_and_run(D, H, start, cfg, rng)


def _polytope_chebyshev(D, H):
    n = D.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([D, np.ones((D.shape[0], 1))])
    res = optimize.linprog(c, A_ub=A, b_ub=H, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        raise HullDegenerate("support values describe an empty set")
    return res.x[:n]


def barycenter_subgradient(f, x, cfg=None):
    """Centroid of the uniform measure on dL(x).

    The affine dimension is found from the minimal width of the set; flat
    sets are handled in their affine hull. Exact polytope centroids (of the
    outer halfspace approximation) are used up to dimension 3, hit-and-run
    sampling above.
    """
    cfg = cfg or DEFAULT_CONFIG
    x = np.asarray(x, dtype=float).ravel()
    lossy = []
    h = _support_fn(f, x, cfg, lossy)
    lx = f(x)
    if not math.isfinite(lx):
        raise NonFiniteNearPoint(f"L is infinite at {x.tolist()}")
    y, se = _barycenter(h, x.size, cfg, abs(lx), cfg.rng(salt=19))
    return y, certify(f, x, y, "barycenter", cfg, std_error=se, resolved=not lossy)


# -- mollified gradient -------------------------------------------------------------


def _gradient_source(f, cfg):
    grad = f.gradient_like()
    if grad is not None:
        return grad
    m_dirs = max(64 * f.dim, 2)

    def grad_sa(X):
        return _sphere_average_batch(f, np.atleast_2d(X), cfg, m_dirs)

    return grad_sa


def mollified_subgradient(f, x, eps, cfg=None, samples=None):
    """T_eps(x): the average of the gradient over the ball B(x, eps).

    Uniform samples are paired antithetically (x + w, x - w). Returns the
    estimate and a certificate carrying its Monte Carlo standard error.
    """
    cfg = cfg or DEFAULT_CONFIG
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    rng = cfg.rng(salt=23)
    half = (samples or cfg.mollifier_samples) // 2
    W = uniform_ball(rng, half, n, eps)
    Z = np.vstack([x + W, x - W])
    if not np.isfinite(f.values(Z)).all():
        raise NonFiniteNearPoint(f"L is infinite on B({x.tolist()}, {eps})")
    G = np.asarray(_gradient_source(f, cfg)(Z), dtype=float)
    pairs = 0.5 * (G[:half] + G[half:])
    y = pairs.mean(axis=0)
    se = float(np.linalg.norm(pairs.std(axis=0, ddof=1)) / math.sqrt(half)) if half > 1 else 0.0
    return y, certify(f, x, y, "mollified", cfg, std_error=se)


# -- consistency -------------------------------------------------------------


@dataclass
class ConsistencyReport:
    """Empirical comparison of the three selections at one point.

    This is evidence about whether the sphere average and the barycenter
    coincide and whether T_eps converges; it asserts nothing.
    """

    point: np.ndarray
    candidates: dict
    certificates: dict
    distances: dict
    eps_grid: list
    mollified_path: list
    cauchy_increments: list = field(default_factory=list)
    appears_cauchy: bool = True


def selection_consistency_test(f, x, cfg=None, eps_grid=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)):
    cfg = cfg or DEFAULT_CONFIG
    x = np.asarray(x, dtype=float).ravel()
    y_sa, c_sa = sphere_average_subgradient(f, x, cfg)
    y_bc, c_bc = barycenter_subgradient(f, x, cfg)
    path, certs = [], []
    for eps in eps_grid:
        y, c = mollified_subgradient(f, x, eps, cfg)
        path.append(y)
        certs.append(c)
    cands = {"sphere_average": y_sa, "barycenter": y_bc, "mollified": path[-1]}
    dist = {}
    names = list(cands)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            dist[f"{a}|{b}"] = float(np.linalg.norm(cands[a] - cands[b]))
    inc = [float(np.linalg.norm(path[i + 1] - path[i])) for i in range(len(path) - 1)]
    # Cauchy evidence: increments shrink along the sweep up to Monte Carlo noise
    noise = max(3.0 * max(c.std_error for c in certs), 1e-9)
    tail = inc[len(inc) // 2:]
    cauchy = all(t <= max(inc[0], noise) for t in tail) if inc else True
    return ConsistencyReport(
        point=x, candidates=cands,
        certificates={"sphere_average": c_sa, "barycenter": c_bc, "mollified": certs[-1]},
        distances=dist, eps_grid=list(eps_grid), mollified_path=path,
        cauchy_increments=inc, appears_cauchy=cauchy,
    )
