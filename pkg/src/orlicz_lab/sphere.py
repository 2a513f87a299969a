"""Direction sets on the unit sphere and uniform sampling of balls."""

import math

import numpy as np

# Fractional offset applied to deterministic direction sets so that no sampled
# direction is aligned with a coordinate axis.
_GOLDEN_OFFSET = (3.0 - math.sqrt(5.0)) / 2.0


def direction_set(n, m=None, rng=None, per_dim=4096):
    """Return an antipodally symmetric set of unit vectors in R^n.

    For ``n == 1`` this is ``{+1, -1}``. For ``n in (2, 3)`` the set is
    deterministic (rotated equiangular circle, generalized spiral on S^2).
    For larger ``n`` it is a seeded Gaussian sample, paired with antipodes.

    The first half of the rows are the "positive" directions and row
    ``i + m // 2`` is always ``-row[i]``.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if m is None:
        m = per_dim * n
    half = max(int(m) // 2, 1)
    if n == 2:
        phi = np.pi * (np.arange(half) + _GOLDEN_OFFSET) / half
        pos = np.column_stack([np.cos(phi), np.sin(phi)])
    elif n == 3:
        pos = _spiral_points(half)
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        pos = rng.standard_normal((half, n))
        pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    return np.vstack([pos, -pos])


def _spiral_points(k):
    # Generalized spiral on the upper hemisphere; antipodes complete the sphere.
    i = np.arange(k) + 0.5
    z = 1.0 - i / k
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    golden_angle = np.pi * (3.0 - math.sqrt(5.0))
    theta = golden_angle * i + _GOLDEN_OFFSET
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def uniform_sphere(rng, m, n):
    g = rng.standard_normal((m, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return g / norms


def uniform_ball(rng, m, n, radius=1.0):
    """``m`` points uniform in the Euclidean ball of given radius."""
    dirs = uniform_sphere(rng, m, n)
    r = radius * rng.random(m) ** (1.0 / n)
    return dirs * r[:, None]


def orthonormal_complement(basis, n):
    """Columns spanning the orthogonal complement of the columns of ``basis``."""
    if basis.size == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(np.hstack([basis, np.eye(n)]))
    k = basis.shape[1]
    return q[:, k:n]
