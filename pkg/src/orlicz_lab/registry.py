"""Named constructors for the standard example functions.

=============  =========================  ===========================
name           profile V(r)               closed-form conjugate
=============  =========================  ===========================
power:p        r^p                        s^q / (q p^(q-1)), p > 1
pow1 / abs     r                          indicator of the dual unit ball
hinge_power:p  r^p max(r, 1)              p = 1 only (piecewise)
plog:p         r^p log(1 + r)             numeric
plog2:p        r^p log(2 + r)             numeric
quadratic      r^2 / 2                    s^2 / 2
=============  =========================  ===========================

Every function is radial, L(x) = V(norm(x)); ``s`` above is the dual norm.
"""

import dataclasses
import re

import numpy as np

from .func_dsl import NormSpec, lift_radial, parse_young

DEFAULT_SUITE = (
    "pow1", "pow1.5", "pow2", "pow3", "quadratic",
    "hinge_power:1", "hinge_power:2", "plog:2", "plog2:2",
)

_PROFILES = {
    "power": "pow(r, {p})",
    "hinge_power": "pow(r, {p}) * max(r, 1)",
    "plog": "pow(r, {p}) * log1p(r)",
    "plog2": "pow(r, {p}) * log(2 + r)",
}

_ALIASES = {
    "abs": ("power", 1.0),
    "quadratic": ("quadratic", None),
}


def _fmt(p):
    return f"{p:g}"


def _power_conjugate(p, dual):
    q = p / (p - 1.0)

    def conj(Y):
        return dual.norm(Y) ** q / (q * p ** (q - 1.0))

    return conj


def _indicator_conjugate(dual):
    def conj(Y):
        s = dual.norm(Y)
        # numerically computed subgradients of the norm overshoot the unit
        # sphere by rounding, around 1e-13
        return np.where(s <= 1.0 + 1e-12, 0.0, np.inf)

    return conj


def _hinge1_conjugate(dual):
    # sup_r rs - r max(r,1): 0 for s <= 1, s - 1 on [1, 2], s^2/4 beyond
    def conj(Y):
        s = dual.norm(Y)
        return np.where(s <= 2.0, np.maximum(s - 1.0, 0.0), 0.25 * s * s)

    return conj


def _power_gradient(p, norm):
    def grad(X):
        X = np.atleast_2d(X)
        t = norm.norm(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = p * t ** (p - 1.0)
        return scale[:, None] * norm.subgradient(X)

    return grad


def parse_name(name):
    """Split a registry name into ``(family, p)``.

    Accepts ``pow<p>``, ``power:<p>``, ``hinge_power:<p>``, ``hinge<p>``,
    ``plog:<p>``, ``plog2:<p>``, ``abs`` and ``quadratic``.
    """
    key = name.strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    m = re.fullmatch(r"(power|hinge_power|plog2|plog)[:=]([0-9.eE+-]+)", key)
    if m:
        return m.group(1), float(m.group(2))
    m = re.fullmatch(r"(pow|hinge)([0-9][0-9.]*)", key)
    if m:
        family = "power" if m.group(1) == "pow" else "hinge_power"
        return family, float(m.group(2))
    raise KeyError(f"unknown registry function {name!r}")


def is_registry_name(name):
    try:
        parse_name(name)
    except KeyError:
        return False
    return True


def make(name, dim=1, norm=None):
    """Construct a registry function as a radial oracle on R^dim."""
    family, p = parse_name(name)
    norm = norm if isinstance(norm, NormSpec) else NormSpec.parse(norm) if norm else NormSpec()
    dual = norm.dual_spec()
    if family == "quadratic":
        base = lift_radial(parse_young("0.5 * pow(r, 2)"), norm, dim, name="quadratic")
        grad2 = _power_gradient(2.0, norm)
        return dataclasses.replace(
            base,
            homogeneity_order=2.0,
            analytic_conjugate=lambda Y: 0.5 * dual.norm(Y) ** 2,
            analytic_gradient=lambda X: 0.5 * grad2(X),
        )
    if p < 1:
        raise ValueError(f"{family} needs p >= 1, got {p}")
    text = _PROFILES[family].format(p=_fmt(p))
    label = f"{family}:{_fmt(p)}" if family != "power" else f"pow{_fmt(p)}"
    base = lift_radial(parse_young(text), norm, dim, name=label)
    extras = {}
    if family == "power":
        extras["analytic_gradient"] = _power_gradient(p, norm)
        if p > 1:
            extras["analytic_conjugate"] = _power_conjugate(p, dual)
        else:
            extras["analytic_conjugate"] = _indicator_conjugate(dual)
    elif family == "hinge_power" and p == 1.0:
        extras["analytic_conjugate"] = _hinge1_conjugate(dual)
    if not extras:
        return base
    return dataclasses.replace(base, **extras)


def suite(dim=1, norm=None, names=DEFAULT_SUITE):
    return [make(n, dim, norm) for n in names]
