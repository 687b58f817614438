"""Escape-rate numerics: the Green's function G, the 1-form omega = 2i dG,
the maximal critical escape rate M(f), and filled-Julia membership.

G(z) = lim d^{-n} log|f^n(z)|.  The orbit is iterated past the escape radius
R(f) = max(2, 1 + sum|a_i|) until the geometric tail bound of the remaining
correction series drops below the requested tolerance.  omega is recovered
from the derivative cocycle along the same orbit:

    omega(z) = i * d^{-n} (f^n)'(z) / f^n(z).

Because the polynomials are centered, |f(w)/w^d - 1| <= s/|w|^2 with
s = sum|a_i|, which gives quadratic decay of both tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotInBasin

__all__ = [
    "EscapeConfig",
    "BasinSample",
    "escape_radius",
    "green",
    "omega",
    "max_escape_rate",
    "critical_escape_profile",
    "in_filled_julia",
    "INSIDE",
    "ESCAPES",
    "INCONCLUSIVE",
]

INSIDE = "inside"            # bounded at resolution (attracting cycle detected)
ESCAPES = "escapes"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class EscapeConfig:
    tol: float = 1e-10
    max_iter: int = 1000
    # escape radius policy is fixed: max(2, 1 + sum|a_i|); recorded for reports
    escape_radius_policy: str = "max(2, 1 + sum|a_i|)"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


DEFAULT = EscapeConfig()


@dataclass(frozen=True)
class BasinSample:
    point: complex
    green: float
    omega: complex
    iterations: int
    error_bound: float
    escaped: bool
    inconclusive: bool = False
    precritical: bool = False  # (f^n)'(z) vanished exactly along the orbit


def escape_radius(f):
    return max(2.0, 1.0 + f.coeff_tail_abs)


def _stop_radius(d):
    # one more application of f must not overflow a double
    return 10.0 ** (250.0 / d)


def green(f, z, cfg=DEFAULT):
    """Green's function sample at z, with omega and an error bound.

    Returns green = 0 with escaped=False if the orbit stays bounded for
    cfg.max_iter iterations (inconclusive flag set: no interior certification).
    """
    d = f.degree
    R = escape_radius(f)
    s = f.coeff_tail_abs
    big = _stop_radius(d)
    # omega tail: |z f'(z)/(d f(z)) - 1| <= 2s/|z|^2 for |z|^2 >= 2s, summed geometrically
    c_om = 4.0 * s

    w = complex(z)
    deriv = 1.0 + 0.0j          # d^{-m} (f^m)'(z)
    n = 0
    while n < cfg.max_iter:
        aw = abs(w)
        if aw > R:
            if aw > big:
                tail_g = 0.0
                accept = True
            else:
                tail_g = (math.log1p(s / (aw * aw)) / d ** (n + 1)) * d / (d - 1)
                accept = tail_g <= 0.5 * cfg.tol and c_om / (aw * aw) <= 5.0 * cfg.tol
            if accept:
                g = math.log(aw) / d ** n
                om = 1j * (deriv / w) if deriv != 0 else 0.0j
                err = tail_g + (n + 1) * 1e-16 * max(1.0, abs(g))
                return BasinSample(
                    point=complex(z), green=g, omega=complex(om), iterations=n,
                    error_bound=err, escaped=True, precritical=(deriv == 0),
                )
        deriv *= f.deriv(w) / d
        w = f(w)
        n += 1
    return BasinSample(
        point=complex(z), green=0.0, omega=0.0j, iterations=n,
        error_bound=cfg.tol, escaped=False, inconclusive=True,
    )


def green_values(f, zs, cfg=DEFAULT):
    """Vectorized Green's function over an array of points (escaping or not).

    Returns (G, escaped) arrays; non-escaping entries get G = 0.
    """
    d = f.degree
    R = escape_radius(f)
    s = f.coeff_tail_abs
    big = _stop_radius(d)
    coeffs = np.asarray(f.coefficients)

    w = np.asarray(zs, dtype=complex).copy()
    g = np.zeros(w.shape, dtype=float)
    done = np.zeros(w.shape, dtype=bool)
    for n in range(cfg.max_iter):
        aw = np.abs(w)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tail = (np.log1p(s / np.maximum(aw * aw, max(s, 1e-300))) / d ** (n + 1)) * d / (d - 1)
        hit = ~done & (aw > R) & ((aw > big) | (tail <= 0.5 * cfg.tol))
        if np.any(hit):
            g[hit] = np.log(aw[hit]) / d ** n
            done[hit] = True
            w[hit] = 0.0  # park
        if done.all():
            break
        live = ~done
        wl = w[live]
        acc = np.full_like(wl, coeffs[-1])
        for c in coeffs[-2::-1]:
            acc = acc * wl + c
        w[live] = acc
    return g, done


def omega(f, z, cfg=DEFAULT):
    """The coefficient of dz in 2i dG at an escaping point z."""
    sample = green(f, z, cfg)
    if not sample.escaped:
        raise NotInBasin(f"{z} did not escape within {cfg.max_iter} iterations")
    return sample.omega


def critical_escape_profile(f, cfg=DEFAULT):
    """Green samples at the marked critical points, in marked order."""
    return tuple(green(f, c, cfg) for c in f.critical_points)


def max_escape_rate(f, cfg=DEFAULT):
    """M(f): maximal escape rate over the marked critical points."""
    return max(s.green for s in critical_escape_profile(f, cfg))


def in_filled_julia(f, z, cfg=DEFAULT):
    """Tri-state membership: ESCAPES (with G), INSIDE at resolution, or INCONCLUSIVE.

    "Inside" is never certified exactly; it is reported only when the late
    orbit locks onto a numerically attracting cycle.
    """
    sample = green(f, z, cfg)
    if sample.escaped:
        return ESCAPES, sample.green

    # replay the tail of the bounded orbit and look for a near-repeat
    w = complex(z)
    burn = max(0, cfg.max_iter - 64)
    for _ in range(burn):
        w = f(w)
    tail = [w]
    for _ in range(63):
        w = f(w)
        tail.append(w)
    scale = max(1.0, max(abs(t) for t in tail))
    for p in range(1, 21):
        if abs(tail[-1] - tail[-1 - p]) < 1e-9 * scale:
            mult = 1.0
            for q in range(p):
                mult *= abs(f.deriv(tail[-1 - q]))
            if mult < 0.99:
                return INSIDE, 0.0
    return INCONCLUSIVE, 0.0
