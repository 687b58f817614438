"""Monic centered polynomials with marked critical points.

The marking (c_1, ..., c_{d-1}; a) on the hyperplane sum(c_i) = 0 is the
source of truth; coefficients are derived by expanding

    f(z) = a + integral_0^z d * prod_i (w - c_i) dw

and cached on the instance.  All arithmetic is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLeadingCoefficient, DegreeTooSmall, NotCentered

__all__ = [
    "MarkedPolynomial",
    "AffineMap",
    "from_critical_data",
    "critical_values",
    "normalize",
    "rotate_conjugate",
    "poly_to_dict",
    "poly_from_dict",
]


def _expand_monic(roots):
    """Ascending coefficients of prod (z - r) for r in roots."""
    coeffs = np.array([1.0 + 0.0j])
    for r in roots:
        coeffs = np.convolve(coeffs, np.array([-r, 1.0 + 0.0j]))
    return coeffs


def horner(coeffs, z):
    """Evaluate a polynomial with ascending coefficients at z (scalar or array)."""
    acc = np.zeros_like(np.asarray(z), dtype=complex) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


@dataclass(frozen=True)
class AffineMap:
    """z -> scale*z + offset, scale nonzero."""

    scale: complex
    offset: complex

    def __post_init__(self):
        if self.scale == 0:
            raise DegenerateLeadingCoefficient("affine scale must be nonzero")

    def __call__(self, z):
        return self.scale * z + self.offset

    def inverse(self):
        return AffineMap(1.0 / self.scale, -self.offset / self.scale)

    def compose(self, other):
        """self after other."""
        return AffineMap(self.scale * other.scale, self.scale * other.offset + self.offset)


@dataclass(frozen=True)
class MarkedPolynomial:
    degree: int
    critical_points: tuple
    origin_image: complex
    coefficients: tuple = field(compare=False)

    def __call__(self, z):
        return horner(np.asarray(self.coefficients), z)

    def deriv(self, z):
        """f'(z) = d * prod (z - c_i), evaluated from the marking."""
        acc = np.full_like(np.asarray(z, dtype=complex), self.degree, dtype=complex)
        for c in self.critical_points:
            acc = acc * (np.asarray(z) - c)
        return acc

    @property
    def coeff_tail_abs(self):
        """Sum of |a_i| over non-leading coefficients."""
        return float(np.sum(np.abs(np.asarray(self.coefficients[:-1]))))

    def deriv_coeffs(self):
        """Ascending coefficients of f'."""
        cs = np.asarray(self.coefficients)
        return cs[1:] * np.arange(1, len(cs))

    def iterate_coeffs(self, n):
        """Ascending coefficients of the n-th iterate (degree d**n)."""
        p = np.polynomial.Polynomial(np.asarray(self.coefficients))
        q = np.polynomial.Polynomial([0.0, 1.0])
        for _ in range(n):
            q = p(q)
        return q.coef.astype(complex)

    def __repr__(self):
        return f"MarkedPolynomial(d={self.degree}, c={self.critical_points}, a={self.origin_image})"


def _coeffs_from_marking(c, a):
    d = len(c) + 1
    prime = np.asarray(d, dtype=complex) * _expand_monic(c)  # coefficients of f'
    coeffs = np.empty(d + 1, dtype=complex)
    coeffs[0] = a
    coeffs[1:] = prime / np.arange(1, d + 1)
    return coeffs


def from_critical_data(c, a):
    """Build the monic centered polynomial with marked critical points c and f(0) = a.

    c is projected onto the centering hyperplane by subtracting its mean; the
    projection must not move any point by more than 1e-6.
    """
    c = tuple(complex(x) for x in c)
    if len(c) < 1:
        raise DegreeTooSmall("need at least one critical point (degree >= 2)")
    shift = sum(c) / len(c)
    if abs(shift) > 1e-6:
        raise NotCentered(f"critical points off the centering hyperplane by {abs(shift):.3e}")
    if shift != 0:
        c = tuple(x - shift for x in c)
    a = complex(a)
    coeffs = _coeffs_from_marking(c, a)
    return MarkedPolynomial(
        degree=len(c) + 1,
        critical_points=c,
        origin_image=a,
        coefficients=tuple(coeffs.tolist()),
    )


def critical_values(f):
    """(f(c_1), ..., f(c_{d-1})) in marked order, multiplicities preserved."""
    return tuple(complex(f(c)) for c in f.critical_points)


def _sorted_roots(roots):
    return tuple(sorted((complex(r) for r in roots), key=lambda w: (round(w.real, 9), round(w.imag, 9))))


def normalize(coeffs):
    """Conjugate an arbitrary polynomial (ascending coefficients) to monic centered form.

    Returns (g, A) with A(z) = alpha*z + beta and A o p = g o A.  Among the
    d-1 valid scale choices the one with arg(alpha) in [0, 2pi/(d-1)) is used.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    n = len(coeffs) - 1
    if n < 2:
        raise DegreeTooSmall(f"degree {n} < 2")
    lead = coeffs[-1]
    if abs(lead) < 1e-300:
        raise DegenerateLeadingCoefficient("leading coefficient vanishes")

    alpha = lead ** (1.0 / (n - 1))
    sector = 2.0 * np.pi / (n - 1)
    for _ in range(n):
        if 0.0 <= np.angle(alpha) % (2.0 * np.pi) < sector - 1e-15:
            break
        alpha *= np.exp(2j * np.pi / (n - 1))
    beta = coeffs[-2] * alpha ** (2 - n) / n

    # g(w) = alpha * p((w - beta)/alpha) + beta
    p = np.polynomial.Polynomial(coeffs)
    inner = np.polynomial.Polynomial([-beta / alpha, 1.0 / alpha])
    g_poly = alpha * p(inner) + beta
    gc = g_poly.coef.astype(complex)
    gc = np.concatenate([gc, np.zeros(n + 1 - len(gc), dtype=complex)])
    # clean the structurally exact entries
    gc[-1] = 1.0
    gc[-2] = 0.0

    crit = np.roots((gc[1:] * np.arange(1, n + 1))[::-1])
    crit = crit - np.mean(crit)
    g = from_critical_data(_sorted_roots(crit), gc[0])
    return g, AffineMap(complex(alpha), complex(beta))


def rotate_conjugate(f, k):
    """zeta^{-1} f(zeta z) for zeta = exp(2 pi i k/(d-1)); enumerates the fiber over moduli space."""
    d = f.degree
    k = int(k) % (d - 1)
    if k == 0:
        return f
    zeta = np.exp(2j * np.pi * k / (d - 1))
    c = tuple(ci / zeta for ci in f.critical_points)
    return from_critical_data(c, f.origin_image / zeta)


def poly_to_dict(f):
    return {
        "degree": f.degree,
        "critical_points": [[c.real, c.imag] for c in f.critical_points],
        "origin_image": [f.origin_image.real, f.origin_image.imag],
    }


def poly_from_dict(obj):
    c = [complex(re, im) for re, im in obj["critical_points"]]
    if len(c) + 1 != int(obj["degree"]):
        raise DegreeTooSmall("degree field inconsistent with critical point count")
    re, im = obj["origin_image"]
    return from_critical_data(c, complex(re, im))
