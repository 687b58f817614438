"""Level-set components of G, their level index, flat lengths, and the
cylinder modulus of annular pieces.

Components of {G = c} are found by pulling back the connected top-level leaf
{G = d^l c} under f^l: every component surjects onto the top leaf, so the
d^l preimages of any top point seed every component.  Each loop is traced by
predictor-corrector continuation of f^l(x) = P(psi) in the top parameter psi;
the number of 2 pi wraps of psi before closure is the mapping degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rays
from .errors import ContainsSingularity, NewtonDivergence, NonGenericHeight, SeedMiss
from .escape import max_escape_rate
from .rays import RayConfig, RayWalker, omega_values, zero_heights, zeros_of_omega

__all__ = [
    "LevelConfig",
    "LevelComponent",
    "level_index",
    "level_components",
    "annulus_modulus",
    "winding_number",
    "trace_leaf_through",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LevelConfig:
    nodes_per_wrap: int = 256
    refine_tol: float = 1e-9
    max_nodes_per_wrap: int = 2048
    genericity_margin: float = 1e-7
    walk_per_level: int = 6          # descent substeps per level for the top grid
    ray: RayConfig = field(default_factory=RayConfig)

    def walk_ray_cfg(self):
        from dataclasses import replace

        return replace(self.ray, samples_per_level=self.walk_per_level)


DEFAULT = LevelConfig()


@dataclass(frozen=True, eq=False)
class LevelComponent:
    height: float
    level_index: int
    map_degree: int
    flat_length: float
    points: np.ndarray       # closed loop, last point = first point
    omegas: np.ndarray
    top_params: np.ndarray   # psi values of f^l(points) on the top leaf

    @property
    def polyline(self):
        return tuple(complex(z) for z in self.points)

    def arc_positions(self):
        """Cumulative |omega|-arc length along the polyline (trapezoid)."""
        dz = np.abs(np.diff(self.points))
        wts = 0.5 * (np.abs(self.omegas[:-1]) + np.abs(self.omegas[1:]))
        return np.concatenate([[0.0], np.cumsum(dz * wts)])


def level_index(f, c, cfg=DEFAULT):
    """min{n >= 0 : d^n c >= M(f)}."""
    if not c > 0:
        raise NonGenericHeight("height must be positive")
    M = max_escape_rate(f, cfg.ray.escape)
    n = 0
    h = c
    while h < M * (1 - 1e-12):
        h *= f.degree
        n += 1
    return n


def _check_generic(f, c, cfg):
    for h in zero_heights(f, c - cfg.genericity_margin, c + cfg.genericity_margin, cfg.ray.escape):
        if abs(h - c) < cfg.genericity_margin:
            raise NonGenericHeight(
                f"height {c} is within {cfg.genericity_margin} of the singular height {h}"
            )


def _top_grid(f, c_top, n_nodes, cfg):
    """Points of the connected leaf {G = c_top}, c_top > M, on a psi grid."""
    psis = TWO_PI * np.arange(n_nodes) / n_nodes
    rcfg = cfg.walk_ray_cfg()
    walker = RayWalker(f, psis, rcfg, h_start=c_top)
    rays._walk(walker, c_top, rcfg)
    return psis, walker.z.copy()


def _scalar_iter_n(coeffs, crit, d, x, l):
    """(f^l(x), (f^l)'(x)) in pure-Python complex arithmetic."""
    D = 1.0 + 0.0j
    for _ in range(l):
        dv = d + 0.0j
        for c in crit:
            dv *= x - c
        D *= dv
        acc = coeffs[-1]
        for c in coeffs[-2::-1]:
            acc = acc * x + c
        x = acc
    return x, D


def _newton_pullback(f, l, x, target, tol=1e-11, max_iter=30):
    """Solve f^l(x) = target near x.  Returns (x, ok, (f^l)'(x))."""
    if l == 0:
        return target, True, 1.0 + 0.0j
    coeffs = f.coefficients
    crit = f.critical_points
    d = f.degree
    x = complex(x)
    target = complex(target)
    D = 1.0 + 0.0j
    for _ in range(max_iter):
        w, D = _scalar_iter_n(coeffs, crit, d, x, l)
        resid = w - target
        if abs(resid) <= tol * (1.0 + abs(target)):
            return x, True, D
        if D == 0 or not (abs(D) < 1e300):
            return x, False, D
        step = resid / D
        x = x - step
        if abs(step) <= 1e-16 * (1.0 + abs(x)):
            # stagnated at machine precision; accept within a looser bound
            w, D = _scalar_iter_n(coeffs, crit, d, x, l)
            return x, abs(w - target) <= 100 * tol * (1.0 + abs(target)), D
    return x, False, D


def _trace_loop(f, l, seed, psis, top, om_top, start_index=0, max_wraps=None):
    """Continue f^l(x) = P(psi) from seed around the top leaf until closure.

    Returns (points, psi_values, wraps).  points[0] == seed (refined), closed:
    points[-1] == points[0].
    """
    d = f.degree
    n = len(psis)
    if max_wraps is None:
        max_wraps = d ** l
    x, ok, D = _newton_pullback(f, l, seed, top[start_index])
    if not ok:
        raise NewtonDivergence(f"leaf seed correction failed at {seed}")
    x0 = x
    pts = [x]
    psv = [float(psis[start_index])]
    dpsi = TWO_PI / n
    j = start_index
    for step in range(1, max_wraps * n + 1):
        j_next = (j + 1) % n
        target = complex(top[j_next])
        # predictor: dx/dpsi = (dP/dpsi)/(f^l)'(x) with dP/dpsi = -1/omega(P)
        omp = complex(om_top[j])
        if omp != 0 and D != 0:
            pred = x + dpsi * (-1.0 / omp) / D
        else:
            pred = x
        x_new, ok, D = _newton_pullback(f, l, pred, target)
        if not ok or abs(x_new - x) > 10.0 * (abs(pred - x) + 1e-9):
            x_new, ok, D = _newton_pullback(f, l, x, target)
            if not ok:
                raise NewtonDivergence("leaf tracing lost the component")
        x = x_new
        pts.append(x)
        psv.append(float(psis[start_index]) + dpsi * step)
        j = j_next
        if j == start_index and abs(x - x0) < 1e-8 * (1.0 + abs(x0)):
            wraps = step // n
            pts[-1] = x0
            return np.array(pts), np.array(psv), wraps
    raise SeedMiss("leaf did not close after the maximal number of wraps")


def _loop_length(f, pts, cfg):
    _, oms, _ = omega_values(f, pts, cfg.ray.escape)
    dz = np.abs(np.diff(pts))
    wts = 0.5 * (np.abs(oms[:-1]) + np.abs(oms[1:]))
    return float(np.sum(dz * wts)), oms


def level_components(f, c, cfg=DEFAULT):
    """All components of {G = c} for generic c > 0, with lengths and degrees."""
    _check_generic(f, c, cfg)
    d = f.degree
    l = level_index(f, c, cfg)
    c_top = c * d ** l

    n_nodes = cfg.nodes_per_wrap
    comps = None
    prev_lengths = None
    while True:
        psis, top = _top_grid(f, c_top, n_nodes, cfg)
        _, om_top, _ = omega_values(f, top, cfg.ray.escape)
        if l == 0:
            seeds = np.array([top[0]])
        else:
            coeffs = f.iterate_coeffs(l).copy()
            coeffs[0] -= top[0]
            seeds = np.roots(coeffs[::-1])
        comps = []
        used = np.zeros(len(seeds), dtype=bool)
        for i in range(len(seeds)):
            if used[i]:
                continue
            pts, psv, wraps = _trace_loop(f, l, complex(seeds[i]), psis, top, om_top)
            # every n-th node is again a preimage of top[0]: mark those seeds
            returns = pts[:-1:n_nodes]
            for k, s in enumerate(seeds):
                if not used[k] and np.min(np.abs(returns - s)) < 1e-6 * (1.0 + abs(s)):
                    used[k] = True
            length, oms = _loop_length(f, pts, cfg)
            comps.append((pts, psv, wraps, length, oms))
        degs = [w for _, _, w, _, _ in comps]
        if sum(degs) != d ** l:
            raise SeedMiss(
                f"degree accounting failed: sum {sum(degs)} != {d ** l} at height {c}"
            )
        lengths = [L for _, _, _, L, _ in comps]
        if prev_lengths is not None and len(prev_lengths) == len(lengths):
            # Richardson-extrapolate the trapezoid lengths (error ~ n^-2)
            rich = [(4.0 * b - a) / 3.0 for a, b in zip(prev_lengths, lengths)]
            if all(abs(r - b) <= max(cfg.refine_tol, 1e-8) * max(1.0, abs(b))
                   for r, b in zip(rich, lengths)):
                comps = [(p, ps, w, r, om) for (p, ps, w, _, om), r in zip(comps, rich)]
                break
            if n_nodes >= cfg.max_nodes_per_wrap:
                comps = [(p, ps, w, r, om) for (p, ps, w, _, om), r in zip(comps, rich)]
                break
        elif n_nodes >= cfg.max_nodes_per_wrap:
            break
        prev_lengths = lengths
        n_nodes *= 2

    out = []
    for pts, psv, wraps, length, oms in comps:
        out.append(
            LevelComponent(
                height=c,
                level_index=l,
                map_degree=wraps,
                flat_length=length,
                points=pts,
                omegas=oms,
                top_params=psv,
            )
        )
    return out


def winding_number(polyline, w):
    """Winding of a closed polyline around w."""
    v = np.asarray(polyline) - w
    ang = np.angle(v[1:] / v[:-1])
    return int(round(float(np.sum(ang)) / TWO_PI))


def trace_leaf_through(f, z, cfg=DEFAULT):
    """The single component of {G = G(z)} through the escaping point z."""
    from .escape import green

    smp = green(f, z, cfg.ray.escape)
    c = smp.green
    _check_generic(f, c, cfg)
    l = level_index(f, c, cfg)
    result = None
    prev_len = None
    n_nodes = cfg.nodes_per_wrap
    for _ in range(2):
        psis, top = _top_grid(f, c * f.degree ** l, n_nodes, cfg)
        _, om_top, _ = omega_values(f, top, cfg.ray.escape)
        # align the start of the grid with f^l(z)
        w, _ = rays._iter_n(f, np.array([complex(z)]), l)
        j0 = int(np.argmin(np.abs(top - w[0])))
        x, ok, _ = _newton_pullback(f, l, complex(z), top[j0])
        if not ok:
            raise NewtonDivergence("could not land the seed on the grid")
        pts, psv, wraps = _trace_loop(f, l, x, psis, top, om_top, start_index=j0)
        length, oms = _loop_length(f, pts, cfg)
        result = (pts, psv, wraps, length, oms)
        if prev_len is not None:
            length = (4.0 * length - prev_len) / 3.0
            result = (pts, psv, wraps, length, oms)
            break
        prev_len = length
        n_nodes *= 2
    pts, psv, wraps, length, oms = result
    return LevelComponent(
        height=c, level_index=l, map_degree=wraps, flat_length=length,
        points=pts, omegas=oms, top_params=psv,
    )


def annulus_modulus(f, a, b, component_seed, cfg=DEFAULT):
    """2 pi (b-a) / flat_length for the annular component of {a < G < b}
    through component_seed; raises ContainsSingularity if a zero of omega
    lies inside it."""
    from .escape import green

    if not 0 < a < b:
        raise NonGenericHeight("need 0 < a < b")
    smp = green(f, component_seed, cfg.ray.escape)
    if not smp.escaped or not a < smp.green < b:
        raise NonGenericHeight("seed is not inside the band")

    theta_s = rays.external_angle(f, component_seed, cfg.ray)
    eps = min(1e-3, 0.05 * (b - a))
    try:
        upper = trace_leaf_through(f, rays.point_on_ray(f, theta_s, b - eps, cfg.ray), cfg)
    except NewtonDivergence as exc:
        raise ContainsSingularity(str(exc)) from exc

    # a zero at height in (a, b) lies in the seed's band component iff the
    # upper leaf winds around it (no nesting of same-height leaves)
    interior = [w for w, h in zeros_of_omega(f, a + 1e-12, b - 1e-12, cfg.ray.escape)
                if winding_number(upper.points, w) != 0]
    if interior:
        raise ContainsSingularity(
            f"zeros of omega inside the band component: {interior}"
        )
    return TWO_PI * (b - a) / upper.flat_length
