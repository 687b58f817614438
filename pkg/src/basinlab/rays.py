"""External rays and Boettcher coordinates.

The Boettcher map phi is evaluated directly (principal-branch product) only
at radii >= safe_radius(f), where |f(w)/w^d - 1| <= 1e-4 rules out branch
crossings.  Everything below that height is reached by Newton's method on the
iterated equation f^n(z) = y, seeded by continuity: ray points are walked
down level by level, and external angles are transported down the orbit with
per-level branch selection, then verified by re-descending the ray onto the
queried point.  Angle errors injected at the top of a descent are divided by
(f^n)' on the way down, so deep descents are self-correcting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import escape
from .errors import (
    BelowCriticalHeight,
    NewtonDivergence,
    NotInBasin,
    NumericalError,
    OnSingularLeafAmbiguous,
    StepLimit,
)
from .escape import EscapeConfig, escape_radius, green, max_escape_rate

__all__ = [
    "RayConfig",
    "RayTrace",
    "fixed_rays",
    "bottcher",
    "external_angle",
    "trace_ray",
    "RayWalker",
    "point_on_ray",
    "zeros_of_omega",
    "zero_heights",
    "upward_angles",
    "flat_chord",
    "omega_values",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RayConfig:
    tol: float = 1e-11
    samples_per_level: int = 24
    sing_radius: float = 1e-5
    max_steps: int = 20000
    min_step: float = 1e-12
    escape: EscapeConfig = field(default_factory=EscapeConfig)


DEFAULT = RayConfig()


def fixed_rays(f):
    """The d-1 fixed external ray angles 2 pi k/(d-1)."""
    d = f.degree
    return [TWO_PI * k / (d - 1) for k in range(d - 1)]


def safe_radius(f):
    return max(1e3, 100.0 * escape_radius(f))


# ---------------------------------------------------------------------------
# far-field phi and omega


def phi_far(f, z):
    """Boettcher map at |z| >= safe_radius(f); winding-free by construction."""
    z = np.asarray(z, dtype=complex)
    d = f.degree
    coeffs = np.asarray(f.coefficients)
    big = 10.0 ** (250.0 / d)
    logphi = np.log(z)
    w = z.copy()
    scale = 1.0 / d
    for _ in range(60):
        live = np.abs(w) <= big
        if not np.any(live):
            break
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            fw = np.zeros_like(w) + coeffs[-1]
            for c in coeffs[-2::-1]:
                fw = fw * w + c
            term = scale * np.log(fw / w ** d)
        term = np.where(live & np.isfinite(term), term, 0.0)
        logphi = logphi + term
        if np.max(np.abs(term)) < 1e-18:
            break
        w = np.where(live, fw, w)
        scale /= d
    return np.exp(logphi)


def omega_values(f, zs, cfg=escape.DEFAULT):
    """Vectorized (G, omega, escaped) over an array of points."""
    d = f.degree
    R = escape_radius(f)
    s = f.coeff_tail_abs
    big = 10.0 ** (250.0 / d)
    c_om = 4.0 * s
    coeffs = np.asarray(f.coefficients)

    w = np.atleast_1d(np.asarray(zs, dtype=complex)).copy()
    shape = w.shape
    w = w.ravel()
    deriv = np.ones_like(w)
    g = np.zeros(w.shape, dtype=float)
    om = np.zeros(w.shape, dtype=complex)
    done = np.zeros(w.shape, dtype=bool)
    for n in range(cfg.max_iter):
        aw = np.abs(w)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            aw2 = np.where(aw < 1e150, aw * aw, np.inf)
            tail = (np.log1p(s / aw2) / d ** (n + 1)) * d / (d - 1)
            ok_om = c_om / aw2 <= 5.0 * cfg.tol
        hit = ~done & (aw > R) & ((aw > big) | ((tail <= 0.5 * cfg.tol) & ok_om))
        if np.any(hit):
            g[hit] = np.log(aw[hit]) / d ** n
            om[hit] = 1j * deriv[hit] / w[hit]
            done[hit] = True
        if done.all():
            break
        live = ~done
        wl = w[live]
        # derivative from the marking: d * prod (z - c_i)
        dv = np.full_like(wl, d, dtype=complex)
        for c in f.critical_points:
            dv = dv * (wl - c)
        deriv[live] = deriv[live] * dv / d
        acc = np.zeros_like(wl) + coeffs[-1]
        for c in coeffs[-2::-1]:
            acc = acc * wl + c
        w[live] = np.where(np.isfinite(acc), acc, np.inf)
    return g.reshape(shape), om.reshape(shape), done.reshape(shape)


def _phi_omega_far(f, z):
    """(log phi, omega) at |z| >= safe_radius(f), in one fused orbit pass.

    Five orbit rounds from |z| >= 1e3 leave correction terms below 1e-18
    (double-exponential decay), so the round count is fixed.
    """
    z = np.asarray(z, dtype=complex)
    d = f.degree
    coeffs = np.asarray(f.coefficients)
    big = 10.0 ** (250.0 / d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logphi = np.log(z)
        rho = 1.0 / z           # d^{-m} (f^m)'(z)/f^m(z), m = 0
    w = z.copy()
    scale = 1.0 / d
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(5):
            fw = np.zeros_like(w) + coeffs[-1]
            for c in coeffs[-2::-1]:
                fw = fw * w + c
            dv = np.full_like(w, d, dtype=complex)
            for c in f.critical_points:
                dv = dv * (w - c)
            term = scale * np.log(fw / w ** d)
            factor = w * dv / (d * fw)
            bad = ~(np.isfinite(term) & np.isfinite(factor)) | (np.abs(w) > big)
            if bad.any():
                term = np.where(bad, 0.0, term)
                factor = np.where(bad, 1.0, factor)
                fw = np.where(bad, w, fw)
            logphi = logphi + term
            rho = rho * factor
            w = fw
            scale /= d
    return logphi, 1j * rho


def _phi_inverse_far(f, tau):
    """Solve phi(w) = tau for |tau| >= safe_radius(f)."""
    tau = np.asarray(tau, dtype=complex)
    w = tau.copy()
    for _ in range(12):
        lp, om = _phi_omega_far(f, w)
        ph = np.exp(lp)
        step = (ph - tau) / (ph * (-1j) * om)
        w = w - step
        if np.max(np.abs(step) / np.abs(w)) < 1e-15:
            break
    return w


# ---------------------------------------------------------------------------
# iterated-equation Newton descent


def _iter_n(f, z, n):
    """(f^n(z), (f^n)'(z)) for an array z, via the orbit."""
    w = np.asarray(z, dtype=complex).copy()
    D = np.ones_like(w)
    d = f.degree
    coeffs = np.asarray(f.coefficients)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(n):
            dv = np.full_like(w, d, dtype=complex)
            for c in f.critical_points:
                dv = dv * (w - c)
            D = D * dv
            acc = np.zeros_like(w) + coeffs[-1]
            for c in coeffs[-2::-1]:
                acc = acc * w + c
            w = acc
    return w, D


def _levels_above(f, h):
    """Smallest n with d^n h >= log(safe_radius)."""
    H = math.log(safe_radius(f))
    if h >= H:
        return 0
    return int(math.ceil(math.log(H / h) / math.log(f.degree) - 1e-12))


def _solve_on_ray(f, thetas, h, seeds, tol=1e-10, max_newton=40):
    """Newton-solve the ray equation log phi(f^n(z)) = d^n (h + i theta) from seeds.

    The residual is measured in the flat metric at the top level, so the
    bottom-point flat error is residual / d^n.  Returns (points, converged,
    omega_at_points).
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    seeds = np.atleast_1d(np.asarray(seeds, dtype=complex))
    d = f.degree
    n = _levels_above(f, h)
    th = thetas.copy()
    for _ in range(n):
        th = (th * d) % TWO_PI
    top_h = (d ** n) * h

    z = seeds.copy()
    ok = np.zeros(z.shape, dtype=bool)
    om_bottom = np.zeros_like(z)
    for _ in range(max_newton):
        w, D = _iter_n(f, z, n)
        lp, om = _phi_omega_far(f, w)
        resid = (lp.real - top_h) + 1j * ((lp.imag - th + math.pi) % TWO_PI - math.pi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            deriv = (-1j) * om * D
            step = resid / deriv
            om_bottom = om * D / d ** n
        bad = ~np.isfinite(step)
        step = np.where(bad, 0.0, step)
        ok = np.isfinite(z) & ~bad & (np.abs(resid) <= tol)
        if ok.all():
            break
        z = z - np.where(ok, 0.0, step)
    return z, ok, om_bottom


class RayWalker:
    """Walks a family of external rays downward by Newton continuation."""

    def __init__(self, f, thetas, cfg=DEFAULT, h_start=None):
        self.f = f
        self.cfg = cfg
        self.thetas = np.atleast_1d(np.asarray(thetas, dtype=float)) % TWO_PI
        H = math.log(safe_radius(f))
        self.h = max(H, h_start if h_start is not None else H)
        seeds = np.exp(self.h + 1j * self.thetas)
        self.z, ok, self.om = _solve_on_ray(f, self.thetas, self.h, seeds, tol=cfg.tol)
        if not ok.all():
            raise NewtonDivergence("ray anchor at the safe radius did not converge")

    def step_to(self, h_new, max_halvings=60):
        """Advance every lane to height h_new (< current h). Raises on failure."""
        if h_new >= self.h:
            if abs(h_new - self.h) < 1e-14 * max(1.0, self.h):
                return
            raise ValueError("RayWalker only descends")
        z, ok, om = self._attempt(self.thetas, self.z, self.om, self.h, h_new)
        if not ok.all():
            for i in np.flatnonzero(~ok):
                z[i], om[i] = self._scalar_descend(i, h_new, max_halvings)
        self.z = z
        self.om = om
        self.h = h_new

    def _attempt(self, thetas, z, om, h_from, h_to):
        z_new, ok, om_new = _solve_on_ray(self.f, thetas, h_to, z, tol=self.cfg.tol)
        with np.errstate(divide="ignore", invalid="ignore"):
            jump = np.abs(z_new - z) * np.abs(om)
        ok = ok & (jump <= 4.0 * (h_from - h_to) + 1e-7)
        return z_new, ok, om_new

    def _scalar_descend(self, i, h_target, max_halvings):
        theta = self.thetas[i]
        z = self.z[i]
        om = self.om[i]
        h = self.h
        halvings = 0
        while h > h_target + 1e-15:
            step = h - h_target
            while True:
                h_try = h - step
                z_new, ok, om_new = self._attempt(
                    np.array([theta]), np.array([z]), np.array([om]), h, h_try
                )
                if ok[0]:
                    z, h, om = z_new[0], h_try, om_new[0]
                    break
                step *= 0.5
                halvings += 1
                if step < self.cfg.min_step or halvings > max_halvings:
                    raise NewtonDivergence(
                        f"ray descent stalled at angle {theta:.6f}, height {h:.6g}"
                    )
        return z, om


def point_on_ray(f, theta, h, cfg=DEFAULT):
    """The point of the external ray at angle theta and height h."""
    w = RayWalker(f, [theta], cfg)
    _walk(w, h, cfg)
    return complex(w.z[0])


def _walk(walker, h_target, cfg):
    """Descend a walker to h_target in geometric steps.

    The absolute step is capped at 0.3 height units: a larger move lets the
    one-level Newton land on a preimage branch 2 pi/d away in the flat metric.
    """
    kappa = walker.f.degree ** (-1.0 / cfg.samples_per_level)
    steps = 0
    while walker.h > h_target * (1 + 1e-14) + 1e-15:
        h_next = max(h_target, walker.h * kappa, walker.h - 0.3)
        walker.step_to(h_next)
        steps += 1
        if steps > cfg.max_steps:
            raise StepLimit("too many descent steps")


# ---------------------------------------------------------------------------
# zeros of omega

@lru_cache(maxsize=256)
def _preimage_tree(f, crit_index, depth):
    """All solutions of f^depth(w) = c_i (zeros of omega at height G(c_i)/d^depth)."""
    c = f.critical_points[crit_index]
    if depth == 0:
        return (complex(c),)
    coeffs = f.iterate_coeffs(depth)
    coeffs = coeffs.copy()
    coeffs[0] -= c
    roots = np.roots(coeffs[::-1])
    return tuple(complex(r) for r in roots)


def zeros_of_omega(f, h_min, h_max, cfg=escape.DEFAULT):
    """Zeros of omega with heights in [h_min, h_max]: (location, height) pairs.

    These are the critical points of f in the basin together with all their
    iterated preimages.
    """
    out = []
    for i, smp in enumerate(escape.critical_escape_profile(f, cfg)):
        if not smp.escaped:
            continue
        h = smp.green
        depth = 0
        while h > h_max * (1 + 1e-12):
            h /= f.degree
            depth += 1
        while h >= h_min * (1 - 1e-12) and h > 0:
            for w in _preimage_tree(f, i, depth):
                out.append((w, h))
            h /= f.degree
            depth += 1
    return out


def zero_heights(f, h_min, h_max, cfg=escape.DEFAULT):
    hs = sorted({round(h, 12) for _, h in zeros_of_omega(f, h_min, h_max, cfg)})
    return hs


def flat_chord(f, z1, z2, cfg=escape.DEFAULT):
    """|integral of omega| along the straight segment from z1 to z2 (8-node Gauss)."""
    nodes, weights = np.polynomial.legendre.leggauss(8)
    t = 0.5 * (nodes + 1.0)
    pts = z1 + t * (z2 - z1)
    _, om, esc = omega_values(f, pts, cfg)
    if not esc.all():
        # segment leaves the basin; fall back to an upper bound by |omega| ds
        om = np.where(esc, om, 0.0)
    return abs(np.sum(weights * 0.5 * om) * (z2 - z1))


# ---------------------------------------------------------------------------
# external angles


def _orbit_to_safe(f, z, cfg):
    R = safe_radius(f)
    pts = [complex(z)]
    w = complex(z)
    for _ in range(cfg.escape.max_iter):
        if abs(w) >= R:
            break
        w = complex(f(w))
        pts.append(w)
    else:
        raise NotInBasin("orbit did not reach the safe radius")
    if abs(pts[-1]) < R:
        raise NotInBasin("orbit did not reach the safe radius")
    return np.array(pts)


def _angle_estimates(f, orbit):
    """Principal-branch angle estimates of arg phi at each orbit point."""
    d = f.degree
    zN = orbit[-1]
    lp = np.log(phi_far(f, np.array([zN]))[0])
    tail = float(lp.imag - np.angle(zN))
    est = np.empty(len(orbit))
    est[-1] = float(lp.imag)
    for m in range(len(orbit) - 2, -1, -1):
        zm = orbit[m]
        Lm = np.log(f(zm) / zm ** d)
        tail = (float(Lm.imag) + tail) / d
        est[m] = np.angle(zm) + tail
    return est


def external_angle(f, z, cfg=DEFAULT, refine=True):
    """External angle of an escaping point, in [0, 2 pi).

    The branch of the repeated division by d is fixed by continuity along the
    orbit, then certified by descending the resulting ray back onto z.
    """
    sample = green(f, z, cfg.escape)
    if not sample.escaped:
        raise NotInBasin(f"{z} does not escape")
    h = sample.green

    near = _near_zero(f, z, h, cfg)
    if near is not None:
        w0, hz = near
        cands = upward_angles(f, w0, hz, cfg)
        raise OnSingularLeafAmbiguous(
            f"point within sing_radius of a zero of omega at {w0:.6g}", candidates=cands
        )

    orbit = _orbit_to_safe(f, z, cfg)
    est = _angle_estimates(f, orbit)
    d = f.degree
    theta = est[-1]
    for m in range(len(orbit) - 2, -1, -1):
        k = round((d * est[m] - theta) / TWO_PI)
        theta = (theta + TWO_PI * k) / d
    theta %= TWO_PI

    if not refine:
        return theta
    ok, theta_ref = _verify_angle(f, z, h, theta, cfg)
    if ok:
        return theta_ref % TWO_PI
    theta_ode = _angle_by_flow(f, z, h, cfg)
    ok, theta_ref = _verify_angle(f, z, h, theta_ode, cfg)
    if ok:
        return theta_ref % TWO_PI
    raise NumericalError(f"external angle of {z} could not be certified")


def _near_zero(f, z, h, cfg):
    for w0, hz in zeros_of_omega(f, h * 0.98 - 1e-9, h * 1.02 + 1e-9, cfg.escape):
        if abs(w0 - z) < 1.0 and flat_chord(f, z, w0, cfg.escape) < cfg.sing_radius:
            return w0, hz
    return None


def _verify_angle(f, z, h, theta, cfg):
    """Descend ray theta to height h and Newton-polish theta onto z."""
    try:
        w = RayWalker(f, [theta], cfg)
        _walk(w, h, cfg)
    except (NewtonDivergence, StepLimit):
        return False, theta
    th = theta
    for _ in range(6):
        x = w.z[0]
        om = w.om[0]
        dz_dth = -1.0 / om
        delta = ((z - x) / dz_dth).real
        if abs(z - x) < 1e-11 * (1.0 + abs(z)):
            return True, th
        if abs(delta) > 0.5:
            return False, theta
        th = th + delta
        try:
            w = RayWalker(f, [th], cfg)
            _walk(w, h, cfg)
        except (NewtonDivergence, StepLimit):
            return False, theta
    x = w.z[0]
    return abs(z - x) < 1e-9 * (1.0 + abs(z)), th


def _angle_by_flow(f, z, h, cfg):
    """Upward gradient flow to the safe radius; returns the angle there."""
    R = safe_radius(f)
    H = math.log(R)
    w = complex(z)
    hh = h
    while hh < H:
        _, om, esc = omega_values(f, np.array([w]), cfg.escape)
        if not esc[0] or om[0] == 0:
            raise NumericalError("gradient flow hit a non-escaping or singular point")
        om0 = om[0]
        # limit the Euclidean displacement step/|omega| near metric degeneracies
        step = min(0.05, 0.1 * (1.0 + abs(w)) * abs(om0), H - hh)
        step = max(step, 1e-6)

        def vel(p):
            _, o, e = omega_values(f, np.array([p]), cfg.escape)
            if not e[0] or o[0] == 0 or not np.isfinite(o[0]):
                raise NumericalError("gradient flow left the basin")
            with np.errstate(over="ignore", invalid="ignore"):
                v = 1j * np.conj(o[0]) / abs(o[0]) ** 2
            if not np.isfinite(v):
                raise NumericalError("gradient flow hit a metric singularity")
            return v

        k1 = vel(w)
        k2 = vel(w + 0.5 * step * k1)
        k3 = vel(w + 0.5 * step * k2)
        k4 = vel(w + step * k3)
        w = w + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        hh += step
        # height correction
        smp = green(f, w, cfg.escape)
        if smp.escaped and smp.omega != 0:
            w = w + (hh - smp.green) * 1j * np.conj(smp.omega) / abs(smp.omega) ** 2
    return float(np.angle(phi_far(f, np.array([w]))[0]) % TWO_PI)


def bottcher(f, z, cfg=DEFAULT):
    """phi(z) = exp(G + i theta) on {G > M(f)}."""
    sample = green(f, z, cfg.escape)
    if not sample.escaped:
        raise NotInBasin(f"{z} does not escape")
    M = max_escape_rate(f, cfg.escape)
    if sample.green <= M + 1e-9:
        raise BelowCriticalHeight(
            f"G(z) = {sample.green:.6g} <= M(f) + 1e-9 = {M + 1e-9:.6g}"
        )
    theta = external_angle(f, z, cfg)
    return complex(np.exp(sample.green + 1j * theta))


# ---------------------------------------------------------------------------
# upward branches at a zero of omega


def upward_angles(f, w0, height, cfg=DEFAULT):
    """External angles of the upward vertical leaves at a zero of omega."""
    delta = 1e-5 * (1.0 + abs(w0))
    probes = w0 + delta * np.exp(1j * np.array([0.0, 0.5 * math.pi]))
    _, oms, esc = omega_values(f, probes, cfg.escape)
    if not esc.all():
        raise NumericalError("zero of omega probes left the basin")
    ratio = oms[1] / oms[0]
    nu = int(round((np.angle(ratio) % TWO_PI) / (0.5 * math.pi))) % 4
    nu = max(1, nu)
    A = oms[0] / delta ** nu
    # upward vertical directions: arg A + (nu+1) psi = pi/2 (mod 2 pi)
    psis = [
        (0.5 * math.pi - np.angle(A) + TWO_PI * j) / (nu + 1.0) for j in range(nu + 1)
    ]
    flat_offset = max(10.0 * cfg.sing_radius, 1e-4)
    rho = ((nu + 1.0) * flat_offset / abs(A)) ** (1.0 / (nu + 1.0))
    angles = []
    for psi in psis:
        p = w0 + rho * np.exp(1j * psi)
        try:
            angles.append(external_angle(f, p, cfg))
        except (OnSingularLeafAmbiguous, NumericalError):
            continue
    return sorted(set(round(a, 10) for a in angles))


# ---------------------------------------------------------------------------
# ray tracing


@dataclass(frozen=True)
class RayTrace:
    angle: float
    samples: tuple            # ordered (height, point) pairs, heights decreasing
    status: str               # reached_target_height | hit_singularity | step_limit
    singular_location: complex = None
    singular_height: float = None

    def as_rows(self):
        rows = []
        for h, z in self.samples:
            rows.append((self.angle, h, z.real, z.imag, self.status))
        return rows


def trace_ray(f, theta, h_stop, cfg=DEFAULT):
    """Trace the external ray of angle theta down to height h_stop.

    The trace starts at height M(f)+1, descends by Newton continuation with
    step-halving, and terminates early with status "hit_singularity" if it
    comes within cfg.sing_radius (flat metric) of a zero of omega.
    """
    if not h_stop > 0:
        raise NotInBasin("h_stop must be positive")
    theta = float(theta) % TWO_PI
    M = max_escape_rate(f, cfg.escape)
    h_start = max(M + 1.0, h_stop)
    walker = RayWalker(f, [theta], cfg, h_start=h_start)
    _walk(walker, h_start, cfg)

    samples = [(walker.h, complex(walker.z[0]))]
    crossings = [h for h in zero_heights(f, h_stop, h_start, cfg.escape) if h < h_start]
    crossings.sort(reverse=True)

    kappa = f.degree ** (-1.0 / cfg.samples_per_level)
    probe = max(0.5 * cfg.sing_radius, 1e-9)
    steps = 0
    status = "reached_target_height"
    sing_loc = None
    sing_h = None
    while walker.h > h_stop * (1 + 1e-14):
        h_next = max(h_stop, walker.h * kappa)
        # handle singular-height crossings inside this step
        while crossings and crossings[0] >= h_next:
            h_star = crossings.pop(0)
            if h_star >= walker.h - 1e-15:
                continue
            try:
                if h_star + probe < walker.h - 1e-15:
                    walker.step_to(h_star + probe)
            except NewtonDivergence:
                status = "hit_singularity"
                sing_loc, sing_h = _nearest_zero(f, complex(walker.z[0]), h_star, cfg)
                break
            hit = _singular_hit(f, complex(walker.z[0]), h_star, cfg)
            if hit is not None:
                status = "hit_singularity"
                sing_loc, sing_h = hit
                break
            samples.append((walker.h, complex(walker.z[0])))
        if status != "reached_target_height":
            break
        try:
            walker.step_to(h_next)
        except NewtonDivergence:
            hs = zero_heights(f, h_next, walker.h, cfg.escape)
            if hs:
                status = "hit_singularity"
                sing_loc, sing_h = _nearest_zero(f, complex(walker.z[0]), hs[-1], cfg)
                break
            raise
        samples.append((walker.h, complex(walker.z[0])))
        steps += 1
        if steps > cfg.max_steps:
            status = "step_limit"
            break
    return RayTrace(
        angle=theta,
        samples=tuple(samples),
        status=status,
        singular_location=sing_loc,
        singular_height=sing_h,
    )


def _singular_hit(f, z, h_star, cfg):
    best = None
    for w0, hz in zeros_of_omega(f, h_star * (1 - 1e-9) - 1e-12, h_star * (1 + 1e-9) + 1e-12, cfg.escape):
        dist = flat_chord(f, z, w0, cfg.escape)
        if dist < 2.5 * cfg.sing_radius and (best is None or dist < best[0]):
            best = (dist, w0, hz)
    if best is None:
        return None
    return best[1], best[2]


def _nearest_zero(f, z, h_star, cfg):
    cands = zeros_of_omega(f, h_star * (1 - 1e-9) - 1e-12, h_star * (1 + 1e-9) + 1e-12, cfg.escape)
    if not cands:
        return z, h_star
    w0, hz = min(cands, key=lambda t: abs(t[0] - z))
    return w0, hz
