"""The pushing-up deformation, local-model gluing, and B(f,t)/S(f,t) tests.

A shift-locus polynomial is pinned locally by the heights and external angles
of its critical values (the polar-log form of the critical value map), so
both the pushing deformation and the gluing inverse problem are realized as
Newton continuation on that data in the marking coordinates: push_up drives
the lowest critical values up their frozen external rays, emitting branch
events when a moving value meets a zero of omega; glue_and_extend drives the
seed's critical data onto the targets implied by the replacement local
models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import localmodels, rays
from .basin_metric import MetricConfig, eps_conjugacy
from .errors import (
    DegreeMismatch,
    NotInShiftLocus,
    NumericalError,
    SolveFailure,
)
from .escape import green
from .poly import from_critical_data
from .rays import RayConfig

__all__ = [
    "DeformConfig",
    "BranchEvent",
    "DeformationPath",
    "push_up",
    "glue_and_extend",
    "in_B",
    "in_S",
    "BRANCH_POLICIES",
]

TWO_PI = 2.0 * math.pi
BRANCH_POLICIES = ("smallest_angle", "largest_angle", "index_k")


@dataclass(frozen=True)
class DeformConfig:
    residual_tol: float = 1e-9
    group_tol: float = 1e-9
    steps: int = 50               # initial number of height steps
    min_step: float = 1e-9
    eps_accept: float = 1e-4
    certify_every: int = 5        # eps-certificate cadence along the path (0: off)
    band_factor: float = 4.0      # certificate band [t, band_factor * t]
    branch_index: int = 0         # for policy "index_k"
    ray: RayConfig = field(default_factory=lambda: RayConfig(samples_per_level=8))
    metric: MetricConfig = field(default_factory=lambda: MetricConfig(
        grid_angles=72, grid_heights=36, pairs=400))


DEFAULT = DeformConfig()


@dataclass(frozen=True)
class BranchEvent:
    height: float                 # critical height at the event
    zero_of_omega: complex
    candidate_rays: tuple
    chosen_ray: float
    policy: str


@dataclass(frozen=True, eq=False)
class DeformationPath:
    heights: tuple
    polynomials: tuple
    branch_events: tuple
    invariant_log: tuple          # dicts: min_crit_height, residual, epsilon

    @property
    def final(self):
        return self.polynomials[-1]


# ---------------------------------------------------------------------------
# the critical-data observable and its Newton solver


def _marking(g):
    c = np.array(g.critical_points)
    return np.concatenate([c[:-1], [g.origin_image]])


def _poly_of(x, d):
    if d == 2:
        return from_critical_data([0.0], x[-1])
    c_free = list(x[:-1])
    return from_critical_data(c_free + [-np.sum(x[:-1])], x[-1])


def _observe(g, cfg, refine=True):
    """(critical height G(c), external angle of the value g(c)) per marked
    critical point, in marked order."""
    out = []
    for c in g.critical_points:
        v = complex(g(c))
        smp = green(g, v, cfg.ray.escape)
        if not smp.escaped:
            raise NotInShiftLocus(f"critical value {v} does not escape")
        theta = rays.external_angle(g, v, cfg.ray, refine=refine)
        out.append((smp.green / g.degree, theta))
    return out


def _residual(obs, targets):
    r = []
    for (h, th), (H, TH) in zip(obs, targets):
        r.append(h - H)
        r.append((th - TH + math.pi) % TWO_PI - math.pi)
    return np.array(r)


def _solve_targets(g, targets, cfg, max_newton=12):
    """Newton in the marking for critical data = targets.  Returns (g, residual)."""
    d = g.degree
    x = _marking(g)
    n = 2 * (d - 1)

    def to_real(xc):
        return np.concatenate([xc.real, xc.imag])

    def to_complex(xr):
        m = len(xr) // 2
        return xr[:m] + 1j * xr[m:]

    xr = to_real(x)
    r = _residual(_observe(g, cfg), targets)
    best = (float(np.max(np.abs(r))), xr.copy())
    for _ in range(max_newton):
        res_norm = float(np.max(np.abs(r)))
        if res_norm <= cfg.residual_tol:
            break
        J = np.zeros((n, n))
        h_fd = 1e-6
        for m in range(n):
            xp = xr.copy()
            xp[m] += h_fd
            gp = _poly_of(to_complex(xp), d)
            rp = _residual(_observe(gp, cfg, refine=False), targets)
            J[:, m] = (rp - r) / h_fd
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, r, rcond=None)
        cap = 0.5 * (1.0 + float(np.max(np.abs(xr))))
        norm = float(np.max(np.abs(step)))
        if norm > cap:
            step *= cap / norm
        xr = xr - step
        g = _poly_of(to_complex(xr), d)
        r = _residual(_observe(g, cfg), targets)
        if float(np.max(np.abs(r))) < best[0]:
            best = (float(np.max(np.abs(r))), xr.copy())
    res = float(np.max(np.abs(r)))
    if res > best[0]:
        xr = best[1]
        g = _poly_of(to_complex(xr), d)
        res = best[0]
    return g, res


# ---------------------------------------------------------------------------
# push-up


def push_up(f, t, policy="smallest_angle", cfg=DEFAULT):
    """Push the lowest critical values of a shift-locus polynomial up their
    external rays until every critical height reaches t.

    Returns a DeformationPath; branch events record the ray choices made when
    a moving critical value meets a zero of omega (resolved by `policy`).
    """
    if policy not in BRANCH_POLICIES:
        raise ValueError(f"unknown branch policy {policy!r}")
    d = f.degree
    samples = [green(f, c, cfg.ray.escape) for c in f.critical_points]
    if not all(s.escaped for s in samples):
        raise NotInShiftLocus("all critical points must escape")
    heights = [s.green for s in samples]
    if min(heights) >= t - 1e-12:
        return DeformationPath(
            heights=(min(heights),), polynomials=(f,), branch_events=(),
            invariant_log=({"min_crit_height": min(heights), "residual": 0.0,
                            "epsilon": 0.0},),
        )

    g = f
    obs = _observe(g, cfg)
    path_h = [min(heights)]
    path_p = [f]
    events = []
    log = [{"min_crit_height": min(heights), "residual": 0.0, "epsilon": None}]
    step_count = 0

    while True:
        obs = _observe(g, cfg)
        hs = [h for h, _ in obs]
        s = min(hs)
        if s >= t - 1e-9:
            break
        lows = [j for j, h in enumerate(hs) if h <= s + cfg.group_tol]
        frozen = {j: obs[j] for j in range(d - 1) if j not in lows}
        low_angles = {j: obs[j][1] for j in lows}

        # phase end: t, the next frozen height, whichever first
        phase_end = t
        for j, (H, _) in frozen.items():
            if s < H < phase_end:
                phase_end = H

        # event heights: moving values at height d*h meet zeros of omega at
        # heights H_i / d^m, i.e. h* = H_i / d^{m+1}
        event_hs = set()
        for j, (H, _) in frozen.items():
            hstar = H / d
            while hstar > s + 1e-12:
                if hstar < phase_end - 1e-12:
                    event_hs.add(round(hstar, 12))
                hstar /= d
        event_list = sorted(event_hs)

        h = s
        dh = (t - s) / cfg.steps
        while h < phase_end - 1e-12:
            next_events = [e for e in event_list if e > h + 1e-12]
            h_next = min(phase_end, h + dh, *(next_events[:1] or [phase_end]))
            targets = []
            for j in range(d - 1):
                if j in lows:
                    targets.append((h_next, low_angles[j]))
                else:
                    targets.append(frozen[j])
            g_try, res = _solve_targets(g, targets, cfg)
            if res > 100 * cfg.residual_tol:
                dh *= 0.5
                if dh < cfg.min_step:
                    raise SolveFailure(
                        f"push-up stalled at height {h:.6g}", residual=res)
                continue
            g = g_try
            h = h_next
            dh = min(dh * 1.4, (t - s) / 10)
            step_count += 1
            eps_val = None
            if cfg.certify_every and step_count % cfg.certify_every == 0:
                eps_val = eps_conjugacy(
                    f, g, t, cfg.band_factor * t, cfg.metric).epsilon
            path_h.append(h)
            path_p.append(g)
            log.append({"min_crit_height": min(x for x, _ in _observe(g, cfg)),
                        "residual": res, "epsilon": eps_val})

            # branch events exactly at event heights
            if next_events and abs(h - next_events[0]) < 1e-10:
                for j in lows:
                    ev = _branch_event_at(g, j, h, policy, cfg)
                    if ev is not None:
                        events.append(ev)
                        low_angles[j] = ev.chosen_ray

    eps_val = eps_conjugacy(f, g, t, cfg.band_factor * t, cfg.metric).epsilon
    if abs(path_h[-1] - t) > 1e-12:
        path_h.append(t)
        path_p.append(g)
        log.append({"min_crit_height": min(x for x, _ in _observe(g, cfg)),
                    "residual": 0.0, "epsilon": eps_val})
    else:
        log[-1]["epsilon"] = eps_val
    return DeformationPath(
        heights=tuple(path_h), polynomials=tuple(path_p),
        branch_events=tuple(events), invariant_log=tuple(log),
    )


def _branch_event_at(g, j, h, policy, cfg):
    """Check whether the value of critical point j sits on a zero of omega."""
    v = complex(g(g.critical_points[j]))
    hv = h * g.degree
    zs = rays.zeros_of_omega(g, hv * (1 - 1e-8) - 1e-12, hv * (1 + 1e-8) + 1e-12,
                             cfg.ray.escape)
    if not zs:
        return None
    w0, hz = min(zs, key=lambda p: abs(p[0] - v))
    if rays.flat_chord(g, v, w0, cfg.ray.escape) > 2.0 * cfg.ray.sing_radius:
        return None
    try:
        cands = rays.upward_angles(g, w0, hz, cfg.ray)
    except NumericalError:
        return None
    if not cands:
        return None
    if policy == "smallest_angle":
        chosen = min(cands)
    elif policy == "largest_angle":
        chosen = max(cands)
    else:
        chosen = cands[cfg.branch_index % len(cands)]
    return BranchEvent(
        height=h, zero_of_omega=complex(w0), candidate_rays=tuple(cands),
        chosen_ray=float(chosen), policy=policy,
    )


# ---------------------------------------------------------------------------
# gluing


def glue_and_extend(f, t, replacements, cfg=DEFAULT, models=None):
    """The unique polynomial whose basin above t matches f's and whose local
    models at t are the replacements (all critical values on central leaves).

    Realized as Newton continuation in parameter space on the critical data
    targets implied by the replacements, seeded from f.
    """
    d = f.degree
    if models is None:
        models = localmodels.extract_local_models(f, t)
    if len(replacements) != len(models):
        raise DegreeMismatch(
            f"{len(replacements)} replacements for {len(models)} components")
    for r, m in zip(replacements, models):
        if r.degree != m.degree:
            raise DegreeMismatch(
                f"replacement degree {r.degree} != component degree {m.degree}")
        if len(r.critical_value_angles) != r.degree - 1:
            raise DegreeMismatch(
                "replacement is not in LM_k^{k-1}: critical values missing")

    # targets from f's own high critical points
    targets = []
    for c in f.critical_points:
        smp = green(f, c, cfg.ray.escape)
        if smp.escaped and smp.green > t + 1e-9:
            targets.append((smp.green,
                            rays.external_angle(f, complex(f(c)), cfg.ray)))
    # targets from the replacements: a surface angle alpha on the central
    # leaf sits at basin angle anchor + alpha/lambda (unit arc rate)
    for r, m in zip(replacements, models):
        lam = m.basin_scale
        anchor = m.basin_anchor_angle
        for alpha in r.critical_value_angles:
            theta = (anchor + alpha / lam) % TWO_PI
            targets.append((float(t), float(theta)))
    if len(targets) != d - 1:
        raise DegreeMismatch(
            f"targets cover {len(targets)} critical points, expected {d - 1}")

    seed = _glue_seed(f, t, targets, cfg)
    obs = _observe(seed, cfg)
    order = _match_targets(obs, targets)
    targets = [targets[i] for i in order]

    g, res = _solve_targets(seed, targets, cfg, max_newton=25)
    if res > 1e-8:
        # homotopy fallback: blend from the seed's data to the targets
        obs = _observe(seed, cfg)
        g = seed
        m_steps = 20
        for k in range(1, m_steps + 1):
            frac = k / m_steps
            blend = [
                ((1 - frac) * h0 + frac * H,
                 th0 + frac * ((TH - th0 + math.pi) % TWO_PI - math.pi))
                for (h0, th0), (H, TH) in zip(obs, targets)
            ]
            g, res = _solve_targets(g, blend, cfg)
            if res > 1e-6:
                raise SolveFailure(
                    f"gluing continuation stalled at s={frac:.2f}", residual=res)
        g, res = _solve_targets(g, targets, cfg, max_newton=25)
    if res > 1e-8:
        raise SolveFailure("gluing did not converge", residual=res)
    return g


def _glue_seed(f, t, targets, cfg):
    """Initial polynomial for the gluing solve."""
    d = f.degree
    samples = [green(f, c, cfg.ray.escape) for c in f.critical_points]
    if all(s.escaped for s in samples):
        return f
    # bootstrap: place critical points at the ray points of the target data
    pos = []
    for H, TH in targets:
        try:
            pos.append(rays.point_on_ray(f, TH, H, cfg.ray))
        except Exception:
            pos.append(np.exp(H + 1j * TH))
    pos = [complex(p) for p in pos]
    mean = sum(pos) / len(pos)
    pos = [p - mean for p in pos]
    if d == 2:
        a0 = complex(np.exp(d * targets[0][0] + 1j * targets[0][1] * d))
        return from_critical_data([0.0], a0)
    a0 = complex(f(0.0))
    return from_critical_data(pos, a0 if np.isfinite(a0) else 0.0)


def _match_targets(obs, targets):
    """Greedy minimal-distance matching of targets to the marked order of obs."""
    n = len(obs)
    remaining = list(range(n))
    order = []
    for h, th in obs:
        best_i, best_d = None, None
        for i in remaining:
            H, TH = targets[i]
            dist = abs(h - H) + abs((th - TH + math.pi) % TWO_PI - math.pi)
            if best_d is None or dist < best_d:
                best_i, best_d = i, dist
        order.append(best_i)
        remaining.remove(best_i)
    return order


# ---------------------------------------------------------------------------
# membership predicates


@dataclass(frozen=True, eq=False)
class MembershipResult:
    value: bool
    inconclusive: bool
    report: object

    def __bool__(self):
        return bool(self.value)


def in_B(f, t, g, cfg=DEFAULT):
    """Is g|{G>t} conformally conjugate to f|{G>t} at resolution?

    True iff the eps-conjugacy above t reports eps <= cfg.eps_accept; the
    verdict is inconclusive for eps in [eps_accept, 10 eps_accept).
    """
    rep = eps_conjugacy(f, g, t, cfg.band_factor * t, cfg.metric)
    if rep.epsilon <= cfg.eps_accept:
        return MembershipResult(True, False, rep)
    if rep.epsilon < 10 * cfg.eps_accept:
        return MembershipResult(False, True, rep)
    return MembershipResult(False, False, rep)


def in_S(f, t, g, cfg=DEFAULT):
    """in_B plus all critical heights of g at least t (within 1e-8)."""
    b = in_B(f, t, g, cfg)
    if not b.value:
        return MembershipResult(False, b.inconclusive, b.report)
    for c in g.critical_points:
        smp = green(g, c, cfg.ray.escape)
        if not smp.escaped or smp.green < t - 1e-8:
            return MembershipResult(False, False, b.report)
    return MembershipResult(True, False, b.report)
