"""Predictor-corrector lifting of critical-value paths.

The map nu sending a marked polynomial to its ordered critical values is
polynomial in the marking coordinates (c_1, ..., c_{d-2}, a) on the centering
hyperplane, and its Jacobian is available in closed form because
d nu_j / d c_m has no chain term through the moving critical point
(f'(c_j) = 0).  Paths v(s) in value space are lifted by an Euler predictor on
the Jacobian linearization plus a Newton corrector, with a residual-based
trust region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LiftFailure
from .poly import MarkedPolynomial, critical_values, from_critical_data

__all__ = [
    "ContinuationConfig",
    "LiftedPath",
    "jacobian_nu",
    "lift_critical_value_path",
    "nu",
]


@dataclass(frozen=True)
class ContinuationConfig:
    residual_tol: float = 1e-9
    accept_tol: float = 1e-8
    initial_step: float = 1e-2
    grow: float = 1.5
    shrink: float = 0.5
    min_step: float = 1e-12
    max_steps: int = 100000
    # a lift parked at a coalescence by residual_tol=1e-9 sits at marking
    # distance ~(tol)^(1/3) from the degeneracy, where cond(J) ~ 1e5; a 1e10
    # threshold would never fire on a lifted path
    cond_singular: float = 1e4
    lateral_perturbation: float = 1e-9


DEFAULT = ContinuationConfig()


def nu(p):
    """Ordered critical values as a complex vector."""
    return np.array(critical_values(p))


def _marking_coords(p):
    """Independent coordinates (c_1..c_{d-2}, a); c_{d-1} = -sum of the others."""
    c = np.array(p.critical_points)
    return np.concatenate([c[:-1], [p.origin_image]])


def _poly_from_coords(x, d):
    c_free = x[:-1]
    c_last = -np.sum(c_free) if len(c_free) else 0.0
    return from_critical_data(list(c_free) + [c_last], x[-1])


def jacobian_nu(p):
    """(d-1)x(d-1) complex Jacobian of nu in the marking coordinates.

    Column m < d-2 differentiates in c_m (with c_{d-1} compensating to keep
    the marking centered); the last column differentiates in a.
    """
    d = p.degree
    c = np.array(p.critical_points)
    n = d - 1
    J = np.zeros((n, n), dtype=complex)
    J[:, -1] = 1.0  # d f(z)/d a = 1

    # partial f/partial c_m (z) = -d * int_0^z prod_{i != m} + d * int_0^z prod_{i != d-1}
    def antideriv_skip(skip):
        roots = [c[i] for i in range(n) if i != skip]
        coeffs = np.array([1.0 + 0.0j])
        for r in roots:
            coeffs = np.convolve(coeffs, np.array([-r, 1.0 + 0.0j]))
        # integral from 0: ascending coefficients shifted up one degree
        return np.concatenate([[0.0], d * coeffs / np.arange(1, len(coeffs) + 1)])

    last = antideriv_skip(n - 1)
    from .poly import horner

    for m in range(n - 1):
        col = antideriv_skip(m)
        for j in range(n):
            J[j, m] = -horner(col, c[j]) + horner(last, c[j])
    return J


@dataclass(frozen=True, eq=False)
class LiftedPath:
    steps: tuple                 # (s, MarkedPolynomial, residual) triples
    status: str                  # complete | stalled | branch_singular
    singular_passages: tuple = ()

    @property
    def polynomials(self):
        return tuple(p for _, p, _ in self.steps)

    @property
    def final(self):
        return self.steps[-1][1]


def _newton_correct(x, d, target, cfg):
    """Newton iterations for nu(x) = target; returns (x, residual, cond)."""
    cond = 0.0
    for _ in range(30):
        p = _poly_from_coords(x, d)
        r = nu(p) - target
        res = float(np.linalg.norm(r))
        if res <= cfg.residual_tol:
            return x, res, cond
        J = jacobian_nu(p)
        cond = float(np.linalg.cond(J))
        if not np.isfinite(cond) or cond > 1e14:
            return x, res, cond
        x = x - np.linalg.solve(J, r)
    p = _poly_from_coords(x, d)
    return x, float(np.linalg.norm(nu(p) - target)), cond


def lift_critical_value_path(p0, v, cfg=DEFAULT):
    """Lift the path v: [0,1] -> C^{d-1} through nu, starting at p0.

    v is a callable returning the d-1 target critical values at s.  The lift
    must start consistently: ||nu(p0) - v(0)|| <= 1e-8.
    """
    d = p0.degree
    v0 = np.asarray(v(0.0), dtype=complex)
    r0 = float(np.linalg.norm(nu(p0) - v0))
    if r0 > 1e-8:
        raise LiftFailure(f"nu(p0) does not match v(0): residual {r0:.3e}", residual=r0)

    x = _marking_coords(p0)
    steps = [(0.0, p0, r0)]
    passages = []
    s = 0.0
    ds = cfg.initial_step
    n_steps = 0
    J = jacobian_nu(p0)
    cond = float(np.linalg.cond(J))
    while s < 1.0 - 1e-15:
        if n_steps > cfg.max_steps:
            return LiftedPath(tuple(steps), "stalled", tuple(passages))
        n_steps += 1
        s_new = min(1.0, s + ds)
        target = np.asarray(v(s_new), dtype=complex)

        p_cur = _poly_from_coords(x, d)
        lateral = None
        if cond > cfg.cond_singular:
            # branch point of nu: nudge the target sideways and record passage
            lateral = cfg.lateral_perturbation * np.exp(1j * (0.5 + np.arange(d - 1)))
            if not passages or abs(passages[-1] - s_new) > 1e-12:
                passages.append(s_new)

        tgt = target + (lateral if lateral is not None else 0.0)
        dv = tgt - nu(p_cur)
        try:
            predictor_move = np.linalg.solve(J, dv)
        except np.linalg.LinAlgError:
            predictor_move, *_ = np.linalg.lstsq(J, dv, rcond=None)
        x_pred = x + predictor_move
        x_new, res, _ = _newton_correct(x_pred, d, tgt, cfg)

        accept = res <= cfg.accept_tol and np.all(np.isfinite(x_new))
        if accept:
            # corrector may not run away from the linearized prediction
            move = float(np.linalg.norm(x_new - x))
            accept = move <= 10.0 * float(np.linalg.norm(predictor_move)) + 1e-9
        if accept:
            p_new = _poly_from_coords(x_new, d)
            steps.append((s_new, p_new, res))
            x = x_new
            s = s_new
            ds = min(cfg.grow * ds, 0.1)
            J = jacobian_nu(p_new)
            cond = float(np.linalg.cond(J))
            if cond > cfg.cond_singular and (not passages or abs(passages[-1] - s_new) > 1e-12):
                passages.append(s_new)
        else:
            ds *= cfg.shrink
            if ds < cfg.min_step:
                return LiftedPath(tuple(steps), "stalled", tuple(passages))
    status = "branch_singular" if passages else "complete"
    return LiftedPath(tuple(steps), status, tuple(passages))
