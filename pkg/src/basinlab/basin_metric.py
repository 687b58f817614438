"""Truncated-basin data and the epsilon-conjugacy test.

The truncated basin X_t(f) is sampled on a Boettcher (angle x height) grid
located by ray-Newton descent.  The epsilon-conjugacy between two basins uses
the canonical correspondence that matches grid coordinates after rotating by
one of the d-1 fixed-ray identifications.  With that correspondence the
near-surjectivity and near-equivariance defects vanish up to solver
tolerance, so the reported epsilon is carried by the metric distortion term:
pairwise flat distances measured by Dijkstra on the |omega|-weighted grid
graph, with edges across different level-set components cut by a midpoint
height test.  Both sides use the identical chord quadrature, so systematic
quadrature error cancels exactly for conjugate pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import rays
from .errors import NonGenericHeight, PreconditionError
from .escape import green, max_escape_rate
from .rays import RayConfig, RayWalker, zeros_of_omega

__all__ = [
    "MetricConfig",
    "TruncatedBasin",
    "ConjugacyReport",
    "truncate",
    "eps_conjugacy",
    "gh_distance_estimate",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MetricConfig:
    grid_angles: int = 96
    grid_heights: int = 48
    pairs: int = 600
    seed: int = 20260809
    eps_accept: float = 1e-4
    ray: RayConfig = field(default_factory=lambda: RayConfig(samples_per_level=8))


DEFAULT = MetricConfig()


@dataclass(frozen=True, eq=False)
class TruncatedBasin:
    f: object
    t: float
    T: float
    thetas: np.ndarray          # grid angles, shape (na,)
    heights: np.ndarray         # grid heights, shape (nh,), decreasing
    points: np.ndarray          # shape (na, nh) complex
    omegas: np.ndarray          # shape (na, nh) complex
    singular_heights: tuple     # (height, (angle, ...)) grand-orbit heights in band
    critical_heights_sorted: tuple
    zeros_in_band: tuple        # (location, height, (upward angle, ...)) of zeros of omega


def _grid_angles(n, d):
    # the rotation re-indexing by fixed rays needs (d-1) | n; the half-cell
    # offset keeps grid rays off the angles 2 pi p/q where singular rays of
    # real or symmetric polynomials concentrate
    n += (-n) % max(1, d - 1)
    return TWO_PI * (np.arange(n) + 0.5) / n


def truncate(f, t, T=None, cfg=DEFAULT):
    """Sample the truncated basin {t <= G <= T} on an (angle x height) grid."""
    if T is None:
        if not t <= 1.0:
            raise PreconditionError("default band T = 1/t needs t <= 1")
        T = 1.0 / t
    if not 0 < t < T:
        raise PreconditionError("need 0 < t < T")
    d = f.degree
    thetas = _grid_angles(cfg.grid_angles, d)
    heights = np.linspace(T, t, cfg.grid_heights)

    walker = RayWalker(f, thetas, cfg.ray, h_start=T)
    rays._walk(walker, T, cfg.ray)
    na, nh = len(thetas), len(heights)
    pts = np.empty((na, nh), dtype=complex)
    oms = np.empty((na, nh), dtype=complex)
    pts[:, 0] = walker.z
    oms[:, 0] = walker.om
    for j in range(1, nh):
        walker.step_to(heights[j])
        pts[:, j] = walker.z
        oms[:, j] = walker.om

    zs = zeros_of_omega(f, t - 1e-12, T + 1e-12, cfg.ray.escape)
    zeros_band = []
    sing = {}
    for w0, hz in zs:
        try:
            ups = tuple(float(a) for a in rays.upward_angles(f, w0, hz, cfg.ray))
        except Exception:
            ups = ()
        zeros_band.append((complex(w0), float(hz), ups))
        sing.setdefault(round(hz, 9), []).extend(ups)
    # the spec's singular-height list also carries the forward grand-orbit
    # heights (leaves through iterated critical values)
    for c in f.critical_points:
        smp = green(f, c, cfg.ray.escape)
        if not smp.escaped:
            continue
        h = smp.green * d
        w = complex(f(c))
        while h <= T + 1e-9:
            if h >= t - 1e-9:
                try:
                    ang = (float(rays.external_angle(f, w, cfg.ray)),)
                except Exception:
                    ang = ()
                sing.setdefault(round(h, 9), []).extend(ang)
            w = complex(f(w))
            h *= d
    singular_heights = tuple(sorted((h, tuple(sorted(set(a)))) for h, a in sing.items()))
    crit = sorted(
        s.green for s in
        (green(f, c, cfg.ray.escape) for c in f.critical_points)
        if s.escaped and t - 1e-9 <= s.green <= T + 1e-9
    )
    return TruncatedBasin(
        f=f, t=t, T=float(T), thetas=thetas, heights=heights,
        points=pts, omegas=oms,
        singular_heights=singular_heights,
        critical_heights_sorted=tuple(crit),
        zeros_in_band=tuple(zeros_band),
    )


def _flat_chords(f, pts, w0):
    """|integral of omega| along straight chords from each of pts to w0."""
    nodes, weights = np.polynomial.legendre.leggauss(8)
    t = 0.5 * (nodes + 1.0)
    pts = np.asarray(pts, dtype=complex)
    seg = (w0 - pts)[:, None]
    samples = pts[:, None] + t[None, :] * seg
    _, om, esc = rays.omega_values(f, samples.ravel())
    om = np.where(esc, om, 0.0).reshape(samples.shape)
    return np.abs(np.sum(weights[None, :] * 0.5 * om, axis=1) * seg[:, 0])


def _grid_graph(tb):
    """Flat-metric graph on the Boettcher grid.

    Along a ray the flat increment is exactly dh, and along a leaf exactly
    dtheta, so clean edges get lattice weights and systematic errors cancel
    between conjugate basins.  Edges near a zero of omega *inside the closed
    band* are additionally routed through the cone point (weight = flat
    distance via the zero); horizontal edges whose chord midpoint leaves the
    leaf and that have no cone route are cut (distinct components).  Zeros
    below the band bottom never matter: in-band paths cannot reach them.
    """
    f = tb.f
    na, nh = tb.points.shape
    dtheta = TWO_PI / na
    dh = abs(tb.heights[0] - tb.heights[1]) if nh > 1 else 1.0
    cell = dh + dtheta
    idx = np.arange(na * nh).reshape(na, nh)
    rows, cols, wts = [], [], []

    # vertical edges: exact flat length dh
    a = idx[:, :-1].ravel()
    b = idx[:, 1:].ravel()
    dhs = np.abs(np.diff(tb.heights))
    rows.extend(a); cols.extend(b); wts.extend(np.tile(dhs, na))

    # cone distances to in-band zeros of omega (rows near each zero)
    cone = np.full((na, nh), np.inf)
    for w0, hz, _ups in tb.zeros_in_band:
        jrows = np.flatnonzero(np.abs(tb.heights - hz) <= 3.0 * cell)
        for j in jrows:
            fc = _flat_chords(f, tb.points[:, j], w0)
            near = fc <= 4.0 * cell
            cone[near, j] = np.minimum(cone[near, j], fc[near])

    # horizontal edges: an arc between adjacent rays exists (flat length
    # exactly dtheta) unless a singular-ray angle of an in-band zero above
    # the row falls in the angular interval; blocked edges route through the
    # cone point when one is nearby
    blocked = np.zeros((na, nh), dtype=bool)
    for _w0, hz, ups in tb.zeros_in_band:
        below = tb.heights < hz - 1e-12
        for up in ups:
            gap = (up - tb.thetas) % TWO_PI
            cols_hit = np.flatnonzero(gap < dtheta)
            for i in cols_hit:
                blocked[i, below] = True

    w_direct = np.where(blocked.ravel(), np.inf, dtheta)
    nbr = np.r_[1:na, 0]
    w_cone = (cone.ravel() + cone[nbr, :].ravel())
    wt = np.minimum(w_direct, w_cone)
    ok = np.isfinite(wt)
    a = idx.ravel()
    b = idx[nbr, :].ravel()
    rows.extend(a[ok]); cols.extend(b[ok]); wts.extend(wt[ok])

    n = na * nh
    rows = [int(x) for x in rows]
    cols = [int(x) for x in cols]
    wts = [float(x) for x in wts]
    m = coo_matrix((wts + wts, (rows + cols, cols + rows)), shape=(n, n))
    return m.tocsr()


def _pair_samples(na, nh, n_pairs, rng, n_sources=24):
    """Random pairs plus a structured sweep of the deepest grid row, where
    the level-set structure is most discriminating."""
    n = na * nh
    bottom = np.arange(0, na, max(1, na // 8)) * nh + (nh - 1)
    rand = rng.choice(n, size=min(n_sources, n), replace=False)
    sources = np.unique(np.concatenate([bottom, rand]))
    per = max(1, n_pairs // len(sources))
    src = np.repeat(sources, per)
    dst = rng.integers(0, n, size=len(src))
    # pair every bottom source with every bottom node as well
    bb_src = np.repeat(bottom, len(bottom))
    bb_dst = np.tile(bottom, len(bottom))
    src = np.concatenate([src, bb_src])
    dst = np.concatenate([dst, bb_dst])
    keep = src != dst
    return src[keep], dst[keep]


@dataclass(frozen=True, eq=False)
class ConjugacyReport:
    epsilon: float
    rotation_index: int
    coverage_defect: float
    distortion: float
    conjugacy_defect: float
    pairs: tuple           # ((node_a, node_b, dist_f, dist_g), ...) sample
    verdict: str


def eps_conjugacy(f, g, t, T=None, cfg=DEFAULT):
    """Epsilon-conjugacy estimate between truncated basins of f and g.

    Builds the canonical Boettcher-coordinate correspondence for each of the
    d-1 fixed-ray rotations and reports the smallest resulting epsilon.
    """
    if f.degree != g.degree:
        return ConjugacyReport(
            epsilon=float("inf"), rotation_index=0, coverage_defect=float("inf"),
            distortion=float("inf"), conjugacy_defect=float("inf"), pairs=(),
            verdict="different degrees",
        )
    d = f.degree
    tb_f = truncate(f, t, T, cfg)
    tb_g = truncate(g, t, T, cfg)
    na, nh = tb_f.points.shape

    graph_f = _grid_graph(tb_f)
    graph_g = _grid_graph(tb_g)

    rng = np.random.default_rng(cfg.seed)
    src, dst = _pair_samples(na, nh, cfg.pairs, rng)
    sources = np.unique(src)
    D_f = dijkstra(graph_f, indices=sources)
    src_pos = {s: i for i, s in enumerate(sources)}

    # conjugacy defect: the correspondence commutes with the dynamics up to
    # solver tolerance; verify on a subsample of mapped grid nodes
    defect = _dynamics_defect(tb_f, tb_g, cfg)

    probe_cache = {}

    best = None
    shift_unit = na // (d - 1) if d > 1 else 0
    for r in range(d - 1):
        shift = (r * shift_unit) % na

        def rot(node):
            i, j = divmod(node, nh)
            return ((i + shift) % na) * nh + j

        rot_src = np.array([rot(s) for s in sources])
        rot_dst = np.array([rot(x) for x in dst])
        # distances in g's graph between rotated nodes
        Dg_full = dijkstra(graph_g, indices=rot_src)
        dist_f = D_f[[src_pos[s] for s in src], dst]
        dist_g = Dg_full[[src_pos[s] for s in src], rot_dst]
        both = np.isfinite(dist_f) & np.isfinite(dist_g)
        if np.any(np.isfinite(dist_f) != np.isfinite(dist_g)):
            # one band is disconnected where the other is not
            distortion = float("inf")
        elif both.any():
            distortion = float(np.max(np.abs(dist_f[both] - dist_g[both])))
        else:
            distortion = float("inf")
        shift_angle = TWO_PI * r / (d - 1) if d > 1 else 0.0
        if r not in probe_cache:
            probe_cache[r] = _singular_probe_distortion(tb_f, tb_g, shift_angle, cfg)
        distortion = max(distortion, probe_cache[r])
        # coverage: the canonical grid pairing leaves no unmatched node
        coverage = 0.0
        eps = max(coverage, distortion, defect)
        if best is None or eps < best[0]:
            pair_sample = tuple(
                (int(a), int(b), float(df), float(dg))
                for a, b, df, dg in zip(src[both][:32], dst[both][:32],
                                        dist_f[both][:32], dist_g[both][:32])
            )
            best = (eps, r, coverage, distortion, pair_sample)

    eps, r, coverage, distortion, pair_sample = best
    verdict = "conjugate" if eps <= cfg.eps_accept else (
        "inconclusive" if eps < 10 * cfg.eps_accept else "distinct"
    )
    return ConjugacyReport(
        epsilon=eps, rotation_index=r, coverage_defect=coverage,
        distortion=distortion, conjugacy_defect=defect, pairs=pair_sample,
        verdict=verdict,
    )


PROBE_OFFSET = 5e-5    # angular half-width of singular-ray probe pairs


def _probe_distance(tb, theta_star, cfg):
    """Flat distance between the band-bottom points at theta_star +- offset.

    If a zero of omega blocks theta_star above the band bottom, the geodesic
    routes through the cone point; otherwise it is the leaf arc 2*offset.
    """
    eps_p = PROBE_OFFSET
    f = tb.f
    blocking = None
    for w0, hz, ups in tb.zeros_in_band:
        if hz <= tb.t + 1e-12:
            continue
        for up in ups:
            if abs((up - theta_star + math.pi) % TWO_PI - math.pi) <= 4.0 * eps_p:
                blocking = (w0, hz)
                break
        if blocking:
            break
    if blocking is None:
        return 2.0 * eps_p
    w0, hz = blocking
    total = 0.0
    for sgn in (-1.0, 1.0):
        try:
            walker = RayWalker(f, [theta_star + sgn * eps_p], cfg.ray, h_start=tb.t)
            rays._walk(walker, tb.t, cfg.ray)
            total += rays.flat_chord(f, complex(walker.z[0]), w0)
        except Exception:
            total += (hz - tb.t) + eps_p
    return total


def _singular_probe_distortion(tb_f, tb_g, shift_angle, cfg):
    """Distortion of probe pairs straddling each singular-ray angle of either
    basin (where the sup in the epsilon-conjugacy distortion is attained)."""
    angles_f = {up for _w, hz, ups in tb_f.zeros_in_band if hz > tb_f.t + 1e-12
                for up in ups}
    angles_g = {up for _w, hz, ups in tb_g.zeros_in_band if hz > tb_g.t + 1e-12
                for up in ups}
    thetas = set(angles_f) | {(a - shift_angle) % TWO_PI for a in angles_g}
    worst = 0.0
    for th in sorted(thetas):
        df = _probe_distance(tb_f, th % TWO_PI, cfg)
        dg = _probe_distance(tb_g, (th + shift_angle) % TWO_PI, cfg)
        worst = max(worst, abs(df - dg))
    return worst


def _dynamics_defect(tb_f, tb_g, cfg):
    """max over sampled grid nodes x of flat distance between the grid point
    at (d theta, d h) and the image f(x) (and likewise for g)."""
    out = 0.0
    for tb in (tb_f, tb_g):
        f = tb.f
        d = f.degree
        mapped_h = d * tb.heights
        ok_cols = np.flatnonzero(mapped_h <= tb.T + 1e-12)
        if len(ok_cols) == 0:
            continue
        j = int(ok_cols[0])
        sel = np.arange(0, len(tb.thetas), max(1, len(tb.thetas) // 16))
        zs = tb.points[sel, j]
        fz = np.array([complex(f(z)) for z in zs])
        target_theta = (d * tb.thetas[sel]) % TWO_PI
        w = RayWalker(f, target_theta, cfg.ray, h_start=float(mapped_h[j]))
        rays._walk(w, float(mapped_h[j]), cfg.ray)
        dist = [rays.flat_chord(f, a, b) for a, b in zip(fz, w.z)]
        out = max(out, float(np.max(dist)))
    return out


def gh_distance_estimate(f, g, t, cfg=DEFAULT):
    """Smallest epsilon for which g is in the U_{t,eps} neighborhood of f,
    estimated by the canonical correspondence over the band [t, 1/t]."""
    if not t <= 1.0:
        raise PreconditionError("gh_distance_estimate needs t <= 1 (band [t, 1/t])")
    a = eps_conjugacy(f, g, t, None, cfg)
    b = eps_conjugacy(g, f, t, None, cfg)
    return max(a.epsilon, b.epsilon)
