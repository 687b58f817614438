"""Local model surfaces and pointed local model maps.

A local model surface is stored in two equivalent forms: as an embedded
1-form  i * sum r_j/(z - q_j) dz  on a finitely punctured plane (poles and
residues, residues summing to 1) and as a slit rectangle (slit angles plus
the gluing permutation).  A pointed local model map of degree k over a base
is represented by its monic centered polynomial of degree k, normalized so
both marked points lie on vertical leaves of external angle 0.

Extraction at height t restricts f to the band components around {G = t};
since the pointed normalization forces the model plane coordinates to be
exp(-i * lambda * integral of omega), every unbranched extracted model is
exactly z^k.  Branched models (critical points at height exactly t) carry
their critical values on the central leaf of the base; degree 2 is the
closed form z^2 + v, and higher degrees are rebuilt by critical-value
continuation from the coalesced model z^k + v0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import continuation, levels, rays
from .errors import (
    InconsistentDegrees,
    LiftFailure,
    NonGenericHeight,
    PreconditionError,
)
from .escape import green, max_escape_rate
from .levels import LevelConfig, level_components, level_index, winding_number
from .poly import MarkedPolynomial, from_critical_data

__all__ = [
    "LocalModelConfig",
    "LocalModelSurface",
    "PointedLocalModelMap",
    "extract_local_models",
    "local_model_to_polynomial",
    "sample_LMkk1",
    "annulus_base",
    "root_of_unity_gap",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LocalModelConfig:
    height_tol: float = 1e-9          # critical points within this of t sit on the central leaf
    band_fraction: float = 0.1        # half-width of the band, as a fraction of t (capped)
    levels: LevelConfig = field(default_factory=LevelConfig)


DEFAULT = LocalModelConfig()


@dataclass(frozen=True)
class LocalModelSurface:
    """Embedded-1-form plus slit-rectangle data for one local model surface.

    heights are intrinsic: the surface height function is log|phi| for
    phi(z) = z * prod_j (1 - q_j/z)^{r_j}.  slit_permutation[i] gives the slit
    whose right side is glued to the left side of slit i (cyclic around each
    zero of the form); it is empty when the central leaf is regular.
    """

    height_band: tuple                # (a, c_central, b)
    poles: tuple
    residues: tuple
    slit_angles: tuple = ()
    slit_permutation: tuple = ()
    central_leaf_singular: bool = False

    def __post_init__(self):
        r = np.asarray(self.residues, dtype=float)
        if abs(float(np.sum(r)) - 1.0) > 1e-10:
            raise PreconditionError(f"residues must sum to 1, got {np.sum(r)}")
        if np.any(r <= 0):
            raise PreconditionError("residues must be positive")
        a, c, b = self.height_band
        if not a < c < b:
            raise PreconditionError("height band must satisfy a < c_central < b")
        if len(self.slit_permutation) != len(self.slit_angles):
            raise PreconditionError("slit permutation size mismatch")
        if self.slit_angles and sorted(self.slit_permutation) != list(range(len(self.slit_angles))):
            raise PreconditionError("slit_permutation is not a permutation")

    @property
    def is_annulus(self):
        return len(self.poles) == 1 and not self.slit_angles

    @property
    def central_radius(self):
        return math.exp(self.height_band[1])


def annulus_base(a, c_central, b):
    """The round-annulus local model surface with central circle at height c_central."""
    return LocalModelSurface(
        height_band=(a, c_central, b), poles=(0.0 + 0.0j,), residues=(1.0,)
    )


def _identity_representative(const=0.0 + 0.0j):
    # degree-1 cover; MarkedPolynomial built directly (no critical points)
    return MarkedPolynomial(degree=1, critical_points=(), origin_image=complex(const),
                            coefficients=(complex(const), 1.0 + 0.0j))


@dataclass(frozen=True, eq=False)
class PointedLocalModelMap:
    degree: int
    representative: MarkedPolynomial
    base: LocalModelSurface
    critical_value_angles: tuple
    domain: LocalModelSurface
    marked_angle: float = 0.0
    # extraction bookkeeping (None on sampled models)
    basin_anchor_angle: float = None   # basin external angle of the marked ray
    basin_scale: float = None          # lambda = d^l/deg: omega_base = lambda * omega_f
    basin_component_point: complex = None


def local_model_to_polynomial(lm):
    """The degree-k monic centered representative of a pointed local model."""
    return lm.representative


def root_of_unity_gap(p, q):
    """min over k-th roots of unity zeta of the coefficient distance between
    p(zeta z) (renormalized monic) and q."""
    k = p.degree
    cp = np.asarray(p.coefficients)
    cq = np.asarray(q.coefficients)
    if q.degree != k:
        return float("inf")
    best = float("inf")
    for j in range(k):
        zeta = np.exp(2j * np.pi * j / k)
        # precomposition: coefficients c_i -> c_i zeta^i, then renormalize monic
        pre = cp * zeta ** np.arange(len(cp))
        pre = pre / pre[-1]
        best = min(best, float(np.max(np.abs(pre - cq))))
    return best


# ---------------------------------------------------------------------------
# domain-surface geometry from a representative polynomial over an annulus base


def _eta(p, k, z):
    """The domain 1-form coefficient (i/k) p'(z)/p(z)."""
    dp = np.polynomial.polynomial.polyval(z, np.asarray(p.coefficients)[1:] * np.arange(1, p.degree + 1))
    pv = np.polynomial.polynomial.polyval(z, np.asarray(p.coefficients))
    return 1j / k * dp / pv


def _adaptive_ds(p, z, ds):
    crit = p.critical_points
    if not crit:
        return ds
    dist = min(abs(z - c) for c in crit)
    e = abs(complex(_eta(p, p.degree, z)))
    if e == 0:
        raise LiftFailure("march hit a zero of the domain form")
    # keep the Euclidean move below a third of the distance to the nearest zero
    return min(ds, 0.3 * dist * e)


def _march_up(p, k, z, h_to, ds=0.02):
    """March upward along the vertical leaf of the domain form to height h_to."""
    h = math.log(abs(complex(p(z)))) / k
    guard = 0
    while h < h_to:
        step = min(_adaptive_ds(p, z, ds), h_to - h)
        e = _eta(p, k, z)
        zm = z + 0.5j * step / e
        em = _eta(p, k, zm)
        z = z + 1j * step / em
        h = math.log(abs(complex(p(z)))) / k
        guard += 1
        if guard > 200000:
            raise LiftFailure("vertical march did not terminate")
    return z


def _march_along_leaf(p, k, z, target, max_arc=4.0 * math.pi, ds=0.01):
    """March ccw (increasing angle) along the horizontal leaf through z until
    the target point is reached; returns the swept angle (flat arc)."""
    arc = 0.0
    guard = 0
    while arc < max_arc:
        step = _adaptive_ds(p, z, ds)
        e = _eta(p, k, z)
        zm = z - 0.5 * step / e
        em = _eta(p, k, zm)
        z = z - step / em
        arc += step
        dist = abs(z - target)
        if dist < 2.0 * step * abs(1.0 / em):
            # refine: remaining ccw arc solves target - z = -darc/eta
            arc += (-(target - z) * em).real
            return arc % TWO_PI
        guard += 1
        if guard > 500000:
            break
    raise LiftFailure("leaf march did not reach the target point")


def _domain_surface(p, base):
    """Domain LocalModelSurface of the model represented by p over an annulus base."""
    k = p.degree
    a, c, b = base.height_band
    band = (a / k, c / k, b / k)
    coeffs = np.asarray(p.coefficients)
    roots = np.roots(coeffs[::-1]) if k > 1 else np.array([-p.origin_image])
    # cluster multiple roots
    poles, mults = [], []
    for r in roots:
        for i, q in enumerate(poles):
            if abs(r - q) < 1e-7 * (1.0 + abs(r)):
                mults[i] += 1
                poles[i] = (poles[i] * (mults[i] - 1) + r) / mults[i]
                break
        else:
            poles.append(complex(r))
            mults.append(1)
    residues = tuple(m / k for m in mults)

    slit_angles = []
    slit_perm = []
    singular = False
    if k > 1:
        crit = np.asarray(p.critical_points)
        rho_c = math.exp(c)
        on_leaf = [cc for cc in crit if abs(abs(complex(p(cc))) - rho_c) < 1e-6 * rho_c]
        # marked point: the angle-0 preimage of the base point on the leaf where
        # the slit marches terminate
        x_ref = math.exp(c + 0.5 * (b - c))
        y0 = _poly_root_near(p, x_ref, x_ref ** (1.0 / k))
        groups = _cluster(on_leaf)
        for cc, mult in groups:
            nu = mult  # order of the zero of eta = local degree - 1
            # eta ~ A (z - cc)^nu
            dd = 1e-4 * (1.0 + abs(cc))
            A = complex(_eta(p, k, cc + dd)) / dd ** nu
            base_idx = len(slit_angles)
            psis = [(-0.5 * math.pi - np.angle(A) + TWO_PI * j) / (nu + 1.0) for j in range(nu + 1)]
            flat_off = 1e-3
            dpsi = 0.1 * math.pi / (nu + 1.0)   # probe slightly ccw off the separatrix
            rho = ((nu + 1.0) * flat_off / abs(A)) ** (1.0 / (nu + 1.0))
            for psi in psis:
                probe = cc + rho * np.exp(1j * (psi + dpsi))
                top = _march_up(p, k, complex(probe), (c + 0.5 * (b - c)) / k)
                ang = _march_along_leaf(p, k, complex(y0), complex(top))
                slit_angles.append(float(ang))
            n_new = nu + 1
            for j in range(n_new):
                slit_perm.append(base_idx + (j + 1) % n_new)
            singular = True
    return LocalModelSurface(
        height_band=band,
        poles=tuple(poles),
        residues=residues,
        slit_angles=tuple(slit_angles),
        slit_permutation=tuple(slit_perm),
        central_leaf_singular=singular,
    )


def _cluster(points, tol=1e-7):
    out = []
    for z in points:
        for i, (q, m) in enumerate(out):
            if abs(z - q) < tol * (1.0 + abs(z)):
                out[i] = ((q * m + z) / (m + 1), m + 1)
                break
        else:
            out.append((complex(z), 1))
    return out


def _poly_root_near(p, value, seed):
    """Solve p(z) = value by Newton from seed."""
    z = complex(seed)
    for _ in range(60):
        pv = complex(p(z)) - value
        dv = complex(p.deriv(z)) if p.degree > 1 else 1.0 + 0.0j
        if dv == 0:
            break
        step = pv / dv
        z -= step
        if abs(step) < 1e-14 * (1.0 + abs(z)):
            break
    return z


# ---------------------------------------------------------------------------
# sampling LM_k^{k-1}


def sample_LMkk1(base, k, critical_value_angles, cfg=DEFAULT):
    """A degree-k pointed local model over base with all k-1 critical values
    at the prescribed angles on the central leaf, built by critical-value
    continuation from the coalesced model z^k + v0."""
    if not base.is_annulus:
        raise PreconditionError(
            "sampling is implemented over annulus bases (the extraction bases)"
        )
    angles = [float(a) % TWO_PI for a in critical_value_angles]
    if len(angles) != k - 1:
        raise PreconditionError(f"need exactly {k - 1} critical value angles")
    rho_c = base.central_radius

    if k == 1:
        return PointedLocalModelMap(
            degree=1,
            representative=_identity_representative(),
            base=base,
            critical_value_angles=(),
            domain=base,
        )

    alpha0 = angles[0]
    v0 = rho_c * np.exp(1j * alpha0)
    p0 = from_critical_data([0.0] * (k - 1), v0)

    if all(abs(_wrap(a - alpha0)) < 1e-13 for a in angles):
        rep = p0
    else:
        targets = np.array(angles)
        deltas = np.array([_wrap(a - alpha0) for a in angles])

        def vpath(s):
            return rho_c * np.exp(1j * (alpha0 + s * deltas))

        path = continuation.lift_critical_value_path(p0, vpath)
        final_res = path.steps[-1][2]
        if path.status == "stalled" or final_res > 1e-7:
            raise LiftFailure(
                f"LM sampling stalled (status {path.status})", residual=final_res
            )
        rep = path.final
    return PointedLocalModelMap(
        degree=k,
        representative=rep,
        base=base,
        critical_value_angles=tuple(angles),
        domain=_domain_surface(rep, base),
    )


def _wrap(a):
    return (a + math.pi) % TWO_PI - math.pi


# ---------------------------------------------------------------------------
# extraction


def _band_around(f, t, cfg):
    """Largest symmetric band (a, b) around t avoiding singular heights
    other than t itself, capped at half-width band_fraction * t."""
    m = cfg.band_fraction * t
    for h in rays.zero_heights(f, t * 0.5, t * 2.0, cfg.levels.ray.escape):
        gap = abs(h - t)
        if gap <= cfg.height_tol:
            continue  # central-leaf zeros are allowed
        m = min(m, 0.45 * gap)
    if m <= 10 * cfg.height_tol:
        raise NonGenericHeight(f"no usable band around t = {t}")
    return t - m, t + m


def _leaf_psi_of_point(f, comp, z, cfg):
    """Lifted top-parameter of a point z lying on the traced component."""
    l = comp.level_index
    w, _ = rays._iter_n(f, np.array([complex(z)]), l)
    psi_mod = rays.external_angle(f, complex(w[0]), cfg.levels.ray) % TWO_PI
    j = int(np.argmin(np.abs(comp.points - z)))
    lift = comp.top_params[j]
    # choose the lift of psi_mod nearest the vertex's parameter
    kwrap = round((lift - psi_mod) / TWO_PI)
    return psi_mod + TWO_PI * kwrap


def _on_component(comp, z):
    return float(np.min(np.abs(comp.points - z))) < 0.05 * (1.0 + abs(z))


def extract_local_models(f, t, cfg=DEFAULT):
    """The pointed local model maps of f at height t, one per component of {G = t}.

    Critical points of f at height exactly t (within cfg.height_tol) are
    allowed: they produce branched models with critical values on the central
    leaves.  Any other zero of omega near the band makes t non-generic.
    """
    if not t > 0:
        raise NonGenericHeight("t must be positive")
    d = f.degree
    a, b = _band_around(f, t, cfg)
    h_mid = 0.5 * (t + b)
    lcfg = cfg.levels

    upper = level_components(f, h_mid, lcfg)
    image = level_components(f, d * h_mid, lcfg)
    central_img = level_components(f, d * t, lcfg)

    # map each upper leaf to its image component and local degree
    crit_at_t = [c for c in f.critical_points
                 if abs(green(f, c, lcfg.ray.escape).green - t) <= cfg.height_tol]

    out = []
    per_image_degree = {}
    for U in upper:
        w = complex(f(U.points[0]))
        img_idx = min(range(len(image)), key=lambda i: np.min(np.abs(image[i].points - w)))
        C = image[img_idx]
        if U.level_index == 0:
            k = d
        else:
            if U.map_degree % C.map_degree != 0:
                raise InconsistentDegrees(
                    f"leaf degrees {U.map_degree}/{C.map_degree} are incompatible"
                )
            k = U.map_degree // C.map_degree
        per_image_degree[img_idx] = per_image_degree.get(img_idx, 0) + k

        # central leaf of the base: the image component at height d*t
        w_c = complex(f(_descend_point(f, U, t + 0.25 * (b - t), t, cfg)))
        cen_idx = min(range(len(central_img)), key=lambda i: np.min(np.abs(central_img[i].points - w_c)))
        cen = central_img[cen_idx]
        lam = TWO_PI / cen.flat_length
        base = annulus_base(lam * d * a, lam * d * t, lam * d * b)

        # marked ray: smallest basin angle among the psi = 0 (mod 2pi) vertices
        anchor_theta, anchor_psi = _anchor_on(f, cen, cfg)

        # critical values on the central leaf belonging to this model
        my_crit = [c for c in crit_at_t if winding_number(U.points, c) != 0]
        angles = []
        for c in my_crit:
            v = complex(f(c))
            psi_v = _leaf_psi_of_point(f, cen, v, cfg)
            alpha = (lam * (psi_v - anchor_psi) / d ** cen.level_index) % TWO_PI
            angles.extend([alpha] * _crit_multiplicity(f, c))
        angles.sort()
        if len(angles) > k - 1:
            raise InconsistentDegrees(
                f"component carries {len(angles)} critical values but degree {k}"
            )

        rep = _representative(f, base, k, angles, cfg)
        out.append(
            PointedLocalModelMap(
                degree=k,
                representative=rep,
                base=base,
                critical_value_angles=tuple(angles),
                domain=_domain_surface(rep, base) if k > 1 else base,
                basin_anchor_angle=anchor_theta,
                basin_scale=lam,
                basin_component_point=complex(_descend_point(f, U, h_mid, t, cfg))
                if not my_crit else complex(U.points[0]),
            )
        )

    for img_idx, total in per_image_degree.items():
        if total != d:
            raise InconsistentDegrees(
                f"degrees over image component {img_idx} sum to {total}, expected {d}"
            )
    return out


def _crit_multiplicity(f, c):
    m = 0
    for ci in f.critical_points:
        if abs(ci - c) < 1e-9 * (1.0 + abs(c)):
            m += 1
    return m


def _descend_point(f, U, h_from, h_to, cfg):
    """A point of the component U moved down to height h_to along its ray."""
    z = complex(U.points[0])
    try:
        theta = rays.external_angle(f, z, cfg.levels.ray)
        w = rays.RayWalker(f, [theta], cfg.levels.ray, h_start=green(f, z).green)
        rays._walk(w, h_to, cfg.levels.ray)
        return complex(w.z[0])
    except Exception:
        return z


def _anchor_on(f, cen, cfg):
    """(basin angle, lifted psi) of the marked ray for a central-leaf component:
    the smallest basin angle among the vertices over top parameter 0 (mod 2 pi).

    Vertices whose angle cannot be certified (they sit on or next to singular
    leaves) are skipped; the choice is deterministic in the leaf geometry, so
    extraction from any polynomial with the same basin above t agrees.
    """
    if cen.level_index == 0:
        return 0.0, 0.0
    for offset in (0.0, math.pi, 0.5 * math.pi):
        idxs = [j for j, ps in enumerate(cen.top_params[:-1])
                if abs((ps - offset) % TWO_PI) < 1e-9
                or abs((ps - offset) % TWO_PI - TWO_PI) < 1e-9]
        best = None
        for j in idxs:
            try:
                th = rays.external_angle(f, complex(cen.points[j]), cfg.levels.ray) % TWO_PI
            except Exception:
                continue
            if best is None or th < best[0]:
                best = (th, float(cen.top_params[j]))
        if best is not None:
            return best
    return 0.0, 0.0


def _representative(f, base, k, angles, cfg):
    if k == 1:
        return _identity_representative()
    if not angles:
        # unbranched cover of the punctured plane: z^k exactly
        return from_critical_data([0.0] * (k - 1), 0.0)
    if k == 2:
        v = base.central_radius * np.exp(1j * angles[0])
        return from_critical_data([0.0], complex(v))
    lm = sample_LMkk1(base, k, angles, cfg)
    return lm.representative
