"""Geometry of normal graphs E_u = {x + u(x) nu_E(x)} over catalogue references.

With principal directions tau_a aligned to the parameter axes and factors
d_a = 1 + kappa_a u, the immersion Phi = X + u nu has

    d_a Phi   = d_a tau_a + u_a nu
    g_ab      = d_a^2 delta_ab + u_a u_b
    sqrt(g)   = Q prod_a d_a,            Q = (1 + sum_a (u_a / d_a)^2)^(1/2)
    nu_{E_u}  = (nu - sum_a (u_a / d_a) tau_a) / Q

and the mean curvature (positive for convex sections, outer normal) is
H = -g^{ab} (d_a d_b Phi . nu_{E_u}) with

    Q (d_a d_b Phi . nu_{E_u}) = u_ab - kappa_a d_a delta_ab
                                 - kappa_b u_a u_b / d_b - kappa_a u_a u_b / d_a.

All derivatives are spectral in reference arclength; quadrature is the
periodic trapezoid rule.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFactor, MetricDegenerate, TubularViolation
from .spectral import integrate, spectral_for


@dataclass
class HeightField:
    ref_id: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


@dataclass
class SurfaceField:
    ref_id: int
    values: np.ndarray


def as_values(ref, u):
    return ref.check_field(u)


def check_tubular(ref, u):
    umax = float(np.max(np.abs(u))) if u.size else 0.0
    if not np.isfinite(umax):
        raise TubularViolation("height field is not finite")
    if umax >= ref.tubular_radius:
        raise TubularViolation(
            f"max|u| = {umax:.6g} leaves the tubular neighbourhood (radius {ref.tubular_radius:.6g})")


def _factors(ref, u):
    d = []
    for k in ref.kappa:
        if k == 0.0:
            d.append(np.ones_like(u))
        else:
            da = 1.0 + k * u
            if np.any(da <= 0.0):
                raise DegenerateFactor("1 + kappa u <= 0 somewhere on the grid")
            d.append(da)
    return d


@dataclass
class GeometryCache:
    u: np.ndarray
    grad: list = field(repr=False)
    hess: list = field(repr=False)
    factors: list = field(repr=False)      # d_a = 1 + kappa_a u
    Q: np.ndarray = field(repr=False)
    tilt: np.ndarray = field(repr=False)   # nu_E . nu_{E_u} = 1/Q
    area_factor: np.ndarray = field(repr=False)
    metric: np.ndarray = field(repr=False)      # (d, d, *shape)
    metric_inv: np.ndarray = field(repr=False)
    normal_graph: np.ndarray = field(repr=False)  # (*shape, N)
    mean_curvature: np.ndarray = field(repr=False)
    perimeter: float = 0.0
    perimeter_gap: float = 0.0
    volume: float = 0.0

    @property
    def mean_curvature_bar(self):
        """Area-weighted mean of the curvature over dE_u."""
        return float(np.sum(self.mean_curvature * self.area_factor) / np.sum(self.area_factor))


def geometry(ref, u) -> GeometryCache:
    u = as_values(ref, u)
    check_tubular(ref, u)
    grid = ref.grid
    sp = spectral_for(grid)
    uh = sp.fft(u)
    grad = sp.gradient(u, uh)
    hess = sp.hessian(u, uh)
    d = _factors(ref, u)
    dims = grid.dims
    kappa = ref.kappa

    s2 = sum((grad[a] / d[a]) ** 2 for a in range(dims))
    Q = np.sqrt(1.0 + s2)
    prod_d = d[0] if dims == 1 else d[0] * d[1]
    J = Q * prod_d

    g = np.empty((dims, dims) + u.shape)
    for a in range(dims):
        for b in range(dims):
            g[a, b] = grad[a] * grad[b] + (d[a] ** 2 if a == b else 0.0)
    # Sherman-Morrison: g^{-1} = D^{-2} - w w^T / Q^2, w_a = u_a / d_a^2
    w = [grad[a] / d[a] ** 2 for a in range(dims)]
    ginv = np.empty_like(g)
    for a in range(dims):
        for b in range(dims):
            ginv[a, b] = (1.0 / d[a] ** 2 if a == b else 0.0) - w[a] * w[b] / Q ** 2

    H = np.zeros_like(u)
    for a in range(dims):
        for b in range(dims):
            h = hess[a][b] - kappa[b] * grad[a] * grad[b] / d[b] - kappa[a] * grad[a] * grad[b] / d[a]
            if a == b:
                h = h - kappa[a] * d[a]
            H -= ginv[a, b] * h
    H /= Q

    nvec = ref.normal.copy()
    for a in range(dims):
        nvec -= (grad[a] / d[a])[..., None] * ref.tangents[a]
    nvec /= Q[..., None]

    # P(E_u) - P(E) without cancellation: J - 1 = (Q - 1) prod d + (prod d - 1)
    x = [kappa[a] * u for a in range(dims)]
    prod_m1 = x[0] if dims == 1 else x[0] + x[1] + x[0] * x[1]
    jm1 = s2 / (Q + 1.0) * prod_d + prod_m1
    gap = integrate(grid, jm1)

    vol = ref.volume + integrate(grid, fiber_integral(ref, 0.0, u))
    return GeometryCache(u=u, grad=grad, hess=hess, factors=d, Q=Q, tilt=1.0 / Q,
                         area_factor=J, metric=g, metric_inv=ginv, normal_graph=nvec,
                         mean_curvature=H, perimeter=ref.perimeter + gap,
                         perimeter_gap=gap, volume=vol)


def fiber_poly(ref):
    """Coefficients c_j with prod_a (1 + kappa_a s) = sum_j c_j s^j."""
    c = np.array([1.0])
    for k in ref.kappa:
        c = np.convolve(c, [1.0, k])
    return c


def fiber_integral(ref, lo, hi, power=0):
    """int_lo^hi s^power prod_a (1 + kappa_a s) ds, nodewise."""
    out = 0.0
    for j, c in enumerate(fiber_poly(ref)):
        if c == 0.0:
            continue
        e = j + power + 1
        out = out + c * (np.power(hi, e) - np.power(lo, e)) / e
    return out


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def immersion(ref, u):
    """Phi(x) = x + u(x) nu_E(x), reduced modulo 1 per coordinate."""
    u = as_values(ref, u)
    check_tubular(ref, u)
    return np.mod(ref.points + u[..., None] * ref.normal, 1.0)


def normal_field(ref, u):
    """(nu_{E_u} pulled back to dE, tilt nu_E . nu_{E_u})."""
    c = geometry(ref, u)
    return c.normal_graph, c.tilt


def area_factor(ref, u):
    return geometry(ref, u).area_factor


def perimeter(ref, u) -> float:
    return geometry(ref, u).perimeter


def perimeter_gap(ref, u) -> float:
    return geometry(ref, u).perimeter_gap


def enclosed_volume(ref, u) -> float:
    u = as_values(ref, u)
    check_tubular(ref, u)
    _factors(ref, u)
    return ref.volume + integrate(ref.grid, fiber_integral(ref, 0.0, u))


def mean_curvature(ref, u):
    return geometry(ref, u).mean_curvature


def laplace_beltrami(ref, u, phi, cache=None):
    """Delta_{E_u} phi = (1/sqrt g) d_a (sqrt g g^{ab} d_b phi) in divergence form."""
    c = geometry(ref, u) if cache is None else cache
    phi = as_values(ref, phi)
    sp = spectral_for(ref.grid)
    dims = ref.grid.dims
    det = np.linalg.det(np.moveaxis(c.metric, (0, 1), (-2, -1))) if dims > 1 else c.metric[0, 0]
    if np.any(det <= 0.0):
        raise MetricDegenerate("induced metric is not positive definite")
    gphi = sp.gradient(phi)
    out = np.zeros_like(phi)
    for a in range(dims):
        flux = sum(c.metric_inv[a, b] * gphi[b] for b in range(dims))
        o = [0] * dims
        o[a] = 1
        out += sp.deriv(c.area_factor * flux, o)
    return out / c.area_factor


def surface_gradient_sq(ref, cache, phi):
    """|grad_{E_u} phi|^2 = g^{ab} phi_a phi_b."""
    sp = spectral_for(ref.grid)
    gphi = sp.gradient(phi)
    dims = ref.grid.dims
    return sum(cache.metric_inv[a, b] * gphi[a] * gphi[b] for a in range(dims) for b in range(dims))


def first_variation_density(ref, cache):
    """Density of dP(E_u)[phi] = int H_{E_u} phi prod_a d_a over dE."""
    return cache.mean_curvature * cache.area_factor * cache.tilt
