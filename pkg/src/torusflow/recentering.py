"""Translation fitting and reparametrization of translated normal graphs.

``reparametrize`` realizes E_u + sigma = E_v through the closed-form
nearest-point projection onto dE (drop the normal coordinate on lamellae,
radial normalization on disc/cylinder).  The resampling onto the uniform grid
inverts the projected parameter map with Newton steps on the trigonometric
interpolant of u.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import FoldOver, NoConvergence, TubularViolation
from .reference import Kind
from .spectral import integrate, spectral_for


def barycenter_projection(ref, u):
    """The N-vector int_{dE} u nu_E."""
    u = ref.check_field(u)
    return np.array([integrate(ref.grid, u * ref.normal[..., i]) for i in range(ref.ambient_dim)])


def _radial_resample(row, r, shift, tol=1e-14, max_iter=60):
    """Heights over the uniform angle grid of the curve theta -> (r + u(theta)) e(theta) + shift."""
    n = row.shape[0]
    rc = np.fft.rfft(row) / n
    targets = 2 * np.pi * np.arange(n) / n

    def curve(th):
        uu, du = _kernels.real_trig_eval(rc, th)
        cs, sn = np.cos(th), np.sin(th)
        px = (r + uu) * cs + shift[0]
        py = (r + uu) * sn + shift[1]
        dx = du * cs - (r + uu) * sn
        dy = du * sn + (r + uu) * cs
        return px, py, dx, dy

    # fold-over check on the forward map at the grid nodes
    px, py, dx, dy = curve(targets)
    dang = (px * dy - py * dx) / (px * px + py * py)
    if np.any(dang <= 0.0):
        raise FoldOver("projected parameter map is not monotone")

    th = targets - np.arctan2(py, px) + targets  # first-order inverse
    for _ in range(max_iter):
        px, py, dx, dy = curve(th)
        ang = np.arctan2(py, px)
        err = np.angle(np.exp(1j * (ang - targets)))
        dang = (px * dy - py * dx) / (px * px + py * py)
        if np.any(dang <= 0.0):
            raise FoldOver("projected parameter map is not monotone")
        th = th - err / dang
        if np.max(np.abs(err)) < tol:
            break
    else:
        raise NoConvergence("radial resampling did not converge")
    px, py, _, _ = curve(th)
    return np.hypot(px, py) - r


def reparametrize(ref, u, sigma):
    """Height v over dE with E_u + sigma = E_v."""
    u = ref.check_field(u)
    sigma = np.asarray(sigma, dtype=float)
    if not np.any(sigma):
        return u.copy()
    # shifts along axes with vanishing translation field only relabel the parameter
    normal_part = np.linalg.norm(sigma[ref.active_axes()])
    if normal_part + float(np.max(np.abs(u))) >= ref.tubular_radius:
        raise TubularViolation("|sigma| + max|u| too large to reparametrize")
    kind = ref.kind
    sp = spectral_for(ref.grid)
    N = ref.ambient_dim
    if kind in (Kind.LAMELLA2D, Kind.LAMELLA3D):
        v = sp.resample_shift(u, tuple(sigma[:N - 1]))
        sgn = ref.normal[..., N - 1]
        v = v + sgn * sigma[N - 1]
    elif kind is Kind.DISC2D:
        v = _radial_resample(u[0], ref.spec.radius, sigma)[None, :]
    else:
        r = ref.spec.radius
        shifted = sp.resample_shift(u, (0.0, sigma[2]))
        rows = [_radial_resample(shifted[0, :, m], r, sigma[:2]) for m in range(ref.grid.n[1])]
        v = np.stack(rows, axis=-1)[None]
    if float(np.max(np.abs(v))) >= ref.tubular_radius:
        raise TubularViolation("reparametrized graph leaves the tubular neighbourhood")
    return v


@dataclass
class RecenteredState:
    sigma: np.ndarray
    v: np.ndarray
    projection_defect: float
    sigma_constant: float        # |sigma| / ||u||_{L2}
    newton_iters: int


def _l2(ref, f):
    return float(np.sqrt(integrate(ref.grid, f * f)))


def find_translation(ref, u, delta_star=0.1, tol=1e-15, max_iter=50):
    """Newton search for sigma making int v nu_E vanish on the active axes."""
    u = ref.check_field(u)
    N = ref.ambient_dim
    act = ref.active_axes()
    nus = ref.translation_fields()
    M = np.array([[integrate(ref.grid, nus[i] * nus[j]) for j in act] for i in act])

    def F(sig_act):
        sig = np.zeros(N)
        sig[act] = sig_act
        v = reparametrize(ref, u, sig)
        return barycenter_projection(ref, v)[act], v

    s = -np.linalg.solve(M, barycenter_projection(ref, u)[act])
    scale = max(_l2(ref, u), 1e-300) * np.sqrt(ref.perimeter)
    f, v = F(s)
    it = 0
    while np.max(np.abs(f)) > tol * max(scale, 1e-14) and np.max(np.abs(f)) > 1e-18:
        if it >= max_iter:
            raise NoConvergence("translation search did not converge")
        h = 1e-7 * max(1e-3, np.max(np.abs(s)))
        Jac = np.empty((len(act), len(act)))
        for j in range(len(act)):
            e = np.zeros(len(act))
            e[j] = h
            Jac[:, j] = (F(s + e)[0] - F(s - e)[0]) / (2 * h)
        step = np.linalg.solve(Jac, -f)
        s = s + step
        f, v = F(s)
        it += 1
        if np.max(np.abs(step)) < 1e-16:
            break
    sigma = np.zeros(N)
    sigma[act] = s
    vn = _l2(ref, v)
    defect = float(np.linalg.norm(barycenter_projection(ref, v)) / vn) if vn > 0 else 0.0
    un = _l2(ref, u)
    const = float(np.linalg.norm(sigma) / un) if un > 0 else 0.0
    return RecenteredState(sigma, v, defect, const, it)


@dataclass
class TranslationTrack:
    times: np.ndarray
    sigmas: np.ndarray
    defects: np.ndarray
    cauchy: np.ndarray            # sup_{s > t} |sigma_s - sigma_t|
    distance_to_end: np.ndarray   # |sigma_t - sigma_end|
    fit: object = None            # RateFit of the Cauchy modulus, when fittable


def track_translations(ref, traj, delta_star=0.1, window=None):
    from .diagnostics import fit_rate

    states = [find_translation(ref, u, delta_star) for u in traj.fields]
    sig = np.array([s.sigma for s in states])
    defects = np.array([s.projection_defect for s in states])
    nt = len(sig)
    cauchy = np.array([max((np.linalg.norm(sig[j] - sig[i]) for j in range(i + 1, nt)), default=0.0)
                       for i in range(nt)])
    dist = np.linalg.norm(sig - sig[-1], axis=1)
    fit = None
    t = traj.times
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1]) & (cauchy > 0)
        if sel.sum() >= 10:
            fit = fit_rate({"t": t[sel], "cauchy": cauchy[sel]}, "cauchy", (window[0], window[1]))
    return TranslationTrack(t, sig, defects, cauchy, dist, fit)
