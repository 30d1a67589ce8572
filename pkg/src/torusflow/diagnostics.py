"""Per-snapshot functionals, inequality quotients and decay-rate fits.

L2 norms over the moving boundary dE_t are taken on the fixed reference grid
with the area factor J of the graph as weight.  Quotients whose denominator
does not exceed ``QUOTIENT_FLOOR`` are recorded as absent (None).
"""

from dataclasses import asdict, dataclass
import logging
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BadSeries, InsufficientData, NumericalFailure
from .geometry import fiber_integral, fiber_poly, geometry, surface_gradient_sq
from .norms import sobolev_sq
from .recentering import find_translation, reparametrize
from .reference import Kind
from .spectral import integrate

log = logging.getLogger(__name__)

QUOTIENT_FLOOR = 1e-13
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _quot(num, den):
    if num is None or den is None or not den > QUOTIENT_FLOOR:
        return None
    return float(num / den)


@dataclass
class DiagnosticsRecord:
    t: float
    perimeter_gap: float
    volume_drift: float
    l2_curvature_gap: float
    grad_curvature: float
    alexandrov_quotient: Optional[float] = None
    asymmetry: Optional[float] = None
    isoperimetric_quotient: Optional[float] = None
    dissipation_residual: Optional[float] = None
    dissipation_functional: Optional[float] = None
    poincare_quotient: Optional[float] = None
    # supporting values
    dissipation_rate: float = 0.0
    hbar_moving: float = 0.0
    hbar_reference: Optional[float] = None
    sigma: Optional[list] = None
    projection_defect: Optional[float] = None
    asymmetry_shift: Optional[list] = None

    def to_dict(self):
        return asdict(self)


@dataclass
class RateFit:
    window: tuple
    rate: float
    prefactor: float
    r_squared: float
    n_samples: int = 0

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d


# --------------------------------------------------------------------------
# asymmetry and dissipation functional
# --------------------------------------------------------------------------

def symmetric_difference(ref, v):
    """|E triangle E_v| by the fibered formula."""
    return float(integrate(ref.grid, np.abs(fiber_integral(ref, 0.0, v))))


class Asymmetry(NamedTuple):
    alpha: float
    shift: np.ndarray
    excluded: int          # trial shifts dropped because reparametrization failed


def _translation_guess(ref, u):
    act = ref.active_axes()
    nus = ref.translation_fields()
    M = np.array([[integrate(ref.grid, nus[i] * nus[j]) for j in act] for i in act])
    b = np.array([integrate(ref.grid, u * nus[i]) for i in act])
    x = np.zeros(ref.ambient_dim)
    x[act] = -np.linalg.solve(M, b)
    return x


def fraenkel_asymmetry(ref, u, n_scan=64, xtol=1e-8, sweeps=2, half_width=None):
    """min over shifts x of |E triangle (E_u + x)|.

    Coordinate-wise: a uniform scan of ``n_scan`` shifts per active axis around
    the linear translation guess, then golden-section refinement.  Shifts along
    axes with vanishing translation field leave the value unchanged and are
    not searched.
    """
    u = ref.check_field(u)
    excluded = 0

    def value(x):
        nonlocal excluded
        try:
            return symmetric_difference(ref, reparametrize(ref, u, x))
        except NumericalFailure:
            excluded += 1
            return math.inf

    x = _translation_guess(ref, u)
    best = value(x)
    if best == 0.0:
        return Asymmetry(0.0, x, excluded)
    h = half_width if half_width is not None else max(2.0 * float(np.max(np.abs(u))), 1e-9)
    for _ in range(sweeps):
        for ax in ref.active_axes():
            def along(s, ax=ax):
                y = x.copy()
                y[ax] = s
                return value(y)
            grid = x[ax] + np.linspace(-h, h, n_scan + 1)
            vals = np.array([along(s) for s in grid])
            i = int(np.argmin(vals))
            if vals[i] < best:
                x[ax], best = grid[i], float(vals[i])
            i = int(np.argmin(np.abs(grid - x[ax])))
            if 0 < i < n_scan and vals[i] < vals[i - 1] and vals[i] < vals[i + 1]:
                res = minimize_scalar(along, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                      method="golden", options={"xtol": xtol})
                if res.fun < best:
                    x[ax], best = float(res.x), float(res.fun)
        h = max(4.0 * h / n_scan, 1e-12)
    if excluded:
        log.info("asymmetry search excluded %d shifts", excluded)
    return Asymmetry(best, x, excluded)


def _boundary_distance(ref, pts, tau):
    """Distance from ambient points to d(E - tau), closed form per catalogue entry."""
    kind = ref.kind
    N = ref.ambient_dim
    if kind in (Kind.LAMELLA2D, Kind.LAMELLA3D):
        w = ref.spec.slab_width
        y = pts[..., N - 1]
        out = np.full(y.shape, np.inf)
        for level in (0.5 - w / 2 - tau[N - 1], 0.5 + w / 2 - tau[N - 1]):
            d = np.mod(np.abs(y - level), 1.0)
            out = np.minimum(out, np.minimum(d, 1.0 - d))
        return out
    c = ref.center[:2] - np.asarray(tau)[:2]
    rel = pts[..., :2] - c
    rel = rel - np.round(rel)
    return np.abs(np.hypot(rel[..., 0], rel[..., 1]) - ref.spec.radius)


def dissipation_functional(ref, u, tau=None):
    """D(E_u, E - tau) = int over the symmetric difference of dist to d(E - tau)."""
    u = ref.check_field(u)
    N = ref.ambient_dim
    tau = np.zeros(N) if tau is None else np.asarray(tau, dtype=float)
    w = reparametrize(ref, np.zeros(ref.grid.shape), -tau) if np.any(tau) else np.zeros_like(u)
    lo, hi = np.minimum(u, w), np.maximum(u, w)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    poly = np.polynomial.polynomial
    cfs = fiber_poly(ref)
    acc = np.zeros_like(u)
    for xn, wn in zip(_GL_NODES, _GL_WEIGHTS):
        s = mid + half * xn
        pts = ref.points + s[..., None] * ref.normal
        acc += wn * _boundary_distance(ref, pts, tau) * poly.polyval(s, cfs)
    return float(integrate(ref.grid, acc * half))


# --------------------------------------------------------------------------
# snapshot records
# --------------------------------------------------------------------------

def dissipation_rate(ref, cache, flow_kind):
    """-dP/dt predicted by the smooth identities at this state."""
    c = cache
    if flow_kind == "VPMCF":
        dev = c.mean_curvature - c.mean_curvature_bar
        return float(integrate(ref.grid, dev * dev * c.area_factor))
    g2 = surface_gradient_sq(ref, c, c.mean_curvature)
    return float(integrate(ref.grid, g2 * c.area_factor))


def _state_parts(state):
    if hasattr(state, "u"):
        return float(state.t), state.u, getattr(state, "cache", None)
    t, u = state
    return float(t), np.asarray(u, dtype=float), None


def snapshot_diagnostics(ref, state, recentred=None, flow_kind="VPMCF", prev=None,
                         asymmetry=True, tau=None):
    """DiagnosticsRecord of one state.

    ``state`` is a FlowState or a ``(t, u)`` pair; ``recentred`` a
    RecenteredState for the same u (needed for the Alexandrov quotient);
    ``prev`` the record of the preceding snapshot (dissipation residual).
    """
    t, u, c = _state_parts(state)
    u = ref.check_field(u)
    c = geometry(ref, u) if c is None else c
    J = c.area_factor
    hbar = c.mean_curvature_bar
    dev = c.mean_curvature - hbar
    l2gap = math.sqrt(float(integrate(ref.grid, dev * dev * J)))
    g2 = surface_gradient_sq(ref, c, c.mean_curvature)
    grad = math.sqrt(max(float(integrate(ref.grid, g2 * J)), 0.0))
    rate = l2gap ** 2 if flow_kind == "VPMCF" else grad ** 2

    rec = DiagnosticsRecord(t=t, perimeter_gap=float(c.perimeter_gap),
                            volume_drift=float((c.volume - ref.volume) / ref.volume),
                            l2_curvature_gap=l2gap, grad_curvature=grad,
                            dissipation_rate=rate, hbar_moving=hbar)
    rec.poincare_quotient = _quot(l2gap, grad)

    if recentred is not None:
        v = recentred.v
        cv = geometry(ref, v)
        hb_ref = float(integrate(ref.grid, cv.mean_curvature) / ref.perimeter)
        dv = cv.mean_curvature - hb_ref
        den = math.sqrt(float(integrate(ref.grid, dv * dv)))
        rec.hbar_reference = hb_ref
        rec.alexandrov_quotient = _quot(math.sqrt(sobolev_sq(ref, v, 1)), den)
        rec.sigma = [float(s) for s in recentred.sigma]
        rec.projection_defect = float(recentred.projection_defect)
        if tau is None:
            tau = recentred.sigma

    if asymmetry:
        a = fraenkel_asymmetry(ref, u)
        rec.asymmetry = float(a.alpha)
        rec.asymmetry_shift = [float(s) for s in a.shift]
        rec.isoperimetric_quotient = _quot(a.alpha ** 2, rec.perimeter_gap)

    try:
        rec.dissipation_functional = dissipation_functional(ref, u, tau)
    except NumericalFailure as exc:
        log.info("dissipation functional skipped at t=%g: %s", t, exc)

    if prev is not None and t > prev.t:
        rec.dissipation_residual = float((rec.perimeter_gap - prev.perimeter_gap) / (t - prev.t)
                                         + prev.dissipation_rate)
    return rec


def trajectory_diagnostics(ref, traj, delta_star=0.1, recentre=True, asymmetry=True):
    """Records for every snapshot of a trajectory, in time order."""
    recs = []
    prev = None
    for t, u in zip(traj.times, traj.fields):
        rc = find_translation(ref, u, delta_star) if recentre else None
        if rc is not None and rc.projection_defect > delta_star:
            log.warning("projection defect %.3g exceeds delta* at t=%g", rc.projection_defect, t)
        rec = snapshot_diagnostics(ref, (t, u), rc, traj.flow_kind, prev, asymmetry)
        recs.append(rec)
        prev = rec
    return recs


def dissipation_residuals(ref, traj):
    """(t_n, (P_{n+1} - P_n) / dt + rate(t_n)) over consecutive snapshots."""
    caches = [geometry(ref, u) for u in traj.fields]
    gaps = np.array([c.perimeter_gap for c in caches])
    rates = np.array([dissipation_rate(ref, c, traj.flow_kind) for c in caches])
    dt = np.diff(traj.times)
    return traj.times[:-1], np.diff(gaps) / dt + rates[:-1]


# --------------------------------------------------------------------------
# trajectory-level checks
# --------------------------------------------------------------------------

def isoperimetric_check(records, gap_floor=1e-13, min_records=10):
    """max over records of asymmetry^2 / perimeter_gap."""
    vals = [r.asymmetry ** 2 / r.perimeter_gap for r in records
            if r.asymmetry is not None and r.perimeter_gap > gap_floor]
    if len(vals) < min_records:
        raise InsufficientData(f"{len(vals)} usable records, need {min_records}")
    return float(max(vals))


def _series_arrays(series, key):
    if isinstance(series, dict):
        return np.asarray(series["t"], dtype=float), np.asarray(series[key], dtype=float)
    t = [r["t"] if isinstance(r, dict) else r.t for r in series]
    v = [r[key] if isinstance(r, dict) else getattr(r, key) for r in series]
    v = [np.nan if x is None else x for x in v]
    return np.asarray(t, dtype=float), np.asarray(v, dtype=float)


def fit_rate(series, key, window, min_samples=10) -> RateFit:
    """Least-squares fit of log(value) = log C - c t over the window."""
    t, v = _series_arrays(series, key)
    t0, t1 = float(window[0]), float(window[1])
    if not t1 > t0:
        raise BadSeries("fit window must satisfy t1 > t0")
    sel = (t >= t0) & (t <= t1)
    ts, vs = t[sel], v[sel]
    if len(ts) < min_samples:
        raise InsufficientData(f"{len(ts)} samples in window, need {min_samples}")
    if not np.all(vs > 0):
        raise BadSeries(f"nonpositive values of {key!r} in fit window")
    y = np.log(vs)
    A = np.stack([np.ones_like(ts), ts], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (a + b * ts)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return RateFit((t0, t1), float(-b), float(np.exp(a)), float(min(max(r2, 0.0), 1.0)), int(len(ts)))


def linearized_constants(ref, kmax=16):
    """Mode-wise Alexandrov and Poincaré constants of the linearization at u = 0.

    Over non-constant, non-translation Fourier modes with wavenumber |xi| and
    Jacobi eigenvalue lam = |xi|^2 - |B|^2: sup sqrt(1 + |xi|^2) / lam and
    sup 1 / |xi|.
    """
    L = ref.grid.lengths
    B2 = ref.sff_norm_sq
    ranges = [range(-kmax, kmax + 1) for _ in L]
    alex, poin = 0.0, 0.0
    for ks in np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, len(L)):
        xi2 = sum((2 * np.pi * k / l) ** 2 for k, l in zip(ks, L))
        if xi2 == 0:
            continue
        if ref.kind in (Kind.DISC2D, Kind.CYLINDER3D) and abs(ks[0]) == 1 and all(k == 0 for k in ks[1:]):
            continue
        lam = xi2 - B2
        alex = max(alex, math.inf if lam <= 0 else math.sqrt(1 + xi2) / lam)
        poin = max(poin, 1.0 / math.sqrt(xi2))
    return {"alexandrov": alex, "poincare": poin}


def linear_rate(ref, flow_kind):
    """Decay rate of the perimeter gap predicted by the slowest stable mode: 2 lam (resp. 2 lam |xi|^2)."""
    L = ref.grid.lengths
    B2 = ref.sff_norm_sq
    best = math.inf
    kmax = 4
    for ks in np.stack(np.meshgrid(*[range(-kmax, kmax + 1) for _ in L], indexing="ij"), -1).reshape(-1, len(L)):
        xi2 = sum((2 * np.pi * k / l) ** 2 for k, l in zip(ks, L))
        lam = xi2 - B2
        if xi2 == 0 or lam <= 1e-12:
            continue
        best = min(best, 2 * lam * (1.0 if flow_kind == "VPMCF" else xi2))
    return best
