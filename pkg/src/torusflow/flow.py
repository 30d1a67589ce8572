"""Volume-preserving mean curvature flow and surface diffusion flow in graph form.

With V the outer normal velocity of dE_t and nu_E . nu_{E_u} = 1/Q,

    VPMCF:  u_t = -Q (H_u - Hbar_u),        Hbar_u = int H J / int J
    SDF:    u_t =  Q  Delta_{E_u} H_u

(sign chosen so that the perimeter is non-increasing).  Time stepping is
IMEX: the flat constant-coefficient operator A (= -Delta_E resp. Delta_E^2)
is implicit, the remainder explicit, followed by a scalar normal shift that
restores the enclosed volume.
"""

from dataclasses import asdict, dataclass, field
import logging

import numpy as np

from .errors import ConfigError, Divergence, NoConvergence, NumericalFailure, StepFailed
from .geometry import fiber_integral, geometry, laplace_beltrami
from .linear import Trajectory, biharmonic_semigroup, duhamel_trajectory, norm_XT
from .reference import Kind
from .spectral import integrate, spectral_for

log = logging.getLogger(__name__)


@dataclass
class FlowConfig:
    flow_kind: str = "VPMCF"
    dt: float = 1e-5
    t_end: float = 0.01
    imex_theta: float = 1.0
    volume_projection: bool = True
    adapt: bool = False
    safety: float = 2.0
    snapshot_every: int = 1
    seed: int = 0
    monotone_tol: float = 1e-12
    max_halvings: int = 20

    def __post_init__(self):
        if self.flow_kind not in ("VPMCF", "SDF"):
            raise ConfigError(f"flow_kind must be VPMCF or SDF, got {self.flow_kind!r}")
        if not self.dt > 0 or not self.t_end > 0:
            raise ConfigError("dt and t_end must be positive")
        if not 0.5 <= self.imex_theta <= 1.0:
            raise ConfigError("imex_theta must lie in [1/2, 1]")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")


@dataclass
class FlowState:
    t: float
    u: np.ndarray
    cache: object = field(repr=False)
    lam: float = 0.0


@dataclass
class StepReport:
    t: float
    dt_used: float
    iters: int
    residual: float
    perimeter_before: float
    perimeter_after: float
    volume_drift_before_projection: float
    volume_after: float
    halvings: int = 0

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# right-hand sides
# --------------------------------------------------------------------------

def rhs_vpmcf(ref, u, cache=None):
    c = geometry(ref, u) if cache is None else cache
    return -c.Q * (c.mean_curvature - c.mean_curvature_bar)


def rhs_sdf(ref, u, cache=None):
    c = geometry(ref, u) if cache is None else cache
    return c.Q * laplace_beltrami(ref, c.u, c.mean_curvature, cache=c)


def rhs(ref, u, flow_kind, cache=None):
    return rhs_vpmcf(ref, u, cache) if flow_kind == "VPMCF" else rhs_sdf(ref, u, cache)


def linear_symbol(ref, flow_kind):
    """Fourier symbol of the implicit operator A (>= 0)."""
    k2 = spectral_for(ref.grid).k2
    return k2 if flow_kind == "VPMCF" else k2 ** 2


def nonlinear_residual(ref, u, flow_kind="SDF"):
    """f[u] = full right-hand side minus its flat linear part (-A u)."""
    u = ref.check_field(u)
    sp = spectral_for(ref.grid)
    lin = sp.ifft(-linear_symbol(ref, flow_kind) * sp.fft(u))
    return rhs(ref, u, flow_kind) - lin


# --------------------------------------------------------------------------
# volume constraint
# --------------------------------------------------------------------------

def project_volume(ref, u, target=None, rtol=1e-14, max_iter=50):
    """Return (u + lam, lam) with |E_{u + lam}| = target (default |E|)."""
    u = ref.check_field(u)
    target = ref.volume if target is None else target
    kappa = ref.kappa

    def F(lam):
        return ref.volume + integrate(ref.grid, fiber_integral(ref, 0.0, u + lam)) - target

    def dF(lam):
        w = np.ones_like(u)
        for k in kappa:
            w = w * (1.0 + k * (u + lam))
        return integrate(ref.grid, w)

    lam = 0.0
    f = F(lam)
    scale = max(abs(target), 1e-300)
    for _ in range(max_iter):
        if abs(f) <= rtol * scale:
            return u + lam, lam
        d = dF(lam)
        if not d > 0:
            raise NoConvergence("volume projection left the graph regime")
        step = -f / d
        lam += step
        f = F(lam)
        if abs(step) <= 1e-17 * max(1.0, abs(lam)) and abs(f) <= 1e3 * rtol * scale:
            return u + lam, lam
    raise NoConvergence(f"volume projection did not converge (residual {f:.3e})")


# --------------------------------------------------------------------------
# integrators
# --------------------------------------------------------------------------

def initial_state(ref, u0, cfg):
    u0 = ref.check_field(u0).copy()
    lam = 0.0
    if cfg.volume_projection:
        u0, lam = project_volume(ref, u0)
    return FlowState(0.0, u0, geometry(ref, u0), lam)


def _imex_update(ref, state, cfg, dt):
    sp = spectral_for(ref.grid)
    A = linear_symbol(ref, cfg.flow_kind)
    th = cfg.imex_theta
    f = rhs(ref, state.u, cfg.flow_kind, state.cache)
    uh = sp.fft(state.u)
    return sp.ifft((uh + dt * (sp.fft(f) + th * A * uh)) / (1.0 + th * dt * A))


def step_imex(ref, state: FlowState, cfg: FlowConfig, dt=None):
    """One semi-implicit step (with dt halving on perimeter increase)."""
    dt = cfg.dt if dt is None else dt
    P0 = state.cache.perimeter_gap
    tol = cfg.monotone_tol * ref.perimeter
    for halvings in range(cfg.max_halvings + 1):
        try:
            u1 = _imex_update(ref, state, cfg, dt)
            drift = 0.0
            lam = 0.0
            iters = 1
            if cfg.volume_projection:
                vol = ref.volume + integrate(ref.grid, fiber_integral(ref, 0.0, u1))
                drift = (vol - ref.volume) / ref.volume
                u1, lam = project_volume(ref, u1)
            c1 = geometry(ref, u1)
        except NumericalFailure:
            if halvings == cfg.max_halvings:
                raise
            dt /= 2
            continue
        if c1.perimeter_gap - P0 <= tol:
            rep = StepReport(t=state.t + dt, dt_used=dt, iters=iters,
                             residual=abs(c1.volume - ref.volume) / ref.volume,
                             perimeter_before=ref.perimeter + P0, perimeter_after=c1.perimeter,
                             volume_drift_before_projection=drift, volume_after=c1.volume,
                             halvings=halvings)
            return FlowState(state.t + dt, u1, c1, lam), rep
        dt /= 2
    raise StepFailed(f"perimeter increased after {cfg.max_halvings} halvings at t={state.t:.6g}")


def run_flow(ref, u0, cfg: FlowConfig) -> Trajectory:
    """Integrate from u0 to cfg.t_end, snapshotting every cfg.snapshot_every steps."""
    state = initial_state(ref, u0, cfg)
    times, fields, reports = [0.0], [state.u.copy()], []
    nsteps = int(round(cfg.t_end / cfg.dt))
    dt_nom = cfg.t_end / nsteps
    dt = dt_nom
    step = 0
    while state.t < cfg.t_end * (1 - 1e-12):
        h = min(dt, cfg.t_end - state.t)
        try:
            state, rep = step_imex(ref, state, cfg, h)
        except NumericalFailure as exc:
            exc.args = (f"{exc.args[0] if exc.args else exc} (failure at t={state.t:.6g})",)
            raise
        reports.append(rep)
        step += 1
        if rep.halvings and cfg.adapt:
            dt = rep.dt_used
        elif cfg.adapt and dt < dt_nom:
            dt = min(dt_nom, dt * cfg.safety)
        if step % cfg.snapshot_every == 0 or state.t >= cfg.t_end * (1 - 1e-12):
            times.append(state.t)
            fields.append(state.u.copy())
    traj = Trajectory(ref.ref_id, np.array(times), np.array(fields), cfg.flow_kind, reports)
    return traj


@dataclass
class MildResult:
    trajectory: Trajectory
    ratios: list
    increments: list          # ||psi_{n+1} - psi_n||_{X_T}


def mild_solve(ref, u0, T, n_iter=6, beta=0.5, n_steps=100, stop_rtol=1e-13):
    """Fixed-point iteration u_n = S u0 + V f[u_{n-1}] for the surface diffusion flow."""
    if ref.kind not in (Kind.LAMELLA2D, Kind.LAMELLA3D):
        raise ConfigError("mild_solve requires a flat-base (lamella) reference")
    u0 = ref.check_field(u0)
    if float(np.max(np.abs(u0))) > 0.05 * ref.tubular_radius:
        raise ConfigError("initial datum too large for the fixed-point scheme")
    times = np.linspace(0.0, T, n_steps + 1)
    Su0 = np.array([biharmonic_semigroup(ref, u0, t) for t in times])
    psi_prev = np.zeros_like(Su0)
    incs, ratios = [], []
    u_cur = Su0
    bad = 0
    for _ in range(n_iter):
        f = [nonlinear_residual(ref, u, "SDF") for u in u_cur]
        psi = duhamel_trajectory(ref, f, times)
        diff = psi - psi_prev
        scale = max(float(np.max(np.abs(u_cur))), 1e-300)
        if float(np.max(np.abs(diff))) <= stop_rtol * scale:
            u_cur = Su0 + psi
            break
        inc = norm_XT(ref, Trajectory(ref.ref_id, times, diff, "LinearBiharmonic"), beta).value
        if incs:
            r = inc / incs[-1]
            ratios.append(r)
            bad = bad + 1 if r >= 1.0 else 0
            if bad >= 2:
                raise Divergence("fixed-point ratios >= 1 on two consecutive iterations")
        incs.append(inc)
        psi_prev = psi
        u_cur = Su0 + psi
    traj = Trajectory(ref.ref_id, times, u_cur, "SDF")
    return MildResult(traj, ratios, incs)
