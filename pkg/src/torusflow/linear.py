"""Linear parabolic solution operators on the flat parameter tori.

At u = 0 every catalogue reference carries the flat metric in arclength
coordinates, so the heat semigroup, the biharmonic semigroup S and the
Duhamel operator V are Fourier multipliers.  The biharmonic heat kernel is
never materialized.

Also here: the time-weighted parabolic Hölder norms X_T / Y_T of a sampled
trajectory and the empirical Schauder constants of S.
"""

from dataclasses import dataclass, field
import json

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .errors import InsufficientData
from .norms import ck_norm, holder_seminorm
from .spectral import spectral_for

FLOW_KINDS = ("VPMCF", "SDF", "LinearHeat", "LinearBiharmonic")


@dataclass
class Trajectory:
    ref_id: int
    times: np.ndarray
    fields: np.ndarray          # (nt, *grid.shape)
    flow_kind: str
    reports: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.fields = np.asarray(self.fields, dtype=float)
        if self.flow_kind not in FLOW_KINDS:
            raise ValueError(f"unknown flow kind {self.flow_kind!r}")
        if self.times.ndim != 1 or len(self.times) != len(self.fields):
            raise ValueError("times and fields disagree in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)


def _eig(ref):
    """Laplace-Beltrami eigenvalue |xi|^2 of every Fourier mode of dE."""
    return spectral_for(ref.grid).k2


def heat_semigroup(ref, u0, t):
    if t < 0:
        raise ValueError("t must be nonnegative")
    u0 = ref.check_field(u0)
    if t == 0:
        return u0.copy()
    sp = spectral_for(ref.grid)
    return sp.ifft(sp.fft(u0) * np.exp(-t * _eig(ref)))


def biharmonic_semigroup(ref, u0, t):
    if t < 0:
        raise ValueError("t must be nonnegative")
    u0 = ref.check_field(u0)
    if t == 0:
        return u0.copy()
    sp = spectral_for(ref.grid)
    return sp.ifft(sp.fft(u0) * np.exp(-t * _eig(ref) ** 2))


def phi1(z):
    """(e^z - 1) / z with the removable singularity filled."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    zs = z[small]
    out[small] = 1.0 + zs / 2 + zs * zs / 6
    zl = z[~small]
    out[~small] = np.expm1(zl) / zl
    return out


def phi2(z):
    """(e^z - 1 - z) / z^2 with the removable singularity filled."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    # Taylor through z^6: sum_j z^j / (j + 2)!
    acc = np.zeros_like(zs)
    for j, den in enumerate((2, 6, 24, 120, 720, 5040, 40320)):
        acc = acc + zs ** j / den
    out[small] = acc
    zl = z[~small]
    out[~small] = (np.expm1(zl) - zl) / (zl * zl)
    return out


def _uniform_step(times):
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise InsufficientData("need at least two time samples")
    h = np.diff(times)
    if np.max(np.abs(h - h.mean())) > 1e-9 * h.mean():
        raise ValueError("Duhamel integration needs a uniform time grid")
    return float(h.mean())


def duhamel_trajectory(ref, f_samples, times, decay="biharmonic"):
    """Vf at every sample time; f is piecewise linear in time between samples.

    Per mode the exact update over a step h is
    V(t+h) = e^{-mu h} V(t) + h [(phi1 - phi2) f(t) + phi2 f(t+h)],  z = -mu h.
    """
    h = _uniform_step(times)
    sp = spectral_for(ref.grid)
    lam = _eig(ref)
    mu = lam ** 2 if decay == "biharmonic" else lam
    z = -mu * h
    E = np.exp(z)
    p1, p2 = phi1(z), phi2(z)
    fh = [sp.fft(ref.check_field(f)) for f in f_samples]
    out = [np.zeros(ref.grid.shape)]
    vh = np.zeros_like(fh[0])
    for j in range(len(fh) - 1):
        vh = E * vh + h * ((p1 - p2) * fh[j] + p2 * fh[j + 1])
        out.append(sp.ifft(vh))
    return np.array(out)


def duhamel(ref, f_samples, times, t=None):
    """Vf(t) = int_0^t S(t - s) f(s) ds for a source sampled on a uniform grid."""
    times = np.asarray(times, dtype=float)
    traj = duhamel_trajectory(ref, f_samples, times)
    if t is None or np.isclose(t, times[-1]):
        return traj[-1]
    idx = int(np.argmin(np.abs(times - t)))
    if not np.isclose(times[idx], t):
        raise ValueError("t must be one of the sample times")
    return traj[idx]


# --------------------------------------------------------------------------
# time-weighted Hölder norms
# --------------------------------------------------------------------------

@dataclass
class WeightedNormReport:
    kind: str                  # "X" or "Y"
    beta: float
    T: float
    value: float
    per_term: dict

    @property
    def x_norm(self):
        return self.value if self.kind == "X" else None

    @property
    def y_norm(self):
        return self.value if self.kind == "Y" else None

    def to_json(self):
        return json.dumps({"norm": self.kind + "_T", "beta": self.beta, "T": self.T,
                           "value": self.value, **self.per_term}, sort_keys=True)


def _sup_weighted(times, values, exponent):
    best = 0.0
    for t, v in zip(times, values):
        if t <= 0.0:
            if exponent < 0:
                continue
            if exponent > 0:
                v = 0.0
        best = max(best, (t ** exponent if t > 0 else 1.0) * v)
    return best


def _check_traj(traj, beta):
    if len(traj) < 3:
        raise InsufficientData("norm evaluation needs at least 3 time samples")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")


def norm_YT(ref, traj: Trajectory, beta=0.5) -> WeightedNormReport:
    _check_traj(traj, beta)
    t = traj.times
    U = traj.fields
    e1, e2 = 0.5, 0.5 + beta / 4
    c0 = [float(np.max(np.abs(u))) for u in U]
    hol = [holder_seminorm(ref, u, beta) if ti > 0 else 0.0 for u, ti in zip(U, t)]
    m = ref.grid.size
    terms = {
        "sup_t^1/2_C0": _sup_weighted(t, c0, e1),
        "sup_t^(1/2+b/4)_holder": _sup_weighted(t, hol, e2),
        "time_holder": _kernels.time_holder(U.reshape(len(t), m, 1), t, e2, beta),
    }
    return WeightedNormReport("Y", beta, float(t[-1]), float(sum(terms.values())), terms)


def norm_XT(ref, traj: Trajectory, beta=0.5) -> WeightedNormReport:
    _check_traj(traj, beta)
    t = traj.times
    U = traj.fields
    sp = spectral_for(ref.grid)
    nt = len(t)
    eh = 0.5 + beta / 4
    terms = {}
    grad4 = []
    for k in range(5):
        sups = []
        for u in U:
            uh = sp.fft(u)
            sups.append(float(np.max(sp.tensor_norm(u, k, uh))))
            if k == 4:
                grad4.append(sp.tensor_components(u, 4, uh))
        terms[f"sup_t^(-1/2+{k}/4)_grad{k}"] = _sup_weighted(t, sups, -0.5 + k / 4)
    grad4 = np.array(grad4)
    terms["sup_t^(1/2+b/4)_holder_grad4"] = _sup_weighted(
        t, [holder_seminorm(ref, g, beta) if ti > 0 else 0.0 for g, ti in zip(grad4, t)], eh)
    dtu = np.gradient(U, t, axis=0)
    terms["sup_t^1/2_dt_C0"] = _sup_weighted(t, [float(np.max(np.abs(v))) for v in dtu], 0.5)
    terms["sup_t^(1/2+b/4)_holder_dt"] = _sup_weighted(
        t, [holder_seminorm(ref, v, beta) if ti > 0 else 0.0 for v, ti in zip(dtu, t)], eh)
    m = ref.grid.size
    terms["time_holder_grad4"] = _kernels.time_holder(
        grad4.reshape(nt, m, grad4.shape[-1]), t, eh, beta)
    terms["time_holder_dt"] = _kernels.time_holder(dtu.reshape(nt, m, 1), t, eh, beta)
    return WeightedNormReport("X", beta, float(t[-1]), float(sum(terms.values())), terms)


# --------------------------------------------------------------------------
# Schauder constants of S
# --------------------------------------------------------------------------

def weighted_semigroup_sup(ref, u0, l, k, T, n_grid=160):
    """sup_{0<t<T} t^{l+k/4} || d_t^l grad^{k+2} S(t) u0 ||_{C0}, refined in continuous t."""
    sp = spectral_for(ref.grid)
    mu = _eig(ref) ** 2
    uh0 = sp.fft(ref.check_field(u0)) * (-mu) ** l
    p = l + k / 4.0

    def value(t):
        vh = uh0 * np.exp(-t * mu)
        v = sp.ifft(vh)
        w = t ** p if p > 0 else 1.0
        return w * float(np.max(sp.tensor_norm(v, k + 2, vh)))

    ts = np.concatenate([[0.0], np.geomspace(T * 1e-12, T, n_grid)])
    vals = np.array([value(t) if (t > 0 or p == 0) else 0.0 for t in ts])
    i = int(np.argmax(vals))
    if i == 0:
        return float(vals[0])
    lo = ts[i - 1]
    hi = ts[min(i + 1, len(ts) - 1)]
    if hi <= lo:
        return float(vals[i])
    res = minimize_scalar(lambda s: -value(s), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14 * max(hi, 1e-300), "maxiter": 500})
    return float(max(vals[i], -res.fun))


@dataclass
class SchauderTable:
    constants: dict            # (l, k) -> max over samples
    per_sample: dict           # (l, k) -> array of sample values
    ratios: dict               # (l, k) -> max / min over samples


def semigroup_estimate_check(ref, samples, k_max=2, l_max=1, T=1.0, seed=0, band=4):
    """Empirical C_{l,k} over seeded band-limited u0 with ||u0||_{C^{1,1}} = 1."""
    from .initial import random_band_limited

    if samples < 1:
        raise ValueError("samples must be >= 1")
    per = {(l, k): [] for l in range(l_max + 1) for k in range(k_max + 1)}
    for s in range(samples):
        u0 = random_band_limited(ref, band, seed + s)
        u0 = u0 / ck_norm(ref, u0, 2)
        for (l, k) in per:
            per[(l, k)].append(weighted_semigroup_sup(ref, u0, l, k, T))
    per = {key: np.array(v) for key, v in per.items()}
    consts = {key: float(v.max()) for key, v in per.items()}
    ratios = {key: float(v.max() / v.min()) if v.min() > 0 else float("inf") for key, v in per.items()}
    return SchauderTable(consts, per, ratios)
