"""Seeded initial height fields.

Random fields use numpy's counter-based Philox bit generator.  Stream layout
(so an independent implementation can reproduce it): ``Generator(Philox(seed))``
draws one ``standard_normal`` array of shape ``(2,) + grid.shape``; entry 0 is
the real and entry 1 the imaginary part of a Fourier coefficient array on the
FFT index grid.  Coefficients with integer wavenumber ``max_a |k_a| > kmax`` or
``k = 0`` are zeroed, the rest divided by ``1 + |k|^2``; the field is the real
part of the inverse FFT, scaled to unit max-abs.
"""

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError
from .norms import ck_norm


def random_band_limited(ref, kmax, seed):
    grid = ref.grid
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((2,) + grid.shape)
    coef = z[0] + 1j * z[1]
    ks = [np.fft.fftfreq(n, d=1.0 / n) for n in grid.n]
    kk = np.meshgrid(*ks, indexing="ij")
    kinf = np.max(np.abs(np.array(kk)), axis=0)
    k2 = sum(k ** 2 for k in kk)
    mask = (kinf <= kmax) & (kinf > 0)
    coef = np.where(mask[None], coef / (1.0 + k2[None]), 0.0)
    u = np.fft.ifftn(coef, axes=tuple(range(1, grid.dims + 1))).real
    return u / np.max(np.abs(u))


def single_mode(ref, k, amplitude):
    """amplitude * sin(2 pi k s / L) along the first axis.

    On lamellae the mode sits on the upper component only (the lower one
    stays flat); on disc/cylinder it is the angular mode sin(k theta).
    """
    grid = ref.grid
    s = grid.mesh()[0]
    u = amplitude * np.sin(2 * np.pi * k * s / grid.lengths[0])
    if grid.components == 2:
        u[0] = 0.0
    return u


def fourier_modes(ref, modes):
    """sum_j a_j cos(2 pi k_j s / L) + b_j sin(2 pi k_j s / L) along the first axis.

    ``modes`` is a sequence of ``(k, a, b)``; on lamellae the upper component
    carries the field.
    """
    grid = ref.grid
    s = grid.mesh()[0]
    ph = 2 * np.pi * s / grid.lengths[0]
    u = np.zeros(grid.shape)
    for k, a, b in modes:
        u += a * np.cos(k * ph) + b * np.sin(k * ph)
    if grid.components == 2:
        u[0] = 0.0
    return u


def generate_initial(ref, kind="zero", amplitude=0.0, kmax=4, seed=0, c11_target=None, k=1,
                     modes=None):
    """Initial height field, volume-projected so |E_{u0}| = |E|.

    With ``c11_target`` the field is rescaled (jointly with the projection) so
    that the discrete C^{1,1} norm of the projected field equals the target.
    For ``fourier_modes`` the coefficients are absolute and ``amplitude`` is
    ignored unless a target is given.
    """
    from .flow import project_volume

    if kind == "zero":
        return np.zeros(ref.grid.shape)
    if kind == "single_mode":
        shape = single_mode(ref, k, 1.0)
    elif kind == "random_band_limited":
        shape = random_band_limited(ref, kmax, seed)
    elif kind == "fourier_modes":
        if not modes:
            raise ConfigError("fourier_modes needs a non-empty modes list")
        shape = fourier_modes(ref, modes)
        amplitude = 1.0
    else:
        raise ConfigError(f"unknown initial kind {kind!r}")

    def projected(scale):
        return project_volume(ref, scale * shape)[0]

    if c11_target is None:
        return projected(amplitude)
    base = ck_norm(ref, shape, 2)
    guess = c11_target / base
    if np.max(np.abs(shape)) * guess * 1.5 >= ref.tubular_radius:
        raise ConfigError("C^{1,1} target unreachable inside the tubular neighbourhood")

    def resid(scale):
        return ck_norm(ref, projected(scale), 2) - c11_target

    lo, hi = 0.5 * guess, 1.5 * guess
    scale = brentq(resid, lo, hi, xtol=1e-16 * guess, rtol=1e-15, maxiter=200)
    return projected(scale)
