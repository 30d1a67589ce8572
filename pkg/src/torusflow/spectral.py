"""Fourier differentiation on the periodic parameter grids.

Arrays are laid out as ``(components, n_1[, n_2])``; transforms act on the
parameter axes only.  Wavenumbers are physical (``2*pi*k/L`` for an axis of
arclength period ``L``), so derivatives are with respect to reference arclength.
"""

from functools import lru_cache, reduce
from math import comb

import numpy as np


class Spectral:
    def __init__(self, grid):
        self.grid = grid
        self.axes = tuple(range(1, grid.dims + 1))
        freqs = []
        odd_freqs = []
        for n, L in zip(grid.n, grid.lengths):
            xi = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
            xo = xi.copy()
            xo[n // 2] = 0.0  # Nyquist dropped for odd orders
            freqs.append(xi)
            odd_freqs.append(xo)
        self.freqs = freqs
        self._odd = odd_freqs
        shape = [1] * (grid.dims + 1)
        self._bcast = []
        for a in range(grid.dims):
            s = list(shape)
            s[a + 1] = grid.n[a]
            self._bcast.append(tuple(s))
        k2 = 0.0
        for a in range(grid.dims):
            k2 = k2 + freqs[a].reshape(self._bcast[a]) ** 2
        # |xi|^2 broadcast over components
        self.k2 = np.broadcast_to(k2, (1,) + tuple(grid.n)).copy()

    def fft(self, u):
        return np.fft.fftn(u, axes=self.axes)

    def ifft(self, uh):
        return np.fft.ifftn(uh, axes=self.axes).real

    def multiplier(self, orders):
        """Fourier symbol of prod_a d^{orders[a]}/ds_a^{orders[a]}."""
        return self._multiplier(tuple(orders))

    @lru_cache(maxsize=64)
    def _multiplier(self, orders):
        m = np.ones((1,) * (self.grid.dims + 1), dtype=complex)
        for a, o in enumerate(orders):
            if o == 0:
                continue
            xi = self._odd[a] if o % 2 else self.freqs[a]
            m = m * (1j * xi.reshape(self._bcast[a])) ** o
        return m

    def deriv_hat(self, uh, orders):
        return self.ifft(uh * self.multiplier(orders))

    def deriv(self, u, orders):
        return self.deriv_hat(self.fft(u), orders)

    def gradient(self, u, uh=None):
        uh = self.fft(u) if uh is None else uh
        return [self.deriv_hat(uh, _unit(a, self.grid.dims)) for a in range(self.grid.dims)]

    def hessian(self, u, uh=None):
        uh = self.fft(u) if uh is None else uh
        d = self.grid.dims
        H = [[None] * d for _ in range(d)]
        for a in range(d):
            for b in range(a, d):
                o = [0] * d
                o[a] += 1
                o[b] += 1
                H[a][b] = H[b][a] = self.deriv_hat(uh, o)
        return H

    def laplacian(self, u):
        return self.ifft(-self.k2 * self.fft(u))

    def tensor_norm(self, u, k, uh=None):
        """Pointwise |nabla^k u| for the flat metric (all ordered index tuples)."""
        uh = self.fft(u) if uh is None else uh
        if k == 0:
            return np.abs(u)
        d = self.grid.dims
        if d == 1:
            return np.abs(self.deriv_hat(uh, (k,)))
        acc = np.zeros(u.shape)
        for a in range(k + 1):
            acc += comb(k, a) * self.deriv_hat(uh, (a, k - a)) ** 2
        return np.sqrt(acc)

    def tensor_components(self, u, k, uh=None):
        """Stack of the distinct k-th derivatives weighted so that the
        Euclidean norm of the stack equals |nabla^k u| (last axis)."""
        uh = self.fft(u) if uh is None else uh
        d = self.grid.dims
        if d == 1:
            return self.deriv_hat(uh, (k,))[..., None]
        comps = [np.sqrt(comb(k, a)) * self.deriv_hat(uh, (a, k - a)) for a in range(k + 1)]
        return np.stack(comps, axis=-1)

    def resample_shift(self, u, shifts):
        """Evaluate the trigonometric interpolant at s - shift (exact translation)."""
        uh = self.fft(u)
        phase = 1.0
        for a, sh in enumerate(shifts):
            if sh == 0.0:
                continue
            phase = phase * np.exp(-1j * self._odd[a].reshape(self._bcast[a]) * sh)
        return self.ifft(uh * phase)


def _unit(a, d):
    o = [0] * d
    o[a] = 1
    return tuple(o)


@lru_cache(maxsize=32)
def spectral_for(grid):
    return Spectral(grid)


def integrate(grid, values):
    """Trapezoid (spectrally accurate) quadrature of a grid field over all components."""
    return float(np.sum(values) * grid.cell_area)


def prod(seq):
    return reduce(lambda a, b: a * b, seq, 1)
