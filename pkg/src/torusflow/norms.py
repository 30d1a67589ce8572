"""Discrete function-space norms on the reference boundary.

Supported kinds (strings):

``C0``, ``C<k>`` (k <= 6), ``C11``, ``holder(<beta>)`` (seminorm), ``L2``,
``H<k>`` (k <= 4), ``H<k>_semi``, ``W2p(<p>)`` with p in {2, 4, inf}.

``C11`` is taken as C0 + max|grad f| + max|grad^2 f|, which is equivalent to
the Lipschitz-gradient norm for smooth fields.
"""

import re

import numpy as np

from . import _kernels
from .errors import UnsupportedNorm
from .spectral import spectral_for

_PAT = re.compile(r"^(?:(C0)|C(\d)|(C11)|holder\(([0-9.eE+-]+)\)|(L2)|H(\d)(_semi)?|W2p\((2|4|inf)\))$")


def sup_tensor(ref, f, k, fh=None):
    sp = spectral_for(ref.grid)
    return float(np.max(sp.tensor_norm(f, k, fh)))


def ck_norm(ref, f, k):
    sp = spectral_for(ref.grid)
    fh = sp.fft(f)
    return float(np.max(np.abs(f))) + sum(sup_tensor(ref, f, j, fh) for j in range(1, k + 1))


def sobolev_sq(ref, f, k, semi=False):
    """sum_{j<=k} ||grad^j f||^2_{L^2} by Parseval (only j == k when semi)."""
    grid = ref.grid
    sp = spectral_for(grid)
    fh = sp.fft(f)
    power = np.abs(fh) ** 2 * (grid.cell_area / np.prod(grid.n))
    start = k if semi else 0
    return float(sum(np.sum(sp.k2 ** j * power) for j in range(start, k + 1)))


def holder_seminorm(ref, f, beta):
    """max over all pairs of grid nodes on one component of |f(x)-f(y)| / d(x,y)^beta.

    ``f`` may carry a trailing tensor axis; differences are then measured in
    the Euclidean norm of that axis.  Distances are flat-torus (geodesic on the
    reference) arclength distances.
    """
    grid = ref.grid
    f = np.asarray(f, dtype=float)
    if f.shape == grid.shape:
        f = f[..., None]
    coords = np.stack([c[0].ravel() for c in grid.mesh()], axis=-1)
    best = 0.0
    for comp in range(grid.components):
        vals = f[comp].reshape(-1, f.shape[-1])
        best = max(best, _kernels.holder_pairs(vals, coords, np.asarray(grid.lengths), beta))
    return best


def field_norms(ref, f, kind: str) -> float:
    f = ref.check_field(f)
    m = _PAT.match(kind.strip())
    if not m:
        raise UnsupportedNorm(f"unsupported norm kind {kind!r}")
    c0, ck, c11, beta, l2, hk, semi, p = m.groups()
    if c0:
        return float(np.max(np.abs(f)))
    if ck is not None:
        k = int(ck)
        if k > 6:
            raise UnsupportedNorm("C^k norms are provided for k <= 6")
        return ck_norm(ref, f, k)
    if c11:
        return ck_norm(ref, f, 2)
    if beta is not None:
        b = float(beta)
        if not 0.0 < b < 1.0:
            raise UnsupportedNorm("Hölder exponent must lie in (0, 1)")
        return holder_seminorm(ref, f, b)
    if l2:
        return float(np.sqrt(np.sum(f * f) * ref.grid.cell_area))
    if hk is not None:
        k = int(hk)
        if k > 4:
            raise UnsupportedNorm("H^k norms are provided for k <= 4")
        return float(np.sqrt(sobolev_sq(ref, f, k, semi=bool(semi))))
    if p == "inf":
        return ck_norm(ref, f, 2)
    pp = int(p)
    sp = spectral_for(ref.grid)
    fh = sp.fft(f)
    tot = sum(np.sum(sp.tensor_norm(f, j, fh) ** pp) for j in range(3)) * ref.grid.cell_area
    return float(tot ** (1.0 / pp))
