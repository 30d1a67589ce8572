"""Catalogue of constant-curvature reference sets in the flat torus.

Every entry has a boundary parametrized by reference arclength on a flat
parameter torus, with principal directions aligned to the parameter axes:

* ``Lamella2D``  slab {a < y < b} in T^2; components 0 (y = a, normal -e_2) and 1 (y = b).
* ``Lamella3D``  slab {a < z < b} in T^3; two flat unit-square components.
* ``Disc2D``     disc of radius r centred at (1/2, 1/2); axis = arclength r*theta.
* ``Cylinder3D`` solid cylinder of radius r around the x_3 axis through (1/2, 1/2);
  axes = (arclength r*theta, x_3).

Height fields are arrays of shape ``grid.shape = (components, n_1[, n_2])``.
"""

from dataclasses import dataclass, field
from enum import Enum
import hashlib

import numpy as np

from .errors import ConfigError, GridMismatch
from .spectral import spectral_for, integrate


class Kind(str, Enum):
    LAMELLA2D = "Lamella2D"
    LAMELLA3D = "Lamella3D"
    DISC2D = "Disc2D"
    CYLINDER3D = "Cylinder3D"


_KIND_CODES = {Kind.LAMELLA2D: 1, Kind.LAMELLA3D: 2, Kind.DISC2D: 3, Kind.CYLINDER3D: 4}


@dataclass(frozen=True)
class ParamGrid:
    """Uniform periodic grid on the parameter torus of the reference boundary.

    ``lengths`` are the arclength periods of the axes: 1 for flat unit axes,
    ``2*pi*r`` for angular axes.
    """

    components: int
    n: tuple
    lengths: tuple

    @property
    def dims(self):
        return len(self.n)

    @property
    def shape(self):
        return (self.components,) + tuple(self.n)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.n))

    @property
    def cell_area(self):
        return float(np.prod(self.spacing))

    @property
    def size(self):
        return int(np.prod(self.shape))

    def axis_coords(self, a):
        return np.arange(self.n[a]) * self.spacing[a]

    def mesh(self):
        """Arclength coordinates broadcast to ``shape``, one array per axis."""
        axes = [self.axis_coords(a) for a in range(self.dims)]
        grids = np.meshgrid(*axes, indexing="ij")
        return [np.broadcast_to(g, self.shape).copy() for g in grids]


@dataclass(frozen=True)
class ReferenceSpec:
    kind: Kind
    radius: float = 0.25
    slab_width: float = 0.5
    n: int = 128

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))


@dataclass(frozen=True, eq=False)
class ReferenceSurface:
    spec: ReferenceSpec
    grid: ParamGrid
    kappa: tuple                     # principal curvature per parameter axis
    points: np.ndarray = field(repr=False)       # (*shape, N) unwrapped positions
    normal: np.ndarray = field(repr=False)       # (*shape, N) outer unit normal
    tangents: np.ndarray = field(repr=False)     # (dims, *shape, N) unit principal directions
    mean_curvature: float
    sff_norm_sq: float
    perimeter: float
    volume: float
    tubular_radius: float
    ambient_dim: int

    @property
    def kind(self):
        return self.spec.kind

    @property
    def principal_curvatures(self):
        return np.broadcast_to(np.asarray(self.kappa, dtype=float),
                               self.grid.shape + (len(self.kappa),))

    @property
    def area_element(self):
        return np.full(self.grid.shape, self.grid.cell_area)

    @property
    def ref_id(self):
        """Stable 64-bit identity of the reference (kind, geometry, grid)."""
        s = self.spec
        key = f"{s.kind.value}|{s.radius!r}|{s.slab_width!r}|{self.grid.n}".encode()
        return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")

    @property
    def kind_code(self):
        return _KIND_CODES[self.spec.kind]

    @property
    def center(self):
        return np.full(self.ambient_dim, 0.5)

    def check_field(self, values):
        values = np.asarray(getattr(values, "values", values), dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatch(f"field shape {values.shape} does not match grid {self.grid.shape}")
        return values

    def translation_fields(self):
        """The functions nu_E . e_i, i = 1..N (some vanish identically)."""
        return [self.normal[..., i] for i in range(self.ambient_dim)]

    def active_axes(self):
        """Ambient directions whose translation field is not identically zero."""
        return [i for i, f in enumerate(self.translation_fields()) if np.max(np.abs(f)) > 0.5]


def _check_pow2(n):
    return n >= 16 and (n & (n - 1)) == 0


def make_reference(spec: ReferenceSpec) -> ReferenceSurface:
    kind = spec.kind
    n = spec.n
    if not _check_pow2(n):
        raise ConfigError(f"grid resolution must be a power of two >= 16, got {n}")
    if kind in (Kind.DISC2D, Kind.CYLINDER3D):
        r = spec.radius
        if not (0.0 < r < 0.5):
            raise ConfigError(f"radius must lie in (0, 1/2), got {r}")
    else:
        w = spec.slab_width
        if not (0.0 < w < 1.0):
            raise ConfigError(f"slab_width must lie in (0, 1), got {w}")

    if kind is Kind.LAMELLA2D:
        w = spec.slab_width
        grid = ParamGrid(2, (n,), (1.0,))
        (x,) = grid.mesh()
        a, b = 0.5 - w / 2, 0.5 + w / 2
        y = np.where(np.arange(2)[:, None] == 0, a, b) * np.ones_like(x)
        sgn = np.where(np.arange(2)[:, None] == 0, -1.0, 1.0) * np.ones_like(x)
        points = np.stack([x, y], axis=-1)
        normal = np.stack([np.zeros_like(x), sgn], axis=-1)
        tangents = np.stack([np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1)])
        return ReferenceSurface(spec, grid, (0.0,), points, normal, tangents,
                                0.0, 0.0, 2.0, w, min(w, 1 - w) / 2, 2)

    if kind is Kind.LAMELLA3D:
        w = spec.slab_width
        grid = ParamGrid(2, (n, n), (1.0, 1.0))
        x, y = grid.mesh()
        a, b = 0.5 - w / 2, 0.5 + w / 2
        comp = np.arange(2)[:, None, None] * np.ones_like(x)
        z = np.where(comp == 0, a, b)
        sgn = np.where(comp == 0, -1.0, 1.0)
        zero, one = np.zeros_like(x), np.ones_like(x)
        points = np.stack([x, y, z], axis=-1)
        normal = np.stack([zero, zero, sgn], axis=-1)
        tangents = np.stack([np.stack([one, zero, zero], axis=-1),
                             np.stack([zero, one, zero], axis=-1)])
        return ReferenceSurface(spec, grid, (0.0, 0.0), points, normal, tangents,
                                0.0, 0.0, 2.0, w, min(w, 1 - w) / 2, 3)

    r = spec.radius
    if kind is Kind.DISC2D:
        grid = ParamGrid(1, (n,), (2 * np.pi * r,))
        (s,) = grid.mesh()
        th = s / r
        c, sn = np.cos(th), np.sin(th)
        normal = np.stack([c, sn], axis=-1)
        points = 0.5 + r * normal
        tangents = np.stack([np.stack([-sn, c], axis=-1)])
        return ReferenceSurface(spec, grid, (1.0 / r,), points, normal, tangents,
                                1.0 / r, 1.0 / r ** 2, 2 * np.pi * r, np.pi * r ** 2,
                                min(r, 0.5 - r), 2)

    # Cylinder3D
    grid = ParamGrid(1, (n, n), (2 * np.pi * r, 1.0))
    s, z = grid.mesh()
    th = s / r
    c, sn = np.cos(th), np.sin(th)
    zero, one = np.zeros_like(s), np.ones_like(s)
    normal = np.stack([c, sn, zero], axis=-1)
    points = np.stack([0.5 + r * c, 0.5 + r * sn, z], axis=-1)
    tangents = np.stack([np.stack([-sn, c, zero], axis=-1),
                         np.stack([zero, zero, one], axis=-1)])
    return ReferenceSurface(spec, grid, (1.0 / r, 0.0), points, normal, tangents,
                            1.0 / r, 1.0 / r ** 2, 2 * np.pi * r, np.pi * r ** 2,
                            min(r, 0.5 - r), 3)


# --------------------------------------------------------------------------
# second variation and the stability spectrum
# --------------------------------------------------------------------------

def _bilinear(ref, phi, psi):
    sp = spectral_for(ref.grid)
    gphi = sp.gradient(phi)
    gpsi = gphi if psi is phi else sp.gradient(psi)
    dot = sum(ga * gb for ga, gb in zip(gphi, gpsi))
    return integrate(ref.grid, dot - ref.sff_norm_sq * phi * psi)


def second_variation(ref: ReferenceSurface, phi) -> float:
    """Quadratic form int_{dE} |grad phi|^2 - |B_E|^2 phi^2.

    This is the full second variation for normal fields phi on a critical set
    once the two H_E-weighted terms are dropped.  Both vanish here: H_E is
    constant and, for perturbations that preserve volume to first order
    (int phi = 0), the remaining H_E terms are the Lagrange-multiplier part of
    the constrained second variation.  Equivalently, the value equals
    d^2/de^2 [P(E_{e phi}) - H_E |E_{e phi}|] at e = 0.
    """
    phi = ref.check_field(phi)
    return _bilinear(ref, phi, phi)


def _mode_basis(ref, kmax):
    """Real Fourier modes up to |k| <= kmax per axis on every component."""
    grid = ref.grid
    coords = grid.mesh()
    fields, labels = [], []
    if grid.dims == 1:
        (s,) = coords
        L = grid.lengths[0]
        trig = []
        for k in range(kmax + 1):
            trig.append((f"cos{k}", np.cos(2 * np.pi * k * s / L)))
            if k:
                trig.append((f"sin{k}", np.sin(2 * np.pi * k * s / L)))
    else:
        s, z = coords
        L1, L2 = grid.lengths
        trig = []
        for j in range(kmax + 1):
            for m in range(kmax + 1):
                a1 = 2 * np.pi * j * s / L1
                a2 = 2 * np.pi * m * z / L2
                for tag, f1, f2 in (("cc", np.cos, np.cos), ("cs", np.cos, np.sin),
                                    ("sc", np.sin, np.cos), ("ss", np.sin, np.sin)):
                    if (tag[0] == "s" and j == 0) or (tag[1] == "s" and m == 0):
                        continue
                    trig.append((f"{tag}({j},{m})", f1(a1) * f2(a2)))
    for c in range(grid.components):
        mask = (np.arange(grid.components) == c).reshape((-1,) + (1,) * grid.dims)
        for lab, f in trig:
            fields.append(np.where(mask, f, 0.0))
            labels.append(f"c{c}:{lab}" if grid.components > 1 else lab)
    return np.array(fields), labels


@dataclass
class StabilitySpectrum:
    modes: list             # (label, eigenvalue) on T^perp, ascending
    translations: list      # (label, Rayleigh quotient) of the translation fields
    zero_cutoff: float
    strictly_stable: bool

    @property
    def min_eigenvalue(self):
        return self.modes[0][1]


def stability_spectrum(ref: ReferenceSurface, kmax: int) -> StabilitySpectrum:
    """Eigenvalues of the second variation on mean-zero fields L^2-orthogonal
    to the translation fields nu_E . e_i, relative to the L^2(dE) inner product."""
    from scipy.linalg import eigh

    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    grid = ref.grid
    w = grid.cell_area
    basis, labels = _mode_basis(ref, kmax)
    M = basis.shape[0]
    flat = basis.reshape(M, -1)

    cons = [np.ones(grid.shape)]
    trans = []
    for i, f in enumerate(ref.translation_fields()):
        if np.max(np.abs(f)) > 0.5:
            cons.append(f)
            trans.append((f"translation-x{i + 1}", f))
    C = np.array(cons).reshape(len(cons), -1)
    # W-orthogonal projection removing span(C)
    G_c = w * C @ C.T
    coef = np.linalg.solve(G_c, w * C @ flat.T)
    proj = flat - coef.T @ C
    # orthonormal basis (in L^2(dE)) of the projected span
    U, S, Vt = np.linalg.svd(np.sqrt(w) * proj.T, full_matrices=False)
    rank = int(np.sum(S > 1e-9 * S[0]))
    Q = (U[:, :rank] / np.sqrt(w)).T.reshape((rank,) + grid.shape)
    A = np.empty((rank, rank))
    sp = spectral_for(grid)
    grads = [sp.gradient(q) for q in Q]
    for i in range(rank):
        for j in range(i, rank):
            dot = sum(ga * gb for ga, gb in zip(grads[i], grads[j]))
            A[i, j] = A[j, i] = integrate(grid, dot - ref.sff_norm_sq * Q[i] * Q[j])
    vals, vecs = eigh(A)
    # label each eigenvector by its dominant original mode
    fields = np.tensordot(vecs.T, Q, axes=1).reshape(rank, -1)
    overlap = np.abs(fields @ flat.T) / np.sqrt((flat ** 2).sum(axis=1))
    modes = [(labels[int(np.argmax(overlap[i]))], float(vals[i])) for i in range(rank)]

    tq = []
    for lab, f in trans:
        tq.append((lab, _bilinear(ref, f, f) / integrate(grid, f * f)))
    cutoff = 1e-10 * max(abs(v) for _, v in modes)
    stable = all(v > cutoff for _, v in modes)
    return StabilitySpectrum(modes, tq, cutoff, stable)
