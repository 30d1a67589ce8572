import math

import numpy as np
import pytest

from torusflow.errors import ConfigError, GridMismatch
from torusflow.geometry import enclosed_volume, perimeter, perimeter_gap
from torusflow.reference import (Kind, ReferenceSpec, make_reference, second_variation,
                                 stability_spectrum)

from conftest import TWO_PI, theta, top, xcoord


def test_lamella_closed_forms():
    ref = make_reference(ReferenceSpec(Kind.LAMELLA2D, slab_width=0.5, n=256))
    assert ref.perimeter == 2.0
    assert ref.mean_curvature == 0.0
    assert ref.volume == 0.5
    assert ref.tubular_radius == 0.25


def test_disc_closed_forms(disc):
    assert disc.perimeter == pytest.approx(2 * math.pi * 0.25, rel=1e-15)
    assert disc.mean_curvature == 4.0
    assert disc.sff_norm_sq == 16.0
    assert disc.volume == pytest.approx(math.pi * 0.0625, rel=1e-15)


def test_cylinder_closed_forms():
    ref = make_reference(ReferenceSpec(Kind.CYLINDER3D, radius=0.2, n=32))
    assert ref.perimeter == pytest.approx(2 * math.pi * 0.2)
    assert ref.kappa == (5.0, 0.0)
    assert ref.mean_curvature == 5.0
    assert ref.volume == pytest.approx(math.pi * 0.04)


@pytest.mark.parametrize("spec", [ReferenceSpec(Kind.DISC2D, radius=0.5),
                                  ReferenceSpec(Kind.DISC2D, radius=0.0),
                                  ReferenceSpec(Kind.CYLINDER3D, radius=0.7, n=32),
                                  ReferenceSpec(Kind.LAMELLA2D, slab_width=1.0),
                                  ReferenceSpec(Kind.LAMELLA2D, n=100),
                                  ReferenceSpec(Kind.DISC2D, n=8)])
def test_invalid_specs_rejected(spec):
    with pytest.raises(ConfigError):
        make_reference(spec)


@pytest.mark.parametrize("kind,r", [(Kind.LAMELLA2D, 0.25), (Kind.LAMELLA3D, 0.25),
                                    (Kind.DISC2D, 0.25), (Kind.CYLINDER3D, 0.25),
                                    (Kind.CYLINDER3D, 1 / (4 * math.pi))])
def test_unit_normals_and_criticality(kind, r):
    ref = make_reference(ReferenceSpec(kind, radius=r, n=32))
    assert np.allclose(np.linalg.norm(ref.normal, axis=-1), 1.0, atol=1e-15)
    H = ref.principal_curvatures.sum(axis=-1)
    assert np.max(np.abs(H - H.flat[0])) == 0.0
    assert ref.tubular_radius > 0
    assert ref.area_element.sum() == pytest.approx(ref.perimeter, rel=1e-14)


def test_second_variation_lamella_cosine(lam):
    phi = top(lam, np.cos(TWO_PI * xcoord(lam)))
    assert second_variation(lam, phi) == pytest.approx(2 * math.pi ** 2, rel=1e-12)


def test_second_variation_disc_cos2(disc):
    phi = np.cos(2 * theta(disc))[None]
    assert second_variation(disc, phi) == pytest.approx(3 * math.pi / 0.25, rel=1e-12)


def test_second_variation_zero_and_grid_mismatch(disc):
    assert second_variation(disc, np.zeros(disc.grid.shape)) == 0.0
    with pytest.raises(GridMismatch):
        second_variation(disc, np.zeros((1, 64)))


def _fd_second(ref, phi, eps):
    # constrained second variation as second difference of P - H_E |E|
    def g(e):
        return perimeter_gap(ref, e * phi) - ref.mean_curvature * (enclosed_volume(ref, e * phi) - ref.volume)
    return (g(eps) - 2 * g(0.0) + g(-eps)) / eps ** 2


@pytest.mark.parametrize("fixture,kmode", [("lam", 2), ("disc", 3), ("cyl", 2)])
def test_second_variation_matches_finite_differences(request, fixture, kmode):
    ref = request.getfixturevalue(fixture)
    s = ref.grid.mesh()[0]
    phi = np.cos(TWO_PI * kmode * s / ref.grid.lengths[0])
    if ref.grid.components == 2:
        phi[0] = 0.0
    fd = _fd_second(ref, phi, 1e-4)
    assert fd == pytest.approx(second_variation(ref, phi), rel=1e-3)


def test_first_variation_consistency(disc):
    # (P(E_{e phi}) - P(E)) / e -> int H_E phi at rate O(e)
    th = theta(disc)
    phi = (0.3 + np.cos(2 * th) + 0.5 * np.sin(3 * th))[None]
    lin = disc.mean_curvature * float(np.sum(phi) * disc.grid.cell_area)
    errs = [abs(perimeter_gap(disc, e * phi) / e - lin) for e in (1e-2, 1e-3, 1e-4)]
    assert errs[0] / errs[1] == pytest.approx(10, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(10, rel=0.05)


def test_spectrum_lamella_positive_min_at_k1(lam):
    sp = stability_spectrum(lam, 4)
    assert sp.strictly_stable
    assert sp.min_eigenvalue == pytest.approx(TWO_PI ** 2, rel=1e-10)
    assert len(sp.translations) == 1      # only the slab-normal translation acts


def test_spectrum_disc_translations_and_modes(disc):
    r = 0.25
    sp = stability_spectrum(disc, 6)
    assert len(sp.translations) == 2
    assert all(abs(v) <= 1e-10 for _, v in sp.translations)
    vals = sorted(v for _, v in sp.modes)
    expected = sorted([(k * k - 1) / r ** 2 for k in range(2, 7) for _ in range(2)])
    assert np.allclose(vals, expected, rtol=1e-10)


def test_spectrum_thin_cylinder_unstable():
    r = 1 / (4 * math.pi)
    sp = stability_spectrum(make_reference(ReferenceSpec(Kind.CYLINDER3D, radius=r, n=32)), 2)
    assert not sp.strictly_stable
    assert sp.min_eigenvalue == pytest.approx((TWO_PI ** 2 * r ** 2 - 1) / r ** 2, rel=1e-9)


def test_spectrum_thick_cylinder_stable(cyl):
    sp = stability_spectrum(cyl, 2)
    assert sp.strictly_stable and sp.min_eigenvalue > 0


def test_spectrum_rejects_kmax_zero(lam):
    with pytest.raises(ValueError):
        stability_spectrum(lam, 0)


def test_perimeter_of_reference(lam3):
    assert perimeter(lam3, np.zeros(lam3.grid.shape)) == pytest.approx(2.0, rel=1e-15)
