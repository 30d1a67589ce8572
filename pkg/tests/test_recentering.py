import math

import numpy as np
import pytest

from torusflow.errors import FoldOver, TubularViolation
from torusflow.flow import FlowConfig, run_flow
from torusflow.geometry import enclosed_volume, perimeter
from torusflow.initial import generate_initial, random_band_limited
from torusflow.linear import Trajectory
from torusflow.norms import ck_norm
from torusflow.recentering import (barycenter_projection, find_translation, reparametrize,
                                   track_translations)

from conftest import TWO_PI, theta, top, xcoord


def test_barycenter_examples(lam, disc):
    c = 0.07
    assert np.allclose(barycenter_projection(lam, top(lam, np.full(128, c))), [0.0, c], atol=1e-16)
    th = theta(disc)
    a = 0.01
    assert np.allclose(barycenter_projection(disc, (a * np.cos(th))[None]), [math.pi * 0.25 * a, 0.0],
                       atol=1e-16)
    even = (np.cos(th) + 0.3 * np.cos(2 * th))[None]
    odd = (np.sin(th) + 0.3 * np.sin(3 * th))[None]
    assert abs(barycenter_projection(disc, even)[1]) <= 1e-16
    assert abs(barycenter_projection(disc, odd)[0]) <= 1e-16


def test_reparametrize_identity(lam, disc, cyl):
    for ref in (lam, disc, cyl):
        u = 0.01 * random_band_limited(ref, 4, 3)
        assert np.max(np.abs(reparametrize(ref, u, np.zeros(ref.ambient_dim)) - u)) <= 1e-10


def test_reparametrize_lamella_normal_shift(lam):
    s = 0.03
    v = reparametrize(lam, np.zeros(lam.grid.shape), [0.0, s])
    assert np.allclose(v[1], s, atol=1e-16) and np.allclose(v[0], -s, atol=1e-16)


def test_reparametrize_lamella_tangential_shift_is_exact(lam):
    x = xcoord(lam)
    u = top(lam, 0.01 * np.sin(TWO_PI * x))
    v = reparametrize(lam, u, [0.1, 0.0])
    assert np.allclose(v[1], 0.01 * np.sin(TWO_PI * (x - 0.1)), atol=1e-15)


def test_reparametrize_shifted_circle(disc):
    r, s = 0.25, 0.01
    th = theta(disc)
    v = reparametrize(disc, np.zeros(disc.grid.shape), [s, 0.0])
    exact = np.sqrt(r * r - s * s * np.sin(th) ** 2) + s * np.cos(th) - r
    assert np.max(np.abs(v[0] - exact)) <= 1e-10


def test_reparametrize_cylinder_shift(cyl):
    r, s = 0.25, 0.01
    th = theta(cyl)
    v = reparametrize(cyl, np.zeros(cyl.grid.shape), [0.0, s, 0.3])
    exact = np.sqrt(r * r - s * s * np.cos(th) ** 2) + s * np.sin(th) - r
    assert np.max(np.abs(v[0] - exact)) <= 1e-10


def test_reparametrize_guards(disc):
    with pytest.raises(TubularViolation):
        reparametrize(disc, np.full(disc.grid.shape, 0.1), [0.16, 0.0])
    th = theta(disc)
    with pytest.raises(FoldOver):
        reparametrize(disc, (0.02 * np.sin(40 * th))[None], [0.12, 0.0])


@pytest.mark.parametrize("fixture", ["lam", "disc", "cyl"])
def test_round_trip_and_set_identity(request, fixture):
    ref = request.getfixturevalue(fixture)
    u = 0.005 * random_band_limited(ref, 4, 11)
    sigma = np.array([0.004, -0.003, 0.02][:ref.ambient_dim])
    v = reparametrize(ref, u, sigma)
    back = reparametrize(ref, v, -sigma)
    assert np.max(np.abs(back - u)) <= 1e-9
    assert perimeter(ref, v) == pytest.approx(perimeter(ref, u), rel=1e-10)
    assert enclosed_volume(ref, v) == pytest.approx(enclosed_volume(ref, u), rel=1e-10)


def _c2_angular(ref, f):
    # C^2 norm with derivatives in the dimensionless angle (arclength derivatives times r^k)
    from torusflow.spectral import spectral_for
    sp = spectral_for(ref.grid)
    r = ref.spec.radius
    return (np.max(np.abs(f)) + r * np.max(np.abs(sp.deriv(f, [1])))
            + r * r * np.max(np.abs(sp.deriv(f, [2]))))


@pytest.mark.parametrize("fixture", ["lam", "disc"])
def test_norm_control(request, fixture):
    ref = request.getfixturevalue(fixture)
    norm = (lambda f: ck_norm(ref, f, 2)) if fixture == "lam" else (lambda f: _c2_angular(ref, f))
    worst = 0.0
    for seed in range(4):
        phi = random_band_limited(ref, 3, seed)
        u = 0.1 * ref.tubular_radius * phi / norm(phi)
        for sigma in (np.array([0.01, -0.007]), np.array([0.0, 0.02])):
            v = reparametrize(ref, u, sigma)
            worst = max(worst, norm(v) / (norm(u) + np.linalg.norm(sigma)))
    assert worst <= 3.0


def test_find_translation_zero(disc):
    st = find_translation(disc, np.zeros(disc.grid.shape))
    assert np.all(st.sigma == 0) and np.all(st.v == 0) and st.projection_defect == 0.0


def test_find_translation_lamella_mean_extraction(lam):
    m, eps = 0.02, 1e-3
    x = xcoord(lam)
    # the set translated by m in the slab normal: top moves +m, bottom -m
    u = np.stack([np.full(128, -m), m + eps * np.sin(TWO_PI * x)])
    st = find_translation(lam, u)
    assert st.sigma == pytest.approx([0.0, -m], abs=1e-15)
    assert np.allclose(st.v[1], eps * np.sin(TWO_PI * x), atol=1e-15)
    assert st.projection_defect <= 1e-12
    # a single moved component is split evenly between translation and v
    st = find_translation(lam, top(lam, m + eps * np.sin(TWO_PI * x)))
    assert st.sigma[1] == pytest.approx(-m / 2, abs=1e-15)


def test_find_translation_disc_pure_mode(disc):
    th = theta(disc)
    for eps in (1e-2, 1e-3, 1e-4):
        st = find_translation(disc, (eps * np.cos(th))[None])
        # the curve r + eps cos(theta) is the circle moved by +eps e_1; sigma moves it back
        err = np.linalg.norm(st.sigma - [-eps, 0.0])
        vl2 = math.sqrt(np.sum(st.v ** 2) * disc.grid.cell_area)
        assert err <= 0.1 * eps ** 2
        assert vl2 <= 10 * eps ** 2
        assert st.projection_defect <= 1e-8


def test_track_translations_zero_trajectory(disc):
    traj = Trajectory(disc.ref_id, [0.0, 1.0, 2.0], np.zeros((3,) + disc.grid.shape), "VPMCF")
    tt = track_translations(disc, traj)
    assert np.all(tt.sigmas == 0) and np.all(tt.cauchy == 0) and tt.fit is None


def test_track_translations_lamella_symmetric_run():
    from torusflow.reference import Kind, ReferenceSpec, make_reference
    ref = make_reference(ReferenceSpec(Kind.LAMELLA2D, n=64))
    u0 = generate_initial(ref, "single_mode", amplitude=1e-3, k=2)
    traj = run_flow(ref, u0, FlowConfig("VPMCF", dt=1e-3, t_end=0.05, snapshot_every=5))
    tt = track_translations(ref, traj)
    assert np.max(np.abs(tt.sigmas)) <= 1e-10
    assert np.all(tt.defects <= 0.1)
