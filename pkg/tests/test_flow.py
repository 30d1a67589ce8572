import math

import numpy as np
import pytest
from scipy.optimize import bisect

from torusflow.errors import ConfigError, StepFailed
from torusflow.flow import (FlowConfig, initial_state, mild_solve, nonlinear_residual,
                            project_volume, rhs_sdf, rhs_vpmcf, run_flow, step_imex)
from torusflow.geometry import enclosed_volume
from torusflow.initial import generate_initial, random_band_limited
from torusflow.reference import Kind, ReferenceSpec, make_reference

from conftest import TWO_PI, theta, top, xcoord


@pytest.fixture(scope="module")
def lam64():
    return make_reference(ReferenceSpec(Kind.LAMELLA2D, n=64))


@pytest.mark.parametrize("rhs", [rhs_vpmcf, rhs_sdf])
def test_stationary_states(disc, lam, rhs):
    assert np.max(np.abs(rhs(lam, np.zeros(lam.grid.shape)))) == 0.0
    assert np.max(np.abs(rhs(disc, np.zeros(disc.grid.shape)))) <= 1e-12
    # concentric circles
    assert np.max(np.abs(rhs(disc, np.full(disc.grid.shape, 0.02)))) <= 1e-10


@pytest.mark.parametrize("rhs,power", [(rhs_vpmcf, 2), (rhs_sdf, 4)])
def test_linearized_single_mode(lam, rhs, power):
    eps = 1e-4
    s = np.sin(TWO_PI * xcoord(lam))
    got = rhs(lam, top(lam, eps * s))[1]
    lin = -eps * TWO_PI ** power * s
    assert np.max(np.abs(got - lin)) <= 1e-4 * np.max(np.abs(lin))


def test_vpmcf_sign_decreases_perimeter(disc):
    th = theta(disc)
    u = (0.01 * np.cos(3 * th))[None]
    cfg = FlowConfig("VPMCF", dt=1e-5)
    st = initial_state(disc, u, cfg)
    st1, rep = step_imex(disc, st, cfg)
    assert rep.perimeter_after < rep.perimeter_before


def test_zero_is_fixed_point(lam):
    cfg = FlowConfig("SDF", dt=1e-6)
    st = initial_state(lam, np.zeros(lam.grid.shape), cfg)
    st1, rep = step_imex(lam, st, cfg)
    assert np.all(st1.u == 0.0)
    traj = run_flow(lam, np.zeros(lam.grid.shape), FlowConfig("VPMCF", dt=1e-3, t_end=0.01))
    assert np.all(traj.fields == 0.0) and len(traj) == 11


def test_single_step_decay_factor(lam):
    eps = 1e-7
    u = top(lam, eps * np.sin(TWO_PI * xcoord(lam)))
    k = np.argmax(u[1])
    errs = []
    for dt in (1e-3, 5e-4):
        cfg = FlowConfig("VPMCF", dt=dt)
        st1, _ = step_imex(lam, initial_state(lam, u, cfg), cfg)
        errs.append(abs(st1.u[1, k] / u[1, k] - math.exp(-dt * TWO_PI ** 2)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("fk,dt", [("VPMCF", 1e-4), ("SDF", 1e-6)])
def test_volume_drift_second_order_and_projection(disc, fk, dt):
    th = theta(disc)
    u = (1e-2 * np.cos(2 * th) + 5e-3 * np.sin(3 * th))[None]
    drifts = []
    for h in (dt, dt / 2):
        cfg = FlowConfig(fk, dt=h)
        _, rep = step_imex(disc, initial_state(disc, u, cfg), cfg)
        drifts.append(abs(rep.volume_drift_before_projection))
        assert abs(rep.volume_after - disc.volume) / disc.volume <= 1e-12
    assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.1)


def test_projection_examples(lam, disc):
    z = np.zeros(lam.grid.shape)
    v, lam_ = project_volume(lam, z)
    assert lam_ == 0.0 and np.all(v == z)
    m = 0.013
    u = m + 0.01 * np.sin(TWO_PI * lam.grid.mesh()[0])
    v, lam_ = project_volume(lam, u)
    assert lam_ == pytest.approx(-m, abs=1e-15)
    # disc: closed-form area of a radial graph and a bisection oracle
    th = theta(disc)
    u = (0.01 + 0.004 * np.cos(2 * th) - 0.002 * np.sin(5 * th))[None]
    v, lam_ = project_volume(disc, u)

    def area(c):
        return 0.5 * np.mean((0.25 + u[0] + c) ** 2) * TWO_PI - disc.volume

    oracle = bisect(area, -0.05, 0.05, xtol=1e-16, rtol=1e-15, maxiter=200)
    assert lam_ == pytest.approx(oracle, abs=1e-12)
    assert enclosed_volume(disc, v) == pytest.approx(disc.volume, rel=1e-14)


def test_nonlinear_residual_vanishes_on_translates(lam64):
    assert np.all(nonlinear_residual(lam64, np.zeros(lam64.grid.shape)) == 0.0)
    c = np.full(lam64.grid.shape, 0.03)
    assert np.all(nonlinear_residual(lam64, c) == 0.0)
    assert np.all(nonlinear_residual(lam64, c, "VPMCF") == 0.0)


def test_nonlinear_residual_structure_on_flat_base(lam64):
    # H is odd in u on a flat base, so the residual has no quadratic part:
    # ||f[eps phi]|| / eps^3 is constant while / eps^2 is not
    for seed in range(3):
        phi = random_band_limited(lam64, 4, seed)
        f = {e: float(np.max(np.abs(nonlinear_residual(lam64, e * phi)))) for e in (1e-3, 1e-4)}
        r3 = [f[e] / e ** 3 for e in f]
        assert r3[0] == pytest.approx(r3[1], rel=1e-3)
        assert f[1e-3] / 1e-6 > 5 * f[1e-4] / 1e-8
        odd = nonlinear_residual(lam64, -1e-3 * phi) + nonlinear_residual(lam64, 1e-3 * phi)
        assert np.max(np.abs(odd)) <= 1e-10 * f[1e-3]


def test_run_flow_vpmcf_decay(lam64):
    u0 = generate_initial(lam64, "random_band_limited", kmax=4, seed=5, c11_target=1e-2)
    traj = run_flow(lam64, u0, FlowConfig("VPMCF", dt=1e-3, t_end=0.2, snapshot_every=50))
    assert np.max(np.abs(traj.fields[-1])) < 1e-3 * np.max(np.abs(u0))


def test_run_flow_sdf_decay(lam64):
    u0 = generate_initial(lam64, "random_band_limited", kmax=4, seed=5, c11_target=1e-2)
    traj = run_flow(lam64, u0, FlowConfig("SDF", dt=1e-5, t_end=0.005, snapshot_every=100))
    assert np.max(np.abs(traj.fields[-1])) < 1e-3 * np.max(np.abs(u0))
    gaps = [r.perimeter_after for r in traj.reports]
    assert np.all(np.diff(gaps) <= 1e-12 * lam64.perimeter)


def test_translation_equivariance_without_projection(lam64):
    u0 = 0.01 * random_band_limited(lam64, 3, 1)
    cfg = FlowConfig("VPMCF", dt=1e-4, t_end=5e-3, volume_projection=False, snapshot_every=10)
    a = run_flow(lam64, u0, cfg)
    b = run_flow(lam64, u0 + 0.02, cfg)
    assert np.max(np.abs(b.fields - 0.02 - a.fields)) <= 1e-13


def test_translation_equivariance_with_projection(lam64):
    u0 = 0.01 * random_band_limited(lam64, 3, 1)
    cfg = FlowConfig("SDF", dt=1e-6, t_end=1e-4, snapshot_every=20)
    a = run_flow(lam64, u0, cfg)
    b = run_flow(lam64, u0 + 0.02, cfg)
    da = a.fields - a.fields.mean(axis=-1, keepdims=True)
    db = b.fields - b.fields.mean(axis=-1, keepdims=True)
    assert np.max(np.abs(da - db)) <= 1e-13


def test_step_failure_after_halvings(lam64):
    u0 = 0.01 * random_band_limited(lam64, 3, 1)
    cfg = FlowConfig("VPMCF", dt=1e-4, t_end=1e-3, monotone_tol=-1.0, max_halvings=2)
    with pytest.raises(StepFailed, match="failure at t="):
        run_flow(lam64, u0, cfg)


@pytest.mark.parametrize("kw", [dict(flow_kind="MCF"), dict(dt=0.0), dict(imex_theta=0.3),
                                dict(snapshot_every=0)])
def test_flow_config_validation(kw):
    with pytest.raises(ConfigError):
        FlowConfig(**kw)


def test_mild_solve_zero_and_guard(lam64):
    res = mild_solve(lam64, np.zeros(lam64.grid.shape), 1e-3, n_steps=10)
    assert np.all(res.trajectory.fields == 0.0)
    with pytest.raises(ConfigError):
        mild_solve(lam64, np.full(lam64.grid.shape, 0.02), 1e-3)
    disc = make_reference(ReferenceSpec(Kind.DISC2D, n=32))
    with pytest.raises(ConfigError):
        mild_solve(disc, np.zeros(disc.grid.shape), 1e-3)


def test_mild_solve_contracts_and_matches_imex(lam64):
    u0 = top(lam64, 1e-3 * np.sin(TWO_PI * xcoord(lam64)))
    T = 1e-3
    res = mild_solve(lam64, u0, T, n_steps=100)
    assert res.ratios and all(r < 1 for r in res.ratios)
    imex = run_flow(lam64, u0, FlowConfig("SDF", dt=1e-6, t_end=T, imex_theta=0.5, snapshot_every=100))
    diff = np.max(np.abs(res.trajectory.fields[-1] - imex.fields[-1]))
    assert diff <= 1e-5 * np.max(np.abs(imex.fields))
