"""The acceptance suite behind ``verify-all``.

Each check returns a CriterionResult.  ``verify_all`` writes one NDJSON line
per criterion to ``verify.ndjson`` (no timings, so identical inputs give an
identical stream) and wall times to ``verify_timing.json``.
"""

from dataclasses import asdict, dataclass, field
import filecmp
import json
import math
from pathlib import Path
import tempfile
import time

import numpy as np

from .diagnostics import (dissipation_residuals, fit_rate, isoperimetric_check, linearized_constants)
from .errors import NumericalFailure
from .flow import FlowConfig, mild_solve, nonlinear_residual, rhs, run_flow
from .initial import generate_initial, random_band_limited
from .io import dumps, write_ndjson
from .linear import semigroup_estimate_check, weighted_semigroup_sup
from .norms import ck_norm
from .reference import Kind, ReferenceSpec, make_reference, stability_spectrum
from .runner import PhaseError, execute, presets, run_experiment, write_outputs

TWO_PI = 2 * math.pi


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    target: str = ""
    error: str = None
    numerical_failure: bool = False

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        extra = f" error={self.error}" if self.error else ""
        return f"[{tag}] criterion {self.number:2d} {self.name}: {self.target}{extra}"

    def to_dict(self):
        return asdict(self)


class _Context:
    """Shared trajectory runs (several criteria read the same presets)."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.runs = {}
        self.timing = {}

    def run(self, key, cfg):
        if key not in self.runs:
            t0 = time.perf_counter()
            res = execute(cfg)
            self.timing[key] = time.perf_counter() - t0
            write_outputs(self.out / key, res)
            self.runs[key] = res
        return self.runs[key]


def _lamella_presets(ctx, n, asymmetry=True):
    out = {}
    for flow in ("vpmcf", "sdf"):
        cfg = presets(n_lamella=n)[f"lamella-{flow}-rate"]
        cfg.diagnostics.asymmetry = asymmetry
        out[flow] = ctx.run(f"lamella-{flow}-rate-n{n}", cfg)
    return out


def _disc_preset(ctx, n, asymmetry=True):
    cfg = presets(n_disc=n)["disc-vpmcf-translate"]
    cfg.diagnostics.asymmetry = asymmetry
    return ctx.run(f"disc-vpmcf-translate-n{n}", cfg)


# --------------------------------------------------------------------------
# criteria
# --------------------------------------------------------------------------

def catalogue():
    return [ReferenceSpec(Kind.LAMELLA2D, n=128), ReferenceSpec(Kind.LAMELLA3D, n=32),
            ReferenceSpec(Kind.DISC2D, radius=0.25, n=128),
            ReferenceSpec(Kind.CYLINDER3D, radius=0.25, n=32),
            ReferenceSpec(Kind.CYLINDER3D, radius=1 / (4 * math.pi), n=32)]


def c01_stationarity(ctx):
    refs = [make_reference(s) for s in catalogue()]
    t0 = time.perf_counter()
    worst = 0.0
    per = {}
    for ref in refs:
        for fk in ("VPMCF", "SDF"):
            v = float(np.max(np.abs(rhs(ref, np.zeros(ref.grid.shape), fk))))
            per[f"{ref.kind.value}(r={ref.spec.radius:.4g})/{fk}"] = v
            worst = max(worst, v)
    elapsed = time.perf_counter() - t0
    ctx.timing["c01"] = elapsed
    return CriterionResult(1, "stationarity", worst <= 1e-12 and elapsed < 1.0,
                           {"max_rhs": worst, "per_reference": per},
                           f"max ||RHS(0)||_C0 = {worst:.2e} <= 1e-12, runtime < 1 s")


def c02_volume(ctx):
    ref = make_reference(ReferenceSpec(Kind.LAMELLA2D, n=256))
    u0 = generate_initial(ref, "random_band_limited", kmax=4, seed=0, c11_target=1e-2)
    meas = {}
    for fk, te in (("VPMCF", 0.05), ("SDF", 0.002)):
        traj = run_flow(ref, u0, FlowConfig(fk, dt=1e-5, t_end=te, snapshot_every=100))
        drift = max(abs(r.volume_after - ref.volume) / ref.volume for r in traj.reports)
        meas[fk] = drift
    ok = all(v <= 1e-10 for v in meas.values())
    return CriterionResult(2, "volume conservation", ok, {"max_relative_drift": meas},
                           f"max drift VPMCF {meas['VPMCF']:.2e}, SDF {meas['SDF']:.2e} <= 1e-10")


def c03_dissipation(ctx):
    ref = make_reference(ReferenceSpec(Kind.LAMELLA2D, n=128))
    u0 = generate_initial(ref, "random_band_limited", kmax=2, seed=1, c11_target=1e-2)
    meas = {}
    ok = True
    tol = 1e-12 * ref.perimeter
    for fk, dt, nsteps in (("VPMCF", 1e-4, 100), ("SDF", 1e-6, 20)):
        first, peak, worst_inc = [], [], -math.inf
        for h in (dt, dt / 2):
            traj = run_flow(ref, u0, FlowConfig(fk, dt=h, t_end=nsteps * dt, snapshot_every=1))
            worst_inc = max(worst_inc, max(r.perimeter_after - r.perimeter_before for r in traj.reports))
            _, res = dissipation_residuals(ref, traj)
            m = int(round(dt / h))
            common = res[::m][:nsteps]
            first.append(abs(common[0]))
            peak.append(float(np.max(np.abs(common))))
        f_first = first[0] / first[1]
        f_peak = peak[0] / peak[1]
        meas[fk] = {"factor_first_step": f_first, "factor_max": f_peak, "max_step_increase": worst_inc}
        ok &= worst_inc <= tol and 1.8 <= f_first <= 2.2 and 1.8 <= f_peak <= 2.2
    return CriterionResult(3, "perimeter monotonicity and dissipation identity", ok, meas,
                           "residual factor at dt -> dt/2: VPMCF {:.3f}, SDF {:.3f} in [1.8, 2.2]; "
                           "max dP per step {:.1e} <= 1e-12 P(E)".format(
                               meas["VPMCF"]["factor_max"], meas["SDF"]["factor_max"],
                               max(meas["VPMCF"]["max_step_increase"], meas["SDF"]["max_step_increase"])))


def c04_rates(ctx):
    runs = _lamella_presets(ctx, 128)
    meas = {}
    ok = True
    for flow, target in (("vpmcf", 2 * TWO_PI ** 2), ("sdf", 2 * TWO_PI ** 4)):
        fit = runs[flow].summary["fits"]["perimeter_gap"]
        rel = fit["rate"] / target - 1
        t = ctx.timing[f"lamella-{flow}-rate-n128"]
        meas[flow] = {"rate": fit["rate"], "target": target, "relative_error": rel,
                      "r_squared": fit["r_squared"]}
        ok &= abs(rel) <= 0.05 and t < 30.0
    return CriterionResult(4, "exponential convergence rates", ok, meas,
                           "VPMCF {:.3f} vs 78.957, SDF {:.1f} vs 3117.1 (5%), runtime < 30 s".format(
                               meas["vpmcf"]["rate"], meas["sdf"]["rate"]))


def c05_disc(ctx):
    res = _disc_preset(ctx, 128)
    recs = res.records
    alpha_end = recs[-1].asymmetry
    tr = res.summary["translations"]
    fitc = tr["fit"]
    k2_mode = 3 / 0.25 ** 2
    fit = res.summary["fits"]["perimeter_gap"]
    ok = (alpha_end < 1e-6 and fitc is not None and fitc["rate"] >= 0.9 * k2_mode
          and fitc["r_squared"] >= 0.99 and abs(fit["rate"] / 96.0 - 1) <= 0.10)
    meas = {"alpha_end": alpha_end, "energy_rate": fit["rate"], "energy_target": 96.0,
            "cauchy_rate": fitc["rate"] if fitc else None, "cauchy_r_squared": fitc["r_squared"] if fitc else None,
            "sigma_end": tr["sigma_end"]}
    return CriterionResult(5, "disc convergence to a translate", ok, meas,
                           "alpha(t_end) {:.1e} < 1e-6; energy rate {:.2f} vs 96 (10%); "
                           "Cauchy modulus rate {:.2f} >= 0.9 * 48 (r^2 {:.4f} >= 0.99)".format(
                               alpha_end, fit["rate"], fitc["rate"] if fitc else float("nan"),
                               fitc["r_squared"] if fitc else float("nan")))


def _max_key(recs, key):
    vals = [getattr(r, key) for r in recs if getattr(r, key) is not None]
    return max(vals) if vals else None


def c06_alexandrov(ctx):
    lam = _lamella_presets(ctx, 128)
    disc = _disc_preset(ctx, 128)
    lam2 = _lamella_presets(ctx, 256)
    disc2 = _disc_preset(ctx, 256, asymmetry=False)
    lin_lam = linearized_constants(lam["vpmcf"].ref)["alexandrov"]
    lin_disc = linearized_constants(disc.ref)["alexandrov"]
    meas = {}
    ok = True
    for name, res, res2, lin in (("lamella-vpmcf", lam["vpmcf"], lam2["vpmcf"], lin_lam),
                                 ("lamella-sdf", lam["sdf"], lam2["sdf"], lin_lam),
                                 ("disc-vpmcf", disc, disc2, lin_disc)):
        q = _max_key(res.records, "alexandrov_quotient")
        q2 = _max_key(res2.records, "alexandrov_quotient")
        dmax = max(r.projection_defect for r in res.records)
        meas[name] = {"max_quotient": q, "linearized": lin, "refined": q2,
                      "refinement_change": abs(q2 / q - 1), "max_projection_defect": dmax}
        ok &= q <= 1.1 * lin and abs(q2 / q - 1) <= 0.05 and dmax <= 0.1
    return CriterionResult(6, "Alexandrov quotient", ok, meas,
                           "max quotient / linearized: " + ", ".join(
                               f"{k} {v['max_quotient'] / v['linearized']:.4f}" for k, v in meas.items())
                           + " <= 1.1; refinement change <= 5%")


def c07_isoperimetric(ctx):
    lam = _lamella_presets(ctx, 128)
    lam2 = _lamella_presets(ctx, 256)
    meas = {}
    ok = True
    for flow in ("vpmcf", "sdf"):
        c1 = isoperimetric_check(lam[flow].records)
        c2 = isoperimetric_check(lam2[flow].records)
        meas[flow] = {"constant": c1, "refined": c2, "change": abs(c2 / c1 - 1),
                      "single_mode_prediction": 4 / math.pi ** 4}
        ok &= math.isfinite(c1) and abs(c2 / c1 - 1) <= 0.10
    return CriterionResult(7, "quantitative isoperimetric constant", ok, meas,
                           "max alpha^2/gap VPMCF {:.5f}, SDF {:.5f}; refinement change <= 10%".format(
                               meas["vpmcf"]["constant"], meas["sdf"]["constant"]))


def c08_schauder(ctx):
    ref = make_reference(ReferenceSpec(Kind.LAMELLA2D, n=64))
    tab = semigroup_estimate_check(ref, 100, k_max=2, l_max=1, T=1.0, seed=0)
    worst_ratio = max(tab.ratios.values())
    x = ref.grid.mesh()[0]
    worst_mode = 0.0
    for k in (1, 3):
        u = np.zeros(ref.grid.shape)
        u[1] = np.sin(TWO_PI * k * x[1])
        u /= ck_norm(ref, u, 2)
        w = TWO_PI * k
        a = 1 / (1 + w + w * w)
        for (l, kk) in tab.constants:
            p = l + kk / 4
            exact = a * w ** (4 * l + kk + 2) * ((p / w ** 4) ** p * math.exp(-p) if p > 0 else 1.0)
            worst_mode = max(worst_mode, abs(weighted_semigroup_sup(ref, u, l, kk, 1.0) / exact - 1))
    ok = worst_ratio <= 10 and worst_mode <= 1e-8
    meas = {"constants": {f"{l},{k}": v for (l, k), v in tab.constants.items()},
            "ratios": {f"{l},{k}": v for (l, k), v in tab.ratios.items()},
            "pure_mode_relative_error": worst_mode}
    return CriterionResult(8, "semigroup Schauder constants", ok, meas,
                           f"max/min ratio {worst_ratio:.3f} <= 10; pure modes rel. error {worst_mode:.1e} <= 1e-8")


def c09_mild(ctx):
    ref = make_reference(ReferenceSpec(Kind.LAMELLA2D, n=64))
    x = ref.grid.mesh()[0]
    u0 = np.zeros(ref.grid.shape)
    u0[1] = 1e-3 * np.sin(TWO_PI * x[1])
    T = 1e-3
    full = mild_solve(ref, u0, T, n_steps=100)
    half = mild_solve(ref, u0, T / 2, n_steps=100)
    imex = run_flow(ref, u0, FlowConfig("SDF", dt=1e-6, t_end=T, imex_theta=0.5, snapshot_every=10))
    mt = full.trajectory
    diff = 0.0
    for t, u in zip(imex.times, imex.fields):
        j = int(np.argmin(np.abs(mt.times - t)))
        if abs(mt.times[j] - t) < 1e-12:
            diff = max(diff, float(np.max(np.abs(mt.fields[j] - u))))
    rel = diff / float(np.max(np.abs(imex.fields)))
    contract = bool(full.ratios) and all(r < 1 for r in full.ratios)
    decreasing = bool(full.ratios and half.ratios) and half.ratios[0] < full.ratios[0]
    ok = contract and decreasing and rel <= 1e-5
    meas = {"ratios_T": full.ratios, "ratios_T_half": half.ratios, "relative_sup_difference": rel,
            "contracting": contract, "decreasing_with_T": decreasing}
    return CriterionResult(9, "mild-solution cross-validation", ok, meas,
                           "ratios(T) {} < 1; ratios(T/2) {} < ratios(T): {}; IMEX match {:.1e} <= 1e-5".format(
                               [f"{r:.3e}" for r in full.ratios], [f"{r:.3e}" for r in half.ratios],
                               decreasing, rel))


def c10_residual_scaling(ctx):
    ref = make_reference(ReferenceSpec(Kind.LAMELLA2D, n=64))
    f0 = float(np.max(np.abs(nonlinear_residual(ref, np.zeros(ref.grid.shape), "SDF"))))
    spreads = []
    table = {}
    for seed in range(10):
        phi = random_band_limited(ref, 4, seed)
        r = [float(np.max(np.abs(nonlinear_residual(ref, e * phi, "SDF")))) / e ** 2
             for e in (1e-2, 1e-3, 1e-4)]
        table[seed] = r
        spreads.append(max(r) / min(r))
    worst = max(spreads)
    ok = f0 == 0.0 and worst <= 2.0
    return CriterionResult(10, "nonlinear residual scaling", ok,
                           {"f_zero": f0, "ratios_per_seed": table, "max_spread": worst},
                           f"f[0] = {f0:.1e} (exact 0); max over seeds of max/min ||f[eps phi]||/eps^2 = {worst:.1f} <= 2")


def c11_spectrum(ctx):
    cyl_thin = stability_spectrum(make_reference(ReferenceSpec(Kind.CYLINDER3D, radius=1 / (4 * math.pi), n=32)), 3)
    cyl = stability_spectrum(make_reference(ReferenceSpec(Kind.CYLINDER3D, radius=0.25, n=32)), 3)
    disc = stability_spectrum(make_reference(ReferenceSpec(Kind.DISC2D, radius=0.25, n=128)), 8)
    trans = max(abs(v) for _, v in disc.translations)
    ok = cyl_thin.min_eigenvalue < 0 and cyl.strictly_stable and cyl.min_eigenvalue > 0 and trans <= 1e-10
    meas = {"thin_cylinder_min": cyl_thin.min_eigenvalue, "cylinder_min": cyl.min_eigenvalue,
            "disc_translation_quotients": [v for _, v in disc.translations], "disc_min": disc.min_eigenvalue}
    return CriterionResult(11, "stability spectrum", ok, meas,
                           f"r=1/(4pi) min {cyl_thin.min_eigenvalue:.3f} < 0; r=0.25 min {cyl.min_eigenvalue:.3f} > 0; "
                           f"disc translations {trans:.1e} <= 1e-10")


def c12_determinism(ctx):
    cfg = presets()["lamella-random-small"]
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        run_experiment(cfg, a)
        run_experiment(cfg, b)
        ra, rb = Path(a) / cfg.name, Path(b) / cfg.name
        names = ["diagnostics.ndjson", "trajectory/steps.ndjson", "summary.json"] + sorted(
            p.relative_to(ra).as_posix() for p in (ra / "trajectory").glob("*.tfh"))
        same = all(filecmp.cmp(ra / n, rb / n, shallow=False) for n in names)
    return CriterionResult(12, "determinism", same, {"files_compared": len(names)},
                           f"two runs of {cfg.name}: {len(names)} output files byte-identical")


CRITERIA = [c01_stationarity, c02_volume, c03_dissipation, c04_rates, c05_disc, c06_alexandrov,
            c07_isoperimetric, c08_schauder, c09_mild, c10_residual_scaling, c11_spectrum,
            c12_determinism]


def run_criterion(fn, ctx):
    try:
        return fn(ctx)
    except (NumericalFailure, PhaseError) as exc:
        num = isinstance(exc, NumericalFailure) or isinstance(getattr(exc, "original", None), NumericalFailure)
        return CriterionResult(CRITERIA.index(fn) + 1, fn.__name__[4:], False, error=str(exc),
                               numerical_failure=num)


@dataclass
class VerifyReport:
    results: list
    stream: Path
    timing: dict

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def numerical_failure(self):
        return any(r.numerical_failure for r in self.results)


def verify_all(output_dir, only=None, echo=None) -> VerifyReport:
    """Run the acceptance criteria (all, or the numbers in ``only``)."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(out / "runs")
    results = []
    for i, fn in enumerate(CRITERIA, start=1):
        if only and i not in only:
            continue
        t0 = time.perf_counter()
        res = run_criterion(fn, ctx)
        ctx.timing[f"criterion_{i}"] = time.perf_counter() - t0
        results.append(res)
        if echo:
            echo(res.line())
    stream = out / "verify.ndjson"
    write_ndjson(stream, results)
    (out / "verify_timing.json").write_text(json.dumps(ctx.timing, indent=2, sort_keys=True) + "\n")
    (out / "verify_summary.json").write_text(dumps({"passed": all(r.passed for r in results),
                                                    "criteria": {r.number: r.passed for r in results}}) + "\n")
    return VerifyReport(results, stream, ctx.timing)
