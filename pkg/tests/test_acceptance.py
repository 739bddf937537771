"""Acceptance criteria, one test each; a summary line per criterion is printed at the end of the run."""

import math

import numpy as np

from impulse_gap import expr as ex
from impulse_gap.cli import main
from impulse_gap.extremal import check_conditions, classify_normality, make_certificate
from impulse_gap.fields import enumerate_family
from impulse_gap.gap import probe_gap
from impulse_gap.metric import dist_d, dist_dtilde, gronwall_certificate
from impulse_gap.process import (ControlSignal, TimeChange, canonicalize, embed, reparametrize, restrict,
                                 simulate_extended, simulate_strict)
from impulse_gap.scenario import shipped_scenario_path

from helpers import (GOLDEN_MATRIX, commutator_defect, polynomial_field, random_cone, random_control,
                     random_expression, random_strict_control, random_system, report_body)


def conclude(rec, passed, detail):
    elapsed = rec.finish(passed, detail)
    assert passed, detail
    assert elapsed < rec.limit, f"took {elapsed:.1f}s, limit {rec.limit}s"


def reference_setup(sc):
    z = sc.reference_extended()
    t, x, _ = z.endpoint()
    return (z, sc.target.approximating_cone(t, x), enumerate_family(sc.m1, sc.max_degree, "B0"),
            enumerate_family(sc.m1, sc.max_degree, "B1"))


def test_01_symbolic_derivatives(acceptance):
    rec = acceptance(1, "symbolic vs central-difference derivatives", 5)
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        e = ex.parse(random_expression(rng, n), n)
        x = rng.uniform(-1.5, 1.5, n)
        j = int(rng.integers(n))
        sym = ex.differentiate(e, j).evaluate(x)
        xp, xm = x.copy(), x.copy()
        xp[j] += 1e-6
        xm[j] -= 1e-6
        fd = (e.evaluate(xp) - e.evaluate(xm)) / 2e-6
        worst = max(worst, abs(sym - fd) / (1e-5 * (1 + abs(sym))))
    conclude(rec, worst <= 1.0, f"200 pairs, worst error / bound = {worst:.2e}")


def test_02_flow_commutator(acceptance):
    rec = acceptance(2, "Lie-bracket flow-commutator oracle", 30)
    rng = np.random.default_rng(102)
    ratios = []
    for i in range(10):
        n = 2 + i % 2
        h, k = polynomial_field(rng, n), polynomial_field(rng, n)
        x = rng.uniform(-0.5, 0.5, n)
        ratios.append(commutator_defect(h, k, x, 1e-3) / commutator_defect(h, k, x, 1e-4))
    conclude(rec, min(ratios) >= 3.0, f"10 pairs, smallest defect ratio = {min(ratios):.2f}")


def test_03_rate_independence(acceptance):
    rec = acceptance(3, "rate-independence and canonicalization", 60)
    rng = np.random.default_rng(103)
    end_err = idem_err = slice_err = 0.0
    for _ in range(100):
        n, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        sys = random_system(rng, n, m, random_cone(rng, m))
        z = simulate_extended(sys, random_control(rng, sys.cone), rng.uniform(-1, 1, n))
        k = int(rng.integers(1, 5))
        lengths, slopes = rng.dirichlet(np.ones(k)), rng.uniform(0.5, 2.0, k)
        sigma = TimeChange.from_slopes(lengths * z.horizon / float(lengths @ slopes), slopes)
        out = reparametrize(z, sigma)
        end_err = max(end_err, abs(out.y0[-1] - z.y0[-1]), float(np.max(np.abs(out.y[-1] - z.y[-1]))),
                      abs(out.beta[-1] - z.beta[-1]))
        c1 = canonicalize(z)
        c2 = canonicalize(c1)
        idem_err = max(idem_err, float(np.max(np.abs(c2.control.breakpoints - c1.control.breakpoints))),
                       dist_d(c1, c2).total, float(np.max(np.abs(c2.y - c1.y))))
        # The clock rate is constant per interval, so every grid node sees one of these values.
        slice_err = max(slice_err, float(np.max(np.abs(c1.control.clock_rate[c1.seg] - 1.0))))
    ok = end_err <= 1e-6 and idem_err <= 1e-9 and slice_err <= 1e-9
    conclude(rec, ok, f"100 pairs, endpoint {end_err:.2e}, idempotence {idem_err:.2e}, slice {slice_err:.2e}")


def test_04_distance_equivalence(acceptance):
    rec = acceptance(4, "distance equivalence d <= d~ <= 2d", 10)
    rng = np.random.default_rng(104)
    worst = -math.inf
    for _ in range(100):
        m = int(rng.integers(1, 4))
        cone = random_cone(rng, m)
        a = random_control(rng, cone, canonical=True)
        b = random_control(rng, cone, canonical=True)
        d, dt = dist_d(a, b).total, dist_dtilde(a, b).total
        worst = max(worst, d - dt, dt - 2 * d)
    conclude(rec, worst <= 1e-10, f"100 canonical pairs, worst violation = {worst:.2e}")


def _perturbed_pair(rng, sc_system):
    zbar_c = random_control(rng, sc_system.cone, canonical=True)
    scale = rng.uniform(0.01, 0.3)
    bp = zbar_c.breakpoints * (1 + scale * rng.uniform(-0.5, 0.5))
    bp[0] = 0.0
    w = np.array([sc_system.cone.project(v) for v in zbar_c.w + scale * rng.standard_normal(zbar_c.w.shape)])
    w0 = np.maximum(zbar_c.w0 + scale * rng.standard_normal(zbar_c.w0.shape), 0.0)
    rate = w0 + np.linalg.norm(w, axis=1)
    w0 = np.where(rate > 0, w0, 1.0)
    return zbar_c, ControlSignal(bp, w0, w)


def test_05_gronwall_certificate(acceptance, pure_jump, reach_point):
    rec = acceptance(5, "trajectory estimates with computed M, L, R", 120)
    rng = np.random.default_rng(105)
    systems = [pure_jump.system, reach_point.system]
    for n, m in ((2, 2), (3, 2), (2, 3)):
        systems.append(random_system(rng, n, m, random_cone(rng, m)))
    failures = 0
    worst = math.inf
    for i in range(200):
        sys = systems[i % 5]
        zbar_c, z_c = _perturbed_pair(rng, sys)
        x0 = rng.uniform(-0.5, 0.5, sys.n)
        zbar, z = simulate_extended(sys, zbar_c, x0), simulate_extended(sys, z_c, x0)
        lo = np.minimum(zbar.y.min(axis=0), z.y.min(axis=0)) - 0.5
        hi = np.maximum(zbar.y.max(axis=0), z.y.max(axis=0)) + 0.5
        cert = gronwall_certificate(z, zbar, (lo, hi))
        failures += not cert.passed
        worst = min(worst, min(cert.margins.values()))
    conclude(rec, failures == 0, f"200 pairs over 5 systems, {failures} failures, smallest margin {worst:.2e}")


def test_06_embed_restrict(acceptance):
    rec = acceptance(6, "embed/restrict bijection", 30)
    rng = np.random.default_rng(106)
    err = 0.0
    tags_ok = True
    for _ in range(50):
        n, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        sys = random_system(rng, n, m, random_cone(rng, m))
        p = simulate_strict(sys, random_strict_control(rng, sys.cone), rng.uniform(-1, 1, n))
        z = embed(p)
        tags_ok &= z.control.is_canonical() and z.control.is_strict_positive()
        q = restrict(z)
        err = max(err, abs(q.horizon - p.horizon), float(np.max(np.abs(q.control.u - p.control.u))),
                  float(np.max(np.abs(q.control.breakpoints - p.control.breakpoints))),
                  float(np.max(np.abs(q.x - p.x))), float(np.max(np.abs(q.v - p.v))))
    conclude(rec, err <= 1e-8 and tags_ok, f"50 processes, sup error {err:.2e}, canonical and strict-positive: {tags_ok}")


def test_07_extremality_ground_truth(acceptance, pure_jump, reach_point):
    rec = acceptance(7, "extremality checker ground truth", 60)
    z, Kc, B0, B1 = reference_setup(pure_jump)
    report = check_conditions(z, Kc, pure_jump.K, make_certificate(z, -1.0, [0.0], 0.0, 0.0), B0, B1,
                              tol=1e-6, cost=pure_jump.cost)
    jump = classify_normality(z, Kc, pure_jump.K, B0, B1)
    z2, Kc2, C0, C1 = reference_setup(reach_point)
    reach = classify_normality(z2, Kc2, reach_point.K, C0, C1)
    all_infeasible = len(reach.outcomes) == 2 * (z2.n + 2) and all(o.status == "infeasible" for o in reach.outcomes)
    ok = report.passed and jump.verdict == "Abnormal" and reach.verdict == "Normal" and all_infeasible
    conclude(rec, ok, f"hand certificate {'passes' if report.passed else 'fails'}, pure_jump {jump.verdict}, "
                      f"reach_point {reach.verdict} ({sum(o.status == 'infeasible' for o in reach.outcomes)}"
                      f"/{len(reach.outcomes)} normalizations infeasible)")


def test_08_gap_normality_consistency(acceptance, pure_jump, reach_point):
    rec = acceptance(8, "gap verdicts consistent with normality", 300)
    radii = (0.1, 0.3, 1.0)
    gap = probe_gap(pure_jump, pure_jump.reference_extended(), radii=radii, budget=2000)
    jump_feasible = sum(r.feasible_count for r in gap.records)
    nogap = probe_gap(reach_point, reach_point.reference_extended(), radii=radii, budget=2000)
    tight = nogap.record(radii[0], min(nogap.etas)).best_cost
    diff = abs(tight - nogap.reference_cost)
    ok = gap.verdict == "GapDetected" and jump_feasible == 0 and nogap.verdict == "NoGapEvidence" and diff <= 5e-3
    conclude(rec, ok, f"pure_jump {gap.verdict} with {jump_feasible} feasible samples; "
                      f"reach_point {nogap.verdict}, |best - reference| = {diff:.2e}")


def test_09_moreau(acceptance):
    rec = acceptance(9, "Moreau decomposition of the cone projection", 10)
    rng = np.random.default_rng(109)
    ortho = polar = 0.0
    for _ in range(500):
        m = int(rng.integers(1, 6))
        cone = random_cone(rng, m)
        ell = rng.standard_normal(m) * rng.uniform(0.1, 10)
        P = cone.project(ell)
        r = ell - P
        ortho = max(ortho, abs(float(r @ P)))
        if cone.generators.size:
            polar = max(polar, float(np.max(cone.generators.T @ r)))
    conclude(rec, ortho <= 1e-9 and polar <= 1e-9, f"500 instances, orthogonality {ortho:.2e}, polar {polar:.2e}")


def test_10_determinism(acceptance, tmp_path):
    rec = acceptance(10, "byte-identical reports across runs", 120)
    mismatches = []
    for sc, command, extra in GOLDEN_MATRIX:
        bodies = []
        for run in range(2):
            out = tmp_path / f"{sc}_{command}_{run}.json"
            code = main([command, "--scenario", str(shipped_scenario_path(sc)), *extra, "--out", str(out)])
            assert code == 0
            bodies.append(report_body(out.read_text()))
        if bodies[0] != bodies[1]:
            mismatches.append(f"{sc}/{command}")
    conclude(rec, not mismatches, f"{len(GOLDEN_MATRIX)} commands, mismatches: {mismatches or 'none'}")
