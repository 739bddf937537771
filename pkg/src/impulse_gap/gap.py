"""Empirical probe for a local infimum gap around an extended process.

A gap at ``zbar`` means that every feasible strict-sense process whose canonical
embedding lies within control distance ``r`` of ``zbar`` costs strictly more
than ``zbar``. The probe samples canonical strict-positive controls inside the
ball, simulates them, keeps the ones feasible up to ``eta`` and compares the
best cost found with the reference cost. It reports evidence, not a proof.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .metric import dist_d
from .process import ControlSignal, ExtendedProcess, check_feasible, simulate_extended

DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)
DEFAULT_ETAS = (1e-2, 3e-3, 1e-3)
VERDICTS = ("GapDetected", "NoGapEvidence", "Undetermined")


class InfeasibleReference(InputError):
    pass


# ---------------------------------------------------------------------------
# Controls inside the ball


def _canonical(lengths: np.ndarray, w0: np.ndarray, w: np.ndarray) -> ControlSignal:
    """Rescale pieces onto the canonical slice, stretching their lengths by the clock rate."""
    rate = w0 + np.linalg.norm(w, axis=1)
    bp = np.concatenate([[0.0], np.cumsum(lengths * rate)])
    return ControlSignal(bp, w0 / rate, w / rate[:, None])


def lift_control(control: ControlSignal, eps: float) -> ControlSignal:
    """Raise ``w0`` to at least ``eps`` on every interval and return the canonical control."""
    if not 0 < eps <= 1:
        raise InputError(f"epsilon must lie in (0, 1], got {eps}")
    if np.all(control.w0 >= eps) and control.is_canonical(1e-12):
        return control
    return _canonical(control.lengths, np.maximum(control.w0, eps), np.array(control.w))


def epsilon_lift(z: ExtendedProcess, eps: float) -> ExtendedProcess:
    """Canonical strict-positive process obtained by flooring the clock rate at ``eps``."""
    c = lift_control(z.control, eps)
    if c is z.control:
        return z
    return simulate_extended(z.system, c, z.x0, z.h)


def _perturb(ref: ControlSignal, r: float, rng: np.random.Generator, cone, eps_min: float) -> ControlSignal:
    S = ref.horizon
    extra = rng.uniform(0.0, S, size=int(rng.integers(0, 6)))
    pts = np.union1d(ref.breakpoints, extra)
    pts = pts[np.concatenate([[True], np.diff(pts) > 1e-9 * S])]
    pts[-1] = S
    mids = 0.5 * (pts[:-1] + pts[1:])
    idx = ref.interval_index(mids)
    P = mids.size
    w0 = ref.w0[idx].copy()
    w = ref.w[idx].copy()
    amp = r * rng.uniform(0.05, 1.0) / (S * math.sqrt(1 + ref.m))
    mask = rng.random(P) < 0.5
    mask[int(rng.integers(P))] = True
    w0 += mask * amp * rng.standard_normal(P)
    w += mask[:, None] * amp * rng.standard_normal((P, ref.m))
    w = np.array([cone.project(v) for v in w]) if ref.m else w
    w0 = np.maximum(w0, eps_min)
    c = _canonical(np.diff(pts), w0, w)
    jitter = 1.0 + rng.uniform(-1.0, 1.0) * rng.random() * min(r / (2.0 * c.horizon), 0.5)
    return ControlSignal(c.breakpoints * jitter, c.w0, c.w)


def sample_ball(zbar: ExtendedProcess, r: float, budget: int, seed: int = 0,
                epsilons: Sequence[float] = DEFAULT_EPSILONS) -> list[ControlSignal]:
    """Canonical strict-positive controls with ``d(., zbar) < r``, deterministic in ``seed``.

    At most ``budget`` candidates are tried: the reference itself when it is
    strict-positive, its epsilon-lifts, then random perturbations that are
    refined, projected onto the cone, floored at ``min(epsilons)``, put on the
    canonical slice and jittered in horizon by less than ``r / 2``. Every
    returned control passes an exact distance recheck.
    """
    if r <= 0:
        raise InputError("radius must be positive")
    ref = zbar.control
    cone = zbar.system.cone
    eps_min = min(epsilons)
    rng = np.random.default_rng(seed)
    candidates: list[ControlSignal] = []
    if ref.is_strict_positive() and ref.is_canonical():
        candidates.append(ref)
    for eps in epsilons:
        lifted = lift_control(ref, eps)
        if lifted is not ref:
            candidates.append(lifted)
    out = []
    tried = 0
    for c in candidates:
        if tried >= budget:
            return out
        tried += 1
        if dist_d(c, ref).total < r:
            out.append(c)
    while tried < budget:
        tried += 1
        c = _perturb(ref, r, rng, cone, eps_min)
        if dist_d(c, ref).total < r:
            out.append(c)
    return out


# ---------------------------------------------------------------------------
# Probe


def _endpoints(args) -> list[tuple[float, tuple[float, ...], float]]:
    system, x0, h, controls = args
    out = []
    for c in controls:
        z = simulate_extended(system, c, x0, h)
        t, x, b = z.endpoint()
        out.append((t, tuple(x), b))
    return out


@dataclass
class _Sample:
    control: ControlSignal
    d: float
    t: float
    x: tuple[float, ...]
    beta: float
    target_distance: float
    cost: float


@dataclass(frozen=True)
class GapRecord:
    radius: float
    eta: float
    best_cost: float
    feasible_count: int
    samples_in_ball: int
    best_distance: float

    def to_dict(self) -> dict:
        return {"radius": self.radius, "eta": self.eta,
                "best_cost": None if not math.isfinite(self.best_cost) else self.best_cost,
                "feasible_count": self.feasible_count, "samples_in_ball": self.samples_in_ball,
                "best_distance": None if not math.isfinite(self.best_distance) else self.best_distance}


@dataclass
class GapReport:
    reference_cost: float
    margin: float
    records: list[GapRecord]
    verdict: str
    seed: int
    budget: int
    radii: tuple[float, ...]
    etas: tuple[float, ...]
    notes: list[str] = field(default_factory=list)

    def record(self, r: float, eta: float) -> GapRecord:
        for rec in self.records:
            if rec.radius == r and rec.eta == eta:
                return rec
        raise KeyError((r, eta))

    def best_cost(self, r: float) -> float:
        return min((rec.best_cost for rec in self.records if rec.radius == r), default=math.inf)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "reference_cost": self.reference_cost, "margin": self.margin,
                "seed": self.seed, "budget": self.budget, "radii": list(self.radii), "etas": list(self.etas),
                "records": [r.to_dict() for r in self.records], "notes": list(self.notes)}

    def csv_rows(self) -> list[list]:
        rows = [["r", "eta", "best_cost", "feasible_count"]]
        for rec in self.records:
            rows.append([repr(rec.radius), repr(rec.eta), repr(rec.best_cost), rec.feasible_count])
        return rows


def _simulate_all(system, x0, h, controls, jobs: int):
    if jobs <= 1 or len(controls) < 2 * jobs:
        return _endpoints((system, x0, h, controls))
    chunks = [controls[i::jobs] for i in range(jobs)]
    with ProcessPoolExecutor(jobs) as pool:
        parts = list(pool.map(_endpoints, [(system, x0, h, ch) for ch in chunks]))
    out = [None] * len(controls)
    for j, part in enumerate(parts):
        out[j::jobs] = part
    return out


def _repair(problem, ref: ControlSignal, c: ControlSignal, r: float, eps_min: float, h: float,
            iterations: int = 4, fd_step: float = 1e-6) -> ControlSignal | None:
    """Damped Gauss-Newton on per-piece control values to pull the endpoint onto the target.

    Trial controls leaving the ball are halved back towards the current iterate,
    so nothing outside ``d < r`` is ever simulated.
    """
    sysm = problem.system
    base = np.concatenate([c.w0[:, None], c.w], axis=1)
    P, k = base.shape

    def build(theta):
        vals = base + theta.reshape(P, k)
        w = np.array([sysm.cone.project(v) for v in vals[:, 1:]]) if sysm.m else vals[:, 1:]
        return _canonical(c.lengths, np.maximum(vals[:, 0], eps_min), w)

    def resid(ctrl):
        t, x, _ = simulate_extended(sysm, ctrl, problem.x0, h).endpoint()
        return problem.target.endpoint_residual(t, x)

    theta = np.zeros(P * k)
    current = build(theta)
    r0 = resid(current)
    if r0.size == 0:
        return None
    for _ in range(iterations):
        J = np.empty((r0.size, theta.size))
        for j in range(theta.size):
            e = np.zeros_like(theta)
            e[j] = fd_step
            J[:, j] = (resid(build(theta + e)) - r0) / fd_step
        step = np.linalg.lstsq(J, r0, rcond=None)[0]
        for _ in range(8):
            trial = build(theta - step)
            if dist_d(trial, ref).total < r:
                r1 = resid(trial)
                if np.linalg.norm(r1) < np.linalg.norm(r0):
                    theta, current, r0 = theta - step, trial, r1
                    break
            step = 0.5 * step
        else:
            break
        if np.linalg.norm(r0) < 1e-12:
            break
    return current if dist_d(current, ref).total < r else None


def probe_gap(problem, zbar: ExtendedProcess, radii: Sequence[float] = (0.1, 0.3, 1.0),
              etas: Sequence[float] = DEFAULT_ETAS, budget: int = 500, seed: int = 0,
              margin: float | None = None, epsilons: Sequence[float] = DEFAULT_EPSILONS,
              repair: int = 8, jobs: int = 1) -> GapReport:
    """Sample each ball, keep samples feasible at each ``eta`` and compare best costs.

    ``problem`` provides ``system``, ``x0``, ``target``, ``cost`` and ``K``.
    Samples are pooled across radii, so best costs are nonincreasing in ``r``.
    Up to ``repair`` samples per radius that end closest to the target are
    refined by a short Gauss-Newton pass before being pooled.
    """
    radii = tuple(sorted(float(r) for r in radii))
    etas = tuple(sorted((float(e) for e in etas), reverse=True))
    if not radii or not etas:
        raise InputError("radii and eta schedules must be nonempty")
    K = problem.K
    rep = check_feasible(zbar, problem.target, K, min(etas))
    if not rep.feasible:
        raise InfeasibleReference(f"reference endpoint is {rep.distance:.3g} from the target "
                                  f"with beta = {rep.beta:.6g} (K = {K}, eta = {min(etas)})")
    t_ref, x_ref, _ = zbar.endpoint()
    ref_cost = problem.cost.evaluate(x_ref, t_ref)
    margin = 1e-3 * (1 + abs(ref_cost)) if margin is None else float(margin)
    h = zbar.h
    eps_min = min(epsilons)
    pool: list[_Sample] = []

    def add(controls: list[ControlSignal]):
        ends = _simulate_all(zbar.system, zbar.x0, h, controls, jobs)
        for c, (t, x, b) in zip(controls, ends):
            pool.append(_Sample(c, dist_d(c, zbar.control).total, t, x, b,
                                problem.target.distance(t, x), problem.cost.evaluate(np.array(x), t)))

    for i, r in enumerate(radii):
        start = len(pool)
        add(sample_ball(zbar, r, budget, seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]),
                        epsilons=epsilons))
        fresh = sorted(pool[start:], key=lambda s: (s.target_distance, s.d))
        repaired = []
        for s in fresh[:repair]:
            if s.target_distance == 0.0:
                continue
            c = _repair(problem, zbar.control, s.control, r, eps_min, h)
            if c is not None:
                repaired.append(c)
        if repaired:
            add(repaired)

    records = []
    for r in radii:
        inside = [s for s in pool if s.d < r]
        best_dist = min((s.target_distance for s in inside), default=math.inf)
        for eta in etas:
            ok = [s for s in inside if s.target_distance <= eta and s.beta <= K + eta]
            best = min((s.cost for s in ok), default=math.inf)
            records.append(GapRecord(r, eta, best, len(ok), len(inside), best_dist))
    verdict, notes = _verdict(records, radii, etas, ref_cost, margin)
    return GapReport(ref_cost, margin, records, verdict, seed, budget, radii, etas, notes)


def _verdict(records, radii, etas, ref_cost, margin) -> tuple[str, list[str]]:
    if all(rec.feasible_count == 0 for rec in records):
        return "GapDetected", ["no feasible strict-positive sample at any radius"]
    r0 = radii[0]
    at_r0 = [rec for rec in records if rec.radius == r0 and rec.feasible_count > 0]
    if not at_r0:
        return "Undetermined", [f"no feasible sample at the smallest radius {r0}"]
    tight = min(at_r0, key=lambda rec: rec.eta)
    if tight.best_cost <= ref_cost + margin:
        return "NoGapEvidence", [f"best cost {tight.best_cost:.9g} at r = {r0}, eta = {tight.eta}"]
    return "GapDetected", [f"best cost {tight.best_cost:.9g} exceeds reference {ref_cost:.9g} by more than {margin:.3g}"]
