"""Higher-order extremality conditions and normality classification.

The unmaximized Hamiltonian is

    H(x, p, p0, pi, w0, w) = p0 w0 + p . (f(x) w0 + sum_i g_i(x) w^i) + pi |w|

and it is maximized over the canonical slice ``C = {w0 + |w| = 1, w in cone}``.
Since ``H`` is linear in ``(w0, w)`` on each segment from ``(1, 0)`` to
``(0, c)``, the maximum is ``max(p0 + p.f, sup_{|c|=1} p.G c + pi)``.

A certificate is a tuple ``(p0, p(S), pi, lam)``; the adjoint path is obtained by
integrating ``p' = -p (Df w0 + sum_i Dg_i w^i)`` backwards along the process.
Abnormal multipliers (``lam = 0``) are searched with a linear program: every
condition is linear in ``(p0, p(S), pi)`` because ``p(s) = p(S) Phi(s)``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import expr as ex
from .errors import InputError
from .fields import BracketFamily, build_bracket, lie_bracket
from .process import ExtendedProcess, NonFiniteState
from .target import ApproximatingCone

DEFAULT_TOL = 1e-6
SATURATION_TOL = 1e-9
CONDITIONS = ("i", "ii", "iii", "iv", "v", "vi")
CONDITION_NAMES = {
    "i": "nontriviality",
    "ii": "transversality",
    "iii": "hamiltonian_equations",
    "iv": "maximization",
    "v": "vanishing",
    "vi": "higher_order",
}


def hamiltonian(system, x, p, p0: float, pi: float, w0: float, w) -> float:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    v = system.f(x) * w0
    for gi, wi in zip(system.g, w):
        v = v + gi(x) * wi
    return float(p0 * w0 + p @ v + pi * np.linalg.norm(w))


def max_hamiltonian(system, x, p, p0: float, pi: float) -> tuple[float, tuple[float, np.ndarray]]:
    """Maximum of ``H`` over the canonical slice and a maximizing ``(w0, w)``."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    vertex = p0 + float(p @ system.f(x))
    if system.m == 0:
        return vertex, (1.0, np.zeros(0))
    G = system.G_many(x[:, None])[0]
    s, c = system.cone.sup_unit(G.T @ p)
    jump = s + pi
    if vertex >= jump:
        return vertex, (1.0, np.zeros(system.m))
    return jump, (0.0, c)


def _sup_unit_many(cone, ells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise ``sup_unit``; vectorized when the cone is the whole space."""
    if cone.is_full_space:
        nrm = np.linalg.norm(ells, axis=1)
        safe = np.where(nrm > 0, nrm, 1.0)
        dirs = np.where((nrm > 0)[:, None], ells / safe[:, None], 0.0)
        if ells.shape[1]:
            dirs[nrm == 0, 0] = 1.0
        return nrm, dirs
    vals = np.empty(ells.shape[0])
    dirs = np.empty_like(ells)
    for k, ell in enumerate(ells):
        vals[k], dirs[k] = cone.sup_unit(ell)
    return vals, dirs


# ---------------------------------------------------------------------------
# Adjoint


def _node_jacobians(z: ExtendedProcess):
    """``A = Df w0 + sum Dg_i w^i`` at the left end, midpoint and right end of each grid segment."""
    sysm = z.system
    Y = z.y
    dt = np.diff(z.s)[:, None]
    mids = 0.5 * (Y[:-1] + Y[1:]) + dt * (z.dy_left - z.dy_right) / 8.0
    w0 = z.control.w0[z.seg]
    w = z.control.w[z.seg]

    def assemble(P):
        A = sysm.f.jacobian_many(P.T) * w0[:, None, None]
        for i, gi in enumerate(sysm.g):
            if w[:, i].any():
                A = A + gi.jacobian_many(P.T) * w[:, i][:, None, None]
        return A

    return assemble(Y[:-1]), assemble(mids), assemble(Y[1:])


def integrate_adjoint(z: ExtendedProcess, p_T) -> np.ndarray:
    """Backward RK4 for ``p' = -p A(s)`` on the process grid.

    ``p_T`` may be a covector (returns shape ``(N+1, n)``) or a stack of ``k``
    covectors (returns ``(N+1, k, n)``).
    """
    P = np.asarray(p_T, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    if P.shape[1] != z.n:
        raise InputError(f"terminal covector has dimension {P.shape[1]}, expected {z.n}")
    A_left, A_mid, A_right = _node_jacobians(z)
    dt = np.diff(z.s)
    N = dt.size
    out = np.empty((N + 1, P.shape[0], z.n))
    out[N] = P
    p = P
    for k in range(N - 1, -1, -1):
        h = dt[k]
        # In reversed time the equation reads dp/dtau = p A.
        k1 = p @ A_right[k]
        k2 = (p + 0.5 * h * k1) @ A_mid[k]
        k3 = (p + 0.5 * h * k2) @ A_mid[k]
        k4 = (p + h * k3) @ A_left[k]
        p = p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k] = p
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("adjoint left the finite range")
    return out[:, 0, :] if single else out


def adjoint_transition(z: ExtendedProcess) -> np.ndarray:
    """``Phi`` of shape ``(N+1, n, n)`` with ``p(s) = p(S) @ Phi(s)``."""
    return integrate_adjoint(z, np.eye(z.n))


# ---------------------------------------------------------------------------
# Certificates and condition checks


@dataclass(frozen=True, eq=False)
class MultiplierCertificate:
    p0: float
    p_T: np.ndarray
    pi: float
    lam: float
    path: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "p_T", np.asarray(self.p_T, dtype=float))
        if self.pi > 0:
            raise InputError(f"pi must be nonpositive, got {self.pi}")
        if self.lam < 0:
            raise InputError(f"lambda must be nonnegative, got {self.lam}")

    def scaled(self, alpha: float, z: ExtendedProcess) -> MultiplierCertificate:
        return make_certificate(z, alpha * self.p0, alpha * self.p_T, alpha * self.pi, alpha * self.lam)

    def to_dict(self) -> dict:
        # Adding 0.0 folds negative zeros so reports are stable.
        return {"p0": float(self.p0) + 0.0, "p_T": [float(v) + 0.0 for v in self.p_T],
                "pi": float(self.pi) + 0.0, "lambda": float(self.lam) + 0.0}

    @classmethod
    def from_dict(cls, d: dict, z: ExtendedProcess | None = None) -> MultiplierCertificate:
        try:
            p0, pT, pi, lam = float(d["p0"]), d["p_T"], float(d["pi"]), float(d["lambda"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"certificate needs numeric p0, p_T, pi, lambda: {e}") from None
        if z is None:
            return cls(p0, np.asarray(pT, dtype=float), pi, lam)
        return make_certificate(z, p0, pT, pi, lam)


def make_certificate(z: ExtendedProcess, p0: float, p_T, pi: float, lam: float) -> MultiplierCertificate:
    p_T = np.asarray(p_T, dtype=float)
    return MultiplierCertificate(float(p0), p_T, float(pi), float(lam), integrate_adjoint(z, p_T))


@dataclass(frozen=True)
class ConditionResult:
    key: str
    passed: bool
    residual: float
    tolerance: float
    worst_s: float | None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"condition": self.key, "name": CONDITION_NAMES[self.key], "passed": self.passed,
                "residual": self.residual, "tolerance": self.tolerance, "worst_s": self.worst_s,
                "detail": self.detail}


@dataclass(frozen=True)
class ConditionReport:
    results: tuple[ConditionResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, key: str) -> ConditionResult:
        for r in self.results:
            if r.key == key:
                return r
        raise KeyError(key)

    def pattern(self) -> tuple[bool, ...]:
        return tuple(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return {"conditions": [r.to_dict() for r in self.results], "verdict": self.passed}


def cost_gradient(psi: ex.Expression, t: float, x: Sequence[float]) -> np.ndarray:
    """``D Psi`` at ``(t, x)`` with the ``t`` derivative first."""
    x = np.asarray(x, dtype=float)
    grads = [ex.differentiate(psi, ex.TIME)] + [ex.differentiate(psi, i) for i in range(x.size)]
    return np.array(ex.compile_many(grads)(x, t), dtype=float)


def is_saturated(z: ExtendedProcess, K: float) -> bool:
    return math.isfinite(K) and z.endpoint()[2] >= K - SATURATION_TOL


class _Along:
    """Field values along a process, shared between checks and the LP."""

    def __init__(self, z: ExtendedProcess, B0: BracketFamily | None, B1: BracketFamily | None):
        sysm = z.system
        self.z = z
        Y = z.y.T
        self.F = sysm.f.many(Y).T  # (N+1, n)
        self.G = sysm.G_many(Y)  # (N+1, n, m)
        c = z.control
        self.seg = z.seg
        self.left = np.arange(z.seg.size)
        self.right = self.left + 1
        self.w0 = c.w0[z.seg]
        self.w = c.w[z.seg]
        self.wn = c.w_norm[z.seg]
        m1 = sysm.cone.m1
        self.m1 = m1
        self.scale = 1.0 + max(float(np.max(np.abs(z.y), initial=0.0)),
                               float(np.max(np.linalg.norm(self.F, axis=1), initial=0.0)),
                               float(np.max(np.linalg.norm(self.G, axis=(1, 2)), initial=0.0)))
        fields = sysm.g[:m1]
        cache: dict = {}
        self.b0 = []
        for B in (B0 or ()):
            self.b0.append((str(B), build_bracket(B, fields, cache).many(Y).T))
        self.b1 = []
        for B in (B1 or ()):
            hB = build_bracket(B, fields, cache)
            fB = lie_bracket(sysm.f, hB).many(Y).T
            gB = [lie_bracket(sysm.g[j], hB).many(Y).T for j in range(m1, sysm.m)]
            self.b1.append((str(B), fB, gB))

    def vec_along(self, nodes: np.ndarray, side_w0: np.ndarray, side_w: np.ndarray) -> np.ndarray:
        """``f w0 + G w`` at the given nodes with the given controls."""
        return self.F[nodes] * side_w0[:, None] + np.einsum("kij,kj->ki", self.G[nodes], side_w)

    def b1_vec(self, entry, nodes, side_w0, side_w) -> np.ndarray:
        _, fB, gB = entry
        v = fB[nodes] * side_w0[:, None]
        for j, gj in enumerate(gB):
            v = v + gj[nodes] * side_w[:, self.m1 + j][:, None]
        return v


def _worst(res: np.ndarray, s: np.ndarray) -> tuple[float, float | None]:
    if res.size == 0:
        return 0.0, None
    k = int(np.argmax(res))
    return float(res[k]), float(s[k])


def check_conditions(z: ExtendedProcess, cone_K: ApproximatingCone, K: float, cert: MultiplierCertificate,
                     family_B0: BracketFamily | None = None, family_B1: BracketFamily | None = None,
                     tol: float = DEFAULT_TOL, cost: ex.Expression | None = None,
                     _along: _Along | None = None) -> ConditionReport:
    """Evaluate conditions (i)-(vi) on the integration grid.

    Tolerances are ``tol * (1 + trajectory scale) * multiplier scale`` so the
    pass/fail pattern is invariant under positive scaling of the multipliers.
    """
    sysm = z.system
    al = _along or _Along(z, family_B0, family_B1)
    path = cert.path if cert.path is not None else integrate_adjoint(z, cert.p_T)
    s = z.s
    t_end, y_end, b_end = z.endpoint()
    p_sup = float(np.max(np.linalg.norm(path, axis=1)))
    mult = max(abs(cert.p0), abs(cert.pi), cert.lam, p_sup, float(np.linalg.norm(cert.p_T)))
    eps = tol * al.scale * (mult if mult > 0 else 1.0)
    saturated = is_saturated(z, K)
    results = []

    # (i) nontriviality, strengthened when the final time is positive.
    if t_end > 0:
        size = math.hypot(p_sup, cert.lam)
        what = "(p, lambda)"
    else:
        size = float(np.linalg.norm([cert.p0, p_sup, cert.lam]))
        what = "(p0, p, lambda)"
    ok = mult > 0 and size > 1e-6 * mult
    results.append(ConditionResult("i", ok, size, 1e-6 * mult, None, f"norm of {what}"))

    # (ii) transversality and the J_K rule for pi.
    v = np.concatenate([[cert.p0], cert.p_T])
    if cert.lam != 0:
        if cost is None:
            raise InputError("a cost is needed to check transversality with lambda != 0")
        v = v + cert.lam * cost_gradient(cost, t_end, y_end)
    r_cone = float(np.linalg.norm(cone_K.component_in_cone(v)))
    r_pi = max(cert.pi, 0.0) if saturated else abs(cert.pi)
    r = max(r_cone, r_pi)
    results.append(ConditionResult("ii", r <= eps, r, eps, float(s[-1]),
                                   "J_K = [0, inf)" if saturated else "J_K = {0}"))

    # (iii) the stored path solves the adjoint equation.
    if cert.path is None:
        results.append(ConditionResult("iii", True, 0.0, eps, None, "path recomputed"))
    else:
        ref = integrate_adjoint(z, cert.p_T)
        res = np.linalg.norm(cert.path - ref, axis=1) if cert.path.shape == ref.shape else np.array([np.inf])
        r, ws = _worst(res, s)
        results.append(ConditionResult("iii", r <= eps, r, eps, ws))

    # Maximized Hamiltonian at every node.
    vertex = cert.p0 + np.einsum("kn,kn->k", path, al.F)
    if sysm.m:
        ells = np.einsum("kn,knm->km", path, al.G)
        sup, _ = _sup_unit_many(sysm.cone, ells)
        hmax = np.maximum(vertex, sup + cert.pi)
    else:
        hmax = vertex

    # (iv) H along the process equals the maximum, on both ends of every grid segment.
    def h_along(nodes):
        return (cert.p0 * al.w0 + np.einsum("kn,kn->k", path[nodes], al.vec_along(nodes, al.w0, al.w))
                + cert.pi * al.wn)

    rates = al.w0 + al.wn
    safe = np.where(rates > 0, rates, 1.0)
    res_l = np.where(rates > 0, hmax[al.left] - h_along(al.left) / safe, 0.0)
    res_r = np.where(rates > 0, hmax[al.right] - h_along(al.right) / safe, 0.0)
    res = np.maximum(np.abs(res_l), np.abs(res_r))
    r, ws = _worst(res, s[:-1])
    results.append(ConditionResult("iv", r <= eps, r, eps, ws))

    # (v) the maximum vanishes, and p . g_i = 0 for the unconstrained directions.
    res = np.abs(hmax)
    detail = "max H = 0"
    if not saturated and al.m1:
        pg = np.abs(np.einsum("kn,kni->ki", path, al.G[:, :, : al.m1])).max(axis=1)
        res = np.maximum(res, pg)
        detail += "; p . g_i = 0, i <= m1"
    r, ws = _worst(res, s)
    results.append(ConditionResult("v", r <= eps, r, eps, ws, detail))

    # (vi) higher-order bracket conditions.
    if saturated:
        results.append(ConditionResult("vi", True, 0.0, eps, None, "not required: energy bound saturated"))
    else:
        res = np.zeros(s.size)
        worst_label = ""
        for label, vals in al.b0:
            rb = np.abs(np.einsum("kn,kn->k", path, vals))
            if rb.max(initial=0.0) > res.max(initial=0.0):
                worst_label = f"B0 {label}"
            res = np.maximum(res, rb)
        res_seg = np.zeros(al.left.size)
        for entry in al.b1:
            rb = np.maximum(
                np.abs(np.einsum("kn,kn->k", path[al.left], al.b1_vec(entry, al.left, al.w0, al.w))),
                np.abs(np.einsum("kn,kn->k", path[al.right], al.b1_vec(entry, al.right, al.w0, al.w))))
            if rb.max(initial=0.0) > max(res.max(initial=0.0), res_seg.max(initial=0.0)):
                worst_label = f"B1 {entry[0]}"
            res_seg = np.maximum(res_seg, rb)
        r0, ws0 = _worst(res, s)
        r1, ws1 = _worst(res_seg, s[:-1])
        r, ws = (r0, ws0) if r0 >= r1 else (r1, ws1)
        n_checked = len(al.b0) + len(al.b1)
        results.append(ConditionResult("vi", r <= eps, r, eps, ws,
                                       f"{n_checked} brackets; worst {worst_label}" if worst_label else f"{n_checked} brackets"))
    return ConditionReport(tuple(results))


# ---------------------------------------------------------------------------
# Abnormal multiplier search


@dataclass(frozen=True)
class SearchParams:
    tol: float = DEFAULT_TOL
    max_nodes: int = 200
    n_directions: int = 64
    cut_rounds: int = 5
    seed: int = 0
    jobs: int = 1


@dataclass
class NormalizationOutcome:
    index: int
    coordinate: str
    sign: int
    status: str
    residual: float
    verified: bool = False

    def to_dict(self) -> dict:
        return {"index": self.index, "coordinate": self.coordinate, "sign": self.sign, "status": self.status,
                "residual": None if not math.isfinite(self.residual) else self.residual, "verified": self.verified}


@dataclass
class SearchResult:
    certificate: MultiplierCertificate | None
    report: ConditionReport | None
    best_residual: float
    outcomes: list[NormalizationOutcome] = field(default_factory=list)


def _subsample(z: ExtendedProcess, max_nodes: int) -> np.ndarray:
    """Grid segments used by the LP: evenly spread, at least one per control interval."""
    nseg = z.seg.size
    pick = set(np.linspace(0, nseg - 1, min(max_nodes, nseg)).round().astype(int).tolist())
    first = np.concatenate([[0], np.nonzero(np.diff(z.seg))[0] + 1])
    last = np.concatenate([first[1:] - 1, [nseg - 1]])
    pick.update(first.tolist())
    pick.update(last.tolist())
    return np.array(sorted(pick), dtype=int)


def _unique_rows(rows: np.ndarray) -> np.ndarray:
    if rows.size == 0:
        return rows
    return np.unique(np.round(rows, 12), axis=0)


def _normalized(rows: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(rows, axis=1)
    keep = nrm > 1e-12
    return rows[keep] / nrm[keep, None]


class _AbnormalLP:
    """Rows of the linear feasibility problem in ``q = (p0, p(S), pi)``."""

    def __init__(self, z: ExtendedProcess, cone_K: ApproximatingCone, K: float, al: _Along, Phi: np.ndarray,
                 params: SearchParams):
        self.z = z
        self.n = z.n
        self.al = al
        self.Phi = Phi
        self.saturated = is_saturated(z, K)
        sysm = z.system
        segs = _subsample(z, params.max_nodes)
        self.segs = segs
        nodes_l, nodes_r = al.left[segs], al.right[segs]
        w0, w, wn = al.w0[segs], al.w[segs], al.wn[segs]
        eq = []

        def prow(nodes, vecs):
            # p(s) . v(s) = p(S) . (Phi(s) v(s))
            return np.einsum("kij,kj->ki", Phi[nodes], vecs)

        for nodes in (nodes_l, nodes_r):
            pv = prow(nodes, al.vec_along(nodes, w0, w))
            eq.append(np.column_stack([w0, pv, wn]))
        all_nodes = np.union1d(nodes_l, nodes_r)
        zero = np.zeros(all_nodes.size)
        if not self.saturated:
            for i in range(al.m1):
                eq.append(np.column_stack([zero, prow(all_nodes, al.G[all_nodes, :, i]), zero]))
            for _, vals in al.b0:
                eq.append(np.column_stack([zero, prow(all_nodes, vals[all_nodes]), zero]))
            for entry in al.b1:
                for nodes in (nodes_l, nodes_r):
                    z0 = np.zeros(nodes.size)
                    eq.append(np.column_stack([z0, prow(nodes, al.b1_vec(entry, nodes, w0, w)), z0]))
        self.eq_rows = _unique_rows(_normalized(np.concatenate(eq)))
        self.nodes = all_nodes
        ineq = [np.column_stack([np.ones(all_nodes.size), prow(all_nodes, al.F[all_nodes]), zero])]
        if sysm.m:
            dirs = sysm.cone.sample_directions(params.n_directions, np.random.default_rng(params.seed))
            for c in dirs.T:
                gc = np.einsum("knm,m->kn", al.G[all_nodes], c)
                ineq.append(np.column_stack([zero, prow(all_nodes, gc), np.ones(all_nodes.size)]))
        self.ineq_rows = _unique_rows(_normalized(np.concatenate(ineq)))
        self.kperp_rows = cone_K.basis.T  # (k, 1+n): (p0, p_T) has no component in K

    def cuts_for(self, q: np.ndarray) -> np.ndarray:
        """Rows for the exact maximizing directions of a candidate at the LP nodes."""
        sysm = self.z.system
        if not sysm.m:
            return np.zeros((0, self.n + 2))
        p = np.einsum("j,kji->ki", q[1:-1], self.Phi[self.nodes])
        ells = np.einsum("kn,knm->km", p, self.al.G[self.nodes])
        _, dirs = _sup_unit_many(sysm.cone, ells)
        gc = np.einsum("knm,km->kn", self.al.G[self.nodes], dirs)
        rows = np.column_stack([np.zeros(self.nodes.size),
                                np.einsum("kij,kj->ki", self.Phi[self.nodes], gc), np.ones(self.nodes.size)])
        return _normalized(rows)

    def solve(self, coord: int, sign: int, cuts: Sequence[np.ndarray] = ()) -> tuple[str, float, np.ndarray | None]:
        nq = self.n + 2
        if coord == nq - 1 and not self.saturated:
            return "infeasible", math.inf, None  # pi is forced to zero
        ineq = np.concatenate([self.ineq_rows, *cuts]) if cuts else self.ineq_rows
        E = self.eq_rows
        A_ub = np.concatenate([
            np.column_stack([E, -np.ones(len(E))]),
            np.column_stack([-E, -np.ones(len(E))]),
            np.column_stack([ineq, -np.ones(len(ineq))]),
        ])
        b_ub = np.zeros(A_ub.shape[0])
        A_eq = b_eq = None
        if self.kperp_rows.size:
            A_eq = np.column_stack([self.kperp_rows, np.zeros((self.kperp_rows.shape[0], 2))])
            b_eq = np.zeros(A_eq.shape[0])
        bounds = [(-1.0, 1.0)] * nq + [(0.0, None)]
        bounds[nq - 1] = (-1.0, 0.0) if self.saturated else (0.0, 0.0)
        bounds[coord] = (float(sign), float(sign))
        if bounds[nq - 1][0] > bounds[nq - 1][1]:
            return "infeasible", math.inf, None
        c = np.zeros(nq + 1)
        c[-1] = 1.0
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if res.status != 0:
            return "infeasible", math.inf, None
        return "optimal", float(res.x[-1]), res.x[:nq]


def _coordinate_names(n: int) -> list[str]:
    return ["p0"] + [f"p_T[{i + 1}]" for i in range(n)] + ["pi"]


def search_abnormal(z: ExtendedProcess, cone_K: ApproximatingCone, K: float,
                    family_B0: BracketFamily | None = None, family_B1: BracketFamily | None = None,
                    params: SearchParams = SearchParams()) -> SearchResult:
    """Look for a verified certificate with ``lam = 0`` across all normalizations."""
    al = _Along(z, family_B0, family_B1)
    Phi = adjoint_transition(z)
    names = _coordinate_names(z.n)
    jobs = [(j, sgn) for j in range(z.n + 2) for sgn in (1, -1)]
    lp = _AbnormalLP(z, cone_K, K, al, Phi, params)

    def run(index):
        coord, sgn = jobs[index]
        cuts = []
        outcome = NormalizationOutcome(index, names[coord], sgn, "infeasible", math.inf)
        found = None
        for round_ in range(params.cut_rounds + 1):
            status, t, q = lp.solve(coord, sgn, cuts)
            outcome.residual = t
            if status == "optimal":
                status = "feasible" if t <= params.tol else ("gray" if t <= 10 * params.tol else "infeasible")
            outcome.status = status
            if q is None or t > 10 * params.tol:
                break
            cert = MultiplierCertificate(float(q[0]), q[1:-1].copy(), min(float(q[-1]), 0.0), 0.0,
                                         np.einsum("j,kji->ki", q[1:-1], Phi))
            rep = check_conditions(z, cone_K, K, cert, family_B0, family_B1, params.tol, _along=al)
            if rep.passed:
                outcome.verified = True
                found = (cert, rep)
                break
            if rep["iv"].passed and rep["v"].passed:
                break
            cuts.append(lp.cuts_for(q))
        return outcome, found

    if params.jobs > 1:
        with ThreadPoolExecutor(params.jobs) as pool:
            results = list(pool.map(run, range(len(jobs))))
    else:
        results = []
        for i in range(len(jobs)):
            results.append(run(i))
            if results[-1][1] is not None:
                break
    # Keep results up to the first verified normalization, independent of --jobs.
    first = next((i for i, (_, f) in enumerate(results) if f is not None), None)
    if first is not None:
        results = results[: first + 1]
    outcomes = [o for o, _ in results]
    best = min((o.residual for o in outcomes), default=math.inf)
    for o, found in results:
        if found is not None:
            return SearchResult(found[0], found[1], best, outcomes)
    return SearchResult(None, None, best, outcomes)


def find_abnormal(z: ExtendedProcess, cone_K: ApproximatingCone, K: float,
                  family_B0: BracketFamily | None = None, family_B1: BracketFamily | None = None,
                  params: SearchParams = SearchParams()) -> MultiplierCertificate | None:
    return search_abnormal(z, cone_K, K, family_B0, family_B1, params).certificate


@dataclass
class NormalityResult:
    verdict: str  # "Normal" | "Abnormal" | "Inconclusive"
    certificate: MultiplierCertificate | None
    report: ConditionReport | None
    best_residual: float
    tol: float
    outcomes: list[NormalizationOutcome]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "conditions": self.report.to_dict() if self.report else None,
            "best_lp_residual": None if not math.isfinite(self.best_residual) else self.best_residual,
            "gray_band": [self.tol, 10 * self.tol],
            "normalizations": [o.to_dict() for o in self.outcomes],
        }


def classify_normality(z: ExtendedProcess, cone_K: ApproximatingCone, K: float,
                       family_B0: BracketFamily | None = None, family_B1: BracketFamily | None = None,
                       params: SearchParams = SearchParams()) -> NormalityResult:
    """``Abnormal`` with a verified certificate, ``Normal`` when every normalization
    stays above ``10 tol``, ``Inconclusive`` in between."""
    res = search_abnormal(z, cone_K, K, family_B0, family_B1, params)
    if res.certificate is not None:
        verdict = "Abnormal"
    elif res.best_residual <= 10 * params.tol:
        verdict = "Inconclusive"
    else:
        verdict = "Normal"
    return NormalityResult(verdict, res.certificate, res.report, res.best_residual, params.tol, res.outcomes)


def write_adjoint_csv(z: ExtendedProcess, path_values: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s"] + [f"p{i + 1}" for i in range(z.n)])
        for s, p in zip(z.s, path_values):
            w.writerow([repr(float(s))] + [repr(float(v)) for v in p])
