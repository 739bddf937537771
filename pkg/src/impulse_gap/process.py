"""Strict-sense and extended (graph-completed) processes.

An extended control on ``[0, S]`` is piecewise constant: on the ``i``-th
interval the clock rate is ``w0[i] >= 0`` and the control is ``w[i]`` in the
cone. The extended state ``(y0, y, beta)`` solves

    y0' = w0,   y' = f(y) w0 + sum_i g_i(y) w^i,   beta' = |w|

from ``(0, x0, 0)``. Strict-sense processes solve ``x' = f(x) + G(x) u`` and
``v' = |u|`` in physical time. Norms on control vectors are Euclidean.

Integration is fixed-step RK4 on a grid that subdivides every control interval
uniformly, so breakpoints are always grid nodes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import expr as ex
from .cone import ControlCone
from .errors import InputError, NumericalError
from .fields import VectorField

DEFAULT_STEPS = 1000


class NonFiniteState(NumericalError):
    pass


class NotStrictPositive(InputError):
    pass


class BadTimeChange(InputError):
    pass


class DegenerateClock(NumericalError):
    pass


class ControlError(InputError):
    pass


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Dynamics


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """Drift ``f``, control fields ``g_1..g_m`` and the control cone."""

    f: VectorField
    g: tuple[VectorField, ...]
    cone: ControlCone

    def __post_init__(self):
        for gi in self.g:
            if gi.n != self.f.n:
                raise InputError("all fields must live on the same R^n")
        if len(self.g) != self.cone.m:
            raise InputError(f"{len(self.g)} control fields but the cone lives in R^{self.cone.m}")

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def m(self) -> int:
        return len(self.g)

    def __getstate__(self):
        return {"f": self.f, "g": self.g, "cone": self.cone}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)

    def _linear_combination_src(self, comps_per_field) -> list[str]:
        out = []
        for i in range(self.n):
            terms = []
            for coeff, comps in comps_per_field:
                c = comps[i]
                if isinstance(c, ex.Const) and c.value == 0:
                    continue
                terms.append(f"{c._src()} * {coeff}")
            out.append(" + ".join(terms) if terms else "0.0")
        return out

    @cached_property
    def rhs(self):
        """Compiled ``rhs(x, a0, a) = f(x) a0 + sum_i g_i(x) a[i]`` returning a tuple."""
        parts = [("a0", self.f.components)] + [(f"a[{i}]", gi.components) for i, gi in enumerate(self.g)]
        body = ", ".join(self._linear_combination_src(parts))
        return eval(f"lambda x, a0, a: ({body},)", dict(ex._SCALAR_NS))

    @cached_property
    def rhs_jacobian(self):
        """Compiled ``A(x, a0, a) = Df a0 + sum_i Dg_i a[i]`` as a flat row-major tuple."""
        n = self.n
        entries = []
        jacs = [self.f.jacobian_exprs] + [gi.jacobian_exprs for gi in self.g]
        coeffs = ["a0"] + [f"a[{i}]" for i in range(self.m)]
        for r in range(n):
            for c in range(n):
                terms = []
                for coeff, J in zip(coeffs, jacs):
                    e = J[r][c]
                    if isinstance(e, ex.Const) and e.value == 0:
                        continue
                    terms.append(f"{e._src()} * {coeff}")
                entries.append(" + ".join(terms) if terms else "0.0")
        return eval(f"lambda x, a0, a: ({', '.join(entries)},)", dict(ex._SCALAR_NS))

    def G_many(self, X: np.ndarray) -> np.ndarray:
        """Control matrices ``[g_1 .. g_m]`` at columns of ``X``; shape ``(N, n, m)``."""
        X = np.asarray(X, dtype=float)
        if self.m == 0:
            return np.zeros((X.shape[1], self.n, 0))
        return np.stack([gi.many(X).T for gi in self.g], axis=2)


# ---------------------------------------------------------------------------
# Controls


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant extended control ``(w0, w)`` on ``[0, S]``."""

    breakpoints: np.ndarray
    w0: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        bp = _freeze(self.breakpoints)
        w0 = _freeze(self.w0)
        w = _freeze(np.asarray(self.w, dtype=float).reshape(len(w0), -1))
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "w", w)
        if bp.ndim != 1 or bp.size < 2 or bp[0] != 0.0:
            raise ControlError("breakpoints must start at 0 and contain at least two entries")
        if not np.all(np.diff(bp) > 0):
            raise ControlError("breakpoints must be strictly increasing")
        if w0.size != bp.size - 1:
            raise ControlError("one (w0, w) value is needed per interval")
        if np.any(w0 < 0) or not np.all(np.isfinite(w0)) or not np.all(np.isfinite(w)):
            raise ControlError("w0 must be finite and nonnegative")

    @classmethod
    def constant(cls, horizon: float, w0: float, w: Sequence[float]) -> ControlSignal:
        return cls(np.array([0.0, horizon]), np.array([w0]), np.array([w], dtype=float))

    @classmethod
    def from_records(cls, records: Sequence[Sequence], horizon: float) -> ControlSignal:
        """Records ``(breakpoint, w0, [w...])``; the last interval ends at ``horizon``."""
        bp = [float(r[0]) for r in records] + [float(horizon)]
        return cls(np.array(bp), np.array([float(r[1]) for r in records]),
                   np.array([list(r[2]) for r in records], dtype=float))

    def to_records(self) -> list:
        return [[float(b), float(a0), [float(v) for v in a]] for b, a0, a in zip(self.breakpoints[:-1], self.w0, self.w)]

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def m(self) -> int:
        return self.w.shape[1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @cached_property
    def w_norm(self) -> np.ndarray:
        return np.linalg.norm(self.w, axis=1)

    @property
    def clock_rate(self) -> np.ndarray:
        """``w0 + |w|`` per interval."""
        return self.w0 + self.w_norm

    def is_canonical(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.clock_rate - 1.0) <= tol))

    def is_strict_positive(self) -> bool:
        return bool(np.all(self.w0 > 0))

    def interval_index(self, s) -> np.ndarray:
        return np.clip(np.searchsorted(self.breakpoints, s, side="right") - 1, 0, self.w0.size - 1)

    def value_at(self, s: float) -> tuple[float, np.ndarray]:
        """Control value at ``s``, zero-extended outside ``[0, S)``."""
        if s < 0 or s >= self.horizon:
            return 0.0, np.zeros(self.m)
        i = int(self.interval_index(s))
        return float(self.w0[i]), self.w[i].copy()

    def check_cone(self, cone: ControlCone, tol: float = 1e-9) -> None:
        if cone.m != self.m:
            raise ControlError(f"control has {self.m} components, cone lives in R^{cone.m}")
        for i, wi in enumerate(self.w):
            if not cone.contains(wi, tol):
                raise ControlError(f"w on interval {i} = {wi.tolist()} is outside the control cone")

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "records": self.to_records()}


@dataclass(frozen=True, eq=False)
class StrictControl:
    """Piecewise-constant strict-sense control ``u`` on ``[0, T]``."""

    breakpoints: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        bp = _freeze(self.breakpoints)
        u = _freeze(np.asarray(self.u, dtype=float).reshape(bp.size - 1, -1))
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "u", u)
        if bp.ndim != 1 or bp.size < 2 or bp[0] != 0.0 or not np.all(np.diff(bp) > 0):
            raise ControlError("breakpoints must start at 0 and be strictly increasing")
        if not np.all(np.isfinite(u)):
            raise ControlError("u must be finite")

    @classmethod
    def constant(cls, horizon: float, u: Sequence[float]) -> StrictControl:
        return cls(np.array([0.0, horizon]), np.array([u], dtype=float))

    @classmethod
    def from_records(cls, records: Sequence[Sequence], horizon: float) -> StrictControl:
        bp = [float(r[0]) for r in records] + [float(horizon)]
        return cls(np.array(bp), np.array([list(r[1]) for r in records], dtype=float))

    def to_records(self) -> list:
        return [[float(b), [float(v) for v in a]] for b, a in zip(self.breakpoints[:-1], self.u)]

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def m(self) -> int:
        return self.u.shape[1]

    def check_cone(self, cone: ControlCone, tol: float = 1e-9) -> None:
        for i, ui in enumerate(self.u):
            if not cone.contains(ui, tol):
                raise ControlError(f"u on interval {i} = {ui.tolist()} is outside the control cone")


# ---------------------------------------------------------------------------
# Integration


@dataclass(frozen=True, eq=False)
class _Trajectory:
    nodes: np.ndarray  # (N+1,)
    x: np.ndarray  # (N+1, n)
    seg: np.ndarray  # (N,) control interval of each grid segment
    d_left: np.ndarray  # (N, n) state derivative at the left end of each segment
    d_right: np.ndarray  # (N, n) ... at the right end, same control


def _steps(length: float, h: float) -> int:
    return max(1, int(math.ceil(length / h - 1e-9)))


def _rk4(rhs, x0: Sequence[float], breakpoints: np.ndarray, a0s: Sequence[float], controls: np.ndarray,
         h: float) -> _Trajectory:
    n = len(x0)
    nodes = [0.0]
    xs = [tuple(float(v) for v in x0)]
    seg, dl, dr = [], [], []
    isfinite = math.isfinite
    rng = range(n)
    for i in range(len(a0s)):
        a, b = float(breakpoints[i]), float(breakpoints[i + 1])
        k = _steps(b - a, h)
        hh = (b - a) / k
        a0 = float(a0s[i])
        u = tuple(float(v) for v in controls[i])
        y = xs[-1]
        k1 = rhs(y, a0, u)
        for j in range(k):
            k2 = rhs(tuple(y[q] + 0.5 * hh * k1[q] for q in rng), a0, u)
            k3 = rhs(tuple(y[q] + 0.5 * hh * k2[q] for q in rng), a0, u)
            k4 = rhs(tuple(y[q] + hh * k3[q] for q in rng), a0, u)
            ynew = tuple(y[q] + hh / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]) for q in rng)
            if not all(isfinite(v) for v in ynew):
                raise NonFiniteState(f"state left the finite range near s = {a + (j + 1) * hh:.6g}")
            knew = rhs(ynew, a0, u)
            seg.append(i)
            dl.append(k1)
            dr.append(knew)
            xs.append(ynew)
            nodes.append(b if j == k - 1 else a + (j + 1) * hh)
            y, k1 = ynew, knew
    return _Trajectory(_freeze(nodes), _freeze(np.array(xs).reshape(-1, n)), np.array(seg, dtype=int),
                       _freeze(np.array(dl).reshape(-1, n)), _freeze(np.array(dr).reshape(-1, n)))


def _accumulate(nodes: np.ndarray, seg: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Integral of a piecewise-constant rate at the grid nodes."""
    inc = np.diff(nodes) * rates[seg]
    return _freeze(np.concatenate([[0.0], np.cumsum(inc)]))


def _hermite(nodes, X, d_left, d_right, q):
    q = np.asarray(q, dtype=float)
    k = np.clip(np.searchsorted(nodes, q, side="right") - 1, 0, len(nodes) - 2)
    dt = nodes[k + 1] - nodes[k]
    tau = ((q - nodes[k]) / dt)[:, None]
    h00 = 2 * tau**3 - 3 * tau**2 + 1
    h10 = tau**3 - 2 * tau**2 + tau
    h01 = -2 * tau**3 + 3 * tau**2
    h11 = tau**3 - tau**2
    out = h00 * X[k] + h10 * dt[:, None] * d_left[k] + h01 * X[k + 1] + h11 * dt[:, None] * d_right[k]
    # Exact at nodes and constant beyond the horizon.
    out = np.where((q >= nodes[-1])[:, None], X[-1], out)
    out = np.where((q <= 0)[:, None], X[0], out)
    return out


@dataclass(frozen=True, eq=False)
class ExtendedProcess:
    """An extended control with its integrated trajectory ``(y0, y, beta)``."""

    system: ControlSystem
    x0: np.ndarray
    control: ControlSignal
    s: np.ndarray
    y0: np.ndarray
    y: np.ndarray
    beta: np.ndarray
    seg: np.ndarray
    dy_left: np.ndarray
    dy_right: np.ndarray
    h: float

    @property
    def horizon(self) -> float:
        return self.control.horizon

    @property
    def n(self) -> int:
        return self.system.n

    def endpoint(self) -> tuple[float, np.ndarray, float]:
        return float(self.y0[-1]), self.y[-1].copy(), float(self.beta[-1])

    def state_at(self, q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(y0, y, beta)`` at pseudo-times ``q``, held constant after ``S``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        y = _hermite(self.s, self.y, self.dy_left, self.dy_right, q)
        return np.interp(q, self.s, self.y0), y, np.interp(q, self.s, self.beta)

    def cost(self, psi: ex.Expression) -> float:
        t, x, _ = self.endpoint()
        return psi.evaluate(x, t)

    def with_control(self, control: ControlSignal, h: float | None = None) -> ExtendedProcess:
        return simulate_extended(self.system, control, self.x0, h)

    def trajectory_rows(self) -> list[list[float]]:
        return [[float(s), float(t), *map(float, y), float(b)] for s, t, y, b in zip(self.s, self.y0, self.y, self.beta)]


@dataclass(frozen=True, eq=False)
class StrictProcess:
    """A strict-sense control with its trajectory ``(x, v)`` in physical time."""

    system: ControlSystem
    x0: np.ndarray
    control: StrictControl
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    seg: np.ndarray
    dx_left: np.ndarray
    dx_right: np.ndarray
    h: float

    @property
    def horizon(self) -> float:
        return self.control.horizon

    def endpoint(self) -> tuple[float, np.ndarray, float]:
        return self.horizon, self.x[-1].copy(), float(self.v[-1])

    def state_at(self, q) -> tuple[np.ndarray, np.ndarray]:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return _hermite(self.t, self.x, self.dx_left, self.dx_right, q), np.interp(q, self.t, self.v)

    def trajectory_rows(self) -> list[list[float]]:
        return [[float(t), *map(float, x), float(v)] for t, x, v in zip(self.t, self.x, self.v)]


def simulate_extended(system: ControlSystem, control: ControlSignal, x0: Sequence[float],
                      h: float | None = None) -> ExtendedProcess:
    """Integrate the extended system; ``h`` defaults to ``S / 1000``."""
    x0 = _freeze(x0)
    if x0.size != system.n:
        raise InputError(f"initial state has dimension {x0.size}, expected {system.n}")
    if control.m != system.m:
        raise ControlError(f"control has {control.m} components, system has {system.m} control fields")
    h = control.horizon / DEFAULT_STEPS if h is None else float(h)
    if not h > 0:
        raise InputError("integration step must be positive")
    tr = _rk4(system.rhs, x0, control.breakpoints, control.w0, control.w, h)
    return ExtendedProcess(system, x0, control, tr.nodes, _accumulate(tr.nodes, tr.seg, control.w0), tr.x,
                           _accumulate(tr.nodes, tr.seg, control.w_norm), tr.seg, tr.d_left, tr.d_right, h)


def simulate_strict(system: ControlSystem, control: StrictControl, x0: Sequence[float],
                    h: float | None = None) -> StrictProcess:
    """Integrate ``x' = f(x) + G(x) u``, ``v' = |u|``; ``h`` defaults to ``T / 1000``."""
    x0 = _freeze(x0)
    if x0.size != system.n:
        raise InputError(f"initial state has dimension {x0.size}, expected {system.n}")
    if control.m != system.m:
        raise ControlError(f"control has {control.m} components, system has {system.m} control fields")
    h = control.horizon / DEFAULT_STEPS if h is None else float(h)
    ones = np.ones(control.u.shape[0])
    tr = _rk4(system.rhs, x0, control.breakpoints, ones, control.u, h)
    v = _accumulate(tr.nodes, tr.seg, np.linalg.norm(control.u, axis=1))
    return StrictProcess(system, x0, control, tr.nodes, tr.x, v, tr.seg, tr.d_left, tr.d_right, h)


# ---------------------------------------------------------------------------
# Reparametrizations


def embed(p: StrictProcess) -> ExtendedProcess:
    """Canonical embedded process of ``p`` under the time change ``sigma(t) = t + v(t)``.

    The trajectory is carried over by composition, so ``y(S) = x(T)`` and
    ``y0(S) = T`` hold exactly.
    """
    c = p.control
    slope = 1.0 + np.linalg.norm(c.u, axis=1)
    s_nodes = _freeze(p.t + p.v)
    v_bp = np.interp(c.breakpoints, p.t, p.v)
    s_bp = c.breakpoints + v_bp
    s_bp[0] = 0.0
    s_bp[-1] = s_nodes[-1]
    control = ControlSignal(s_bp, 1.0 / slope, c.u / slope[:, None])
    scale = (1.0 / slope)[p.seg][:, None]
    return ExtendedProcess(p.system, p.x0, control, s_nodes, p.t, p.x, p.v, p.seg,
                           _freeze(p.dx_left * scale), _freeze(p.dx_right * scale), p.h * float(np.max(slope)))


def restrict(z: ExtendedProcess) -> StrictProcess:
    """Strict-sense process of an embedded one, via ``t = y0(s)``."""
    c = z.control
    if not np.all(c.w0 > 0):
        i = int(np.argmin(c.w0))
        raise NotStrictPositive(f"w0 = {c.w0[i]} on interval {i}: no strict-sense representative")
    t_bp = np.interp(c.breakpoints, z.s, z.y0)
    t_bp[0] = 0.0
    t_bp[-1] = z.y0[-1]
    control = StrictControl(t_bp, c.w / c.w0[:, None])
    scale = (1.0 / c.w0)[z.seg][:, None]
    return StrictProcess(z.system, z.x0, control, z.y0, z.y, z.beta, z.seg,
                         _freeze(z.dy_left * scale), _freeze(z.dy_right * scale), z.h * float(np.max(c.w0)))


def canonicalize(z: ExtendedProcess) -> ExtendedProcess:
    """Canonical parameterization by ``sigma(s) = y0(s) + beta(s)``.

    The result satisfies ``w0 + |w| = 1`` on every interval; canonical input is
    returned unchanged.
    """
    c = z.control
    rate = c.clock_rate
    if np.any(rate <= 1e-14):
        i = int(np.argmin(rate))
        raise DegenerateClock(f"w0 + |w| vanishes on interval {i}")
    if np.all(np.abs(rate - 1.0) <= 1e-15):
        return z
    # sigma is linear on each control interval, so uniform sub-grids map to uniform sub-grids.
    inc = np.diff(z.s) * rate[z.seg]
    s_nodes = _freeze(np.concatenate([[0.0], np.cumsum(inc)]))
    bp = np.concatenate([[0.0], np.cumsum(c.lengths * rate)])
    bp[-1] = s_nodes[-1]
    control = ControlSignal(bp, c.w0 / rate, c.w / rate[:, None])
    scale = (1.0 / rate)[z.seg][:, None]
    return ExtendedProcess(z.system, z.x0, control, s_nodes, z.y0, z.y, z.beta, z.seg,
                           _freeze(z.dy_left * scale), _freeze(z.dy_right * scale),
                           z.h * float(np.max(rate)) if rate.size else z.h)


@dataclass(frozen=True, eq=False)
class TimeChange:
    """Piecewise-linear increasing map ``sigma`` with ``sigma(knots[i]) = values[i]``."""

    knots: np.ndarray
    values: np.ndarray
    min_slope: float | None = None
    max_slope: float | None = None

    def __post_init__(self):
        k = _freeze(self.knots)
        v = _freeze(self.values)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)
        if k.size != v.size or k.size < 2 or k[0] != 0.0 or v[0] != 0.0:
            raise BadTimeChange("a time change needs matching knots/values with sigma(0) = 0")
        if not np.all(np.diff(k) > 0) or not np.all(np.diff(v) > 0):
            raise BadTimeChange("a time change must be strictly increasing")
        sl = self.slopes
        if self.min_slope is not None and np.any(sl < self.min_slope * (1 - 1e-12)):
            raise BadTimeChange(f"slope {sl.min():.6g} below the declared bound {self.min_slope}")
        if self.max_slope is not None and np.any(sl > self.max_slope * (1 + 1e-12)):
            raise BadTimeChange(f"slope {sl.max():.6g} above the declared bound {self.max_slope}")

    @classmethod
    def identity(cls, horizon: float) -> TimeChange:
        return cls(np.array([0.0, horizon]), np.array([0.0, horizon]))

    @classmethod
    def from_slopes(cls, lengths: Sequence[float], slopes: Sequence[float], **kw) -> TimeChange:
        lengths = np.asarray(lengths, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        return cls(np.concatenate([[0.0], np.cumsum(lengths)]), np.concatenate([[0.0], np.cumsum(lengths * slopes)]), **kw)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    @property
    def domain_end(self) -> float:
        return float(self.knots[-1])

    @property
    def image_end(self) -> float:
        return float(self.values[-1])

    def __call__(self, s):
        return np.interp(s, self.knots, self.values)

    def inverse(self, sigma):
        return np.interp(sigma, self.values, self.knots)

    def slope_at(self, s) -> np.ndarray:
        i = np.clip(np.searchsorted(self.knots, s, side="right") - 1, 0, self.knots.size - 2)
        return self.slopes[i]


def reparametrize(z: ExtendedProcess, sigma: TimeChange, h: float | None = None) -> ExtendedProcess:
    """Equivalent process ``(w0, w) = ((w0~, w~) o sigma) sigma'`` on ``[0, sigma^-1(S)]``.

    The new control is integrated afresh, so endpoint agreement with ``z`` is a
    genuine check of rate-independence rather than an interpolation identity.
    """
    S = z.horizon
    if abs(sigma.image_end - S) > 1e-9 * max(1.0, S):
        raise BadTimeChange(f"sigma maps onto [0, {sigma.image_end}] but the process horizon is {S}")
    c = z.control
    pts = np.concatenate([sigma.knots, sigma.inverse(c.breakpoints)])
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * max(1.0, sigma.domain_end)])
    pts = pts[keep]
    pts[0] = 0.0
    pts[-1] = sigma.domain_end
    mids = 0.5 * (pts[:-1] + pts[1:])
    idx = c.interval_index(sigma(mids))
    slope = sigma.slope_at(mids)
    control = ControlSignal(pts, c.w0[idx] * slope, c.w[idx] * slope[:, None])
    if h is None:
        h = z.h * sigma.domain_end / S
    return simulate_extended(z.system, control, z.x0, h)


# ---------------------------------------------------------------------------
# Feasibility


@dataclass(frozen=True)
class FeasibilityReport:
    distance: float
    beta: float
    energy_bound: float
    eta: float
    within_target: bool
    energy_ok: bool

    @property
    def feasible(self) -> bool:
        return self.within_target and self.energy_ok

    def to_dict(self) -> dict:
        return {"distance": self.distance, "beta": self.beta,
                "energy_bound": "inf" if math.isinf(self.energy_bound) else self.energy_bound,
                "eta": self.eta, "within_target": self.within_target, "energy_ok": self.energy_ok,
                "feasible": self.feasible}


def check_feasible(z: ExtendedProcess, target, K: float = math.inf, eta: float = 0.0) -> FeasibilityReport:
    """Endpoint ``(y0(S), y(S))`` within ``eta`` of the target and ``beta(S) <= K + eta``."""
    t, x, b = z.endpoint()
    d = target.distance(t, x)
    return FeasibilityReport(d, b, K, eta, d <= eta, b <= K + eta)


# ---------------------------------------------------------------------------
# Export


def write_extended_csv(z: ExtendedProcess, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "y0"] + [f"y{i + 1}" for i in range(z.n)] + ["beta"])
        for row in z.trajectory_rows():
            w.writerow([repr(v) for v in row])


def write_strict_csv(p: StrictProcess, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(p.system.n)] + ["v"])
        for row in p.trajectory_rows():
            w.writerow([repr(v) for v in row])


def write_control_json(control: ControlSignal, path: str | Path) -> None:
    Path(path).write_text(json.dumps(control.to_dict(), indent=2) + "\n")
