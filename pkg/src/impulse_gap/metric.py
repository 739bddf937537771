"""Control distances ``d`` and ``d~`` and the Gronwall-type trajectory certificate.

For extended controls ``z1, z2`` with horizons ``S1, S2``

    d(z1, z2)  = |S1 - S2| + int_0^{S1 ^ S2} |w0_1 - w0_2| + |w_1 - w_2| ds
    d~(z1, z2) = |S1 - S2| + int_0^{S1 v S2} ( same, controls zero-extended )

Controls are piecewise constant, so both integrals are exact sums over the
merged breakpoint grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .process import ControlSignal, ExtendedProcess


class BoxViolation(InputError):
    pass


@dataclass(frozen=True)
class DistanceReport:
    kind: str
    total: float
    horizon_gap: float
    integral: float
    w0_part: float
    w_part: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "total": self.total, "horizon_gap": self.horizon_gap,
                "integral": self.integral, "w0_part": self.w0_part, "w_part": self.w_part}


def _as_control(z) -> ControlSignal:
    return z.control if isinstance(z, ExtendedProcess) else z


def _pieces(c1: ControlSignal, c2: ControlSignal, end: float):
    """Merged grid on ``[0, end]`` with both controls (zero beyond their horizons)."""
    pts = np.union1d(c1.breakpoints, c2.breakpoints)
    pts = pts[pts < end]
    pts = np.append(pts, end)
    lengths = np.diff(pts)
    mids = 0.5 * (pts[:-1] + pts[1:])

    def values(c: ControlSignal):
        idx = c.interval_index(mids)
        inside = (mids < c.horizon)[:, None]
        w0 = np.where(inside[:, 0], c.w0[idx], 0.0)
        w = np.where(inside, c.w[idx], 0.0)
        return w0, w

    return lengths, values(c1), values(c2)


def _distance(z1, z2, kind: str) -> DistanceReport:
    c1, c2 = _as_control(z1), _as_control(z2)
    if c1.m != c2.m:
        raise InputError(f"controls live in R^{c1.m} and R^{c2.m}")
    gap = abs(c1.horizon - c2.horizon)
    end = min(c1.horizon, c2.horizon) if kind == "d" else max(c1.horizon, c2.horizon)
    lengths, (a0, a), (b0, b) = _pieces(c1, c2, end)
    w0_part = math.fsum(lengths * np.abs(a0 - b0))
    w_part = math.fsum(lengths * np.linalg.norm(a - b, axis=1))
    integral = w0_part + w_part
    return DistanceReport(kind, gap + integral, gap, integral, w0_part, w_part)


def dist_d(z1, z2) -> DistanceReport:
    """``d``: horizon gap plus the L1 control distance on the common interval."""
    return _distance(z1, z2, "d")


def dist_dtilde(z1, z2) -> DistanceReport:
    """``d~``: horizon gap plus the L1 distance of zero-extended controls on ``[0, S1 v S2]``."""
    return _distance(z1, z2, "dtilde")


def sup_distances(z: ExtendedProcess, zbar: ExtendedProcess) -> tuple[float, float, float]:
    """Sup-norm gaps of ``y0``, ``y`` and ``beta`` over the union of both grids, extended constantly."""
    q = np.union1d(z.s, zbar.s)
    a0, a, ab = z.state_at(q)
    b0, b, bb = zbar.state_at(q)
    return (float(np.max(np.abs(a0 - b0))), float(np.max(np.linalg.norm(a - b, axis=1))),
            float(np.max(np.abs(ab - bb))))


@dataclass(frozen=True)
class CertificateReport:
    M: float
    L: float
    R_bar: float
    dtilde: float
    y0_gap: float
    y_gap: float
    beta_gap: float
    y0_bound: float
    y_bound: float
    beta_bound: float

    @property
    def checks(self) -> dict[str, bool]:
        slack = 1e-12
        return {"y0": self.y0_gap <= self.y0_bound + slack, "y": self.y_gap <= self.y_bound + slack,
                "beta": self.beta_gap <= self.beta_bound + slack}

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def margins(self) -> dict[str, float]:
        return {"y0": self.y0_bound - self.y0_gap, "y": self.y_bound - self.y_gap,
                "beta": self.beta_bound - self.beta_gap}

    def to_dict(self) -> dict:
        return {"M": self.M, "L": self.L, "R_bar": self.R_bar, "dtilde": self.dtilde,
                "gaps": {"y0": self.y0_gap, "y": self.y_gap, "beta": self.beta_gap},
                "bounds": {"y0": self.y0_bound, "y": self.y_bound, "beta": self.beta_bound},
                "margins": self.margins, "passed": self.passed}


def _box_samples(lo: np.ndarray, hi: np.ndarray, count: int, seed: int = 0) -> np.ndarray:
    n = lo.size
    per_axis = max(2, int(round(count ** (1.0 / n))))
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    lattice = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
    rand = np.random.default_rng(seed).uniform(lo[:, None], hi[:, None], size=(n, count))
    return np.concatenate([lattice, rand], axis=1)


def field_constants(system, X: np.ndarray) -> tuple[float, float]:
    """Sampled ``M = sup max(|f|, |G|_op)`` and ``L = sup max(|Df|_op, (sum_i |Dg_i|_op^2)^1/2)``."""
    Fv = system.f.many(X)
    M = float(np.max(np.linalg.norm(Fv, axis=0), initial=0.0))
    if system.m:
        G = system.G_many(X)
        M = max(M, float(np.max(np.linalg.norm(G, ord=2, axis=(1, 2)))))
    L = float(np.max(np.linalg.norm(system.f.jacobian_many(X), ord=2, axis=(1, 2)), initial=0.0))
    if system.m:
        acc = sum(np.linalg.norm(gi.jacobian_many(X), ord=2, axis=(1, 2)) ** 2 for gi in system.g)
        L = max(L, float(np.sqrt(np.max(acc))))
    return M, L


def gronwall_certificate(z: ExtendedProcess, zbar: ExtendedProcess,
                         box: tuple[Sequence[float], Sequence[float]], samples: int = 4096,
                         segment_points: int = 8) -> CertificateReport:
    """Check the three trajectory estimates against ``d~(z, zbar)``.

    ``|y0 - y0bar| <= d~``, ``|y - ybar| <= M exp(L Rbar) d~`` and
    ``|beta - betabar| <= d~`` with ``Rbar = y0bar(Sbar) + betabar(Sbar)``.
    ``M`` and ``L`` are sampled over the box, both trajectories and points on
    the segments joining them.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if lo.size != z.n or hi.size != z.n or np.any(lo > hi):
        raise InputError("box must be a pair of length-n bounds with lo <= hi")
    for name, proc in (("z", z), ("zbar", zbar)):
        out = (proc.y < lo - 1e-12) | (proc.y > hi + 1e-12)
        if np.any(out):
            k = int(np.argmax(np.any(out, axis=1)))
            raise BoxViolation(f"trajectory {name} leaves the box at s = {proc.s[k]:.6g}: y = {proc.y[k].tolist()}")
    q = np.union1d(z.s, zbar.s)
    _, ya, _ = z.state_at(q)
    _, yb, _ = zbar.state_at(q)
    lam = np.linspace(0.0, 1.0, segment_points)
    seg = (ya[None, :, :] * (1 - lam)[:, None, None] + yb[None, :, :] * lam[:, None, None]).reshape(-1, z.n).T
    X = np.concatenate([_box_samples(lo, hi, samples), seg], axis=1)
    M, L = field_constants(z.system, X)
    t_bar, _, b_bar = zbar.endpoint()
    R_bar = t_bar + b_bar
    dt = dist_dtilde(z, zbar).total
    g0, gy, gb = sup_distances(z, zbar)
    return CertificateReport(M, L, R_bar, dt, g0, gy, gb, dt, M * math.exp(L * R_bar) * dt, dt)
