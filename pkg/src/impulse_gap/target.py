"""Endpoint targets in (t, x) space and their linear approximating cones."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import InputError


class TargetError(InputError):
    pass


@dataclass(frozen=True)
class ApproximatingCone:
    """A linear subspace ``K`` of R^(1+n) with orthonormal bases of ``K`` and ``K^perp``."""

    basis: np.ndarray  # (1+n, k)
    perp_basis: np.ndarray  # (1+n, 1+n-k)

    @classmethod
    def from_constraint_jacobian(cls, J: np.ndarray) -> ApproximatingCone:
        J = np.atleast_2d(np.asarray(J, dtype=float))
        d = J.shape[1]
        if J.shape[0] == 0:
            return cls(np.eye(d), np.zeros((d, 0)))
        _, s, Vt = np.linalg.svd(J)
        rank = int(np.sum(s > 1e-8 * max(1.0, s[0])))
        return cls(Vt[rank:].T.copy(), Vt[:rank].T.copy())

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def component_in_cone(self, v: Sequence[float]) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.basis @ (self.basis.T @ v)

    def component_in_perp(self, v: Sequence[float]) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.perp_basis @ (self.perp_basis.T @ v)


@dataclass(frozen=True)
class PointTarget:
    t: float
    x: tuple[float, ...]

    kind = "point"

    @property
    def n(self) -> int:
        return len(self.x)

    def distance(self, t: float, x: Sequence[float]) -> float:
        d = np.concatenate([[t - self.t], np.asarray(x, dtype=float) - np.asarray(self.x)])
        return float(np.linalg.norm(d))

    def endpoint_residual(self, t: float, x: Sequence[float]) -> np.ndarray:
        return np.concatenate([[t - self.t], np.asarray(x, dtype=float) - np.asarray(self.x)])

    def approximating_cone(self, t: float, x: Sequence[float]) -> ApproximatingCone:
        d = 1 + self.n
        return ApproximatingCone(np.zeros((d, 0)), np.eye(d))

    def to_dict(self) -> dict:
        return {"type": "point", "t": self.t, "x": list(self.x)}


@dataclass(frozen=True)
class FreeTarget:
    """The whole space: no endpoint constraint."""

    n: int

    kind = "free"

    def distance(self, t, x) -> float:
        return 0.0

    def endpoint_residual(self, t, x) -> np.ndarray:
        return np.zeros(0)

    def approximating_cone(self, t, x) -> ApproximatingCone:
        d = 1 + self.n
        return ApproximatingCone(np.eye(d), np.zeros((d, 0)))

    def to_dict(self) -> dict:
        return {"type": "free"}


@dataclass(frozen=True)
class LevelSetTarget:
    """``{(t, x) : phi_i(t, x) = 0}`` for smooth ``phi_i`` with full-rank Jacobian."""

    n: int
    constraints: tuple[ex.Expression, ...]

    kind = "level_set"

    @classmethod
    def parse(cls, texts: Sequence[str], n: int) -> LevelSetTarget:
        return cls(n, tuple(ex.parse(t, n) for t in texts))

    @cached_property
    def _phi(self):
        return ex.compile_many(self.constraints)

    @cached_property
    def _dphi(self):
        flat = [ex.differentiate(c, v) for c in self.constraints for v in [ex.TIME, *range(self.n)]]
        return ex.compile_many(flat)

    def residual(self, z: np.ndarray) -> np.ndarray:
        return np.array(self._phi(z[1:], z[0]), dtype=float)

    def endpoint_residual(self, t: float, x: Sequence[float]) -> np.ndarray:
        return np.array(self._phi(np.asarray(x, dtype=float), t), dtype=float)

    def jacobian(self, t: float, x: Sequence[float]) -> np.ndarray:
        vals = self._dphi(np.asarray(x, dtype=float), t)
        return np.array(vals, dtype=float).reshape(len(self.constraints), 1 + self.n)

    def distance(self, t: float, x: Sequence[float], max_iter: int = 50) -> float:
        """Distance to the level set via minimum-norm Gauss-Newton projection."""
        z0 = np.concatenate([[t], np.asarray(x, dtype=float)])
        z = z0.copy()
        for _ in range(max_iter):
            r = self.residual(z)
            if np.linalg.norm(r) <= 1e-14:
                break
            J = self.jacobian(z[0], z[1:])
            z = z - np.linalg.lstsq(J, r, rcond=None)[0]
        if np.linalg.norm(self.residual(z)) > 1e-8:
            return float("inf")
        return float(np.linalg.norm(z - z0))

    def approximating_cone(self, t: float, x: Sequence[float]) -> ApproximatingCone:
        J = self.jacobian(t, x)
        s = np.linalg.svd(J, compute_uv=False)
        if s.size and s[-1] < 1e-8:
            raise TargetError(f"level-set Jacobian is rank deficient at the endpoint (smallest singular value {s[-1]:.3g})")
        return ApproximatingCone.from_constraint_jacobian(J)

    def to_dict(self) -> dict:
        return {"type": "level_set", "constraints": [str(c) for c in self.constraints]}


TargetSpec = PointTarget | LevelSetTarget | FreeTarget
