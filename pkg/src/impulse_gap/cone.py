"""Polyhedral control cones ``C = C1 x C2`` given by generator lists.

``C1`` (the first ``m1`` coordinates) always contains the lines spanned by the
canonical basis vectors, so it is all of R^m1; ``C2`` is generated by the
user's vectors and must be pointed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, lsq_linear, nnls

from .errors import InputError, NumericalError


class DegenerateCone(NumericalError):
    pass


class ConeError(InputError):
    pass


@dataclass(frozen=True, eq=False)
class ControlCone:
    m1: int
    m2: int
    c2_generators: tuple[tuple[float, ...], ...] = ()
    c1_extra: tuple[tuple[float, ...], ...] = ()

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @classmethod
    def build(cls, m1: int, m2: int, c2_generators: Sequence[Sequence[float]] = (),
              c1_extra: Sequence[Sequence[float]] = ()) -> ControlCone:
        g2 = tuple(tuple(float(v) for v in g) for g in c2_generators)
        e1 = tuple(tuple(float(v) for v in g) for g in c1_extra)
        for g in g2:
            if len(g) != m2:
                raise ConeError(f"C2 generator {g} does not have length m2={m2}")
        for g in e1:
            if len(g) != m1:
                raise ConeError(f"C1 generator {g} does not have length m1={m1}")
        return cls(m1, m2, g2, e1)

    @classmethod
    def full(cls, m: int) -> ControlCone:
        return cls(m, 0)

    @classmethod
    def orthant(cls, m: int) -> ControlCone:
        return cls(0, m, tuple(tuple(float(i == j) for j in range(m)) for i in range(m)))

    @cached_property
    def generators(self) -> np.ndarray:
        """Generator matrix of shape ``(m, N)``."""
        cols = []
        for i in range(self.m1):
            e = np.zeros(self.m)
            e[i] = 1.0
            cols.extend([e, -e])
        for g in self.c1_extra:
            cols.append(np.concatenate([g, np.zeros(self.m2)]))
        for g in self.c2_generators:
            cols.append(np.concatenate([np.zeros(self.m1), g]))
        if not cols:
            return np.zeros((self.m, 0))
        return np.array(cols, dtype=float).T

    @cached_property
    def unit_generators(self) -> np.ndarray:
        V = self.generators
        norms = np.linalg.norm(V, axis=0)
        keep = norms > 0
        return V[:, keep] / norms[keep]

    @property
    def is_full_space(self) -> bool:
        return self.m2 == 0

    def _check_rank(self):
        if self.m >= 1 and (self.generators.size == 0 or np.linalg.matrix_rank(self.generators) == 0):
            raise DegenerateCone("generator matrix has rank 0")

    def project(self, ell: Sequence[float]) -> np.ndarray:
        """Euclidean projection onto the cone (Moreau: ``ell = P + r``, ``r`` polar)."""
        ell = np.asarray(ell, dtype=float)
        if self.m == 0:
            return np.zeros(0)
        self._check_rank()
        if self.is_full_space:
            return ell.copy()
        out = np.empty(self.m)
        out[: self.m1] = ell[: self.m1]
        out[self.m1:] = self._project_c2(ell[self.m1:])
        return out

    def _project_c2(self, ell2: np.ndarray) -> np.ndarray:
        V = np.array(self.c2_generators, dtype=float).T if self.c2_generators else np.zeros((self.m2, 0))
        if V.shape[1] == 0:
            return np.zeros(self.m2)
        coef, _ = nnls(V, ell2)
        coef = self._polish(V, ell2, coef)
        # nnls occasionally stops at a non-optimal point; fall back to BVLS when KKT fails.
        scale = max(1.0, float(np.linalg.norm(ell2))) * max(1.0, float(np.abs(V).max()))
        if np.max(V.T @ (ell2 - V @ coef)) > 1e-12 * scale:
            coef = lsq_linear(V, ell2, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
            coef = self._polish(V, ell2, np.maximum(coef, 0.0))
        return V @ coef

    @staticmethod
    def _polish(V: np.ndarray, ell2: np.ndarray, coef: np.ndarray) -> np.ndarray:
        # Exact least squares on the passive set; the solvers stop at a looser tolerance.
        passive = coef > 0
        if passive.any():
            sol, *_ = np.linalg.lstsq(V[:, passive], ell2, rcond=None)
            if np.all(sol > 0):
                coef = np.zeros_like(coef)
                coef[passive] = sol
        return coef

    def distance(self, w: Sequence[float]) -> float:
        w = np.asarray(w, dtype=float)
        if self.m == 0:
            return 0.0
        return float(np.linalg.norm(w - self.project(w)))

    def contains(self, w: Sequence[float], tol: float = 1e-9) -> bool:
        return self.distance(w) <= tol * max(1.0, float(np.linalg.norm(w)))

    def sup_unit(self, ell: Sequence[float]) -> tuple[float, np.ndarray]:
        """``max {ell . c : c in C, |c| = 1}`` and a maximizing ``c``.

        Equals ``|P(ell)|`` when the projection is nonzero; otherwise ``ell`` is
        polar and the maximum is attained on a normalized generator.
        """
        ell = np.asarray(ell, dtype=float)
        if self.m == 0:
            return -np.inf, np.zeros(0)
        P = self.project(ell)
        nP = float(np.linalg.norm(P))
        scale = max(1.0, float(np.linalg.norm(ell)))
        if nP > 1e-13 * scale:
            return nP, P / nP
        U = self.unit_generators
        vals = ell @ U
        j = int(np.argmax(vals))
        return float(vals[j]), U[:, j].copy()

    def check_pointed_c2(self) -> None:
        """Raise ConeError if ``C2`` contains a line (some generator's negation is in the cone)."""
        if not self.c2_generators:
            return
        V = np.array(self.c2_generators, dtype=float).T
        for j in range(V.shape[1]):
            if not np.any(V[:, j]):
                continue
            res = linprog(np.zeros(V.shape[1]), A_eq=V, b_eq=-V[:, j], bounds=[(0, None)] * V.shape[1],
                          method="highs")
            if res.status == 0:
                raise ConeError(f"C2 contains no lines is violated: -{tuple(V[:, j])} lies in the cone")

    def sample_directions(self, count: int, rng: np.random.Generator, max_tries: int = 50) -> np.ndarray:
        """Unit generators plus ``count`` unit directions inside the cone, shape ``(m, K)``.

        Directions are rejection-sampled from the sphere; when the cone is too
        thin for that, random nonnegative generator combinations are used.
        """
        if self.m == 0:
            return np.zeros((0, 0))
        dirs = [self.unit_generators]
        got = 0
        tries = 0
        out = []
        while got < count and tries < max_tries * count:
            tries += 1
            c = rng.standard_normal(self.m)
            c /= np.linalg.norm(c)
            if self.contains(c, 1e-12):
                out.append(c)
                got += 1
        V = self.generators
        while got < count and V.shape[1]:
            c = V @ rng.exponential(size=V.shape[1])
            nc = np.linalg.norm(c)
            if nc > 0:
                out.append(c / nc)
                got += 1
        if out:
            dirs.append(np.array(out).T)
        return np.concatenate(dirs, axis=1)

    def to_dict(self) -> dict:
        return {"m1": self.m1, "m2": self.m2, "C2_generators": [list(g) for g in self.c2_generators],
                "C1_extra_generators": [list(g) for g in self.c1_extra]}
