"""Random generators shared by the test suites."""

from __future__ import annotations

import numpy as np

from impulse_gap.cone import ControlCone
from impulse_gap.fields import VectorField
from impulse_gap.process import ControlSignal, ControlSystem, StrictControl, simulate_extended

_LEAF_FUNCS = ("sin({})", "cos({})", "exp(0.3 * {})", "sqrt(1 + {} ^ 2)", "{} / (2 + sin({}))", "{} ^ 2", "{} ^ 3")


def random_expression(rng: np.random.Generator, n: int, depth: int = 3, time: bool = False) -> str:
    """A smooth expression over x1..xn (and t) that is finite everywhere."""
    names = [f"x{i + 1}" for i in range(n)] + (["t"] if time else [])
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.3:
            return repr(round(float(rng.uniform(-2, 2)), 3))
        return str(rng.choice(names))
    kind = rng.integers(0, 4)
    a = random_expression(rng, n, depth - 1, time)
    if kind == 0:
        b = random_expression(rng, n, depth - 1, time)
        op = str(rng.choice(["+", "-", "*"]))
        return f"({a} {op} {b})"
    if kind == 1:
        return "-" + f"({a})"
    template = str(rng.choice(_LEAF_FUNCS))
    return template.format(*([f"({a})"] * template.count("{}")))


def random_polynomial(rng: np.random.Generator, n: int, degree: int = 2) -> str:
    terms = [repr(round(float(rng.uniform(-1, 1)), 3))]
    for i in range(n):
        terms.append(f"{rng.uniform(-1, 1):.3f} * x{i + 1}")
        if degree >= 2:
            for j in range(i, n):
                terms.append(f"{rng.uniform(-1, 1):.3f} * x{i + 1} * x{j + 1}")
    return " + ".join(terms)


def polynomial_field(rng: np.random.Generator, n: int, degree: int = 2) -> VectorField:
    return VectorField.parse([random_polynomial(rng, n, degree) for _ in range(n)], n)


def bounded_field(rng: np.random.Generator, n: int) -> VectorField:
    """Smooth field with bounded values and derivatives."""
    comps = []
    for _ in range(n):
        i, j = rng.integers(0, n, size=2)
        a, b, c = rng.uniform(-1, 1, size=3)
        comps.append(f"{a:.3f} * sin(x{i + 1}) + {b:.3f} * cos(x{j + 1}) + {c:.3f}")
    return VectorField.parse(comps, n)


def random_cone(rng: np.random.Generator, m: int) -> ControlCone:
    m1 = int(rng.integers(0, m + 1))
    m2 = m - m1
    gens = []
    if m2:
        # Generators in an open half-space keep C2 pointed.
        axis = rng.standard_normal(m2)
        axis /= np.linalg.norm(axis)
        for _ in range(int(rng.integers(1, 2 * m2 + 2))):
            v = rng.standard_normal(m2)
            v = v - (v @ axis) * axis + abs(rng.uniform(0.2, 1.5)) * axis
            gens.append(v.tolist())
    return ControlCone.build(m1, m2, gens)


def random_system(rng: np.random.Generator, n: int, m: int, cone: ControlCone | None = None) -> ControlSystem:
    f = bounded_field(rng, n)
    g = tuple(bounded_field(rng, n) for _ in range(m))
    return ControlSystem(f, g, cone or ControlCone.full(m))


def cone_vector(rng: np.random.Generator, cone: ControlCone, scale: float = 1.0) -> np.ndarray:
    V = cone.generators
    if V.shape[1] == 0:
        return np.zeros(cone.m)
    coef = rng.exponential(size=V.shape[1]) * (rng.random(V.shape[1]) < 0.7)
    w = V @ coef
    nrm = np.linalg.norm(w)
    return w / nrm * scale * rng.uniform(0.1, 1.0) if nrm > 0 else w


def random_control(rng: np.random.Generator, cone: ControlCone, pieces: int | None = None, horizon: float | None = None,
                   canonical: bool = False, strict_positive: bool = False, jumps: bool = True) -> ControlSignal:
    pieces = pieces or int(rng.integers(1, 6))
    horizon = horizon or float(rng.uniform(0.5, 2.0))
    bp = np.sort(rng.uniform(0, horizon, size=pieces - 1))
    bp = np.concatenate([[0.0], bp, [horizon]])
    keep = np.concatenate([[True], np.diff(bp) > 1e-3])
    bp = bp[keep]
    bp[-1] = horizon
    k = bp.size - 1
    w0 = rng.uniform(0.05 if strict_positive else 0.0, 1.5, size=k)
    if jumps and not strict_positive:
        w0[rng.random(k) < 0.3] = 0.0
    w = np.array([cone_vector(rng, cone, rng.uniform(0.2, 2.0)) for _ in range(k)]).reshape(k, cone.m)
    rate = w0 + np.linalg.norm(w, axis=1)
    w0 = np.where(rate > 0, w0, 1.0)
    if canonical:
        rate = w0 + np.linalg.norm(w, axis=1)
        w0, w = w0 / rate, w / rate[:, None]
    return ControlSignal(bp, w0, w)


def random_strict_control(rng: np.random.Generator, cone: ControlCone, pieces: int | None = None) -> StrictControl:
    pieces = pieces or int(rng.integers(1, 6))
    T = float(rng.uniform(0.5, 2.0))
    bp = np.concatenate([[0.0], np.sort(rng.uniform(0, T, size=pieces - 1)), [T]])
    bp = bp[np.concatenate([[True], np.diff(bp) > 1e-3])]
    bp[-1] = T
    u = np.array([cone_vector(rng, cone, rng.uniform(0.0, 3.0)) for _ in range(bp.size - 1)]).reshape(-1, cone.m)
    return StrictControl(bp, u)


def random_process(rng: np.random.Generator, system: ControlSystem, **kw):
    c = random_control(rng, system.cone, **kw)
    x0 = rng.uniform(-1, 1, size=system.n)
    return simulate_extended(system, c, x0)


def commutator_defect(h: VectorField, k: VectorField, x: np.ndarray, t: float, steps: int = 50) -> float:
    """``|loop(x) - x - t [h,k](x)|`` for the four-flow loop of duration ``sqrt(t)`` each."""
    from impulse_gap.fields import lie_bracket

    n = h.n
    system = ControlSystem(VectorField.constant([0.0] * n), (h, k), ControlCone.full(2))
    a = np.sqrt(t)
    bp = a * np.arange(5)
    w = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    z = simulate_extended(system, ControlSignal(bp, np.zeros(4), w), x, h=a / steps)
    return float(np.linalg.norm(z.y[-1] - x - t * lie_bracket(h, k)(x)))


# Golden-fixture command matrix: (scenario, command, extra flags).
GOLDEN_MATRIX = [
    (sc, cmd, ())
    for sc in ("pure_jump", "reach_point")
    for cmd in ("simulate", "canonicalize", "distance", "brackets", "check-extremal", "classify")
] + [
    ("reach_point", "embed", ()),
    ("pure_jump", "probe-gap", ("--budget", "60", "--radii", "0.1,0.3")),
    ("reach_point", "probe-gap", ("--budget", "60", "--radii", "0.1,0.3")),
]


def golden_name(scenario: str, command: str) -> str:
    return f"{scenario}__{command}"


def report_body(text: str) -> str:
    """Report text without the timestamp header line."""
    lines = text.splitlines()
    assert lines[1].lstrip().startswith('"header"')
    return "\n".join(lines[:1] + lines[2:])


def assert_close_json(a, b, rel: float = 1e-9, abs_: float = 1e-12, path: str = ""):
    """Structural equality with a float tolerance."""
    if isinstance(a, dict):
        assert isinstance(b, dict) and set(a) == set(b), f"keys differ at {path or '/'}"
        for k in a:
            assert_close_json(a[k], b[k], rel, abs_, f"{path}/{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), f"lengths differ at {path or '/'}"
        for i, (x, y) in enumerate(zip(a, b)):
            assert_close_json(x, y, rel, abs_, f"{path}/{i}")
    elif isinstance(a, float) or isinstance(b, float):
        assert isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool), path
        assert abs(a - b) <= abs_ + rel * max(abs(a), abs(b)), f"{path}: {a} != {b}"
    else:
        assert a == b, f"{path}: {a!r} != {b!r}"
