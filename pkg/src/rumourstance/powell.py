"""Derivative-free minimization by Powell's conjugate direction method.

Line minimizations sample a symmetric bracket on a grid, widen it while the
best sample sits on its edge, then refine between the best sample's
neighbours with golden-section search. The best point ever evaluated is
returned, so the search also behaves on piecewise-constant objectives such as
a macro F1 score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


class NonFiniteObjective(ValueError):
    pass


@dataclass
class PowellResult:
    x: np.ndarray
    fun: float
    cycles: int
    nfev: int
    history: list = field(default_factory=list)

    def __iter__(self):
        yield self.x
        yield self.fun


class _Counted:
    def __init__(self, f):
        self.f = f
        self.n = 0

    def __call__(self, x) -> float:
        self.n += 1
        v = float(self.f(x))
        if not math.isfinite(v):
            raise NonFiniteObjective(f"objective returned {v} at {x}")
        return v


def line_minimize(phi: Callable[[float], float], f0: float, width: float = 1.0, samples: int = 32,
                  xtol: float = 1e-10, max_widen: int = 8, extra=()) -> tuple[float, float]:
    """Minimize phi(t) near t = 0; returns (t, phi(t)) with phi(t) <= f0.

    ``extra`` step values are evaluated as well and compete with the grid.
    """
    half = max(samples // 2, 1)
    best_t, best_f = 0.0, f0
    grid = None
    for _ in range(max_widen + 1):
        grid = np.linspace(-width, width, 2 * half + 1)
        vals = np.array([f0 if t == 0.0 else phi(float(t)) for t in grid])
        m = vals.min()
        cand = np.flatnonzero(vals == m)
        i = int(cand[np.argmin(np.abs(grid[cand]))])  # ties go to the smallest step
        if vals[i] < best_f:
            best_t, best_f = float(grid[i]), float(vals[i])
        if 0 < i < len(grid) - 1 or vals[i] >= f0:
            break
        width *= 4.0

    for t in extra:
        t = float(t)
        if t == 0.0 or not math.isfinite(t):
            continue
        v = phi(t)
        if v < best_f or (v == best_f and abs(t) < abs(best_t)):
            best_t, best_f = t, v

    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, len(grid) - 1)])
    a, b = lo, hi
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = phi(c), phi(d)
    for t, v in ((c, fc), (d, fd)):
        if v < best_f:
            best_t, best_f = t, v
    while abs(b - a) > xtol * (1.0 + abs(best_t)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = phi(c)
            t, v = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = phi(d)
            t, v = d, fd
        if v < best_f:
            best_t, best_f = t, v
    return best_t, best_f


def powell_minimize(f: Callable[[np.ndarray], float], x0, ftol: float = 1e-12, max_iter: int = 200,
                    step: float = 1.0, samples: int = 32, xtol: float = 1e-10,
                    candidates: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None) -> PowellResult:
    """Minimize ``f`` from ``x0``.

    Each cycle line-minimizes along every direction in turn. Afterwards the
    net displacement replaces the direction of largest decrease when the
    extrapolation test of the modified method accepts it. Stops when a cycle
    improves ``f`` by less than ``ftol`` or after ``max_iter`` cycles.
    ``history`` holds f at the start and after each cycle. ``candidates(x, d)``
    may supply extra step sizes along ``d`` worth trying, for instance the
    breakpoints of a piecewise-constant objective.
    """
    fc = _Counted(f)
    x = np.array(x0, dtype=np.float64).reshape(-1)
    n = len(x)
    fx = fc(x)
    dirs = [step * row for row in np.eye(n)]
    history = [fx]
    cycles = 0

    def along(p, d, fp):
        extra = () if candidates is None else candidates(p, d)
        t, ft = line_minimize(lambda s: fc(p + s * d), fp, 1.0, samples, xtol, extra=extra)
        return p + t * d, ft

    for cycles in range(1, max_iter + 1):
        x_start, f_start = x.copy(), fx
        drop, ibig = 0.0, 0
        for i, d in enumerate(dirs):
            before = fx
            x, fx = along(x, d, fx)
            if before - fx > drop:
                drop, ibig = before - fx, i
        if f_start - fx < ftol:
            history.append(fx)
            break
        d_new = x - x_start
        f_ext = fc(x + d_new)
        if f_ext < f_start:
            crit = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - drop) ** 2 - drop * (f_start - f_ext) ** 2
            if crit < 0.0:
                x, fx = along(x, d_new, fx)
                dirs[ibig] = dirs[-1]
                dirs[-1] = d_new
        history.append(fx)
    return PowellResult(x, fx, cycles, fc.n, history)
