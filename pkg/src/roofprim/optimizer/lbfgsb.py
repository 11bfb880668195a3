"""Bound-constrained limited-memory BFGS (L-BFGS-B).

Follows the structure of Byrd, Lu, Nocedal and Zhu's method: a generalized
Cauchy point along the projected-gradient path fixes the active set, the
quadratic model is then minimized over the remaining free variables, and a
line search along the resulting direction enforces the Wolfe conditions.

Parameter vectors here are short (a roof primitive has 7 or 8 entries), so
the limited-memory matrix ``B = theta*I - W M W^T`` is assembled densely
from the stored correction pairs instead of being applied implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import BoundsError

_MACHEPS = np.finfo(float).eps


@dataclass
class Trace:
    history: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    iterations: int = 0
    evaluations: int = 0
    gradient_evaluations: int = 0
    converged: bool = False
    message: str = ""


class _Memory:
    def __init__(self, size):
        self.size = size
        self.s = []
        self.y = []
        self.theta = 1.0

    def clear(self):
        self.s.clear()
        self.y.clear()
        self.theta = 1.0

    def __len__(self):
        return len(self.s)

    def push(self, s, y):
        sy = float(s @ y)
        yy = float(y @ y)
        if sy <= _MACHEPS * yy or sy <= 0:
            return False
        self.s.append(s)
        self.y.append(y)
        if len(self.s) > self.size:
            self.s.pop(0)
            self.y.pop(0)
        self.theta = yy / sy
        return True

    def matrix(self, n):
        if not self.s:
            return np.eye(n)
        S = np.column_stack(self.s)
        Y = np.column_stack(self.y)
        theta = self.theta
        SY = S.T @ Y
        D = np.diag(np.diag(SY))
        L = np.tril(SY, k=-1)
        middle = np.block([[-D, L.T], [L, theta * (S.T @ S)]])
        W = np.hstack([Y, theta * S])
        try:
            M = np.linalg.inv(middle)
        except np.linalg.LinAlgError:
            self.clear()
            return np.eye(n)
        B = theta * np.eye(n) - W @ M @ W.T
        return 0.5 * (B + B.T)


def projected_gradient(x, g, lower, upper):
    return np.clip(x - g, lower, upper) - x


def cauchy_point(x, g, lower, upper, B):
    """Generalized Cauchy point of the quadratic model along P(x - t g).

    Returns the point and a boolean mask of the variables it leaves at a
    bound.
    """
    n = x.size
    t_break = np.full(n, np.inf)
    neg = g < 0
    pos = g > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_break[neg] = (x[neg] - upper[neg]) / g[neg]
        t_break[pos] = (x[pos] - lower[pos]) / g[pos]
    t_break[g == 0] = np.inf
    d = -g.copy()
    fixed = t_break <= 0
    d[fixed] = 0.0
    z = np.zeros(n)
    xc = x.copy()

    f1 = float(g @ d)
    Bd = B @ d
    f2 = float(d @ Bd)
    t_old = 0.0
    order = np.argsort(t_break)
    k = 0
    while k < n and t_break[order[k]] <= 0:
        k += 1
    while True:
        if f1 >= 0 or not np.any(d):
            break
        t_next = t_break[order[k]] if k < n else np.inf
        dt = t_next - t_old
        dt_min = -f1 / f2 if f2 > 0 else np.inf
        if dt_min < dt:
            z = z + dt_min * d
            break
        if not math.isfinite(t_next):
            break
        z = z + dt * d
        t_old = t_next
        while k < n and t_break[order[k]] <= t_next:
            b = order[k]
            z[b] = (upper[b] if g[b] < 0 else lower[b]) - x[b]
            d[b] = 0.0
            fixed[b] = True
            k += 1
        Bd = B @ d
        f1 = float(g @ d + z @ Bd)
        f2 = float(d @ Bd)
    xc = np.clip(x + z, lower, upper)
    xc[fixed] = np.where(g[fixed] < 0, upper[fixed], lower[fixed])
    return xc, fixed


def subspace_step(x, g, xc, fixed, lower, upper, B):
    """Minimize the model over free variables, starting from the Cauchy point."""
    free = ~fixed
    if not free.any():
        return xc
    r = g + B @ (xc - x)
    try:
        du = np.linalg.solve(B[np.ix_(free, free)], -r[free])
    except np.linalg.LinAlgError:
        return xc
    xf = xc[free]
    lo, hi = lower[free], upper[free]
    alpha = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        up = du > 0
        dn = du < 0
        if up.any():
            alpha = min(alpha, float(np.min((hi[up] - xf[up]) / du[up])))
        if dn.any():
            alpha = min(alpha, float(np.min((lo[dn] - xf[dn]) / du[dn])))
    alpha = max(alpha, 0.0)
    xbar = xc.copy()
    xbar[free] = np.clip(xf + alpha * du, lo, hi)
    return xbar


def _max_step(x, d, lower, upper):
    step = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        up = d > 0
        dn = d < 0
        if up.any():
            step = min(step, float(np.min((upper[up] - x[up]) / d[up])))
        if dn.any():
            step = min(step, float(np.min((lower[dn] - x[dn]) / d[dn])))
    return min(step, 1e10)


def _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi):
    # minimizer of the quadratic through (a_lo, f_lo, d_lo) and (a_hi, f_hi), safeguarded
    span = a_hi - a_lo
    denom = 2.0 * (f_hi - f_lo - d_lo * span)
    if denom > 0:
        a = a_lo - d_lo * span * span / denom
        lo, hi = sorted((a_lo, a_hi))
        margin = 0.1 * (hi - lo)
        if lo + margin <= a <= hi - margin:
            return a
    return 0.5 * (a_lo + a_hi)


def wolfe_search(phi, dphi, f0, g0d, a_init, a_max, c1=1e-3, c2=0.9, max_steps=30):
    """Line search for the strong Wolfe conditions on ``[0, a_max]``.

    ``phi(a)`` returns the objective and ``dphi(a)`` the directional
    derivative (and caches the gradient). When the curvature condition
    cannot be met, the best step with sufficient decrease is returned; the
    search fails (returns ``None``) only if no such step is found.
    """
    a_prev, f_prev, d_prev = 0.0, f0, g0d
    a = min(a_init, a_max)
    best = None  # (a, f) satisfying sufficient decrease
    for i in range(max_steps):
        fa = phi(a)
        armijo = fa <= f0 + c1 * a * g0d
        if not armijo or (i > 0 and fa >= f_prev):
            return _zoom(phi, dphi, f0, g0d, a_prev, f_prev, d_prev, a, fa, c1, c2, best, max_steps)
        best = (a, fa)
        da = dphi(a)
        if abs(da) <= -c2 * g0d:
            return a
        if da >= 0:
            return _zoom(phi, dphi, f0, g0d, a, fa, da, a_prev, f_prev, c1, c2, best, max_steps)
        if a >= a_max:
            return a
        a_prev, f_prev, d_prev = a, fa, da
        a = min(4.0 * a, a_max)
    return best[0] if best else None


def _zoom(phi, dphi, f0, g0d, a_lo, f_lo, d_lo, a_hi, f_hi, c1, c2, best, max_steps):
    for _ in range(max_steps):
        if abs(a_hi - a_lo) <= 1e-14 * max(1.0, abs(a_lo)):
            break
        a = _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi)
        fa = phi(a)
        if fa > f0 + c1 * a * g0d or fa >= f_lo:
            a_hi, f_hi = a, fa
            continue
        if best is None or fa < best[1]:
            best = (a, fa)
        da = dphi(a)
        if abs(da) <= -c2 * g0d:
            return a
        if da * (a_hi - a_lo) >= 0:
            a_hi, f_hi = a_lo, f_lo
        a_lo, f_lo, d_lo = a, fa, da
    if best is not None and best[0] > 0:
        return best[0]
    return None


def lbfgsb_minimize(objective, gradient, x0, lower, upper, *, memory_pairs=10,
                    max_iterations=200, gradient_tolerance=1e-6,
                    relative_decrease=1e-10, record_iterates=True):
    """Minimize ``objective`` subject to ``lower <= x <= upper``.

    ``gradient(x)`` must return the gradient at ``x``. Iteration stops when
    the projected gradient's infinity norm drops to ``gradient_tolerance``,
    when an accepted step lowers the objective by less than
    ``relative_decrease`` (relative), or after ``max_iterations``. A line
    search that cannot make progress even from a steepest-descent restart
    ends the run with ``converged=False`` and the best point so far.

    Returns ``(x, f, trace)``.
    """
    x = np.array(x0, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if x.shape != lower.shape or x.shape != upper.shape:
        raise BoundsError("x0 and bounds must have the same shape")
    if np.any(lower > upper) or np.any(x < lower) or np.any(x > upper):
        raise BoundsError("x0 lies outside the box [lower, upper]")
    n = x.size
    trace = Trace()

    def f_eval(point):
        trace.evaluations += 1
        return float(objective(point))

    def g_eval(point):
        trace.gradient_evaluations += 1
        return np.asarray(gradient(point), dtype=float)

    f = f_eval(x)
    if not math.isfinite(f):
        raise BoundsError("objective is not finite at x0")
    g = g_eval(x)
    trace.history.append((0, f))
    if record_iterates:
        trace.iterates.append(x.copy())
    memory = _Memory(memory_pairs)

    while True:
        pg = projected_gradient(x, g, lower, upper)
        if np.max(np.abs(pg)) <= gradient_tolerance:
            trace.converged = True
            trace.message = "projected gradient below tolerance"
            break
        if trace.iterations >= max_iterations:
            trace.message = "iteration limit reached"
            break

        B = memory.matrix(n)
        xc, fixed = cauchy_point(x, g, lower, upper, B)
        xbar = subspace_step(x, g, xc, fixed, lower, upper, B)
        d = xbar - x
        g0d = float(g @ d)
        if not g0d < 0:
            if len(memory):
                memory.clear()
                continue
            trace.message = "no descent direction"
            break

        a_max = _max_step(x, d, lower, upper)
        a_init = 1.0 if len(memory) else min(1.0 / max(np.linalg.norm(d), 1e-300), a_max)
        cache = {}

        def phi(a):
            xa = np.clip(x + a * d, lower, upper)
            fa = f_eval(xa)
            cache[a] = [xa, fa, None]
            return fa if math.isfinite(fa) else np.inf

        def dphi(a):
            entry = cache[a]
            if entry[2] is None:
                entry[2] = g_eval(entry[0])
            return float(entry[2] @ d)

        step = wolfe_search(phi, dphi, f, g0d, a_init, a_max)
        if step is None:
            if len(memory):
                memory.clear()
                continue
            trace.message = "line search failed"
            break

        x_new, f_new, g_new = cache[step]
        if g_new is None:
            g_new = g_eval(x_new)
        fresh = len(memory) == 0
        memory.push(x_new - x, g_new - g)
        f_old = f
        x, f, g = x_new, f_new, g_new
        trace.iterations += 1
        trace.history.append((trace.iterations, f))
        if record_iterates:
            trace.iterates.append(x.copy())
        if (f_old - f) <= relative_decrease * max(abs(f_old), abs(f), 1.0):
            if not fresh:
                memory.clear()
                continue
            trace.converged = True
            trace.message = "relative reduction below tolerance"
            break

    return x, f, trace
