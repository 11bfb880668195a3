"""Finite-difference gradients."""

import math

import numpy as np

from ..errors import ObjectiveEvaluationError


def default_steps(x, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    return rel_step * np.maximum(np.abs(x), 1.0)


def fd_gradient(objective, x, steps=None, lower=None, upper=None, f0=None, kinks=False):
    """Central-difference gradient, one-sided where a bound blocks the stencil.

    With ``kinks=True`` a coordinate whose backward difference is negative
    and forward difference positive is treated as sitting in a V-shaped
    valley and gets a zero component instead of the central average, which
    for a nonsmooth objective is mostly noise.

    ``f0`` (the objective at ``x``) is only evaluated when needed. Raises
    :class:`ObjectiveEvaluationError` naming the coordinate whose stencil
    produced a non-finite value.
    """
    x = np.asarray(x, dtype=float)
    h = default_steps(x) if steps is None else np.broadcast_to(np.asarray(steps, float), x.shape)
    lower = np.full_like(x, -np.inf) if lower is None else np.asarray(lower, float)
    upper = np.full_like(x, np.inf) if upper is None else np.asarray(upper, float)
    grad = np.empty_like(x)

    def evaluate(point, i):
        value = float(objective(point))
        if not math.isfinite(value):
            raise ObjectiveEvaluationError(i, value)
        return value

    for i in range(x.size):
        fwd_ok = x[i] + h[i] <= upper[i]
        bwd_ok = x[i] - h[i] >= lower[i]
        xp = x.copy()
        if fwd_ok and bwd_ok:
            xp[i] = x[i] + h[i]
            fp = evaluate(xp, i)
            xp[i] = x[i] - h[i]
            fm = evaluate(xp, i)
            if kinks:
                if f0 is None:
                    f0 = evaluate(x, i)
                if fm > f0 and fp > f0:
                    grad[i] = 0.0
                    continue
            grad[i] = (fp - fm) / (2.0 * h[i])
            continue
        if f0 is None:
            f0 = evaluate(x, i)
        if fwd_ok:
            xp[i] = x[i] + h[i]
            grad[i] = (evaluate(xp, i) - f0) / h[i]
        elif bwd_ok:
            xp[i] = x[i] - h[i]
            grad[i] = (f0 - evaluate(xp, i)) / h[i]
        else:
            grad[i] = 0.0
    return grad
