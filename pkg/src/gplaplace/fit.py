"""Multi-restart quasi-Newton fitting of raw hyperparameters."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, OptimizationError
from .kernels import HyperParams
from .model import log_map_and_grad, log_mll_and_grad

__all__ = ["FitResult", "init_random", "bfgs_maximize", "maximize", "optimize"]

log = logging.getLogger(__name__)

OBJECTIVES = ("MLL", "MAP")


@dataclass
class FitResult:
    theta_hat: object
    value: float
    restart: int
    iterations: int
    converged: bool
    grad_norm: float
    objective: str = ""
    restart_values: list = field(default_factory=list)

    def to_dict(self):
        raw = self.theta_hat.raw if isinstance(self.theta_hat, HyperParams) else self.theta_hat
        return {
            "objective": self.objective,
            "value": self.value,
            "raw": [float(r) for r in np.atleast_1d(raw)],
            "restart": self.restart,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "restart_values": self.restart_values,
        }


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_random(prior, seed):
    """Raw starting point drawn from the prior; ``seed`` may be a Generator."""
    return prior.sample(_rng(seed))


def bfgs_maximize(fun_and_grad, x0, max_iters=1000, gtol=1e-6, max_step=5.0, ftol=1e-10):
    """Maximise a smooth function with BFGS and Armijo backtracking.

    ``fun_and_grad`` returns ``(value, gradient)``; it may raise
    :class:`NumericalError` or return a non-finite value, both of which make
    the line search halve its step.

    Stops when the largest gradient entry is below ``gtol`` or when three
    successive steps change the value by less than ``ftol`` relative to
    ``max(1, |value|)``.  Both count as converged.

    Returns
    -------
    x, value, grad, iterations, converged
    """

    def neg(x):
        try:
            f, g = fun_and_grad(x)
        except NumericalError:
            return np.inf, None
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, None
        return -f, -np.asarray(g, dtype=float)

    x = np.array(x0, dtype=float)
    f, g = neg(x)
    if not np.isfinite(f):
        raise OptimizationError("objective is not finite at the starting point")
    Hinv = np.eye(x.size)
    first = True
    stalls = 0
    it = 0
    for it in range(1, max_iters + 1):
        if np.max(np.abs(g)) < gtol:
            return x, -f, -g, it - 1, True
        p = -Hinv @ g
        slope = g @ p
        if slope >= 0:
            Hinv = np.eye(x.size)
            p, slope = -g, -(g @ g)
        longest = np.max(np.abs(p))
        if longest > max_step:
            p *= max_step / longest
            slope = g @ p
        step = 1.0
        for _ in range(60):
            xn = x + step * p
            fn, gn = neg(xn)
            if np.isfinite(fn) and fn <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            # no acceptable step: stationary up to round-off
            break
        s = xn - x
        yv = gn - g
        sy = s @ yv
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            if first:
                Hinv = np.eye(x.size) * (sy / (yv @ yv))
                first = False
            rho = 1.0 / sy
            V = np.eye(x.size) - rho * np.outer(s, yv)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
        stalls = stalls + 1 if f - fn <= ftol * max(1.0, abs(f)) else 0
        x, f, g = xn, fn, gn
        if stalls >= 3:
            return x, -f, -g, it, True
    return x, -f, -g, it, bool(np.max(np.abs(g)) < gtol)


def maximize(fun_and_grad, starts, max_iters=1000, gtol=1e-6):
    """Run :func:`bfgs_maximize` from every start and keep the best.

    Ties go to the lowest restart index.  Starts whose objective is never
    finite are dropped; if all are dropped :class:`OptimizationError` is
    raised with one diagnostic string per start.
    """
    best = None
    values = []
    failures = []
    for i, x0 in enumerate(starts):
        try:
            x, f, g, iters, conv = bfgs_maximize(fun_and_grad, x0, max_iters, gtol)
        except NumericalError as exc:
            failures.append(f"restart {i}: {exc}")
            values.append(None)
            continue
        values.append(float(f))
        if best is None or f > best.value:
            best = FitResult(x, float(f), i, iters, conv, float(np.max(np.abs(g))))
    if best is None:
        raise OptimizationError("all restarts failed", failures)
    best.restart_values = values
    return best


def optimize(model, prior, data, objective="MAP", restarts=5, max_iters=1000, seed=0):
    """Fit ``model`` to ``data`` by maximising the MLL or the MAP objective.

    Starts from the prior mean and from ``restarts`` draws of the prior, taken
    in sequence from one random stream so that a run with more restarts
    extends the start list of a run with fewer.
    """
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    if restarts < 1:
        raise ConfigError("restarts must be at least 1")
    rng = _rng(seed)
    starts = [prior.mean.copy()] + [init_random(prior, rng) for _ in range(restarts)]
    if objective == "MLL":
        def fg(raw):
            return log_mll_and_grad(model, raw, data)
    else:
        def fg(raw):
            return log_map_and_grad(model, prior, raw, data)
    result = maximize(fg, starts, max_iters=max_iters)
    log.debug("%s fit of %s: %.6g (restart %d)", objective, model, result.value, result.restart)
    return dataclasses.replace(
        result, theta_hat=HyperParams(result.theta_hat, model.layout), objective=objective
    )
