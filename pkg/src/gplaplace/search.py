"""Greedy compositional kernel search.

Iteration 1 scores every base kernel; each later iteration scores
``best + B`` and ``best * B`` for every base ``B`` and keeps the winner unless
it is worse than the incumbent.  The search ends after ``depth`` iterations or
as soon as every candidate is worse.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import ConfigError, NumericalError
from .kernels import Leaf, Product, Sum, parse_kernel, render, size
from .laplace import CRITERIA, criteria_suite
from .model import GPModel, build_prior

__all__ = [
    "DEFAULT_BASES",
    "Candidate",
    "SearchTrace",
    "canonical",
    "recognition_check",
    "expand",
    "evaluate_candidate",
    "cks_search",
    "fitted_params",
]

log = logging.getLogger(__name__)

DEFAULT_BASES = ("SE", "LIN", "MAT32")


@dataclass
class Candidate:
    kernel: str
    score: float | None
    result: object = None
    error: str | None = None
    seconds: float = 0.0

    @property
    def expr(self):
        return parse_kernel(self.kernel)

    def to_dict(self):
        return {
            "kernel": self.kernel,
            "score": self.score,
            "error": self.error,
            "seconds": self.seconds,
            "result": None if self.result is None else self.result.to_dict(),
        }


@dataclass
class SearchTrace:
    criterion: str
    depth: int
    bases: tuple
    seed: int
    tie_tol: float = 1e-4
    iterations: list = field(default_factory=list)
    chosen: list = field(default_factory=list)
    partial: bool = False

    @property
    def best(self):
        return self.chosen[-1] if self.chosen else None

    @property
    def best_expr(self):
        return None if self.best is None else parse_kernel(self.best.kernel)

    def candidates(self):
        return [c for it in self.iterations for c in it]

    def to_dict(self):
        return {
            "criterion": self.criterion,
            "depth": self.depth,
            "bases": list(self.bases),
            "seed": self.seed,
            "tie_tol": self.tie_tol,
            "partial": self.partial,
            "chosen": [c.kernel for c in self.chosen],
            "best": None if self.best is None else self.best.kernel,
            "iterations": [[c.to_dict() for c in it] for it in self.iterations],
        }


# ----------------------------------------------------------------------------
# structural comparison

def canonical(expr):
    """Hashable normal form modulo associativity and commutativity."""
    if isinstance(expr, Leaf):
        return expr.base
    op = "+" if isinstance(expr, Sum) else "*"
    cls = type(expr)
    operands = []

    def flatten(node):
        if isinstance(node, cls):
            flatten(node.left)
            flatten(node.right)
        else:
            operands.append(canonical(node))

    flatten(expr)
    return (op, tuple(sorted(operands, key=repr)))


def recognition_check(found, generating):
    """True if both expressions are equal up to reordering of sums/products."""
    if isinstance(found, str):
        found = parse_kernel(found)
    if isinstance(generating, str):
        generating = parse_kernel(generating)
    return canonical(found) == canonical(generating)


def expand(incumbent, bases):
    out = []
    for b in bases:
        out.append(Sum(incumbent, Leaf(b)))
        out.append(Product(incumbent, Leaf(b)))
    return out


# ----------------------------------------------------------------------------

def evaluate_candidate(expr, data, criterion, seed=0, restarts=5, max_iters=1000, cache=None):
    """Score one kernel; failures are returned as a candidate with ``error``.

    ``cache`` (a dict) is keyed by kernel text and fit settings, so it must
    only be shared between searches over the same dataset.
    """
    text = render(expr)
    key = (text, seed, restarts, max_iters)
    start = time.perf_counter()
    if cache is not None and key in cache:
        result, error = cache[key]
    else:
        result, error = None, None
        try:
            result = criteria_suite(GPModel(expr), build_prior(expr), data, seed, restarts, max_iters)
        except (NumericalError, ConfigError) as exc:
            error = f"{type(exc).__name__}: {exc}"
        if cache is not None:
            cache[key] = (result, error)
    score = None if result is None else result.score(criterion)
    if result is not None and score is None:
        error = result.errors.get("MAP") or result.errors.get("MLL") or result.errors.get("Hessian")
    if error:
        log.info("candidate %s skipped: %s", text, error)
    return Candidate(text, score, result, error, time.perf_counter() - start)


def _evaluate_star(args):
    return evaluate_candidate(*args)


def _selection_key(c):
    # best score first, then fewer leaves, then lexicographic text
    return (-c.score, size(parse_kernel(c.kernel)), c.kernel)


def cks_search(data, criterion, depth=3, bases=DEFAULT_BASES, seed=0, restarts=5,
               max_iters=1000, cache=None, jobs=1, tie_tol=1e-4):
    """Greedy kernel search scored by ``criterion``.

    Parameters
    ----------
    data : Dataset
    criterion : str
        One of ``MLL, MAP, AIC, BIC, LapS, LapAIC, LapBIC``.  AIC and BIC are
        minimised, the rest maximised.
    depth : int
        Maximum number of base kernels in the result.
    bases : sequence of str
    seed, restarts, max_iters
        Passed to every fit.
    cache : dict, optional
        Shared evaluation cache, see :func:`evaluate_candidate`.
    jobs : int
        Worker processes for scoring the candidates of one iteration.
    tie_tol : float
        A winner scoring within ``tie_tol`` below the incumbent still
        replaces it.  Extensions such as ``SE * SE`` or ``B + LIN`` with a
        vanishing variance reproduce the incumbent exactly, and the fitted
        values then differ only by optimizer round-off (up to ~1e-5 nats).

    Returns
    -------
    SearchTrace
        ``partial`` is set when some candidate failed; if every candidate of
        an iteration fails the search stops there.
    """
    if criterion not in CRITERIA:
        raise ConfigError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if depth < 1:
        raise ConfigError("depth must be at least 1")
    bases = tuple(bases)
    if not bases:
        raise ConfigError("need at least one base kernel")
    for b in bases:
        Leaf(b)

    trace = SearchTrace(criterion, depth, bases, seed, tie_tol)
    incumbent = None
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for level in range(depth):
            exprs = [Leaf(b) for b in bases] if incumbent is None else expand(incumbent.expr, bases)
            args = [(e, data, criterion, seed, restarts, max_iters) for e in exprs]
            if pool is not None:
                cands = list(pool.map(_evaluate_star, args))
            else:
                cands = [evaluate_candidate(*a, cache=cache) for a in args]
            trace.iterations.append(cands)
            ok = [c for c in cands if c.score is not None]
            if len(ok) < len(cands):
                trace.partial = True
            if not ok:
                log.warning("every candidate failed at iteration %d", level + 1)
                break
            best = min(ok, key=_selection_key)
            if incumbent is not None and best.score < incumbent.score - tie_tol:
                break
            incumbent = best
            trace.chosen.append(best)
    finally:
        if pool is not None:
            pool.shutdown()
    return trace


def fitted_params(result, criterion):
    """Hyperparameters the criterion was computed from (MLL or MAP optimum)."""
    fit = result.fit_mll if criterion in ("MLL", "AIC", "BIC") else result.fit_map
    return fit.theta_hat

