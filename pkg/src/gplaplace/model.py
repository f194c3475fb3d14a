"""Zero-mean GP marginal likelihood, hyperparameter prior and MAP objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import expit

from .errors import DataError, LayoutError, NotPositiveDefiniteError
from .kernels import HyperParams, gram, param_layout, render, softplus

__all__ = [
    "Dataset",
    "GPModel",
    "PriorSpec",
    "PRIOR_TABLE",
    "build_prior",
    "log_prior",
    "log_mll",
    "log_mll_and_grad",
    "log_mll_batch",
    "log_map",
    "log_map_and_grad",
    "test_log_likelihood",
]

LOG_2PI = np.log(2.0 * np.pi)

#: Normal priors (mean, std) on raw hyperparameter values, by (kernel, role).
PRIOR_TABLE = {
    ("SE", "lengthscale"): (-0.212, 1.89),
    ("MAT32", "lengthscale"): (0.8, 2.15),
    ("PER", "lengthscale"): (0.78, 2.29),
    ("PER", "period"): (0.65, 1.0),
    ("RQ", "lengthscale"): (-0.05, 1.94),
    ("RQ", "alpha"): (1.88, 3.1),
    ("LIN", "variance"): (-0.8, 1.0),
    ("scale", "scale"): (-1.63, 2.26),
    ("noise", "noise"): (-3.52, 3.58),
}

# preset slots borrow the row of the base kernel they are built from
_PRESET_ROWS = {
    ("K1", "lengthscale"): ("SE", "lengthscale"),
    ("K2", "lengthscale"): ("SE", "lengthscale"),
    ("K2", "periodic_lengthscale"): ("PER", "period"),
    ("K3", "lengthscale"): ("RQ", "lengthscale"),
    ("K3", "alpha"): ("RQ", "alpha"),
    ("K4", "lengthscale"): ("SE", "lengthscale"),
}


@dataclass(frozen=True, eq=False)
class Dataset:
    """One-dimensional regression data."""

    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise DataError(f"x has {x.size} entries but y has {y.size}")
        if x.size < 1:
            raise DataError("dataset is empty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.size

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None


@dataclass(frozen=True)
class GPModel:
    """Zero-mean GP with kernel ``expr`` and Gaussian observation noise.

    ``jitter`` is relative: the diagonal receives ``jitter * mean(diag K)``.
    """

    expr: object
    jitter: float = 1e-8

    @property
    def layout(self):
        return param_layout(self.expr)

    @property
    def u(self):
        return len(self.layout)

    def __str__(self):
        return render(self.expr)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Independent normal prior on each raw hyperparameter."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        std = np.atleast_1d(np.asarray(self.std, dtype=float))
        if mean.shape != std.shape:
            raise LayoutError("prior mean and std differ in length")
        if np.any(std <= 0):
            raise LayoutError("prior standard deviations must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def u(self):
        return self.mean.size

    def logpdf(self, raw):
        z = (np.asarray(raw, dtype=float) - self.mean) / self.std
        return np.sum(-0.5 * z * z - np.log(self.std) - 0.5 * LOG_2PI, axis=-1)

    def grad_logpdf(self, raw):
        return -(np.asarray(raw, dtype=float) - self.mean) / self.std**2

    def sample(self, rng, size=None):
        shape = (self.u,) if size is None else (size, self.u)
        return self.mean + self.std * rng.standard_normal(shape)


def _prior_row(slot):
    if slot.role in ("scale", "noise"):
        return PRIOR_TABLE[(slot.role, slot.role)]
    key = _PRESET_ROWS.get((slot.base, slot.role), (slot.base, slot.role))
    try:
        return PRIOR_TABLE[key]
    except KeyError:
        raise LayoutError(f"no prior for {slot.base} {slot.role}") from None


def build_prior(expr):
    """Diagonal normal prior for every raw slot of ``expr``."""
    rows = [_prior_row(slot) for slot in param_layout(expr)]
    return PriorSpec([m for m, _ in rows], [s for _, s in rows])


def _raw(params):
    if isinstance(params, HyperParams):
        return params.raw
    return np.asarray(params, dtype=float)


def log_prior(prior, params):
    raw = _raw(params)
    if raw.shape[-1] != prior.u:
        raise LayoutError(f"prior has {prior.u} entries, params have {raw.shape[-1]}")
    return float(prior.logpdf(raw)) if raw.ndim == 1 else prior.logpdf(raw)


# ----------------------------------------------------------------------------
# marginal likelihood

def jittered_cholesky(C, jitter, escalations=4):
    """Lower Cholesky factor of ``C + j I``, escalating ``j`` tenfold on failure.

    Returns the factor and the absolute jitter that succeeded.
    """
    if not np.all(np.isfinite(C)):
        raise NotPositiveDefiniteError("covariance has non-finite entries")
    base = jitter * float(np.mean(np.diag(C)))
    eye = np.eye(C.shape[0])
    j = base
    for _ in range(escalations + 1):
        try:
            return np.linalg.cholesky(C + j * eye), j
        except np.linalg.LinAlgError:
            j *= 10.0
    raise NotPositiveDefiniteError(
        f"covariance not positive definite even with jitter {j / 10.0:.3g}"
    )


def noisy_gram(model, raw, x, grad=False):
    out = gram(model.expr, raw, x, grad=grad)
    K, dK = out if grad else (out, None)
    noise = softplus(raw[-1])
    C = K + noise * np.eye(x.size)
    return C, dK


def factorize(model, params, data):
    """Cholesky factor of the training covariance and the jitter used."""
    raw = _raw(params)
    C, _ = noisy_gram(model, raw, data.x)
    return jittered_cholesky(C, model.jitter)


def _mll_from_factor(L, y):
    alpha = solve_triangular(L, y, lower=True)
    return -0.5 * alpha @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * y.size * LOG_2PI


def log_mll(model, params, data):
    """Log marginal likelihood ``log p(y | X, theta)`` of a zero-mean GP."""
    raw = _raw(params)
    if raw.shape != (model.u,):
        raise LayoutError(f"{model} needs {model.u} raw values, got shape {raw.shape}")
    C, _ = noisy_gram(model, raw, data.x)
    L, _ = jittered_cholesky(C, model.jitter)
    return float(_mll_from_factor(L, data.y))


def log_mll_and_grad(model, params, data):
    """Log marginal likelihood and its gradient w.r.t. the raw parameters.

    Uses ``d/dtheta = 0.5 tr((a a^T - C^-1) dC/dtheta)`` with ``a = C^-1 y``.
    The jitter is treated as a constant.
    """
    raw = _raw(params)
    if raw.shape != (model.u,):
        raise LayoutError(f"{model} needs {model.u} raw values, got shape {raw.shape}")
    C, dK = noisy_gram(model, raw, data.x, grad=True)
    L, _ = jittered_cholesky(C, model.jitter)
    value = _mll_from_factor(L, data.y)
    a = cho_solve((L, True), data.y)
    W = np.outer(a, a) - cho_solve((L, True), np.eye(data.n))
    g = np.empty(model.u)
    for i, d in enumerate(dK):
        g[i] = 0.5 * np.sum(W * d)
    g[-1] = 0.5 * np.trace(W) * expit(raw[-1])
    return float(value), g


def log_mll_batch(model, raw, data):
    """Vectorised :func:`log_mll` over a batch of raw vectors, shape (B, u).

    Points whose covariance cannot be factorized even after jitter escalation,
    or has non-finite entries, get ``-inf``.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    K = gram(model.expr, raw, data.x)
    noise = softplus(raw[:, -1])
    n = data.n
    C = K + noise[:, None, None] * np.eye(n)
    jit = model.jitter * np.mean(np.diagonal(C, axis1=1, axis2=2), axis=1)
    try:
        L = np.linalg.cholesky(C + jit[:, None, None] * np.eye(n))
    except np.linalg.LinAlgError:
        out = np.empty(raw.shape[0])
        for b in range(raw.shape[0]):
            try:
                Lb, _ = jittered_cholesky(C[b], model.jitter)
                out[b] = _mll_from_factor(Lb, data.y)
            except NotPositiveDefiniteError:
                out[b] = -np.inf
        return out
    alpha = np.linalg.solve(L, np.broadcast_to(data.y, (raw.shape[0], n))[..., None])[..., 0]
    logdet = np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
    out = -0.5 * np.sum(alpha * alpha, axis=1) - logdet - 0.5 * n * LOG_2PI
    return np.where(np.isfinite(out), out, -np.inf)


def log_map(model, prior, params, data):
    """Unnormalised log posterior ``log p(y|X,theta) + log p(theta)``."""
    return log_mll(model, params, data) + log_prior(prior, params)


def log_map_and_grad(model, prior, params, data):
    raw = _raw(params)
    v, g = log_mll_and_grad(model, raw, data)
    return v + log_prior(prior, raw), g + prior.grad_logpdf(raw)


def test_log_likelihood(model, params_hat, test_data):
    """Marginal likelihood of held-out data under fixed hyperparameters.

    The training points are simply replaced by ``test_data``; this is not the
    posterior predictive density.
    """
    return log_mll(model, params_hat, test_data)


test_log_likelihood.__test__ = False  # not a pytest test
