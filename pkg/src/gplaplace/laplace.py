"""Laplace approximations of the log model evidence and the baseline criteria.

The plain Laplace estimate around a MAP optimum ``theta_hat`` is::

    log Z ~ log p(y|X,theta_hat) p(theta_hat) + u/2 log(2 pi) - 1/2 log|H|

with ``H`` the negative Hessian of the log posterior.  Each eigenvalue
contributes ``1/2 log(2 pi) - 1/2 log(lambda)``, which is positive (i.e. it
*rewards* an extra parameter) whenever ``lambda < 2 pi`` and undefined for
``lambda <= 0``.  The stabilised variants lift every eigenvalue to at least
``2 pi exp(-2 r)`` so that no parameter contributes more than ``r``:

========  ===========
variant   r
========  ===========
LapS      0
LapAIC    -1
LapBIC    -log(n)
========  ===========
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError
from .fit import optimize
from .kernels import HyperParams, render
from .model import LOG_2PI, factorize, log_map

__all__ = [
    "HessianSpectrum",
    "EvaluationResult",
    "EllipseSpec",
    "VARIANTS",
    "CRITERIA",
    "variant_r",
    "eigenvalue_floor",
    "hessian_fd",
    "hessian_at",
    "clamp_eigenvalues",
    "log_evidence_laplace",
    "parameter_contributions",
    "criteria_suite",
    "confidence_ellipse",
]

log = logging.getLogger(__name__)

VARIANTS = ("Lap", "LapS", "LapAIC", "LapBIC")
#: Criteria usable for model selection, all oriented as stored in
#: :class:`EvaluationResult`; AIC and BIC are lower-is-better.
CRITERIA = ("MLL", "MAP", "AIC", "BIC", "LapS", "LapAIC", "LapBIC")


@dataclass
class HessianSpectrum:
    """Symmetric matrix with its eigendecomposition.

    ``clamped`` counts eigenvalues raised by :func:`clamp_eigenvalues`.
    """

    H: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clamped: int = 0

    @classmethod
    def from_matrix(cls, H):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        H = 0.5 * (H + H.T)
        lam, vec = np.linalg.eigh(H)
        return cls(H, lam, vec)

    @classmethod
    def from_eigen(cls, eigenvalues, eigenvectors=None):
        lam = np.asarray(eigenvalues, dtype=float)
        vec = np.eye(lam.size) if eigenvectors is None else np.asarray(eigenvectors, dtype=float)
        return cls((vec * lam) @ vec.T, lam, vec)

    @property
    def u(self):
        return self.eigenvalues.size

    def reconstruct(self):
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T

    def to_dict(self):
        return {
            "H": self.H.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
            "clamped": self.clamped,
        }


def variant_r(variant, n):
    """Largest per-parameter contribution allowed by ``variant``."""
    if variant == "LapS":
        return 0.0
    if variant == "LapAIC":
        return -1.0
    if variant == "LapBIC":
        return -float(np.log(n))
    raise ValueError(f"no eigenvalue floor for variant {variant!r}")


def eigenvalue_floor(r):
    return np.exp(-2.0 * r) * 2.0 * np.pi


def hessian_fd(func, theta, rel_step=1e-4):
    """Negative Hessian of a scalar ``func`` by central second differences.

    Step ``h_i = rel_step * max(1, |theta_i|)``.

    Raises
    ------
    NumericalError
        If any stencil value is not finite; the message names the entry.
    """
    theta = np.asarray(theta, dtype=float)
    u = theta.size
    h = rel_step * np.maximum(1.0, np.abs(theta))
    f0 = func(theta)
    H = np.empty((u, u))

    def at(*moves):
        t = theta.copy()
        for i, s in moves:
            t[i] += s * h[i]
        return func(t)

    for i in range(u):
        for j in range(i, u):
            # inf - inf is reported below, not warned about
            with np.errstate(invalid="ignore"):
                if i == j:
                    val = (at((i, 1)) - 2.0 * f0 + at((i, -1))) / h[i] ** 2
                else:
                    val = (
                        at((i, 1), (j, 1)) - at((i, 1), (j, -1))
                        - at((i, -1), (j, 1)) + at((i, -1), (j, -1))
                    ) / (4.0 * h[i] * h[j])
            if not np.isfinite(val):
                raise NumericalError(f"non-finite second difference at entry ({i}, {j})")
            H[i, j] = H[j, i] = -val
    return H


def hessian_at(model, prior, data, theta_hat):
    """Spectrum of the negative log-posterior Hessian at ``theta_hat``."""
    raw = theta_hat.raw if isinstance(theta_hat, HyperParams) else np.asarray(theta_hat)
    H = hessian_fd(lambda t: log_map(model, prior, t, data), raw)
    return HessianSpectrum.from_matrix(H)


def clamp_eigenvalues(spectrum, r):
    """Raise every eigenvalue below ``2 pi exp(-2 r)`` to that floor.

    Negative and zero eigenvalues are clamped too.
    """
    floor = eigenvalue_floor(r)
    low = spectrum.eigenvalues < floor
    lam = np.where(low, floor, spectrum.eigenvalues)
    vec = spectrum.eigenvectors
    return HessianSpectrum((vec * lam) @ vec.T, lam, vec, int(np.count_nonzero(low)))


def parameter_contributions(eigenvalues):
    """``1/2 log(2 pi) - 1/2 log(lambda)`` per eigenvalue (NaN if lambda <= 0)."""
    lam = np.asarray(eigenvalues, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 0.5 * LOG_2PI - 0.5 * np.log(lam)
    return np.where(lam > 0, out, np.nan)


def log_evidence_laplace(map_value, spectrum, variant, n):
    """Laplace log-evidence for one variant.

    Returns ``None`` for plain ``"Lap"`` when some eigenvalue is not positive,
    where the Gaussian integral diverges.
    """
    if variant == "Lap":
        lam = spectrum.eigenvalues
        if np.any(lam <= 0):
            return None
    elif variant in VARIANTS:
        lam = clamp_eigenvalues(spectrum, variant_r(variant, n)).eigenvalues
    else:
        raise ValueError(f"unknown Laplace variant {variant!r}")
    return float(map_value + 0.5 * lam.size * LOG_2PI - 0.5 * np.sum(np.log(lam)))


# ----------------------------------------------------------------------------

@dataclass
class EvaluationResult:
    """All selection criteria for one kernel on one dataset.

    ``aic``/``bic`` use the MLL optimum; ``aic_map``/``bic_map`` are the same
    formulas with the MAP value as a surrogate.  ``logz_aic`` and ``logz_bic``
    are ``-aic/2`` and ``-bic/2``.  Missing values are ``None`` and the reason
    is in ``errors``.
    """

    kernel: str
    n: int
    u: int
    mll: float | None = None
    map: float | None = None
    aic: float | None = None
    bic: float | None = None
    logz_aic: float | None = None
    logz_bic: float | None = None
    aic_map: float | None = None
    bic_map: float | None = None
    logz_lap: float | None = None
    logz_laps: float | None = None
    logz_lapaic: float | None = None
    logz_lapbic: float | None = None
    spectrum: HessianSpectrum | None = None
    clamp_counts: dict = field(default_factory=dict)
    fit_mll: object = None
    fit_map: object = None
    jitter: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    _FIELDS = {
        "MLL": "mll", "MAP": "map", "AIC": "aic", "BIC": "bic",
        "Lap": "logz_lap", "LapS": "logz_laps", "LapAIC": "logz_lapaic", "LapBIC": "logz_lapbic",
    }

    def value(self, criterion):
        return getattr(self, self._FIELDS[criterion])

    def score(self, criterion):
        """Criterion value oriented so that higher is better (None if missing)."""
        v = self.value(criterion)
        if v is None:
            return None
        return -v if criterion in ("AIC", "BIC") else v

    @property
    def lap_pathological(self):
        """Plain Laplace undefined, or some parameter contributes positively."""
        if self.spectrum is None:
            return False
        if self.logz_lap is None:
            return True
        return bool(np.any(parameter_contributions(self.spectrum.eigenvalues) > 0))

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "kernel", "n", "u", "mll", "map", "aic", "bic", "logz_aic", "logz_bic",
            "aic_map", "bic_map", "logz_lap", "logz_laps", "logz_lapaic", "logz_lapbic",
            "clamp_counts", "jitter", "errors",
        )}
        out["lap_pathological"] = self.lap_pathological
        out["spectrum"] = None if self.spectrum is None else self.spectrum.to_dict()
        out["fit_mll"] = None if self.fit_mll is None else self.fit_mll.to_dict()
        out["fit_map"] = None if self.fit_map is None else self.fit_map.to_dict()
        return out


def criteria_suite(model, prior, data, seed=0, restarts=5, max_iters=1000):
    """Fit ``model`` twice (MLL and MAP) and compute every criterion.

    Raises the fitting error only if both fits fail; otherwise the failed
    half is reported through ``errors``.
    """
    u, n = model.u, data.n
    res = EvaluationResult(kernel=render(model.expr), n=n, u=u)
    failures = []

    try:
        fit = optimize(model, prior, data, "MLL", restarts, max_iters, seed)
    except NumericalError as exc:
        res.errors["MLL"] = str(exc)
        failures.append(exc)
    else:
        L = fit.value
        res.fit_mll = fit
        res.mll = L
        res.aic = 2.0 * u - 2.0 * L
        res.bic = u * np.log(n) - 2.0 * L
        res.logz_aic = -0.5 * res.aic
        res.logz_bic = -0.5 * res.bic
        res.jitter["MLL"] = factorize(model, fit.theta_hat, data)[1]

    try:
        fit = optimize(model, prior, data, "MAP", restarts, max_iters, seed)
    except NumericalError as exc:
        res.errors["MAP"] = str(exc)
        failures.append(exc)
    else:
        res.fit_map = fit
        res.map = fit.value
        res.aic_map = 2.0 * u - 2.0 * fit.value
        res.bic_map = u * np.log(n) - 2.0 * fit.value
        res.jitter["MAP"] = factorize(model, fit.theta_hat, data)[1]
        try:
            spec = hessian_at(model, prior, data, fit.theta_hat)
        except NumericalError as exc:
            res.errors["Hessian"] = str(exc)
        else:
            res.spectrum = spec
            res.logz_lap = log_evidence_laplace(fit.value, spec, "Lap", n)
            for variant in ("LapS", "LapAIC", "LapBIC"):
                value = log_evidence_laplace(fit.value, spec, variant, n)
                setattr(res, f"logz_{variant.lower()}", value)
                res.clamp_counts[variant] = clamp_eigenvalues(spec, variant_r(variant, n)).clamped

    if len(failures) == 2:
        raise failures[1]
    return res


# ----------------------------------------------------------------------------

@dataclass
class EllipseSpec:
    """Level set ``(t - center)^T H (t - center) = level^2`` of a 2-D Gaussian.

    ``axes`` holds the principal directions as columns; ``lengths`` the
    matching semi-axis lengths.
    """

    center: np.ndarray
    axes: np.ndarray
    lengths: np.ndarray
    level: float
    precision: np.ndarray

    def contains(self, points):
        d = np.atleast_2d(points) - self.center
        return np.einsum("bi,ij,bj->b", d, self.precision, d) <= self.level**2

    def coverage(self, points, weights=None):
        """Fraction (weighted if ``weights`` given) of points inside."""
        inside = self.contains(points)
        if weights is None:
            return float(np.mean(inside))
        w = np.asarray(weights, dtype=float)
        return float(np.sum(w[inside]) / np.sum(w))

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "axes": self.axes.T.tolist(),
            "lengths": self.lengths.tolist(),
            "level": self.level,
        }


def confidence_ellipse(theta_hat, spectrum, sigma_level=2.0):
    """Confidence ellipse of the Gaussian with mean ``theta_hat`` and
    covariance ``H^-1`` for a (typically clamped) two-parameter spectrum."""
    raw = theta_hat.raw if isinstance(theta_hat, HyperParams) else np.asarray(theta_hat, float)
    if spectrum.u != 2 or raw.size != 2:
        raise DimensionError(f"ellipses need exactly 2 hyperparameters, got {spectrum.u}")
    lam = spectrum.eigenvalues
    if np.any(lam <= 0):
        raise NumericalError("ellipse undefined for a non-positive eigenvalue")
    return EllipseSpec(
        center=raw.copy(),
        axes=spectrum.eigenvectors.copy(),
        lengths=sigma_level / np.sqrt(lam),
        level=float(sigma_level),
        precision=spectrum.reconstruct(),
    )
