"""Reference values of the log model evidence.

Two independent estimators of ``log Z = log int p(y|X,theta) p(theta) dtheta``:

* :func:`integrate_grid` -- trapezoidal rule on a tensor grid spanning
  ``mean +- k sd`` of the prior in every raw coordinate, summed in log space.
  Deterministic; practical up to three hyperparameters.
* :func:`nested_sampling` -- classic nested sampling whose constrained prior
  draws come from a random-walk Metropolis chain started at a live point.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DimensionError, NumericalError
from .model import log_mll, log_mll_batch

__all__ = [
    "EvidenceEstimate",
    "integrate_grid",
    "quadrature_evidence",
    "nested_sampling",
    "nested_sampling_evidence",
]

log = logging.getLogger(__name__)


@dataclass
class EvidenceEstimate:
    log_z: float
    error: float
    n_samples: int
    method: str
    samples: np.ndarray | None = None
    log_likelihoods: np.ndarray | None = None
    weights: np.ndarray | None = None
    partial: bool = False
    info: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "log_z": self.log_z,
            "error": self.error,
            "n_samples": self.n_samples,
            "method": self.method,
            "partial": self.partial,
            "info": self.info,
        }

    def posterior_samples(self, size, seed=0):
        """Equally weighted resample of the weighted samples."""
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self.weights), size=size, p=self.weights / self.weights.sum())
        return self.samples[idx]

    def write_samples_csv(self, path, names=None):
        """Raw parameter columns, then ``log_likelihood`` and ``weight``."""
        if self.samples is None:
            raise ValueError(f"{self.method} estimate carries no samples")
        u = self.samples.shape[1]
        names = list(names) if names else [f"theta{i}" for i in range(u)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["log_likelihood", "weight"])
            for theta, ll, wt in zip(self.samples, self.log_likelihoods, self.weights):
                w.writerow([repr(float(t)) for t in theta] + [repr(float(ll)), repr(float(wt))])


# ----------------------------------------------------------------------------
# quadrature

def integrate_grid(log_like, prior, points_per_dim=401, half_width_sigmas=6.0, chunk=4096):
    """Trapezoidal evidence integral over the prior box.

    Parameters
    ----------
    log_like : callable
        Maps raw points of shape (B, u) to log-likelihoods of shape (B,).
    prior : PriorSpec
    points_per_dim : int
        Grid points per coordinate, at least 51.
    half_width_sigmas : float
        Box half-width in prior standard deviations.
    """
    u = prior.u
    if u > 3:
        raise DimensionError(f"tensor-grid quadrature supports u <= 3, got u = {u}")
    if points_per_dim < 51:
        raise ConfigError("points_per_dim must be at least 51")
    axes, log_w = [], []
    for m, s in zip(prior.mean, prior.std):
        grid = np.linspace(m - half_width_sigmas * s, m + half_width_sigmas * s, points_per_dim)
        w = np.full(points_per_dim, grid[1] - grid[0])
        w[[0, -1]] *= 0.5
        axes.append(grid)
        log_w.append(np.log(w))

    total = points_per_dim**u
    partial_sums = []
    # fixed chunk order keeps the reduction deterministic
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), (points_per_dim,) * u)
        pts = np.stack([axes[d][idx[d]] for d in range(u)], axis=1)
        lw = sum(log_w[d][idx[d]] for d in range(u))
        vals = np.asarray(log_like(pts), dtype=float) + prior.logpdf(pts) + lw
        partial_sums.append(logsumexp(vals))
    log_z = float(logsumexp(partial_sums))
    if not np.isfinite(log_z):
        raise NumericalError("quadrature produced a non-finite evidence")
    return EvidenceEstimate(
        log_z, 0.0, total, "quadrature",
        info={"points_per_dim": points_per_dim, "half_width_sigmas": half_width_sigmas},
    )


def quadrature_evidence(model, prior, data, points_per_dim=401, half_width_sigmas=6.0):
    chunk = max(256, 400_000 // (data.n * data.n))
    return integrate_grid(
        lambda pts: log_mll_batch(model, pts, data),
        prior, points_per_dim, half_width_sigmas, chunk,
    )


# ----------------------------------------------------------------------------
# nested sampling

def _proposal_factor(live):
    cov = np.atleast_2d(np.cov(live, rowvar=False))
    cov += 1e-12 * np.eye(cov.shape[0]) * max(1.0, np.trace(cov))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return np.diag(np.sqrt(np.maximum(np.diag(cov), 1e-12)))


def nested_sampling(log_like, prior, live_points=500, dlogz=0.01, seed=0,
                    mcmc_steps=25, max_iterations=200_000, max_retries=10):
    """Nested-sampling estimate of the log evidence.

    ``log_like`` maps one raw vector to a scalar (``-inf`` allowed).  New live
    points are found by a Metropolis walk on the prior, restricted to the
    current likelihood contour; its step size adapts towards 40% acceptance.
    Sampling stops once the live set can raise the evidence by less than
    ``dlogz`` (in log units).  The returned error is ``sqrt(H / live_points)``
    with ``H`` the information gain.

    If the walk keeps failing to move (``max_retries`` successive chains with
    zero acceptances) the run stops early and the estimate is marked
    ``partial``.
    """
    if live_points < 50:
        raise ConfigError("nested sampling needs at least 50 live points")
    rng = np.random.default_rng(seed)
    N = live_points
    live = prior.sample(rng, N)
    live_ll = np.array([log_like(t) for t in live])

    log_z = -np.inf
    info_h = 0.0
    log_x = 0.0
    log_shrink = np.log1p(-np.exp(-1.0 / N))
    dead, dead_ll, dead_lw = [], [], []
    scale = 1.0
    partial = False
    n_calls = N
    it = 0

    def accumulate(ll, lw):
        nonlocal log_z, info_h
        new = np.logaddexp(log_z, lw)
        info_h = (np.exp(lw - new) * ll
                  + (np.exp(log_z - new) * (info_h + log_z) if np.isfinite(log_z) else 0.0)
                  - new)
        log_z = new

    for it in range(1, max_iterations + 1):
        worst = int(np.argmin(live_ll))
        threshold = live_ll[worst]
        lw = log_x + log_shrink + threshold
        accumulate(threshold, lw)
        dead.append(live[worst].copy())
        dead_ll.append(threshold)
        dead_lw.append(lw)
        log_x -= 1.0 / N

        remaining = np.max(live_ll) + log_x
        if np.logaddexp(log_z, remaining) - log_z < dlogz:
            live_ll[worst] = -np.inf
            break

        factor = _proposal_factor(live)
        start = worst
        while start == worst:
            start = int(rng.integers(N))
        for _ in range(max_retries):
            theta = live[start].copy()
            ll = live_ll[start]
            lp = prior.logpdf(theta)
            accepted = 0
            for _ in range(mcmc_steps):
                prop = theta + scale * factor @ rng.standard_normal(theta.size)
                lp_new = prior.logpdf(prop)
                if np.log(rng.uniform()) >= lp_new - lp:
                    continue
                ll_new = log_like(prop)
                n_calls += 1
                if ll_new > threshold:
                    theta, ll, lp = prop, ll_new, lp_new
                    accepted += 1
            rate = accepted / mcmc_steps
            scale = float(np.clip(scale * np.exp(rate - 0.4), 1e-8, 1e3))
            if accepted:
                break
        else:
            log.warning("nested sampling stagnated after %d iterations", it)
            partial = True
            live_ll[worst] = -np.inf
            break
        live[worst] = theta
        live_ll[worst] = ll
    else:
        partial = True

    # remaining live points share the final prior volume equally
    keep = np.isfinite(live_ll)
    for t, ll in zip(live[keep], live_ll[keep]):
        lw = log_x - np.log(keep.sum()) + ll
        accumulate(ll, lw)
        dead.append(t)
        dead_ll.append(ll)
        dead_lw.append(lw)

    dead_lw = np.array(dead_lw)
    weights = np.exp(dead_lw - log_z)
    error = float(np.sqrt(max(info_h, 0.0) / N))
    return EvidenceEstimate(
        float(log_z), error, len(dead), "nested",
        samples=np.array(dead), log_likelihoods=np.array(dead_ll), weights=weights,
        partial=partial,
        info={"iterations": it, "likelihood_calls": n_calls, "information": float(info_h),
              "live_points": N, "dlogz": dlogz, "seed": seed, "mcmc_steps": mcmc_steps},
    )


def nested_sampling_evidence(model, prior, data, live_points=500, dlogz_stop=0.01, seed=0,
                             mcmc_steps=25):
    def log_like(raw):
        try:
            return log_mll(model, raw, data)
        except NumericalError:
            return -np.inf

    return nested_sampling(log_like, prior, live_points, dlogz_stop, seed, mcmc_steps)
