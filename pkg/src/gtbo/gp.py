"""Matern-5/2 ARD Gaussian process with log-normal length-scale priors.

Hyperparameters are fitted by MAP. The free parameter vector is
``[log l_1..log l_D, log signal_var, log noise_var, mean_const]`` and the
objective is the log marginal likelihood of the standardized targets plus
the log densities of the priors on l, signal_var and noise_var.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .errors import FitError

SQRT5 = math.sqrt(5.0)
JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
LOG_BOUNDS = {"lengthscale": (-7.0, 12.0), "signal": (-9.0, 6.0), "noise": (-20.0, 2.0)}


@dataclass(frozen=True)
class LengthscalePrior:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("log-normal sigma must be positive")

    @property
    def median(self) -> float:
        return math.exp(self.mu)

    def log_density(self, value):
        """Log-normal log density at ``value`` (not at its logarithm)."""
        lv = np.log(value)
        return -lv - math.log(self.sigma * math.sqrt(2 * math.pi)) - (lv - self.mu) ** 2 / (2 * self.sigma**2)

    def dlog_density_dlog(self, value):
        """Derivative of :meth:`log_density` with respect to ``log(value)``."""
        return -1.0 - (np.log(value) - self.mu) / self.sigma**2


SIGNAL_PRIOR = LengthscalePrior(0.0, 1.0)
NOISE_PRIOR = LengthscalePrior(-4.0, 1.0)


@dataclass(frozen=True)
class GpHyperparams:
    lengthscales: np.ndarray
    signal_var: float
    noise_var: float
    mean_const: float = 0.0

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [np.log(self.lengthscales), [math.log(self.signal_var), math.log(self.noise_var), self.mean_const]]
        )

    @classmethod
    def from_vector(cls, theta) -> "GpHyperparams":
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[:-3]), float(np.exp(theta[-3])), float(np.exp(theta[-2])), float(theta[-1]))


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def _scaled_dist(x1, x2, lengthscales):
    a = _as_2d(x1) / lengthscales
    b = _as_2d(x2) / lengthscales
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * a @ b.T
    return np.sqrt(np.maximum(sq, 0.0))


def _matern_from_r(r, signal_var):
    s = SQRT5 * r
    return signal_var * (1 + s + s * s / 3) * np.exp(-s)


def matern52(x1, x2, hyper: GpHyperparams) -> float:
    d = (np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)) / hyper.lengthscales
    return float(_matern_from_r(math.sqrt(float(d @ d)), hyper.signal_var))


def kernel_matrix(x1, x2, hyper: GpHyperparams) -> np.ndarray:
    k = _matern_from_r(_scaled_dist(x1, x2, hyper.lengthscales), hyper.signal_var)
    if x2 is x1:
        k = 0.5 * (k + k.T)  # exact symmetry despite BLAS rounding
    return k


def _factor(x, hyper: GpHyperparams, jitter_start: float = JITTERS[0]):
    """Cholesky of K + noise I with the smallest working jitter.

    Jitter is relative to the signal variance. Returns (L, K_f, jitter).
    """
    kf = kernel_matrix(x, x, hyper)
    n = kf.shape[0]
    for jit in JITTERS:
        if jit < jitter_start:
            continue
        try:
            chol = np.linalg.cholesky(kf + (hyper.noise_var + jit * hyper.signal_var) * np.eye(n))
            return chol, kf, jit
        except np.linalg.LinAlgError:
            continue
    raise FitError("kernel matrix not positive definite at maximum jitter")


def log_posterior_and_grad(
    theta,
    x,
    y,
    priors: Sequence[LengthscalePrior],
    signal_prior: LengthscalePrior = SIGNAL_PRIOR,
    noise_prior: LengthscalePrior = NOISE_PRIOR,
    jitter_start: float = JITTERS[0],
):
    """MAP objective and its analytic gradient with respect to ``theta``."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float).reshape(len(y), -1) if len(y) else np.zeros((0, theta.size - 3))
    y = np.asarray(y, dtype=float)
    hyper = GpHyperparams.from_vector(theta)
    ls = hyper.lengthscales
    dim = ls.size
    grad = np.zeros_like(theta)

    lp = 0.0
    for i, pr in enumerate(priors):
        lp += pr.log_density(ls[i])
        grad[i] += pr.dlog_density_dlog(ls[i])
    lp += signal_prior.log_density(hyper.signal_var) + noise_prior.log_density(hyper.noise_var)
    grad[dim] += signal_prior.dlog_density_dlog(hyper.signal_var)
    grad[dim + 1] += noise_prior.dlog_density_dlog(hyper.noise_var)

    n = y.size
    if n == 0:
        return float(lp), grad

    chol, kf, jit = _factor(x, hyper, jitter_start)
    resid = y - hyper.mean_const
    alpha = cho_solve((chol, True), resid)
    lml = -0.5 * resid @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * math.log(2 * math.pi)

    kinv = cho_solve((chol, True), np.eye(n))
    w = np.outer(alpha, alpha) - kinv
    xs = x / ls
    r = _scaled_dist(xs, xs, np.ones(dim))
    s = SQRT5 * r
    g = hyper.signal_var * (5.0 / 3.0) * (1 + s) * np.exp(-s)
    a = w * g
    # sum_ab A_ab (xs_ai - xs_bi)^2 = 2 sum_a xs_ai^2 rowsum_a - 2 xs_i' A xs_i
    grad[:dim] += (xs * xs * a.sum(1)[:, None]).sum(0) - (xs * (a @ xs)).sum(0)
    grad[dim] += 0.5 * np.sum(w * kf) + 0.5 * jit * hyper.signal_var * np.trace(w)
    grad[dim + 1] += 0.5 * hyper.noise_var * np.trace(w)
    grad[dim + 2] += alpha.sum()
    return float(lml + lp), grad


@dataclass
class GpSurrogate:
    train_inputs: np.ndarray
    train_targets: np.ndarray  # standardized
    hyper: GpHyperparams
    priors: list
    y_mean: float = 0.0
    y_std: float = 1.0
    jitter: float = JITTERS[0]
    _chol: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.refactor()

    def refactor(self):
        if len(self.train_targets):
            self._chol, _, self.jitter = _factor(self.train_inputs, self.hyper, self.jitter)
            self._alpha = cho_solve((self._chol, True), self.train_targets - self.hyper.mean_const)

    @property
    def dim(self) -> int:
        return self.hyper.lengthscales.size

    def log_posterior(self):
        return log_posterior_and_grad(
            self.hyper.to_vector(), self.train_inputs, self.train_targets, self.priors, jitter_start=self.jitter
        )

    def predict_standardized(self, x):
        x = _as_2d(x)
        mean = np.full(x.shape[0], self.hyper.mean_const)
        var = np.full(x.shape[0], self.hyper.signal_var)
        if len(self.train_targets):
            ks = kernel_matrix(self.train_inputs, x, self.hyper)
            mean = mean + ks.T @ self._alpha
            v = solve_triangular(self._chol, ks, lower=True)
            var = var - (v * v).sum(0)
        return mean, np.maximum(var, 0.0)

    def predict(self, x):
        """Posterior mean and latent variance, on the original target scale."""
        mean, var = self.predict_standardized(x)
        return mean * self.y_std + self.y_mean, var * self.y_std**2


def standardize(y):
    y = np.asarray(y, dtype=float)
    mu = float(y.mean()) if y.size else 0.0
    sd = float(y.std()) if y.size > 1 else 1.0
    if not sd > 0:
        sd = 1.0
    return (y - mu) / sd, mu, sd


def _bounds(dim: int):
    lo, hi = LOG_BOUNDS["lengthscale"]
    return [(lo, hi)] * dim + [LOG_BOUNDS["signal"], LOG_BOUNDS["noise"], (-10.0, 10.0)]


def fit_map(
    inputs,
    targets,
    priors: Sequence[LengthscalePrior],
    restarts: int = 3,
    rng: np.random.Generator = None,
    *,
    noise_init: Optional[float] = None,
    warm_start: Optional[GpHyperparams] = None,
    max_iter: int = 200,
    gtol: float = 1e-5,
) -> GpSurrogate:
    """MAP hyperparameters by L-BFGS-B from several starts; keep the best.

    Restart 0 starts at the prior medians (or ``warm_start``); later
    restarts jitter the log-parameters around the prior medians. Targets
    are standardized internally and ``noise_init`` is on that scale.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("fit_map needs at least two points")
    dim = x.shape[1]
    priors = list(priors)
    if len(priors) != dim:
        raise ValueError("need one length-scale prior per dimension")
    ys, mu, sd = standardize(targets)
    rng = np.random.default_rng(0) if rng is None else rng

    base = np.concatenate(
        [[p.mu for p in priors], [0.0, math.log(noise_init if noise_init else NOISE_PRIOR.median), 0.0]]
    )
    bounds = _bounds(dim)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    starts = []
    for k in range(max(1, restarts)):
        if k == 0:
            start = warm_start.to_vector() if warm_start is not None else base.copy()
        else:
            start = base + np.concatenate(
                [rng.normal(0, 0.5, dim), rng.normal(0, 0.5, 2), [0.0]]
            )
        starts.append(np.clip(start, lo, hi))

    def neg(theta):
        try:
            v, g = log_posterior_and_grad(theta, x, ys, priors)
        except FitError:
            return 1e25, np.zeros_like(theta)
        return -v, -g

    best = None
    for start in starts:
        res = minimize(
            neg, start, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": max_iter, "gtol": gtol},
        )
        if not np.isfinite(res.fun) or res.fun >= 1e25:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise FitError("all restarts failed")
    return GpSurrogate(x, ys, GpHyperparams.from_vector(best.x), priors, mu, sd)
