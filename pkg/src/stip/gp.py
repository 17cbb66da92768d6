"""Gaussian-process regression with the squared exponential kernel."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from . import _accel
from .errors import DataError, SingularKernelError

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Hyperparams:
    signal_var: float = 1.0
    length_scale: float = 10.0
    noise_var: float = 1e-2

    def __post_init__(self):
        vals = (self.signal_var, self.length_scale, self.noise_var)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite hyperparameters {vals}")
        if self.signal_var <= 0 or self.length_scale <= 0 or self.noise_var < 0:
            raise ValueError(f"invalid hyperparameters {vals}")

    def to_log(self):
        return np.log([self.signal_var, self.length_scale, max(self.noise_var, 1e-300)])

    @classmethod
    def from_log(cls, theta):
        sf2, ell, sn2 = np.exp(np.asarray(theta, dtype=float))
        return cls(float(sf2), float(ell), float(sn2))


@dataclass(frozen=True)
class HyperBounds:
    signal_var: tuple = (1e-3, 1e3)
    length_scale: tuple = (0.5, 150.0)
    noise_var: tuple = (1e-6, 10.0)

    def log_bounds(self):
        return [tuple(math.log(v) for v in b) for b in (self.signal_var, self.length_scale, self.noise_var)]

    def clip(self, hyper: Hyperparams) -> Hyperparams:
        lb = self.log_bounds()
        theta = [min(max(t, lo), hi) for t, (lo, hi) in zip(hyper.to_log(), lb)]
        return Hyperparams.from_log(theta)


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    cov: np.ndarray  # full matrix, or the marginal variances from predict(full_cov=False)

    @property
    def var(self):
        return np.diag(self.cov) if self.cov.ndim == 2 else self.cov


def kernel(x, x2, hyper: Hyperparams):
    d2 = (x[0] - x2[0]) ** 2 + (x[1] - x2[1]) ** 2
    return hyper.signal_var * math.exp(-0.5 * d2 / hyper.length_scale**2)


def kernel_matrix(a, b, hyper: Hyperparams):
    a = np.ascontiguousarray(a, dtype=float).reshape(-1, 2)
    b = np.ascontiguousarray(b, dtype=float).reshape(-1, 2)
    return _accel.se_kernel(a, b, hyper.signal_var, hyper.length_scale)


def cholesky_jitter(k, signal_var):
    """Lower factor of ``k``, adding escalating diagonal jitter if needed.

    Jitter starts at 1e-12 * signal_var and doubles up to 1e-6 * signal_var.
    """
    try:
        return np.linalg.cholesky(k), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * signal_var
    eye = np.eye(k.shape[0])
    while jitter <= 1e-6 * signal_var * (1 + 1e-9):
        try:
            return np.linalg.cholesky(k + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 2.0
    raise SingularKernelError("kernel matrix not positive definite after maximum jitter")


class GaussianProcess:
    """Zero-mean GP on 2-D inputs.

    ``standardize`` controls target scaling once there are two or more
    training points: ``"scale"`` divides by the root mean square (the prior
    mean stays at zero), ``"center"`` subtracts the mean and divides by the
    standard deviation, ``"none"`` uses raw targets.
    """

    def __init__(self, hyper: Hyperparams | None = None, standardize="scale", bounds: HyperBounds | None = None):
        if standardize not in ("scale", "center", "none"):
            raise ValueError(f"unknown standardize mode {standardize!r}")
        self.hyper = hyper if hyper is not None else Hyperparams()
        self.initial_hyper = self.hyper
        self.standardize = standardize
        self.bounds = bounds if bounds is not None else HyperBounds()
        self.X = np.empty((0, 2))
        self.y = np.empty(0)
        self.last_status = "ok"
        self._cache = None

    # -- data --------------------------------------------------------------

    @property
    def n(self):
        return self.X.shape[0]

    def add_data(self, inputs, targets):
        inputs = np.asarray(inputs, dtype=float).reshape(-1, 2)
        targets = np.asarray(targets, dtype=float).reshape(-1)
        if inputs.shape[0] != targets.shape[0]:
            raise DataError(f"{inputs.shape[0]} inputs but {targets.shape[0]} targets")
        if targets.size == 0:
            return self
        if not (np.all(np.isfinite(targets)) and np.all(np.isfinite(inputs))):
            raise DataError("non-finite training data")
        self.X = np.vstack([self.X, inputs])
        self.y = np.concatenate([self.y, targets])
        self._cache = None
        return self

    def reset(self):
        """Drop the training set; hyperparameters are kept."""
        self.X = np.empty((0, 2))
        self.y = np.empty(0)
        self._cache = None
        return self

    def set_hyper(self, hyper: Hyperparams):
        self.hyper = hyper
        self._cache = None
        return self

    def copy(self):
        other = GaussianProcess(self.hyper, self.standardize, self.bounds)
        other.initial_hyper = self.initial_hyper
        other.X = self.X.copy()
        other.y = self.y.copy()
        return other

    # -- standardization ---------------------------------------------------

    def target_transform(self):
        """``(offset, scale)`` with ``y = offset + scale * y_std``."""
        if self.n < 2 or self.standardize == "none":
            return 0.0, 1.0
        if self.standardize == "center":
            off = float(np.mean(self.y))
            sd = float(np.std(self.y))
            return off, (sd if sd > 0 else 1.0)
        rms = float(np.sqrt(np.mean(self.y * self.y)))
        return 0.0, (rms if rms > 0 else 1.0)

    # -- factorization -----------------------------------------------------

    def _factor(self, hyper: Hyperparams | None = None):
        use_cache = hyper is None
        if use_cache and self._cache is not None:
            return self._cache
        h = self.hyper if hyper is None else hyper
        off, scale = self.target_transform()
        ys = (self.y - off) / scale
        if self.n == 0:
            fac = (np.empty((0, 0)), np.empty(0), ys, off, scale)
        else:
            k = kernel_matrix(self.X, self.X, h)
            k[np.diag_indices_from(k)] += h.noise_var
            chol, _ = cholesky_jitter(k, h.signal_var)
            alpha = cho_solve((chol, True), ys)
            fac = (chol, alpha, ys, off, scale)
        if use_cache:
            self._cache = fac
        return fac

    # -- inference ---------------------------------------------------------

    def predict(self, test_points, full_cov=True) -> Posterior:
        xs = np.asarray(test_points, dtype=float).reshape(-1, 2)
        chol, alpha, _, off, scale = self._factor()
        h = self.hyper
        if self.n == 0:
            mean = np.zeros(xs.shape[0])
            if full_cov:
                cov = kernel_matrix(xs, xs, h)
            else:
                cov = np.full(xs.shape[0], h.signal_var)
        else:
            kxs = kernel_matrix(self.X, xs, h)
            mean = kxs.T @ alpha
            v = solve_triangular(chol, kxs, lower=True, check_finite=False)
            if full_cov:
                cov = kernel_matrix(xs, xs, h) - v.T @ v
                cov = 0.5 * (cov + cov.T)
            else:
                cov = h.signal_var - np.sum(v * v, axis=0)
        if full_cov:
            d = np.diag_indices_from(cov)
            cov[d] = np.maximum(cov[d], 0.0)
        else:
            cov = np.maximum(cov, 0.0)
        return Posterior(off + scale * mean, scale * scale * cov)

    def predict_mean(self, test_points):
        xs = np.asarray(test_points, dtype=float).reshape(-1, 2)
        if self.n == 0:
            return np.zeros(xs.shape[0])
        _, alpha, _, off, scale = self._factor()
        return off + scale * (kernel_matrix(xs, self.X, self.hyper) @ alpha)

    def variance_reduction(self, points):
        """Trace drop of the posterior covariance at ``points`` if they were observed.

        Observation noise is the model's ``noise_var``. The result is in the
        model's standardized units, so it depends only on the inputs and
        hyperparameters, never on the targets.
        """
        pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
        chol = self._factor()[0]
        h = self.hyper
        red = _accel.variance_reduction(
            pts, np.ascontiguousarray(self.X), np.ascontiguousarray(chol), h.signal_var, h.length_scale, h.noise_var
        )
        if not math.isfinite(red):
            raise SingularKernelError("variance reduction failed to factorize")
        return red

    def log_marginal_likelihood(self, hyper: Hyperparams | None = None):
        """log p(y | X, theta) of the (standardized) targets."""
        if self.n == 0:
            raise DataError("log marginal likelihood needs at least one training point")
        chol, alpha, ys, _, _ = self._factor(hyper)
        return float(-0.5 * ys @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * self.n * LOG_2PI)

    def lml_gradient(self, hyper: Hyperparams | None = None):
        """Gradient of the LML w.r.t. (log sf2, log ell, log sn2)."""
        if self.n == 0:
            raise DataError("log marginal likelihood needs at least one training point")
        h = self.hyper if hyper is None else hyper
        chol, alpha, _, _, _ = self._factor(hyper)
        kf = kernel_matrix(self.X, self.X, h)
        d2 = np.sum((self.X[:, None, :] - self.X[None, :, :]) ** 2, axis=-1)
        kinv = cho_solve((chol, True), np.eye(self.n))
        w = np.outer(alpha, alpha) - kinv
        dk = (kf, kf * d2 / h.length_scale**2, h.noise_var * np.eye(self.n))
        return np.array([0.5 * np.sum(w * d) for d in dk])

    # -- hyperparameters ---------------------------------------------------

    def _neg_lml(self, theta, ys):
        sf2, ell, sn2 = np.exp(theta)
        v = _accel.lml(self.X, ys, sf2, ell, sn2)
        return -v if math.isfinite(v) else np.inf

    def start_points(self, initial: Hyperparams | None = None):
        """Current values, the configured initial values, and a short-scale variant.

        The configured start keeps the search from staying stuck in the flat
        all-noise corner once a previous fit landed there.
        """
        base = self.bounds.clip(self.hyper if initial is None else initial)
        prior = self.bounds.clip(self.initial_hyper)
        starts = [base]
        for s in (prior, replace(prior, length_scale=prior.length_scale * 0.3)):
            s = self.bounds.clip(s)
            if s != base:
                starts.append(s)
        return starts

    def optimize_hyperparams(self, initial: Hyperparams | None = None, starts=None, xatol=1e-7, fatol=1e-11, maxiter=2000):
        """Multi-start bounded Nelder-Mead on the log hyperparameters.

        The result is the best of all starts and local optima, so its LML is
        never below any start. Sets and returns ``self.hyper``.
        """
        if self.n < 2:
            raise DataError("hyperparameter optimization needs at least two points")
        if starts is None:
            starts = self.start_points(initial)
        lb = self.bounds.log_bounds()
        off, scale = self.target_transform()
        ys = (self.y - off) / scale
        best_theta, best_val = None, np.inf
        for s in starts:
            theta0 = s.to_log()
            v0 = self._neg_lml(theta0, ys)
            if v0 < best_val:
                best_theta, best_val = theta0, v0
            if not np.isfinite(v0):
                continue
            res = minimize(
                self._neg_lml,
                theta0,
                args=(ys,),
                method="Nelder-Mead",
                bounds=lb,
                options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter},
            )
            if np.isfinite(res.fun) and res.fun < best_val:
                best_theta, best_val = res.x, float(res.fun)
        if best_theta is None or not np.isfinite(best_val):
            log.warning("hyperparameter optimization failed at every start; keeping previous values")
            self.last_status = "failed"
            return self.hyper
        self.last_status = "ok"
        self.set_hyper(Hyperparams.from_log(best_theta))
        return self.hyper


def add_data(model: GaussianProcess, inputs, targets) -> GaussianProcess:
    return model.add_data(inputs, targets)


def predict(model: GaussianProcess, test_points) -> Posterior:
    return model.predict(test_points)


def log_marginal_likelihood(model: GaussianProcess, hyper: Hyperparams | None = None):
    return model.log_marginal_likelihood(hyper)


def optimize_hyperparams(model: GaussianProcess) -> Hyperparams:
    return model.optimize_hyperparams()
