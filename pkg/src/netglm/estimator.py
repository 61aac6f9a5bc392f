"""Maximum pseudo-likelihood estimation.

The weight vector is maximized in two alternating blocks: the
high-dimensional degree block moves by a minorization-maximization update
(a separable quadratic lower bound built from the Bernoulli curvature bound
1/4, optionally accelerated by a secant extrapolation with an ascent-checked
fallback), and the low-dimensional generic block by Newton-Raphson with step
halving.  Both steps increase the concave objective, so the recorded
iteration trace is non-decreasing.

Convergence requires a small gradient sup-norm and a small proposed Newton
step; the step guard distinguishes true stationary points from the flat
ridges that arise when a maximizer does not exist (e.g. separation).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError
from .pseudolik import PseudoLikelihood

_ASCENT_SLACK = 1e-12


@dataclass
class FitConfig:
    max_it: int = 300
    grad_tol: float = 1e-6
    step_halving_max: int = 20
    mm_accel: bool = True
    ridge: float = 1e-8
    step_tol: float = 1e-3

    def __post_init__(self):
        if self.max_it <= 0 or self.grad_tol <= 0 or self.step_halving_max <= 0:
            raise ValueError("FitConfig fields must be positive")


@dataclass
class FitTrace:
    """Per-iteration objective, gradient norm, and weight snapshots."""

    loglik: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    theta2: list = field(default_factory=list)
    degree_summary: list = field(default_factory=list)

    def record(self, ll, gn, theta2, theta1):
        self.loglik.append(float(ll))
        self.grad_norm.append(float(gn))
        self.theta2.append(np.asarray(theta2, dtype=float).copy())
        if len(theta1):
            q = np.quantile(theta1, [0.0, 0.25, 0.5, 0.75, 1.0])
            self.degree_summary.append(tuple(float(v) for v in q))
        else:
            self.degree_summary.append(None)

    def write_csv(self, path, labels2):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            head = ["iteration", "loglik", "grad_norm"]
            head += [f"theta[{lab}]" for lab in labels2]
            head += ["deg_min", "deg_q1", "deg_median", "deg_q3", "deg_max"]
            writer.writerow(head)
            for it in range(len(self.loglik)):
                row = [it, repr(self.loglik[it]), repr(self.grad_norm[it])]
                row += [repr(float(v)) for v in self.theta2[it]]
                ds = self.degree_summary[it]
                row += ["", "", "", "", ""] if ds is None else [repr(v) for v in ds]
                writer.writerow(row)


@dataclass
class FitResult:
    model: object
    theta: np.ndarray
    converged: bool
    n_iter: int
    loglik: float
    grad_norm: float
    trace: FitTrace
    fit_seconds: float
    message: str = ""

    @property
    def theta_degree(self):
        return self.theta[: self.model.degree_dim]

    @property
    def theta_generic(self):
        return self.theta[self.model.degree_dim:]


def _mm_map(pl, theta):
    """One minorize-maximize sweep over the degree block."""
    model = pl.model
    n = model.n
    g1 = pl.gradient_degrees(theta)
    new = theta.copy()
    if model.directed:
        new[:n] += 2.0 * g1[:n] / np.maximum(pl.m_out, 1.0)
        new[n:2 * n] += 2.0 * g1[n:] / np.maximum(pl.m_in, 1.0)
    else:
        new[:n] += 2.0 * g1 / np.maximum(pl.m_und, 1.0)
    return new


def _mm_step(pl, theta, ll, config):
    """MM update with secant acceleration; ascent-checked at every turn."""
    u = _mm_map(pl, theta)
    if not config.mm_accel:
        return u, pl.loglik(u)
    v = _mm_map(pl, u)
    ll_v = pl.loglik(v)
    r = u - theta
    q = v - u - r
    denom = float(q @ q)
    if denom > 0.0:
        alpha = -np.sqrt(float(r @ r) / denom)
        cand = theta - 2.0 * alpha * r + alpha * alpha * q
        try:
            ll_c = pl.loglik(cand)
        except ArithmeticError:
            ll_c = -np.inf
        if np.isfinite(ll_c) and ll_c >= ll_v:
            return cand, ll_c
    return v, ll_v


def mm_degree_update(theta1, theta2, model, state=None):
    """One ascent update of the degree block holding the generic block fixed."""
    pl = PseudoLikelihood(model, state)
    theta = np.concatenate([theta1, theta2])
    new, _ = _mm_step(pl, theta, pl.loglik(theta), FitConfig())
    return new[: model.degree_dim]


def _solve_newton(pl, theta, config):
    """Newton direction for the generic block, with ridge retry."""
    g2 = pl.gradient(theta)[pl.model.degree_dim:]
    info = -pl.hessian22(theta)
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        eigvals = np.linalg.eigvalsh(info)
        scale = max(float(eigvals[-1]), 1.0)
        if eigvals[0] < 1e-10 * scale:
            _raise_collinear(pl.model, info)
        try:
            chol = np.linalg.cholesky(info + config.ridge * np.eye(len(info)))
        except np.linalg.LinAlgError:
            _raise_collinear(pl.model, info)
    w = np.linalg.solve(chol, g2)
    d = np.linalg.solve(chol.T, w)
    if not np.all(np.isfinite(d)):
        _raise_collinear(pl.model, info)
    return g2, d


def _raise_collinear(model, info):
    eigvals, eigvecs = np.linalg.eigh(info)
    v = np.abs(eigvecs[:, 0])
    labels = [lab for lab, vi in zip(model.generic_labels, v)
              if vi >= 0.5 * v.max()]
    raise EstimationError(
        "singular generic-block Hessian; collinear terms: " + ", ".join(labels)
    )


def _newton_step(pl, theta, ll, config):
    g2, d = _solve_newton(pl, theta, config)
    off = pl.model.degree_dim
    step = d.copy()
    for _ in range(config.step_halving_max + 1):
        cand = theta.copy()
        cand[off:] += step
        try:
            ll_new = pl.loglik(cand)
        except ArithmeticError:
            ll_new = np.nan
        if np.isfinite(ll_new) and ll_new >= ll - _ASCENT_SLACK:
            return cand, ll_new, float(np.max(np.abs(d)))
        step *= 0.5
    return theta, ll, float(np.max(np.abs(d)))


def newton_generic_update(theta1, theta2, model, state=None):
    """One Newton-Raphson update of the generic block with step halving."""
    pl = PseudoLikelihood(model, state)
    theta = np.concatenate([theta1, theta2])
    new, _, _ = _newton_step(pl, theta, pl.loglik(theta), FitConfig())
    return new[model.degree_dim:]


def fit(model, config: FitConfig = None, state=None) -> FitResult:
    """Maximize the pseudo-loglikelihood of the bound model.

    Returns a result even without convergence (flagged); raises
    :class:`EstimationError` for nonexistence by isolation, collinearity,
    or a non-finite objective.
    """
    config = config or FitConfig()
    t0 = time.perf_counter()
    if model.has_degrees:
        iso = [i for i in range(model.n)
               if not model.data.z.out_adjacency[i]
               and (not model.directed or not model.data.z.in_adjacency[i])]
        if iso:
            raise EstimationError(
                f"degree weights of isolated units have no maximizer "
                f"(units {iso[:5]}{'...' if len(iso) > 5 else ''}); "
                f"delete isolates before fitting a degrees model"
            )
    pl = PseudoLikelihood(model, state)
    theta = model.zero_theta()
    ll = pl.loglik(theta)
    trace = FitTrace()
    g = pl.gradient(theta)
    gn = float(np.max(np.abs(g))) if len(g) else 0.0
    trace.record(ll, gn, theta[model.degree_dim:], theta[: model.degree_dim])

    converged = False
    message = ""
    n_iter = 0
    for n_iter in range(1, config.max_it + 1):
        newton_norm = 0.0
        if model.has_degrees:
            theta, ll = _mm_step(pl, theta, ll, config)
        if model.p2:
            theta, ll, newton_norm = _newton_step(pl, theta, ll, config)
        if not np.isfinite(ll):
            raise EstimationError("pseudo-loglikelihood diverged to a "
                                  "non-finite value", trace=trace)
        g = pl.gradient(theta)
        gn = float(np.max(np.abs(g)))
        trace.record(ll, gn, theta[model.degree_dim:], theta[: model.degree_dim])
        if gn < config.grad_tol:
            if newton_norm < config.step_tol:
                converged = True
                break
            message = ("gradient is small but the Newton step is not: "
                       "the maximizer may not exist (flat ridge)")
    if not converged and not message:
        message = f"max_it = {config.max_it} reached without convergence"
    return FitResult(
        model=model,
        theta=theta,
        converged=converged,
        n_iter=n_iter,
        loglik=float(ll),
        grad_norm=gn,
        trace=trace,
        fit_seconds=time.perf_counter() - t0,
        message=message,
    )
