"""Conditional-family math: linear predictors, means, and log-densities.

Every conditional distribution in the joint model is a one-parameter GLM:
Bernoulli with a logit link for binary attributes and connections, Poisson
with a log link for counts, and Normal with an identity link and plug-in
variance ``scale`` for real-valued attributes.  Attribute values entering
sufficient statistics are pre-divided by ``scale``, which makes the normal
conditional mean equal to the linear predictor itself; raw values are used
when evaluating log-densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

LOG_2PI = math.log(2.0 * math.pi)
_EXP_MAX = 700.0  # exp() overflows past ~709; leave headroom


@dataclass(frozen=True)
class LinearPredictor:
    eta: float
    family: str = "binomial"
    scale: float = 1.0


def linear_predictor(theta, delta, family="binomial", scale=1.0) -> LinearPredictor:
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if theta.shape != delta.shape:
        raise ValueError(
            f"dimension mismatch: theta {theta.shape} vs delta {delta.shape}"
        )
    return LinearPredictor(float(theta @ delta), family, scale)


def logistic(eta: float) -> float:
    """Overflow-safe inverse logit."""
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def log1pexp(eta: float) -> float:
    """log(1 + exp(eta)) without overflow."""
    if eta > 0:
        return eta + math.log1p(math.exp(-eta))
    return math.log1p(math.exp(eta))


def conditional_mean(lp: LinearPredictor) -> float:
    if lp.family == "binomial":
        return logistic(lp.eta)
    if lp.family == "poisson":
        if lp.eta > _EXP_MAX:
            raise NumericError(f"poisson mean overflow: eta = {lp.eta}")
        return math.exp(lp.eta)
    if lp.family == "normal":
        return lp.eta
    raise ValueError(f"unknown family {lp.family!r}")


def component_loglik(value: float, lp: LinearPredictor) -> float:
    """Log conditional density of one component at its observed value."""
    eta = lp.eta
    if lp.family == "binomial":
        if value not in (0.0, 1.0):
            raise ValueError(f"binomial value must be 0 or 1, got {value!r}")
        return value * eta - log1pexp(eta)
    if lp.family == "poisson":
        if value < 0 or value != int(value):
            raise ValueError(f"poisson value must be a count, got {value!r}")
        if eta > _EXP_MAX:
            raise NumericError(f"poisson mean overflow: eta = {eta}")
        return value * eta - math.exp(eta) - math.lgamma(value + 1.0)
    if lp.family == "normal":
        resid = value - eta
        return -0.5 * (resid * resid / lp.scale + LOG_2PI + math.log(lp.scale))
    raise ValueError(f"unknown family {lp.family!r}")


# -- vectorized versions used by the pseudo-likelihood assembly ------------


def mean_vec(family, eta, scale=1.0):
    eta = np.asarray(eta, dtype=float)
    if family == "binomial":
        out = np.empty_like(eta)
        pos = eta >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
        e = np.exp(eta[~pos])
        out[~pos] = e / (1.0 + e)
        return out
    if family == "poisson":
        if np.any(eta > _EXP_MAX):
            raise NumericError("poisson mean overflow in vectorized path")
        return np.exp(eta)
    return eta


def loglik_vec(family, values, eta, scale=1.0):
    values = np.asarray(values, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if family == "binomial":
        # log(1+exp(eta)) = max(eta, 0) + log1p(exp(-|eta|))
        softplus = np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))
        return values * eta - softplus
    if family == "poisson":
        if np.any(eta > _EXP_MAX):
            raise NumericError("poisson mean overflow in vectorized path")
        logfact = np.array([math.lgamma(v + 1.0) for v in values.ravel()])
        return values * eta - np.exp(eta) - logfact.reshape(values.shape)
    resid = values - eta
    return -0.5 * (resid * resid / scale + LOG_2PI + math.log(scale))


def curvature_vec(family, eta, scale=1.0):
    """Negative second derivative of the component log-density w.r.t. eta."""
    eta = np.asarray(eta, dtype=float)
    if family == "binomial":
        mu = mean_vec("binomial", eta)
        return mu * (1.0 - mu)
    if family == "poisson":
        return mean_vec("poisson", eta)
    return np.full_like(eta, 1.0 / scale)
