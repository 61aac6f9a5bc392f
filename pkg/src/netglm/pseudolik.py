"""Pseudo-loglikelihood over all free components, with gradient and Hessian.

The objective is the sum of log full-conditional densities of the free
components: predictors (unless fixed), outcomes, and connections (unless
fixed; with the alocal-only fixed design, only pairs with overlapping
neighborhoods contribute).  Because every conditional is a GLM whose linear
predictor is the weight vector dotted with a change statistic evaluated at
the observed state, the whole objective reduces to a set of GLM regressions
on design matrices that are computed once per (model, state) and cached on
this object.  Never share an instance across mutated states.
"""

from __future__ import annotations

import numpy as np

from . import glm
from .errors import NumericError


class PseudoLikelihood:
    """Design matrices at a fixed state plus the GLM algebra on top."""

    def __init__(self, model, state=None):
        self.model = model
        if state is None:
            state = model.new_state()
        self.state = state
        n = model.n
        data = model.data

        # Free-dyad mask over the dyad set (off-diagonal / upper triangle).
        mask = np.zeros((n, n), dtype=bool)
        if model.z_free:
            if model.directed:
                mask[:] = ~np.eye(n, dtype=bool)
            else:
                mask[np.triu_indices(n, k=1)] = True
            if model.z_alocal_fixed:
                mask &= state.c_matrix().astype(bool)
        self.mask = mask
        self.any_z = bool(mask.any())

        self.zmat = state.z_matrix()
        if self.any_z and model.p2:
            self.DZ = np.stack([t.delta_z_matrix(state) for t in model.terms])
        else:
            self.DZ = np.zeros((model.p2, n, n))

        self.y_obs = state.y_array(scaled=False)
        self.y_family = data.y.family
        self.y_scale = data.y.scale
        if model.p2:
            self.DY = np.column_stack([t.delta_y_vector(state) for t in model.terms])
        else:
            self.DY = np.zeros((n, 0))

        self.x_free = model.x_free
        if self.x_free:
            self.x_obs = state.x_array(scaled=False)
            self.x_family = data.x.family
            self.x_scale = data.x.scale
            if model.p2:
                self.DX = np.column_stack(
                    [t.delta_x_vector(state) for t in model.terms]
                )
            else:
                self.DX = np.zeros((n, 0))
        else:
            self.DX = None

        # Free-dyad counts per unit, used by the degree-block surrogate.
        self.m_out = mask.sum(axis=1).astype(float)
        self.m_in = mask.sum(axis=0).astype(float)
        self.m_und = self.m_out + self.m_in

    # -- linear predictors ---------------------------------------------------

    def _theta2(self, theta):
        return np.asarray(theta, dtype=float)[self.model.degree_dim:]

    def eta_z(self, theta):
        theta = np.asarray(theta, dtype=float)
        model = self.model
        n = model.n
        eta = np.zeros((n, n))
        if model.p2:
            eta += np.tensordot(self._theta2(theta), self.DZ, axes=1)
        if model.has_degrees:
            if model.directed:
                eta += theta[:n, None] + theta[None, n:2 * n]
            else:
                d = theta[:n]
                eta += d[:, None] + d[None, :]
        return eta

    def eta_y(self, theta):
        return self.DY @ self._theta2(theta)

    def eta_x(self, theta):
        return self.DX @ self._theta2(theta)

    # -- objective -------------------------------------------------------------

    def loglik(self, theta) -> float:
        total = 0.0
        if self.any_z:
            eta = self.eta_z(theta)
            ll = glm.loglik_vec("binomial", self.zmat, eta)
            vals = ll[self.mask]
            if not np.all(np.isfinite(vals)):
                i, j = self._offender(ll)
                raise NumericError(f"non-finite connection component Z[{i},{j}]")
            total += vals.sum()
        lly = glm.loglik_vec(self.y_family, self.y_obs, self.eta_y(theta),
                             self.y_scale)
        if not np.all(np.isfinite(lly)):
            raise NumericError(
                f"non-finite outcome component Y[{int(np.argmin(np.isfinite(lly)))}]"
            )
        total += lly.sum()
        if self.x_free:
            llx = glm.loglik_vec(self.x_family, self.x_obs, self.eta_x(theta),
                                 self.x_scale)
            if not np.all(np.isfinite(llx)):
                raise NumericError(
                    f"non-finite predictor component "
                    f"X[{int(np.argmin(np.isfinite(llx)))}]"
                )
            total += llx.sum()
        return float(total)

    def _offender(self, ll):
        bad = ~np.isfinite(ll) & self.mask
        idx = np.argwhere(bad)
        return (int(idx[0][0]), int(idx[0][1])) if len(idx) else (-1, -1)

    # -- derivatives ------------------------------------------------------------

    def z_residual(self, theta):
        mu = glm.mean_vec("binomial", self.eta_z(theta))
        return (self.zmat - mu) * self.mask, mu

    def gradient(self, theta) -> np.ndarray:
        model = self.model
        g = np.zeros(model.p)
        off = model.degree_dim
        if self.any_z:
            resid, _ = self.z_residual(theta)
            if model.p2:
                g[off:] += np.tensordot(self.DZ, resid, axes=([1, 2], [0, 1]))
            if model.has_degrees:
                n = model.n
                if model.directed:
                    g[:n] = resid.sum(axis=1)
                    g[n:2 * n] = resid.sum(axis=0)
                else:
                    g[:n] = resid.sum(axis=1) + resid.sum(axis=0)
        if model.p2:
            mu_y = glm.mean_vec(self.y_family, self.eta_y(theta), self.y_scale)
            g[off:] += self.DY.T @ ((self.y_obs - mu_y) / self.y_scale)
            if self.x_free:
                mu_x = glm.mean_vec(self.x_family, self.eta_x(theta), self.x_scale)
                g[off:] += self.DX.T @ ((self.x_obs - mu_x) / self.x_scale)
        return g

    def gradient_degrees(self, theta) -> np.ndarray:
        """Degree-block gradient only (connection components are the only
        contributors)."""
        model = self.model
        if not model.has_degrees or not self.any_z:
            return np.zeros(model.degree_dim)
        resid, _ = self.z_residual(theta)
        n = model.n
        if model.directed:
            return np.concatenate([resid.sum(axis=1), resid.sum(axis=0)])
        return resid.sum(axis=1) + resid.sum(axis=0)

    def _weights(self, theta):
        eta = self.eta_z(theta)
        mu = glm.mean_vec("binomial", eta)
        return mu * (1.0 - mu) * self.mask

    def hessian22(self, theta) -> np.ndarray:
        """Generic-block Hessian (negative curvature of the GLM components)."""
        model = self.model
        p2 = model.p2
        info = np.zeros((p2, p2))
        if p2 == 0:
            return info
        if self.any_z:
            w = self._weights(theta)
            info += np.einsum("kij,ij,lij->kl", self.DZ, w, self.DZ)
        wy = glm.curvature_vec(self.y_family, self.eta_y(theta), self.y_scale)
        info += self.DY.T @ (wy[:, None] * self.DY)
        if self.x_free:
            wx = glm.curvature_vec(self.x_family, self.eta_x(theta), self.x_scale)
            info += self.DX.T @ (wx[:, None] * self.DX)
        return -info

    def hessian(self, theta) -> np.ndarray:
        model = self.model
        p, n, off = model.p, model.n, model.degree_dim
        info = np.zeros((p, p))
        info[off:, off:] = -self.hessian22(theta)
        if model.has_degrees and self.any_z:
            w = self._weights(theta)
            if model.directed:
                info[:n, :n][np.diag_indices(n)] = w.sum(axis=1)
                info[n:off, n:off][np.diag_indices(n)] = w.sum(axis=0)
                info[:n, n:off] = w
                info[n:off, :n] = w.T
                if model.p2:
                    a = np.einsum("kij,ij->ki", self.DZ, w)
                    b = np.einsum("kij,ij->kj", self.DZ, w)
                    info[:n, off:] = a.T
                    info[n:off, off:] = b.T
                    info[off:, :n] = a
                    info[off:, n:off] = b
            else:
                wsym = w + w.T
                info[:n, :n] = wsym
                info[:n, :n][np.diag_indices(n)] = wsym.sum(axis=1)
                if model.p2:
                    c = np.einsum("kij,ij->ki", self.DZ, w) + \
                        np.einsum("kij,ij->kj", self.DZ, w)
                    info[:n, off:] = c.T
                    info[off:, :n] = c
        return -info


def pseudo_loglik(theta, model, state=None) -> float:
    return PseudoLikelihood(model, state).loglik(theta)


def gradient(theta, model, state=None) -> np.ndarray:
    return PseudoLikelihood(model, state).gradient(theta)


def hessian(theta, model, state=None) -> np.ndarray:
    return PseudoLikelihood(model, state).hessian(theta)
