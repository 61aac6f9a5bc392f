"""Binding a parsed model specification to data: weight layout and statistics.

The weight vector is laid out with the high-dimensional degree block first
(outdegree weights, then indegree weights for directed data; one weight per
unit for undirected data) and one coordinate per remaining term, in formula
order.  ``global_statistic`` and ``change_statistic`` return vectors aligned
with this layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelBindError
from .formula import ModelSpec, parse_formula
from .state import NetworkState
from .terms import lookup

TARGET_KINDS = ("x", "y", "z")


@dataclass
class ThetaVector:
    """Weights split into the degree block and the generic block."""

    degree: np.ndarray
    generic: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.degree, self.generic])


class Model:
    """A term list bound to a population, with a fixed coordinate layout."""

    def __init__(self, spec: ModelSpec, data):
        self.spec = spec
        self.data = data
        n = data.n
        self.n = n
        self.directed = data.directed
        self.has_degrees = spec.has_degrees
        self.degree_dim = (2 * n if data.directed else n) if spec.has_degrees else 0

        self.terms = []
        for inst in spec.generic_terms:
            tdef = lookup(inst.name)
            if not data.directed and not tdef.undirected_ok:
                raise ModelBindError(
                    f"term {inst.label} requires directed connections"
                )
            if inst.name in _user_names() and data.directed:
                desc = _user_descriptor(inst.name)
                if not desc.directed:
                    raise ModelBindError(
                        f"term {inst.label} does not support directed connections"
                    )
            if tdef.binary_x_only and not data.x.fixed and data.x.family != "binomial":
                raise ModelBindError(
                    f"term {inst.label} is not affine in a free "
                    f"{data.x.family} predictor; fix x or use a binomial predictor"
                )
            if tdef.binary_y_only and data.y.family != "binomial":
                raise ModelBindError(
                    f"term {inst.label} is not affine in a {data.y.family} outcome"
                )
            self.terms.append(tdef.build(data, inst))

        self.p2 = len(self.terms)
        self.p = self.degree_dim + self.p2
        if self.p == 0:
            raise ModelBindError("model has no terms")

        self.x_free = not data.x.fixed
        self.z_free = not data.z.fixed
        self.z_alocal_fixed = data.z.fixed_alocal_only

    # -- layout --------------------------------------------------------------

    @property
    def degree_labels(self):
        if not self.has_degrees:
            return []
        if self.directed:
            return [f"outdeg_{i}" for i in range(self.n)] + \
                   [f"indeg_{i}" for i in range(self.n)]
        return [f"deg_{i}" for i in range(self.n)]

    @property
    def generic_labels(self):
        return [t.label for t in self.terms]

    @property
    def labels(self):
        return self.degree_labels + self.generic_labels

    def split(self, theta) -> ThetaVector:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p,):
            raise ModelBindError(
                f"weight vector has length {theta.shape}, layout expects {self.p}"
            )
        return ThetaVector(theta[: self.degree_dim].copy(),
                           theta[self.degree_dim:].copy())

    def zero_theta(self) -> np.ndarray:
        return np.zeros(self.p)

    def new_state(self) -> NetworkState:
        return NetworkState(self.data)

    # -- free components -------------------------------------------------------

    def dyad_free(self, state, i, j) -> bool:
        if not self.z_free:
            return False
        if self.z_alocal_fixed:
            return bool(state.crow[i][j])
        return True

    def free_dyads(self, state):
        return [(i, j) for i, j in state.dyads() if self.dyad_free(state, i, j)]

    # -- statistics ------------------------------------------------------------

    def global_statistic(self, state) -> np.ndarray:
        """Full sufficient-statistic vector, by direct summation."""
        out = np.empty(self.p)
        k = 0
        if self.has_degrees:
            n = self.n
            out[:n] = state.out_deg
            if self.directed:
                out[n:2 * n] = state.in_deg
            k = self.degree_dim
        for term in self.terms:
            out[k] = term.global_value(state)
            k += 1
        return out

    def change_statistic(self, state, target) -> np.ndarray:
        """Change statistic for toggling a connection or moving an attribute.

        ``target`` is ("z", i, j), ("x", i), or ("y", i).  Connection targets
        give s(z_ij = 1) - s(z_ij = 0); attribute targets give the affine
        slope in the (scaled) attribute value.
        """
        out = np.zeros(self.p)
        kind = target[0]
        off = self.degree_dim
        if kind == "z":
            _, i, j = target
            if i == j:
                raise ModelBindError("no self-connections")
            if self.has_degrees:
                n = self.n
                if self.directed:
                    out[i] += 1.0
                    out[n + j] += 1.0
                else:
                    out[i] += 1.0
                    out[j] += 1.0
            for k, term in enumerate(self.terms):
                out[off + k] = term.delta_z(state, i, j)
        elif kind == "x":
            _, i = target
            for k, term in enumerate(self.terms):
                out[off + k] = term.delta_x(state, i)
        elif kind == "y":
            _, i = target
            for k, term in enumerate(self.terms):
                out[off + k] = term.delta_y(state, i)
        else:
            raise ModelBindError(f"unknown target kind {kind!r}")
        return out

    # -- linear predictors (hot paths used by the samplers) --------------------

    def eta_z(self, state, theta, i, j) -> float:
        t = 0.0
        if self.has_degrees:
            if self.directed:
                t += theta[i] + theta[self.n + j]
            else:
                t += theta[i] + theta[j]
        off = self.degree_dim
        for k, term in enumerate(self.terms):
            w = theta[off + k]
            if w != 0.0:
                t += w * term.delta_z(state, i, j)
        return t

    def eta_attr(self, state, theta, which, i) -> float:
        t = 0.0
        off = self.degree_dim
        if which == "x":
            for k, term in enumerate(self.terms):
                w = theta[off + k]
                if w != 0.0 and term.depends_x:
                    t += w * term.delta_x(state, i)
        else:
            for k, term in enumerate(self.terms):
                w = theta[off + k]
                if w != 0.0 and term.depends_y:
                    t += w * term.delta_y(state, i)
        return t


def _user_names():
    from .terms import USER_REGISTRY

    return USER_REGISTRY


def _user_descriptor(name):
    from .terms import USER_REGISTRY

    return USER_REGISTRY[name]


def build_model(formula_text: str, data) -> Model:
    """Parse a formula and bind it to data in one step."""
    spec = parse_formula(formula_text, data)
    return Model(spec, data)
