"""Term catalog: sufficient statistics and their change statistics.

Each term contributes either a unit-level statistic ``g_i(x_i, y_i)`` or a
pairwise statistic ``h_{i,j}(x_i, x_j, y_i, y_j, z)`` to the joint density.
A bound term exposes three views of its statistic:

* ``global_value(state)`` -- the statistic summed over all units/pairs,
  evaluated by direct summation.  This is the brute-force reference that
  every incremental path is tested against.
* ``delta_z(state, i, j)`` -- the change in the global statistic when the
  connection (i, j) is toggled from 0 to 1, holding everything else fixed.
* ``delta_x(state, i)`` / ``delta_y(state, i)`` -- the coefficient of the
  (scaled) attribute value of unit i in the statistic, i.e. the slope of the
  affine decomposition.  For binary attributes this equals the 1-vs-0
  statistic difference.

Edge modes select which connections a term sees: ``global`` uses every
connection, ``local`` only connections between units with overlapping
neighborhoods, and ``alocal`` only connections between units without
overlap.  Default modes are artifact conventions, documented per entry:
dependence-inducing terms (mutual, shared-partner terms, spillovers)
default to ``local``, covariate-like and edge-count terms to ``global``.

Scaled spillover terms divide by the sender/receiver degree with a floor of
one, so the denominator never vanishes; their connection change statistics
are computed by exact before/after evaluation of every pair row touching the
toggled connection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelBindError, TermError

CP_TYPES = ("OTP", "ISP", "OSP", "ITP")
MODES = ("global", "local", "alocal")


def gw_weight(k: int, alpha: float) -> float:
    """Geometric down-weight of the k-th shared partner (or degree unit)."""
    return math.exp(alpha) * (1.0 - (1.0 - math.exp(-alpha)) ** k)


def mode_coeff(state, mode, i, j):
    if mode == "global":
        return 1.0
    c = state.crow[i][j]
    return float(c) if mode == "local" else 1.0 - c


def mode_matrix(state, mode):
    n = state.n
    if mode == "global":
        m = np.ones((n, n))
    elif mode == "local":
        m = state.c_matrix()
    else:
        m = 1.0 - state.c_matrix()
    np.fill_diagonal(m, 0.0)
    return m


# ---------------------------------------------------------------------------
# Bound terms.
# ---------------------------------------------------------------------------


class BoundTerm:
    """A catalog entry bound to a population and fully-resolved arguments."""

    depends_x = False
    depends_y = False

    def __init__(self, inst):
        self.inst = inst
        self.label = inst.label

    def global_value(self, state) -> float:
        raise NotImplementedError

    def delta_z(self, state, i, j) -> float:
        return 0.0

    def delta_x(self, state, i) -> float:
        return 0.0

    def delta_y(self, state, i) -> float:
        return 0.0

    def empty_value(self, state) -> float:
        """Statistic on the configuration with no connections observed."""
        return 0.0

    # Vectorized builders; overridden where a closed matrix form exists.

    def delta_z_matrix(self, state) -> np.ndarray:
        m = np.zeros((state.n, state.n))
        for i, j in state.dyads():
            m[i, j] = self.delta_z(state, i, j)
        return m

    def delta_x_vector(self, state) -> np.ndarray:
        if not self.depends_x:
            return np.zeros(state.n)
        return np.array([self.delta_x(state, i) for i in range(state.n)])

    def delta_y_vector(self, state) -> np.ndarray:
        if not self.depends_y:
            return np.zeros(state.n)
        return np.array([self.delta_y(state, i) for i in range(state.n)])


class GTerm(BoundTerm):
    """Unit-level attribute statistic; no connection dependence."""

    def __init__(self, inst, g, dx=None, dy=None, dx_vec=None, dy_vec=None):
        super().__init__(inst)
        self._g = g
        self._dx = dx
        self._dy = dy
        self._dx_vec = dx_vec
        self._dy_vec = dy_vec
        self.depends_x = dx is not None
        self.depends_y = dy is not None

    def global_value(self, state):
        g = self._g
        return sum(g(state, i) for i in range(state.n))

    def empty_value(self, state):
        return self.global_value(state)

    def delta_x(self, state, i):
        return self._dx(state, i) if self._dx else 0.0

    def delta_y(self, state, i):
        return self._dy(state, i) if self._dy else 0.0

    def delta_x_vector(self, state):
        if self._dx_vec:
            return self._dx_vec(state)
        return super().delta_x_vector(state)

    def delta_y_vector(self, state):
        if self._dy_vec:
            return self._dy_vec(state)
        return super().delta_y_vector(state)


class HDyadTerm(BoundTerm):
    """Pairwise statistic whose value is local to the pair itself.

    The connection change statistic touches only h[i, j] (and h[j, i] for
    reciprocity-style terms), so all three deltas have closed forms.
    """

    def __init__(self, inst, h, dz, dx=None, dy=None,
                 dz_mat=None, dx_vec=None, dy_vec=None):
        super().__init__(inst)
        self._h = h
        self._dz = dz
        self._dx = dx
        self._dy = dy
        self._dz_mat = dz_mat
        self._dx_vec = dx_vec
        self._dy_vec = dy_vec
        self.depends_x = dx is not None
        self.depends_y = dy is not None

    def global_value(self, state):
        h = self._h
        return sum(h(state, i, j) for i, j in state.dyads())

    def delta_z(self, state, i, j):
        return self._dz(state, i, j)

    def delta_x(self, state, i):
        return self._dx(state, i) if self._dx else 0.0

    def delta_y(self, state, i):
        return self._dy(state, i) if self._dy else 0.0

    def delta_z_matrix(self, state):
        if self._dz_mat:
            m = self._dz_mat(state)
            np.fill_diagonal(m, 0.0)
            return m
        return super().delta_z_matrix(state)

    def delta_x_vector(self, state):
        if self._dx_vec:
            return self._dx_vec(state)
        return super().delta_x_vector(state)

    def delta_y_vector(self, state):
        if self._dy_vec:
            return self._dy_vec(state)
        return super().delta_y_vector(state)


class UnitZTerm(BoundTerm):
    """Per-unit function of the connections (isolation, GW degrees).

    Housed in pair space but attributed once per unit; the connection change
    statistic re-evaluates the two touched units before and after the toggle.
    """

    def __init__(self, inst, unit_value, empty_unit_value):
        super().__init__(inst)
        self._unit_value = unit_value
        self._empty_unit_value = empty_unit_value

    def global_value(self, state):
        f = self._unit_value
        return sum(f(state, a) for a in range(state.n))

    def empty_value(self, state):
        return self._empty_unit_value * state.n

    def delta_z(self, state, i, j):
        f = self._unit_value
        z0 = state.z(i, j)
        state.set_edge(i, j, 0)
        lo = f(state, i) + f(state, j)
        state.set_edge(i, j, 1)
        hi = f(state, i) + f(state, j)
        state.set_edge(i, j, z0)
        return hi - lo


class StructuralHTerm(BoundTerm):
    """Pairwise statistic entangled with the rest of the network.

    Toggling one connection can change h on other pairs (shared-partner
    counts, scaled-spillover denominators), but only on pairs with an
    endpoint in {i, j}.  The change statistic therefore re-evaluates exactly
    those rows before and after the toggle; no full recomputation.
    """

    def __init__(self, inst, h, depends_x=False, depends_y=False):
        super().__init__(inst)
        self._h = h
        self.depends_x = depends_x
        self.depends_y = depends_y

    def global_value(self, state):
        h = self._h
        return sum(h(state, i, j) for i, j in state.dyads())

    def _sum_touched(self, state, i, j):
        h = self._h
        n = state.n
        total = 0.0
        if state.directed:
            # Rows (i, *) and (j, *) in full; columns (*, i) and (*, j)
            # excluding b in {i, j}: every ordered dyad with an endpoint in
            # {i, j} exactly once.
            for b in range(n):
                if b != i:
                    total += h(state, i, b)
                if b not in (i, j):
                    total += h(state, b, i)
                if b != j:
                    total += h(state, j, b)
                if b not in (i, j):
                    total += h(state, b, j)
        else:
            for b in range(n):
                if b != i:
                    total += h(state, min(i, b), max(i, b))
                if b not in (i, j):
                    total += h(state, min(j, b), max(j, b))
        return total

    def delta_z(self, state, i, j):
        z0 = state.z(i, j)
        state.set_edge(i, j, 0)
        lo = self._sum_touched(state, i, j)
        state.set_edge(i, j, 1)
        hi = self._sum_touched(state, i, j)
        state.set_edge(i, j, z0)
        return hi - lo

    def _sum_incident(self, state, i):
        h = self._h
        n = state.n
        total = 0.0
        if state.directed:
            for b in range(n):
                if b != i:
                    total += h(state, i, b) + h(state, b, i)
        else:
            for b in range(n):
                if b != i:
                    total += h(state, min(i, b), max(i, b))
        return total

    def _delta_attr(self, state, which, i):
        # Affine slope w.r.t. the scaled attribute: evaluate the rows
        # touching unit i at scaled values 1 and 0.
        raw0 = state.attr_value(which, i, scaled=False)
        scale = state.x_scale if which == "x" else state.y_scale
        state.set_attribute(which, i, scale)
        hi = self._sum_incident(state, i)
        state.set_attribute(which, i, 0.0)
        lo = self._sum_incident(state, i)
        state.set_attribute(which, i, raw0)
        return hi - lo

    def delta_x(self, state, i):
        return self._delta_attr(state, "x", i) if self.depends_x else 0.0

    def delta_y(self, state, i):
        return self._delta_attr(state, "y", i) if self.depends_y else 0.0


class TransitiveTerm(BoundTerm):
    """Closure statistic: connections (i, j) backed by a two-path through a
    unit in both neighborhoods.  The change statistic adds the direct closure
    indicator plus the closure indicators this toggle creates or destroys on
    existing connections."""

    def global_value(self, state):
        total = 0.0
        for i, j in state.dyads():
            if state.z(i, j):
                total += state.transitive_closed(i, j)
        return total

    def _indirect(self, state, i, j):
        # Pairs whose two-path inventory includes the (toggled-off) edge
        # (i, j); for each, closure flips iff no alternative path exists.
        nb = state.nb_sets
        count = 0
        nbi, nbj = nb[i], nb[j]
        if state.directed:
            if j in nbi:
                for b in state.out_sets[j]:
                    if b != i and state.z(i, b) and j in nb[b]:
                        count += 1 - state.transitive_closed(i, b)
            if i in nbj:
                for a in state.in_sets[i]:
                    if a != j and state.z(a, j) and i in nb[a]:
                        count += 1 - state.transitive_closed(a, j)
        else:
            if j in nbi:
                for b in state.out_sets[j]:
                    if b != i and state.z(i, b) and j in nb[b]:
                        count += 1 - state.transitive_closed(i, b)
            if i in nbj:
                for b in state.out_sets[i]:
                    if b != j and state.z(j, b) and i in nb[b]:
                        count += 1 - state.transitive_closed(j, b)
        return count

    def delta_z(self, state, i, j):
        z0 = state.z(i, j)
        state.set_edge(i, j, 0)
        delta = float(state.transitive_closed(i, j)) + self._indirect(state, i, j)
        state.set_edge(i, j, z0)
        return delta


class UserBoundTerm(BoundTerm):
    """A user-registered term driven entirely by its change statistics.

    The global statistic is reconstructed from the registered
    empty-configuration value by adding the observed connections one at a
    time and accumulating connection change statistics, which is exact for
    any statistic that vanishes (up to a constant) without connections.
    """

    def __init__(self, inst, descriptor):
        super().__init__(inst)
        self.descriptor = descriptor
        self.depends_x = descriptor.delta_x is not None
        self.depends_y = descriptor.delta_y is not None

    def delta_z(self, state, i, j):
        if self.descriptor.delta_z is None:
            return 0.0
        return self.descriptor.delta_z(state, i, j)

    def delta_x(self, state, i):
        if self.descriptor.delta_x is None:
            return 0.0
        return self.descriptor.delta_x(state, i)

    def delta_y(self, state, i):
        if self.descriptor.delta_y is None:
            return 0.0
        return self.descriptor.delta_y(state, i)

    def empty_value(self, state):
        return self.descriptor.empty_value

    def global_value(self, state):
        edges = state.edge_list()
        for i, j in edges:
            state.set_edge(i, j, 0)
        total = self.descriptor.empty_value
        for i, j in edges:
            total += self.delta_z(state, i, j)
            state.set_edge(i, j, 1)
        return total


# ---------------------------------------------------------------------------
# Catalog definitions.
# ---------------------------------------------------------------------------


@dataclass
class TermDef:
    name: str
    build: callable
    undirected_ok: bool = True
    modes: tuple = ()
    default_mode: str = None
    needs_decay: bool = False
    needs_cp_type: bool = False
    covariate: str = None  # "unit" | "dyad" | None
    degrees: bool = False
    binary_x_only: bool = False
    binary_y_only: bool = False
    doc: str = ""


@dataclass
class UserTermDescriptor:
    """Registration record for a custom term.

    ``empty_value`` is the value of the statistic when no connections are
    observed.  The three evaluators receive the read-only state query surface
    and return change statistics; any of them may be None (no dependence).
    ``binary_attributes_only`` declares that the statistic is affine in an
    attribute only over {0, 1}, mirroring the match terms.
    """

    name: str
    empty_value: float = 0.0
    directed: bool = True
    undirected: bool = True
    delta_x: callable = None
    delta_y: callable = None
    delta_z: callable = None
    binary_attributes_only: bool = False


CATALOG: dict = {}
USER_REGISTRY: dict = {}


def register_user_term(descriptor: UserTermDescriptor):
    """Make a custom term available to formulas and all downstream machinery."""
    if descriptor.name in CATALOG:
        raise TermError(f"term name {descriptor.name!r} collides with a built-in")
    if not (descriptor.directed or descriptor.undirected):
        raise TermError(f"term {descriptor.name!r} supports no directedness")
    USER_REGISTRY[descriptor.name] = descriptor
    return descriptor


def unregister_user_term(name):
    USER_REGISTRY.pop(name, None)


def lookup(name) -> TermDef:
    """Resolve a term name against built-ins, then the user registry."""
    if name in CATALOG:
        return CATALOG[name]
    if name in USER_REGISTRY:
        desc = USER_REGISTRY[name]
        return TermDef(
            name=name,
            build=lambda data, inst, d=desc: UserBoundTerm(inst, d),
            undirected_ok=desc.undirected,
            binary_x_only=desc.binary_attributes_only,
            binary_y_only=desc.binary_attributes_only,
            doc="user-registered term",
        )
    raise TermError(f"unknown term {name!r}")


def _register(name, build, **kw):
    CATALOG[name] = TermDef(name=name, build=build, **kw)


def _unit_cov(data, inst):
    return data.covariate(inst.covariate, dyadic=False).tolist()


def _dyad_cov(data, inst):
    return data.covariate(inst.covariate, dyadic=True)


# -- attribute terms --------------------------------------------------------


def _build_attribute_x(data, inst):
    return GTerm(inst,
                 g=lambda s, i: s.x_val[i],
                 dx=lambda s, i: 1.0,
                 dx_vec=lambda s: np.ones(s.n))


def _build_attribute_y(data, inst):
    return GTerm(inst,
                 g=lambda s, i: s.y_val[i],
                 dy=lambda s, i: 1.0,
                 dy_vec=lambda s: np.ones(s.n))


def _build_cov_x(data, inst):
    v = _unit_cov(data, inst)
    return GTerm(inst,
                 g=lambda s, i: v[i] * s.x_val[i],
                 dx=lambda s, i: v[i],
                 dx_vec=lambda s: np.asarray(v))


def _build_cov_y(data, inst):
    v = _unit_cov(data, inst)
    return GTerm(inst,
                 g=lambda s, i: v[i] * s.y_val[i],
                 dy=lambda s, i: v[i],
                 dy_vec=lambda s: np.asarray(v))


def _build_attribute_xy(data, inst):
    mode = inst.mode
    if mode == "global":
        return GTerm(inst,
                     g=lambda s, i: s.x_val[i] * s.y_val[i],
                     dx=lambda s, i: s.y_val[i],
                     dy=lambda s, i: s.x_val[i],
                     dx_vec=lambda s: s.y_array(),
                     dy_vec=lambda s: s.x_array())
    # Neighbor sums; neighbor relations are symmetric, so the slope doubles.
    if mode == "local":
        def others(s, i):
            return s.nb_sets[i]
    else:
        def others(s, i):
            nb = s.nb_sets[i]
            return (j for j in range(s.n) if j != i and j not in nb)

    def g(s, i):
        sx = sum(s.y_val[j] for j in others(s, i))
        sy = sum(s.x_val[j] for j in others(s, i))
        return s.x_val[i] * sx + s.y_val[i] * sy

    return GTerm(inst,
                 g=g,
                 dx=lambda s, i: 2.0 * sum(s.y_val[j] for j in others(s, i)),
                 dy=lambda s, i: 2.0 * sum(s.x_val[j] for j in others(s, i)))


# -- connection terms -------------------------------------------------------


def _build_edges(data, inst):
    mode = inst.mode
    return HDyadTerm(
        inst,
        h=lambda s, i, j: mode_coeff(s, mode, i, j) * s.zrow[i][j],
        dz=lambda s, i, j: mode_coeff(s, mode, i, j),
        dz_mat=lambda s: mode_matrix(s, mode),
    )


def _build_mutual(data, inst):
    mode = inst.mode
    return HDyadTerm(
        inst,
        h=lambda s, i, j: mode_coeff(s, mode, i, j) * s.zrow[i][j] * s.zrow[j][i] / 2.0,
        dz=lambda s, i, j: mode_coeff(s, mode, i, j) * s.zrow[j][i],
        dz_mat=lambda s: mode_matrix(s, mode) * s.z_matrix().T,
    )


def _build_cov_z(data, inst):
    w = _dyad_cov(data, inst)
    mode = inst.mode
    return HDyadTerm(
        inst,
        h=lambda s, i, j: w[i, j] * mode_coeff(s, mode, i, j) * s.zrow[i][j],
        dz=lambda s, i, j: w[i, j] * mode_coeff(s, mode, i, j),
        dz_mat=lambda s: w * mode_matrix(s, mode),
    )


def _build_cov_z_out(data, inst):
    v = _unit_cov(data, inst)
    mode = inst.mode
    return HDyadTerm(
        inst,
        h=lambda s, i, j: v[i] * mode_coeff(s, mode, i, j) * s.zrow[i][j],
        dz=lambda s, i, j: v[i] * mode_coeff(s, mode, i, j),
        dz_mat=lambda s: np.asarray(v)[:, None] * mode_matrix(s, mode),
    )


def _build_cov_z_in(data, inst):
    v = _unit_cov(data, inst)
    mode = inst.mode
    return HDyadTerm(
        inst,
        h=lambda s, i, j: v[j] * mode_coeff(s, mode, i, j) * s.zrow[i][j],
        dz=lambda s, i, j: v[j] * mode_coeff(s, mode, i, j),
        dz_mat=lambda s: np.asarray(v)[None, :] * mode_matrix(s, mode),
    )


def _build_isolates(data, inst):
    return UnitZTerm(
        inst,
        unit_value=lambda s, a: 1.0 if s.out_deg[a] + s.in_deg[a] == 0 else 0.0,
        empty_unit_value=1.0,
    )


def _build_nonisolates(data, inst):
    return UnitZTerm(
        inst,
        unit_value=lambda s, a: 0.0 if s.out_deg[a] + s.in_deg[a] == 0 else 1.0,
        empty_unit_value=0.0,
    )


def _build_gwdegree(data, inst):
    alpha = inst.decay
    return UnitZTerm(
        inst,
        unit_value=lambda s, a: gw_weight(s.out_deg[a], alpha),
        empty_unit_value=0.0,
    )


def _build_gwodegree(data, inst):
    alpha, mode = inst.decay, inst.mode
    return UnitZTerm(
        inst,
        unit_value=lambda s, a: gw_weight(s.degree(a, mode), alpha),
        empty_unit_value=0.0,
    )


def _build_gwidegree(data, inst):
    alpha, mode = inst.decay, inst.mode
    return UnitZTerm(
        inst,
        unit_value=lambda s, a: gw_weight(s.degree(a, mode, incoming=True), alpha),
        empty_unit_value=0.0,
    )


def _build_transitive(data, inst):
    return TransitiveTerm(inst)


def _build_gwesp_symm(data, inst):
    alpha, mode = inst.decay, inst.mode

    def h(s, i, j):
        if not s.zrow[i][j]:
            return 0.0
        e = mode_coeff(s, mode, i, j)
        if not e:
            return 0.0
        return e * gw_weight(s.cp_mode(i, j, mode), alpha)

    return StructuralHTerm(inst, h)


def _build_gwesp(data, inst):
    alpha, mode, cp = inst.decay, inst.mode, inst.cp_type

    def h(s, i, j):
        if not s.zrow[i][j]:
            return 0.0
        e = mode_coeff(s, mode, i, j)
        if not e:
            return 0.0
        return e * gw_weight(s.cp_mode(i, j, mode, cp), alpha)

    return StructuralHTerm(inst, h)


def _build_gwdsp_symm(data, inst):
    alpha, mode = inst.decay, inst.mode
    return StructuralHTerm(
        inst, lambda s, i, j: gw_weight(s.cp_mode(i, j, mode), alpha)
    )


def _build_gwdsp(data, inst):
    alpha, mode, cp = inst.decay, inst.mode, inst.cp_type
    return StructuralHTerm(
        inst, lambda s, i, j: gw_weight(s.cp_mode(i, j, mode, cp), alpha)
    )


# -- joint attribute/connection terms ---------------------------------------


def _build_attribute_xz(data, inst):
    def dx(s, i):
        if s.directed:
            return sum(s.crow[i][j] * (s.zrow[i][j] + s.zrow[j][i])
                       for j in s.out_sets[i] | s.in_sets[i])
        return sum(s.crow[i][j] for j in s.out_sets[i])

    return HDyadTerm(
        inst,
        h=lambda s, i, j: (s.x_val[i] + s.x_val[j]) * s.crow[i][j] * s.zrow[i][j],
        dz=lambda s, i, j: (s.x_val[i] + s.x_val[j]) * s.crow[i][j],
        dx=dx,
        dz_mat=lambda s: (s.x_array()[:, None] + s.x_array()[None, :]) * s.c_matrix(),
    )


def _build_attribute_yz(data, inst):
    def dy(s, i):
        if s.directed:
            return sum(s.crow[i][j] * (s.zrow[i][j] + s.zrow[j][i])
                       for j in s.out_sets[i] | s.in_sets[i])
        return sum(s.crow[i][j] for j in s.out_sets[i])

    return HDyadTerm(
        inst,
        h=lambda s, i, j: (s.y_val[i] + s.y_val[j]) * s.crow[i][j] * s.zrow[i][j],
        dz=lambda s, i, j: (s.y_val[i] + s.y_val[j]) * s.crow[i][j],
        dy=dy,
        dz_mat=lambda s: (s.y_array()[:, None] + s.y_array()[None, :]) * s.c_matrix(),
    )


def _build_edges_match(which):
    def build(data, inst):
        mode = inst.mode
        raw = (lambda s: s.x_raw) if which == "x" else (lambda s: s.y_raw)

        def h(s, i, j):
            vals = raw(s)
            return (1.0 if vals[i] == vals[j] else 0.0) * \
                mode_coeff(s, mode, i, j) * s.zrow[i][j]

        def dz(s, i, j):
            vals = raw(s)
            return (1.0 if vals[i] == vals[j] else 0.0) * mode_coeff(s, mode, i, j)

        def dattr(s, i):
            # On {0,1}: I(a_i = a_j) = a_i a_j + (1-a_i)(1-a_j); slope 2a_j - 1.
            vals = raw(s)
            if s.directed:
                return sum((2.0 * vals[j] - 1.0) * mode_coeff(s, mode, i, j)
                           * (s.zrow[i][j] + s.zrow[j][i])
                           for j in s.out_sets[i] | s.in_sets[i])
            return sum((2.0 * vals[j] - 1.0) * mode_coeff(s, mode, i, j)
                       for j in s.out_sets[i])

        def dz_mat(s):
            vals = np.asarray(raw(s))
            return (vals[:, None] == vals[None, :]).astype(float) * mode_matrix(s, mode)

        kw = {"dx": dattr} if which == "x" else {"dy": dattr}
        return HDyadTerm(inst, h=h, dz=dz, dz_mat=dz_mat, **kw)

    return build


def _build_dir_edge_attr(which, endpoint):
    """outedges_x / inedges_x / outedges_y / inedges_y (directed only)."""

    def build(data, inst):
        mode = inst.mode
        vals_of = (lambda s: s.x_val) if which == "x" else (lambda s: s.y_val)

        if endpoint == "out":
            def h(s, i, j):
                return vals_of(s)[i] * mode_coeff(s, mode, i, j) * s.zrow[i][j]

            def dz(s, i, j):
                return vals_of(s)[i] * mode_coeff(s, mode, i, j)

            def dattr(s, i):
                return sum(mode_coeff(s, mode, i, j) for j in s.out_sets[i])

            def dz_mat(s):
                v = s.x_array() if which == "x" else s.y_array()
                return v[:, None] * mode_matrix(s, mode)
        else:
            def h(s, i, j):
                return vals_of(s)[j] * mode_coeff(s, mode, i, j) * s.zrow[i][j]

            def dz(s, i, j):
                return vals_of(s)[j] * mode_coeff(s, mode, i, j)

            def dattr(s, i):
                return sum(mode_coeff(s, mode, a, i) for a in s.in_sets[i])

            def dz_mat(s):
                v = s.x_array() if which == "x" else s.y_array()
                return v[None, :] * mode_matrix(s, mode)

        kw = {"dx": dattr} if which == "x" else {"dy": dattr}
        return HDyadTerm(inst, h=h, dz=dz, dz_mat=dz_mat, **kw)

    return build


def _build_spillover(first, second):
    """Unscaled spillover terms over overlapping connections.

    ``first``/``second`` name the attributes of the sender and receiver in
    the statistic first*second; the undirected version symmetrizes."""

    def build(data, inst):
        def vals(s, which):
            return s.x_val if which == "x" else s.y_val

        def h(s, i, j):
            u = s.crow[i][j] * s.zrow[i][j]
            if not u:
                return 0.0
            base = vals(s, first)[i] * vals(s, second)[j]
            if not s.directed and first != second:
                base += vals(s, first)[j] * vals(s, second)[i]
            return base * u

        def dz(s, i, j):
            c = s.crow[i][j]
            if not c:
                return 0.0
            base = vals(s, first)[i] * vals(s, second)[j]
            if not s.directed and first != second:
                base += vals(s, first)[j] * vals(s, second)[i]
            return base * c

        def dz_mat(s):
            a = s.x_array() if first == "x" else s.y_array()
            b = s.x_array() if second == "x" else s.y_array()
            m = np.outer(a, b)
            if not s.directed and first != second:
                m = m + np.outer(b, a)
            return m * s.c_matrix()

        def d_first(s, i):
            other = vals(s, second)
            if s.directed:
                return sum(other[j] * s.crow[i][j] * s.zrow[i][j]
                           for j in s.out_sets[i] if s.crow[i][j])
            return sum(other[j] * s.crow[i][j] for j in s.out_sets[i])

        def d_second(s, i):
            other = vals(s, first)
            if s.directed:
                return sum(other[a] * s.crow[a][i] * s.zrow[a][i]
                           for a in s.in_sets[i] if s.crow[a][i])
            return sum(other[j] * s.crow[i][j] for j in s.out_sets[i])

        if first == second:
            def d_same(s, i, which=first):
                other = vals(s, which)
                if s.directed:
                    return sum(other[j] * s.crow[i][j] * (s.zrow[i][j] + s.zrow[j][i])
                               for j in s.out_sets[i] | s.in_sets[i])
                return sum(other[j] * s.crow[i][j] for j in s.out_sets[i])

            kw = {"dx": d_same} if first == "x" else {"dy": d_same}
        else:
            kw = {}
            kw["dx" if first == "x" else "dy"] = d_first
            kw["dx" if second == "x" else "dy"] = d_second
        return HDyadTerm(inst, h=h, dz=dz, dz_mat=dz_mat, **kw)

    return build


def _build_spillover_scaled(first, second):
    """Scaled spillover: pair statistic divided by the sender's mode degree
    (receiver's for the undirected mirror image), floored at one."""

    def build(data, inst):
        mode = inst.mode

        def vals(s, which):
            return s.x_val if which == "x" else s.y_val

        def h(s, i, j):
            e = mode_coeff(s, mode, i, j) * s.zrow[i][j]
            if not e:
                return 0.0
            di = max(s.degree(i, mode), 1)
            total = vals(s, first)[i] * vals(s, second)[j] / di
            if not s.directed:
                dj = max(s.degree(j, mode), 1)
                total += vals(s, first)[j] * vals(s, second)[i] / dj
            return total * e

        term = StructuralHTerm(inst, h,
                               depends_x="x" in (first, second),
                               depends_y="y" in (first, second))
        return term

    return build


def _build_spillover_yc(data, inst):
    v = _unit_cov(data, inst)

    def h(s, i, j):
        u = s.crow[i][j] * s.zrow[i][j]
        if not u:
            return 0.0
        total = v[j] * s.y_val[i]
        if not s.directed:
            total += v[i] * s.y_val[j]
        return total * u

    def dz(s, i, j):
        c = s.crow[i][j]
        if not c:
            return 0.0
        total = v[j] * s.y_val[i]
        if not s.directed:
            total += v[i] * s.y_val[j]
        return total * c

    def dy(s, i):
        return sum(v[j] * s.crow[i][j] for j in s.out_sets[i])

    def dz_mat(s):
        va = np.asarray(v)
        m = va[None, :] * s.y_array()[:, None]
        if not s.directed:
            m = m + va[:, None] * s.y_array()[None, :]
        return m * s.c_matrix()

    return HDyadTerm(inst, h=h, dz=dz, dy=dy, dz_mat=dz_mat)


def _build_degrees(data, inst):
    raise ModelBindError("the degrees term is handled by the weight layout")


# ---------------------------------------------------------------------------
# Registration (one entry per catalog row).
# ---------------------------------------------------------------------------

_register("attribute_x", _build_attribute_x, doc="x_i")
_register("attribute_y", _build_attribute_y, doc="y_i")
_register("cov_x", _build_cov_x, covariate="unit", doc="v_i * x_i")
_register("cov_y", _build_cov_y, covariate="unit", doc="v_i * y_i")
_register("attribute_xy", _build_attribute_xy, modes=MODES,
          default_mode="global",
          doc="x_i*y_i, or neighborhood (non-neighborhood) cross-sums")

_register("degrees", _build_degrees, degrees=True,
          doc="per-unit out-/indegree weights (the high-dimensional block)")
_register("edges", _build_edges, modes=MODES, default_mode="global",
          doc="connection count under the edge mode")
_register("mutual", _build_mutual, modes=MODES, default_mode="local",
          undirected_ok=False, doc="reciprocated connections")
_register("cov_z", _build_cov_z, modes=MODES, default_mode="global",
          covariate="dyad", doc="w_ij weighted connections")
_register("cov_z_out", _build_cov_z_out, modes=MODES, default_mode="global",
          covariate="unit", undirected_ok=False, doc="sender covariate")
_register("cov_z_in", _build_cov_z_in, modes=MODES, default_mode="global",
          covariate="unit", undirected_ok=False, doc="receiver covariate")
_register("isolates", _build_isolates, doc="units with no connections")
_register("nonisolates", _build_nonisolates, doc="units with connections")
_register("gwdegree", _build_gwdegree, modes=("global",), default_mode="global",
          needs_decay=True, doc="geometrically weighted degrees")
_register("gwodegree", _build_gwodegree, modes=("global", "local"),
          default_mode="global", needs_decay=True, undirected_ok=False,
          doc="geometrically weighted outdegrees")
_register("gwidegree", _build_gwidegree, modes=("global", "local"),
          default_mode="global", needs_decay=True, undirected_ok=False,
          doc="geometrically weighted indegrees")
_register("transitive", _build_transitive,
          doc="connections closed by a two-path through both neighborhoods")
_register("gwesp_symm", _build_gwesp_symm, modes=("global", "local"),
          default_mode="local", needs_decay=True,
          doc="geometrically weighted edgewise shared partners")
_register("gwesp", _build_gwesp, modes=("global", "local"),
          default_mode="local", needs_decay=True, needs_cp_type=True,
          undirected_ok=False,
          doc="geometrically weighted edgewise shared partners, typed paths")
_register("gwdsp_symm", _build_gwdsp_symm, modes=("local",),
          default_mode="local", needs_decay=True,
          doc="geometrically weighted dyadwise shared partners")
_register("gwdsp", _build_gwdsp, modes=("global", "local"),
          default_mode="local", needs_decay=True, needs_cp_type=True,
          undirected_ok=False,
          doc="geometrically weighted dyadwise shared partners, typed paths")

_register("attribute_xz", _build_attribute_xz, modes=("local",),
          default_mode="local", doc="(x_i + x_j) on overlapping connections")
_register("attribute_yz", _build_attribute_yz, modes=("local",),
          default_mode="local", doc="(y_i + y_j) on overlapping connections")
_register("edges_x_match", _build_edges_match("x"), modes=("global", "local"),
          default_mode="global", binary_x_only=True,
          doc="connections between units with equal x")
_register("edges_y_match", _build_edges_match("y"), modes=("global", "local"),
          default_mode="global", binary_y_only=True,
          doc="connections between units with equal y")
_register("outedges_x", _build_dir_edge_attr("x", "out"), modes=MODES,
          default_mode="global", undirected_ok=False, doc="x_i on connections")
_register("inedges_x", _build_dir_edge_attr("x", "in"), modes=MODES,
          default_mode="global", undirected_ok=False, doc="x_j on connections")
_register("outedges_y", _build_dir_edge_attr("y", "out"), modes=MODES,
          default_mode="global", undirected_ok=False, doc="y_i on connections")
_register("inedges_y", _build_dir_edge_attr("y", "in"), modes=MODES,
          default_mode="global", undirected_ok=False, doc="y_j on connections")

_register("spillover_xx", _build_spillover("x", "x"), modes=("local",),
          default_mode="local", doc="x_i x_j on overlapping connections")
_register("spillover_yy", _build_spillover("y", "y"), modes=("local",),
          default_mode="local", doc="y_i y_j on overlapping connections")
_register("spillover_xy", _build_spillover("x", "y"), modes=("local",),
          default_mode="local",
          doc="x_i y_j (symmetrized when undirected) on overlapping connections")
_register("spillover_yx", _build_spillover("y", "x"), modes=("local",),
          default_mode="local", undirected_ok=False,
          doc="y_i x_j on overlapping connections")
_register("spillover_xx_scaled", _build_spillover_scaled("x", "x"), modes=MODES,
          default_mode="local", doc="degree-scaled x_i x_j spillover")
_register("spillover_yy_scaled", _build_spillover_scaled("y", "y"), modes=MODES,
          default_mode="local", doc="degree-scaled y_i y_j spillover")
_register("spillover_xy_scaled", _build_spillover_scaled("x", "y"), modes=MODES,
          default_mode="local", doc="degree-scaled x_i y_j spillover")
_register("spillover_yx_scaled", _build_spillover_scaled("y", "x"), modes=MODES,
          default_mode="local", doc="degree-scaled y_i x_j spillover")
_register("spillover_yc", _build_spillover_yc, modes=("local",),
          default_mode="local", covariate="unit",
          doc="covariate-weighted outcome spillover")
