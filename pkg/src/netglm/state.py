"""Mutable evaluation state for change statistics, sampling, and enumeration.

A :class:`NetworkState` snapshots a :class:`~netglm.data.PopulationData` into
cheap mutable structures (adjacency sets, a dense 0/1 connection table,
degree caches) and exposes the read-only query surface that term evaluators
-- built-in and user-registered alike -- program against: attribute values
(raw and scaled), adjacency, neighborhood membership and overlap, plain and
overlap-restricted degrees, and typed common-partner queries.

Mutation goes through :meth:`set_edge` and :meth:`set_attribute` only, which
keep the caches consistent.  Undirected edges update both orientations
atomically.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

CP_TYPES = ("OTP", "ISP", "OSP", "ITP")


class NetworkState:
    """Snapshot of (x, y, z) over a fixed population, built for fast queries."""

    def __init__(self, data):
        self.data = data
        n = data.n
        self.n = n
        self.directed = data.directed
        self.x_scale = data.x.scale if data.x.family == "normal" else 1.0
        self.y_scale = data.y.scale if data.y.family == "normal" else 1.0
        self.x_raw = [float(v) for v in data.x.values]
        self.y_raw = [float(v) for v in data.y.values]
        self.x_val = [v / self.x_scale for v in self.x_raw]
        self.y_val = [v / self.y_scale for v in self.y_raw]

        self.zrow = [bytearray(n) for _ in range(n)]
        self.out_sets = [set() for _ in range(n)]
        self.in_sets = self.out_sets if not self.directed else [set() for _ in range(n)]
        self.out_deg = [0] * n
        self.in_deg = [0] * n
        self.out_deg_local = [0] * n
        self.in_deg_local = [0] * n

        nb = data.nb
        self.nb_sets = nb.sets
        self.nb_full = nb.full
        self.crow = [bytearray(n) for _ in range(n)]
        cmat = nb.overlap_matrix()
        for i in range(n):
            row = self.crow[i]
            ci = cmat[i]
            for j in range(n):
                if ci[j]:
                    row[j] = 1

        for i, j in data.z.edge_list():
            self.set_edge(i, j, 1)

    # -- mutation ----------------------------------------------------------

    def set_edge(self, i, j, value):
        """Set z[i, j] (and z[j, i] for undirected data) to 0 or 1."""
        value = int(value)
        if self.zrow[i][j] == value:
            return
        delta = 1 if value else -1
        self.zrow[i][j] = value
        c = self.crow[i][j]
        if value:
            self.out_sets[i].add(j)
            self.in_sets[j].add(i)
        else:
            self.out_sets[i].discard(j)
            self.in_sets[j].discard(i)
        self.out_deg[i] += delta
        self.in_deg[j] += delta
        if c:
            self.out_deg_local[i] += delta
            self.in_deg_local[j] += delta
        if not self.directed:
            self.zrow[j][i] = value
            self.out_deg[j] += delta
            self.in_deg[i] += delta
            if c:
                self.out_deg_local[j] += delta
                self.in_deg_local[i] += delta

    def set_attribute(self, which, i, raw_value):
        if which == "x":
            self.x_raw[i] = float(raw_value)
            self.x_val[i] = self.x_raw[i] / self.x_scale
        elif which == "y":
            self.y_raw[i] = float(raw_value)
            self.y_val[i] = self.y_raw[i] / self.y_scale
        else:
            raise DataError(f"unknown attribute {which!r}")

    # -- query surface -----------------------------------------------------

    def z(self, i, j) -> int:
        return self.zrow[i][j]

    def overlap(self, i, j) -> int:
        """c[i, j]: 1 when the neighborhoods of i and j intersect."""
        return self.crow[i][j]

    def neighbors(self, i):
        """The exogenous neighborhood of unit i."""
        return self.nb_sets[i]

    def attr_value(self, which, i, scaled=True) -> float:
        vals = (self.x_val if scaled else self.x_raw) if which == "x" else \
               (self.y_val if scaled else self.y_raw)
        return vals[i]

    def out_connections(self, i):
        return self.out_sets[i]

    def in_connections(self, i):
        return self.in_sets[i]

    def out_degree(self, i, overlap_only=False) -> int:
        return self.out_deg_local[i] if overlap_only else self.out_deg[i]

    def in_degree(self, i, overlap_only=False) -> int:
        return self.in_deg_local[i] if overlap_only else self.in_deg[i]

    def degree(self, i, mode="global", incoming=False) -> int:
        """Degree under a term mode: global, local (overlap), alocal."""
        full = self.in_deg[i] if incoming else self.out_deg[i]
        if mode == "global":
            return full
        local = self.in_deg_local[i] if incoming else self.out_deg_local[i]
        return local if mode == "local" else full - local

    def common_partners(self, i, j, cp_type="OTP", overlap_only=False):
        """Units forming the requested two-path between i and j.

        With ``overlap_only`` both legs are restricted to connections among
        units with overlapping neighborhoods (the ``local`` edge mode).
        """
        if cp_type == "OTP":
            base = self.out_sets[i] & self.in_sets[j]
        elif cp_type == "ISP":
            base = self.in_sets[i] & self.in_sets[j]
        elif cp_type == "OSP":
            base = self.out_sets[i] & self.out_sets[j]
        elif cp_type == "ITP":
            base = self.in_sets[i] & self.out_sets[j]
        else:
            raise DataError(f"unknown common-partner type {cp_type!r}")
        base = base - {i, j}
        if not overlap_only:
            return base
        ci, cj = self.crow[i], self.crow[j]
        return {h for h in base if ci[h] and cj[h]}

    def count_common_partners(self, i, j, cp_type="OTP", overlap_only=False) -> int:
        return len(self.common_partners(i, j, cp_type, overlap_only))

    def cp_mode(self, i, j, mode, cp_type="OTP") -> int:
        """Common-partner count with both legs in the given edge mode."""
        if mode == "global":
            return self.count_common_partners(i, j, cp_type)
        if mode == "local":
            return self.count_common_partners(i, j, cp_type, overlap_only=True)
        raise DataError(f"common partners undefined for mode {mode!r}")

    def transitive_closed(self, i, j) -> int:
        """d[i, j]: some k in both neighborhoods has z[i, k] = z[k, j] = 1."""
        nbi, nbj = self.nb_sets[i], self.nb_sets[j]
        for k in self.out_sets[i] & self.in_sets[j]:
            if k in nbi and k in nbj:
                return 1
        return 0

    # -- dense views (built on demand, used by vectorized assembly) --------

    def z_matrix(self) -> np.ndarray:
        return np.array([list(r) for r in self.zrow], dtype=float)

    def c_matrix(self) -> np.ndarray:
        return np.array([list(r) for r in self.crow], dtype=float)

    def x_array(self, scaled=True) -> np.ndarray:
        return np.asarray(self.x_val if scaled else self.x_raw, dtype=float)

    def y_array(self, scaled=True) -> np.ndarray:
        return np.asarray(self.y_val if scaled else self.y_raw, dtype=float)

    def edge_list(self):
        out = []
        for i, s in enumerate(self.out_sets):
            for j in s:
                if self.directed or i < j:
                    out.append((i, j))
        return sorted(out)

    def n_edges(self) -> int:
        total = sum(len(s) for s in self.out_sets)
        return total if self.directed else total // 2

    def dyads(self):
        n = self.n
        if self.directed:
            return [(i, j) for i in range(n) for j in range(n) if i != j]
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def snapshot(self):
        """Immutable copy of the current (x, y, edge list) configuration."""
        return (
            np.asarray(self.x_raw, dtype=float),
            np.asarray(self.y_raw, dtype=float),
            tuple(self.edge_list()),
        )

    def restore(self, snap):
        x, y, edges = snap
        for i in range(self.n):
            self.set_attribute("x", i, x[i])
            self.set_attribute("y", i, y[i])
        for i, j in self.edge_list():
            self.set_edge(i, j, 0)
        for i, j in edges:
            self.set_edge(i, j, 1)
