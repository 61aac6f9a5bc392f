"""Population data: attributes, connections, neighborhoods, descriptive statistics.

The central object is :class:`PopulationData`, which bundles a unit-level
predictor vector ``x``, an outcome vector ``y``, a binary connection network
``z`` (directed or undirected), and an exogenous neighborhood structure from
which the pairwise overlap indicator ``c[i, j]`` is derived.  All objects are
immutable after construction; descriptive statistics are pure functions.
"""

from __future__ import annotations

import csv
import math
from collections import Counter, deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DataError,
    DuplicateEdgeError,
    FamilyValueError,
    SelfLoopError,
    UnitRangeError,
)

FAMILIES = ("binomial", "poisson", "normal")


def _check_family_values(name, values, family):
    if family not in FAMILIES:
        raise FamilyValueError(f"{name}: unknown family {family!r}")
    for idx, v in enumerate(values):
        if not math.isfinite(v):
            raise FamilyValueError(f"{name}[{idx}] = {v!r} is not finite")
        if family == "binomial" and v not in (0.0, 1.0):
            raise FamilyValueError(
                f"{name}[{idx}] = {v!r} invalid for binomial (must be 0 or 1)"
            )
        if family == "poisson" and (v < 0 or v != int(v)):
            raise FamilyValueError(
                f"{name}[{idx}] = {v!r} invalid for poisson (must be a count)"
            )


@dataclass(frozen=True)
class AttributeVector:
    """A unit-level attribute with its conditional family.

    ``scale`` is the conditional variance of the normal family and is 1.0
    for the binomial and poisson families.  Values entering model statistics
    are divided by ``scale`` (see ``scaled``); raw values are kept for
    likelihood evaluation and reporting.
    """

    values: np.ndarray
    family: str = "binomial"
    fixed: bool = False
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=float).copy()
        )
        self.values.setflags(write=False)
        _check_family_values("attribute", self.values, self.family)
        if self.family == "normal":
            if not (self.scale > 0):
                raise FamilyValueError(
                    f"normal attribute requires scale > 0, got {self.scale}"
                )
        elif self.scale != 1.0:
            raise FamilyValueError(
                f"scale is only meaningful for the normal family, got {self.scale}"
            )

    def __len__(self):
        return len(self.values)

    @property
    def scaled(self) -> np.ndarray:
        """Values as they enter sufficient statistics (divided by scale)."""
        if self.family == "normal" and self.scale != 1.0:
            return self.values / self.scale
        return self.values


class Network:
    """Binary connections stored as per-unit sorted adjacency lists.

    No self-loops; undirected networks are kept symmetric.  ``fixed`` pins
    every connection at its observed value; ``fixed_alocal_only`` pins only
    the connections between units whose neighborhoods do not overlap.
    """

    def __init__(self, n, edges, directed, fixed=False, fixed_alocal_only=False):
        if n < 2:
            raise DataError(f"need at least 2 units, got {n}")
        if fixed and fixed_alocal_only:
            raise DataError("fixed and fixed_alocal_only are mutually exclusive")
        self.n = int(n)
        self.directed = bool(directed)
        self.fixed = bool(fixed)
        self.fixed_alocal_only = bool(fixed_alocal_only)

        out_sets = [set() for _ in range(n)]
        in_sets = [set() for _ in range(n)] if directed else None
        seen = set()
        for src, dst in edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise UnitRangeError(f"edge ({src},{dst}) references unknown unit")
            if src == dst:
                raise SelfLoopError(f"edge ({src},{dst}) is a self-loop")
            key = (src, dst) if directed else (min(src, dst), max(src, dst))
            if key in seen:
                raise DuplicateEdgeError(f"edge ({src},{dst}) is duplicated")
            seen.add(key)
            out_sets[src].add(dst)
            if directed:
                in_sets[dst].add(src)
            else:
                out_sets[dst].add(src)

        self.out_adjacency = [sorted(s) for s in out_sets]
        self.in_adjacency = [sorted(s) for s in in_sets] if directed else None
        self._out_sets = out_sets
        self._in_sets = in_sets if directed else out_sets

    @property
    def n_edges(self) -> int:
        """Number of connections: ordered pairs if directed, else edges."""
        total = sum(len(a) for a in self.out_adjacency)
        return total if self.directed else total // 2

    def has_edge(self, i, j) -> bool:
        return j in self._out_sets[i]

    def edge_list(self):
        """Edges as (src, dst) pairs; src < dst for undirected networks."""
        out = []
        for i, adj in enumerate(self.out_adjacency):
            for j in adj:
                if self.directed or i < j:
                    out.append((i, j))
        return out

    def adjacency_matrix(self) -> np.ndarray:
        z = np.zeros((self.n, self.n))
        for i, j in self.edge_list():
            z[i, j] = 1.0
            if not self.directed:
                z[j, i] = 1.0
        return z

    def dyads(self):
        """The set of pairs with possible connections, in iteration order."""
        n = self.n
        if self.directed:
            return [(i, j) for i in range(n) for j in range(n) if i != j]
        return [(i, j) for i in range(n) for j in range(i + 1, n)]


class NeighborhoodStructure:
    """Exogenous neighbor sets and the derived overlap indicator.

    Absent input means every unit's neighborhood is all other units and the
    overlap indicator is 1 for every pair.
    """

    def __init__(self, n, neighbor_pairs=None):
        self.n = int(n)
        self.full = neighbor_pairs is None
        if self.full:
            self.sets = [set(range(n)) - {i} for i in range(n)]
            self.n_neighbor_links = n * (n - 1)
            return
        sets = [set() for _ in range(n)]
        seen = set()
        for i, j in neighbor_pairs:
            if not (0 <= i < n and 0 <= j < n):
                raise UnitRangeError(f"neighborhood pair ({i},{j}) references unknown unit")
            if i == j:
                raise SelfLoopError(f"neighborhood pair ({i},{j}) is a self-loop")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DuplicateEdgeError(f"neighborhood pair ({i},{j}) is duplicated")
            seen.add(key)
            sets[i].add(j)
            sets[j].add(i)
        self.sets = sets
        self.n_neighbor_links = sum(len(s) for s in sets)

    def overlap(self, i, j) -> bool:
        """Whether the neighborhoods of i and j intersect (c[i, j])."""
        if self.full:
            return True
        return not self.sets[i].isdisjoint(self.sets[j])

    def overlap_matrix(self) -> np.ndarray:
        n = self.n
        if self.full:
            c = np.ones((n, n), dtype=bool)
            np.fill_diagonal(c, False)
            return c
        c = np.zeros((n, n), dtype=bool)
        for i in range(n):
            si = self.sets[i]
            for j in range(i + 1, n):
                if not si.isdisjoint(self.sets[j]):
                    c[i, j] = c[j, i] = True
        return c


@dataclass(frozen=True)
class PopulationData:
    """Validated bundle of attributes, network, and neighborhoods."""

    x: AttributeVector
    y: AttributeVector
    z: Network
    nb: NeighborhoodStructure
    covariates: dict = field(default_factory=dict)
    unit_labels: list = field(default_factory=list)

    def __post_init__(self):
        n = self.z.n
        if len(self.x) != n or len(self.y) != n:
            raise DataError(
                f"attribute lengths ({len(self.x)}, {len(self.y)}) do not match "
                f"unit count {n}"
            )
        if self.nb.n != n:
            raise DataError("neighborhood structure does not match unit count")
        for name, arr in self.covariates.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape not in ((n,), (n, n)):
                raise DataError(
                    f"covariate {name!r} has shape {arr.shape}, expected ({n},) or ({n},{n})"
                )
            self.covariates[name] = arr
        if not self.unit_labels:
            object.__setattr__(self, "unit_labels", [str(i) for i in range(n)])

    @property
    def n(self) -> int:
        return self.z.n

    @property
    def directed(self) -> bool:
        return self.z.directed

    def covariate(self, name, dyadic=None) -> np.ndarray:
        try:
            arr = self.covariates[name]
        except KeyError:
            raise DataError(f"unknown covariate {name!r}") from None
        if dyadic is True and arr.ndim != 2:
            raise DataError(f"covariate {name!r} is unit-level, expected dyad-level")
        if dyadic is False and arr.ndim != 1:
            raise DataError(f"covariate {name!r} is dyad-level, expected unit-level")
        return arr

    def with_flags(self, fix_x=None, fix_z=None, fix_z_alocal=None, scale_y=None,
                   scale_x=None):
        """Return a copy with fixed-design flags or normal scales replaced."""
        x, y, z = self.x, self.y, self.z
        if fix_x is not None:
            x = replace(x, fixed=bool(fix_x))
        if scale_x is not None:
            x = replace(x, scale=float(scale_x))
        if scale_y is not None:
            y = replace(y, scale=float(scale_y))
        if fix_z is not None or fix_z_alocal is not None:
            fz = z.fixed if fix_z is None else bool(fix_z)
            fza = z.fixed_alocal_only if fix_z_alocal is None else bool(fix_z_alocal)
            new_z = Network(z.n, z.edge_list(), z.directed, fixed=fz,
                            fixed_alocal_only=fza)
            z = new_z
        return PopulationData(x, y, z, self.nb, dict(self.covariates),
                              list(self.unit_labels))


def build_population(x_values, y_values, edges, n=None, directed=True,
                     type_x="binomial", type_y="binomial",
                     neighbor_pairs=None, covariates=None, unit_labels=None,
                     fix_x=False, fix_z=False, fix_z_alocal=False,
                     scale_x=1.0, scale_y=1.0) -> PopulationData:
    """Validate raw inputs and assemble a :class:`PopulationData`."""
    x_values = np.asarray(x_values, dtype=float)
    y_values = np.asarray(y_values, dtype=float)
    if n is None:
        n = len(x_values)
    if len(x_values) != len(y_values):
        raise DataError(
            f"x and y lengths differ: {len(x_values)} vs {len(y_values)}"
        )
    x = AttributeVector(x_values, type_x, fixed=fix_x, scale=scale_x)
    y = AttributeVector(y_values, type_y, fixed=False, scale=scale_y)
    z = Network(n, edges, directed, fixed=fix_z, fixed_alocal_only=fix_z_alocal)
    nb = NeighborhoodStructure(n, neighbor_pairs)
    return PopulationData(x, y, z, nb, dict(covariates or {}),
                          list(unit_labels or []))


def delete_isolates(data: PopulationData) -> PopulationData:
    """Drop units with no connections and re-index the rest densely.

    Degree weights of isolated units have no maximizer, so models with the
    ``degrees`` term require isolate-free data.  Idempotent.
    """
    z = data.z
    keep = [i for i in range(z.n)
            if z.out_adjacency[i] or (z.directed and z.in_adjacency[i])]
    if len(keep) == z.n:
        return data
    remap = {old: new for new, old in enumerate(keep)}
    edges = [(remap[i], remap[j]) for i, j in z.edge_list()]
    nb_pairs = None
    if not data.nb.full:
        nb_pairs = sorted(
            {(remap[i], remap[j]) for i in keep for j in data.nb.sets[i]
             if j in remap and remap[i] < remap[j]}
        )
    covs = {}
    idx = np.asarray(keep, dtype=int)
    for name, arr in data.covariates.items():
        covs[name] = arr[idx] if arr.ndim == 1 else arr[np.ix_(idx, idx)]
    n_new = len(keep)
    if n_new < 2:
        # Degenerate but valid: an empty population summary, no model fitting.
        pass
    x = AttributeVector(data.x.values[idx], data.x.family, data.x.fixed, data.x.scale)
    y = AttributeVector(data.y.values[idx], data.y.family, data.y.fixed, data.y.scale)
    if n_new >= 2:
        z_new = Network(n_new, edges, z.directed, z.fixed, z.fixed_alocal_only)
        nb_new = NeighborhoodStructure(n_new, nb_pairs)
        return PopulationData(x, y, z_new, nb_new, covs,
                              [data.unit_labels[i] for i in keep])
    return EmptyPopulation(n_new)


class EmptyPopulation:
    """Placeholder returned when isolate deletion removes (almost) everything."""

    def __init__(self, n):
        self.n = n

    def __repr__(self):
        return f"EmptyPopulation(n={self.n})"


def binarize(values, family) -> np.ndarray:
    """Binary view of an attribute: indicator of exceeding the mean.

    Binary attributes pass through unchanged; ties at the mean map to 0.
    """
    values = np.asarray(values, dtype=float)
    if family == "binomial":
        return values.copy()
    return (values > values.mean()).astype(float)


# ---------------------------------------------------------------------------
# Descriptive statistics.  Histograms are plain {value: count} dicts.
# ---------------------------------------------------------------------------


def degree_distribution(data: PopulationData):
    """Degree histogram(s); (outdegree, indegree) pair when directed."""
    z = data.z
    out_hist = Counter(len(a) for a in z.out_adjacency)
    if not z.directed:
        return dict(out_hist)
    in_hist = Counter(len(a) for a in z.in_adjacency)
    return dict(out_hist), dict(in_hist)


def spillover_edges(data: PopulationData):
    """Connections that enable spillover: c*x~[i]*y~[j] = 1 or c*x~[j]*y~[i] = 1."""
    xt = binarize(data.x.values, data.x.family)
    yt = binarize(data.y.values, data.y.family)
    kept = []
    for i, j in data.z.edge_list():
        if not data.nb.overlap(i, j):
            continue
        if xt[i] * yt[j] == 1.0 or xt[j] * yt[i] == 1.0:
            kept.append((i, j))
    return kept


def spillover_degree_distribution(data: PopulationData):
    """Degree histogram(s) in the spillover-enabling subnetwork."""
    sub = Network(data.n, spillover_edges(data), data.directed)
    out_hist = Counter(len(a) for a in sub.out_adjacency)
    if not data.directed:
        return dict(out_hist)
    in_hist = Counter(len(a) for a in sub.in_adjacency)
    return dict(out_hist), dict(in_hist)


def geodesic_distances_distribution(data: PopulationData):
    """Counts of pairs at each finite shortest-path length.

    Ordered pairs for directed networks, unordered otherwise; pairs with no
    path are reported under the ``math.inf`` key.
    """
    z = data.z
    n = z.n
    hist = Counter()
    for src in range(n):
        dist = [-1] * n
        dist[src] = 0
        queue = deque([src])
        reached = 1
        while queue:
            u = queue.popleft()
            du = dist[u]
            for v in z.out_adjacency[u]:
                if dist[v] < 0:
                    dist[v] = du + 1
                    reached += 1
                    queue.append(v)
        for v in range(n):
            if v != src and dist[v] > 0:
                hist[dist[v]] += 1
        hist[math.inf] += n - reached
    if not z.directed:
        hist = Counter({k: v // 2 for k, v in hist.items()})
    if hist.get(math.inf) == 0:
        del hist[math.inf]
    return dict(hist)


def shared_partner_count(z: Network, i, j, cp_type="OTP") -> int:
    """Number of shared partners of the pair (i, j).

    Undirected networks count common neighbors; directed networks use the
    requested two-path orientation (default OTP: k with z[i,k] = z[k,j] = 1).
    """
    out_s, in_s = z._out_sets, z._in_sets
    if not z.directed:
        return len(out_s[i] & out_s[j])
    if cp_type == "OTP":
        common = out_s[i] & in_s[j]
    elif cp_type == "ISP":
        common = in_s[i] & in_s[j]
    elif cp_type == "OSP":
        common = out_s[i] & out_s[j]
    elif cp_type == "ITP":
        common = in_s[i] & out_s[j]
    else:
        raise DataError(f"unknown shared-partner type {cp_type!r}")
    return len(common - {i, j})


def shared_partner_distribution(data: PopulationData, kind="dyadwise",
                                cp_type="OTP"):
    """Histogram of shared-partner counts over dyads (or connected dyads)."""
    if kind not in ("dyadwise", "edgewise"):
        raise DataError(f"kind must be dyadwise or edgewise, got {kind!r}")
    z = data.z
    hist = Counter()
    pairs = z.dyads() if kind == "dyadwise" else z.edge_list()
    for i, j in pairs:
        hist[shared_partner_count(z, i, j, cp_type)] += 1
    return dict(hist)


def attribute_distribution(attr: AttributeVector, bins=None):
    """Histogram of attribute values.

    Discrete families bin by exact value; the normal family uses ``bins``
    equal-width bins (edges chosen from the data range when not supplied).
    """
    vals = attr.values
    if attr.family != "normal":
        return {float(v): c for v, c in sorted(Counter(vals.tolist()).items())}
    if bins is None:
        lo, hi = float(vals.min()), float(vals.max())
        if lo == hi:
            hi = lo + 1.0
        bins = np.linspace(lo, hi, 21)
    counts, edges = np.histogram(vals, bins=bins)
    return {float(edges[k]): int(counts[k]) for k in range(len(counts))}


def _attr_summary(attr: AttributeVector) -> str:
    v = attr.values
    if attr.family == "binomial":
        ones = int(v.sum())
        return (f"binomial 1s={ones}, 0s={len(v) - ones}, "
                f"P(1)={ones / len(v):.3f}")
    if attr.family == "poisson":
        return f"poisson mean={v.mean():.3f}, max={int(v.max())}"
    return (f"normal mean={v.mean():.3f}, sd={v.std(ddof=1):.3f}, "
            f"scale= {attr.scale:.3f}")


def describe(data: PopulationData) -> str:
    """Plain-text data summary (unit/edge counts and attribute summaries)."""
    z = data.z
    z_state = "TRUE" if z.fixed else ("ALOCAL" if z.fixed_alocal_only else "FALSE")
    lines = [
        "population data",
        f"  {'units':<28}: {data.n}",
        f"  {'directed':<28}: {'TRUE' if z.directed else 'FALSE'}",
        f"  {f'edges (fixed = {z_state})':<28}: {z.n_edges}",
        f"  {'neighborhood edges':<28}: {data.nb.n_neighbor_links}",
        "",
        "Attribute summaries",
        f"  {f'x_attribute (fixed = {str(data.x.fixed).upper()})':<28}: "
        f"{_attr_summary(data.x)}",
        f"  {'y_attribute':<28}: {_attr_summary(data.y)}",
    ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# CSV ingestion / emission.  Unit ids in files are arbitrary strings; dense
# 0-based ids are assigned in order of first appearance in the attribute file.
# ---------------------------------------------------------------------------

RESERVED_COLUMNS = ("unit_id", "x", "y")


def read_attributes_csv(path):
    """Read (labels, x, y, unit-level covariates) from an attribute file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(RESERVED_COLUMNS) <= set(reader.fieldnames):
            raise DataError(
                f"{path}: header must contain columns {', '.join(RESERVED_COLUMNS)}"
            )
        cov_names = [c for c in reader.fieldnames if c not in RESERVED_COLUMNS]
        labels, xs, ys = [], [], []
        seen = set()
        covs = {c: [] for c in cov_names}
        for row in reader:
            label = row["unit_id"]
            if label in seen:
                raise DataError(f"{path}: duplicate unit_id {label!r}")
            seen.add(label)
            labels.append(label)
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
            for c in cov_names:
                covs[c].append(float(row[c]))
    covariates = {c: np.asarray(v, dtype=float) for c, v in covs.items()}
    return labels, np.asarray(xs), np.asarray(ys), covariates


def read_edge_csv(path, label_to_id):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"src", "dst"} <= set(reader.fieldnames):
            raise DataError(f"{path}: header must contain columns src, dst")
        pairs = []
        for row in reader:
            try:
                pairs.append((label_to_id[row["src"]], label_to_id[row["dst"]]))
            except KeyError as exc:
                raise UnitRangeError(
                    f"{path}: edge ({row['src']},{row['dst']}) references "
                    f"unknown unit {exc.args[0]!r}"
                ) from None
    return pairs


def load_population_csv(attrs_path, edges_path, neighborhoods_path=None,
                        directed=True, type_x="binomial", type_y="binomial",
                        **flags) -> PopulationData:
    labels, xs, ys, covs = read_attributes_csv(attrs_path)
    label_to_id = {lab: i for i, lab in enumerate(labels)}
    edges = read_edge_csv(edges_path, label_to_id)
    nb_pairs = None
    if neighborhoods_path is not None:
        nb_pairs = read_edge_csv(neighborhoods_path, label_to_id)
    return build_population(xs, ys, edges, n=len(labels), directed=directed,
                            type_x=type_x, type_y=type_y,
                            neighbor_pairs=nb_pairs, covariates=covs,
                            unit_labels=labels, **flags)


def write_population_csv(data: PopulationData, attrs_path, edges_path,
                         neighborhoods_path=None):
    with open(attrs_path, "w", newline="", encoding="utf-8") as fh:
        cov_names = [c for c in sorted(data.covariates)
                     if data.covariates[c].ndim == 1]
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "x", "y", *cov_names])
        for i in range(data.n):
            row = [data.unit_labels[i], _fmt_num(data.x.values[i]),
                   _fmt_num(data.y.values[i])]
            row += [_fmt_num(data.covariates[c][i]) for c in cov_names]
            writer.writerow(row)
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for i, j in data.z.edge_list():
            writer.writerow([data.unit_labels[i], data.unit_labels[j]])
    if neighborhoods_path is not None and not data.nb.full:
        with open(neighborhoods_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["src", "dst"])
            for i in range(data.n):
                for j in sorted(data.nb.sets[i]):
                    if i < j:
                        writer.writerow([data.unit_labels[i], data.unit_labels[j]])


def _fmt_num(v):
    return int(v) if float(v) == int(v) else repr(float(v))
