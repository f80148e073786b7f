"""Pre-gasket graphs ``G_m``, their uniform measures and Voronoi quadrature.

Points are stored on the triangular lattice spanned by ``e1 = (1, 0)`` and
``e2 = (1/2, sqrt(3)/2)``.  A level-``m`` vertex has integer lattice
coordinates ``(a, b)`` and planar position ``(a e1 + b e2) / 2**m``, so vertex
identification across levels is integer equality and squared distances
``a**2 + a b + b**2`` are exact integers in units of ``4**-m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_LEVEL_CAP = 12
DEFAULT_QUADRATURE_OFFSET = 4

# lattice coordinates of p1, p2, p3
_CORNERS = np.array([[0, 0], [1, 0], [0, 1]], dtype=np.int64)
_SQRT3_2 = np.sqrt(3.0) / 2.0


class ResourceLimitError(ValueError):
    """Requested level exceeds the configured cap."""


class IndexMismatchError(ValueError):
    """Value array does not match the vertex count of its level."""


@dataclass(frozen=True, order=True)
class Address:
    """Vertex address ``f_{cell[0]} o ... o f_{cell[-1]} (p_corner)``.

    The level is the length of the cell word.  Digits and corner are in {1, 2, 3}.
    """

    cell: tuple[int, ...]
    corner: int

    def __post_init__(self):
        if any(d not in (1, 2, 3) for d in self.cell) or self.corner not in (1, 2, 3):
            raise ValueError(f"address digits must be in {{1,2,3}}: {self}")

    @property
    def level(self) -> int:
        return len(self.cell)

    def lattice(self) -> tuple[int, int]:
        """Integer lattice coordinates at this address's level."""
        m = self.level
        a, b = _CORNERS[self.corner - 1]
        for pos, d in enumerate(self.cell):
            ca, cb = _CORNERS[d - 1]
            a += ca << (m - 1 - pos)
            b += cb << (m - 1 - pos)
        return int(a), int(b)

    def __str__(self) -> str:
        return "".join(map(str, self.cell)) + ":" + str(self.corner)

    @classmethod
    def parse(cls, text: str) -> "Address":
        cell, corner = text.split(":")
        return cls(tuple(int(c) for c in cell), int(corner))


def vertex_count(m: int) -> int:
    return 3 * (3**m + 1) // 2


def edge_count(m: int) -> int:
    return 3 ** (m + 1)


def interior_count(m: int) -> int:
    return (3 ** (m + 1) - 3) // 2


def atom_scale(m: int) -> Fraction:
    """``a_m = 3**(m+1) / 2``; every vertex of ``V_m`` carries mass ``1/a_m``."""
    return Fraction(3 ** (m + 1), 2)


@dataclass(frozen=True, eq=False)
class GasketGraph:
    level: int
    lattice: np.ndarray  # (n, 2) int64, level-m lattice units
    codes: np.ndarray  # (n,) minimal address code, base 3, corner as last digit
    boundary: np.ndarray  # (n,) bool
    edges: np.ndarray  # (E, 2) int64, i < j
    _keys: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.lattice)

    @property
    def a_m(self) -> Fraction:
        return atom_scale(self.level)

    @property
    def n_interior(self) -> int:
        return int((~self.boundary).sum())

    @property
    def interior(self) -> np.ndarray:
        """Indices of vertices outside ``V_0``, ascending."""
        return np.flatnonzero(~self.boundary)

    @property
    def points(self) -> np.ndarray:
        """Planar float coordinates, shape (n, 2)."""
        a = self.lattice[:, 0].astype(float)
        b = self.lattice[:, 1].astype(float)
        scale = 2.0**-self.level
        return np.column_stack([(a + 0.5 * b) * scale, b * _SQRT3_2 * scale])

    def dyadic_coordinates(self) -> np.ndarray:
        """Columns ``x_num, x_den, y_num, y_den``; y is expressed in units of sqrt(3)."""
        den = 2 ** (self.level + 1)
        a, b = self.lattice[:, 0], self.lattice[:, 1]
        return np.column_stack([2 * a + b, np.full_like(a, den), b, np.full_like(a, den)])

    def address(self, i: int) -> Address:
        code = int(self.codes[i])
        corner = code % 3 + 1
        code //= 3
        cell = []
        for _ in range(self.level):
            cell.append(code % 3 + 1)
            code //= 3
        return Address(tuple(reversed(cell)), corner)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def index_of(self, lattice: np.ndarray) -> np.ndarray:
        """Vertex indices for level-m lattice coordinates; -1 where absent."""
        lattice = np.atleast_2d(np.asarray(lattice, dtype=np.int64))
        keys = _lattice_key(lattice, self.level)
        order = np.argsort(self._keys)
        pos = np.searchsorted(self._keys, keys, sorter=order)
        pos = np.clip(pos, 0, len(order) - 1)
        hit = order[pos]
        return np.where(self._keys[hit] == keys, hit, -1)

    def squared_distances(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """Exact squared distances in units of ``4**-m`` (int64)."""
        d = self.lattice[np.asarray(i)] - self.lattice[np.asarray(j)]
        return d[..., 0] ** 2 + d[..., 0] * d[..., 1] + d[..., 1] ** 2

    def distances(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return np.sqrt(self.squared_distances(i, j).astype(float)) * 2.0**-self.level

    def lift(self, target: int) -> np.ndarray:
        """Lattice coordinates of these vertices expressed at a deeper level."""
        if target < self.level:
            raise ValueError("target level must not be coarser")
        return self.lattice << (target - self.level)


def _lattice_key(lattice: np.ndarray, m: int) -> np.ndarray:
    return lattice[..., 0] * ((1 << m) + 1) + lattice[..., 1]


def build_graph(m: int, cap: int = DEFAULT_LEVEL_CAP) -> GasketGraph:
    """Build ``G_m`` with vertices in lexicographic order of minimal addresses."""
    if m < 0:
        raise ValueError(f"level must be nonnegative, got {m}")
    if m > cap:
        raise ResourceLimitError(
            f"level {m} exceeds cap {cap} ({vertex_count(m)} vertices)"
        )
    return _build_graph(m)


@lru_cache(maxsize=16)
def _build_graph(m: int) -> GasketGraph:
    n_cells = 3**m
    # cell words in lexicographic order; row index is the base-3 code
    digits = np.zeros((n_cells, m), dtype=np.int64)
    idx = np.arange(n_cells)
    for pos in range(m - 1, -1, -1):
        digits[:, pos] = idx % 3
        idx //= 3
    origin = np.zeros((n_cells, 2), dtype=np.int64)
    for pos in range(m):
        origin += _CORNERS[digits[:, pos]] << (m - 1 - pos)

    # every (cell, corner) pair, enumerated in ascending address code
    raw = (origin[:, None, :] + _CORNERS[None, :, :]).reshape(-1, 2)
    raw_keys = _lattice_key(raw, m)
    uniq, first = np.unique(raw_keys, return_index=True)
    order = np.argsort(first)
    keys = uniq[order]
    codes = first[order]  # first occurrence = minimal code
    lattice = raw[codes]

    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    corner_idx = rank[np.searchsorted(uniq, raw_keys)].reshape(n_cells, 3)
    pairs = np.concatenate(
        [corner_idx[:, [0, 1]], corner_idx[:, [0, 2]], corner_idx[:, [1, 2]]]
    )
    pairs.sort(axis=1)
    edges = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]

    side = 1 << m
    boundary = ((lattice[:, 0] == 0) & (lattice[:, 1] == 0)) | (
        (lattice[:, 0] == side) & (lattice[:, 1] == 0)
    ) | ((lattice[:, 0] == 0) & (lattice[:, 1] == side))

    for arr in (lattice, codes, boundary, edges, keys):
        arr.setflags(write=False)
    return GasketGraph(m, lattice, codes, boundary, edges, keys)


def nesting_indices(m: int, M: int) -> np.ndarray:
    """Index in ``V_M`` of each vertex of ``V_m`` (``V_m`` is a subset of ``V_M``)."""
    if m > M:
        raise ValueError(f"cannot nest level {m} into coarser level {M}")
    coarse, fine = build_graph(m, cap=max(M, DEFAULT_LEVEL_CAP)), build_graph(M, cap=max(M, DEFAULT_LEVEL_CAP))
    idx = fine.index_of(coarse.lift(M))
    assert (idx >= 0).all(), "nesting violated"
    return idx


def restrict(values: np.ndarray, M: int, m: int) -> np.ndarray:
    """Restrict a function on ``V_M`` to ``V_m`` (exact, no interpolation)."""
    values = np.asarray(values)
    if values.shape[0] != vertex_count(M):
        raise IndexMismatchError(
            f"expected {vertex_count(M)} values on V_{M}, got {values.shape[0]}"
        )
    return values[nesting_indices(m, M)]


def discrete_integral(values: np.ndarray, m: int) -> float:
    """Integral against ``mu_m``: ``(1/a_m) * sum_p values(p)``."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != vertex_count(m):
        raise IndexMismatchError(
            f"expected {vertex_count(m)} values on V_{m}, got {values.shape[0]}"
        )
    return float(values.sum(axis=0) / float(atom_scale(m)))


@dataclass(frozen=True)
class HausdorffQuadrature:
    """Uniform quadrature on ``V_M`` approximating the Hausdorff measure."""

    level: int

    @property
    def nodes(self) -> np.ndarray:
        return build_graph(self.level).points

    @property
    def weights(self) -> np.ndarray:
        return np.full(vertex_count(self.level), 1.0 / float(atom_scale(self.level)))

    @property
    def total_mass(self) -> Fraction:
        return vertex_count(self.level) / atom_scale(self.level)

    def integrate(self, values: np.ndarray) -> float:
        return discrete_integral(values, self.level)


@dataclass(frozen=True)
class VoronoiCells:
    """Assignment of ``V_M`` nodes to their nearest ``V_m`` vertex."""

    level: int
    reference_level: int
    assignment: np.ndarray  # (#V_M,) index into V_m
    counts: np.ndarray  # (#V_m,) nodes per cell

    @property
    def measures(self) -> np.ndarray:
        return self.counts / float(atom_scale(self.reference_level))

    def members(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == p)

    def cell_average(self, values: np.ndarray) -> np.ndarray:
        """Average of a function on ``V_M`` over each cell."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != vertex_count(self.reference_level):
            raise IndexMismatchError(
                f"expected {vertex_count(self.reference_level)} values, got {values.shape[0]}"
            )
        if (self.counts == 0).any():
            raise ValueError("empty Voronoi cell")
        sums = np.bincount(self.assignment, weights=values, minlength=len(self.counts))
        return sums / self.counts


def voronoi_quadrature(m: int, M: int | None = None) -> VoronoiCells:
    """Nearest-vertex partition of ``V_M`` into cells around ``V_m``.

    Ties go to the smaller ``V_m`` index.  ``M == m`` gives singleton cells.
    """
    if M is None:
        M = m + DEFAULT_QUADRATURE_OFFSET
    if M < m:
        raise ValueError(f"reference level M={M} must not be below m={m}")
    coarse, fine = build_graph(m, cap=max(M, DEFAULT_LEVEL_CAP)), build_graph(M, cap=max(M, DEFAULT_LEVEL_CAP))
    if M == m:
        assignment = np.arange(coarse.n_vertices)
    else:
        k = min(6, coarse.n_vertices)
        _, cand = cKDTree(coarse.points).query(fine.points, k=k)
        # exact tie-breaking on integer squared distances at level M
        diff = coarse.lift(M)[cand] - fine.lattice[:, None, :]
        d2 = diff[..., 0] ** 2 + diff[..., 0] * diff[..., 1] + diff[..., 1] ** 2
        best = _argmin_ties(d2, cand)
        assignment = cand[np.arange(len(cand)), best]
    counts = np.bincount(assignment, minlength=coarse.n_vertices)
    return VoronoiCells(m, M, assignment, counts)


def _argmin_ties(d2: np.ndarray, cand: np.ndarray) -> np.ndarray:
    # minimal distance first, then minimal vertex index
    key = d2 * (int(cand.max()) + 1) + cand
    return key.argmin(axis=1)
