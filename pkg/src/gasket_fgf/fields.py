"""Discrete fractional Gaussian fields: sampling, pairings and ensemble statistics.

A field ``X_s^m`` is the series ``sum_i lambda_i^-s Phi_i W_i`` over the
level-``m`` eigenpairs, so its covariance is exactly ``G_{2s}^m`` and
``X(Phi_i) = lambda_i^-s W_i``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import rng
from .constants import CRITICAL_S
from .gasket import IndexMismatchError, VoronoiCells, build_graph, restrict, vertex_count
from .spectral import (
    BoundaryProjectionWarning,
    SpectralDecomposition,
    apply_fractional,
    riesz_kernel,
)

DYADIC_TOLERANCE = 0.10


class InsufficientPairsError(ValueError):
    """A distance bin has no vertex pairs."""


class EmptyCellError(ValueError):
    """A Voronoi cell received no quadrature node."""


@dataclass(frozen=True, eq=False)
class FieldSample:
    level: int
    s: float
    seed: int
    values: np.ndarray  # on V_m, zero on V_0
    stream: int = 0

    @property
    def a_m(self) -> float:
        return float(build_graph(self.level).a_m)

    @property
    def log_correlated(self) -> bool:
        return abs(self.s - CRITICAL_S) < 1e-12


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A function on ``K`` given by its values on the reference grid ``V_M``."""

    __test__ = False  # not a pytest class

    level: int
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != vertex_count(self.level):
            raise IndexMismatchError(
                f"expected {vertex_count(self.level)} values on V_{self.level}, got {len(self.values)}"
            )
        g = build_graph(self.level, cap=max(self.level, 12))
        if np.any(self.values[g.boundary] != 0):
            warnings.warn(
                "test function projected to vanish on V_0", BoundaryProjectionWarning, stacklevel=2
            )
            vals = np.array(self.values, dtype=float)
            vals[g.boundary] = 0.0
            object.__setattr__(self, "values", vals)

    @property
    def vanishes_on_boundary(self) -> bool:
        g = build_graph(self.level, cap=max(self.level, 12))
        return bool(np.all(self.values[g.boundary] == 0))

    def restrict(self, m: int) -> np.ndarray:
        return restrict(self.values, self.level, m)

    @classmethod
    def from_eigenfunctions(cls, spec: SpectralDecomposition, coeffs: dict[int, float]) -> "TestFunction":
        """Finite combination ``sum_j c_j Phi_j`` at the spectrum's level (0-based ``j``)."""
        vals = np.zeros(spec.graph.n_vertices)
        for j, c in coeffs.items():
            vals += c * spec.eigenfunction(j)
        return cls(spec.level, vals)


@dataclass(frozen=True)
class CovarianceReport:
    level: int
    s: float
    n: int
    max_abs_deviation: float
    max_se_deviation: float

    def to_dict(self) -> dict:
        return asdict(self)


def field_from_noise(spec: SpectralDecomposition, s: float, noise: np.ndarray) -> np.ndarray:
    """``sum_i lambda_i^-s Phi_i W_i`` on all of ``V_m``; ``noise`` may have sample columns."""
    noise = np.asarray(noise, dtype=float)
    w = (spec.eigenvalues ** (-s)).reshape((-1,) + (1,) * (noise.ndim - 1))
    return spec.synthesize(w * noise)


def sample_dfgf(spec: SpectralDecomposition, s: float, seed: int, stream: int = 0) -> FieldSample:
    if s < 0:
        raise ValueError("s must be nonnegative")
    noise = rng.standard_normals(seed, spec.level, spec.n, stream)
    return FieldSample(spec.level, float(s), int(seed), field_from_noise(spec, s, noise), stream)


def sample_ensemble(spec: SpectralDecomposition, s: float, n: int, seed: int) -> np.ndarray:
    """Values of ``n`` independent fields as columns, shape (#V_m, n).

    Column ``k`` is ``sample_dfgf(spec, s, seed, stream=k).values`` up to
    rounding (matrix and vector products may sum in different orders).
    """
    noise = rng.normal_matrix(seed, spec.level, spec.n, range(n))
    return field_from_noise(spec, s, noise)


def _check_length(level: int, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != vertex_count(level):
        raise IndexMismatchError(f"expected {vertex_count(level)} values on V_{level}, got {f.shape[0]}")
    return f


def pair(field: FieldSample | np.ndarray, f: np.ndarray, level: int | None = None) -> float | np.ndarray:
    """Discrete pairing ``X(f) = (1/a_m) sum_p f(p) X(p)``.

    ``field`` may also be a raw (#V_m,) or (#V_m, n) array, in which case
    ``level`` is required.  ``f`` may hold several test functions as columns;
    the result then has one row per function and one column per sample.
    """
    if isinstance(field, FieldSample):
        level, values = field.level, field.values
    else:
        if level is None:
            raise ValueError("level is required for raw field arrays")
        values = np.asarray(field, dtype=float)
    f = _check_length(level, f)
    _check_length(level, values)
    out = np.tensordot(f, values, axes=(0, 0)) / float(build_graph(level).a_m)
    return float(out) if np.ndim(out) == 0 else out


def cell_averages(f: TestFunction, cells: VoronoiCells) -> np.ndarray:
    """``f_bar_m(p)``: mean of ``f`` over the quadrature nodes of ``C_p^m``."""
    if cells.reference_level > f.level:
        raise ValueError("cells are finer than the test function's grid")
    if (cells.counts == 0).any():
        raise EmptyCellError("empty Voronoi cell")
    values = f.values if cells.reference_level == f.level else f.restrict(cells.reference_level)
    return cells.cell_average(values)


def lift_pair(field: FieldSample, f: TestFunction, cells: VoronoiCells) -> float:
    """Lifted pairing ``X(f_bar_m)`` against Voronoi cell averages."""
    if cells.level != field.level:
        raise ValueError("cells and field live on different levels")
    return pair(field, cell_averages(f, cells))


def covariance_functional(spec: SpectralDecomposition, s: float, f: np.ndarray, g: np.ndarray) -> float:
    """Exact ``E[X_s(f) X_s(g)] = <(-Delta_m)^-s f, (-Delta_m)^-s g>_{mu_m}``."""
    uf = apply_fractional(spec, s, f)
    ug = apply_fractional(spec, s, g)
    return float(uf @ ug / spec.a_m)


def covariance_double_sum(spec: SpectralDecomposition, s: float, f: np.ndarray, g: np.ndarray) -> float:
    """Same covariance via ``(1/a_m^2) sum_{p,q} f(p) g(q) G_{2s}(p, q)``."""
    I = spec.graph.interior
    G = riesz_kernel(spec, 2 * s)
    return float(np.asarray(f)[I] @ G @ np.asarray(g)[I] / spec.a_m**2)


def empirical_covariance(
    spec: SpectralDecomposition, s: float, n: int, seed: int, fields: np.ndarray | None = None
) -> tuple[CovarianceReport, np.ndarray, np.ndarray]:
    """Compare the uncentered sample covariance on interior vertices with ``G_{2s}``.

    Standard errors use ``Var(X_p X_q) = G_pp G_qq + G_pq^2`` for centered
    Gaussians.  Returns the report, the empirical matrix and the SE matrix.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    if fields is None:
        fields = sample_ensemble(spec, s, n, seed)
    X = fields[spec.graph.interior]
    emp = X @ X.T / n
    G = riesz_kernel(spec, 2 * s)
    dg = np.diag(G)
    se = np.sqrt((np.outer(dg, dg) + G**2) / n)
    dev = np.abs(emp - G)
    report = CovarianceReport(spec.level, float(s), int(n), float(dev.max()), float((dev / se).max()))
    return report, emp, se


def sobolev_norm(field: FieldSample | np.ndarray, spec: SpectralDecomposition, alpha: float) -> float:
    """``sum_j lambda_j^-alpha X(Phi_j)^2`` over the available spectrum.

    ``field`` may be a sample or any function on ``V_m`` treated as a
    deterministic distribution.
    """
    values = field.values if isinstance(field, FieldSample) else np.asarray(field, dtype=float)
    coeffs = pair(values, spec.eigenfunctions(), level=spec.level)
    return float(np.sum(spec.eigenvalues ** (-alpha) * coeffs**2))


@lru_cache(maxsize=8)
def dyadic_pair_bins(m: int, tolerance: float = DYADIC_TOLERANCE) -> tuple[tuple[float, np.ndarray, np.ndarray], ...]:
    """Interior vertex pairs ``i < j`` with ``d in [(1-tol) r, (1+tol) r]`` for ``r = 2**-k``, ``k = 1..m``.

    Indices refer to interior positions (rows of the spectral vectors).
    """
    g = build_graph(m)
    lat = g.lattice[g.interior]
    iu, ju = np.triu_indices(len(lat), 1)
    d = lat[iu] - lat[ju]
    d2 = d[:, 0] ** 2 + d[:, 0] * d[:, 1] + d[:, 1] ** 2  # units of 4**-m
    out = []
    for k in range(1, m + 1):
        r2 = float(4 ** (m - k))
        sel = (d2 >= (1 - tolerance) ** 2 * r2) & (d2 <= (1 + tolerance) ** 2 * r2)
        i, j = iu[sel], ju[sel]
        i.setflags(write=False)
        j.setflags(write=False)
        out.append((2.0**-k, i, j))
    return tuple(out)


def structure_function(
    spec: SpectralDecomposition,
    s: float,
    n: int,
    seed: int = 0,
    statistic: str = "mean",
    fields: np.ndarray | None = None,
) -> np.ndarray:
    """Squared field increments binned at dyadic distances, rows ``(r, S(r))``.

    ``statistic="mean"`` averages ``(X(x) - X(y))^2`` over samples and pairs.
    ``statistic="envelope"`` averages over samples and takes the largest pair
    in each bin, an estimate of ``sup rho_s(x, y)^2`` at that distance.
    """
    if s <= CRITICAL_S:
        raise ValueError(f"pointwise increments need s > {CRITICAL_S:.6f}")
    if n < 100:
        raise ValueError("structure function needs at least 100 samples")
    if statistic not in ("mean", "envelope"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if fields is None:
        fields = sample_ensemble(spec, s, n, seed)
    X = fields[spec.graph.interior]
    rows = []
    for r, i, j in dyadic_pair_bins(spec.level):
        if len(i) == 0:
            raise InsufficientPairsError(f"no vertex pairs at distance {r}")
        per_pair = np.empty(len(i))
        for lo in range(0, len(i), 4096):
            sl = slice(lo, lo + 4096)
            per_pair[sl] = np.mean((X[i[sl]] - X[j[sl]]) ** 2, axis=1)
        rows.append((r, per_pair.mean() if statistic == "mean" else per_pair.max()))
    return np.array(rows)
