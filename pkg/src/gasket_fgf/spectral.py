"""Dirichlet Laplacians on ``G_m`` and functional calculus through their spectra.

Eigenvalues keep the ``5**m`` scaling of the renormalized graph Laplacian and
eigenvectors are orthonormal in ``L^2(V_m, mu_m)``, i.e. a Euclidean unit
vector multiplied by ``sqrt(a_m)``.  Functions on ``V_m`` are full-length
arrays (boundary included); spectral operators return zero on ``V_0``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .gasket import GasketGraph, IndexMismatchError, build_graph

log = logging.getLogger(__name__)

SPECTRAL_LEVEL_CAP = 7
NORMALIZATION = "L2(mu_m): (1/a_m) sum_p phi_i(p) phi_j(p) = delta_ij"
SIGN_RULE = "first nonzero entry (canonical vertex order) positive"


class DegenerateLevelError(ValueError):
    """Level 0 has no interior vertices."""


class EigensolverError(RuntimeError):
    """Eigendecomposition residual or orthonormality check failed."""


class BoundaryViolationError(ValueError):
    """Input does not vanish on ``V_0``."""


class BoundaryProjectionWarning(UserWarning):
    """Nonzero boundary values were discarded."""


@dataclass(frozen=True, eq=False)
class DirichletOperator:
    graph: GasketGraph
    matrix: np.ndarray  # (N_m, N_m) matrix of -Delta_m on interior vertices

    @property
    def level(self) -> int:
        return self.graph.level

    @property
    def interior(self) -> np.ndarray:
        return self.graph.interior


def assemble_dirichlet_laplacian(graph: GasketGraph) -> DirichletOperator:
    """Dense matrix of ``-Delta_m`` with the boundary pinned to zero."""
    m = graph.level
    if graph.n_interior == 0:
        raise DegenerateLevelError(f"level {m} has no interior vertices")
    interior = graph.interior
    pos = np.full(graph.n_vertices, -1)
    pos[interior] = np.arange(len(interior))
    scale = 5.0**m
    L = np.diag(np.full(len(interior), 4.0 * scale))
    i, j = pos[graph.edges[:, 0]], pos[graph.edges[:, 1]]
    keep = (i >= 0) & (j >= 0)
    L[i[keep], j[keep]] = -scale
    L[j[keep], i[keep]] = -scale
    L.setflags(write=False)
    return DirichletOperator(graph, L)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    graph: GasketGraph
    eigenvalues: np.ndarray  # (N_m,) ascending
    vectors: np.ndarray  # (N_m, N_m) columns on interior vertices, L2(mu_m) normalized

    @property
    def level(self) -> int:
        return self.graph.level

    @property
    def a_m(self) -> float:
        return float(self.graph.a_m)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def eigenfunction(self, i: int) -> np.ndarray:
        """``Phi_{i+1}`` on all of ``V_m`` (zero on the boundary); ``i`` is 0-based."""
        out = np.zeros(self.graph.n_vertices)
        out[self.graph.interior] = self.vectors[:, i]
        return out

    def eigenfunctions(self) -> np.ndarray:
        """All eigenfunctions as columns of a (#V_m, N_m) array."""
        out = np.zeros((self.graph.n_vertices, self.n))
        out[self.graph.interior] = self.vectors
        return out

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """``<f, Phi_i>_{mu_m}`` for a function on ``V_m`` (or columns of one)."""
        f = _interior_values(self.graph, f)
        return self.vectors.T @ f / self.a_m

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`coefficients`, returned on all of ``V_m``."""
        coeffs = np.asarray(coeffs, dtype=float)
        out = np.zeros((self.graph.n_vertices,) + coeffs.shape[1:])
        out[self.graph.interior] = self.vectors @ coeffs
        return out

    def counting_function(self, t: np.ndarray) -> np.ndarray:
        """Number of eigenvalues ``<= t``."""
        return np.searchsorted(self.eigenvalues, np.asarray(t, dtype=float), side="right")


def eigendecompose(
    op: DirichletOperator, residual_tol: float = 1e-9, ortho_tol: float = 1e-10
) -> SpectralDecomposition:
    """Full spectrum of ``-Delta_m`` via a dense symmetric solver."""
    L = op.matrix
    a_m = float(op.graph.a_m)
    lam, v = scipy.linalg.eigh(L)
    # sign rule: first entry of magnitude above noise is positive
    mag = np.abs(v)
    first = np.argmax(mag > 1e-12 * mag.max(axis=0), axis=0)
    signs = np.sign(v[first, np.arange(v.shape[1])])
    v = v * signs * np.sqrt(a_m)

    residual = np.linalg.norm(L @ v - v * lam, axis=0) / (
        np.abs(lam) * np.linalg.norm(v, axis=0)
    )
    worst = float(residual.max())
    if worst > residual_tol:
        raise EigensolverError(f"relative eigen-residual {worst:.3e} exceeds {residual_tol}")
    gram = v.T @ v / a_m
    ortho = float(np.abs(gram - np.eye(len(lam))).max())
    if ortho > ortho_tol:
        raise EigensolverError(f"orthonormality defect {ortho:.3e} exceeds {ortho_tol}")
    if lam[0] <= 0:
        raise EigensolverError(f"non-positive smallest eigenvalue {lam[0]}")
    lam.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(op.graph, lam, v)


def spectrum(m: int, cap: int = SPECTRAL_LEVEL_CAP) -> SpectralDecomposition:
    """Cached decomposition at level ``m``."""
    if m > cap:
        from .gasket import ResourceLimitError

        raise ResourceLimitError(f"spectral level {m} exceeds cap {cap}")
    return _spectrum(m)


@lru_cache(maxsize=8)
def _spectrum(m: int) -> SpectralDecomposition:
    log.debug("eigendecomposing level %d", m)
    return eigendecompose(assemble_dirichlet_laplacian(build_graph(m)))


def riesz_kernel(spec: SpectralDecomposition, s: float) -> np.ndarray:
    """``G_s^m(x, y) = sum_i lambda_i^-s Phi_i(x) Phi_i(y)`` on interior vertices."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    w = spec.eigenvalues ** (-s)
    G = (spec.vectors * w) @ spec.vectors.T
    return 0.5 * (G + G.T)


def _interior_values(graph: GasketGraph, f: np.ndarray, strict: bool = False) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != graph.n_vertices:
        raise IndexMismatchError(
            f"expected {graph.n_vertices} values on V_{graph.level}, got {f.shape[0]}"
        )
    if np.any(f[graph.boundary] != 0):
        if strict:
            raise BoundaryViolationError("function does not vanish on V_0")
        warnings.warn(
            "nonzero boundary values projected to zero", BoundaryProjectionWarning, stacklevel=3
        )
    return f[graph.interior]


def spectral_apply(spec: SpectralDecomposition, weights: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``sum_i weights_i <f, Phi_i> Phi_i``."""
    c = spec.coefficients(f)
    w = np.asarray(weights).reshape((-1,) + (1,) * (c.ndim - 1))
    return spec.synthesize(w * c)


def apply_fractional(spec: SpectralDecomposition, s: float, f: np.ndarray) -> np.ndarray:
    """``(-Delta_m)^{-s} f``; negative ``s`` gives positive powers."""
    return spectral_apply(spec, spec.eigenvalues ** (-s), f)


def heat_apply(spec: SpectralDecomposition, t: float, f: np.ndarray) -> np.ndarray:
    """``P_t^m f = sum_i exp(-lambda_i t) <f, Phi_i> Phi_i``."""
    if t <= 0:
        raise ValueError("t must be positive")
    return spectral_apply(spec, np.exp(-spec.eigenvalues * t), f)


def laplacian_apply(graph: GasketGraph, f: np.ndarray) -> np.ndarray:
    """``Delta_m f`` at interior vertices (zero on ``V_0``), without any spectrum."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != graph.n_vertices:
        raise IndexMismatchError(f"expected {graph.n_vertices} values, got {f.shape[0]}")
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    out = np.zeros_like(f)
    np.add.at(out, i, f[j] - f[i])
    np.add.at(out, j, f[i] - f[j])
    out *= 5.0**graph.level
    out[graph.boundary] = 0.0
    return out


def dirichlet_energy(graph: GasketGraph, f: np.ndarray, g: np.ndarray) -> float:
    """``E_m(f, g) = -(1/a_m) sum_{p interior} Delta_m f(p) g(p)``."""
    _interior_values(graph, f, strict=True)
    _interior_values(graph, g, strict=True)
    lap = laplacian_apply(graph, f)
    return float(-(lap @ np.asarray(g, dtype=float)) / float(graph.a_m))


def inner(graph: GasketGraph, f: np.ndarray, g: np.ndarray) -> float:
    """``<f, g>_{mu_m}``."""
    return float(np.dot(f, g) / float(graph.a_m))


def decimation_map(z: np.ndarray) -> np.ndarray:
    """``z (5 - z)``: maps level-(m+1) normalized eigenvalues onto level-m ones."""
    z = np.asarray(z, dtype=float)
    return z * (5.0 - z)


def decimation_diagnostic(fine: SpectralDecomposition, coarse: SpectralDecomposition,
                          tol: float = 1e-6) -> float:
    """Fraction of fine-level eigenvalues whose decimation image lies in the coarse spectrum.

    Uses unscaled combinatorial eigenvalues ``lambda / 5**m``.  Exceptional
    values (images 2, 5, 6 and their preimages) generally fall outside, so the
    fraction is below one; this is a soft diagnostic.
    """
    zf = fine.eigenvalues / 5.0**fine.level
    zc = coarse.eigenvalues / 5.0**coarse.level
    img = decimation_map(zf)
    dist = np.min(np.abs(img[:, None] - zc[None, :]), axis=1)
    return float(np.mean(dist < tol))
