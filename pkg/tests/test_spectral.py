import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gasket_fgf.gasket import ResourceLimitError, build_graph
from gasket_fgf.spectral import (
    BoundaryProjectionWarning,
    BoundaryViolationError,
    DegenerateLevelError,
    apply_fractional,
    assemble_dirichlet_laplacian,
    decimation_diagnostic,
    dirichlet_energy,
    eigendecompose,
    heat_apply,
    inner,
    laplacian_apply,
    riesz_kernel,
    spectrum,
)


def random_interior(m, rng, k=None):
    g = build_graph(m)
    shape = (g.n_vertices,) if k is None else (g.n_vertices, k)
    f = rng.standard_normal(shape)
    f[g.boundary] = 0.0
    return f


def test_m1_matrix():
    L = assemble_dirichlet_laplacian(build_graph(1)).matrix
    assert np.array_equal(L, np.array([[20, -5, -5], [-5, 20, -5], [-5, -5, 20]], dtype=float))
    assert np.array_equal(L @ np.ones(3), np.full(3, 10.0))


@pytest.mark.parametrize("m", range(1, 6))
def test_matrix_structure(m):
    L = assemble_dirichlet_laplacian(build_graph(m)).matrix
    assert np.array_equal(L, L.T)
    assert np.all(np.diag(L) == 4 * 5.0**m)
    off = L[~np.eye(len(L), dtype=bool)]
    assert set(np.unique(off)) <= {0.0, -(5.0**m)}


def test_degenerate_level():
    with pytest.raises(DegenerateLevelError):
        assemble_dirichlet_laplacian(build_graph(0))


def test_m1_oracle():
    sp = spectrum(1)
    assert np.allclose(sp.eigenvalues, [10, 25, 25], atol=1e-9)
    assert np.allclose(sp.vectors[:, 0], math.sqrt(1.5), atol=1e-10)


@pytest.mark.parametrize("m", range(1, 6))
def test_decomposition_invariants(m):
    sp = spectrum(m)
    L = assemble_dirichlet_laplacian(sp.graph).matrix
    assert sp.n == build_graph(m).n_interior
    assert np.all(np.diff(sp.eigenvalues) >= 0) and sp.eigenvalues[0] > 0
    gram = sp.vectors.T @ sp.vectors / sp.a_m
    assert np.abs(gram - np.eye(sp.n)).max() < 1e-10
    res = np.linalg.norm(L @ sp.vectors - sp.vectors * sp.eigenvalues, axis=0)
    assert (res / (sp.eigenvalues * np.linalg.norm(sp.vectors, axis=0))).max() < 1e-9
    assert sp.eigenvalues.sum() == pytest.approx(4 * 5.0**m * sp.n, rel=1e-10)
    first = np.argmax(np.abs(sp.vectors) > 1e-12 * np.abs(sp.vectors).max(axis=0), axis=0)
    assert np.all(sp.vectors[first, np.arange(sp.n)] > 0)


def test_lambda1_positive_and_increasing_to_limit():
    lam = np.array([spectrum(m).eigenvalues[0] for m in range(1, 7)])
    assert np.all(lam > 0)
    assert np.all(np.diff(lam) > 0)


def test_cap():
    with pytest.raises(ResourceLimitError):
        spectrum(8)


def test_kernel_examples():
    sp = spectrum(1)
    assert np.allclose(riesz_kernel(sp, 0), 4.5 * np.eye(3), atol=1e-12)
    G = riesz_kernel(sp, 0.5)
    expected = sum(lam**-0.5 * sp.vectors[0, i] ** 2 for i, lam in enumerate([10.0, 25.0, 25.0]))
    assert G[0, 0] == pytest.approx(expected, rel=1e-12)
    # hand value: with Phi_1 = sqrt(1.5)(1,1,1), the other two eigenvectors carry
    # sum_i Phi_i(p)^2 = a_1 = 4.5, so their share at p is 3
    assert G[0, 0] == pytest.approx(1.5 / math.sqrt(10) + 3 / 5, rel=1e-12)
    with pytest.raises(ValueError):
        riesz_kernel(sp, -1)


@pytest.mark.parametrize("m,s", [(2, 0.3), (3, 0.7), (4, 1.5)])
def test_kernel_psd(m, s):
    G = riesz_kernel(spectrum(m), s)
    assert np.array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-10 * np.abs(G).max()


@pytest.mark.parametrize("m", range(1, 5))
def test_s0_kernel_is_scaled_identity(m):
    sp = spectrum(m)
    assert np.abs(riesz_kernel(sp, 0) - sp.a_m * np.eye(sp.n)).max() < 1e-8


@pytest.mark.parametrize("m", [2, 4, 5])
def test_kernel_power_consistency(m):
    rng = np.random.default_rng(m)
    sp = spectrum(m)
    F = random_interior(m, rng, 5)
    I = sp.graph.interior
    for s in (0.2, 0.5, 1.0):
        G = riesz_kernel(sp, 2 * s)
        direct = G @ F[I] / sp.a_m
        assert np.abs(direct - apply_fractional(sp, 2 * s, F)[I]).max() < 1e-9


def test_apply_fractional_examples(no_projection_warning):
    sp = spectrum(3)
    phi = sp.eigenfunction(0)
    assert np.allclose(apply_fractional(sp, 0.7, phi), sp.eigenvalues[0] ** -0.7 * phi, atol=1e-12)
    f = random_interior(3, np.random.default_rng(1))
    assert np.allclose(apply_fractional(sp, 0, f), f, atol=1e-12)
    assert np.abs(apply_fractional(sp, -0.4, apply_fractional(sp, 0.4, f)) - f).max() < 1e-9
    # negative power one is the Laplacian itself
    assert np.allclose(apply_fractional(sp, -1, f), -laplacian_apply(sp.graph, f), rtol=1e-9, atol=1e-7)


def test_boundary_projection_warns():
    sp = spectrum(2)
    f = np.ones(sp.graph.n_vertices)
    with pytest.warns(BoundaryProjectionWarning):
        out = apply_fractional(sp, 0.5, f)
    assert not out[sp.graph.boundary].any()


def test_heat_examples(no_projection_warning):
    sp = spectrum(3)
    phi = sp.eigenfunction(0)
    t = 0.013
    assert np.allclose(heat_apply(sp, t, phi), math.exp(-sp.eigenvalues[0] * t) * phi, atol=1e-12)
    f = random_interior(3, np.random.default_rng(2))
    assert np.linalg.norm(heat_apply(sp, 1e-6, f) - f) < 1e-2 * np.linalg.norm(f)
    assert np.abs(heat_apply(sp, 0.01, heat_apply(sp, 0.02, f)) - heat_apply(sp, 0.03, f)).max() < 1e-9
    val = inner(sp.graph, f, heat_apply(sp, t, f))
    assert val <= math.exp(-sp.eigenvalues[0] * t) * inner(sp.graph, f, f)
    with pytest.raises(ValueError):
        heat_apply(sp, 0, f)


def test_dirichlet_energy_examples():
    sp = spectrum(3)
    g = sp.graph
    phi = sp.eigenfunction(0)
    assert dirichlet_energy(g, phi, phi) == pytest.approx(sp.eigenvalues[0], rel=1e-10)
    z = np.zeros(g.n_vertices)
    assert dirichlet_energy(g, z, z) == 0.0
    g1 = build_graph(1)
    e = np.zeros(6)
    e[g1.interior[0]] = 1.0
    assert dirichlet_energy(g1, e, e) == pytest.approx(20 / 4.5, rel=1e-14)
    with pytest.raises(BoundaryViolationError):
        dirichlet_energy(g1, np.ones(6), e)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_energy_symmetric_and_matches_operator(m, seed):
    rng = np.random.default_rng(seed)
    sp = spectrum(m)
    f, h = random_interior(m, rng), random_interior(m, rng)
    efh = dirichlet_energy(sp.graph, f, h)
    assert efh == pytest.approx(dirichlet_energy(sp.graph, h, f), rel=1e-10, abs=1e-8)
    assert efh == pytest.approx(inner(sp.graph, apply_fractional(sp, -1, f), h), rel=1e-8, abs=1e-6)


def test_decimation_diagnostic_is_soft():
    frac = decimation_diagnostic(spectrum(4), spectrum(3))
    assert 0.3 < frac <= 1.0


def test_eigendecompose_is_deterministic():
    op = assemble_dirichlet_laplacian(build_graph(3))
    a, b = eigendecompose(op), eigendecompose(op)
    assert np.array_equal(a.vectors, b.vectors) and np.array_equal(a.eigenvalues, b.eigenvalues)
