import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gasket_fgf import lab
from gasket_fgf.constants import CONSTANTS, CRITICAL_S, HOLDER_GAP, SPECTRAL_RATIO
from gasket_fgf.fields import TestFunction
from gasket_fgf.gasket import build_graph, discrete_integral
from gasket_fgf.spectral import spectrum


def test_linear_fit_and_extrapolation():
    x = np.arange(5.0)
    fit = lab.linear_fit(x, 2 * x + 1)
    assert fit.exponent == pytest.approx(2) and fit.r2 == pytest.approx(1)
    geo = [1 - 0.5**k for k in range(6)]
    assert lab.extrapolate(geo) == pytest.approx(1.0, abs=1e-14)


def test_report_diffs_are_exact_differences():
    rep = lab.ConvergenceReport("x", {}, [1, 2, 3, 4], [1.0, 1.5, 1.7, 1.75])
    assert rep.diffs == list(np.diff(rep.observed))
    assert rep.cauchy()
    d = rep.to_dict()
    assert set(d) >= {"experiment", "params", "levels", "observed", "diffs", "fit", "predicted", "tolerance", "pass"}
    json.dumps(d)


def test_eigen_level_sweep():
    rep = lab.eigen_level_sweep(1, 6, 3)
    lam1 = np.array(rep.observed[0])
    assert np.all(lam1 > 0) and rep.passed
    d = np.abs(np.diff(lam1))
    assert np.all(d[1:] < d[:-1])
    assert rep.limit == pytest.approx(11.21, abs=0.01)
    with pytest.raises(lab.PreconditionError):
        lab.eigen_level_sweep(1, 4, 4)


def test_weyl_report_shape():
    rep = lab.weyl_check(spectrum(5))
    assert np.all(np.diff(rep.counts) >= 0)
    assert np.all(rep.ratios > 0)
    assert rep.t[0] == pytest.approx(2 * spectrum(5).eigenvalues[0])
    assert rep.min_ratio <= rep.ratios.min() and rep.max_ratio >= rep.ratios.max()
    with pytest.raises(lab.RegimeWindowError):
        lab.weyl_check(spectrum(3))


def test_regime_labels_depend_only_on_s():
    sp = spectrum(5)
    for s, label in [(0.1, "sub-critical"), (SPECTRAL_RATIO, "log"), (0.9, "bounded")]:
        assert lab.riesz_regime_fit(sp, s).regime == label == CONSTANTS.riesz_regime(s)
    with pytest.raises(lab.RegimeWindowError):
        lab.riesz_regime_fit(spectrum(3), 0.2)


def test_exact_fits_are_bit_reproducible():
    a = lab.riesz_regime_fit(spectrum(5), 0.3).to_dict()
    b = lab.riesz_regime_fit(spectrum(5), 0.3).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_semigroup_examples():
    f = lab.eigenfunction_surrogate(5)
    rep = lab.semigroup_convergence(f, 0.01, range(2, 6))
    assert rep.passed
    big = lab.semigroup_convergence(f, 1e3, range(2, 6))
    assert max(abs(v) for v in big.observed) < 1e-300
    with pytest.raises(lab.PreconditionError):
        lab.semigroup_convergence(f, 0.0, range(2, 4))


def test_quadform_s0_is_integral_of_square():
    f = lab.eigenfunction_surrogate(5)
    rep = lab.quadratic_form_convergence(f, 0.0, range(2, 6))
    expect = [discrete_integral(f.restrict(m) ** 2, m) for m in range(2, 6)]
    assert np.allclose(rep.observed, expect, rtol=1e-12)


def test_characteristic_functional():
    g = build_graph(4)
    zero = TestFunction(4, np.zeros(g.n_vertices))
    assert lab.characteristic_functional(zero, 0.5, 3) == 1.0
    f = lab.eigenfunction_surrogate(5, 3)
    for m in range(1, 6):
        assert 0 < lab.characteristic_functional(f, 0.2, m) <= 1


def test_sobolev_scan():
    rep = lab.sobolev_membership_scan(0.0, [0.3, 1.0], m=5, n=200, seed=1)
    assert rep.observed[0] > 0.3 and rep.observed[1] < 0.1
    assert max(rep.extra["total_z"]) < 5
    with pytest.raises(lab.PreconditionError):
        lab.sobolev_membership_scan(0.5, [1.0], m=4)


def test_supnorm_m1_value():
    rep = lab.eigenfunction_supnorm_check(spectrum(1))
    assert rep.observed[0] == pytest.approx(math.sqrt(1.5) / 10**CRITICAL_S, rel=1e-12)
    assert all(r > 0 for r in rep.observed)


def test_lipschitz_checks():
    sp = spectrum(5)
    with pytest.raises(lab.PreconditionError):
        lab.lipschitz_kernel_check(sp, 0.2)
    phi = sp.eigenfunction(0)[:, None]
    smooth = lab.lipschitz_kernel_check(sp, 0.5, functions=phi)
    assert np.isfinite(smooth.extra["quotients"]).all()
    exps = [lab.lipschitz_kernel_check(sp, s, 30, seed=2).fit.exponent for s in (0.4, 0.5, 0.6)]
    assert exps[0] < exps[1] < exps[2]


def test_holder_precondition():
    with pytest.raises(ValueError):
        lab.holder_exponent(spectrum(5), 0.3)
    with pytest.raises(lab.PreconditionError):
        lab.holder_exponent(spectrum(4), 1.0)


def test_log_fit_precondition_and_diagonal_growth():
    with pytest.raises(lab.PreconditionError):
        lab.log_correlation_fit(spectrum(4))
    rep = lab.log_diagonal_growth(range(2, 6))
    assert rep.passed


def test_surrogates_solve_their_equations():
    from gasket_fgf.spectral import laplacian_apply

    u = lab.torsion_function(5)
    g = build_graph(5)
    assert np.allclose(-laplacian_apply(g, u.values)[g.interior], 1.0)
    phi = lab.ground_state_surrogate(5)
    assert np.allclose(np.abs(phi.values), np.abs(spectrum(5).eigenfunction(0)), atol=1e-8)


def test_voronoi_decay_is_at_least_the_holder_rate():
    # the proven bound ||f_m - fbar_m|| <= C 2^{-(m+1)(d_w - d_h)}: its scaled
    # sequence must not grow, whatever the exact rate turns out to be
    rep = lab.voronoi_lifting_rate(lab.torsion_function(8), range(2, 5))
    assert rep.extra["bound_consistent"]
    assert rep.extra["rate"] >= HOLDER_GAP
    with pytest.raises(lab.PreconditionError):
        lab.voronoi_lifting_rate(lab.torsion_function(6), range(2, 4))


def test_heat_diagonal_qualitative():
    rep = lab.heat_diagonal_check(spectrum(5))
    assert rep.passed
    assert abs(rep.fit.exponent + SPECTRAL_RATIO) < 0.1


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=8))
def test_report_diffs_property(values):
    rep = lab.ConvergenceReport("p", {}, list(range(len(values))), values)
    assert rep.to_dict()["diffs"] == np.diff(values).tolist()


def test_log_correlation_empirical_slope_within_3_se():
    rep = lab.log_correlation_fit(spectrum(6), n=10_000, seed=0)
    assert rep.fit.r2 >= 0.9
    assert rep.extra["slope_z"] <= 3.0
    assert rep.passed
