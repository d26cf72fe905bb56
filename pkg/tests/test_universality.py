"""Tests for Jacobian averages, the universal Jacobian law, tip derivative
structure, chart nonlinearity asymptotics, and Lyapunov exponents.

Oracles here: the toy family has constant Jacobian b1*b2, so every averaged
or accumulated determinant is checked against that exact product; analytic
chart-derivative chains double as the reference for the finite-difference
matrices; the one-dimensional fixed point supplies sigma, v*, and the a(x)
profile. Quantitative bounds were measured once at the pinned parameters
and frozen with margin. Towers are built once per module.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from henonlab.cantor import tip as piece_route_tip
from henonlab.errors import (DomainError, SingularJacobian, TowerTooShallow,
                             UnderflowFrozen)
from henonlab.henon import (TOY_CASCADE_MU, degenerate_map, perturbed_toy_map,
                            renorm_tower, toy_affine_map)
from henonlab.unimodal import presentation_tower, solve_fixed_point, universal_a
from henonlab.universality import (JacobianFit, average_jacobian,
                                   birkhoff_jacobian, jac_power_law_check,
                                   jacobian_universality_fit,
                                   lyapunov_exponents,
                                   nonlinearity_asymptotics, tip_decomposition)

B1, B2 = 0.1, 0.001
ETA = 1e-5

# scale factor of the 1D doubling fixed point, pinned in test_unimodal
FROZEN_SIGMA = 0.39953528052314047


@pytest.fixture(scope="module")
def fixed_point_1d():
    return solve_fixed_point()


@pytest.fixture(scope="module")
def vstar(fixed_point_1d):
    return presentation_tower(fixed_point_1d).v


@pytest.fixture(scope="module")
def a_profile(vstar, fixed_point_1d):
    return universal_a(vstar, fixed_point_1d.map)


@pytest.fixture(scope="module")
def toy_tower():
    return renorm_tower(toy_affine_map(TOY_CASCADE_MU, B1, B2), 9)


@pytest.fixture(scope="module")
def pert_tower():
    return renorm_tower(perturbed_toy_map(TOY_CASCADE_MU, B1, B2, ETA), 6)


@pytest.fixture(scope="module")
def degenerate_tower(fixed_point_1d):
    return renorm_tower(degenerate_map(fixed_point_1d.map), 12)


@pytest.fixture(scope="module")
def toy_fit(toy_tower, a_profile):
    return jacobian_universality_fit(toy_tower, a_profile,
                                     levels=range(1, 7), b=B1 * B2)


@pytest.fixture(scope="module")
def toy_decomp(toy_tower):
    return tip_decomposition(toy_tower, 4)


@pytest.fixture(scope="module")
def pert_decomp(pert_tower):
    return tip_decomposition(pert_tower, 3)


@pytest.fixture(scope="module")
def toy_nonlin(toy_tower, vstar):
    return {n: nonlinearity_asymptotics(toy_tower, n, 0, v=vstar)
            for n in range(3, 7)}


@pytest.fixture(scope="module")
def degenerate_nonlin(degenerate_tower, vstar):
    return {n: nonlinearity_asymptotics(degenerate_tower, n, 0, v=vstar)
            for n in range(3, 9)}


def chart_chain(tower, n, w):
    """Image and derivative of the level-n composed chart at w."""
    p = np.asarray(w, dtype=float)
    M = np.eye(3)
    for k in reversed(range(n)):
        M = np.asarray(tower.steps[k].branch_derivative(*p)) @ M
        p = np.array(tower.steps[k].branch(*p))
    return p, M


def orbit_log_jacobian(F, p, steps):
    acc = 0.0
    for _ in range(steps):
        acc += math.log(abs(float(F.jacobian(*p))))
        p = F.apply(p)
    return acc


def probe_cloud(box, tips, n, count=5):
    """Points near the level-n tip, pushed off the box edge the tip sits on."""
    rng = np.random.default_rng(7)
    offs = (rng.uniform(-1.0, 1.0, (count, 3))
            * np.array([box.x.half, box.y.half, box.z.half]) * 0.2)
    offs[:, 0] = -np.abs(offs[:, 0])
    return tips[n] + offs


# -- average Jacobian ------------------------------------------------------------


def test_toy_average_jacobian_is_exact(toy_tower):
    F = toy_tower.maps[0]
    for n in (1, 3, 5):
        assert abs(average_jacobian(F, toy_tower, n) / (B1 * B2) - 1.0) < 1e-10


def test_perturbed_average_jacobian_converges(pert_tower):
    F = pert_tower.maps[0]
    bs = [average_jacobian(F, pert_tower, n) for n in range(1, 7)]
    gaps = np.abs(np.diff(bs))
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-15
    assert abs(bs[-1] - 9.9999963128e-05) < 1e-12


def test_degenerate_average_jacobian_rejected(degenerate_tower):
    with pytest.raises(SingularJacobian):
        average_jacobian(degenerate_tower.maps[0], degenerate_tower, 1)


@settings(deadline=None, max_examples=25)
@given(steps=st.integers(2, 64))
def test_toy_birkhoff_is_constant_for_any_orbit_length(toy_tower, toy_decomp,
                                                       steps):
    est = birkhoff_jacobian(toy_tower.maps[0], toy_decomp.tips[0], steps)
    assert abs(est / (B1 * B2) - 1.0) < 1e-12


# -- universal law of the Jacobian -----------------------------------------------


def test_toy_fit_residuals_shrink_geometrically(toy_fit):
    assert toy_fit.levels == (1, 2, 3, 4, 5, 6)
    assert toy_fit.excluded == ()
    E = toy_fit.residuals
    assert np.all(np.diff(E[:5]) < 0)
    assert 0.03 < E[0] < 0.05
    assert E[4] < 1e-3
    assert 0.3 < toy_fit.rho < 0.6


def test_fit_default_b_matches_level_average(toy_tower, a_profile, toy_fit):
    fit = jacobian_universality_fit(toy_tower, a_profile, levels=range(1, 5))
    assert abs(fit.b / (B1 * B2) - 1.0) < 1e-8
    assert np.allclose(fit.residuals, toy_fit.residuals[:4], rtol=1e-6)


def test_fit_excludes_underflowing_levels(toy_tower, a_profile):
    fit = jacobian_universality_fit(toy_tower, a_profile,
                                    levels=(4, 5, 6, 7), b=B1 * B2)
    assert fit.levels == (4, 5, 6)
    assert fit.excluded == (7,)


def test_fit_needs_three_resolved_levels(toy_tower, a_profile):
    with pytest.raises(UnderflowFrozen):
        jacobian_universality_fit(toy_tower, a_profile,
                                  levels=(6, 7, 8), b=B1 * B2)


def test_fit_rejects_degenerate_average(toy_tower, a_profile):
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(DomainError):
            jacobian_universality_fit(toy_tower, a_profile,
                                      levels=(1, 2, 3), b=bad)


def test_fit_beyond_tower_depth(toy_tower, a_profile):
    with pytest.raises(TowerTooShallow):
        jacobian_universality_fit(toy_tower, a_profile,
                                  levels=(8, 9, 10), b=B1 * B2)


def test_fit_report_serializes_to_plain_json(toy_fit):
    d = toy_fit.as_dict()
    assert set(d) == {"b", "rho", "levels", "E"}
    decoded = json.loads(json.dumps(d))
    assert decoded["levels"] == [1, 2, 3, 4, 5, 6]
    assert len(decoded["E"]) == 6


@settings(deadline=None, max_examples=6)
@given(subset=st.sets(st.integers(1, 5), min_size=3))
def test_fit_residuals_are_per_level_quantities(toy_tower, a_profile, toy_fit,
                                                subset):
    fit = jacobian_universality_fit(toy_tower, a_profile,
                                    levels=sorted(subset), b=B1 * B2)
    for lev, res in zip(fit.levels, fit.residuals):
        assert np.isclose(res, toy_fit.residuals[lev - 1], rtol=1e-12)


def test_chart_chain_rule_identity(toy_tower, toy_decomp, pert_tower,
                                   pert_decomp):
    # the composed chart conjugates level n to 2^n steps of level 0, so the
    # two routes to the orbit Jacobian must agree; perturbed levels past 2
    # are excluded because their z-deviation sits at the resolution floor
    # and the identity is a relative statement
    for tower, decomp, n_max in ((toy_tower, toy_decomp, 4),
                                 (pert_tower, pert_decomp, 2)):
        for n in range(1, n_max + 1):
            Fn = tower.maps[n]
            for w in probe_cloud(Fn.box, decomp.tips, n):
                fw = Fn.apply(w)
                psi_w, Mw = chart_chain(tower, n, w)
                _, Mfw = chart_chain(tower, n, fw)
                lhs = (math.log(abs(float(Fn.jacobian(*w))))
                       + math.log(abs(np.linalg.det(Mfw))))
                rhs = (orbit_log_jacobian(tower.maps[0], psi_w, 2 ** n)
                       + math.log(abs(np.linalg.det(Mw))))
                assert abs(math.expm1(lhs - rhs)) < 1e-7


def test_chart_jacobian_ratio_matches_universal_profile(toy_tower, toy_decomp,
                                                        toy_fit, a_profile):
    # det DPsi_n(w) / det DPsi_n(F_n w) equals Jac F_n(w) / b^(2^n) for the
    # toy, so the ratio must reproduce a(x) within the level-n residual
    for n in range(1, 5):
        Fn = toy_tower.maps[n]
        worst = 0.0
        for w in probe_cloud(Fn.box, toy_decomp.tips, n):
            _, Mw = chart_chain(toy_tower, n, w)
            _, Mfw = chart_chain(toy_tower, n, Fn.apply(w))
            ratio = abs(np.linalg.det(Mw)) / abs(np.linalg.det(Mfw))
            ax = float(a_profile(np.clip(Fn.box.x.to_unit(w[0]), -1.0, 1.0)))
            worst = max(worst, abs(ratio / ax - 1.0))
        assert worst <= toy_fit.residuals[n - 1]


# -- power law along pieces ------------------------------------------------------


def test_toy_power_law_is_exact(toy_tower):
    rep = jac_power_law_check(toy_tower.maps[0], toy_tower, 2, b=B1 * B2)
    assert rep.level == 2
    assert rep.ratios.shape == (4,)
    assert rep.worst < 1e-13
    assert rep.distortion < 1e-13


def test_perturbed_power_law_tightens_with_depth(pert_tower):
    F = pert_tower.maps[0]
    shallow = jac_power_law_check(F, pert_tower, 2)
    deep = jac_power_law_check(F, pert_tower, 4)
    assert shallow.worst < 2e-7
    assert deep.worst < shallow.worst
    assert deep.distortion < shallow.distortion
    assert deep.worst < 5e-8


def test_power_law_underflow_guard(toy_tower):
    with pytest.raises(UnderflowFrozen):
        jac_power_law_check(toy_tower.maps[0], toy_tower, 8, b=B1 * B2)


# -- tip derivative decomposition ------------------------------------------------


def test_toy_decomposition_diagonal_limits(toy_decomp):
    alpha_ratio = toy_decomp.alpha / FROZEN_SIGMA ** 2
    sigma_ratio = toy_decomp.sigma / -FROZEN_SIGMA
    assert np.all(np.abs(alpha_ratio[2:] - 1.0) < 0.006)
    assert np.all(np.abs(sigma_ratio[1:] - 1.0) < 0.03)
    assert np.all(np.abs(sigma_ratio[2:] - 1.0) < 0.01)


def test_toy_decomposition_shear_decays(toy_decomp):
    t = np.abs(toy_decomp.t)
    assert np.all(np.diff(t) < 0)
    assert t[3] < 1e-8
    assert np.max(np.abs(toy_decomp.u)) < 1e-12
    assert np.max(np.abs(toy_decomp.d)) < 1e-12


def test_decomposition_reassembles_measured_matrix(toy_decomp, pert_decomp):
    for decomp in (toy_decomp, pert_decomp):
        assert decomp.defect < 1e-9
        for i in range(len(decomp.levels)):
            assert np.max(np.abs(decomp.reassemble(i)
                                 - decomp.matrices[i])) < 1e-9


def test_decomposition_matches_analytic_chain(toy_tower, toy_decomp):
    for k in range(5):
        analytic = np.asarray(
            toy_tower.steps[k].branch_derivative(*toy_decomp.tips[k + 1]))
        assert np.max(np.abs(toy_decomp.matrices[k] - analytic)) < 1e-9


def test_perturbed_decomposition_coupling_entries(pert_decomp):
    assert 1e-6 < abs(pert_decomp.u[0]) < 1e-5
    assert 2e-6 < abs(pert_decomp.d[0]) < 2e-5
    off = np.max(np.abs(np.column_stack(
        [pert_decomp.t, pert_decomp.u, pert_decomp.d])), axis=1)
    assert np.all(np.diff(off) < 0)
    assert abs(pert_decomp.d[3]) < 1e-12


def test_degenerate_decomposition_is_planar(degenerate_tower):
    decomp = tip_decomposition(degenerate_tower, 3)
    for col in (decomp.t, decomp.u, decomp.d):
        assert np.max(np.abs(col)) < 1e-11
    assert np.all(np.abs(decomp.sigma[2:] / -FROZEN_SIGMA - 1.0) < 0.01)
    assert np.all(np.abs(decomp.alpha[2:] / FROZEN_SIGMA ** 2 - 1.0) < 0.01)


def test_tip_agrees_with_piece_route(toy_tower, toy_decomp):
    # the anchored chain and the deepest all-v piece center are independent
    # constructions; they can differ by at most that piece's diameter
    assert np.max(np.abs(toy_decomp.tips[0]
                         - piece_route_tip(toy_tower))) < 1e-3


def test_decomposition_guards(toy_tower):
    with pytest.raises(DomainError):
        tip_decomposition(toy_tower, -1)
    with pytest.raises(TowerTooShallow):
        tip_decomposition(toy_tower, 8)


# -- nonlinearity of the charts --------------------------------------------------


def test_degenerate_charts_converge_to_limit_profile(degenerate_nonlin):
    v_res = np.array([degenerate_nonlin[n].v_residual for n in range(3, 9)])
    dx_res = np.array([degenerate_nonlin[n].dx_residual for n in range(3, 9)])
    assert np.all(np.diff(v_res) < 0)
    assert np.all(np.diff(dx_res) < 0)
    ratios = v_res[:-1] / v_res[1:]
    assert np.all((4.0 < ratios) & (ratios < 9.0))
    assert degenerate_nonlin[6].v_residual < 5e-6
    assert degenerate_nonlin[8].v_residual < 1.5e-7
    assert degenerate_nonlin[8].dx_residual < 2e-7
    for rep in degenerate_nonlin.values():
        assert np.max(np.abs(rep.a)) < 1e-14
        assert rep.r_norm < 1e-14
        assert rep.fit_residual < 1e-13


def test_toy_quadratic_coefficients(toy_nonlin):
    rep = toy_nonlin[4]
    assert -3.6e-4 < rep.a[0] < -3.4e-4
    assert abs(rep.a[1]) < 1e-15
    assert abs(rep.a[2]) < 1e-15
    assert rep.fit_residual < 1e-6
    assert rep.r_norm < 1e-13
    for n in range(3, 7):
        assert toy_nonlin[n].v_residual < 6e-3


def test_toy_coupling_shrinks_with_base_level(toy_tower, vstar):
    mags = []
    for k in range(4):
        rep = nonlinearity_asymptotics(toy_tower, k + 4, k, v=vstar)
        assert rep.r_norm < 1e-13
        mags.append(np.max(np.abs(rep.a)))
    for lo, hi in zip(mags[1:], mags[:-1]):
        assert lo < 0.1 * hi
    assert mags[3] < 1e-11


def test_chart_image_hull_tracks_scaling_factor(toy_nonlin):
    hulls = np.array([toy_nonlin[n].hull_diameter for n in range(3, 7)])
    ratios = hulls[1:] / hulls[:-1]
    assert np.all(np.abs(ratios / FROZEN_SIGMA - 1.0) < 0.03)


def test_nonlinearity_guards(toy_tower, vstar):
    with pytest.raises(DomainError):
        nonlinearity_asymptotics(toy_tower, 3, 3, v=vstar)
    with pytest.raises(DomainError):
        nonlinearity_asymptotics(toy_tower, 3, -1, v=vstar)
    with pytest.raises(TowerTooShallow):
        nonlinearity_asymptotics(toy_tower, 9, 0, v=vstar)


# -- Lyapunov exponents ----------------------------------------------------------


def test_toy_lyapunov_recovers_contraction_rates(toy_tower):
    est = lyapunov_exponents(toy_tower.maps[0], toy_tower, 4096)
    assert est.chi0 > est.chi1 > est.chi2
    assert abs(est.chi0) < 0.05
    assert abs(est.chi1 - math.log(B1)) < 0.05
    # the z-direction is an exact cocycle of the constant b2
    assert abs(est.chi2 - math.log(B2)) < 1e-9
    assert est.bar2 == 0.0
    assert est.bar0 > 0.0 and est.bar1 > 0.0


def test_perturbed_lyapunov_sum_rule(pert_tower):
    est = lyapunov_exponents(pert_tower.maps[0], pert_tower, 4096)
    assert abs(est.chi1 + est.chi2 - math.log(B1 * B2)) < 0.02
    assert abs(est.chi2 - math.log(B2)) < 1e-5
    assert abs(est.chi0) < 0.05


def test_lyapunov_guards(toy_tower, degenerate_tower):
    with pytest.raises(DomainError):
        lyapunov_exponents(toy_tower.maps[0], toy_tower, 1)
    with pytest.raises(SingularJacobian):
        lyapunov_exponents(degenerate_tower.maps[0], degenerate_tower, 16)


# -- tower construction near the resolution floor --------------------------------


def test_perturbed_tower_freezes_vanishing_delta(pert_tower):
    dnorms = [m.deviation_norms[1] for m in pert_tower.maps]
    assert dnorms[5] == 0.0 and dnorms[6] == 0.0
    assert 1e-24 < dnorms[4] < 1e-22
    enorms = [m.deviation_norms[0] for m in pert_tower.maps]
    assert enorms[6] > 0.0
    assert abs(enorms[6] / 2.011e-64 - 1.0) < 0.01
