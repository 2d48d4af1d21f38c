"""Tests for the test-function algebra.

Oracles: scipy.integrate.quad for moments, five-point finite
differences for derivatives, dense trapezoid sums for oscillatory
transforms.  Identity checks (decompositions, recentering remainders)
are evaluated pointwise on probe grids.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from germlift.testfn import (
    LargeScaleDecomposition,
    ScaledTestFunction,
    TestFunction,
    annihilate_moments,
    bump_raw,
    large_scale_decompose,
    make_bump,
    poly_bump,
    scale_center,
    taylor_recenter_remainder,
    vanishing_moment_mollifier,
)


def fd5(fn, z, h):
    """Five point central difference for the first derivative."""
    return (-fn(z + 2 * h) + 8 * fn(z + h) - 8 * fn(z - h) + fn(z - 2 * h)) / (12 * h)


class TestMakeBump:
    def test_positive_at_center_and_zero_at_edge(self):
        phi = make_bump(0)
        assert phi(0.0) > 0.0
        assert phi(1.0) == 0.0 and phi(-1.0) == 0.0
        assert phi(1.3) == 0.0

    def test_c2_normalization(self):
        phi = make_bump(2)
        norms = phi.cr_norms(2)
        assert np.max(norms) == pytest.approx(1.0, abs=1e-9)
        assert phi.values(0.0, 1) == pytest.approx(0.0, abs=1e-14)
        assert phi.moment(0) > 0.0

    def test_rejects_negative_order(self):
        with pytest.raises(ValueError):
            make_bump(-1)


class TestDerivatives:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_against_finite_differences(self, k):
        phi = poly_bump([1.0, 0.3, -0.5])
        zs = np.array([-0.8, -0.35, 0.0, 0.21, 0.6, 0.9])
        prev = phi.deriv(k - 1)
        approx = fd5(lambda z: prev.values(z), zs, 1e-4)
        exact = phi.values(zs, k)
        scale = max(1.0, np.max(np.abs(exact)))
        assert np.max(np.abs(approx - exact)) / scale < 1e-6

    def test_cr_norms_match_probed_suprema(self):
        phi = poly_bump([0.4, -0.2, 1.0])
        zs = np.linspace(-1, 1, 4001)
        for k in range(4):
            probed = np.max(np.abs(phi.values(zs, k)))
            stored = phi.sup_deriv(k)
            assert abs(stored - probed) / stored < 1e-4
            assert stored >= probed - 1e-12


class TestMoments:
    def test_against_quad_oracle(self):
        phi = poly_bump([1.0, 0.5, -0.3])
        for j in range(5):
            ref, err = quad(
                lambda z, j=j: z ** j * (1.0 + 0.5 * z - 0.3 * z * z)
                * np.exp(-1.0 / (1.0 - z * z)),
                -1.0, 1.0, limit=200)
            assert phi.moment(j) == pytest.approx(ref, abs=max(1e-12, 10 * err))

    def test_osc_transform_against_dense_sum(self):
        phi = bump_raw()
        s = 47.0
        zs = np.linspace(-1, 1, 400001)
        ref = np.trapezoid(zs ** 2 * phi.values(zs) * np.exp(1j * s * zs), zs)
        assert abs(phi.osc_transform(2, s) - ref) < 1e-10


class TestScaledTestFunction:
    def test_scaling_definition(self):
        phi = make_bump(1)
        probe = scale_center(phi, 0.3, 0.125)
        ys = np.array([0.3, 0.32, 0.41])
        expected = phi.values((ys - 0.3) / 0.125) / 0.125
        assert np.allclose(probe.values(ys), expected, rtol=0, atol=1e-14)

    @given(x=st.floats(-3, 3), lam=st.floats(0.01, 4.0))
    @settings(max_examples=30, deadline=None)
    def test_mass_invariance(self, x, lam):
        phi = make_bump(0)
        probe = scale_center(phi, x, lam)
        ns = np.linspace(*probe.support_interval, 20001)
        mass = np.trapezoid(probe.values(ns), ns)
        assert mass == pytest.approx(phi.moment(0), rel=1e-6)

    def test_derivative_chain_rule(self):
        phi = poly_bump([1.0, -0.6])
        probe = scale_center(phi, -0.2, 0.25)
        ys = np.array([-0.3, -0.2, -0.1])
        approx = fd5(lambda y: probe.values(y), ys, 1e-5)
        assert np.allclose(probe.values(ys, 1), approx, rtol=1e-6, atol=1e-6)

    def test_rejects_zero_scale(self):
        with pytest.raises(ValueError):
            scale_center(make_bump(0), 0.0, 0.0)


class TestVanishingMomentMollifier:
    def test_moment_table(self):
        eta = vanishing_moment_mollifier(2.5)
        vec = eta.moment_vector(2)
        assert vec[0] == pytest.approx(1.0, abs=1e-12)
        assert abs(vec[1]) < 1e-10 and abs(vec[2]) < 1e-10

    def test_shallow_depth_is_plain_mass_one(self):
        eta = vanishing_moment_mollifier(0.5)
        assert eta.moment(0) == pytest.approx(1.0, abs=1e-12)

    def test_integer_depth_includes_top_order(self):
        eta = vanishing_moment_mollifier(3.0)
        assert np.max(np.abs(eta.moment_vector(3)[1:])) < 1e-10

    def test_flavors_differ_but_share_moments(self):
        a = vanishing_moment_mollifier(2.5)
        b = vanishing_moment_mollifier(2.5, flavor=1)
        assert abs(a(0.3) - b(0.3)) > 1e-3
        assert np.max(np.abs(b.moment_vector(2) - np.array([1, 0, 0]))) < 1e-10

    def test_depth_cap(self):
        with pytest.raises(ValueError):
            vanishing_moment_mollifier(7.5)


class TestAnnihilateMoments:
    def test_identity_when_disabled(self):
        phi = make_bump(1)
        assert annihilate_moments(phi, -1) is phi

    @given(c=st.integers(0, 4),
           a=st.floats(-1, 1), b=st.floats(-1, 1))
    @settings(max_examples=25, deadline=None)
    def test_moments_vanish(self, c, a, b):
        phi = poly_bump([1.0, a, b])
        psi = annihilate_moments(phi, c)
        assert np.max(np.abs(psi.moment_vector(c))) < 1e-10
        assert psi.support_radius <= 1.0 + 1e-12

    def test_c3_example(self):
        psi = annihilate_moments(poly_bump([0.7, 0.2, 0.1]), 3)
        assert np.max(np.abs(psi.moment_vector(3))) < 1e-10
        # order 4 moment generically survives
        assert abs(psi.moment(4)) > 1e-6


class TestLargeScaleDecompose:
    @pytest.mark.parametrize("M,c", [(4, 0), (6, 2), (12, 3)])
    def test_identity(self, M, c):
        psi = poly_bump([1.0, -0.4, 0.2])
        dec = large_scale_decompose(psi, M, c)
        assert isinstance(dec, LargeScaleDecomposition)
        span = 2.0 ** M + 1.0
        grid = np.linspace(-span, span, 3001)
        assert np.max(np.abs(dec.residual(grid))) < 1e-10

    def test_pieces_have_vanishing_moments(self):
        dec = large_scale_decompose(poly_bump([1.0, -0.4]), 8, 2)
        for piece in dec.pieces:
            assert np.max(np.abs(piece.moment_vector(2))) < 1e-9

    def test_coarse_part_carries_the_mass(self):
        psi = poly_bump([0.9, 0.3])
        dec = large_scale_decompose(psi, 5, 1)
        assert dec.coarse.moment(0) == pytest.approx(psi.moment(0), abs=1e-12)

    def test_norms_uniform_in_depth_and_scale(self):
        # every piece lies in a fixed ball of C^2 whose radius comes
        # from the jet coefficients and the mollifier alone, with no
        # dependence on the scale index n or the depth M
        psi = make_bump(2)
        eta = vanishing_moment_mollifier(2)
        phi = 2.0 * eta.rescale_argument(2.0) - eta
        jets = [abs(psi.normalized_moment(k)) for k in range(3)]
        cap_eta = sum(w * eta.deriv(k).cr_norm(2) for k, w in enumerate(jets))
        cap_phi = sum(w * phi.deriv(k).cr_norm(2) for k, w in enumerate(jets))
        cap = max(cap_phi, cap_eta + psi.cr_norm(2))
        for M in (4, 10):
            dec = large_scale_decompose(psi, M, 2, reference=eta)
            assert dec.coarse.cr_norm(2) <= cap_eta * (1 + 1e-12)
            for piece in dec.pieces:
                assert piece.cr_norm(2) <= cap * (1 + 1e-12)


class TestTaylorRecenterRemainder:
    def test_identity_on_probes(self):
        phi = annihilate_moments(poly_bump([1.0, 0.5]), 2)
        rem = taylor_recenter_remainder(phi, 0.3, 0.28, 4, 2)
        us = np.linspace(0.28 - 0.2, 0.3 + 0.2, 100)
        assert np.max(np.abs(rem.residual(us))) < 1e-9

    def test_remainder_in_unit_ball(self):
        phi = annihilate_moments(poly_bump([1.0, 0.0, -0.5]), 1)
        rem = taylor_recenter_remainder(phi, 0.1, 0.1 + 2.0 ** -5, 5, 1)
        lo, hi = rem.remainder.support
        assert lo >= -1.0 - 1e-12 and hi <= 1.0 + 1e-12

    def test_remainder_inherits_vanishing_moments(self):
        phi = annihilate_moments(poly_bump([1.0, 0.4]), 2)
        rem = taylor_recenter_remainder(phi, 0.0, 0.01, 3, 2)
        assert np.max(np.abs(rem.remainder.moment_vector(2))) < 1e-9

    def test_coincident_centers_degenerate(self):
        phi = make_bump(1)
        rem = taylor_recenter_remainder(phi, 0.2, 0.2, 4, 2)
        assert rem.prefactor == 0.0
        us = np.linspace(0.1, 0.3, 50)
        assert np.max(np.abs(rem.residual(us))) < 1e-12

    def test_rejects_distant_centers(self):
        with pytest.raises(ValueError):
            taylor_recenter_remainder(make_bump(1), 0.0, 0.5, 4, 2)

    @given(off=st.floats(-1.0, 1.0), n=st.integers(2, 6), c=st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_identity_property(self, off, n, c):
        phi = annihilate_moments(poly_bump([1.0, -0.3]), c)
        x = 0.1
        y = x + off * 2.0 ** (-n)
        rem = taylor_recenter_remainder(phi, x, y, n, c)
        us = x + np.linspace(-2.5, 2.5, 60) * 2.0 ** (-n)
        scale = max(1.0, np.max(np.abs(rem.lhs_values(us))))
        assert np.max(np.abs(rem.residual(us))) / scale < 1e-9


class TestAlgebra:
    def test_linear_combination_values(self):
        a, b = make_bump(0), poly_bump([0.0, 1.0])
        combo = TestFunction.combine([2.0, -1.5], [a, b])
        zs = np.linspace(-1, 1, 11)
        assert np.allclose(combo.values(zs), 2 * a.values(zs) - 1.5 * b.values(zs))

    def test_rescale_argument_support(self):
        phi = make_bump(0)
        inner = phi.rescale_argument(2.0, 0.5)
        lo, hi = inner.support
        assert lo == pytest.approx(-0.75) and hi == pytest.approx(0.25)
        assert inner.values(0.1) == pytest.approx(float(phi.values(0.7)))
