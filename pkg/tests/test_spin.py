"""Operator algebra, coherent states, rotations, expectations."""

from fractions import Fraction

import numpy as np
import pytest

from spinsqueeze import (SpinSystem, build_spin_operators, css_x, expect_real,
                         expectation, purity, rotate, validate_density_matrix,
                         xi2_z)
from util import random_density


class TestSpinSystem:
    def test_fields(self):
        s = SpinSystem(3)
        assert s.j == Fraction(3, 2)
        assert s.dim == 4

    @pytest.mark.parametrize("bad", [0, -1, 2.5])
    def test_rejects_bad_atom_number(self, bad):
        with pytest.raises(ValueError):
            SpinSystem(bad)


@pytest.mark.parametrize("n", range(1, 51))
def test_commutators_cyclic(n):
    ops = build_spin_operators(SpinSystem(n))
    triples = [(ops.jx, ops.jy, ops.jz), (ops.jy, ops.jz, ops.jx),
               (ops.jz, ops.jx, ops.jy)]
    for a, b, c in triples:
        assert np.max(np.abs(a @ b - b @ a - 1j * c)) <= 1e-12


@pytest.mark.parametrize("n", range(1, 51))
def test_casimir(n):
    ops = build_spin_operators(SpinSystem(n))
    j = n / 2
    total = ops.jx @ ops.jx + ops.jy @ ops.jy + ops.jz @ ops.jz
    assert np.max(np.abs(total - j * (j + 1) * np.eye(n + 1))) <= 1e-10


def test_single_spin_is_pauli_over_two():
    ops = build_spin_operators(SpinSystem(1))
    assert np.allclose(ops.jz, np.diag([0.5, -0.5]), atol=1e-15)
    assert np.allclose(ops.jx, np.array([[0, 0.5], [0.5, 0]]), atol=1e-15)
    assert np.allclose(ops.jy, np.array([[0, -0.5j], [0.5j, 0]]), atol=1e-15)


def test_ladder_coefficient_two_atoms():
    # raising the m = -1 state of j = 1 gives sqrt(2) on m = 0
    ops = build_spin_operators(SpinSystem(2))
    lowest = np.array([0.0, 0.0, 1.0], dtype=complex)
    raised = ops.jp @ lowest
    assert np.allclose(raised, [0.0, np.sqrt(2.0), 0.0], atol=1e-15)


def test_operators_are_immutable():
    ops = build_spin_operators(SpinSystem(5))
    with pytest.raises(ValueError):
        ops.jz[0, 0] = 99.0


class TestCssX:
    @pytest.mark.parametrize("n", [1, 2, 4, 5, 10, 20, 50])
    def test_moments(self, n):
        s = SpinSystem(n)
        ops = build_spin_operators(s)
        rho = css_x(s)
        j = n / 2
        assert abs(expect_real(ops.jx, rho) - j) <= 1e-10
        assert abs(expect_real(ops.jy, rho)) <= 1e-10
        assert abs(expect_real(ops.jz, rho)) <= 1e-10
        assert abs(expect_real(ops.jz @ ops.jz, rho) - j / 2) <= 1e-10
        assert abs(expect_real(ops.jy @ ops.jy, rho) - j / 2) <= 1e-10
        assert abs(purity(rho) - 1.0) <= 1e-12
        assert abs(xi2_z(rho, ops) - 1.0) <= 1e-10
        validate_density_matrix(rho)

    def test_four_atom_values(self):
        s = SpinSystem(4)
        ops = build_spin_operators(s)
        rho = css_x(s)
        assert abs(expect_real(ops.jx, rho) - 2.0) <= 1e-12
        assert abs(expect_real(ops.jz @ ops.jz, rho) - 1.0) <= 1e-12

    def test_single_atom_is_equal_superposition(self):
        rho = css_x(SpinSystem(1))
        assert np.allclose(rho, 0.5 * np.ones((2, 2)), atol=1e-12)


class TestRotate:
    def test_zero_angle_is_identity(self):
        rho = css_x(SpinSystem(6))
        assert np.allclose(rotate(rho, "z", 0.0), rho, atol=1e-15)

    def test_pi_about_x_flips_polarization(self):
        n = 6
        up = np.zeros((n + 1, n + 1), dtype=complex)
        up[0, 0] = 1.0
        down = np.zeros_like(up)
        down[n, n] = 1.0
        assert np.allclose(rotate(up, "x", np.pi), down, atol=1e-12)

    def test_inverse_composition(self):
        rng = np.random.default_rng(11)
        rho = random_density(8, rng)
        back = rotate(rotate(rho, "y", 0.7), "y", -0.7)
        assert np.max(np.abs(back - rho)) <= 1e-12

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_preserves_trace_hermiticity_spectrum(self, axis):
        rng = np.random.default_rng(5)
        rho = random_density(7, rng)
        out = rotate(rho, axis, 1.234)
        assert abs(np.trace(out).real - 1.0) <= 1e-12
        assert np.max(np.abs(out - out.conj().T)) <= 1e-12
        assert np.max(np.abs(np.linalg.eigvalsh(out) -
                             np.linalg.eigvalsh(rho))) <= 1e-12

    def test_rejects_bad_axis_and_angle(self):
        rho = css_x(SpinSystem(2))
        with pytest.raises(ValueError):
            rotate(rho, "w", 0.1)
        with pytest.raises(ValueError):
            rotate(rho, "x", np.inf)


class TestExpectation:
    def test_identity_gives_trace(self):
        rng = np.random.default_rng(3)
        rho = random_density(9, rng)
        assert abs(expectation(np.eye(9), rho) - 1.0) <= 1e-12

    def test_jz_on_css_vanishes(self):
        s = SpinSystem(12)
        assert abs(expectation(build_spin_operators(s).jz, css_x(s))) <= 1e-12

    def test_jz_squared_on_css_twenty(self):
        s = SpinSystem(20)
        ops = build_spin_operators(s)
        assert abs(expectation(ops.jz @ ops.jz, css_x(s)) - 5.0) <= 1e-10

    def test_hermitian_expectation_is_real(self):
        rng = np.random.default_rng(7)
        s = SpinSystem(6)
        ops = build_spin_operators(s)
        rho = random_density(7, rng)
        assert abs(expectation(ops.jx, rho).imag) <= 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            expectation(np.eye(3), np.eye(4) / 4)


def test_validate_density_matrix_rejects_junk():
    bad = np.array([[0.5, 0.5], [0.1, 0.5]], dtype=complex)
    with pytest.raises(ValueError):
        validate_density_matrix(bad)
    unnormalized = np.eye(2, dtype=complex)
    with pytest.raises(ValueError):
        validate_density_matrix(unnormalized)
