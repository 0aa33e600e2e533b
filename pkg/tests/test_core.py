import math

import mpmath
import numpy as np
import pytest

from wgscatter import (
    Branch,
    PhysicalParams,
    PulseSpec,
    build_grid,
    default_grid,
    detuning,
    mirror_state,
)
from wgscatter.wavepackets import out_of_window_mass


class TestBuildGrid:
    def test_two_point_grid(self):
        grid = build_grid(2, 1.0)
        assert grid.kappas.tolist() == [-1.0, 1.0]
        assert grid.dk == 2.0
        assert grid.n_modes == 4

    def test_spacing_and_mode_count(self):
        grid = build_grid(201, 10.0)
        assert grid.dk == pytest.approx(0.1)
        assert grid.n_modes == 402
        assert grid.kappas[0] == -10.0 and grid.kappas[-1] == 10.0

    def test_window_truncation_negligible_for_unit_pulse(self):
        # independent tail oracle: high-precision quadrature of the
        # normalized Gaussian intensity beyond the window edge
        grid = build_grid(401, 20.0)
        pulse = PulseSpec(sigma=1.0, z0=-3.0)
        mass = out_of_window_mass(pulse, grid)
        tail = 2.0 * mpmath.quad(
            lambda k: mpmath.exp(-k**2) / mpmath.sqrt(mpmath.pi), [20, mpmath.inf])
        assert mass < 1e-40
        assert mass == pytest.approx(float(tail), rel=1e-6)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            build_grid(1, 10.0)
        with pytest.raises(ValueError):
            build_grid(100, 0.0)
        with pytest.raises(ValueError):
            build_grid(100, -1.0)

    def test_symmetric_about_zero(self):
        grid = build_grid(87, 7.3)
        np.testing.assert_allclose(grid.kappas, -grid.kappas[::-1], atol=1e-14)

    def test_default_policy(self):
        grid = default_grid(0.5, 2.0)
        assert grid.kappa_max == 40.0
        assert grid.dk <= 0.05 + 1e-12


class TestModeIndexing:
    def test_flat_roundtrip_all_modes(self):
        grid = build_grid(17, 3.0)
        for mode in range(grid.n_modes):
            branch, ik = grid.unflatten(mode)
            assert grid.flat_index(branch, ik) == mode

    def test_out_of_range(self):
        grid = build_grid(5, 1.0)
        with pytest.raises(IndexError):
            grid.unflatten(10)
        with pytest.raises(IndexError):
            grid.flat_index(Branch.LEFT, 5)

    def test_branch_mirror(self):
        assert Branch.LEFT.mirror() is Branch.RIGHT
        assert Branch.RIGHT.mirror() is Branch.LEFT
        assert Branch.RIGHT.sign == 1 and Branch.LEFT.sign == -1


class TestDetuning:
    def test_resonant_mode(self):
        grid = build_grid(41, 4.0)
        center = grid.flat_index(Branch.RIGHT, 20)
        assert detuning(grid, center) == 0.0

    def test_linear_dispersion(self):
        grid = build_grid(7, 3.0)
        mode = grid.flat_index(Branch.RIGHT, 6)
        assert detuning(grid, mode) == pytest.approx(3.0)
        assert detuning(grid, mode, v_g=2.0) == pytest.approx(6.0)

    def test_even_under_branch_mirror(self):
        grid = build_grid(9, 2.0)
        for ik in range(grid.n_per_branch):
            left = detuning(grid, grid.flat_index(Branch.LEFT, ik))
            right = detuning(grid, grid.flat_index(Branch.RIGHT, ik))
            assert left == right

    def test_out_of_range(self):
        grid = build_grid(5, 1.0)
        with pytest.raises(IndexError):
            detuning(grid, 99)


class TestMirrorState:
    def test_mirror_twice_is_identity(self, small_grid):
        from conftest import random_symmetric_state
        state = random_symmetric_state(small_grid, np.random.default_rng(7))
        twice = mirror_state(mirror_state(state))
        np.testing.assert_array_equal(twice.amp_gg, state.amp_gg)
        np.testing.assert_array_equal(twice.amp_e, state.amp_e)

    def test_symmetric_input_is_fixed_point(self, counter_pair):
        mirrored = mirror_state(counter_pair)
        np.testing.assert_allclose(mirrored.amp_gg, counter_pair.amp_gg, atol=1e-15)

    def test_branch_swap_moves_pulses(self, coincident_pair, small_grid):
        n = small_grid.n_per_branch
        mirrored = mirror_state(coincident_pair)
        # right-going product input lives in the RR block; mirror moves it to LL
        assert np.all(coincident_pair.amp_gg[:n, :n] == 0)
        assert np.all(mirrored.amp_gg[n:, n:] == 0)
        assert np.max(np.abs(mirrored.amp_gg[:n, :n])) > 0

    def test_norm_and_symmetry_preserved(self, counter_pair):
        mirrored = mirror_state(counter_pair)
        assert mirrored.norm_squared() == pytest.approx(1.0, abs=1e-12)
        assert mirrored.max_symmetry_defect() == 0.0


class TestPhysicalParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            PhysicalParams(gamma=0.0, g=0.1)
        with pytest.raises(ValueError):
            PhysicalParams(v_g=-1.0, g=0.1)
        with pytest.raises(ValueError):
            PhysicalParams(g=-0.1)
        PhysicalParams(g=0.0)  # decoupled limit allowed

    def test_analytic_coupling_value(self):
        assert PhysicalParams.analytic_coupling() == pytest.approx(
            math.sqrt(1.0 / (4.0 * math.pi)))
