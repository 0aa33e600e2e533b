import math

import numpy as np
import pytest

from wgscatter import (
    Branch,
    GridCoverageError,
    PhysicalParams,
    PulseSpec,
    TwoPhotonInputSpec,
    UNCORRELATED,
    build_excited_emitter_state,
    build_grid,
    build_single_photon_state,
    build_two_photon_state,
    default_grid,
    mirror_single_state,
    phase_matching_factor,
    single_photon_profile,
)

PARAMS = PhysicalParams(g=PhysicalParams.analytic_coupling())


class TestPulseSpec:
    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            PulseSpec(sigma=0.0, z0=-1.0)

    def test_rejects_outgoing_start(self):
        with pytest.raises(ValueError):
            PulseSpec(sigma=1.0, z0=2.0, direction=Branch.RIGHT)
        with pytest.raises(ValueError):
            PulseSpec(sigma=1.0, z0=-2.0, direction=Branch.LEFT)

    def test_outgoing_override(self):
        PulseSpec(sigma=1.0, z0=2.0, direction=Branch.RIGHT, allow_outgoing=True)

    def test_input_spec_sigma_p_validation(self):
        p = PulseSpec(sigma=1.0, z0=-1.0)
        with pytest.raises(ValueError):
            TwoPhotonInputSpec(p, p, sigma_p=0.0)
        with pytest.raises(ValueError):
            TwoPhotonInputSpec(p, p, sigma_p=-2.0)
        TwoPhotonInputSpec(p, p, sigma_p=UNCORRELATED)


class TestSinglePhotonProfile:
    def test_zero_phase_case(self):
        grid = build_grid(401, 10.0)
        xi = single_photon_profile(PulseSpec(sigma=1.0, z0=0.0, allow_outgoing=True),
                                   grid)
        block = xi[grid.branch_slice(Branch.RIGHT)]
        assert np.max(np.abs(block.imag)) < 1e-14
        assert np.all(block.real > 0)
        peak = np.argmax(np.abs(block))
        assert grid.kappas[peak] == pytest.approx(0.0, abs=grid.dk / 2)
        # spectral width: |xi| falls to exp(-1/2) of the peak one sigma out
        at_sigma = np.interp(1.0, grid.kappas, np.abs(block))
        assert at_sigma / np.abs(block[peak]) == pytest.approx(math.exp(-0.5), rel=1e-3)

    def test_translation_is_linear_phase(self):
        grid = build_grid(401, 10.0)
        base = single_photon_profile(PulseSpec(sigma=1.0, z0=0.0, allow_outgoing=True),
                                     grid)
        moved = single_photon_profile(PulseSpec(sigma=1.0, z0=-3.0), grid)
        np.testing.assert_allclose(np.abs(moved), np.abs(base), atol=1e-14)
        block = slice(grid.n_per_branch, grid.n_modes)
        phase = np.angle(moved[block] / base[block])
        # d(phase)/d(kappa) = -z0 = +3 for a right-going pulse
        slopes = np.diff(np.unwrap(phase)) / grid.dk
        np.testing.assert_allclose(slopes, 3.0, atol=1e-9)

    def test_discrete_norm_exact(self):
        grid = default_grid(2.0)
        xi = single_photon_profile(PulseSpec(sigma=2.0, z0=-1.0), grid)
        assert grid.dk * np.vdot(xi, xi).real == pytest.approx(1.0, abs=1e-12)

    def test_coverage_violation_reports_mass(self):
        grid = build_grid(201, 5.0)
        with pytest.raises(GridCoverageError) as err:
            single_photon_profile(PulseSpec(sigma=1.0, z0=-2.0, delta=4.5), grid)
        assert "window" in str(err.value)

    def test_left_going_support(self):
        grid = build_grid(101, 5.0)
        xi = single_photon_profile(PulseSpec(sigma=1.0, z0=3.0,
                                             direction=Branch.LEFT), grid)
        assert np.all(xi[grid.branch_slice(Branch.RIGHT)] == 0)


class TestPhaseMatching:
    def test_uncorrelated_is_exactly_one(self):
        assert phase_matching_factor(0.7, UNCORRELATED) == 1.0
        assert phase_matching_factor(123.4, UNCORRELATED) == 1.0

    def test_peak_value(self):
        assert phase_matching_factor(0.0, 1.0) == 1.0

    def test_direct_evaluation(self):
        assert phase_matching_factor(1.0, 1.0) == pytest.approx(math.exp(-0.5))

    def test_rejects_nonpositive_width(self):
        with pytest.raises(ValueError):
            phase_matching_factor(1.0, 0.0)


def _coincident_spec(sigma=2.0, z0=-2.0, sigma_p=UNCORRELATED):
    return TwoPhotonInputSpec(
        PulseSpec(sigma=sigma, z0=z0, direction=Branch.RIGHT),
        PulseSpec(sigma=sigma, z0=z0, direction=Branch.RIGHT),
        sigma_p=sigma_p,
    )


class TestTwoPhotonState:
    def test_basic_contract(self):
        grid = build_grid(121, 12.0)
        state = build_two_photon_state(_coincident_spec(), grid, PARAMS)
        assert state.time == 0.0
        assert np.all(state.amp_e == 0)
        assert state.max_symmetry_defect() == 0.0
        assert state.norm_squared() == pytest.approx(1.0, abs=1e-12)

    def test_coincident_equal_pulses_isotropic_blob(self):
        grid = build_grid(121, 12.0)
        state = build_two_photon_state(_coincident_spec(), grid, PARAMS)
        n = grid.n_per_branch
        mag = np.abs(state.amp_gg)
        # all mass in the RR quadrant
        assert mag[n:, n:].sum() > 0
        assert mag[:n, :].sum() == 0 and mag[:, :n].sum() == 0
        # |beta| depends only on kappa^2 + kappa'^2: compare swapped points
        rr = mag[n:, n:]
        mid = n // 2
        assert rr[mid + 10, mid + 4] == pytest.approx(rr[mid + 4, mid + 10], rel=1e-12)
        assert rr[mid + 10, mid - 4] == pytest.approx(rr[mid - 4, mid + 10], rel=1e-12)
        assert rr[mid - 10, mid + 4] == pytest.approx(rr[mid + 10, mid - 4], rel=1e-10)

    def test_separated_pulses_interfere(self):
        # unequal widths, centers 2 apart: the interference part of |beta|^2
        # oscillates in (kappa - kappa') at angular frequency |z01 - z02|
        grid = build_grid(321, 16.0)
        dz = 2.0
        spec = TwoPhotonInputSpec(
            PulseSpec(sigma=2.0, z0=-2.0, direction=Branch.RIGHT),
            PulseSpec(sigma=4.0, z0=-2.0 - dz, direction=Branch.RIGHT),
        )
        state = build_two_photon_state(spec, grid, PARAMS)
        xi1 = single_photon_profile(spec.pulse1, grid)
        xi2 = single_photon_profile(spec.pulse2, grid)
        prod = np.abs(np.outer(xi1, xi2)) ** 2 + np.abs(np.outer(xi2, xi1)) ** 2
        k_norm = np.sum(np.abs(np.outer(xi1, xi2) + np.outer(xi2, xi1)) ** 2)
        cross = np.abs(state.amp_gg) ** 2 * k_norm * grid.dk**2 - prod

        def cross_at(du):
            # sample along kappa - kappa' = du around the spectral peak
            i0 = np.argmax(np.abs(xi1))
            j0 = np.argmax(np.abs(xi2)) - grid.n_per_branch
            shift = int(round(du / grid.dk))
            return cross[i0 + shift, grid.n_per_branch + j0]

        assert cross_at(0.0) > 0
        assert cross_at(math.pi / dz) < 0
        assert cross_at(2.0 * math.pi / dz) > 0

    def test_correlated_pulses_anticorrelated_frequencies(self):
        grid = build_grid(161, 16.0)
        state = build_two_photon_state(_coincident_spec(sigma_p=1.5), grid, PARAMS)
        n = grid.n_per_branch
        weight = np.abs(state.amp_gg[n:, n:]) ** 2
        k1 = grid.kappas[:, None]
        k2 = grid.kappas[None, :]
        total = weight.sum()
        var_sum = float((weight * (k1 + k2) ** 2).sum() / total)
        var_diff = float((weight * (k1 - k2) ** 2).sum() / total)
        assert var_sum < 0.5 * var_diff

    def test_uncorrelated_distinct_pulses_product_form(self):
        grid = build_grid(161, 8.0)
        spec = TwoPhotonInputSpec(
            PulseSpec(sigma=1.0, z0=-2.0, direction=Branch.RIGHT),
            PulseSpec(sigma=0.7, z0=-4.0, direction=Branch.RIGHT),
        )
        state = build_two_photon_state(spec, grid, PARAMS)
        xi1 = single_photon_profile(spec.pulse1, grid)
        xi2 = single_photon_profile(spec.pulse2, grid)
        direct = np.outer(xi1, xi2) + np.outer(xi2, xi1)
        direct /= grid.dk * math.sqrt(np.sum(np.abs(direct) ** 2))
        np.testing.assert_allclose(state.amp_gg, direct, atol=1e-13)

    def test_swapping_pulses_gives_identical_state(self):
        grid = build_grid(101, 8.0)
        spec = TwoPhotonInputSpec(
            PulseSpec(sigma=1.0, z0=-2.0, direction=Branch.RIGHT),
            PulseSpec(sigma=0.5, z0=+3.0, direction=Branch.LEFT),
            sigma_p=2.0,
        )
        a = build_two_photon_state(spec, grid, PARAMS)
        b = build_two_photon_state(spec.swapped(), grid, PARAMS)
        np.testing.assert_allclose(a.amp_gg, b.amp_gg, atol=1e-14)

    def test_translation_leaves_magnitude_invariant(self):
        grid = build_grid(101, 8.0)
        base = _coincident_spec(sigma=1.0, z0=-2.0)
        shifted = TwoPhotonInputSpec(
            PulseSpec(sigma=1.0, z0=-3.5, direction=Branch.RIGHT),
            PulseSpec(sigma=1.0, z0=-3.5, direction=Branch.RIGHT),
        )
        a = build_two_photon_state(base, grid, PARAMS)
        b = build_two_photon_state(shifted, grid, PARAMS)
        np.testing.assert_allclose(np.abs(a.amp_gg), np.abs(b.amp_gg), atol=1e-13)

    def test_symmetrization_constant_for_identical_pulses(self):
        # identical coincident pulses: unsymmetrized amplitude is already
        # symmetric and unit norm, so the symmetrization constant is 1/2
        grid = build_grid(121, 12.0)
        spec = _coincident_spec()
        state = build_two_photon_state(spec, grid, PARAMS)
        xi = single_photon_profile(spec.pulse1, grid)
        beta0 = np.outer(xi, xi)
        sym = beta0 + beta0.T
        mask = np.abs(sym) > 1e-8
        np.testing.assert_allclose(state.amp_gg[mask] / sym[mask], 0.5, atol=1e-10)

    def test_coverage_error_propagates(self):
        grid = build_grid(51, 3.0)
        with pytest.raises(GridCoverageError):
            build_two_photon_state(_coincident_spec(sigma=1.0), grid, PARAMS)


class TestSingleExcitationBuilders:
    def test_single_photon_state(self):
        grid = build_grid(201, 10.0)
        state = build_single_photon_state(PulseSpec(sigma=1.0, z0=-3.0), grid)
        assert state.amp_e == 0
        assert state.norm_squared() == pytest.approx(1.0, abs=1e-12)

    def test_mirrored_spec_gives_mirrored_state(self):
        grid = build_grid(201, 10.0)
        pulse = PulseSpec(sigma=1.0, z0=-3.0, direction=Branch.RIGHT)
        state = build_single_photon_state(pulse, grid)
        mirrored = build_single_photon_state(pulse.mirrored(), grid)
        np.testing.assert_array_equal(mirror_single_state(state).amp_k,
                                      mirrored.amp_k)

    def test_quasi_monochromatic_width(self):
        sigma = 0.05
        grid = build_grid(801, 2.0)
        state = build_single_photon_state(PulseSpec(sigma=sigma, z0=-60.0), grid)
        intensity = np.abs(state.amp_k[grid.branch_slice(Branch.RIGHT)]) ** 2
        half = intensity > 0.5 * intensity.max()
        fwhm = grid.kappas[half][-1] - grid.kappas[half][0]
        assert fwhm == pytest.approx(2.0 * math.sqrt(math.log(2)) * sigma,
                                     abs=2 * grid.dk)
        assert fwhm < 0.2  # far below the emitter linewidth

    def test_excited_emitter_state(self):
        grid = build_grid(51, 5.0)
        state = build_excited_emitter_state(grid)
        assert state.amp_e == 1.0
        assert np.all(state.amp_k == 0)
        assert state.norm_squared() == pytest.approx(1.0)
