import functools

import numpy as np
import pytest

from wgscatter import (
    Branch,
    PhysicalParams,
    PulseSpec,
    TwoPhotonInputSpec,
    build_grid,
    build_two_photon_state,
    calibrate_coupling,
)


@functools.lru_cache(maxsize=None)
def calibrated_params(n_per_branch: int, kappa_max: float) -> PhysicalParams:
    """Coupling calibrated once per grid shape and shared across tests."""
    grid = build_grid(n_per_branch, kappa_max)
    return PhysicalParams(gamma=1.0, v_g=1.0,
                          g=calibrate_coupling(1.0, grid).g)


@pytest.fixture(scope="session")
def small_grid():
    """Cheap grid for dynamics unit tests (box length ~31)."""
    return build_grid(61, 6.0)


@pytest.fixture(scope="session")
def small_params():
    # analytic coupling is plenty for unit tests; exact-rate calibration
    # needs larger windows and is exercised separately
    return PhysicalParams.with_analytic_coupling()


@pytest.fixture(scope="session")
def coincident_pair(small_grid, small_params):
    """Two identical coincident right-going resonant pulses."""
    spec = TwoPhotonInputSpec(
        PulseSpec(sigma=1.0, z0=-2.0, direction=Branch.RIGHT),
        PulseSpec(sigma=1.0, z0=-2.0, direction=Branch.RIGHT),
    )
    return build_two_photon_state(spec, small_grid, small_params)


@pytest.fixture(scope="session")
def counter_pair(small_grid, small_params):
    """Mirror-symmetric counter-propagating pulses."""
    spec = TwoPhotonInputSpec(
        PulseSpec(sigma=1.0, z0=-2.0, direction=Branch.RIGHT),
        PulseSpec(sigma=1.0, z0=+2.0, direction=Branch.LEFT),
    )
    return build_two_photon_state(spec, small_grid, small_params)


def random_symmetric_state(grid, rng: np.random.Generator, excite: bool = True):
    """Normalized random two-excitation state with exact exchange symmetry."""
    from wgscatter import TwoExcitationState

    N = grid.n_modes
    m = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    m = 0.5 * (m + m.T)
    e = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) if excite \
        else np.zeros(N, complex)
    state = TwoExcitationState(grid, np.ascontiguousarray(m), e, 0.0)
    nrm = np.sqrt(state.norm_squared())
    state.amp_gg /= nrm
    state.amp_e /= nrm
    return state
