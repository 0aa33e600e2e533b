"""Independent reference computations used to validate the main engine.

The frequency-domain route never touches the ODE integrator: transmission
through a two-sided emitter is the textbook Lorentzian amplitude
t(d) = d / (d + i gamma/2), integrated against the analytic pulse spectrum
by adaptive quadrature.  Comparing it with the time-domain single-photon
run gives a two-engines-one-physics cross-check, and products of
single-photon probabilities bound the two-photon sector probabilities in
the well-separated-pulse limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .core import (
    Branch,
    Grid,
    GridResolutionError,
    PhysicalParams,
    SimulationError,
)
from .dynamics import IntegratorConfig, evolve, evolve_single
from .observables import sector_probabilities
from .wavepackets import (
    PulseSpec,
    TwoPhotonInputSpec,
    build_single_photon_state,
    build_two_photon_state,
)


def lorentzian_transmission_amplitude(detuning, gamma: float = 1.0):
    """Single-photon transmission amplitude d / (d + i gamma/2).

    Vanishes on resonance (total reflection of monochromatic light) and
    approaches 1 far from resonance; |t|^2 + |r|^2 = 1.
    """
    d = np.asarray(detuning, dtype=float)
    out = d / (d + 0.5j * gamma)
    return out if out.ndim else complex(out)


def lorentzian_transmission(sigma: float, delta: float = 0.0,
                            gamma: float = 1.0, v_g: float = 1.0) -> float:
    """Transmission of a Gaussian pulse by frequency-domain quadrature.

    Integrates |t(v_g kappa)|^2 against the normalized spectral intensity
    exp(-(kappa - delta/v_g)^2 / sigma^2) / (sigma sqrt(pi)).
    """
    center = delta / v_g
    norm = 1.0 / (sigma * math.sqrt(math.pi))

    def integrand(kappa):
        t2 = abs(lorentzian_transmission_amplitude(v_g * kappa, gamma)) ** 2
        return t2 * norm * math.exp(-((kappa - center) / sigma) ** 2)

    val, _ = quad(integrand, -np.inf, np.inf, limit=400)
    return float(val)


@dataclass(frozen=True)
class SinglePhotonResult:
    """Post-scattering summary of one single-photon run.

    ``transmission`` is the probability of finding the photon still moving
    along the input direction, ``reflection`` the reversed one; the
    transmitted spectrum is the amplitude magnitude over kappa on the input
    branch, which dips at resonance where the emitter reflects totally.
    """

    transmission: float
    reflection: float
    residual_p_e: float
    kappas: np.ndarray
    transmitted_spectrum: np.ndarray

    def probability_total(self) -> float:
        return self.transmission + self.reflection + self.residual_p_e


def single_photon_scatter(pulse: PulseSpec, grid: Grid, params: PhysicalParams,
                          cfg: IntegratorConfig,
                          residual_tol: float = 1e-3) -> SinglePhotonResult:
    """Scatter one photon off the emitter in the single-excitation sector."""
    state = build_single_photon_state(pulse, grid, params.v_g)
    traj = evolve_single(state, cfg, params)
    final = traj.final
    n, dk = grid.n_per_branch, grid.dk
    abs2 = np.abs(final.amp_k) ** 2
    p_left = dk * float(abs2[:n].sum())
    p_right = dk * float(abs2[n:].sum())
    residual = abs(final.amp_e) ** 2
    if residual > residual_tol:
        raise SimulationError(
            f"single-photon run ended with residual emitter excitation "
            f"{residual:.3e} (> {residual_tol:.1e}); extend t_end")
    if pulse.direction is Branch.RIGHT:
        transmission, reflection = p_right, p_left
    else:
        transmission, reflection = p_left, p_right
    spectrum = np.abs(final.amp_k[grid.branch_slice(pulse.direction)])
    return SinglePhotonResult(
        transmission=transmission, reflection=reflection, residual_p_e=residual,
        kappas=grid.kappas.copy(), transmitted_spectrum=spectrum,
    )


@dataclass(frozen=True)
class FactorizationReport:
    """Two-photon sector probabilities against products of single-photon
    outcomes for co-propagating pulses at a given separation."""

    separation: float
    sigma: float
    p_rr: float
    p_ll: float
    p_lr: float
    single_transmission: float
    single_reflection: float
    deviation_rr: float
    deviation_ll: float
    deviation_lr: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviation_rr, self.deviation_ll, self.deviation_lr)


def default_lead_position(sigma: float) -> float:
    """Start position keeping the incoming Gaussian tail past the emitter
    below ~2e-5 of the intensity (three intensity standard widths)."""
    return -max(3.0, 3.0 / sigma)


def factorization_check(separation: float, sigma: float, grid: Grid,
                        params: PhysicalParams, cfg: IntegratorConfig,
                        z0_lead: float | None = None) -> FactorizationReport:
    """Compare a separated-pulse two-photon run against single-photon products.

    Both pulses travel right, the trailing one ``separation`` behind the
    leading one.  When the separation exceeds the emitter memory the sector
    probabilities factorize, P_RR -> T^2, P_LL -> R^2, P_LR -> 2TR; the
    deviations quantify how strongly the first photon saturates the emitter
    for the second.
    """
    if z0_lead is None:
        z0_lead = default_lead_position(sigma)
    lead = PulseSpec(sigma=sigma, z0=z0_lead, direction=Branch.RIGHT)
    trail = PulseSpec(sigma=sigma, z0=z0_lead - separation, direction=Branch.RIGHT)
    two = build_two_photon_state(TwoPhotonInputSpec(lead, trail), grid, params)
    traj = evolve(two, cfg, params)
    p_rr, p_ll, p_lr = sector_probabilities(traj.final)
    single = single_photon_scatter(lead, grid, params, cfg)
    t, r = single.transmission, single.reflection
    return FactorizationReport(
        separation=separation, sigma=sigma,
        p_rr=p_rr, p_ll=p_ll, p_lr=p_lr,
        single_transmission=t, single_reflection=r,
        deviation_rr=abs(p_rr - t * t),
        deviation_ll=abs(p_ll - r * r),
        deviation_lr=abs(p_lr - 2.0 * t * r),
    )


def monochromatic_limit_sweep(sigmas, grid: Grid, params: PhysicalParams,
                              cfg: IntegratorConfig,
                              z0: float | None = None) -> list[tuple[float, float]]:
    """Single-photon transmission versus spectral width.

    All pulses launch from the same position (by default far enough for
    the narrowest), so one time horizon covers the ladder.  Transmission
    grows monotonically with sigma for resonant pulses and vanishes in the
    monochromatic limit.
    """
    sigmas = list(sigmas)
    if not sigmas:
        return []
    for sigma in sigmas:
        if grid.dk > sigma / 4.0:
            raise GridResolutionError(
                f"dk={grid.dk:.4g} under-resolves sigma={sigma} "
                "(need at least four samples per spectral width)")
    if z0 is None:
        z0 = default_lead_position(min(sigmas))
    rows = []
    for sigma in sigmas:
        pulse = PulseSpec(sigma=sigma, z0=z0, direction=Branch.RIGHT)
        result = single_photon_scatter(pulse, grid, params, cfg)
        rows.append((float(sigma), result.transmission))
    return rows
