"""Initial-state construction: Gaussian photon wavepackets with optional
modal correlation, plus single-excitation states for calibration and
cross-checks.

All builders renormalize on the discrete grid, so states are exactly unit
norm under the dk quadrature regardless of window truncation (which is
checked separately and rejected when the out-of-window mass is material).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .core import (
    Branch,
    Grid,
    GridCoverageError,
    PhysicalParams,
    SingleExcitationState,
    TwoExcitationState,
)

#: Sentinel for modally uncorrelated photon pairs (sigma_p -> infinity).
#: Using the IEEE infinity keeps the factorized product form exact instead
#: of approximating it with a large but finite correlation width.
UNCORRELATED = math.inf


@dataclass(frozen=True)
class PulseSpec:
    """One Gaussian single-photon wavepacket.

    Attributes
    ----------
    sigma : float
        Spectral width, units gamma/v_g.
    z0 : float
        Initial center position, units v_g/gamma.  Must lie on the incoming
        side of the emitter at z = 0 for the chosen direction unless
        ``allow_outgoing`` is set.
    delta : float
        Carrier detuning from the emitter resonance, units gamma.
    direction : Branch
        Propagation branch.
    """

    sigma: float
    z0: float
    delta: float = 0.0
    direction: Branch = Branch.RIGHT
    allow_outgoing: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.allow_outgoing:
            incoming = self.z0 < 0 if self.direction is Branch.RIGHT else self.z0 > 0
            if not incoming:
                raise ValueError(
                    f"pulse at z0={self.z0} moving {self.direction.name} starts on "
                    "the outgoing side of the emitter (set allow_outgoing to permit)")

    def mirrored(self) -> "PulseSpec":
        return PulseSpec(self.sigma, -self.z0, self.delta,
                         self.direction.mirror(), self.allow_outgoing)


@dataclass(frozen=True)
class TwoPhotonInputSpec:
    """Two pulses plus the modal-correlation width sigma_p.

    ``sigma_p`` is the width of the Gaussian phase-matching envelope applied
    to the total wavenumber offset from the two carriers; ``UNCORRELATED``
    (infinity) yields a symmetrized product state.
    """

    pulse1: PulseSpec
    pulse2: PulseSpec
    sigma_p: float = UNCORRELATED

    def __post_init__(self):
        if not (self.sigma_p > 0):
            raise ValueError(f"sigma_p must be positive or UNCORRELATED, got {self.sigma_p}")

    def swapped(self) -> "TwoPhotonInputSpec":
        return TwoPhotonInputSpec(self.pulse2, self.pulse1, self.sigma_p)

    def mirrored(self) -> "TwoPhotonInputSpec":
        return TwoPhotonInputSpec(self.pulse1.mirrored(), self.pulse2.mirrored(),
                                  self.sigma_p)


def out_of_window_mass(pulse: PulseSpec, grid: Grid, v_g: float = 1.0) -> float:
    """Fraction of the pulse's spectral intensity outside the grid window.

    Closed form for the Gaussian intensity exp(-(kappa - delta/v_g)^2 / sigma^2).
    """
    center = pulse.delta / v_g
    lo = (grid.kappa_max - center) / pulse.sigma
    hi = (grid.kappa_max + center) / pulse.sigma
    return 0.5 * (float(erfc(lo)) + float(erfc(hi)))


def single_photon_profile(pulse: PulseSpec, grid: Grid, v_g: float = 1.0,
                          coverage_tol: float = 1e-6) -> np.ndarray:
    """Normalized spectral amplitude of one pulse over the flat mode grid.

    The profile is supported on the pulse's branch only:

        xi(kappa) ~ exp[-i s z0 (kappa - delta/v_g) - (kappa - delta/v_g)^2 / (2 sigma^2)]

    with s the branch sign, so the position-space envelope peaks at z0 and
    translates with the branch direction.  The returned vector satisfies
    dk * sum|xi|^2 = 1 exactly (discrete renormalization).
    """
    mass_out = out_of_window_mass(pulse, grid, v_g)
    if mass_out > coverage_tol:
        raise GridCoverageError(
            f"pulse (sigma={pulse.sigma}, delta={pulse.delta}) has {mass_out:.3e} "
            f"of its spectrum outside the window kappa_max={grid.kappa_max} "
            f"(tolerance {coverage_tol:.1e})")
    offset = grid.kappas - pulse.delta / v_g
    s = pulse.direction.sign
    profile = np.exp(-1j * s * pulse.z0 * offset - offset**2 / (2.0 * pulse.sigma**2))
    out = np.zeros(grid.n_modes, dtype=np.complex128)
    out[grid.branch_slice(pulse.direction)] = profile
    nrm = math.sqrt(grid.dk * float(np.vdot(out, out).real))
    if nrm == 0.0:
        raise GridCoverageError("pulse profile vanished on the grid")
    out /= nrm
    return out


def phase_matching_factor(ksum, sigma_p: float):
    """Gaussian correlation envelope exp(-ksum^2 / (2 sigma_p^2)).

    Returns exactly 1 for the uncorrelated sentinel.  Accepts scalars or
    arrays in ``ksum``.
    """
    if not (sigma_p > 0):
        raise ValueError(f"sigma_p must be positive or UNCORRELATED, got {sigma_p}")
    if math.isinf(sigma_p):
        return np.ones_like(np.asarray(ksum, dtype=float)) if np.ndim(ksum) else 1.0
    return np.exp(-np.asarray(ksum, dtype=float) ** 2 / (2.0 * sigma_p**2))


def build_two_photon_state(spec: TwoPhotonInputSpec, grid: Grid,
                           params: PhysicalParams,
                           coverage_tol: float = 1e-6) -> TwoExcitationState:
    """Construct the symmetric two-photon amplitude matrix at t = 0.

    The unsymmetrized amplitude is the product of the two pulse profiles
    times the phase-matching envelope evaluated on the total wavenumber
    offset from the two carriers,

        s1*(kappa - delta1/v_g) + s2*(kappa' - delta2/v_g),

    with s_i the direction signs.  For co-propagating pulses this is the
    detuning sum; for counter-propagating pulses the signs make small
    sigma_p correlate the photons' positions along their respective
    directions of travel.  The result is explicitly symmetrized and
    renormalized, so exchange symmetry and unit norm hold exactly; the
    emitter amplitude starts at zero.
    """
    xi1 = single_photon_profile(spec.pulse1, grid, params.v_g, coverage_tol)
    xi2 = single_photon_profile(spec.pulse2, grid, params.v_g, coverage_tol)
    beta0 = np.outer(xi1, xi2)
    if not math.isinf(spec.sigma_p):
        kflat = grid.kappas_flat
        off1 = spec.pulse1.direction.sign * (kflat - spec.pulse1.delta / params.v_g)
        off2 = spec.pulse2.direction.sign * (kflat - spec.pulse2.delta / params.v_g)
        beta0 = phase_matching_factor(off1[:, None] + off2[None, :], spec.sigma_p) * beta0
    beta = beta0 + beta0.T
    nrm = grid.dk * math.sqrt(float(np.sum(np.abs(beta) ** 2)))
    if nrm < 1e-150:
        raise GridCoverageError("two-photon amplitude is numerically zero; "
                                "check pulse overlap with the grid window")
    beta /= nrm
    return TwoExcitationState(
        grid=grid,
        amp_gg=beta,
        amp_e=np.zeros(grid.n_modes, dtype=np.complex128),
        time=0.0,
    )


def build_single_photon_state(pulse: PulseSpec, grid: Grid, v_g: float = 1.0,
                              coverage_tol: float = 1e-6) -> SingleExcitationState:
    """One-photon wavepacket with the emitter in its ground state."""
    return SingleExcitationState(
        grid=grid,
        amp_k=single_photon_profile(pulse, grid, v_g, coverage_tol),
        amp_e=0.0 + 0.0j,
        time=0.0,
    )


def build_excited_emitter_state(grid: Grid) -> SingleExcitationState:
    """Bare excited emitter with an empty waveguide (calibration input)."""
    return SingleExcitationState(
        grid=grid,
        amp_k=np.zeros(grid.n_modes, dtype=np.complex128),
        amp_e=1.0 + 0.0j,
        time=0.0,
    )
