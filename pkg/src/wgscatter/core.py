"""Mode grid, physical units, and state containers shared by all modules.

The waveguide continuum is discretized in per-branch detuning coordinates
kappa = |k| - k0, so the (huge) optical carrier wavenumber k0 never enters
the dynamics; it cancels in the rotating frame and is kept only as an
optional parameter for rendering cross-branch interference fringes in
position-space output.

Units are fixed internally to gamma = v_g = 1: times are measured in units
of the inverse emitter decay rate and lengths in units of v_g/gamma.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class SimulationError(Exception):
    """Base class for numerical/physics failures (CLI exit code 3)."""


class GridCoverageError(SimulationError):
    """Requested state has non-negligible weight outside the mode window."""


class GridResolutionError(SimulationError):
    """Grid spacing or window too coarse for the requested feature."""


class StabilityError(SimulationError):
    """Time step violates the explicit-integrator stability guard."""


class CalibrationError(SimulationError):
    """Coupling calibration failed to converge or decay is non-exponential."""


class Branch(enum.Enum):
    """Propagation direction of a waveguide mode family.

    RIGHT corresponds to true wavenumbers k > 0, LEFT to k < 0.
    """

    LEFT = "L"
    RIGHT = "R"

    @property
    def sign(self) -> int:
        """+1 for right-going modes, -1 for left-going modes."""
        return 1 if self is Branch.RIGHT else -1

    def mirror(self) -> "Branch":
        return Branch.LEFT if self is Branch.RIGHT else Branch.RIGHT


@dataclass(frozen=True)
class PhysicalParams:
    """Emitter and waveguide constants.

    Attributes
    ----------
    gamma : float
        Emitter decay rate; fixes the unit of time (default 1).
    v_g : float
        Group velocity of the linearized dispersion; fixes the unit of
        length v_g/gamma (default 1).
    g : float
        Emitter-mode coupling strength, units gamma*(gamma/v_g)**0.5.
        ``analytic_coupling`` gives the flat-continuum value; for exact
        decay at gamma on a finite grid use
        :func:`wgscatter.dynamics.calibrate_coupling`.
    k0 : float or None
        Optional carrier wavenumber (units gamma/v_g), used only when
        rendering cross-branch fringes in position-space output.
    """

    gamma: float = 1.0
    v_g: float = 1.0
    g: float = 0.0
    k0: float | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.v_g <= 0:
            raise ValueError(f"v_g must be positive, got {self.v_g}")
        # g = 0 is the exactly solvable decoupled limit, kept for cross-checks
        if self.g < 0:
            raise ValueError(f"g must be nonnegative, got {self.g}")

    @staticmethod
    def analytic_coupling(gamma: float = 1.0, v_g: float = 1.0) -> float:
        """Flat-continuum coupling reproducing decay rate ``gamma``.

        Each branch contributes a density of states 1/(2 pi v_g), so the
        golden-rule rate gamma = 2 pi g^2 * 2/v_g inverts to
        g = sqrt(gamma v_g / 4 pi).
        """
        return math.sqrt(gamma * v_g / (4.0 * math.pi))

    @classmethod
    def with_analytic_coupling(cls, gamma: float = 1.0, v_g: float = 1.0,
                               k0: float | None = None) -> "PhysicalParams":
        return cls(gamma=gamma, v_g=v_g, g=cls.analytic_coupling(gamma, v_g), k0=k0)

    def with_coupling(self, g: float) -> "PhysicalParams":
        return replace(self, g=g)


@dataclass(frozen=True)
class Grid:
    """Uniform symmetric detuning grid for the two propagation branches.

    Flat mode indices run 0..N-1 with the left-going branch first:
    modes 0..n-1 are (LEFT, kappas[0..n-1]) and modes n..2n-1 are
    (RIGHT, kappas[0..n-1]).  Discrete sums approximate continuum
    integrals with the uniform quadrature weight ``dk``.
    """

    n_per_branch: int
    kappa_max: float
    kappas: np.ndarray = field(repr=False, compare=False)
    dk: float

    @property
    def n_modes(self) -> int:
        """Total flat mode count N = 2 * n_per_branch."""
        return 2 * self.n_per_branch

    @property
    def kappas_flat(self) -> np.ndarray:
        """Detuning coordinate of every flat mode (branch-independent)."""
        return np.concatenate([self.kappas, self.kappas])

    def branch_slice(self, branch: Branch) -> slice:
        n = self.n_per_branch
        return slice(0, n) if branch is Branch.LEFT else slice(n, 2 * n)

    def flat_index(self, branch: Branch, kappa_index: int) -> int:
        if not 0 <= kappa_index < self.n_per_branch:
            raise IndexError(f"kappa index {kappa_index} out of range")
        base = 0 if branch is Branch.LEFT else self.n_per_branch
        return base + kappa_index

    def unflatten(self, mode: int) -> tuple[Branch, int]:
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode index {mode} out of range")
        if mode < self.n_per_branch:
            return Branch.LEFT, mode
        return Branch.RIGHT, mode - self.n_per_branch

    def mode_branch_signs(self) -> np.ndarray:
        """Branch sign (+1 right, -1 left) of every flat mode."""
        n = self.n_per_branch
        return np.concatenate([-np.ones(n), np.ones(n)])

    @property
    def mirror_permutation(self) -> np.ndarray:
        """Flat index permutation swapping the two branches at fixed kappa."""
        n = self.n_per_branch
        return np.concatenate([np.arange(n, 2 * n), np.arange(0, n)])


def build_grid(n_per_branch: int, kappa_max: float) -> Grid:
    """Build the uniform symmetric detuning grid.

    Parameters
    ----------
    n_per_branch : int
        Number of modes per propagation branch (>= 2).
    kappa_max : float
        Half-width of the detuning window, units gamma/v_g.
    """
    if n_per_branch < 2:
        raise ValueError(f"n_per_branch must be >= 2, got {n_per_branch}")
    if kappa_max <= 0:
        raise ValueError(f"kappa_max must be positive, got {kappa_max}")
    kappas = np.linspace(-kappa_max, kappa_max, n_per_branch)
    kappas.flags.writeable = False
    dk = 2.0 * kappa_max / (n_per_branch - 1)
    return Grid(n_per_branch=n_per_branch, kappa_max=float(kappa_max),
                kappas=kappas, dk=dk)


def default_grid(sigma_min: float, sigma_max: float | None = None) -> Grid:
    """Default window and resolution for pulses with the given widths.

    The window extends to max(20*sigma_max, 20) so both the pulse spectrum
    and the emitter line (width gamma/v_g = 1) fit with negligible
    truncated mass, and the spacing satisfies dk <= min(sigma_min/10, 0.05).
    """
    if sigma_max is None:
        sigma_max = sigma_min
    kappa_max = max(20.0 * sigma_max, 20.0)
    dk_target = min(sigma_min / 10.0, 0.05)
    n = int(math.ceil(2.0 * kappa_max / dk_target)) + 1
    return build_grid(n, kappa_max)


def detuning(grid: Grid, mode: int, v_g: float = 1.0) -> float:
    """Rotating-frame frequency v_g * kappa of a flat mode.

    Even under branch mirror: left- and right-going modes at the same
    kappa are degenerate under the linearized dispersion.
    """
    _, ik = grid.unflatten(mode)
    return v_g * float(grid.kappas[ik])


def detunings_flat(grid: Grid, v_g: float = 1.0) -> np.ndarray:
    """Vector of rotating-frame frequencies over all flat modes."""
    return v_g * grid.kappas_flat


@dataclass
class TwoExcitationState:
    """Full system wavefunction in the two-excitation sector.

    ``amp_gg[i, j]`` is the symmetric two-photon amplitude over flat mode
    pairs (continuum normalization, units (gamma/v_g)^-1) and ``amp_e[i]``
    the excited-emitter one-photon amplitude (units (gamma/v_g)^-1/2).
    The squared norm is dk^2 * sum|amp_gg|^2 + dk * sum|amp_e|^2.
    """

    grid: Grid
    amp_gg: np.ndarray
    amp_e: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        N = self.grid.n_modes
        if self.amp_gg.shape != (N, N):
            raise ValueError(f"amp_gg must have shape ({N}, {N})")
        if self.amp_e.shape != (N,):
            raise ValueError(f"amp_e must have shape ({N},)")

    def norm_squared(self) -> float:
        dk = self.grid.dk
        gg = dk * dk * float(np.sum(np.abs(self.amp_gg) ** 2))
        e = dk * float(np.vdot(self.amp_e, self.amp_e).real)
        return gg + e

    def max_symmetry_defect(self) -> float:
        """Largest |amp_gg[i,j] - amp_gg[j,i]|; zero for exchange-symmetric states."""
        return float(np.max(np.abs(self.amp_gg - self.amp_gg.T)))

    def copy(self) -> "TwoExcitationState":
        return TwoExcitationState(self.grid, self.amp_gg.copy(),
                                  self.amp_e.copy(), self.time)


@dataclass
class SingleExcitationState:
    """One-quantum sector: a photon amplitude vector plus the bare-emitter
    amplitude.  Used for coupling calibration and single-photon oracles."""

    grid: Grid
    amp_k: np.ndarray
    amp_e: complex = 0.0 + 0.0j
    time: float = 0.0

    def __post_init__(self):
        if self.amp_k.shape != (self.grid.n_modes,):
            raise ValueError(f"amp_k must have shape ({self.grid.n_modes},)")

    def norm_squared(self) -> float:
        dk = self.grid.dk
        return dk * float(np.vdot(self.amp_k, self.amp_k).real) + abs(self.amp_e) ** 2

    def copy(self) -> "SingleExcitationState":
        return SingleExcitationState(self.grid, self.amp_k.copy(),
                                     self.amp_e, self.time)


def mirror_state(state: TwoExcitationState) -> TwoExcitationState:
    """Reflect the state about the emitter: (branch, kappa) -> (mirror, kappa).

    An involution; mirror-symmetric states are fixed points up to phase.
    """
    perm = state.grid.mirror_permutation
    return TwoExcitationState(
        grid=state.grid,
        amp_gg=np.ascontiguousarray(state.amp_gg[np.ix_(perm, perm)]),
        amp_e=state.amp_e[perm].copy(),
        time=state.time,
    )


def mirror_single_state(state: SingleExcitationState) -> SingleExcitationState:
    perm = state.grid.mirror_permutation
    return SingleExcitationState(state.grid, state.amp_k[perm].copy(),
                                 state.amp_e, state.time)
