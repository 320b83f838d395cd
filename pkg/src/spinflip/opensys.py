"""Open-system dynamics: Lindblad dephasing, source-noise master equations,
Bloch-vector forms, and stochastic trajectory ensembles.

Two source-noise channels are provided and none is silently "corrected":

* ``as-printed`` keeps diagonal noise decay only,
  -(lam^2 eta^2 / 2) (Y^2+Z'^2, X^2+Z'^2, X^2+Y^2) on (u, v, w), where
  Z' = Z - B0.
* ``x-only`` builds the noise operator H' from the B1-driven part of the
  Hamiltonian (Y and Z' components; the noisy electric field is taken along
  x) and applies the exact double commutator.  Its Bloch form is derived
  numerically from the density-matrix form, and it is the channel whose
  ensemble limit the stochastic trajectories reproduce.

Noise strength: lam = lambda0 sqrt(t_f); lambda0^2 is the sweep axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .constants import HBAR, MU_B, MaterialParams
from .core import FieldTriple, build_heff
from .errors import IntegratorError
from .trajectory import TrajectoryDesign

CHANNELS = ("as-printed", "x-only")
_CHANNEL_CODE = {"as-printed": 1, "x-only": 2}
GATE_TOL = 1e-8


@dataclass(frozen=True)
class LindbladParams:
    """Isotropic dephasing rate (1/ns)."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class NoiseParams:
    """Source-noise strength, channel selection, and ensemble bookkeeping."""

    lambda0: float
    channel: str = "as-printed"
    seed: int = 0
    n_traj: int = 1

    def __post_init__(self):
        if self.lambda0 < 0.0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")


def _bloch_of(mat: np.ndarray) -> np.ndarray:
    # paper components of an arbitrary (not necessarily unit-trace) 2x2
    return np.array([(mat[0, 1] + mat[1, 0]).real,
                     (-1j * (mat[0, 1] - mat[1, 0])).real,
                     (mat[0, 0] - mat[1, 1]).real])


def lindblad_step_rhs(rho: np.ndarray, h: np.ndarray, gamma: float) -> np.ndarray:
    """rhodot = -(i/hbar)[H, rho] - (gamma/2) sum_i [sigma_i, [sigma_i, rho]].

    The double-commutator sum collapses to 8 rho - 4 tr(rho) I, so the
    dissipator is -4 gamma (rho - tr(rho) I / 2); trace-preserving.
    """
    rho = np.asarray(rho, dtype=complex)
    comm = h @ rho - rho @ h
    tr = rho[0, 0] + rho[1, 1]
    dissip = -4.0 * gamma * (rho - 0.5 * tr * np.eye(2))
    return -1j / HBAR * comm + dissip


def bloch_rhs(r: np.ndarray, fields: FieldTriple, gamma: float,
              mat: MaterialParams) -> np.ndarray:
    """The 3x3 dephasing Bloch equation: -4 gamma diagonal plus precession."""
    eta = mat.eta
    x, y, z = fields
    u, v, w = r
    return np.array([
        -4.0 * gamma * u + eta * z * v - eta * y * w,
        -eta * z * u - 4.0 * gamma * v + eta * x * w,
        eta * y * u - eta * x * v - 4.0 * gamma * w,
    ])


def xonly_hprime(fields: FieldTriple, b0: float, mat: MaterialParams) -> np.ndarray:
    """Noise operator: the B1-driven part of H_eff (Y and Z' = Z - B0 terms)."""
    zp = fields[2] - b0
    y = fields[1]
    pref = 0.5 * mat.g * MU_B
    return np.array([[pref * zp, 1j * pref * y],
                     [-1j * pref * y, -pref * zp]], dtype=complex)


def noise_master_rhs(rho: np.ndarray, h: np.ndarray, hprime: np.ndarray,
                     lam: float) -> np.ndarray:
    """rhodot = -(i/hbar)[H, rho] - (lam^2 / 2 hbar^2) [H', [H', rho]]."""
    rho = np.asarray(rho, dtype=complex)
    comm = h @ rho - rho @ h
    inner = hprime @ rho - rho @ hprime
    outer = hprime @ inner - inner @ hprime
    return -1j / HBAR * comm - lam**2 / (2.0 * HBAR**2) * outer


def noise_bloch_rhs(r: np.ndarray, fields: FieldTriple, b0: float, lam: float,
                    mat: MaterialParams, channel: str = "as-printed") -> np.ndarray:
    """Bloch-vector source-noise equation.

    as-printed: the diagonal-decay matrix, no dissipative cross couplings.
    x-only: derived numerically from the double commutator of xonly_hprime,
    which keeps the off-diagonal dissipative couplings the printed matrix
    drops.
    """
    if channel == "as-printed":
        eta = mat.eta
        x, y, z = fields
        zp = z - b0
        u, v, w = r
        ke = 0.5 * lam**2 * eta**2
        return np.array([
            -ke * (y * y + zp * zp) * u + eta * z * v - eta * y * w,
            -eta * z * u - ke * (x * x + zp * zp) * v + eta * x * w,
            eta * y * u - eta * x * v - ke * (x * x + y * y) * w,
        ])
    if channel == "x-only":
        u, v, w = r
        rho = 0.5 * np.array([[1.0 + w, u + 1j * v], [u - 1j * v, 1.0 - w]],
                             dtype=complex)
        h = build_heff(fields, mat)
        hp = xonly_hprime(fields, b0, mat)
        return _bloch_of(noise_master_rhs(rho, h, hp, lam))
    raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")


def _design_args(design: TrajectoryDesign):
    m = design.mat
    return (design.theta.coeff_array(), design.phi.coeff_array(), design.tf,
            design.b0, m.alpha, m.beta, m.eta)


@dataclass(frozen=True)
class BlochTrajectory:
    times: np.ndarray
    r: np.ndarray  # (n+1, 3)

    @property
    def final_fidelity(self) -> float:
        return fidelity_from_w(float(self.r[-1, 2]))


def fidelity_from_w(w: float) -> float:
    """F = sqrt((1 - w)/2): modulus of the down-state overlap."""
    return float(np.sqrt(max(0.0, (1.0 - w) / 2.0)))


def propagate_bloch(design: TrajectoryDesign, gamma: float = 0.0,
                    lambda0: float = 0.0, steps: int = 10000,
                    r0: tuple[float, float, float] = (0.0, 0.0, 1.0)) -> BlochTrajectory:
    """RK4 on the Bloch equation with dephasing plus as-printed noise decay."""
    lam2 = lambda0**2 * design.tf
    channel = 1 if lambda0 > 0.0 else 0
    traj = K.rk4_bloch(*_design_args(design), gamma, lam2, channel,
                       np.asarray(r0, dtype=float), steps)
    if np.isnan(traj).any():
        raise IntegratorError("Bloch propagation produced non-finite components")
    return BlochTrajectory(times=np.linspace(0.0, design.tf, steps + 1), r=traj)


def propagate_master(design: TrajectoryDesign, gamma: float, steps: int = 10000) -> float:
    """Fidelity of the dephasing master equation from (0, 0, 1).

    Same step-halving convergence gate as the closed-system propagator.
    """
    if steps < 1000:
        raise ValueError(f"steps must be >= 1000, got {steps}")
    coarse = propagate_bloch(design, gamma=gamma, steps=steps)
    fine = propagate_bloch(design, gamma=gamma, steps=2 * steps)
    gate = float(np.max(np.abs(coarse.r[-1] - fine.r[-1])))
    if gate > GATE_TOL:
        raise IntegratorError(
            f"step-halving gate failed: final Bloch vector moved by {gate:.3e}")
    return coarse.final_fidelity


@dataclass(frozen=True)
class DensityTrajectory:
    times: np.ndarray
    rho: np.ndarray  # (n+1, 2, 2)

    def bloch(self) -> np.ndarray:
        out = np.empty((self.rho.shape[0], 3))
        out[:, 0] = (self.rho[:, 0, 1] + self.rho[:, 1, 0]).real
        out[:, 1] = (-1j * (self.rho[:, 0, 1] - self.rho[:, 1, 0])).real
        out[:, 2] = (self.rho[:, 0, 0] - self.rho[:, 1, 1]).real
        return out

    @property
    def final_fidelity(self) -> float:
        return float(np.sqrt(max(0.0, self.rho[-1, 1, 1].real)))


def propagate_density(design: TrajectoryDesign, gamma: float = 0.0,
                      lambda0: float = 0.0, channel: str = "as-printed",
                      steps: int = 10000,
                      rho0: np.ndarray | None = None) -> DensityTrajectory:
    """RK4 on the density matrix with the selected dissipators."""
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
    if rho0 is None:
        rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    lam2 = lambda0**2 * design.tf
    code = _CHANNEL_CODE[channel] if lambda0 > 0.0 else 0
    pref = 0.5 * design.mat.g * MU_B
    traj = K.rk4_density(*_design_args(design), pref, HBAR, gamma, lam2, code,
                         np.asarray(rho0, dtype=complex), steps)
    if np.isnan(traj).any():
        raise IntegratorError("density propagation produced non-finite entries")
    return DensityTrajectory(times=np.linspace(0.0, design.tf, steps + 1), rho=traj)


def noise_increments(seed: int, n_traj: int, steps: int, dt: float) -> np.ndarray:
    """Wiener increments dW ~ Normal(0, dt), one private generator per
    trajectory seeded as seed XOR trajectory index."""
    out = np.empty((n_traj, steps))
    for i in range(n_traj):
        rng = np.random.default_rng(seed ^ i)
        out[i] = rng.normal(0.0, np.sqrt(dt), steps)
    return out


@dataclass(frozen=True)
class SSETrajectory:
    times: np.ndarray
    states: np.ndarray  # (n+1, 2)
    bloch: np.ndarray   # (n+1, 3)

    @property
    def final_fidelity(self) -> float:
        return float(np.abs(self.states[-1, 1]))


def sse_trajectory(design: TrajectoryDesign, noise: NoiseParams,
                   steps: int = 10000) -> SSETrajectory:
    """One Euler-Maruyama trajectory of the stochastic Schrodinger equation.

    Uses the x-only noise operator (the stochastic term has no as-printed
    operator form); deterministic for a fixed seed.
    """
    dt = design.tf / steps
    dw = noise_increments(noise.seed, 1, steps, dt)
    lam = noise.lambda0 * np.sqrt(design.tf)
    psi0 = np.array([1.0, 0.0], dtype=complex)
    pref = 0.5 * design.mat.g * MU_B
    states = K.em_states(*_design_args(design), pref, HBAR, lam, psi0, dw[0], steps)
    if np.isnan(states).any():
        raise IntegratorError("SSE trajectory produced non-finite amplitudes")
    cross = states[:, 0] * states[:, 1].conjugate()
    bloch = np.column_stack([2.0 * cross.real, 2.0 * cross.imag,
                             np.abs(states[:, 0])**2 - np.abs(states[:, 1])**2])
    return SSETrajectory(times=np.linspace(0.0, design.tf, steps + 1),
                         states=states, bloch=bloch)


@dataclass(frozen=True)
class EnsembleResult:
    times: np.ndarray
    mean_bloch: np.ndarray      # (n+1, 3)
    fidelities: np.ndarray      # per-trajectory |psi_down(tf)|
    fidelity_mean: float
    fidelity_se: float


def ensemble_average(design: TrajectoryDesign, noise: NoiseParams,
                     steps: int = 10000) -> EnsembleResult:
    """Monte Carlo ensemble of SSE trajectories, averaged in lockstep.

    The mean Bloch trajectory converges (weakly, order dt) to the x-only
    master equation; the spread yields the standard error of the fidelity.
    """
    dt = design.tf / steps
    dw = noise_increments(noise.seed, noise.n_traj, steps, dt)
    lam = noise.lambda0 * np.sqrt(design.tf)
    psi0 = np.array([1.0, 0.0], dtype=complex)
    pref = 0.5 * design.mat.g * MU_B
    bloch, fid = K.em_ensemble(*_design_args(design), pref, HBAR, lam, psi0,
                               dw, steps)
    if np.isnan(bloch).any():
        raise IntegratorError("ensemble propagation produced non-finite components")
    se = float(fid.std(ddof=1) / np.sqrt(noise.n_traj)) if noise.n_traj > 1 else 0.0
    return EnsembleResult(times=np.linspace(0.0, design.tf, steps + 1),
                          mean_bloch=bloch, fidelities=fid,
                          fidelity_mean=float(fid.mean()), fidelity_se=se)


def perturbative_bound(gamma: float, tf: float) -> float:
    """First-order dephasing bound 1 - 2 gamma t_f, clamped to [0, 1]."""
    return min(1.0, max(0.0, 1.0 - 2.0 * gamma * tf))
