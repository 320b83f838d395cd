"""Cubic boundary-value problems for the Bloch-sphere angles theta(t), phi(t).

The spin-flip trajectory is fixed before any field is computed: theta runs
from 0 to pi with zero endpoint slopes, phi starts and ends at pi/2, passes
through 0 at t_f/2 and carries the midpoint slope that cancels the
field-synthesis singularity there:

    phid(t_f/2) = (beta/alpha) thetad(t_f/2) - eta B0.

Both angles are cubics; the linear systems are solved in normalized time
s = t/t_f for conditioning and the coefficients rescaled to physical ns
powers afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import MaterialParams


@dataclass(frozen=True)
class CubicPolynomial:
    """c0 + c1 t + c2 t^2 + c3 t^3 on the domain [0, tf] (t in ns)."""

    coeffs: tuple[float, float, float, float]
    tf: float

    def _check(self, t: float) -> float:
        t = float(t)
        if not 0.0 <= t <= self.tf:
            raise ValueError(f"t={t} outside domain [0, {self.tf}]")
        return t

    def __call__(self, t: float) -> float:
        t = self._check(t)
        c = self.coeffs
        return ((c[3] * t + c[2]) * t + c[1]) * t + c[0]

    def deriv(self, t: float) -> float:
        t = self._check(t)
        c = self.coeffs
        return (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1]

    def second_deriv(self, t: float) -> float:
        t = self._check(t)
        c = self.coeffs
        return 6.0 * c[3] * t + 2.0 * c[2]

    def coeff_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)


def _rescale(c_norm: np.ndarray, tf: float) -> tuple[float, float, float, float]:
    # coefficients of p(s), s = t/tf  ->  coefficients of p(t)
    return tuple(c_norm[j] / tf**j for j in range(4))


def solve_theta(tf: float) -> CubicPolynomial:
    """Unique cubic with theta(0)=0, theta(tf)=pi, thetad(0)=thetad(tf)=0.

    The solution is monotone on [0, tf] and passes through pi/2 at tf/2.
    """
    if not tf > 0.0:
        raise ValueError(f"tf must be positive, got {tf}")
    # conditions in s = t/tf: value at 0 and 1, slope at 0 and 1
    a = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0, 1.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 2.0, 3.0],
    ])
    rhs = np.array([0.0, np.pi, 0.0, 0.0])
    c = np.linalg.solve(a, rhs)
    return CubicPolynomial(_rescale(c, tf), tf)


def solve_phi(tf: float, b0: float, mat: MaterialParams,
              theta: CubicPolynomial | None = None) -> CubicPolynomial:
    """Unique cubic with phi(0)=phi(tf)=pi/2, phi(tf/2)=0 and the midpoint
    slope required by numerator cancellation at tf/2."""
    if not tf > 0.0:
        raise ValueError(f"tf must be positive, got {tf}")
    if theta is None:
        theta = solve_theta(tf)
    slope = (mat.beta / mat.alpha) * theta.deriv(tf / 2.0) - mat.eta * b0
    a = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 0.5, 0.25, 0.125],
        [0.0, 1.0, 1.0, 0.75],
    ])
    rhs = np.array([np.pi / 2, np.pi / 2, 0.0, slope * tf])
    c = np.linalg.solve(a, rhs)
    return CubicPolynomial(_rescale(c, tf), tf)


@dataclass(frozen=True)
class TrajectoryDesign:
    """The inverse-engineered control plan: both angle cubics plus tf, B0."""

    theta: CubicPolynomial
    phi: CubicPolynomial
    tf: float
    b0: float
    mat: MaterialParams

    @classmethod
    def design(cls, tf: float, b0: float, mat: MaterialParams) -> "TrajectoryDesign":
        theta = solve_theta(tf)
        phi = solve_phi(tf, b0, mat, theta)
        return cls(theta=theta, phi=phi, tf=tf, b0=b0, mat=mat)

    def boundary_residuals(self) -> np.ndarray:
        """The eight boundary-condition residuals, in imposition order."""
        th, ph, tf = self.theta, self.phi, self.tf
        slope = (self.mat.beta / self.mat.alpha) * th.deriv(tf / 2) - self.mat.eta * self.b0
        return np.array([
            th(0.0) - 0.0,
            th(tf) - np.pi,
            th.deriv(0.0),
            th.deriv(tf),
            ph(0.0) - np.pi / 2,
            ph(tf) - np.pi / 2,
            ph(tf / 2),
            ph.deriv(tf / 2) - slope,
        ])


def eval_angles(design: TrajectoryDesign, t: float) -> tuple[float, float, float, float]:
    """(theta, phi, thetad, phid) at t, exact from the cubic coefficients."""
    return (design.theta(t), design.phi(t),
            design.theta.deriv(t), design.phi.deriv(t))
