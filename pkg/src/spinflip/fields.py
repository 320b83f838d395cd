"""Field synthesis: drive fields from the angle design, singularity handling,
electric fields, and the B0 upper-limit curve.

The drive fields are

    B1 = [-beta thetad cot(theta) cos(phi) + beta (phid + eta B0) sin(phi)]
         / [eta (1 + xi_x) (alpha cot(theta) - beta sin(phi))]

and the analogous B2; both share the denominator factor
alpha cot(theta) - beta sin(phi), whose zeros are the singular times.  The
design boundary conditions force the numerators to vanish at t_f/2 together
with the denominator, so the fields stay finite there (simple zero over
simple zero; evaluated by L'Hopital inside a guard window).  Above a
B0 limit that shrinks with t_f, additional denominator zeros appear whose
numerators do not cancel; those designs are rejected, not repaired.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .constants import MU_B, MEV_PER_E_CM_TO_V_PER_CM, MaterialParams
from .core import FieldTriple
from .errors import IntegratorError, SingularityError
from .trajectory import TrajectoryDesign

# Central-difference step for dB/dt in units of tf.  1e-5 fails its own
# halving assertion near the interval edges for designs close to the B0
# limit; 2e-6 keeps the h^2 error ~25x inside the tolerance everywhere while
# staying ~1e9 above double-precision roundoff on the quotient.
E_STEP_FRAC = 2e-6
E_EDGE_FRAC = 5e-6        # electric-field endpoint clamp (stencil must fit)
ROOT_ABS_TOL = 1e-10      # |denominator| target for bisection, units of alpha
CANCEL_REL_TOL = 1e-8     # numerator residual tolerance relative to its scale


@dataclass(frozen=True)
class FieldSample:
    """One row of a designed-pulse table."""

    t: float
    b1: float
    b2: float
    ex: float
    ey: float


@dataclass(frozen=True)
class SingularityReport:
    """Roots of the denominator condition on (0, tf) and their cancellability."""

    times: tuple[float, ...]
    cancellable: tuple[bool, ...]
    numerator_residuals: tuple[float, ...]

    @property
    def all_cancellable(self) -> bool:
        return all(self.cancellable)


def _pack(design: TrajectoryDesign):
    m = design.mat
    return (design.theta.coeff_array(), design.phi.coeff_array(), design.tf,
            design.b0, m.alpha, m.beta, m.eta)


def effective_fields(design: TrajectoryDesign, t: float) -> tuple[float, float]:
    """(B1, B2) in T at time t; endpoint values are the (zero) inside limits.

    Raises SingularityError when t falls in the guard window of a
    denominator zero whose numerators do not cancel.
    """
    tc, pc, tf, b0, al, be, eta = _pack(design)
    if not 0.0 <= t <= tf:
        raise ValueError(f"t={t} outside [0, {tf}]")
    b1, b2 = K.b1_b2(t, tc, pc, tf, b0, al, be, eta,
                     design.mat.xi_x, design.mat.xi_y)
    if np.isnan(b1) or np.isnan(b2):
        raise SingularityError(t, verify_cancellation(design, t))
    return b1, b2


def fields_xyz(b1: float, b2: float, b0: float, mat: MaterialParams) -> FieldTriple:
    """Map drive fields to the Hamiltonian triple:
    X = B2 (1+xi_y), Y = (alpha/beta)(1+xi_x) B1, Z = B0 + (1+xi_x) B1."""
    fx = 1.0 + mat.xi_x
    fy = 1.0 + mat.xi_y
    return FieldTriple(X=b2 * fy, Y=(mat.alpha / mat.beta) * fx * b1,
                       Z=b0 + fx * b1)


def fields_xyz_at(design: TrajectoryDesign, t: float) -> FieldTriple:
    """Hamiltonian field triple along the design.

    The xi factors cancel between the drive fields and the map, so (X, Y, Z)
    is independent of them.
    """
    b1, b2 = effective_fields(design, t)
    return fields_xyz(b1, b2, design.b0, design.mat)


def electric_fields(design: TrajectoryDesign, t: float) -> tuple[float, float]:
    """(Ex, Ey) in V/cm at time t.

    E_x = (g mu_B / 2 e beta) dB1/dt and the alpha analogue for E_y,
    differentiated by central differences with step E_STEP_FRAC * tf.  The
    step-halved estimate must agree to 1e-4 relative, else IntegratorError.
    """
    tc, pc, tf, b0, al, be, eta = _pack(design)
    xi_x, xi_y = design.mat.xi_x, design.mat.xi_y
    edge = E_EDGE_FRAC * tf
    t = min(max(t, edge), tf - edge)
    pref_x = design.mat.g * MU_B / (2.0 * be) * MEV_PER_E_CM_TO_V_PER_CM
    pref_y = design.mat.g * MU_B / (2.0 * al) * MEV_PER_E_CM_TO_V_PER_CM

    def diff(h: float) -> tuple[float, float]:
        p = K.b1_b2(t + h, tc, pc, tf, b0, al, be, eta, xi_x, xi_y)
        m = K.b1_b2(t - h, tc, pc, tf, b0, al, be, eta, xi_x, xi_y)
        return (p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)

    h = E_STEP_FRAC * tf
    db1_h, db2_h = diff(h)
    db1_h2, db2_h2 = diff(0.5 * h)
    if any(np.isnan(v) for v in (db1_h, db2_h, db1_h2, db2_h2)):
        raise SingularityError(t, verify_cancellation(design, t))
    for coarse, fine in ((db1_h, db1_h2), (db2_h, db2_h2)):
        scale = max(abs(fine), 1e-8)
        if abs(coarse - fine) > 1e-4 * scale:
            raise IntegratorError(
                f"electric-field derivative did not converge at t={t:.9g} ns "
                f"({coarse:.6e} vs {fine:.6e} T/ns)")
    return pref_x * db1_h2, pref_y * db2_h2


def sample_fields(design: TrajectoryDesign, samples: int) -> list[FieldSample]:
    """Uniform field table on [0, tf]; endpoints filled with inside limits.

    Raises SingularityError when the design carries any non-cancellable
    denominator zero (the fields diverge there even if no sample lands on it).
    """
    rep = detect_singularities(design)
    for ts_bad, ok, res in zip(rep.times, rep.cancellable, rep.numerator_residuals):
        if not ok:
            raise SingularityError(ts_bad, res)
    tc, pc, tf, b0, al, be, eta = _pack(design)
    ts = np.linspace(0.0, tf, samples)
    bs = K.b1_b2_grid(ts, tc, pc, tf, b0, al, be, eta,
                      design.mat.xi_x, design.mat.xi_y)
    out = []
    for i, t in enumerate(ts):
        ex, ey = electric_fields(design, float(t))
        out.append(FieldSample(t=float(t), b1=float(bs[i, 0]), b2=float(bs[i, 1]),
                               ex=ex, ey=ey))
    return out


def verify_cancellation(design: TrajectoryDesign, ts: float) -> float:
    """Max |numerator| of B1, B2 at a denominator root, in T rad/ns units.

    The root is cancellable when the residual is below
    CANCEL_REL_TOL * (|beta thetad| + |beta (phid + eta B0)|).
    """
    tc, pc, tf, b0, al, be, eta = _pack(design)
    n1, n2, _ = K.field_parts(ts, tc, pc, b0, al, be, eta)
    return max(abs(n1), abs(n2))


def cancellation_scale(design: TrajectoryDesign, ts: float) -> float:
    thd = design.theta.deriv(ts)
    phd = design.phi.deriv(ts)
    be = design.mat.beta
    return abs(be * thd) + abs(be * (phd + design.mat.eta * design.b0))


def is_cancellable(design: TrajectoryDesign, ts: float) -> bool:
    return verify_cancellation(design, ts) < CANCEL_REL_TOL * cancellation_scale(design, ts)


def detect_singularities(design: TrajectoryDesign, grid: int = 1001) -> SingularityReport:
    """Locate all roots of alpha cot(theta) = beta sin(phi) on (0, tf).

    Sign changes on a `grid`-point scan are refined by bisection to
    |denominator| < 1e-10 alpha; tf/2 is always a root by construction and is
    always reported.  Each root carries its numerator residual.
    """
    if grid < 100:
        raise ValueError(f"grid must be >= 100, got {grid}")
    tc, pc, tf, b0, al, be, eta = _pack(design)
    eps = K.EDGE_FRAC * tf
    ts = np.linspace(eps, tf - eps, grid)
    fv = K.denominator_grid(ts, tc, pc, al, be)

    def f(t: float) -> float:
        return float(K.denominator_grid(np.array([t]), tc, pc, al, be)[0])

    roots = [tf / 2.0]
    tol = ROOT_ABS_TOL * al
    for i in range(grid - 1):
        if fv[i] == 0.0:
            roots.append(float(ts[i]))
            continue
        if fv[i] * fv[i + 1] < 0.0:
            a, b = float(ts[i]), float(ts[i + 1])
            fa = fv[i]
            for _ in range(100):
                m = 0.5 * (a + b)
                fm = f(m)
                if abs(fm) < tol or m == a or m == b:
                    a = b = m
                    break
                if fa * fm < 0.0:
                    b = m
                else:
                    a, fa = m, fm
            roots.append(0.5 * (a + b))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if not merged or abs(r - merged[-1]) > 1e-6 * tf:
            merged.append(r)
    residuals = tuple(verify_cancellation(design, r) for r in merged)
    cancellable = tuple(
        res < CANCEL_REL_TOL * cancellation_scale(design, r)
        for r, res in zip(merged, residuals))
    return SingularityReport(times=tuple(merged), cancellable=cancellable,
                             numerator_residuals=residuals)


def design_is_realizable(design: TrajectoryDesign, grid: int = 1001) -> bool:
    """True when the only denominator zero is the cancellable one at tf/2."""
    rep = detect_singularities(design, grid)
    return len(rep.times) == 1 and rep.all_cancellable


def compute_b0_max(tf: float, mat: MaterialParams, b0_hi: float = 10.0,
                   grid: int = 1001, tol: float = 1e-3) -> float:
    """Largest B0 for which the design keeps a single (removable) singularity.

    Bisection on B0 of the single-root predicate; `b0_hi` must already show
    extra roots, else ValueError asks for a larger bracket.
    """
    if not tf > 0.0:
        raise ValueError(f"tf must be positive, got {tf}")

    def single(b0: float) -> bool:
        return design_is_realizable(TrajectoryDesign.design(tf, b0, mat), grid)

    lo = min(1e-3, 0.1 * b0_hi)
    if not single(lo):
        raise ValueError(f"no single-singularity design even at B0={lo} T")
    if single(b0_hi):
        raise ValueError(
            f"single singularity still holds at B0={b0_hi} T; raise b0_hi to bracket the limit")
    hi = b0_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if single(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
