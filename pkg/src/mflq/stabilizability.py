"""Constructive mean-field L2-stabilizer certificates.

A feedback pair (Theta, ThetaBar) stabilizes the mean-field system when

  * the mean matrix  Ahat + Bhat ThetaBar  is Hurwitz, and
  * the second-moment operator of the centered state,
    M -> A_cl M + M A_cl^T + C_cl M C_cl^T, is stable,

in which case both Lyapunov certificates below exist with positive
definite solutions.  The certificate is built by solving with identity
right-hand sides rather than by semidefinite programming: for this
problem class, operator stability is equivalent to the existence of a
positive-definite solution for any positive-definite right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linops
from .errors import SingularLyapunov, SingularOperator
from .model import FeedbackStrategy

EPS_MARGIN = 1e-10

__all__ = ["StabilizerCertificate", "check_stabilizer", "check_uncontrolled_stability"]


@dataclass(frozen=True)
class StabilizerCertificate:
    is_stabilizer: bool
    P0: np.ndarray | None
    P0bar: np.ndarray | None
    min_eig_P0: float
    min_eig_P0bar: float
    hurwitz_abscissa: float
    stochastic_abscissa: float
    failure_reason: str  # none | mean_system_unstable | variance_system_unstable | certificate_not_positive


def check_stabilizer(spec, theta, theta_bar) -> StabilizerCertificate:
    """Decide whether (theta, theta_bar) is an MF-L2-stabilizer of ``spec``.

    Procedure: (1) verify the mean closed loop Ahat + Bhat ThetaBar is
    Hurwitz and certify it by solving  Acl_hat P0bar + P0bar Acl_hat^T = -I;
    (2) verify the stochastic Lyapunov operator of (A + B Theta, C + D Theta)
    is stable and certify with right-hand side -(I + Chat_cl P0bar Chat_cl^T),
    which also accounts for the mean-driven diffusion source.
    Failures are encoded in the certificate, never raised.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    theta_bar = np.atleast_2d(np.asarray(theta_bar, dtype=float))
    n = spec.n
    eye = np.eye(n)
    B, D = spec.B, spec.D
    Bh, Dh = B + spec.Bbar, D + spec.Dbar
    Ah, Ch = spec.A + spec.Abar, spec.C + spec.Cbar

    A_mean = Ah + Bh @ theta_bar
    hurwitz = linops.spectral_abscissa(A_mean)

    A_cl = spec.A + B @ theta
    C_cl = spec.C + D @ theta
    Ch_cl = Ch + Dh @ theta_bar
    stoch = linops.stochastic_abscissa(A_cl, C_cl)

    def fail(reason):
        return StabilizerCertificate(
            False, None, None, -np.inf, -np.inf, hurwitz, stoch, reason
        )

    if hurwitz >= -EPS_MARGIN:
        return fail("mean_system_unstable")
    try:
        P0bar = linops.solve_lyapunov(A_mean, eye)
    except SingularLyapunov:
        return fail("mean_system_unstable")
    mbar = linops.min_eig(P0bar)
    if mbar <= 1e-9 * (1.0 + np.linalg.norm(P0bar)):
        return fail("certificate_not_positive")

    if stoch >= -EPS_MARGIN:
        return fail("variance_system_unstable")
    try:
        P0 = linops.solve_stochastic_lyapunov(A_cl, C_cl, eye + Ch_cl @ P0bar @ Ch_cl.T)
    except SingularOperator:
        return fail("variance_system_unstable")
    m0 = linops.min_eig(P0)
    if m0 <= 1e-9 * (1.0 + np.linalg.norm(P0)):
        return fail("certificate_not_positive")

    return StabilizerCertificate(True, P0, P0bar, m0, mbar, hurwitz, stoch, "none")


def check_stabilizer_strategy(spec, strategy: FeedbackStrategy) -> StabilizerCertificate:
    return check_stabilizer(spec, strategy.theta, strategy.theta_bar)


def check_uncontrolled_stability(spec) -> StabilizerCertificate:
    """Stability certificate for the uncontrolled system [A, Abar, C, Cbar]."""
    z = np.zeros((spec.m, spec.n))
    return check_stabilizer(spec, z, z)
