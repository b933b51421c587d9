"""Dense matrix machinery shared by the Riccati solvers and certificates.

Small dense problems only (n up to a few dozen), so the Lyapunov-type
equations are solved by explicit Kronecker vectorization instead of a
Bartels-Stewart factorization, and the pseudo-inverse is a plain SVD with a
relative cutoff.  Column-major (Fortran) vectorization is used throughout:
vec(A X B) = (B^T kron A) vec(X).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, SingularLyapunov, SingularOperator, UnstableOperator

__all__ = [
    "PinvResult",
    "pinv",
    "range_contains",
    "solve_lyapunov",
    "solve_stochastic_lyapunov",
    "spectral_abscissa",
    "stochastic_abscissa",
    "min_eig",
    "max_eig",
]


@dataclass(frozen=True)
class PinvResult:
    """SVD pseudo-inverse together with its rank decision.

    The four Penrose identities hold for ``pinv`` up to roughly
    ``1e-8 * norm`` (checked by the test suite on random low-rank inputs).
    """

    pinv: np.ndarray
    rank: int
    singular_values: np.ndarray
    tol_used: float


def pinv(M, rel_tol: float = 1e-10) -> PinvResult:
    """Moore-Penrose pseudo-inverse of ``M`` (p x q).

    Singular values below ``rel_tol * sigma_max`` are treated as exact
    zeros; for a well-conditioned square matrix the result equals the
    ordinary inverse.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NonFinite("pseudo-inverse of a matrix with non-finite entries")
    if M.size == 0:
        return PinvResult(M.T.copy(), 0, np.zeros(0), 0.0)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    cutoff = rel_tol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    inv_s = np.zeros_like(s)
    inv_s[:rank] = 1.0 / s[:rank]
    return PinvResult(Vt.T @ (inv_s[:, None] * U.T), rank, s, cutoff)


def range_contains(Sigma, V, tol: float = 1e-8) -> tuple[bool, float]:
    """Whether every column of ``V`` lies in the column space of ``Sigma``.

    Returns ``(ok, residual)`` with ``residual = ||(I - Sigma Sigma^+) V||_F``
    and ``ok`` true iff ``residual <= tol * max(1, ||V||_F)``.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if Sigma.shape[0] != Sigma.shape[1] or Sigma.shape[0] != V.shape[0]:
        raise ValueError(f"incompatible shapes {Sigma.shape} and {V.shape}")
    if Sigma.size and np.max(np.abs(Sigma - Sigma.T)) > 1e-6 * (1.0 + np.max(np.abs(Sigma))):
        raise ValueError("range test expects a symmetric matrix")
    Sp = pinv(Sigma).pinv
    residual = float(np.linalg.norm(V - Sigma @ (Sp @ V)))
    return residual <= tol * max(1.0, float(np.linalg.norm(V))), residual


def _sym(X):
    return 0.5 * (X + X.T)


def solve_lyapunov(F, W) -> np.ndarray:
    """Solve ``F X + X F^T = -W`` for symmetric ``X``.

    Kronecker-vectorized dense solve; raises :class:`SingularLyapunov`
    when the residual reveals an (almost) singular operator, i.e. when F
    and -F share an eigenvalue pair.
    """
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    n = F.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, F) + np.kron(F, eye)
    try:
        x = np.linalg.solve(K, -W.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularLyapunov(str(exc)) from exc
    X = _sym(x.reshape((n, n), order="F"))
    resid = np.linalg.norm(F @ X + X @ F.T + W)
    if not np.isfinite(resid) or resid > 1e-10 * (1.0 + np.linalg.norm(W)):
        raise SingularLyapunov(f"ill-conditioned Lyapunov solve, residual {resid:.3e}")
    return X


def solve_stochastic_lyapunov(F, G, W, require_stable: bool = False) -> np.ndarray:
    """Solve ``F X + X F^T + G X G^T = -W`` for symmetric ``X``.

    With ``require_stable`` the n^2 x n^2 operator matrix must have
    spectral abscissa < 0 (so a positive-definite W yields a
    positive-definite X); otherwise :class:`UnstableOperator` is raised.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    W = np.asarray(W, dtype=float)
    n = F.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, F) + np.kron(F, eye) + np.kron(G, G)
    if require_stable and spectral_abscissa(K) >= 0.0:
        raise UnstableOperator("Lyapunov operator is not stable")
    try:
        x = np.linalg.solve(K, -W.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularOperator(str(exc)) from exc
    X = _sym(x.reshape((n, n), order="F"))
    resid = np.linalg.norm(F @ X + X @ F.T + G @ X @ G.T + W)
    if not np.isfinite(resid) or resid > 1e-10 * (1.0 + np.linalg.norm(W)):
        raise SingularOperator(f"ill-conditioned solve, residual {resid:.3e}")
    return X


def spectral_abscissa(F) -> float:
    """Largest real part over the eigenvalues of a square matrix."""
    F = np.asarray(F, dtype=float)
    if F.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(F).real))


def stochastic_abscissa(F, G) -> float:
    """Spectral abscissa of X -> F X + X F^T + G X G^T (vectorized form)."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    n = F.shape[0]
    eye = np.eye(n)
    return spectral_abscissa(np.kron(eye, F) + np.kron(F, eye) + np.kron(G, G))


def min_eig(M) -> float:
    """Smallest eigenvalue of a (symmetrized) matrix; +inf for empty."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.inf
    return float(np.min(np.linalg.eigvalsh(_sym(M))))


def max_eig(M) -> float:
    """Largest eigenvalue of a (symmetrized) matrix; -inf for empty."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvalsh(_sym(M))))
