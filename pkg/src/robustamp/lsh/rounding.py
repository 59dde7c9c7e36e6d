"""Spectral rounding of the solved pseudoexpectation."""

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalDegeneracyError


def extract_second_moment(pe):
    """The symmetric matrix pE[v v^T] from a solved pseudoexpectation."""
    M = pe.second_moment_matrix()
    return 0.5 * (M + M.T)


def round_top_eigenvector(M):
    """Unit top eigenvector with a deterministic sign convention.

    The coordinate of largest magnitude is made positive; for repeated top
    eigenvalues the eigensolver's last column is used as-is.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise NumericalDegeneracyError("need a square matrix of dimension >= 1")
    try:
        w, V = np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        cond = float(np.abs(M).max())
        raise NumericalDegeneracyError(f"eigensolver failed (scale {cond})") from exc
    v = V[:, -1]
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    return v / np.linalg.norm(v)


def correlation(u, w):
    """Squared normalized inner product <u,w>^2 / (||u||^2 ||w||^2)."""
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    nu = float(u @ u)
    nw = float(w @ w)
    if nu == 0.0 or nw == 0.0:
        raise ValueError("correlation of a zero vector is undefined")
    return float(u @ w) ** 2 / (nu * nw)


@dataclass
class RecoveryResult:
    """Rounded solution of the feasibility program plus diagnostics."""

    v_lsh: np.ndarray
    top_eigenvalue: float
    trace: float
    correlation_with_reference: float
    solver_iterations: int
    max_violation: float
    solver_status: str


def recover(solve_result, reference=None):
    """Round a solved system to a unit vector (Alg. top-eigenvector step)."""
    pe = solve_result.pseudoexpectation
    M = extract_second_moment(pe)
    w = np.linalg.eigvalsh(M)
    v = round_top_eigenvector(M)
    corr = float("nan")
    if reference is not None:
        corr = correlation(v, reference)
    return RecoveryResult(
        v_lsh=v,
        top_eigenvalue=float(w[-1]),
        trace=float(np.trace(M)),
        correlation_with_reference=corr,
        solver_iterations=solve_result.iterations,
        max_violation=solve_result.pseudoexpectation.residual_report.max_violation,
        solver_status=solve_result.status,
    )
