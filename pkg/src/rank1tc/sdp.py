"""Trace-constrained semidefinite relaxation of the biquadratic objective.

The relaxation is

    minimize    <B, X>
    subject to  trace X = 1,  X >= 0 (PSD),  X in K,

where K is the Kronecker-symmetric subspace: matrices of side n1*n2 that are
symmetric, have symmetric n2 x n2 blocks, and are symmetric under block
transposition.  Every (a a^T) (x) (b b^T) lies in K, so the optimal value is a
lower bound for min f(a,b) over unit vectors.

The solver is a consensus splitting scheme alternating two exact projections
(PSD cone by symmetric eigendecomposition; the affine set {X in K, trace X=1}
by blockwise averaging plus a trace shift) with the linear objective folded
into the affine step.  No external conic dependency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .objective import QuadForm

NEG_INF = float("-inf")


@dataclass(frozen=True)
class KronSymMatrix:
    """A symmetric matrix of side n1*n2 lying in the Kronecker-symmetric
    subspace (span of E_ij (x) E_kl)."""

    n1: int
    n2: int
    M: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.float64)
        N = self.n1 * self.n2
        if M.shape != (N, N):
            raise ValueError(f"matrix must have side {N}, got {M.shape}")
        scale = max(1.0, float(np.abs(M).max()))
        if np.abs(M - kron_sym_project(M, self.n1, self.n2)).max() > 1e-8 * scale:
            raise ValueError("matrix is not Kronecker-symmetric")
        M.flags.writeable = False
        object.__setattr__(self, "M", M)

    @property
    def side(self) -> int:
        return self.n1 * self.n2

    def block(self, i: int, j: int) -> np.ndarray:
        """1-based block B_ij of side n2."""
        n2 = self.n2
        return self.M[(i - 1) * n2:i * n2, (j - 1) * n2:j * n2]


@dataclass(frozen=True)
class SdpSolution:
    """Result of one relaxation solve.

    ``cert_lb`` is a certified lower bound on the biquadratic minimum f*
    (``-inf`` when no certificate was produced).  ``residuals`` holds the
    final (primal, dual, psd-violation) measures.  ``objective_scale`` records
    the Frobenius rescaling of B applied before solving.
    """

    X: KronSymMatrix
    pstar: float
    cert_lb: float
    residuals: tuple[float, float, float]
    iters: int
    converged: bool
    objective_scale: float = 1.0


def kron_sym_project(M: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Orthogonal projection of a square matrix onto the Kronecker-symmetric
    subspace: blockwise N_ij = (M_ij + M_ij^T + M_ji + M_ji^T) / 4."""
    M4 = M.reshape(n1, n2, n1, n2)
    P = M4 + M4.transpose(0, 3, 2, 1) + M4.transpose(2, 1, 0, 3) + M4.transpose(2, 3, 0, 1)
    return 0.25 * P.reshape(n1 * n2, n1 * n2)


def project_kron_sym(M: np.ndarray, n1: int, n2: int) -> KronSymMatrix:
    """Wrapped :func:`kron_sym_project` returning a validated KronSymMatrix."""
    M = np.asarray(M, dtype=np.float64)
    return KronSymMatrix(n1=n1, n2=n2, M=kron_sym_project(M, n1, n2))


def strictly_feasible_point(n1: int, n2: int) -> KronSymMatrix:
    """The interior feasible point I/(n1*n2): trace 1, positive definite,
    inside the subspace.  Also the solver's initial iterate."""
    N = n1 * n2
    return KronSymMatrix(n1=n1, n2=n2, M=np.eye(N) / N)


def _affine_project(M: np.ndarray, n1: int, n2: int) -> np.ndarray:
    # Projection onto {X in K, trace X = 1}.  The identity lies in K and the
    # subspace projection preserves the trace, so a diagonal shift after the
    # subspace projection is exact.
    P = kron_sym_project(M, n1, n2)
    N = n1 * n2
    shift = (1.0 - np.trace(P)) / N
    P[np.diag_indices(N)] += shift
    return P


def _psd_project(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    if w[0] >= 0.0:
        return M
    pos = w > 0.0
    if not np.any(pos):
        return np.zeros_like(M)
    R = (V[:, pos] * w[pos]) @ V[:, pos].T
    return 0.5 * (R + R.T)


def solve_relaxation(form: QuadForm, tol: float = 1e-8, max_iters: int = 200000,
                     over_relaxation: float = 1.6, rho: float = 1.0,
                     log_csv: Optional[str] = None) -> SdpSolution:
    """Solve the trace-constrained relaxation by consensus splitting.

    The objective matrix is rescaled by 1/||B||_F for conditioning and the
    optimal value unscaled afterwards.  Over-relaxation (default 1.6) is
    dropped to 1.0 if the combined residual stalls, which happens on problems
    with degenerate optimal faces.  The penalty parameter adapts whenever the
    primal/dual residual ratio exceeds 10.  Deterministic: fixed reduction
    order, no randomness.

    Non-convergence is reported through ``converged=False`` with the final
    residuals, never silently.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n1, n2 = form.n1, form.n2
    N = n1 * n2
    scale = float(np.linalg.norm(form.B, "fro"))
    scale = scale if scale > 0 else 1.0
    Bn = form.B / scale

    X = np.eye(N) / N
    Z = X.copy()
    U = np.zeros((N, N))
    alpha = over_relaxation
    primal = dual = math.inf
    best_combined = math.inf
    best_iter = 0
    stall_window = 1000
    it = 0
    converged = False
    log_rows: list[str] = []

    for it in range(1, max_iters + 1):
        X = _affine_project(Z - U - Bn / rho, n1, n2)
        Xh = alpha * X + (1.0 - alpha) * Z
        Z_new = _psd_project(Xh + U)
        U += Xh - Z_new
        primal = float(np.linalg.norm(X - Z_new))
        dual = rho * float(np.linalg.norm(Z_new - Z))
        Z = Z_new
        combined = max(primal, dual) / max(1.0, float(np.linalg.norm(X)))
        if log_csv is not None:
            log_rows.append(f"{it},{scale * float(np.sum(Bn * X)):.17g},{primal:.6e},{dual:.6e}")
        if combined <= tol:
            converged = True
            break
        if combined < 0.9 * best_combined:
            best_combined = combined
            best_iter = it
        elif it - best_iter > stall_window and alpha > 1.0:
            # over-relaxed iterations can cycle near degenerate optimal
            # faces; plain alternation does not
            alpha = 1.0
            best_iter = it
        if it % 10 == 0:
            if primal > 10.0 * dual:
                rho *= 2.0
                U *= 0.5
            elif dual > 10.0 * primal:
                rho *= 0.5
                U *= 2.0

    if log_csv is not None:
        with open(log_csv, "w", encoding="utf-8") as fh:
            fh.write("iter,objective,primal_res,dual_res\n")
            fh.write("\n".join(log_rows) + "\n")

    pstar = scale * float(np.sum(Bn * X))
    psd_violation = max(0.0, -float(np.linalg.eigvalsh(X)[0]))
    residuals = (primal, dual, psd_violation)

    cert_lb = NEG_INF
    if converged:
        # Assemble a dual certificate from the splitting multipliers: at
        # optimality S = -rho*U is PSD and S - B decomposes as N + t*I with
        # N orthogonal to the subspace; gamma = -t is the dual value.
        S = -rho * U
        S = 0.5 * (S + S.T)
        D = Bn - S
        mu = float(np.trace(D)) / N
        N_perp = D - kron_sym_project(D, n1, n2)
        cert_lb = scale * certify_lower_bound(
            QuadForm(n1=n1, n2=n2, B=Bn), mu, N_perp)

    return SdpSolution(
        X=KronSymMatrix(n1=n1, n2=n2, M=X),
        pstar=pstar,
        cert_lb=cert_lb,
        residuals=residuals,
        iters=it,
        converged=converged,
        objective_scale=scale,
    )


def certify_lower_bound(form: QuadForm, mu: float, N_perp: np.ndarray) -> float:
    """Certified lower bound on the biquadratic minimum f*.

    For any N orthogonal to the Kronecker-symmetric subspace,
    (a (x) b)^T N (a (x) b) = 0 for all a, b, so

        gamma = mu + min(0, lambda_min(B - mu*I - N))

    makes B - gamma*I - N PSD and hence f(a,b) >= gamma on the unit spheres,
    regardless of how (mu, N) were obtained.
    """
    N_perp = np.asarray(N_perp, dtype=np.float64)
    n1, n2 = form.n1, form.n2
    if N_perp.shape != form.B.shape:
        raise ValueError(f"multiplier matrix must have shape {form.B.shape}")
    residual = float(np.linalg.norm(kron_sym_project(N_perp, n1, n2)))
    if residual > 1e-9 * max(1.0, float(np.linalg.norm(N_perp))):
        raise ValueError("N is not orthogonal to the Kronecker-symmetric subspace")
    side = form.n1 * form.n2
    lam_min = float(np.linalg.eigvalsh(form.B - mu * np.eye(side) - N_perp)[0])
    return mu + min(0.0, lam_min)
