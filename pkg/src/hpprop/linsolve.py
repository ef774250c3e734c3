"""Linear solve for the illumination subproblem.

The update divides the guarded quotient rhs by the operator
(lambda_I + 1) * Id + mu_I * L, with L the Neumann Laplacian from the
operators module. The system is symmetric positive definite, solved by
Jacobi-preconditioned conjugate gradient; a dense direct solve is kept
as the test oracle.
"""

from dataclasses import dataclass

import numpy as np

from .operators import laplacian

DENSE_PIXEL_LIMIT = 4096

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 500


class ConvergenceError(RuntimeError):
    """CG failed to reach the requested residual within max_iter."""

    def __init__(self, residual, max_iter):
        super().__init__(
            f"CG did not converge in {max_iter} iterations "
            f"(relative residual {residual:.3e})"
        )
        self.residual = residual


@dataclass(frozen=True)
class IlluminationSystem:
    """rhs and coefficients of ((lambda_I+1)*Id + mu_I*L) I = rhs."""

    rhs: np.ndarray
    lambda_I: float
    mu_I: float

    def __post_init__(self):
        rhs = np.asarray(self.rhs, dtype=np.float64)
        if rhs.ndim != 2:
            raise ValueError(f"rhs must be 2D, got shape {rhs.shape}")
        if not np.all(np.isfinite(rhs)):
            raise ValueError("rhs contains NaN/Inf")
        if self.lambda_I < 0 or self.mu_I < 0:
            raise ValueError("lambda_I and mu_I must be nonnegative")
        object.__setattr__(self, "rhs", rhs)

    def apply(self, x):
        out = (self.lambda_I + 1.0) * x
        if self.mu_I != 0.0:
            out = out + self.mu_I * laplacian(x)
        return out

    def diagonal(self):
        """Diagonal of the system matrix (for Jacobi preconditioning)."""
        h, w = self.rhs.shape
        deg = np.zeros((h, w))
        deg += (np.arange(w) > 0) + (np.arange(w) < w - 1)
        deg += ((np.arange(h) > 0) + (np.arange(h) < h - 1))[:, None]
        return (self.lambda_I + 1.0) + self.mu_I * deg


def cg_solve(sys, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Preconditioned CG. Returns (solution, iterations, relative residual)."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    b = sys.rhs
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    m_inv = 1.0 / sys.diagonal()
    x = np.zeros_like(b)
    r = b.copy()
    z = m_inv * r
    p = z.copy()
    rz = float(np.sum(r * z))
    for it in range(1, max_iter + 1):
        ap = sys.apply(p)
        alpha = rz / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, res
        z = m_inv * r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(np.linalg.norm(r) / bnorm, max_iter)


def solve_illumination(sys, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve the illumination system; see cg_solve for failure semantics."""
    x, _, _ = cg_solve(sys, tol=tol, max_iter=max_iter)
    return x


def dense_system_matrix(sys):
    """Assemble the (HW)x(HW) matrix directly from the 5-point stencil."""
    h, w = sys.rhs.shape
    n = h * w
    if n > DENSE_PIXEL_LIMIT:
        raise ValueError(f"dense assembly refused for {n} > {DENSE_PIXEL_LIMIT} pixels")
    lam, mu = sys.lambda_I, sys.mu_I
    A = np.zeros((n, n))
    for i in range(h):
        for j in range(w):
            k = i * w + j
            deg = (j > 0) + (j < w - 1) + (i > 0) + (i < h - 1)
            A[k, k] = (lam + 1.0) + mu * deg
            if j > 0:
                A[k, k - 1] = -mu
            if j < w - 1:
                A[k, k + 1] = -mu
            if i > 0:
                A[k, k - w] = -mu
            if i < h - 1:
                A[k, k + w] = -mu
    return A


def dense_solve_oracle(sys):
    """Direct dense factorization solve; test oracle for cg_solve."""
    A = dense_system_matrix(sys)
    x = np.linalg.solve(A, sys.rhs.ravel())
    return x.reshape(sys.rhs.shape)
