"""Preconditioned conjugate gradients or a sparse factorisation, wrapped in iterative refinement."""

from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class NotSPDError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Raised when the target residual is not met.

    Carries the best iterate and its residual, plus the rounding floor
    estimate of :func:`residual_floor` at that iterate.
    """

    def __init__(self, message, best_residual, solution=None, floor=None, iterations=0, sweeps=0):
        super().__init__(message)
        self.best_residual = best_residual
        self.solution = solution
        self.floor = floor
        self.iterations = iterations
        self.sweeps = sweeps


@dataclass
class SolveReport:
    solution: np.ndarray
    residual: float  # final ||b - A x|| / ||b||
    iterations: int  # total CG iterations over all sweeps
    sweeps: int


def residual_floor(A, x, b):
    """Rounding level of ``||b - A x|| / ||b||``: eps ||(|A| |x|)|| / ||b||.

    ``eps`` is the machine epsilon of ``x``'s dtype. No iterate stored in
    that precision can be trusted to reach a relative residual much below
    this value, whatever the solver.
    """
    A = sp.csr_matrix(A)
    nb = np.linalg.norm(np.asarray(b, dtype=float))
    if nb == 0:
        return 0.0
    eps = np.finfo(np.result_type(x, float)).eps
    return float(eps * np.linalg.norm(abs(A) @ np.abs(np.asarray(x, dtype=float))) / nb)


def jacobi_preconditioner(A):
    d = A.diagonal()
    if np.any(d <= 0):
        raise NotSPDError("matrix has a non-positive diagonal entry")
    inv = 1.0 / d
    return lambda r: inv * r


def block_jacobi_preconditioner(A, block):
    """Inverse of the block diagonal with consecutive ``block``-sized blocks."""
    n = A.shape[0]
    if n % block:
        raise ValueError("matrix size is not a multiple of the block size")
    d = A.diagonal()
    if np.any(d <= 0):
        raise NotSPDError("matrix has a non-positive diagonal entry")
    nb = n // block
    bsr = sp.bsr_matrix(A, blocksize=(block, block))
    bsr.sort_indices()
    brow = np.repeat(np.arange(nb), np.diff(bsr.indptr))
    on_diag = bsr.indices == brow
    blocks = np.zeros((nb, block, block))
    blocks[brow[on_diag]] = bsr.data[on_diag]
    try:
        chol = np.linalg.cholesky(blocks)
    except np.linalg.LinAlgError:
        raise NotSPDError("a diagonal block is not positive definite") from None
    inv = np.linalg.inv(chol)
    binv = np.einsum("bki,bkj->bij", inv, inv)

    def apply(r):
        return np.matmul(binv, r.reshape(nb, block, 1)).ravel()

    return apply


def direct_factor(A):
    """Sparse LU with a symmetric fill-reducing ordering and diagonal pivots.

    With symmetric pivoting the diagonal of ``U`` holds the pivots of an
    LDL^T factorisation, so their signs detect a matrix that is not SPD.
    """
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as err:  # exactly singular
        raise NotSPDError(f"factorisation failed: {err}") from None
    if np.any(lu.U.diagonal() <= 0):
        raise NotSPDError("factorisation met a non-positive pivot")
    return lu


def pcg(A, b, precond, tol, max_iter, x0=None):
    """Plain PCG; returns (x, iterations, relative residual of the recursion)."""
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x if x0 is not None else b.copy()
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros_like(b), 0, 0.0
    z = precond(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise NotSPDError("non-positive curvature p^T A p encountered")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / nb
        if res <= tol:
            return x, it, res
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, max_iter, np.linalg.norm(r) / nb


def _norm(v):
    return float(np.sqrt(v @ v))


def solve_spd(system, tol=1e-10, max_iter=200_000, max_sweeps=5, preconditioner="jacobi", block=None,
              precision="double"):
    """Solve ``A x = b`` to relative residual ``tol``.

    Each refinement sweep solves the correction equation ``A d = b - A x``,
    by PCG or, with ``preconditioner="direct"``, by one back substitution
    through a sparse factorisation; the true residual is then recomputed
    from the stored matrix.

    With ``precision="extended"`` the iterate and the residual are carried
    in ``numpy.longdouble`` while corrections are still computed in double
    precision. This is classical mixed-precision refinement: it lowers the
    rounding floor of the residual by the ratio of the two machine epsilons,
    which matters for the fourth-order systems whose double-precision floor
    lies above 1e-10 on fine meshes. The returned solution then has dtype
    ``longdouble``.

    ``system`` is a :class:`curveddg.assembly.SparseSystem` or an ``(A, b)`` pair.
    """
    if isinstance(system, tuple):
        A, b = system
    else:
        A, b = system.matrix, system.rhs
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if not 0 < tol <= 1e-4:
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol}")
    if precision not in ("double", "extended"):
        raise ValueError(f"precision must be 'double' or 'extended', got {precision!r}")
    op = A
    lu = None
    if preconditioner == "direct":
        lu = direct_factor(A)
    elif preconditioner == "jacobi":
        M = jacobi_preconditioner(A)
    elif preconditioner == "block":
        M = block_jacobi_preconditioner(A, block)
        # element-blocked storage speeds up the Krylov products; true
        # residuals below always use the CSR matrix as stored
        op = sp.bsr_matrix(A, blocksize=(block, block))
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    work = np.longdouble if precision == "extended" else float
    A_w = A.astype(work) if work is not float else A
    b_w = b.astype(work)
    nb = _norm(b_w)
    x = np.zeros_like(b_w)
    if nb == 0:
        return SolveReport(x, 0.0, 0, 0)
    total = 0
    best = 1.0  # the zero start has relative residual one
    best_x = x
    prev = 1.0
    sweep = 0
    abs_a = abs(A)
    eps = float(np.finfo(work).eps)
    r = b_w
    for sweep in range(1, max_sweeps + 1):
        r64 = r.astype(float)
        # inner tolerance relative to the current residual
        inner = min(1e-4, max(tol * nb / _norm(r64) * 0.5, 1e-15))
        if lu is not None:
            d, its = lu.solve(r64), 1
        else:
            d, its, _ = pcg(op, r64, M, inner, max_iter - total)
        total += its
        x = x + d
        r = b_w - A_w @ x
        res = _norm(r) / nb
        log.debug("sweep %d: %d iterations, residual %.3e", sweep, its, res)
        if res < best:
            best, best_x = res, x
        if res <= tol:
            return SolveReport(x, res, total, sweep)
        if total >= max_iter:
            break
        if res > 0.5 * prev or res <= 0.1 * eps * _norm(abs_a @ np.abs(x.astype(float))) / nb:
            # stagnation, or already at the rounding level of the residual, which
            # in practice sits about a decade under the worst-case bound
            break
        prev = res
    floor = residual_floor(A, best_x, b)
    raise ConvergenceError(
        f"no convergence to {tol:g}: best residual {best:.3e} (rounding floor ~{floor:.1e})",
        best, best_x, floor, total, sweep,
    )
