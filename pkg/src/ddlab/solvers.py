"""Linear-algebra kernels: sparse LU, full GMRES and a shift-invert
generalized eigensolver (with a dense QZ reference)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PIVOT_TOL = 1e-14
RESIDUAL_GAP = 1e-2  # restart GMRES once the recursive residual is this far below the true one


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


# ----------------------------------------------------------------------
# direct solves


def as_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class Factorization:
    """LU factors of the row/column equilibrated matrix ``diag(r) A diag(c)``."""

    lu: object
    row_scale: np.ndarray
    col_scale: np.ndarray

    @property
    def shape(self):
        return self.lu.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            return self.col_scale * self.lu.solve(self.row_scale * b)
        return self.col_scale[:, None] * self.lu.solve(self.row_scale[:, None] * b)


def _equilibrate(A: sp.csr_matrix):
    absA = abs(A)
    rmax = np.asarray(absA.max(axis=1).todense()).ravel()
    if np.any(rmax == 0):
        raise SingularMatrixError("matrix has an empty row", int(np.flatnonzero(rmax == 0)[0]))
    r = 1.0 / rmax
    cmax = np.asarray((sp.diags(r) @ absA).max(axis=0).todense()).ravel()
    if np.any(cmax == 0):
        raise SingularMatrixError("matrix has an empty column", int(np.flatnonzero(cmax == 0)[0]))
    return r, 1.0 / cmax


def factorize(A) -> Factorization:
    """Sparse LU with partial pivoting after equilibration.

    Raises :class:`SingularMatrixError` with the offending column index when
    a pivot of the scaled matrix falls below ``PIVOT_TOL``.
    """
    A = as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    r, c = _equilibrate(A)
    As = (sp.diags(r) @ A @ sp.diags(c)).tocsc()
    try:
        lu = spla.splu(As, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularMatrixError(f"LU breakdown: {exc}") from exc
    piv = np.abs(lu.U.diagonal())
    bad = np.flatnonzero(piv < PIVOT_TOL)
    if len(bad):
        col = int(lu.perm_c[bad[0]])
        raise SingularMatrixError(f"numerically singular: pivot {piv[bad[0]]:.3e} at column {col}", col)
    return Factorization(lu, r, c)


# ----------------------------------------------------------------------
# GMRES


@dataclass
class KrylovTrace:
    residuals: list = field(default_factory=list)  # residual norm per iteration (index 0: initial)
    errors: list = field(default_factory=list)  # monitor error per iteration or None
    converged: bool = False
    iterations: int = 0
    maxit: int = 0
    stop_reason: str = ""  # "converged", "maxit" or "breakdown"

    def rows(self):
        for i, (r, e) in enumerate(zip(self.residuals, self.errors)):
            yield i, r, e

    @property
    def label(self) -> str:
        """Iteration count, or ``>maxit`` when the run did not converge."""
        return str(self.iterations) if self.converged else f">{self.maxit or self.iterations}"


class ResidualMonitor:
    """Stops when ||b - A x_m|| <= tol * ||b - A x_0||."""

    needs_iterate = False

    def __init__(self, tol: float = 1e-6):
        self.tol = tol
        self._r0 = None

    def start(self, x0, r0_norm):
        self._r0 = r0_norm

    def __call__(self, x, residual_norm):
        rel = residual_norm / self._r0 if self._r0 > 0 else 0.0
        return rel <= self.tol, rel


class ErrorMonitor:
    """Stops when ||U - x_m|| / ||U - x_0|| < tol for a known solution U.

    With ``system=(A, b)`` and ``residual_tol``, stopping also requires
    ``||b - A x_m|| / ||b|| < residual_tol`` on the unscaled system; on
    badly conditioned systems the error test alone does not imply it.
    """

    needs_iterate = True

    def __init__(self, reference: np.ndarray, tol: float = 1e-6, system=None, residual_tol: Optional[float] = None):
        self.reference = np.asarray(reference, dtype=float)
        self.tol = tol
        self.system = system
        self.residual_tol = residual_tol
        self._e0 = None

    def start(self, x0, r0_norm):
        self._e0 = np.linalg.norm(self.reference - x0)

    def __call__(self, x, residual_norm):
        err = np.linalg.norm(self.reference - x)
        rel = err / self._e0 if self._e0 > 0 else 0.0
        done = rel < self.tol
        if done and self.system is not None and self.residual_tol is not None:
            A, b = self.system
            bn = np.linalg.norm(b)
            res = np.linalg.norm(b - A @ x)
            done = (res / bn if bn > 0 else res) < self.residual_tol
        return done, rel


def gmres(
    apply_A: Callable,
    apply_M_inv: Optional[Callable],
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    monitor=None,
    maxit: int = 1000,
):
    """Right-preconditioned GMRES, restarted only as a rounding safeguard.

    Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass; the
    least-squares problem is updated with Givens rotations. In exact
    arithmetic the recursive residual equals the true one. When the monitor
    needs every iterate, the true residual is computed too, and a cycle is
    restarted from the current iterate once the recursive residual falls below
    ``RESIDUAL_GAP`` times the true one (or on breakdown), since the Krylov
    basis then no longer carries information. Iterations are counted across
    cycles and the trace records the true residual whenever it is known.
    Returns ``(x, trace)``.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    M = apply_M_inv if apply_M_inv is not None else (lambda v: v)
    monitor = monitor if monitor is not None else ResidualMonitor()
    r = b - apply_A(x)
    beta = np.linalg.norm(r)
    monitor.start(x, beta)
    trace = KrylovTrace(maxit=maxit)
    done, err = monitor(x, beta) if beta > 0 else (True, 0.0)
    trace.residuals.append(beta)
    trace.errors.append(err)
    if done:
        trace.converged, trace.stop_reason = True, "converged"
        return x, trace
    safeguard = monitor.needs_iterate

    while trace.iterations < maxit:
        xs = x
        m = min(maxit - trace.iterations, n)
        cap = min(m, 64)
        V = np.zeros((cap + 1, n))
        Z = np.zeros((cap, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        restart = False
        for j in range(m):
            if j == cap:  # grow the basis storage geometrically
                cap = min(m, 2 * cap)
                V = np.vstack([V, np.zeros((cap + 1 - len(V), n))])
                Z = np.vstack([Z, np.zeros((cap - len(Z), n))])
            Z[j] = M(V[j])
            w = apply_A(Z[j])
            for _ in range(2):
                h = V[: j + 1] @ w
                w = w - h @ V[: j + 1]
                H[: j + 1, j] += h
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * np.abs(H[: j + 2, j]).max()
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                a, c = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * a + sn[i] * c
                H[i + 1, j] = -sn[i] * a + cs[i] * c
            rho = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = (1.0, 0.0) if rho == 0 else (H[j, j] / rho, H[j + 1, j] / rho)
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            res = abs(g[j + 1])

            def iterate():
                y = sla.solve_triangular(H[: j + 1, : j + 1], g[: j + 1])
                return xs + y @ Z[: j + 1]

            if safeguard or breakdown or j == m - 1:
                x = iterate()
            if safeguard:
                r = b - apply_A(x)
                true = np.linalg.norm(r)
                restart = breakdown or res < RESIDUAL_GAP * true
                res = true
            done, err = monitor(x, res)
            trace.residuals.append(res)
            trace.errors.append(err)
            trace.iterations += 1
            if done:
                if not safeguard:
                    x = iterate()
                trace.converged, trace.stop_reason = True, "converged"
                return x, trace
            if restart:
                beta = res
                break
            if breakdown:
                trace.stop_reason = "breakdown"
                return x, trace
        if not restart:
            break
    trace.converged, trace.stop_reason = False, "maxit"
    return x, trace


def row_scaling(A) -> np.ndarray:
    """1 / max_j |a_ij| per row (1 for empty rows)."""
    m = abs(as_csr(A)).max(axis=1).toarray().ravel()
    return 1.0 / np.where(m > 0, m, 1.0)


def preconditioned_solve(A, b: np.ndarray, apply_M_inv: Optional[Callable] = None, x0=None, monitor=None,
                         maxit: int = 1000, equilibrate: bool = True):
    """GMRES on ``A x = b`` with the rows rescaled by ``row_scaling(A)``.

    The unknowns are untouched, so an error monitor sees the same iterates;
    only the residual norm GMRES minimizes is weighted. Equations of very
    different magnitude (velocity versus nearly incompressible pressure rows,
    or steel versus rubber) otherwise hide whole blocks from the Krylov
    minimization.
    """
    A = as_csr(A)
    s = row_scaling(A) if equilibrate else np.ones(A.shape[0])
    As = sp.diags(s) @ A
    # M approximates A^{-1}, so M S^{-1} approximates (S A)^{-1}
    Ms = None if apply_M_inv is None else (lambda v: apply_M_inv(v / s))
    return gmres(lambda v: As @ v, Ms, s * np.asarray(b, dtype=float), x0, monitor, maxit)


# ----------------------------------------------------------------------
# generalized eigenproblems


@dataclass(frozen=True)
class EigenPair:
    value: complex
    vector: np.ndarray


def _order(values):
    return np.lexsort((values.imag, values.real, np.abs(values)))


def _pencil_scaling(A, B):
    d = np.asarray(abs(A).max(axis=1).todense()).ravel() + np.asarray(abs(B).max(axis=1).todense()).ravel()
    d[d == 0] = 1.0
    return 1.0 / np.sqrt(d)


def generalized_eigs(A_tilde, B, count: int, shift: Optional[float] = None, dense_limit: int = 0):
    """``count`` eigenpairs of ``A_tilde v = lambda B v`` of smallest |lambda|.

    Shift-invert Arnoldi on ``(A_tilde - sigma B)^{-1} B`` after a symmetric
    diagonal scaling of the pencil. ``sigma`` defaults to ``-1e-6`` times the
    ratio of the scaled matrix norms. Vectors have unit Euclidean norm.
    Problems of dimension <= ``dense_limit`` (or too small for Arnoldi) use
    the dense QZ route.
    """
    A = as_csr(A_tilde)
    Bm = as_csr(B)
    n = A.shape[0]
    if Bm.shape != A.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A_tilde and B must be square with matching dimensions")
    if count < 1:
        raise ValueError("count must be at least 1")
    count = min(count, n)
    if n <= max(dense_limit, count + 3):
        return dense_generalized_eigs(A, Bm, count)
    s = _pencil_scaling(A, Bm)
    S = sp.diags(s)
    As, Bs = (S @ A @ S).tocsc(), (S @ Bm @ S).tocsc()
    scale = spla.norm(As, 1) / max(spla.norm(Bs, 1), 1e-300)
    sigma = -1e-6 * scale if shift is None else shift
    lu = None
    for attempt in range(3):
        try:
            lu = factorize(As - sigma * Bs)
            break
        except SingularMatrixError:
            sigma = sigma * 10.0 + (-1e-3 * scale if sigma == 0 else 0.0)
    if lu is None:
        raise SingularMatrixError("shift-invert factorization failed for all shifts")
    op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(Bs @ x), dtype=float)
    k = min(n - 2, count + 4)
    ncv = min(n, max(2 * k + 1, 30))
    v0 = np.random.default_rng(0).standard_normal(n)
    mu, W = spla.eigs(op, k=k, which="LM", ncv=ncv, tol=0.0, v0=v0, maxiter=20 * n)
    keep = np.abs(mu) > 1e-300
    lam = sigma + 1.0 / mu[keep]
    W = W[:, keep]
    order = _order(lam)[:count]
    out = []
    for i in order:
        v = s * W[:, i]
        v = v / np.linalg.norm(v)
        lam_i = lam[i]
        if abs(lam_i.imag) < 1e-12 * max(abs(lam_i), 1e-300):
            v = _real_vector(v)
            lam_i = lam_i.real
        out.append(EigenPair(lam_i, v))
    return out


def _real_vector(v):
    """Rotate a complex vector with (numerically) real direction to a real one."""
    k = np.argmax(np.abs(v))
    v = v * np.exp(-1j * np.angle(v[k]))
    r = v.real
    return r / np.linalg.norm(r)


def dense_generalized_eigs(A_tilde, B, count: int):
    """Reference solver: dense QZ, finite eigenvalues only.

    The pencil is balanced by the same symmetric diagonal scaling as the
    shift-invert route; without it, blocks of very different magnitude
    (nearly incompressible materials) cost QZ several digits.
    """
    A, Bm = as_csr(A_tilde), as_csr(B)
    s = _pencil_scaling(A, Bm)
    S = sp.diags(s)
    w, V = sla.eig((S @ A @ S).toarray(), (S @ Bm @ S).toarray())
    finite = np.isfinite(w)
    w, V = w[finite], V[:, finite]
    order = _order(w)[:count]
    out = []
    for i in order:
        v = s * V[:, i]
        v = v / np.linalg.norm(v)
        lam_i = w[i]
        if abs(lam_i.imag) < 1e-12 * max(abs(lam_i), 1e-300):
            v = _real_vector(v)
            lam_i = lam_i.real
        out.append(EigenPair(lam_i, v))
    return out


def eigen_residual(A_tilde, B, pair: EigenPair) -> float:
    """||A v - lambda B v|| / ((||A|| + |lambda| ||B||) ||v||) with 1-norms of the matrices."""
    A, Bm = as_csr(A_tilde), as_csr(B)
    v = pair.vector
    r = A @ v - pair.value * (Bm @ v)
    scale = (spla.norm(A, 1) + abs(pair.value) * spla.norm(Bm, 1)) * np.linalg.norm(v)
    return float(np.linalg.norm(r) / scale)
