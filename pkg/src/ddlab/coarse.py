"""GenEO coarse spaces and the two-level projected preconditioner."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .decomposition import Decomposition
from .discretization import Discretization, LinearSystem
from .schwarz import CoarseSpec, OneLevelPreconditioner
from .solvers import EigenPair, generalized_eigs

INDEPENDENCE_TOL = 1e-12


class CoarseSpaceError(ValueError):
    pass


@dataclass
class LocalSpectrum:
    """Eigenpairs of one subdomain, vectors padded to the full local dof set."""

    subdomain: int
    pairs: list
    excluded: np.ndarray  # local indices left out of the eigenproblem

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.pairs])


def geneo_pencil(disc: Discretization, decomposition: Decomposition, j: int, B_local: LinearSystem):
    """(A_tilde_j, B_j, kept local indices) for subdomain j.

    ``A_tilde_j`` is the local matrix with Neumann interface conditions; both
    matrices keep the global boundary conditions. Globally Dirichlet dofs are
    removed from the pencil, and so is the pressure augmentation dof unless
    it is active in both matrices (a subdomain covering the whole domain).
    """
    At = disc.assemble(decomposition.overlapped_elements[j], "neumann")
    dofs = decomposition.dof_sets[j]
    excluded = np.zeros(len(dofs), dtype=bool)
    excluded[np.isin(dofs, disc.dirichlet[0])] = True
    if disc.augmented and not (At.aug_active and B_local.aug_active):
        excluded[dofs == disc.aug_index] = True
    keep = np.flatnonzero(~excluded)
    return At.A[keep][:, keep], B_local.A[keep][:, keep], keep


def requested_count(spec: CoarseSpec) -> int:
    return spec.count if spec.selection == "fixed" else spec.max_count


def select_pairs(pairs: list, spec: CoarseSpec) -> list:
    """The eigenpairs a coarse spec uses, from a list ordered by |lambda|."""
    if spec.selection == "threshold":
        pairs = [p for p in pairs if abs(p.value) < spec.theta]
    return pairs[: requested_count(spec)]


def solve_geneo(disc: Discretization, decomposition: Decomposition, j: int, B_local: LinearSystem,
                spec: CoarseSpec, dense_limit: int = 0) -> LocalSpectrum:
    """Smallest-|lambda| eigenpairs of the GenEO pencil on subdomain j, as
    many as ``spec`` may select."""
    At, B, keep = geneo_pencil(disc, decomposition, j, B_local)
    n_local = len(decomposition.dof_sets[j])
    request = min(requested_count(spec), len(keep))
    pairs = []
    if request > 0:
        for p in generalized_eigs(At, B, request, shift=spec.shift, dense_limit=dense_limit):
            v = np.zeros(n_local, dtype=p.vector.dtype)
            v[keep] = p.vector
            pairs.append(EigenPair(p.value, v))
    excluded = np.setdiff1d(np.arange(n_local), keep)
    return LocalSpectrum(j, pairs, excluded)


def _real_columns(pairs, limit):
    """Real basis vectors from eigenpairs: real and imaginary parts of complex
    vectors (one of each conjugate pair) count as separate columns."""
    cols, prov = [], []
    seen = []
    for k, p in enumerate(pairs):
        if len(cols) >= limit:
            break
        lam = complex(p.value)
        if lam.imag != 0:
            if any(abs(lam.conjugate() - s) <= 1e-10 * max(abs(lam), 1e-300) for s in seen):
                continue
            seen.append(lam)
            for part in (p.vector.real, p.vector.imag):
                if len(cols) < limit:
                    cols.append(part)
                    prov.append((k, lam))
        else:
            cols.append(np.real(p.vector))
            prov.append((k, lam))
    return cols, prov


@dataclass
class CoarseSpace:
    """Columns ``Z = R_0^T`` and the factorized coarse operator ``E_0 = Z^T A Z``."""

    Z: sp.csc_matrix
    E0: np.ndarray
    AZ: sp.csc_matrix
    provenance: list = field(default_factory=list)  # (subdomain, eigen index, lambda) per column
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        # factor the equilibrated operator S^-1 E0 S^-1 with S = sqrt(||A z_c||)
        if self.dim:
            scale = np.sqrt(spla.norm(self.AZ, axis=0))
            self._scale = np.where(scale > 0, scale, 1.0)
            self._lu = sla.lu_factor(self.E0 / np.outer(self._scale, self._scale))
        else:
            self._lu = None

    def _solve_E0(self, y: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self._lu, y / self._scale) / self._scale

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    def coarse_solve(self, r: np.ndarray) -> np.ndarray:
        """R_0^T E_0^{-1} R_0 r."""
        if not self.dim:
            return np.zeros_like(r)
        return self.Z @ self._solve_E0(self.Z.T @ r)

    def project(self, A, v: np.ndarray) -> np.ndarray:
        """P_0 v = R_0^T E_0^{-1} R_0 A v."""
        return self.coarse_solve(A @ v)

    def project_transpose(self, v: np.ndarray) -> np.ndarray:
        """P_0^T v = A R_0^T E_0^{-1} R_0 v."""
        if not self.dim:
            return np.zeros_like(v)
        return self.AZ @ self._solve_E0(self.Z.T @ v)

    @classmethod
    def from_columns(cls, A, columns: np.ndarray, provenance=None) -> "CoarseSpace":
        Z = sp.csc_matrix(np.asarray(columns, dtype=float).reshape(A.shape[0], -1))
        AZ = sp.csc_matrix(A @ Z)
        E0 = np.asarray((Z.T @ AZ).todense())
        return cls(Z, E0, AZ, provenance or [None] * Z.shape[1])


def independent_columns(E: np.ndarray, scale: np.ndarray, tol: float = INDEPENDENCE_TOL) -> list:
    """Indices of columns accepted greedily while the equilibrated block
    ``E[S, S] / (scale_S scale_S^T)`` keeps sigma_min > tol * sigma_max."""
    scale = np.where(scale > 0, scale, 1.0)
    Es = E / np.outer(scale, scale)

    def ok(idx):
        sv = np.linalg.svd(Es[np.ix_(idx, idx)], compute_uv=False)
        return sv[-1] > tol * sv[0]

    everything = list(range(len(E)))
    if ok(everything):
        return everything
    accepted = []
    for c in everything:
        if ok(accepted + [c]):
            accepted.append(c)
    return accepted


def build_coarse_space(A, decomposition: Decomposition, spectra: list, spec: CoarseSpec) -> CoarseSpace:
    """Columns R_j^T D_j V_jk, orthonormalized per subdomain, accepted greedily
    while the coarse operator stays numerically nonsingular.

    ``spectra`` may hold more pairs than ``spec`` selects; the selection is
    applied here so one set of spectra can serve several coarse sizes.
    """
    n = decomposition.ndofs
    limit = requested_count(spec)
    blocks, provenance = [], []
    for spectrum in spectra:
        j = spectrum.subdomain
        d = decomposition.dof_sets[j]
        w = decomposition.pu_weights[j]
        cols, prov = _real_columns(select_pairs(spectrum.pairs, spec), limit)
        if not cols:
            continue
        local = w[:, None] * np.column_stack(cols)
        # orthonormalize within the subdomain, dropping dependent columns
        Q, R, piv = sla.qr(local, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-10 * max(diag.max(initial=0.0), 1e-300)))
        Q = Q[:, :rank]
        for c in range(rank):
            col = np.zeros(n)
            col[d] = Q[:, c]
            blocks.append(col)
            k, lam = prov[piv[c]]
            provenance.append((j, k, lam))
    if not blocks:
        return CoarseSpace(sp.csc_matrix((n, 0)), np.zeros((0, 0)), sp.csc_matrix((n, 0)))
    Zfull = sp.csc_matrix(np.column_stack(blocks))
    AZfull = sp.csc_matrix(A @ Zfull)
    Efull = np.asarray((Zfull.T @ AZfull).todense())
    accepted = independent_columns(Efull, np.sqrt(spla.norm(AZfull, axis=0)))
    dropped = [provenance[c] for c in sorted(set(range(Zfull.shape[1])) - set(accepted))]
    idx = np.array(accepted, dtype=int)
    return CoarseSpace(
        Zfull[:, idx], Efull[np.ix_(idx, idx)], AZfull[:, idx],
        [provenance[c] for c in accepted], dropped,
    )


class TwoLevelPreconditioner:
    """z = R_0^T E_0^{-1} R_0 r + (I - P_0) M_1^{-1} (I - P_0^T) r."""

    def __init__(self, one_level: OneLevelPreconditioner, coarse: CoarseSpace, A):
        self.one_level = one_level
        self.coarse = coarse
        self.A = A

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if not self.coarse.dim:
            return self.one_level.apply(r)
        y = self.one_level.apply(r - self.coarse.project_transpose(r))
        return self.coarse.coarse_solve(r) + y - self.coarse.project(self.A, y)

    __call__ = apply


def compute_spectra(disc: Discretization, decomposition: Decomposition, one_level: OneLevelPreconditioner,
                    spec: CoarseSpec, dense_limit: int = 0) -> list:
    return [
        solve_geneo(disc, decomposition, j, one_level.local_systems[j], spec, dense_limit)
        for j in range(decomposition.n_subdomains)
    ]


def build_two_level(disc: Discretization, decomposition: Decomposition, one_level: OneLevelPreconditioner,
                    A, spec: CoarseSpec, dense_limit: int = 0, spectra: list = None):
    """GenEO spectra on every subdomain, coarse space, two-level operator."""
    if spectra is None:
        spectra = compute_spectra(disc, decomposition, one_level, spec, dense_limit)
    coarse = build_coarse_space(A, decomposition, spectra, spec)
    return TwoLevelPreconditioner(one_level, coarse, A), spectra


def spectrum_csv(spectra: list) -> str:
    lines = ["subdomain,index,real,imag"]
    for s in spectra:
        for k, p in enumerate(s.pairs):
            lam = complex(p.value)
            lines.append(f"{s.subdomain},{k},{lam.real:.17g},{lam.imag:.17g}")
    return "\n".join(lines) + "\n"
