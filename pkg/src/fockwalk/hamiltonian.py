"""Fock-space Hamiltonian over one particle-number sector.

Each real-space bond (a, b, nu) connects every pair of basis states that
differ exactly by moving one particle between sites a and b, with matrix
element nu; the diagonal carries the summed on-site disorder of the occupied
sites.  The operator is real symmetric.

Two storage backends: CSR with both triangles materialized (fast matvec,
default) and a per-bond pair list that stores each hop once (about 3x less
memory, used above ``matrix_free_threshold``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import SectorBasis
from .lattice import Bond

CSR = "csr"
PAIRS = "pairs"

DEFAULT_MATRIX_FREE_THRESHOLD = 5_000_000


@dataclass(frozen=True)
class SparseHamiltonian:
    """Real symmetric sector Hamiltonian: diagonal vector + hopping structure."""

    basis: SectorBasis
    diag: np.ndarray  # MHz, length dim
    backend: str
    csr: sp.csr_matrix | None = None  # off-diagonal part, both triangles
    pairs: tuple[tuple[np.ndarray, np.ndarray, float], ...] | None = None

    @property
    def dim(self) -> int:
        return self.diag.size

    @property
    def nnz_offdiag(self) -> int:
        if self.backend == CSR:
            return int(self.csr.nnz)
        return int(2 * sum(i.size for i, _, _ in self.pairs))

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        """y = H psi.  Real data times complex vectors runs as two real
        products to avoid materializing a complex copy of the matrix."""
        if psi.shape != (self.dim,):
            raise ValueError(f"state length {psi.shape} != dim {self.dim}")
        if self.backend == CSR:
            if np.iscomplexobj(psi):
                y = self.csr @ psi.real + 1j * (self.csr @ psi.imag)
            else:
                y = self.csr @ psi
            y += self.diag * psi
            return y
        y = self.diag * psi
        for idx, pidx, nu in self.pairs:
            y[idx] += nu * psi[pidx]
            y[pidx] += nu * psi[idx]
        return y

    def __matmul__(self, psi: np.ndarray) -> np.ndarray:
        return self.matvec(psi)

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.matvec(psi))))

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(
            (self.dim, self.dim), matvec=self.matvec, rmatvec=self.matvec,
            dtype=np.float64,
        )

    def toarray(self, max_dim: int = 25_000) -> np.ndarray:
        if self.dim > max_dim:
            raise ValueError(f"refusing dense form at dim {self.dim} > {max_dim}")
        if self.backend == CSR:
            dense = self.csr.toarray()
        else:
            dense = np.zeros((self.dim, self.dim))
            for idx, pidx, nu in self.pairs:
                dense[idx, pidx] += nu
                dense[pidx, idx] += nu
        dense[np.diag_indices(self.dim)] += self.diag
        return dense

    def extremal_eigenvalues(self, tol: float = 1e-6) -> tuple[float, float]:
        """(E_min, E_max) by Lanczos; dense fallback for tiny sectors."""
        if self.dim <= 64:
            w = np.linalg.eigvalsh(self.toarray())
            return float(w[0]), float(w[-1])
        op = self.as_linear_operator()
        lo = spla.eigsh(op, k=1, which="SA", tol=tol, return_eigenvectors=False)
        hi = spla.eigsh(op, k=1, which="LA", tol=tol, return_eigenvectors=False)
        return float(lo[0]), float(hi[0])

    def dump(self, path) -> None:
        """Binary CSR dump for cross-implementation diffing.

        Little-endian layout: uint64 dim, uint64 nnz, int64 indptr[dim+1],
        int32 indices[nnz], float64 data[nnz], float64 diag[dim].
        """
        m = self.csr if self.backend == CSR else self._to_csr()
        with open(path, "wb") as fh:
            fh.write(struct.pack("<QQ", self.dim, m.nnz))
            fh.write(np.asarray(m.indptr, dtype="<i8").tobytes())
            fh.write(np.asarray(m.indices, dtype="<i4").tobytes())
            fh.write(np.asarray(m.data, dtype="<f8").tobytes())
            fh.write(np.asarray(self.diag, dtype="<f8").tobytes())

    def _to_csr(self) -> sp.csr_matrix:
        rows = np.concatenate([np.concatenate([i, p]) for i, p, _ in self.pairs])
        cols = np.concatenate([np.concatenate([p, i]) for i, p, _ in self.pairs])
        data = np.concatenate(
            [np.full(2 * i.size, nu) for i, _, nu in self.pairs]
        )
        return sp.coo_matrix((data, (rows, cols)), shape=(self.dim, self.dim)).tocsr()


def diagonal_energies(values: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Per-basis-state energy sum_i values[i] * occupation_i, in rank order."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (basis.L,):
        raise ValueError(f"on-site vector length {values.shape} != L={basis.L}")
    states = basis.states()
    diag = np.zeros(basis.dim)
    one = np.uint64(1)
    for i in range(basis.L):
        if values[i] != 0.0:
            diag += values[i] * ((states >> np.uint64(i)) & one).astype(np.float64)
    return diag


def _bond_pairs(states: np.ndarray, bond: Bond):
    """Ranks (i, j) of every hop along one bond, one direction per pair
    (i has site a occupied, j = i with the particle moved to b)."""
    a, b = np.uint64(bond.a), np.uint64(bond.b)
    one = np.uint64(1)
    occ_a = (states >> a) & one
    occ_b = (states >> b) & one
    src = np.nonzero((occ_a == one) & (occ_b == np.uint64(0)))[0]
    mask = (one << a) | (one << b)
    partner = states[src] ^ mask
    dst = np.searchsorted(states, partner)
    return src.astype(np.int64), dst.astype(np.int64)


def assemble(
    bonds: list[Bond],
    disorder,
    basis: SectorBasis,
    backend: str = "auto",
    matrix_free_threshold: int = DEFAULT_MATRIX_FREE_THRESHOLD,
) -> SparseHamiltonian:
    """Build the sector Hamiltonian from real-space bonds and a disorder field.

    ``disorder`` is a DisorderField or a plain length-L vector of on-site
    energies in MHz.
    """
    values = np.asarray(getattr(disorder, "values", disorder), dtype=np.float64)
    if values.shape != (basis.L,):
        raise ValueError(f"disorder length {values.shape} != L={basis.L}")
    for bond in bonds:
        if not (0 <= bond.a < basis.L and 0 <= bond.b < basis.L):
            raise ValueError(f"bond ({bond.a}, {bond.b}) references sites >= L")
    if backend == "auto":
        backend = PAIRS if basis.dim > matrix_free_threshold else CSR
    if backend not in (CSR, PAIRS):
        raise ValueError(f"unknown backend {backend!r}")

    states = basis.states()
    dim = basis.dim
    diag = diagonal_energies(values, basis)

    pair_lists = []
    degree = np.zeros(dim, dtype=np.int32)
    for bond in bonds:
        src, dst = _bond_pairs(states, bond)
        pair_lists.append((src, dst, float(bond.nu)))
        if backend == CSR:
            degree[src] += 1
            degree[dst] += 1

    if backend == PAIRS:
        pairs = tuple(
            (src.astype(np.int32), dst.astype(np.int32), nu)
            for src, dst, nu in pair_lists
        )
        return SparseHamiltonian(basis=basis, diag=diag, backend=PAIRS, pairs=pairs)

    # Direct CSR fill: within a bond the row indices are unique, so cursor
    # arithmetic vectorizes without scatter conflicts.
    indptr = np.zeros(dim + 1, dtype=np.int64)
    np.cumsum(degree, out=indptr[1:])
    nnz = int(indptr[-1])
    indices = np.empty(nnz, dtype=np.int32)
    data = np.empty(nnz)
    cursor = np.zeros(dim, dtype=np.int32)
    for src, dst, nu in pair_lists:
        for rows, cols in ((src, dst), (dst, src)):
            pos = indptr[rows] + cursor[rows]
            indices[pos] = cols
            data[pos] = nu
            cursor[rows] += 1
    csr = sp.csr_matrix((data, indices, indptr), shape=(dim, dim))
    return SparseHamiltonian(basis=basis, diag=diag, backend=CSR, csr=csr)
