"""Unitary time evolution of sector states.

Phase convention: couplings are frequencies in MHz and times are in ns, so
one unit of (MHz * ns) advances the phase by 2*pi*1e-3.  Small sectors go
through a dense eigendecomposition; large ones through restarted Lanczos
approximation of the matrix exponential action, which preserves the norm to
round-off and carries a per-step error estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.linalg as sla

PHASE_PER_MHZ_NS = 2e-3 * np.pi

EXACT_DIAG_CEILING = 20_000
# Above this dimension, full snapshot stacks are refused; stream instead.
SNAPSHOT_STACK_LIMIT = 100_000

DEFAULT_KRYLOV_TOL = 1e-9
DEFAULT_KRYLOV_DIM = 30


class DimensionError(ValueError):
    """Sector too large for the requested dense method."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing snapshot times in ns, starting at 0."""

    times: np.ndarray
    ceiling_ns: float = 1e7

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        if t.size < 1 or t[0] != 0.0:
            raise ValueError("time grid must start at t = 0 ns")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if t[-1] > self.ceiling_ns:
            raise ValueError(f"t_max {t[-1]} ns exceeds ceiling {self.ceiling_ns} ns")

    @classmethod
    def uniform(cls, t_max: float = 1000.0, n: int = 51) -> "TimeGrid":
        return cls(np.linspace(0.0, t_max, n))

    def __len__(self) -> int:
        return self.times.size


@dataclass
class EvolutionRun:
    """Snapshot stack plus the bookkeeping needed to reproduce it."""

    times: np.ndarray
    states: np.ndarray  # (n_times, dim) complex
    method: str
    tolerance: float
    norm_drift: float  # max |norm - 1| over the snapshots


def _phases(evals: np.ndarray, t_ns: float) -> np.ndarray:
    return np.exp(-1j * PHASE_PER_MHZ_NS * evals * t_ns)


def evolve_with_eigen(evals, evecs, psi0, grid: TimeGrid) -> np.ndarray:
    """Propagate through a precomputed eigendecomposition (columns = modes)."""
    coeff = evecs.conj().T @ psi0
    phases = np.exp(
        -1j * PHASE_PER_MHZ_NS * np.outer(grid.times, evals)
    )  # (n_t, dim)
    return (phases * coeff) @ evecs.T


def evolve_exact(H, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Dense-eigendecomposition propagation; exact up to round-off."""
    if H.dim > EXACT_DIAG_CEILING:
        raise DimensionError(
            f"dim {H.dim} > exact ceiling {EXACT_DIAG_CEILING}; use evolve_krylov"
        )
    evals, evecs = np.linalg.eigh(H.toarray())
    return evolve_with_eigen(evals, evecs, np.asarray(psi0, dtype=complex), grid)


def _lanczos_step(matvec, psi: np.ndarray, tau: float, m_max: int, tol: float):
    """One exp(-i tau H) application from the Krylov space of psi.

    Returns (new state, error estimate, basis size used).  The Saad residual
    estimate beta * beta_m * |last entry of exp(-i tau T) e1| governs both
    early termination and step acceptance.  Basis vectors are kept fully
    reorthogonalized; with m <= ~30 the extra dot products are cheap next to
    the matvecs and keep the tridiagonal reduction trustworthy.
    """
    beta0 = np.linalg.norm(psi)
    V = [psi / beta0]
    alphas: list[float] = []
    betas: list[float] = []
    err = np.inf
    y = None
    for j in range(m_max):
        w = matvec(V[j])
        alpha = float(np.real(np.vdot(V[j], w)))
        w = w - alpha * V[j]
        if j > 0:
            w -= betas[j - 1] * V[j - 1]
        # full reorthogonalization pass
        for q in V:
            w -= np.vdot(q, w) * q
        alphas.append(alpha)
        beta = float(np.linalg.norm(w))
        T_evals, T_evecs = sla.eigh_tridiagonal(alphas, betas)
        expT_e1 = T_evecs @ (np.exp(-1j * tau * T_evals) * T_evecs[0].conj())
        y = beta0 * expT_e1
        scale = max(abs(tau) * max(abs(a) for a in alphas), 1.0)
        if beta <= 1e-13 * scale:
            err = 0.0  # invariant subspace: the result is exact
            break
        err = beta0 * beta * abs(tau) * abs(expT_e1[-1])
        if err < tol and j >= 2:
            break
        betas.append(beta)
        V.append(w / beta)
    m_used = len(alphas)
    out = np.zeros_like(psi)
    for k in range(m_used):
        out += y[k] * V[k]
    return out, err, m_used


def evolve_krylov(
    H,
    psi0: np.ndarray,
    grid: TimeGrid,
    tol: float = DEFAULT_KRYLOV_TOL,
    m_max: int = DEFAULT_KRYLOV_DIM,
) -> np.ndarray:
    """Krylov propagation with snapshots stacked into an array."""
    if H.dim > SNAPSHOT_STACK_LIMIT:
        raise DimensionError(
            f"dim {H.dim} > {SNAPSHOT_STACK_LIMIT}: stream via iter_evolve instead"
        )
    out = np.empty((len(grid), H.dim), dtype=complex)
    for i, (_, psi) in enumerate(iter_evolve(H, psi0, grid, "krylov", tol, m_max)):
        out[i] = psi
    return out


def iter_evolve(
    H,
    psi0: np.ndarray,
    grid: TimeGrid,
    method: str = "auto",
    tol: float = DEFAULT_KRYLOV_TOL,
    m_max: int = DEFAULT_KRYLOV_DIM,
) -> Iterator[tuple[float, np.ndarray]]:
    """Yield (t_ns, psi(t)) along the grid without storing the full stack.

    method "auto" diagonalizes densely for small sectors and switches to
    Krylov stepping beyond ``EXACT_DIAG_CEILING`` (or earlier when the dense
    solve would dominate, above dim 2048).
    """
    psi0 = np.asarray(psi0)
    if psi0.shape != (H.dim,):
        raise ValueError(f"initial state length {psi0.shape} != dim {H.dim}")
    if method == "auto":
        method = "exact" if H.dim <= min(2048, EXACT_DIAG_CEILING) else "krylov"
    if method == "exact":
        for t, psi in zip(grid.times, evolve_exact(H, psi0, grid)):
            yield float(t), psi
        return
    if method != "krylov":
        raise ValueError(f"unknown method {method!r}")

    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"initial state norm {nrm} is not 1")
    psi = np.asarray(psi0, dtype=complex).copy()
    t_cur = 0.0
    t_total = float(grid.times[-1])
    dt_hint = np.inf  # adaptive step memory across substeps
    matvec = H.matvec
    for t_target in grid.times:
        if t_target == 0.0:
            yield 0.0, psi0.astype(complex, copy=True)  # bit-exact start
            continue
        while t_cur < t_target - 1e-12:
            dt = min(t_target - t_cur, dt_hint)
            if t_target - t_cur - dt < 1e-9:
                dt = t_target - t_cur
            for _ in range(60):
                tau = PHASE_PER_MHZ_NS * dt
                # error budget proportional to the step's share of the grid
                tol_step = tol * max(dt / t_total, 1e-3)
                psi_new, err, m_used = _lanczos_step(matvec, psi, tau, m_max, tol_step)
                if err <= tol_step:
                    break
                dt *= 0.5
            else:
                raise RuntimeError(
                    f"Krylov step failed to converge at t={t_cur:.3f} ns: "
                    f"error {err:.2e} > {tol_step:.2e} with m={m_used}, dt={dt:.2e}"
                )
            psi = psi_new
            t_cur += dt
            # grow cautiously when the basis had headroom
            dt_hint = dt * (2.0 if m_used < 0.75 * m_max else 1.0)
        t_cur = float(t_target)
        yield float(t_target), psi.copy()


def evolve(
    H,
    psi0: np.ndarray,
    grid: TimeGrid,
    method: str = "auto",
    tol: float = DEFAULT_KRYLOV_TOL,
    m_max: int = DEFAULT_KRYLOV_DIM,
) -> EvolutionRun:
    """Convenience wrapper returning the stacked snapshots and norm audit."""
    if H.dim > SNAPSHOT_STACK_LIMIT:
        raise DimensionError(
            f"dim {H.dim} > {SNAPSHOT_STACK_LIMIT}: stream via iter_evolve instead"
        )
    states = np.empty((len(grid), H.dim), dtype=complex)
    resolved = method
    if method == "auto":
        resolved = "exact" if H.dim <= min(2048, EXACT_DIAG_CEILING) else "krylov"
    for i, (_, psi) in enumerate(iter_evolve(H, psi0, grid, method, tol, m_max)):
        states[i] = psi
    norms = np.linalg.norm(states, axis=1)
    return EvolutionRun(
        times=grid.times,
        states=states,
        method=resolved,
        tolerance=tol,
        norm_drift=float(np.max(np.abs(norms - 1.0))),
    )


def fidelity(states: np.ndarray, psi0: np.ndarray) -> np.ndarray | float:
    """|<psi0|psi(t)>|^2 for one state or a snapshot stack."""
    amps = np.asarray(states) @ np.conj(psi0)
    return np.abs(amps) ** 2
