"""Full-diagonalization diagnostics: level-spacing ratios, initial-state
overlap spectra, participation/fractal dimension, the diagonal-ensemble
(infinite-time) radial distribution, and mid-spectrum eigenstate entropies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import EXACT_DIAG_CEILING, DimensionError
from .fock import FockState, LayerIndex, SectorBasis
from .observables import EntanglementCut, RadialDistribution, entanglement_entropy

# Mean level-spacing ratio limits for the two reference ensembles.
R_POISSON = 2.0 * np.log(2.0) - 1.0  # ~0.386
R_GOE = 4.0 - 2.0 * np.sqrt(3.0)  # ~0.536

DEGENERACY_RTOL = 1e-12  # spacings below this fraction of the bandwidth


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues (MHz) and the matching eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.size

    @property
    def e_mid(self) -> float:
        return 0.5 * float(self.values[0] + self.values[-1])

    @property
    def bandwidth(self) -> float:
        return float(self.values[-1] - self.values[0])


def diagonalize(H, ceiling: int = EXACT_DIAG_CEILING) -> EigenDecomposition:
    if H.dim > ceiling:
        raise DimensionError(f"dim {H.dim} > diagonalization ceiling {ceiling}")
    values, vectors = np.linalg.eigh(H.toarray())
    return EigenDecomposition(values=values, vectors=vectors)


@dataclass(frozen=True)
class LevelSpacingStats:
    r_values: np.ndarray
    mean: float
    n_degenerate: int


def level_spacing_ratios(
    evals: np.ndarray, window: float = 1.0 / 3.0
) -> LevelSpacingStats:
    """Consecutive-gap ratios r_i = min(s_i, s_{i+1}) / max(s_i, s_{i+1})
    over the central ``window`` fraction of the sorted spectrum."""
    evals = np.sort(np.asarray(evals, dtype=float))
    n = evals.size
    keep = max(int(round(n * window)), 3)
    lo = (n - keep) // 2
    central = evals[lo : lo + keep]
    if central.size < 3:
        raise ValueError("need at least 3 levels in the central window")
    spacings = np.diff(central)
    bandwidth = evals[-1] - evals[0]
    degenerate = spacings < DEGENERACY_RTOL * max(bandwidth, 1e-300)
    n_deg = int(np.count_nonzero(degenerate))
    if np.all(degenerate):
        raise ValueError("spectrum is fully degenerate in the window")
    s = spacings[~degenerate]
    if s.size < 2:
        raise ValueError("too few non-degenerate spacings for ratios")
    r = np.minimum(s[1:], s[:-1]) / np.maximum(s[1:], s[:-1])
    return LevelSpacingStats(r_values=r, mean=float(r.mean()), n_degenerate=n_deg)


def overlap_spectrum(
    s0: FockState, eig: EigenDecomposition, basis: SectorBasis
) -> tuple[np.ndarray, np.ndarray]:
    """(E_k, |<s0|E_k>|^2) for every eigenstate."""
    row = basis.rank(s0)
    overlaps = np.abs(eig.vectors[row, :]) ** 2
    return eig.values.copy(), overlaps


def fractal_dimension(vector: np.ndarray) -> tuple[float, float]:
    """(R2, D2): inverse participation ratio sum |psi|^4 and the fractal
    dimension -ln R2 / ln N it implies."""
    v = np.asarray(vector)
    n = v.size
    r2 = float(np.sum(np.abs(v) ** 4))
    if n < 2:
        raise ValueError("fractal dimension needs at least 2 components")
    return r2, float(-np.log(r2) / np.log(n))


def diagonal_ensemble_radial(
    s0: FockState,
    eig: EigenDecomposition,
    layers: LayerIndex,
    basis: SectorBasis,
) -> RadialDistribution:
    """Infinite-time radial distribution sum_k |C_k|^2 |<E_k|s>|^2, valid for
    non-degenerate spectra (warns when degeneracies are abundant)."""
    spacings = np.diff(eig.values)
    n_deg = int(np.count_nonzero(spacings < DEGENERACY_RTOL * max(eig.bandwidth, 1e-300)))
    if n_deg > 0.01 * eig.dim:
        warnings.warn(
            f"{n_deg} near-degenerate levels: the diagonal ensemble may not "
            "equal the infinite-time average",
            stacklevel=2,
        )
    row = basis.rank(s0)
    weights = np.abs(eig.vectors[row, :]) ** 2  # |C_k|^2
    site_probs = (np.abs(eig.vectors) ** 2) @ weights
    pi = np.bincount(layers.layer_of, weights=site_probs, minlength=layers.L + 1)
    ds = np.nonzero(layers.layer_sizes)[0]
    return RadialDistribution(ds=ds, pi=pi[ds] / pi.sum(), L=layers.L)


@dataclass(frozen=True)
class EigenstateEntropies:
    """Entropies of the sampled mid-spectrum eigenstates of one realization."""

    values: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def std(self) -> float:
        return float(self.values.std(ddof=1)) if self.values.size > 1 else 0.0


def eigen_ee_statistics(
    eig: EigenDecomposition,
    cut: EntanglementCut,
    basis: SectorBasis,
    n_states: int = 10,
    center: float | None = None,
) -> EigenstateEntropies:
    """Bipartite entropies of the ``n_states`` eigenstates nearest the
    spectrum center (ensemble sweeps pool these across realizations)."""
    center = eig.e_mid if center is None else center
    order = np.argsort(np.abs(eig.values - center), kind="stable")
    picked = np.sort(order[: min(n_states, eig.dim)])
    ents = np.array(
        [
            entanglement_entropy(eig.vectors[:, k].astype(complex), cut, basis)
            for k in picked
        ]
    )
    return EigenstateEntropies(values=ents)
