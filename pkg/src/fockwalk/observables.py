"""State functionals: the radial wave-packet distribution over Hamming
layers, its moments, the ergodic reference, Bhattacharyya overlap,
real-space populations and imbalance, and bipartite entanglement entropy.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .fock import FockState, LayerIndex, SectorBasis

SCHMIDT_FLOOR = 1e-14  # singular values below this are dropped from entropies


@dataclass(frozen=True)
class RadialDistribution:
    """Probability of finding the system at Hamming distance d from the
    reference, for each d carried by ``ds``."""

    ds: np.ndarray  # distances, ascending
    pi: np.ndarray  # probabilities, same length
    L: int

    def __post_init__(self):
        ds = np.asarray(self.ds, dtype=np.int64)
        pi = np.asarray(self.pi, dtype=np.float64)
        ds.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "ds", ds)
        object.__setattr__(self, "pi", pi)
        if ds.shape != pi.shape:
            raise ValueError("ds and pi must have matching shapes")
        if np.any(pi < -1e-12):
            raise ValueError("negative probability in radial distribution")
        total = pi.sum()
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"radial distribution sums to {total}, not 1")

    def moment(self, k: int) -> float:
        return float(np.sum(self.ds.astype(float) ** k * self.pi))

    def dense(self) -> np.ndarray:
        """Probabilities on the full 0..L distance axis."""
        out = np.zeros(self.L + 1)
        out[self.ds] = self.pi
        return out


@dataclass(frozen=True)
class WavePacketScalars:
    """Normalized displacement and width of a radial distribution; the
    Bhattacharyya overlap with the ergodic packet is attached when known."""

    x: float
    dx: float
    b: float | None = None


def radial_distribution(psi: np.ndarray, layers: LayerIndex) -> RadialDistribution:
    """Bin |psi|^2 by Hamming distance from the layer reference."""
    if psi.shape != layers.layer_of.shape:
        raise ValueError(
            f"state length {psi.shape} != basis dim {layers.layer_of.shape}"
        )
    weights = np.abs(psi) ** 2
    pi = np.bincount(layers.layer_of, weights=weights, minlength=layers.L + 1)
    ds = np.nonzero(layers.layer_sizes)[0]
    return RadialDistribution(ds=ds, pi=pi[ds], L=layers.L)


def ergodic_distribution(L: int) -> RadialDistribution:
    """Layer-size-proportional packet of a fully thermalized half-filled
    system: Pi(d) = C(L/2, d/2)^2 / C(L, L/2) on even d."""
    if L % 2:
        raise ValueError(f"ergodic reference requires even L, got {L}")
    half = L // 2
    ds = np.arange(0, L + 1, 2)
    pi = np.array([comb(half, d // 2) ** 2 for d in ds], dtype=float)
    return RadialDistribution(ds=ds, pi=pi / comb(L, half), L=L)


def bhattacharyya(p: RadialDistribution, q: RadialDistribution) -> float:
    """Overlap sum_d sqrt(p(d) q(d)); 1 iff the distributions coincide."""
    if p.L != q.L:
        raise ValueError(f"mismatched system sizes {p.L} vs {q.L}")
    return float(np.sum(np.sqrt(np.clip(p.dense() * q.dense(), 0.0, None))))


def scalars(
    p: RadialDistribution, reference: RadialDistribution | None = None
) -> WavePacketScalars:
    """Normalized displacement x = <d>/L and width
    dx = sqrt(L-1)/L * sqrt(<d^2> - <d>^2)."""
    m1 = p.moment(1)
    m2 = p.moment(2)
    var = max(m2 - m1 * m1, 0.0)
    x = m1 / p.L
    dx = np.sqrt(p.L - 1.0) / p.L * np.sqrt(var)
    b = bhattacharyya(p, reference) if reference is not None else None
    return WavePacketScalars(x=float(x), dx=float(dx), b=b)


def populations(psi: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Per-site occupation probabilities p_i = sum over occupied states."""
    if psi.shape != (basis.dim,):
        raise ValueError(f"state length {psi.shape} != dim {basis.dim}")
    weights = np.abs(psi) ** 2
    states = basis.states()
    one = np.uint64(1)
    p = np.empty(basis.L)
    for i in range(basis.L):
        occ = ((states >> np.uint64(i)) & one).astype(np.float64)
        p[i] = float(weights @ occ)
    return p


def imbalance(pops: np.ndarray, s0: FockState) -> float:
    """Autocorrelation (1/L) sum_m <sigma^z_m(t)> <sigma^z_m(0)> with
    <sigma^z> = 2p - 1; equals 1 at t = 0 for the initial Fock state."""
    pops = np.asarray(pops, dtype=float)
    if pops.shape != (s0.L,):
        raise ValueError(f"population vector length {pops.shape} != L={s0.L}")
    sz0 = 2.0 * s0.occupations().astype(float) - 1.0
    return float(np.mean((2.0 * pops - 1.0) * sz0))


@dataclass(frozen=True)
class EntanglementCut:
    """Real-space bipartition: ``sites`` lists subsystem A."""

    sites: tuple[int, ...]
    L: int

    def __post_init__(self):
        s = tuple(sorted(set(self.sites)))
        object.__setattr__(self, "sites", s)
        if not s or len(s) >= self.L:
            raise ValueError("cut must be a nonempty proper subset of sites")
        if s[0] < 0 or s[-1] >= self.L:
            raise ValueError(f"cut sites {s} out of range for L={self.L}")

    @property
    def l_a(self) -> int:
        return len(self.sites)

    @property
    def complement(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.L) if i not in set(self.sites))


def bipartite_cut(rows: int, cols: int) -> EntanglementCut:
    """Default half cut: contiguous left half of the columns."""
    sites = tuple(
        r * cols + c for r in range(rows) for c in range(cols // 2)
    )
    return EntanglementCut(sites=sites, L=rows * cols)


def tetramer_cut(rows: int, cols: int) -> EntanglementCut:
    """Default few-body cut: the 2x2 block at the lattice corner."""
    if rows < 2 or cols < 2:
        raise ValueError("tetramer cut needs at least a 2x2 lattice")
    return EntanglementCut(sites=(0, 1, cols, cols + 1), L=rows * cols)


def _packed_keys(states: np.ndarray, sites: tuple[int, ...]) -> np.ndarray:
    keys = np.zeros(states.shape, dtype=np.int64)
    for k, site in enumerate(sites):
        bit = (states >> np.uint64(site)) & np.uint64(1)
        keys |= bit.astype(np.int64) << k
    return keys


def entanglement_entropy(
    psi: np.ndarray, cut: EntanglementCut, basis: SectorBasis
) -> float:
    """Von Neumann entropy (nats) of subsystem A for a pure sector state.

    The state is scattered into the 2^l_A x 2^l_B subsystem grid respecting
    the particle-number embedding, then reduced by SVD.
    """
    if cut.L != basis.L:
        raise ValueError(f"cut is for L={cut.L}, basis has L={basis.L}")
    if psi.shape != (basis.dim,):
        raise ValueError(f"state length {psi.shape} != dim {basis.dim}")
    states = basis.states()
    a_keys = _packed_keys(states, cut.sites)
    b_keys = _packed_keys(states, cut.complement)
    a_u, a_inv = np.unique(a_keys, return_inverse=True)
    b_u, b_inv = np.unique(b_keys, return_inverse=True)
    if a_u.size * b_u.size > 64_000_000:
        raise ValueError(
            f"reshape budget exceeded: {a_u.size} x {b_u.size} subsystem grid"
        )
    m = np.zeros((a_u.size, b_u.size), dtype=complex)
    m[a_inv, b_inv] = psi
    svals = np.linalg.svd(m, compute_uv=False)
    svals = svals[svals > SCHMIDT_FLOOR]
    probs = svals**2
    return float(-np.sum(probs * np.log(probs)))


def page_value(L: int) -> float:
    """Expected bipartite entropy of a random pure state: 0.5 (L ln2 - 1)."""
    return 0.5 * (np.log(2.0) * L - 1.0)
