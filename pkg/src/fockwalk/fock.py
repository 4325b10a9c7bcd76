"""Fixed-particle-number occupation basis: bit-packed states, combinadic
ranking, and the Hamming-layer structure around a reference configuration.

A basis state is an L-bit mask (bit i = occupation of site i, row-major site
order). States of a sector are ordered by ascending mask value, which for
fixed popcount coincides with colexicographic order of the occupied-site
sets; ranks therefore follow the combinatorial number system and need no
stored lookup table.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

# Single-word masks only; combinadic arithmetic stays within int64 up to here.
MAX_SITES = 64

# Sectors below this dimension keep their enumerated state table cached on
# the basis object; larger sectors re-enumerate on demand to bound memory.
STATE_CACHE_LIMIT = 1_000_000


@dataclass(frozen=True)
class FockState:
    """One occupation configuration: an L-bit mask, bit i = site i."""

    bits: int
    L: int

    def __post_init__(self):
        if not 1 <= self.L <= MAX_SITES:
            raise ValueError(f"site count must be in [1, {MAX_SITES}], got {self.L}")
        if self.bits < 0 or self.bits >> self.L:
            raise ValueError(f"bits 0x{self.bits:x} has bits above site {self.L - 1}")

    @property
    def n_particles(self) -> int:
        return self.bits.bit_count()

    def occupations(self) -> np.ndarray:
        """Per-site 0/1 occupation vector."""
        shifts = np.arange(self.L, dtype=np.uint64)
        return ((np.uint64(self.bits) >> shifts) & np.uint64(1)).astype(np.uint8)

    def to_string(self, cols: int | None = None) -> str:
        """Row-major '1'/'0' serialization, rows separated by '/'.

        Leftmost character is site 0.  With cols=None the state prints as a
        single row.
        """
        flat = "".join(str(int(b)) for b in self.occupations())
        if cols is None:
            return flat
        if self.L % cols:
            raise ValueError(f"L={self.L} not divisible by cols={cols}")
        return "/".join(flat[i : i + cols] for i in range(0, self.L, cols))

    @classmethod
    def from_string(cls, text: str) -> "FockState":
        flat = text.replace("/", "")
        if not flat or set(flat) - {"0", "1"}:
            raise ValueError(f"not a '1'/'0' occupation string: {text!r}")
        bits = 0
        for i, ch in enumerate(flat):
            if ch == "1":
                bits |= 1 << i
        return cls(bits, len(flat))


def hamming(a: FockState, b: FockState) -> int:
    """Number of sites at which two configurations differ."""
    if a.L != b.L:
        raise ValueError(f"mismatched site counts: {a.L} vs {b.L}")
    return (a.bits ^ b.bits).bit_count()


@lru_cache(maxsize=None)
def _comb_table(L: int, N: int) -> np.ndarray:
    """table[c, j] = C(c, j) for c in [0, L], j in [0, N+1]."""
    t = np.zeros((L + 1, N + 2), dtype=np.int64)
    for c in range(L + 1):
        for j in range(min(c, N + 1) + 1):
            t[c, j] = comb(c, j)
    return t


@dataclass(frozen=True)
class SectorBasis:
    """Basis of all L-site configurations with exactly N particles.

    Ranks are assigned in ascending mask order; rank/unrank run in O(L) from
    the binomial table alone.
    """

    L: int
    N: int

    def __post_init__(self):
        if not 0 <= self.N <= self.L:
            raise ValueError(f"need 0 <= N <= L, got N={self.N}, L={self.L}")
        if self.L > MAX_SITES:
            raise ValueError(f"L={self.L} exceeds the {MAX_SITES}-bit mask limit")

    @property
    def dim(self) -> int:
        return comb(self.L, self.N)

    # -- scalar rank/unrank ------------------------------------------------

    def rank(self, state: FockState | int) -> int:
        bits = state.bits if isinstance(state, FockState) else int(state)
        if bits.bit_count() != self.N:
            raise ValueError(
                f"state has {bits.bit_count()} particles, sector holds {self.N}"
            )
        r, j = 0, 0
        for c in range(self.L):
            if (bits >> c) & 1:
                j += 1
                r += comb(c, j)
        return r

    def unrank(self, r: int) -> FockState:
        if not 0 <= r < self.dim:
            raise ValueError(f"rank {r} outside [0, {self.dim})")
        bits = 0
        c = self.L
        for j in range(self.N, 0, -1):
            # largest c with C(c, j) <= r
            c -= 1
            while comb(c, j) > r:
                c -= 1
            r -= comb(c, j)
            bits |= 1 << c
        return FockState(bits, self.L)

    # -- vectorized paths ---------------------------------------------------

    def rank_many(self, masks: np.ndarray) -> np.ndarray:
        """Ranks of an array of uint64 masks (all must lie in the sector)."""
        table = _comb_table(self.L, self.N)
        masks = np.asarray(masks, dtype=np.uint64)
        r = np.zeros(masks.shape, dtype=np.int64)
        j = np.zeros(masks.shape, dtype=np.int64)
        for c in range(self.L):
            member = ((masks >> np.uint64(c)) & np.uint64(1)).astype(np.int64)
            j += member
            r += member * table[c, j]
        return r

    def unrank_many(self, ranks: np.ndarray) -> np.ndarray:
        """Masks for an array of ranks (uint64 output)."""
        table = _comb_table(self.L, self.N)
        r = np.asarray(ranks, dtype=np.int64).copy()
        bits = np.zeros(r.shape, dtype=np.uint64)
        for j in range(self.N, 0, -1):
            col = table[: self.L, j]  # increasing in c
            c = np.searchsorted(col, r, side="right") - 1
            r -= col[c]
            bits |= np.uint64(1) << c.astype(np.uint64)
        return bits

    def states(self) -> np.ndarray:
        """All sector masks in ascending (= rank) order.

        Cached on the instance below STATE_CACHE_LIMIT, regenerated above it.
        """
        cached = getattr(self, "_states", None)
        if cached is not None:
            return cached
        arr = self.unrank_many(np.arange(self.dim, dtype=np.int64))
        arr.setflags(write=False)
        if self.dim < STATE_CACHE_LIMIT:
            object.__setattr__(self, "_states", arr)
        return arr

    def contains(self, state: FockState) -> bool:
        return state.L == self.L and state.n_particles == self.N


@dataclass(frozen=True)
class LayerIndex:
    """Hamming-distance layering of a sector around a reference state.

    layer_of[rank] is the distance d of that basis state from the reference;
    layer_sizes[d] counts states at distance d (odd entries are kept for
    generality but are zero whenever the reference sits in the sector).
    """

    reference: FockState
    layer_of: np.ndarray  # int8, one entry per basis rank
    layer_sizes: np.ndarray  # int64, indexed by d in [0, L]

    @property
    def L(self) -> int:
        return self.reference.L

    @property
    def distances(self) -> np.ndarray:
        return np.nonzero(self.layer_sizes)[0]


def build_layers(basis: SectorBasis, s0: FockState) -> LayerIndex:
    """Group the sector by Hamming distance from s0."""
    if not basis.contains(s0):
        raise ValueError(
            f"reference state ({s0.n_particles} particles on {s0.L} sites) "
            f"is outside the (L={basis.L}, N={basis.N}) sector"
        )
    d = np.bitwise_count(basis.states() ^ np.uint64(s0.bits)).astype(np.int8)
    sizes = np.bincount(d, minlength=basis.L + 1).astype(np.int64)
    d.setflags(write=False)
    sizes.setflags(write=False)
    return LayerIndex(reference=s0, layer_of=d, layer_sizes=sizes)


def half_filled_layer_size(L: int, d: int) -> int:
    """Closed-form layer count C(L/2, d/2)^2 for a half-filled reference."""
    if L % 2 or d % 2:
        return 0
    return comb(L // 2, d // 2) ** 2
