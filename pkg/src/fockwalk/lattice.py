"""2D lattice geometry: SSH-patterned nearest-neighbor bonds, diagonal cross
bonds, uniform on-site disorder, and the coupler-to-bond reduction.

Sites are indexed row-major: (row r, column c) -> r*cols + c, both 0-based.
All couplings and disorder values are plain frequencies in MHz (J/2pi); time
elsewhere is in ns, making the evolution phase 2*pi*nu*t*1e-3.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

NN_X = "nn_x"  # bond along a row, (r, c)-(r, c+1)
NN_Y = "nn_y"  # bond along a column, (r, c)-(r+1, c)
CROSS = "cross"  # plaquette diagonal


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    nu: float  # MHz
    kind: str


@dataclass(frozen=True)
class LatticeSpec:
    """Open-boundary rows x cols lattice with alternating bond strengths.

    Bond index 1 along each axis carries nu_odd, so the lattice tiles into
    2x2 tetramers whose corners sit at odd (row, col); diagonals all carry
    nu_cross.
    """

    rows: int
    cols: int
    nu_odd: float = -6.0
    nu_even: float = -3.0
    nu_cross: float = 0.9

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"need rows, cols >= 1, got {self.rows}x{self.cols}")

    @property
    def L(self) -> int:
        return self.rows * self.cols

    def site(self, r: int, c: int) -> int:
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise ValueError(f"site ({r}, {c}) outside {self.rows}x{self.cols}")
        return r * self.cols + c


BondOverrides = dict[tuple[int, int], float]


def build_bonds(spec: LatticeSpec, overrides: BondOverrides | None = None) -> list[Bond]:
    """Enumerate every undirected bond once, in a fixed deterministic order.

    Horizontal bonds at column index c (1-based bond index) alternate
    nu_odd/nu_even starting from nu_odd; vertical bonds alternate the same
    way down each column; both plaquette diagonals carry nu_cross.
    """
    ov = {}
    if overrides:
        for (a, b), nu in overrides.items():
            ov[(min(a, b), max(a, b))] = float(nu)

    def pick(a: int, b: int, default: float) -> float:
        return ov.get((min(a, b), max(a, b)), default)

    bonds: list[Bond] = []
    for r in range(spec.rows):
        for c in range(spec.cols - 1):
            nu = spec.nu_odd if c % 2 == 0 else spec.nu_even
            a, b = spec.site(r, c), spec.site(r, c + 1)
            bonds.append(Bond(a, b, pick(a, b, nu), NN_X))
    for r in range(spec.rows - 1):
        for c in range(spec.cols):
            nu = spec.nu_odd if r % 2 == 0 else spec.nu_even
            a, b = spec.site(r, c), spec.site(r + 1, c)
            bonds.append(Bond(a, b, pick(a, b, nu), NN_Y))
    for r in range(spec.rows - 1):
        for c in range(spec.cols - 1):
            a, b = spec.site(r, c), spec.site(r + 1, c + 1)
            bonds.append(Bond(a, b, pick(a, b, spec.nu_cross), CROSS))
            a, b = spec.site(r, c + 1), spec.site(r + 1, c)
            bonds.append(Bond(a, b, pick(a, b, spec.nu_cross), CROSS))
    return bonds


def load_bond_overrides(path) -> BondOverrides:
    """Read a (site_a, site_b, nu_mhz) CSV into an override table."""
    out: BondOverrides = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[(int(row["site_a"]), int(row["site_b"]))] = float(row["nu_mhz"])
    return out


def coupling_scale(bonds: list[Bond]) -> float:
    """Mean absolute nearest-neighbor coupling (the J0 frequency scale)."""
    nn = [abs(b.nu) for b in bonds if b.kind in (NN_X, NN_Y)]
    if not nn:
        raise ValueError("no nearest-neighbor bonds")
    return float(np.mean(nn))


@dataclass(frozen=True)
class DisorderField:
    """Frozen realization of i.i.d. uniform on-site energies in [-V, V]."""

    values: np.ndarray  # MHz, length L
    strength: float  # V, MHz
    seed: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.strength < 0:
            raise ValueError(f"disorder strength must be >= 0, got {self.strength}")
        if v.size and np.max(np.abs(v)) > self.strength * (1 + 1e-12):
            raise ValueError("disorder entries exceed [-V, V]")

    @property
    def L(self) -> int:
        return self.values.size


def sample_disorder(L: int, V: float, seed) -> DisorderField:
    """Draw one disorder realization; bit-identical for a fixed (L, V, seed).

    seed may be an int or a numpy SeedSequence (for counter-based sweeps).
    """
    if V < 0:
        raise ValueError(f"disorder strength must be >= 0, got V={V}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(-V, V, size=L) if V > 0 else np.zeros(L)
    seed_int = seed if isinstance(seed, (int, np.integer)) else -1
    return DisorderField(values=values, strength=float(V), seed=int(seed_int))


@dataclass(frozen=True)
class CouplerSpec:
    """Qubit-coupler-qubit triple feeding the second-order bond reduction.

    Detunings delta_* = omega_qubit - omega_coupler must be negative and
    dominate the couplings for the perturbative reduction to hold.
    """

    g_mj: float  # MHz
    g_nj: float
    g_mn: float
    delta_m: float  # MHz, < 0
    delta_n: float

    def __post_init__(self):
        if self.delta_m == 0 or self.delta_n == 0:
            raise ValueError("zero detuning: second-order reduction is undefined")
        if self.delta_m >= 0 or self.delta_n >= 0:
            raise ValueError("detunings must be negative (coupler above qubits)")
        ratio = max(abs(self.g_mj / self.delta_m), abs(self.g_nj / self.delta_n))
        if ratio >= 0.25:
            raise ValueError(f"|g/delta| = {ratio:.3f} too large for the expansion")
        if ratio > 0.1:
            warnings.warn(
                f"|g/delta| = {ratio:.3f} > 0.1; second-order accuracy is marginal",
                stacklevel=2,
            )


def effective_coupling(c: CouplerSpec) -> float:
    """Coupler-mediated bond strength g_mj*g_nj/Delta + g_mn with
    2/Delta = 1/delta_m + 1/delta_n."""
    inv = 0.5 * (1.0 / c.delta_m + 1.0 / c.delta_n)
    return c.g_mj * c.g_nj * inv + c.g_mn


def effective_shift(c: CouplerSpec) -> tuple[float, float]:
    """Second-order frequency shifts (g^2/delta) of the two qubits."""
    return c.g_mj**2 / c.delta_m, c.g_nj**2 / c.delta_n
