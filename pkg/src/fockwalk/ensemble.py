"""Disorder-sweep orchestration: counter-seeded realizations, energy-window
initial-state selection, the tetramer scar pattern, parallel execution, and
associative aggregation of wave-packet and spectral statistics.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    DEFAULT_KRYLOV_TOL,
    EXACT_DIAG_CEILING,
    TimeGrid,
    evolve_with_eigen,
    iter_evolve,
)
from .fock import FockState, SectorBasis, build_layers
from .hamiltonian import assemble, diagonal_energies
from .lattice import LatticeSpec, build_bonds, coupling_scale, sample_disorder
from .observables import EntanglementCut, bipartite_cut, radial_distribution, scalars
from .spectral import diagonalize, eigen_ee_statistics, level_spacing_ratios

# Fraction of the bandwidth (half-width) around the spectrum center from
# which initial Fock states are drawn.
ENERGY_WINDOW_FRACTION = 0.01

POLICIES = ("energy_window", "scar", "explicit")


def build_scar_state(rows: int, cols: int) -> FockState:
    """Half-filled tetramer pattern: 2x2 blocks occupied on the diagonal,
    with the occupation inverted on every other block (checkerboard)."""
    if rows % 2 or cols % 2:
        raise ValueError("scar pattern tiles 2x2 blocks; rows and cols must be even")
    bits = 0
    for r in range(rows):
        for c in range(cols):
            block_parity = (r // 2 + c // 2) % 2
            on_diagonal = (r % 2) == (c % 2)
            if on_diagonal == (block_parity == 0):
                bits |= 1 << (r * cols + c)
    return FockState(bits, rows * cols)


def realization_seed(master_seed: int, v_index: int, realization: int):
    """Injective, stateless seed stream for one (disorder point, repeat)."""
    return np.random.SeedSequence(entropy=(int(master_seed), v_index, realization))


def select_initial_state(
    disorder,
    basis: SectorBasis,
    spectrum_extremes: tuple[float, float],
    rng: np.random.Generator,
) -> FockState:
    """Uniform draw among sector Fock states whose diagonal energy lies in
    the central window [E_mid - dE/100, E_mid + dE/100]; falls back to the
    closest-energy state (lowest rank on ties) when the window is empty."""
    values = np.asarray(getattr(disorder, "values", disorder), dtype=float)
    e_min, e_max = spectrum_extremes
    e_mid = 0.5 * (e_min + e_max)
    half_width = ENERGY_WINDOW_FRACTION * (e_max - e_min)
    energies = diagonal_energies(values, basis)
    candidates = np.nonzero(np.abs(energies - e_mid) <= half_width)[0]
    if candidates.size:
        pick = int(candidates[rng.integers(candidates.size)])
    else:
        pick = int(np.argmin(np.abs(energies - e_mid)))  # first = lowest rank
    return basis.unrank(pick)


@dataclass(frozen=True)
class SweepPlan:
    """Declarative description of one disorder sweep."""

    lattice: LatticeSpec
    v_grid: tuple[float, ...]
    realizations: int
    master_seed: int = 0
    t_final_ns: float = 1000.0
    initial_policy: str = "energy_window"
    explicit_state: FockState | None = None
    compute_spectral: bool = False
    ee_cut: EntanglementCut | None = None
    n_ee_states: int = 10
    workers: int = 1
    exact_ceiling: int = EXACT_DIAG_CEILING
    krylov_tol: float = DEFAULT_KRYLOV_TOL
    bond_overrides: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("need at least one realization per disorder point")
        if any(v < 0 for v in self.v_grid) or not self.v_grid:
            raise ValueError("disorder grid must be nonempty and nonnegative")
        if self.initial_policy not in POLICIES:
            raise ValueError(f"unknown initial-state policy {self.initial_policy!r}")
        if self.initial_policy == "explicit" and self.explicit_state is None:
            raise ValueError("explicit policy requires explicit_state")
        if self.initial_policy == "scar":
            build_scar_state(self.lattice.rows, self.lattice.cols)  # validates parity

    @property
    def n_particles(self) -> int:
        return self.lattice.L // 2

    def basis(self) -> SectorBasis:
        return SectorBasis(self.lattice.L, self.n_particles)


@dataclass(frozen=True)
class RealizationRecord:
    v_index: int
    realization: int
    v_mhz: float
    initial_state: str
    x: float
    dx: float
    pi: np.ndarray | None
    r_mean: float | None = None
    ee_values: np.ndarray | None = None
    error: str | None = None


@dataclass
class VAccumulator:
    """Streaming moments for one disorder strength (Welford/Chan form)."""

    v: float
    L: int
    n: int = 0
    mean_x: float = 0.0
    m2_x: float = 0.0
    mean_dx: float = 0.0
    m2_dx: float = 0.0
    pi_sum: np.ndarray = None
    r_n: int = 0
    r_mean: float = 0.0
    r_m2: float = 0.0
    ee_n: int = 0
    ee_mean: float = 0.0
    ee_m2: float = 0.0
    failures: int = 0

    def __post_init__(self):
        if self.pi_sum is None:
            self.pi_sum = np.zeros(self.L + 1)

    def add(self, rec: RealizationRecord) -> None:
        if rec.error is not None:
            self.failures += 1
            return
        self.n += 1
        for attr, value in (("x", rec.x), ("dx", rec.dx)):
            mean = getattr(self, f"mean_{attr}")
            delta = value - mean
            mean += delta / self.n
            setattr(self, f"mean_{attr}", mean)
            setattr(
                self, f"m2_{attr}", getattr(self, f"m2_{attr}") + delta * (value - mean)
            )
        self.pi_sum = self.pi_sum + rec.pi
        if rec.r_mean is not None:
            self.r_n += 1
            delta = rec.r_mean - self.r_mean
            self.r_mean += delta / self.r_n
            self.r_m2 += delta * (rec.r_mean - self.r_mean)
        if rec.ee_values is not None:
            for s in rec.ee_values:
                self.ee_n += 1
                delta = s - self.ee_mean
                self.ee_mean += delta / self.ee_n
                self.ee_m2 += delta * (s - self.ee_mean)

    def combine(self, other: "VAccumulator") -> "VAccumulator":
        if self.v != other.v or self.L != other.L:
            raise ValueError("cannot combine accumulators of different points")
        out = VAccumulator(v=self.v, L=self.L)
        out.failures = self.failures + other.failures
        out.pi_sum = self.pi_sum + other.pi_sum
        for prefix in ("", "r_", "ee_"):
            na = getattr(self, f"{prefix}n")
            nb = getattr(other, f"{prefix}n")
            setattr(out, f"{prefix}n", na + nb)
        for prefix, attrs in (
            ("", ("x", "dx")),
            ("r_", ("",)),
            ("ee_", ("",)),
        ):
            na = getattr(self, f"{prefix}n")
            nb = getattr(other, f"{prefix}n")
            n = na + nb
            for attr in attrs:
                m_name = f"mean_{attr}" if attr else f"{prefix}mean"
                v_name = f"m2_{attr}" if attr else f"{prefix}m2"
                ma, mb = getattr(self, m_name), getattr(other, m_name)
                m2a, m2b = getattr(self, v_name), getattr(other, v_name)
                if nb == 0:
                    mean, m2 = ma, m2a
                elif na == 0:
                    mean, m2 = mb, m2b
                else:
                    delta = mb - ma
                    mean = ma + delta * nb / n
                    m2 = m2a + m2b + delta * delta * na * nb / n
                setattr(out, m_name, mean)
                setattr(out, v_name, m2)
        return out

    # -- derived quantities --------------------------------------------------

    def se(self, attr: str) -> float:
        if self.n < 2:
            return float("nan")
        m2 = getattr(self, f"m2_{attr}")
        return float(np.sqrt(m2 / (self.n - 1)) / np.sqrt(self.n))

    @property
    def pi_bar(self) -> np.ndarray:
        return self.pi_sum / max(self.n, 1)

    @property
    def sigma(self) -> float:
        """Width of the disorder-averaged wave packet:
        sqrt(L-1)/L * sqrt(sum d^2 pibar(d) - (L <x>)^2)."""
        if self.n == 0:
            return float("nan")
        d = np.arange(self.L + 1, dtype=float)
        second = float(np.sum(d * d * self.pi_bar))
        centered = max(second - (self.L * self.mean_x) ** 2, 0.0)
        return float(np.sqrt(self.L - 1.0) / self.L * np.sqrt(centered))

    @property
    def ee_std(self) -> float:
        if self.ee_n < 2:
            return float("nan")
        return float(np.sqrt(self.ee_m2 / (self.ee_n - 1)))


@dataclass
class EnsembleAggregate:
    """Sweep output: per-V accumulators plus the raw realization records."""

    L: int
    j0: float
    v_grid: tuple[float, ...]
    stats: list[VAccumulator]
    records: list[RealizationRecord] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        total = sum(s.n + s.failures for s in self.stats)
        failed = sum(s.failures for s in self.stats)
        return total > 0 and failed > 0.01 * total

    def mean_x(self) -> np.ndarray:
        return np.array([s.mean_x for s in self.stats])

    def mean_dx(self) -> np.ndarray:
        return np.array([s.mean_dx for s in self.stats])

    def sigma(self) -> np.ndarray:
        return np.array([s.sigma for s in self.stats])


def _empty_aggregate(plan: SweepPlan, j0: float) -> EnsembleAggregate:
    return EnsembleAggregate(
        L=plan.lattice.L,
        j0=j0,
        v_grid=plan.v_grid,
        stats=[VAccumulator(v=v, L=plan.lattice.L) for v in plan.v_grid],
    )


def aggregate_merge(a: EnsembleAggregate, b: EnsembleAggregate) -> EnsembleAggregate:
    """Associative, commutative reduction of two sweep shards."""
    if a.v_grid != b.v_grid or a.L != b.L:
        raise ValueError("aggregates describe different sweeps")
    records = sorted(
        a.records + b.records, key=lambda r: (r.v_index, r.realization)
    )
    return EnsembleAggregate(
        L=a.L,
        j0=a.j0,
        v_grid=a.v_grid,
        stats=[sa.combine(sb) for sa, sb in zip(a.stats, b.stats)],
        records=records,
    )


# Per-process cache of (bonds, basis) keyed by the lattice description, so a
# worker pool does not rebuild the shared structure for every realization.
_PLAN_CACHE: dict = {}


def _plan_context(plan: SweepPlan):
    key = (plan.lattice, plan.bond_overrides)
    ctx = _PLAN_CACHE.get(key)
    if ctx is None:
        overrides = {(a, b): nu for a, b, nu in plan.bond_overrides}
        bonds = build_bonds(plan.lattice, overrides or None)
        ctx = (bonds, plan.basis())
        _PLAN_CACHE[key] = ctx
    return ctx


def _run_realization(plan: SweepPlan, v_index: int, realization: int) -> RealizationRecord:
    bonds, basis = _plan_context(plan)
    v = plan.v_grid[v_index]
    seq = realization_seed(plan.master_seed, v_index, realization)
    disorder_seed, choice_seed = seq.spawn(2)
    disorder = sample_disorder(plan.lattice.L, v, disorder_seed)
    H = assemble(bonds, disorder, basis)

    eig = None
    if basis.dim <= plan.exact_ceiling:
        eig = diagonalize(H, plan.exact_ceiling)
        extremes = (float(eig.values[0]), float(eig.values[-1]))
    else:
        extremes = H.extremal_eigenvalues()

    if plan.initial_policy == "scar":
        s0 = build_scar_state(plan.lattice.rows, plan.lattice.cols)
    elif plan.initial_policy == "explicit":
        s0 = plan.explicit_state
    else:
        s0 = select_initial_state(
            disorder, basis, extremes, np.random.default_rng(choice_seed)
        )

    layers = build_layers(basis, s0)
    psi0 = np.zeros(basis.dim, dtype=complex)
    psi0[basis.rank(s0)] = 1.0
    grid = TimeGrid(np.array([0.0, plan.t_final_ns]))
    if eig is not None:
        psi_final = evolve_with_eigen(eig.values, eig.vectors, psi0, grid)[-1]
    else:
        for _, psi_final in iter_evolve(H, psi0, grid, "krylov", plan.krylov_tol):
            pass

    pi = radial_distribution(psi_final, layers)
    sc = scalars(pi)

    r_mean = None
    ee_values = None
    if plan.compute_spectral:
        if eig is None:
            raise ValueError("spectral statistics need the exact ceiling")
        r_mean = level_spacing_ratios(eig.values).mean
        cut = plan.ee_cut or bipartite_cut(plan.lattice.rows, plan.lattice.cols)
        ee_values = eigen_ee_statistics(eig, cut, basis, plan.n_ee_states).values

    return RealizationRecord(
        v_index=v_index,
        realization=realization,
        v_mhz=v,
        initial_state=s0.to_string(plan.lattice.cols),
        x=sc.x,
        dx=sc.dx,
        pi=pi.dense(),
        r_mean=r_mean,
        ee_values=ee_values,
    )


def _run_guarded(args) -> RealizationRecord:
    plan, v_index, realization = args
    try:
        return _run_realization(plan, v_index, realization)
    except Exception as exc:  # realization failures are excluded, not fatal
        return RealizationRecord(
            v_index=v_index,
            realization=realization,
            v_mhz=plan.v_grid[v_index],
            initial_state="",
            x=float("nan"),
            dx=float("nan"),
            pi=None,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_sweep(plan: SweepPlan) -> EnsembleAggregate:
    """Execute every (disorder point, realization) task and aggregate.

    Results are folded in a fixed order, so the aggregate is bit-identical
    for any worker count.
    """
    bonds, _ = _plan_context(plan)
    j0 = coupling_scale(bonds)
    tasks = [
        (plan, v_index, r)
        for v_index in range(len(plan.v_grid))
        for r in range(plan.realizations)
    ]
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            records = list(pool.map(_run_guarded, tasks, chunksize=4))
    else:
        records = [_run_guarded(t) for t in tasks]

    records.sort(key=lambda r: (r.v_index, r.realization))
    agg = _empty_aggregate(plan, j0)
    for rec in records:
        agg.stats[rec.v_index].add(rec)
        if rec.error is not None:
            warnings.warn(
                f"realization (v={rec.v_mhz}, r={rec.realization}) failed: "
                f"{rec.error}",
                stacklevel=2,
            )
    agg.records = records
    if agg.flagged:
        warnings.warn(
            "more than 1% of realizations failed; aggregate is flagged",
            stacklevel=2,
        )
    return agg
