"""Quantum states in two tiers: exact grid wavefunctions and branch states.

Conventions used throughout the package:

* 1D spatial grid, collocation (cell-sampled) amplitudes, periodic topology.
* Simulation units: hbar = 1, masses in nucleon units, lengths and times in
  simulation units.
* Normalization: sum over all configuration indices of |amplitude|^2 times
  cell_width^N equals 1.
* The exact tier (`WaveFunction`) is capped at N <= 3 particles because the
  amplitude array holds cell_count^N complex values.  Macroscopic particle
  numbers live in the symbolic tier (`BranchState`): a weighted list of
  macroscopically distinct occupancy assignments of N particles to named
  regions.

All types are immutable after construction; operations return new values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyProductError,
    IncompatibleStateError,
    ParameterError,
    ZeroStateError,
)

NORM_TOL = 1e-12
MAX_EXACT_PARTICLES = 3


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1D grid of cells; cell i is centered at origin + (i + 0.5) * cell_width."""

    cell_count: int
    cell_width: float
    origin: float = 0.0

    def __post_init__(self):
        if self.cell_count < 2:
            raise ParameterError(f"cell_count must be >= 2, got {self.cell_count}")
        if self.cell_width <= 0:
            raise ParameterError(f"cell_width must be > 0, got {self.cell_width}")

    def cell_centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.cell_count) + 0.5) * self.cell_width

    @property
    def length(self) -> float:
        return self.cell_count * self.cell_width

    def extent(self) -> tuple[float, float]:
        return (self.origin, self.origin + self.length)

    def contains(self, x: float) -> bool:
        lo, hi = self.extent()
        return lo <= x <= hi

    def nearest_cell(self, x: float) -> int:
        i = int(np.floor((x - self.origin) / self.cell_width))
        return min(max(i, 0), self.cell_count - 1)

    def to_json(self) -> dict:
        return {
            "cell_count": self.cell_count,
            "cell_width": self.cell_width,
            "origin": self.origin,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "SpatialGrid":
        return cls(int(doc["cell_count"]), float(doc["cell_width"]), float(doc["origin"]))


@dataclass(frozen=True)
class ParticleSpec:
    """One distinguishable particle: its mass and an optional explicit collapse rate.

    If collapse_rate is None the dynamics layer derives it from the mass law;
    a non-None value overrides that law for this particle.
    """

    mass: float
    label: str = ""
    collapse_rate: float | None = None

    def __post_init__(self):
        if self.mass <= 0:
            raise ParameterError(f"particle mass must be > 0, got {self.mass}")
        if self.collapse_rate is not None and self.collapse_rate < 0:
            raise ParameterError("collapse_rate must be >= 0 when given")

    def to_json(self) -> dict:
        return {"mass": self.mass, "label": self.label, "collapse_rate": self.collapse_rate}

    @classmethod
    def from_json(cls, doc: Mapping) -> "ParticleSpec":
        rate = doc.get("collapse_rate")
        return cls(float(doc["mass"]), str(doc.get("label", "")),
                   None if rate is None else float(rate))


def nucleon(label: str = "") -> ParticleSpec:
    """Unit-mass reference particle."""
    return ParticleSpec(mass=1.0, label=label)


@dataclass(frozen=True)
class WaveFunction:
    """Exact N-particle state: complex amplitudes over the N-fold grid product.

    amplitudes has shape (cell_count,) * N and satisfies
    sum(|amplitudes|^2) * cell_width**N == 1 to 1e-12.
    """

    grid: SpatialGrid
    particles: tuple[ParticleSpec, ...]
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        particles = tuple(self.particles)
        object.__setattr__(self, "particles", particles)
        n = len(particles)
        if n == 0:
            raise ParameterError("a WaveFunction needs at least one particle")
        if n > MAX_EXACT_PARTICLES:
            raise ParameterError(
                f"exact tier is capped at N <= {MAX_EXACT_PARTICLES} particles "
                f"(got {n}); use BranchState for macroscopic N"
            )
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        expected = (self.grid.cell_count,) * n
        if amps.size != self.grid.cell_count ** n:
            raise ParameterError(
                f"amplitude count {amps.size} != cell_count^N = {self.grid.cell_count ** n}"
            )
        amps = amps.reshape(expected).copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        norm2 = float(np.sum(np.abs(amps) ** 2)) * self.grid.cell_width ** n
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ParameterError(
                f"state not normalized: sum|a|^2 * dx^N = {norm2!r}; use normalize()"
            )

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2)) * self.grid.cell_width ** self.n_particles

    def probability_weights(self) -> np.ndarray:
        """P(configuration) for each index tuple; sums to 1."""
        return np.abs(self.amplitudes) ** 2 * self.grid.cell_width ** self.n_particles

    def with_amplitudes(self, raw: np.ndarray, time: float | None = None) -> "WaveFunction":
        """New state from raw (unnormalized) amplitudes on the same grid/particles."""
        return normalize(raw, self.grid, self.particles,
                         time=self.time if time is None else time)

    def total_mass(self) -> float:
        return float(sum(p.mass for p in self.particles))

    def to_json(self) -> dict:
        flat = self.amplitudes.ravel()
        return {
            "kind": "wavefunction",
            "grid": self.grid.to_json(),
            "particles": [p.to_json() for p in self.particles],
            "time": self.time,
            "amplitudes": [[float(a.real), float(a.imag)] for a in flat],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "WaveFunction":
        grid = SpatialGrid.from_json(doc["grid"])
        particles = tuple(ParticleSpec.from_json(p) for p in doc["particles"])
        flat = np.array([complex(re, im) for re, im in doc["amplitudes"]], dtype=np.complex128)
        return cls(grid, particles, flat.reshape((grid.cell_count,) * len(particles)),
                   time=float(doc.get("time", 0.0)))


def normalize(raw_amplitudes, grid: SpatialGrid, particles, time: float = 0.0) -> WaveFunction:
    """Scale raw amplitudes by a positive real so the normalization invariant holds.

    `particles` may be a sequence of ParticleSpec or an integer count of
    unit-mass particles.
    """
    if isinstance(particles, int):
        particles = tuple(nucleon(f"p{k}") for k in range(particles))
    else:
        particles = tuple(particles)
    n = len(particles)
    amps = np.asarray(raw_amplitudes, dtype=np.complex128)
    norm2 = float(np.sum(np.abs(amps) ** 2)) * grid.cell_width ** n
    if norm2 <= 0.0 or not np.isfinite(norm2):
        raise ZeroStateError("cannot normalize an all-zero (or non-finite) amplitude array")
    return WaveFunction(grid, particles, amps / np.sqrt(norm2), time=time)


def superpose(states: Sequence[tuple[complex, WaveFunction]]) -> WaveFunction:
    """Pointwise linear combination of same-grid states, renormalized."""
    if not states:
        raise EmptyProductError("superpose needs at least one (coefficient, state) term")
    _, first = states[0]
    for _, s in states[1:]:
        if s.grid != first.grid or s.particles != first.particles:
            raise IncompatibleStateError("superpose requires a shared grid and particle list")
    acc = np.zeros_like(first.amplitudes)
    for c, s in states:
        acc = acc + complex(c) * s.amplitudes
    return normalize(acc, first.grid, first.particles, time=first.time)


def product_state(factors: Sequence[WaveFunction]) -> WaveFunction:
    """Tensor product of single-particle factors: amplitudes(i1..iN) = prod_k factor_k(ik)."""
    if not factors:
        raise EmptyProductError("product_state needs at least one factor")
    grid = factors[0].grid
    for f in factors:
        if f.grid != grid:
            raise IncompatibleStateError("product factors must share a grid")
        if f.n_particles != 1:
            raise IncompatibleStateError("product factors must be single-particle states")
    amps = factors[0].amplitudes
    for f in factors[1:]:
        amps = np.multiply.outer(amps, f.amplitudes)
    particles = tuple(p for f in factors for p in f.particles)
    return normalize(amps, grid, particles, time=factors[0].time)


def marginal_density(state: WaveFunction, k: int) -> np.ndarray:
    """Probability density of particle k over cells; integrates to 1.

    entry(i) = sum over the other indices of |amplitude|^2 * cell_width^(N-1).
    """
    n = state.n_particles
    if not 0 <= k < n:
        raise IndexError(f"particle index {k} out of range for N={n}")
    prob = np.abs(state.amplitudes) ** 2
    axes = tuple(ax for ax in range(n) if ax != k)
    dens = prob.sum(axis=axes) if axes else prob
    return dens * state.grid.cell_width ** (n - 1)


def gaussian_packet(grid: SpatialGrid, particle: ParticleSpec, center: float,
                    sigma: float, momentum: float = 0.0, time: float = 0.0) -> WaveFunction:
    """Single-particle Gaussian with position density std sigma and mean momentum."""
    if sigma <= 0:
        raise ParameterError("sigma must be > 0")
    x = grid.cell_centers()
    raw = np.exp(-((x - center) ** 2) / (4.0 * sigma ** 2) + 1j * momentum * x)
    return normalize(raw, grid, (particle,), time=time)


def point_state(grid: SpatialGrid, particle: ParticleSpec, cell: int,
                time: float = 0.0) -> WaveFunction:
    """Single-particle state supported on one cell."""
    raw = np.zeros(grid.cell_count, dtype=np.complex128)
    raw[cell] = 1.0
    return normalize(raw, grid, (particle,), time=time)


def two_bump_state(grid: SpatialGrid, particle: ParticleSpec, left_center: float,
                   right_center: float, sigma: float,
                   left_weight: float = 0.5) -> WaveFunction:
    """Superposition of two Gaussian bumps with probability left_weight / 1 - left_weight."""
    if not 0.0 < left_weight < 1.0:
        raise ParameterError("left_weight must lie in (0, 1)")
    left = gaussian_packet(grid, particle, left_center, sigma)
    right = gaussian_packet(grid, particle, right_center, sigma)
    return superpose([(np.sqrt(left_weight), left), (np.sqrt(1.0 - left_weight), right)])


# ---------------------------------------------------------------------------
# Branch tier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Named disjoint region with a center position."""

    name: str
    center: float


@dataclass(frozen=True)
class Branch:
    """One macroscopically distinct term: amplitude and per-region occupancy."""

    amplitude: complex
    occupancy: tuple[int, ...]

    @property
    def weight(self) -> float:
        return abs(self.amplitude) ** 2


@dataclass(frozen=True)
class BranchState:
    """Macroscopic model: weighted branches assigning N particles to regions.

    Branch occupancies are aligned with the `regions` tuple.  All particles
    share one mass (`particle_mass`); regions share one width
    (`region_width`), used to convert occupancy mass to a density.
    """

    regions: tuple[Region, ...]
    particle_count: int
    particle_mass: float
    branches: tuple[Branch, ...]
    region_width: float = 1.0
    time: float = 0.0

    def __post_init__(self):
        regions = tuple(self.regions)
        branches = tuple(self.branches)
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "branches", branches)
        if len({r.name for r in regions}) != len(regions):
            raise ParameterError("region names must be distinct")
        if self.particle_count < 1:
            raise ParameterError("particle_count must be >= 1")
        if self.particle_mass <= 0:
            raise ParameterError("particle_mass must be > 0")
        if self.region_width <= 0:
            raise ParameterError("region_width must be > 0")
        if not branches:
            raise ZeroStateError("a BranchState needs at least one branch")
        seen = set()
        total = 0.0
        for b in branches:
            if len(b.occupancy) != len(regions):
                raise ParameterError("branch occupancy length must match region count")
            if any(c < 0 for c in b.occupancy):
                raise ParameterError("occupancies must be nonnegative")
            if sum(b.occupancy) != self.particle_count:
                raise ParameterError(
                    f"branch occupancy {b.occupancy} does not sum to N={self.particle_count}"
                )
            if b.occupancy in seen:
                raise ParameterError("branch occupancies must be pairwise distinct")
            seen.add(b.occupancy)
            total += b.weight
        if abs(total - 1.0) > NORM_TOL:
            raise ParameterError(f"branch weights sum to {total!r}, not 1; renormalize first")

    @property
    def n_particles(self) -> int:
        return self.particle_count

    def weights(self) -> np.ndarray:
        return np.array([b.weight for b in self.branches])

    def region_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.regions)

    def region_index(self, name: str) -> int:
        for i, r in enumerate(self.regions):
            if r.name == name:
                return i
        raise KeyError(name)

    def total_mass(self) -> float:
        return self.particle_count * self.particle_mass

    def norm_squared(self) -> float:
        return float(sum(b.weight for b in self.branches))

    def with_branches(self, amplitudes: Sequence[complex],
                      occupancies: Sequence[tuple[int, ...]] | None = None,
                      time: float | None = None) -> "BranchState":
        """New state with replaced branch amplitudes (renormalized); drops zero branches."""
        occs = [b.occupancy for b in self.branches] if occupancies is None else list(occupancies)
        amps = np.asarray(amplitudes, dtype=np.complex128)
        norm2 = float(np.sum(np.abs(amps) ** 2))
        if norm2 <= 0.0 or not np.isfinite(norm2):
            raise ZeroStateError("all branch amplitudes vanished")
        amps = amps / np.sqrt(norm2)
        kept = [(a, o) for a, o in zip(amps, occs) if abs(a) ** 2 > 0.0]
        return BranchState(
            regions=self.regions,
            particle_count=self.particle_count,
            particle_mass=self.particle_mass,
            branches=tuple(Branch(complex(a), tuple(o)) for a, o in kept),
            region_width=self.region_width,
            time=self.time if time is None else time,
        )

    def to_json(self) -> dict:
        return {
            "kind": "branch_state",
            "regions": [{"name": r.name, "center": r.center} for r in self.regions],
            "particle_count": self.particle_count,
            "particle_mass": self.particle_mass,
            "region_width": self.region_width,
            "time": self.time,
            "branches": [
                {
                    "amplitude": [float(b.amplitude.real), float(b.amplitude.imag)],
                    "occupancy": {r.name: c for r, c in zip(self.regions, b.occupancy)},
                }
                for b in self.branches
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "BranchState":
        regions = tuple(Region(str(r["name"]), float(r["center"])) for r in doc["regions"])
        names = [r.name for r in regions]
        branches = tuple(
            Branch(
                complex(b["amplitude"][0], b["amplitude"][1]),
                tuple(int(b["occupancy"].get(n, 0)) for n in names),
            )
            for b in doc["branches"]
        )
        return cls(
            regions=regions,
            particle_count=int(doc["particle_count"]),
            particle_mass=float(doc["particle_mass"]),
            branches=branches,
            region_width=float(doc.get("region_width", 1.0)),
            time=float(doc.get("time", 0.0)),
        )


def collective_superposition(regions: Sequence[Region], n_particles: int, mass: float,
                             amplitudes: Sequence[complex] | None = None,
                             region_width: float = 1.0) -> BranchState:
    """All-N-in-one-region branches, one per region (equal amplitudes by default)."""
    regions = tuple(regions)
    if amplitudes is None:
        amplitudes = [1.0 / np.sqrt(len(regions))] * len(regions)
    if len(amplitudes) != len(regions):
        raise ParameterError("need one amplitude per region")
    branches = []
    for j, amp in enumerate(amplitudes):
        occ = tuple(n_particles if i == j else 0 for i in range(len(regions)))
        branches.append(Branch(complex(amp), occ))
    return BranchState(regions, n_particles, mass, tuple(branches), region_width=region_width)


def split_product(regions: Sequence[Region], n_particles: int, mass: float,
                  counts: Sequence[int] | None = None,
                  region_width: float = 1.0) -> BranchState:
    """Single-branch state with a fixed split of particles across regions.

    Default split is even (requires N divisible by the region count).
    """
    regions = tuple(regions)
    if counts is None:
        if n_particles % len(regions) != 0:
            raise ParameterError("even split needs N divisible by the region count")
        counts = [n_particles // len(regions)] * len(regions)
    branch = Branch(1.0 + 0.0j, tuple(int(c) for c in counts))
    return BranchState(regions, n_particles, mass, (branch,), region_width=region_width)


def marble_state(in_weight: float, n_particles: int = 1, mass: float = 1.0,
                 box_center: float = 0.0, outside_center: float = 10.0,
                 region_width: float = 1.0) -> BranchState:
    """Two-branch in-the-box / out-of-the-box state with P(in) = in_weight."""
    if not 0.0 < in_weight < 1.0:
        raise ParameterError("in_weight must lie in (0, 1)")
    regions = (Region("in", box_center), Region("out", outside_center))
    return collective_superposition(
        regions, n_particles, mass,
        amplitudes=[np.sqrt(in_weight), np.sqrt(1.0 - in_weight)],
        region_width=region_width,
    )


@dataclass(frozen=True)
class MassObservablePartition:
    """A determinable (e.g. location) split into labeled determinate cell/region sets.

    For WaveFunction states the sets contain grid cell indices; for
    BranchState states they contain region names.
    """

    name: str
    cells_by_determinate: tuple[tuple[str, frozenset], ...]

    @classmethod
    def of(cls, name: str, sets: Mapping[str, Iterable]) -> "MassObservablePartition":
        return cls(name, tuple((str(k), frozenset(v)) for k, v in sets.items()))

    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.cells_by_determinate)

    @classmethod
    def per_cell(cls, grid: SpatialGrid) -> "MassObservablePartition":
        """Location determinable with one determinate per grid cell."""
        return cls.of("location", {f"cell_{i}": [i] for i in range(grid.cell_count)})

    @classmethod
    def per_region(cls, state: BranchState) -> "MassObservablePartition":
        return cls.of("location", {r.name: [r.name] for r in state.regions})


# ---------------------------------------------------------------------------
# JSON state round-tripping (CLI fixtures)
# ---------------------------------------------------------------------------

def state_to_json(state) -> dict:
    return state.to_json()


def state_from_json(doc: Mapping):
    kind = doc.get("kind")
    if kind == "wavefunction":
        return WaveFunction.from_json(doc)
    if kind == "branch_state":
        return BranchState.from_json(doc)
    raise ParameterError(f"unknown state kind {kind!r}")
