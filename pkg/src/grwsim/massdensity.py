"""Mass-density field analysis: mean, variance, accessibility ratio, degrees.

The mass observable of a cell (or region) is the occupancy-weighted mass
``sum_k m_k * [particle k inside]`` — a diagonal operator in the position
basis, so its full distribution can be read off the squared amplitudes.  The
module reports, per cell/region:

* mean density (mass / length),
* variance of the cell-integrated mass (mass^2, exact occupancy statistics),
* accessibility ratio = sqrt(variance) / integrated mass (dimensionless),
* an accessible/non-accessible mask from a strict threshold comparison.

The ratio is undefined (NaN, excluded from classification) wherever the
integrated mass sits below a floor, since the definition divides by it.

Degree ascription: a state possesses a location determinate to the degree of
its projection weight onto that determinate — computed as the expected mass
fraction, which coincides with the squared projection for single particles
and for collective branches, and guarantees the degrees sum to 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParameterError, PartitionError
from .states import (
    BranchState,
    MassObservablePartition,
    WaveFunction,
    marginal_density,
)

DEFAULT_THRESHOLD = 0.1
MASS_FLOOR_REL = 1e-12

# Indeterminacy taxonomy labels.  Degree ascription only ever produces the
# first three; the gappy and relativized kinds exist as report vocabulary.
DETERMINATE = "determinate"
EFFECTIVELY_DETERMINATE = "effectively-determinate"
GLUTTY_DEGREE = "indeterminate-glutty-degree"
GAPPY = "indeterminate-gappy"
GLUTTY_RELATIVIZED = "indeterminate-glutty-relativized"


# ---------------------------------------------------------------------------
# Occupancy moments
# ---------------------------------------------------------------------------

def _single_probs(state: WaveFunction) -> np.ndarray:
    """P(particle k in cell i), shape (N, L)."""
    dx = state.grid.cell_width
    return np.stack([marginal_density(state, k) * dx for k in range(state.n_particles)])

def _pair_probs(state: WaveFunction, k: int, j: int) -> np.ndarray:
    """Joint P(particle k in cell a, particle j in cell b), shape (L, L)."""
    n = state.n_particles
    prob = state.probability_weights()
    axes = tuple(ax for ax in range(n) if ax not in (k, j))
    joint = prob.sum(axis=axes) if axes else prob
    if k > j:  # axes of `joint` follow ascending particle order
        joint = joint.T
    return joint


def _wavefunction_moments(state: WaveFunction, cell_sets: Sequence[frozenset] | None):
    """(expected mass, mass variance) per cell, or per cell-set when given."""
    masses = np.array([p.mass for p in state.particles])
    n = state.n_particles
    singles = _single_probs(state)  # (N, L)
    pairs = {}
    for k in range(n):
        for j in range(k + 1, n):
            pairs[(k, j)] = _pair_probs(state, k, j)

    if cell_sets is None:
        mean = masses @ singles
        second = (masses ** 2) @ singles
        for (k, j), joint in pairs.items():
            second = second + 2.0 * masses[k] * masses[j] * np.diag(joint)
    else:
        idx = [np.fromiter(s, dtype=int) for s in cell_sets]
        p_in = np.stack([singles[:, i].sum(axis=1) for i in idx], axis=1)  # (N, nsets)
        mean = masses @ p_in
        second = (masses ** 2) @ p_in
        for (k, j), joint in pairs.items():
            both = np.array([joint[np.ix_(i, i)].sum() for i in idx])
            second = second + 2.0 * masses[k] * masses[j] * both
    var = np.maximum(second - mean ** 2, 0.0)
    return mean, var


def _branch_moments(state: BranchState, region_sets: Sequence[frozenset] | None):
    """(expected mass, mass variance) per region, or per named region group."""
    w = state.weights()
    occ = np.array([b.occupancy for b in state.branches], dtype=float)  # (B, R)
    mass_per_branch = occ * state.particle_mass
    if region_sets is not None:
        cols = []
        for s in region_sets:
            sel = [state.region_index(name) for name in s]
            cols.append(mass_per_branch[:, sel].sum(axis=1))
        mass_per_branch = np.stack(cols, axis=1)
    mean = w @ mass_per_branch
    second = w @ mass_per_branch ** 2
    return mean, np.maximum(second - mean ** 2, 0.0)


# ---------------------------------------------------------------------------
# Spec operations
# ---------------------------------------------------------------------------

def mass_density(state, regions: Mapping[str, Iterable] | None = None) -> np.ndarray:
    """Mean mass density per cell (WaveFunction) or per region (BranchState).

    Values are densities: integrated over a cell/region width they sum to the
    total mass of the state.
    """
    mean, _ = _moments(state, regions)
    return mean / _widths(state)


def mass_variance(state, regions: Mapping[str, Iterable] | None = None) -> np.ndarray:
    """Variance of the cell/region-integrated mass observable (mass^2 units)."""
    _, var = _moments(state, regions)
    return var


def _moments(state, regions):
    sets = None if regions is None else [frozenset(v) for v in regions.values()]
    if isinstance(state, WaveFunction):
        return _wavefunction_moments(state, sets)
    if isinstance(state, BranchState):
        return _branch_moments(state, sets)
    raise ParameterError(f"unsupported state type {type(state).__name__}")


def _widths(state) -> float:
    return state.grid.cell_width if isinstance(state, WaveFunction) else state.region_width


def accessibility_ratio(mean_density: np.ndarray, variance: np.ndarray,
                        widths: float | np.ndarray = 1.0,
                        mass_floor: float | None = None) -> np.ndarray:
    """ratio = sqrt(variance) / integrated mass; NaN where the mass is below floor.

    The ratio compares the mass fluctuation of a cell to the mass it holds,
    both as integrated masses, making it dimensionless.  Cells carrying less
    than `mass_floor` (default: 1e-12 of the total) are flagged undefined —
    they are data, not errors.
    """
    mean_density = np.asarray(mean_density, dtype=float)
    variance = np.asarray(variance, dtype=float)
    integrated = mean_density * widths
    if mass_floor is None:
        mass_floor = MASS_FLOOR_REL * float(integrated.sum())
    ratio = np.full_like(integrated, np.nan)
    defined = integrated > mass_floor
    ratio[defined] = np.sqrt(variance[defined]) / integrated[defined]
    return ratio


def classify_accessible(ratio: np.ndarray, eta: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Accessible mask: ratio strictly below eta; undefined cells are excluded."""
    if eta <= 0:
        raise ParameterError(f"threshold eta must be > 0, got {eta}")
    ratio = np.asarray(ratio, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.isfinite(ratio) & (ratio < eta)


@dataclass(frozen=True)
class MassDensityField:
    """Per-cell (or per-region) mass-density analysis with its threshold."""

    positions: np.ndarray
    widths: np.ndarray
    labels: tuple[str, ...]
    mean_density: np.ndarray
    variance: np.ndarray
    ratio: np.ndarray
    accessible: np.ndarray
    threshold: float
    mass_floor: float

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.ratio)

    @property
    def integrated_mass(self) -> np.ndarray:
        return self.mean_density * self.widths

    @property
    def total_mass(self) -> float:
        return float(self.integrated_mass.sum())

    def reclassified(self, eta: float) -> "MassDensityField":
        return MassDensityField(
            self.positions, self.widths, self.labels, self.mean_density,
            self.variance, self.ratio, classify_accessible(self.ratio, eta),
            eta, self.mass_floor,
        )

    def summary(self) -> dict:
        return {
            "labels": list(self.labels),
            "positions": [float(x) for x in self.positions],
            "mean_density": [float(x) for x in self.mean_density],
            "variance": [float(x) for x in self.variance],
            "ratio": [None if not np.isfinite(x) else float(x) for x in self.ratio],
            "accessible": [bool(x) for x in self.accessible],
            "threshold": self.threshold,
            "total_mass": self.total_mass,
        }

    def to_json(self) -> dict:
        doc = self.summary()
        doc["widths"] = [float(w) for w in np.broadcast_to(self.widths, self.positions.shape)]
        doc["mass_floor"] = self.mass_floor
        return doc

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "cell_center", "mean", "variance", "ratio", "accessible"])
            for i in range(len(self.positions)):
                r = self.ratio[i]
                writer.writerow([
                    self.labels[i],
                    repr(float(self.positions[i])),
                    repr(float(self.mean_density[i])),
                    repr(float(self.variance[i])),
                    "undefined" if not np.isfinite(r) else repr(float(r)),
                    int(self.accessible[i]),
                ])

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))


def analyze_state(state, eta: float = DEFAULT_THRESHOLD,
                  regions: Mapping[str, Iterable] | None = None,
                  smear_alpha: float | None = None,
                  mass_floor_rel: float = MASS_FLOOR_REL) -> MassDensityField:
    """Full per-cell/per-region analysis of a state at threshold eta.

    `regions`: optional named cell-index sets (WaveFunction) or region-name
    sets (BranchState) to aggregate over; occupancy statistics are computed
    for the aggregated mass observable, not summed from per-cell values.
    `smear_alpha`: optional Gaussian smearing width applied to the reported
    mean density only (off by default).
    """
    mean, var = _moments(state, regions)
    width = _widths(state)

    if isinstance(state, WaveFunction) and regions is None:
        positions = state.grid.cell_centers()
        labels = tuple(f"cell_{i}" for i in range(state.grid.cell_count))
    elif isinstance(state, BranchState) and regions is None:
        positions = np.array([r.center for r in state.regions])
        labels = state.region_names()
    else:
        labels = tuple(regions.keys())
        positions = np.array([_set_position(state, s) for s in regions.values()])

    density = mean / width
    if smear_alpha is not None:
        if not isinstance(state, WaveFunction) or regions is not None:
            raise ParameterError("smearing applies to per-cell WaveFunction fields only")
        density = smear_density(density, state.grid.cell_width, smear_alpha)

    mass_floor = mass_floor_rel * float(mean.sum())
    ratio = accessibility_ratio(density, var, widths=width, mass_floor=mass_floor)
    return MassDensityField(
        positions=positions,
        widths=np.full(len(labels), float(width)),
        labels=labels,
        mean_density=density,
        variance=var,
        ratio=ratio,
        accessible=classify_accessible(ratio, eta),
        threshold=eta,
        mass_floor=mass_floor,
    )


def _set_position(state, members) -> float:
    if isinstance(state, WaveFunction):
        centers = state.grid.cell_centers()
        return float(np.mean([centers[i] for i in members]))
    return float(np.mean([state.regions[state.region_index(n)].center for n in members]))


def smear_density(density: np.ndarray, cell_width: float, alpha: float) -> np.ndarray:
    """Periodic Gaussian smoothing of a density profile; preserves total mass."""
    if alpha <= 0:
        raise ParameterError("smearing width must be > 0")
    n = len(density)
    offsets = np.arange(n)
    circular = np.minimum(offsets, n - offsets) * cell_width
    kernel = np.exp(-(circular ** 2) / (2.0 * alpha ** 2))
    kernel /= kernel.sum()
    return np.real(np.fft.ifft(np.fft.fft(density) * np.fft.fft(kernel)))


# ---------------------------------------------------------------------------
# Degree ascription
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DegreeProfile:
    """Degrees of the determinates of one determinable; degrees sum to 1."""

    determinable: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        total = sum(d for _, d in self.entries)
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"degrees sum to {total!r}, not 1")
        if any(d < -1e-15 or d > 1.0 + 1e-12 for _, d in self.entries):
            raise ParameterError("degrees must lie in [0, 1]")

    def degrees(self) -> dict[str, float]:
        return dict(self.entries)

    def max_entry(self) -> tuple[str, float]:
        return max(self.entries, key=lambda e: e[1])


def degree_of(state, partition: MassObservablePartition) -> DegreeProfile:
    """Degree profile of a state over a determinate partition.

    degree(label) = expected fraction of the total mass inside the label's
    cell/region set; for single particles this equals the squared projection
    onto the set, and for collective branches it equals the branch weight.
    """
    if isinstance(state, WaveFunction):
        all_cells = set(range(state.grid.cell_count))
        covered = set()
        for _, members in partition.cells_by_determinate:
            cells = {int(c) for c in members}
            if covered & cells:
                raise PartitionError("determinate cell-sets overlap")
            covered |= cells
        support = {
            int(i)
            for k in range(state.n_particles)
            for i in np.nonzero(marginal_density(state, k) > 0.0)[0]
        }
        if not support <= covered:
            raise PartitionError("partition does not cover the state's support")
        if not covered <= all_cells:
            raise PartitionError("partition references cells outside the grid")
        singles = _single_probs(state)
        masses = np.array([p.mass for p in state.particles])
        total = masses.sum()
        entries = []
        for label, members in partition.cells_by_determinate:
            idx = np.fromiter((int(c) for c in members), dtype=int)
            frac = float(masses @ singles[:, idx].sum(axis=1) / total) if len(idx) else 0.0
            entries.append((label, frac))
    elif isinstance(state, BranchState):
        names = set(state.region_names())
        covered = set()
        for _, members in partition.cells_by_determinate:
            ms = {str(m) for m in members}
            if covered & ms:
                raise PartitionError("determinate region-sets overlap")
            covered |= ms
        if not names <= covered:
            raise PartitionError("partition does not cover the state's regions")
        w = state.weights()
        occ = np.array([b.occupancy for b in state.branches], dtype=float)
        entries = []
        for label, members in partition.cells_by_determinate:
            sel = [state.region_index(n) for n in members if n in names]
            frac = float(w @ occ[:, sel].sum(axis=1) / state.particle_count) if sel else 0.0
            entries.append((label, frac))
    else:
        raise ParameterError(f"unsupported state type {type(state).__name__}")

    # absorb float dust into the dominant entry so the sum-to-1 invariant holds
    drift = 1.0 - sum(d for _, d in entries)
    if abs(drift) < 1e-12:
        i = max(range(len(entries)), key=lambda j: entries[j][1])
        entries[i] = (entries[i][0], entries[i][1] + drift)
    return DegreeProfile(partition.name, tuple(entries))


@dataclass(frozen=True)
class IndeterminacyReport:
    """Classification of a degree profile plus its sub-dominant components."""

    classification: str
    profile: DegreeProfile
    threshold: float
    degree_margin: float
    dominant: tuple[str, float]
    minor_components: tuple[tuple[str, float, bool], ...]  # (label, degree, accessible)


def indeterminacy_report(profile: DegreeProfile, eta: float = DEFAULT_THRESHOLD,
                         degree_margin: float | None = None) -> IndeterminacyReport:
    """Classify a degree profile as determinate / effectively-determinate / glutty.

    `degree_margin` is the epistemic slack on the dominant degree: above
    1 - margin the profile counts as effectively determinate.  It defaults to
    eta / 2 and is exposed because no principled value for it exists — only
    its existence is forced by the determinacy of outcomes.

    Minor components are reported with their own accessibility verdict from
    the two-outcome ratio law sqrt((1 - d) / d) < eta, so a tail of degree
    0.01 shows up as present but non-accessible.
    """
    if degree_margin is None:
        degree_margin = eta / 2.0
    if not 0.0 < degree_margin < 1.0:
        raise ParameterError("degree_margin must lie in (0, 1)")
    dominant = profile.max_entry()
    exact = [label for label, d in profile.entries if d >= 1.0 - 1e-12]
    if len(exact) == 1:
        classification = DETERMINATE
    elif dominant[1] > 1.0 - degree_margin:
        classification = EFFECTIVELY_DETERMINATE
    else:
        classification = GLUTTY_DEGREE
    minors = tuple(
        (label, d, d > 0.0 and math.sqrt((1.0 - d) / d) < eta)
        for label, d in profile.entries
        if label != dominant[0] and d > 0.0
    )
    return IndeterminacyReport(
        classification=classification,
        profile=profile,
        threshold=eta,
        degree_margin=degree_margin,
        dominant=dominant,
        minor_components=minors,
    )
