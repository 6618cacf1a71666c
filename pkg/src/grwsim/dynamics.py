"""Time evolution: unitary steps, spontaneous localization jumps, CSL steps.

Integration scheme
------------------
* Unitary part: symmetric split-step Fourier on the periodic grid (kinetic
  term applied exactly in momentum space), hbar = 1.
* Jumps: each particle jumps independently with probability rate * dt per
  step; a jump multiplies the amplitudes by a Gaussian of amplitude width
  2 * alpha_length^2 along that particle's coordinate (post-jump density
  width = alpha_length), centered at a Born-weighted random point.
* Continuous (CSL-style) evolution: one explicit first-order step of the
  linear stochastic equation — unitary substep, then a multiplicative
  (1 + noise coupling - quadratic drift) factor per configuration — followed
  by renormalization.  The noise is left raw (uncooked) on this exact tier.
* BranchState dynamics act at the branch level and enforce Born-correct
  selection: a jump picks a branch with its weight and suppresses the others
  by the Gaussian overlap of their particle positions; the continuous mode
  diffuses branch weights as a bounded martingale that absorbs at a single
  branch with Born frequencies.

Physical collapse rates (1e-16 per second) make desk-scale jumps
unobservable; experiments run with an amplification factor that is recorded
in every trajectory and report.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StepTooLargeError, ZeroStateError
from . import massdensity
from .states import (
    Branch,
    BranchState,
    ParticleSpec,
    SpatialGrid,
    WaveFunction,
    marginal_density,
    normalize,
)

NORM_FLOOR = 1e-300
ABSORB_TOL = 1e-12
MAX_JUMP_PROBABILITY = 0.1

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CollapseParameters:
    """Constants of the spontaneous-localization dynamics.

    alpha_length: spatial accuracy of a localization (defaults to the
        historical 1e-5 cm, i.e. 1e-7 in meter-based simulation units).
    lambda_base: localization rate of a reference-mass particle (1e-16 /s).
    reference_mass: the mass m0 that anchors both the rate law and the
        coupling of the continuous equation (nucleon mass = 1 unit).
    rate_mass_exponent: lambda scales as (m / m0)**exponent; 1 reproduces the
        roughly-2000x lower electron rate, 2 is also in circulation.
    csl_gamma: strength of the quadratic drift term; None derives the
        norm-preserving-in-mean value noise_amplitude^2 * m0^2 / 2.
    noise_amplitude: scale of the white-noise coupling to the mass density.
    lambda_amplification: desk-scale amplification factor for rates; always
        recorded alongside results.
    time_unit_scale: physical seconds per simulation time unit (metadata).
    """

    alpha_length: float = 1e-7
    lambda_base: float = 1e-16
    reference_mass: float = 1.0
    rate_mass_exponent: float = 1.0
    csl_gamma: float | None = None
    noise_amplitude: float = 0.0
    lambda_amplification: float = 1.0
    time_unit_scale: float = 1.0

    def __post_init__(self):
        if self.alpha_length <= 0:
            raise ParameterError("alpha_length must be > 0")
        if self.lambda_base < 0:
            raise ParameterError("lambda_base must be >= 0")
        if self.reference_mass <= 0:
            raise ParameterError("reference_mass must be > 0")
        if self.noise_amplitude < 0:
            raise ParameterError("noise_amplitude must be >= 0")
        if self.lambda_amplification <= 0:
            raise ParameterError("lambda_amplification must be > 0")
        if self.time_unit_scale <= 0:
            raise ParameterError("time_unit_scale must be > 0")

    def effective_gamma(self) -> float:
        if self.csl_gamma is not None:
            return self.csl_gamma
        return 0.5 * self.noise_amplitude ** 2 * self.reference_mass ** 2

    def to_json(self) -> dict:
        return {
            "alpha_length": self.alpha_length,
            "lambda_base": self.lambda_base,
            "reference_mass": self.reference_mass,
            "rate_mass_exponent": self.rate_mass_exponent,
            "csl_gamma": self.csl_gamma,
            "noise_amplitude": self.noise_amplitude,
            "lambda_amplification": self.lambda_amplification,
            "time_unit_scale": self.time_unit_scale,
        }

    @classmethod
    def from_json(cls, doc) -> "CollapseParameters":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


@dataclass(frozen=True)
class Hamiltonian:
    """Free kinetic term plus an optional per-cell potential (same for all particles)."""

    include_kinetic: bool = True
    potential: np.ndarray | None = None

    def __post_init__(self):
        if self.potential is not None:
            pot = np.asarray(self.potential, dtype=float).copy()
            pot.setflags(write=False)
            object.__setattr__(self, "potential", pot)

    @classmethod
    def zero(cls) -> "Hamiltonian":
        return cls(include_kinetic=False, potential=None)

    @classmethod
    def free(cls) -> "Hamiltonian":
        return cls(include_kinetic=True, potential=None)

    @property
    def is_zero(self) -> bool:
        return not self.include_kinetic and self.potential is None


def effective_rate(particle: ParticleSpec, params: CollapseParameters) -> float:
    """Mass-law localization rate: lambda_base * (mass / reference_mass)**exponent."""
    return params.lambda_base * (particle.mass / params.reference_mass) ** params.rate_mass_exponent


def _particle_rate(particle: ParticleSpec, params: CollapseParameters) -> float:
    base = particle.collapse_rate if particle.collapse_rate is not None \
        else effective_rate(particle, params)
    return base * params.lambda_amplification


def unitary_step(state: WaveFunction, hamiltonian: Hamiltonian | None, dt: float) -> WaveFunction:
    """One symmetric split-step of the Schroedinger evolution; norm-exact."""
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    h = hamiltonian if hamiltonian is not None else Hamiltonian.free()
    amps = state.amplitudes
    n = state.n_particles
    grid = state.grid

    if h.is_zero:
        return WaveFunction(grid, state.particles, amps, time=state.time + dt)

    phase_half = None
    if h.potential is not None:
        pot = np.asarray(h.potential, dtype=float)
        if pot.shape != (grid.cell_count,):
            raise ParameterError("potential must be a per-cell array matching the grid")
        total = np.zeros((grid.cell_count,) * n)
        for axis in range(n):
            shape = [1] * n
            shape[axis] = grid.cell_count
            total = total + pot.reshape(shape)
        phase_half = np.exp(-0.5j * total * dt)

    out = amps
    if phase_half is not None:
        out = out * phase_half
    if h.include_kinetic:
        k = 2.0 * np.pi * np.fft.fftfreq(grid.cell_count, d=grid.cell_width)
        for axis in range(n):
            shape = [1] * n
            shape[axis] = grid.cell_count
            kinetic_phase = np.exp(-0.5j * (k ** 2) / state.particles[axis].mass * dt)
            out = np.fft.ifft(np.fft.fft(out, axis=axis) * kinetic_phase.reshape(shape),
                              axis=axis)
    if phase_half is not None:
        out = out * phase_half
    return normalize(out, grid, state.particles, time=state.time + dt)


@dataclass(frozen=True)
class JumpEvent:
    """One spontaneous localization: when, which particle, where it centered."""

    time: float
    particle: int
    center: float
    pre_jump_branch_weights: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "time": self.time,
            "particle": self.particle,
            "center": self.center,
            "pre_jump_branch_weights": list(self.pre_jump_branch_weights),
        }


def sample_jumps(state: WaveFunction, dt: float, params: CollapseParameters,
                 rng: np.random.Generator) -> list[JumpEvent]:
    """Independent per-particle jump draws for one step of width dt.

    Jump probability is rate * dt per particle (first order; the total must
    stay below 0.1 for the linearization to hold).  A jump center is drawn
    from the Born-weighted localization distribution: pick a cell from the
    particle's marginal, then add Gaussian scatter of width alpha_length.
    """
    rates = [_particle_rate(p, params) for p in state.particles]
    if sum(rates) * dt >= MAX_JUMP_PROBABILITY:
        raise StepTooLargeError(
            f"total jump probability {sum(rates) * dt:.3g} per step exceeds "
            f"{MAX_JUMP_PROBABILITY}; reduce dt"
        )
    centers = state.grid.cell_centers()
    lo, hi = state.grid.extent()
    events = []
    for k, rate in enumerate(rates):
        if rate <= 0.0:
            continue
        if rng.random() >= rate * dt:
            continue
        weights = marginal_density(state, k) * state.grid.cell_width
        weights = weights / weights.sum()
        cell = rng.choice(len(centers), p=weights)
        center = centers[cell] + params.alpha_length * rng.standard_normal()
        center = min(max(center, lo), hi)
        events.append(JumpEvent(time=state.time, particle=k, center=float(center)))
    return events


def apply_localization(state: WaveFunction, k: int, center: float,
                       params: CollapseParameters) -> WaveFunction:
    """Multiply by the localization Gaussian along particle k and renormalize.

    The amplitude factor exp(-(x - center)^2 / (4 alpha^2)) leaves a density
    of standard deviation alpha_length when applied to a flat state; far
    supports keep a nonzero, exponentially small weight (the tails).
    """
    if not 0 <= k < state.n_particles:
        raise IndexError(f"particle index {k} out of range")
    lo, hi = state.grid.extent()
    if not lo <= center <= hi:
        raise ParameterError(f"center {center} outside grid extent [{lo}, {hi}]")
    x = state.grid.cell_centers()
    gauss = np.exp(-((x - center) ** 2) / (4.0 * params.alpha_length ** 2))
    shape = [1] * state.n_particles
    shape[k] = state.grid.cell_count
    raw = state.amplitudes * gauss.reshape(shape)
    norm2 = float(np.sum(np.abs(raw) ** 2)) * state.grid.cell_width ** state.n_particles
    if norm2 < NORM_FLOOR:
        raise ZeroStateError("state annihilated by localization (norm underflow)")
    return WaveFunction(state.grid, state.particles, raw / math.sqrt(norm2), time=state.time)


@dataclass(frozen=True)
class NoiseField:
    """Discrete white noise over grid cells: iid rows of variance 1/(dx * dt)."""

    values: np.ndarray  # shape (n_steps, cell_count)
    seed: int
    step_width: float
    cell_width: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def generate(cls, grid: SpatialGrid, n_steps: int, dt: float, seed: int) -> "NoiseField":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        sigma = 1.0 / math.sqrt(grid.cell_width * dt)
        values = rng.normal(0.0, sigma, size=(n_steps, grid.cell_count))
        return cls(values=values, seed=seed, step_width=dt, cell_width=grid.cell_width)

    def row(self, i: int) -> np.ndarray:
        return self.values[i]


def _noise_coupling(state: WaveFunction, noise_row: np.ndarray) -> np.ndarray:
    """sum_k m_k * noise[cell of particle k], per configuration."""
    n = state.n_particles
    acc = np.zeros((state.grid.cell_count,) * n)
    for axis in range(n):
        shape = [1] * n
        shape[axis] = state.grid.cell_count
        acc = acc + state.particles[axis].mass * noise_row.reshape(shape)
    return acc


def _mass_density_square(state: WaveFunction) -> np.ndarray:
    """Integral of the squared mass density per configuration: sum_r mu_r^2 / dx."""
    n = state.n_particles
    L = state.grid.cell_count
    masses = [p.mass for p in state.particles]
    acc = np.full((L,) * n, sum(m * m for m in masses))
    idx = np.arange(L)
    for a in range(n):
        for b in range(a + 1, n):
            shape_a = [1] * n
            shape_a[a] = L
            shape_b = [1] * n
            shape_b[b] = L
            same_cell = idx.reshape(shape_a) == idx.reshape(shape_b)
            acc = acc + 2.0 * masses[a] * masses[b] * same_cell
    return acc / state.grid.cell_width


def csl_step(state: WaveFunction, noise_row: np.ndarray, dt: float,
             params: CollapseParameters,
             hamiltonian: Hamiltonian | None = None) -> WaveFunction:
    """One explicit step of the linear noise-coupled evolution, renormalized.

    Unitary substep, then per-configuration factor
    ``1 + xi * (sum_k m_k V[x_k]) * dt - dt * gamma / m0^2 * sum_r mu_r^2 / dx``,
    then renormalization.  With noise_amplitude = 0 and gamma = 0 this reduces
    to unitary_step.
    """
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    noise_row = np.asarray(noise_row, dtype=float)
    if noise_row.shape != (state.grid.cell_count,):
        raise ParameterError("noise slice must match the grid")
    evolved = unitary_step(state, hamiltonian, dt)
    xi = params.noise_amplitude
    gamma = params.effective_gamma()
    if xi == 0.0 and gamma == 0.0:
        return evolved
    factor = 1.0 + xi * _noise_coupling(evolved, noise_row) * dt \
        - dt * gamma / params.reference_mass ** 2 * _mass_density_square(evolved)
    raw = evolved.amplitudes * factor
    norm2 = float(np.sum(np.abs(raw) ** 2)) * state.grid.cell_width ** state.n_particles
    if norm2 < NORM_FLOOR:
        raise ZeroStateError("norm underflow in continuous step")
    return WaveFunction(state.grid, state.particles, raw / math.sqrt(norm2),
                        time=evolved.time)


# ---------------------------------------------------------------------------
# Branch-level dynamics
# ---------------------------------------------------------------------------

def _region_of_slot(branch: Branch, slot: int) -> int:
    """Region index of the slot-th particle under the fill-in-order convention."""
    acc = 0
    for r, count in enumerate(branch.occupancy):
        acc += count
        if slot < acc:
            return r
    raise ParameterError(f"slot {slot} out of range")


def branch_jump(state: BranchState, params: CollapseParameters,
                rng: np.random.Generator, time: float) -> tuple[BranchState, JumpEvent]:
    """One localization at the branch level with Born-correct selection.

    The jumped particle slot is uniform; the jump centers on that slot's
    region in a branch drawn with its weight.  Every branch is then
    suppressed by the Gaussian overlap between its own slot position and the
    center, and the weights are renormalized — distant branches survive only
    with exponentially small tails.
    """
    weights = state.weights()
    pre = tuple(float(w) for w in weights)
    slot = int(rng.integers(state.particle_count))
    chosen = int(rng.choice(len(state.branches), p=weights / weights.sum()))
    center_region = _region_of_slot(state.branches[chosen], slot)
    center = state.regions[center_region].center
    amps = []
    for b in state.branches:
        pos = state.regions[_region_of_slot(b, slot)].center
        overlap = math.exp(-((pos - center) ** 2) / (4.0 * params.alpha_length ** 2))
        amps.append(b.amplitude * overlap)
    new_state = state.with_branches(amps, time=time)
    event = JumpEvent(time=time, particle=slot, center=float(center),
                      pre_jump_branch_weights=pre)
    return new_state, event


def branch_csl_step(state: BranchState, dt: float, params: CollapseParameters,
                    rng: np.random.Generator) -> BranchState:
    """Diffuse branch weights one step as a bounded martingale (Born selection).

    dp_b = 2 p_b sum_r (A_r(b) - <A_r>) dW_r with couplings proportional to
    each branch's region mass; weights absorb at a single branch, reached
    with frequency equal to the starting weight.
    """
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    p = state.weights()
    if len(p) == 1:
        return state.with_branches([b.amplitude for b in state.branches],
                                   time=state.time + dt)
    gamma = params.effective_gamma()
    coupling = math.sqrt(2.0 * gamma) / params.reference_mass / math.sqrt(state.region_width)
    occ = np.array([b.occupancy for b in state.branches], dtype=float)
    a = coupling * occ * state.particle_mass  # (B, R)
    a_bar = p @ a
    dw = rng.standard_normal(a.shape[1]) * math.sqrt(dt)
    p_new = p + 2.0 * p * ((a - a_bar) @ dw)
    p_new = np.clip(p_new, 0.0, None)
    total = p_new.sum()
    if total <= 0.0:
        raise ZeroStateError("all branch weights vanished in continuous step")
    p_new /= total
    if p_new.max() >= 1.0 - ABSORB_TOL:
        winner = int(np.argmax(p_new))
        p_new = np.zeros_like(p_new)
        p_new[winner] = 1.0
    amps = []
    for b, w_old, w_new in zip(state.branches, p, p_new):
        if w_new == 0.0:
            amps.append(0.0j)
        elif w_old > 0.0:
            amps.append(b.amplitude * math.sqrt(w_new / w_old))
        else:
            amps.append(complex(math.sqrt(w_new)))
    return state.with_branches(amps, time=state.time + dt)


def two_branch_weight_ensemble(p_left: float, n_trajectories: int, n_steps: int,
                               dt: float, params: CollapseParameters,
                               particle_count: int, particle_mass: float,
                               region_width: float, master_seed: int) -> np.ndarray:
    """Final left-branch weights of many two-branch continuous trajectories.

    Vectorized form of branch_csl_step for the two-collective-branch case:
    identical update rule (per-region noises, martingale Euler step, clip,
    renormalize, absorb at the vertices), applied to all trajectories at
    once.  Returns the array of final left weights.
    """
    if not 0.0 < p_left < 1.0:
        raise ParameterError("p_left must lie in (0, 1)")
    gamma = params.effective_gamma()
    coupling = math.sqrt(2.0 * gamma) / params.reference_mass / math.sqrt(region_width)
    a = coupling * particle_count * particle_mass
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed)))
    p = np.full(n_trajectories, float(p_left))
    active = np.ones(n_trajectories, dtype=bool)
    sqrt_dt = math.sqrt(dt)
    for _ in range(n_steps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        z = rng.standard_normal((2, idx.size))
        dp = 2.0 * a * p[idx] * (1.0 - p[idx]) * (z[0] - z[1]) * sqrt_dt
        p_new = np.clip(p[idx] + dp, 0.0, 1.0)
        absorbed_hi = p_new >= 1.0 - ABSORB_TOL
        absorbed_lo = p_new <= ABSORB_TOL
        p_new[absorbed_hi] = 1.0
        p_new[absorbed_lo] = 0.0
        p[idx] = p_new
        active[idx] = ~(absorbed_hi | absorbed_lo)
    return p


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def child_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-trajectory stream: child(master, index) via spawn keys."""
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(master_seed, spawn_key=(index,))))


@dataclass(frozen=True)
class TrajectoryRecord:
    """One stochastic realization: snapshots, jump events, final state."""

    seed: int
    parameters: dict
    mode: str
    snapshots: tuple[tuple[float, dict], ...]
    jumps: tuple[JumpEvent, ...]
    final_state: dict
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        times = [t for t, _ in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("snapshot times must be strictly increasing")

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "parameters": self.parameters,
            "mode": self.mode,
            "snapshots": [[t, s] for t, s in self.snapshots],
            "jumps": [j.to_json() for j in self.jumps],
            "final_state": self.final_state,
        }

    def jumps_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "particle", "center"])
            for j in self.jumps:
                writer.writerow([repr(j.time), j.particle, repr(j.center)])


def _snapshot(state, time: float) -> tuple[float, dict]:
    field_summary = massdensity.analyze_state(state).summary()
    field_summary["norm"] = state.norm_squared()
    return (float(time), field_summary)


def evolve_trajectory(initial, t_final: float, params: CollapseParameters,
                      mode: str = "jumps", seed: int = 0,
                      dt: float | None = None,
                      snapshot_every: float | None = None,
                      hamiltonian: Hamiltonian | None = None) -> TrajectoryRecord:
    """Evolve a state to t_final under jump or continuous dynamics.

    Deterministic given (seed, params, initial).  WaveFunction evolution is
    stepped and needs dt; BranchState jump evolution is event-driven (exact
    exponential waiting times), BranchState continuous evolution is stepped.
    """
    if t_final <= 0:
        raise ParameterError("t_final must be > 0")
    if mode not in ("jumps", "csl"):
        raise ParameterError(f"unknown mode {mode!r}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    snapshots = [_snapshot(initial, 0.0)]
    jumps: list[JumpEvent] = []
    state = initial

    if isinstance(initial, WaveFunction):
        if dt is None:
            raise ParameterError("WaveFunction evolution needs an explicit dt")
        n_steps = max(1, int(round(t_final / dt)))
        stride = _snapshot_stride(snapshot_every, dt)
        noise_sigma = 1.0 / math.sqrt(initial.grid.cell_width * dt)
        for step in range(1, n_steps + 1):
            if mode == "jumps":
                state = unitary_step(state, hamiltonian, dt)
                for event in sample_jumps(state, dt, params, rng):
                    state = apply_localization(state, event.particle, event.center, params)
                    jumps.append(event)
            else:
                noise_row = rng.normal(0.0, noise_sigma, size=initial.grid.cell_count)
                state = csl_step(state, noise_row, dt, params, hamiltonian)
            if stride and step % stride == 0 and step != n_steps:
                snapshots.append(_snapshot(state, state.time))
        snapshots.append(_snapshot(state, state.time))

    elif isinstance(initial, BranchState):
        if mode == "jumps":
            rate = state.particle_count * _particle_rate(
                ParticleSpec(mass=state.particle_mass), params)
            t = 0.0
            while rate > 0.0:
                wait = rng.exponential(1.0 / rate)
                if t + wait > t_final:
                    break
                t += wait
                state, event = branch_jump(state, params, rng, time=t)
                jumps.append(event)
                snapshots.append(_snapshot(state, t))
                if len(state.branches) == 1:
                    break
            if not snapshots or snapshots[-1][0] < t_final:
                final = state.with_branches([b.amplitude for b in state.branches],
                                            time=t_final)
                state = final
                snapshots.append(_snapshot(state, t_final))
        else:
            if dt is None:
                raise ParameterError("BranchState continuous evolution needs an explicit dt")
            n_steps = max(1, int(round(t_final / dt)))
            stride = _snapshot_stride(snapshot_every, dt)
            for step in range(1, n_steps + 1):
                state = branch_csl_step(state, dt, params, rng)
                if stride and step % stride == 0 and step != n_steps:
                    snapshots.append(_snapshot(state, state.time))
                if len(state.branches) == 1:
                    break
            if snapshots[-1][0] < state.time or len(snapshots) == 1:
                snapshots.append(_snapshot(state, state.time))
    else:
        raise ParameterError(f"unsupported initial state {type(initial).__name__}")

    return TrajectoryRecord(
        seed=seed,
        parameters=params.to_json(),
        mode=mode,
        snapshots=tuple(snapshots),
        jumps=tuple(jumps),
        final_state=state.to_json(),
    )


def _snapshot_stride(snapshot_every: float | None, dt: float) -> int:
    if snapshot_every is None:
        return 0
    return max(1, int(round(snapshot_every / dt)))
