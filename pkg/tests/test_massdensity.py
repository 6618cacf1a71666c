"""Mass-density analysis against brute-force enumeration and exact laws."""

import itertools
import math

import numpy as np
import pytest

from grwsim import (
    DegreeProfile,
    MassObservablePartition,
    ParameterError,
    ParticleSpec,
    PartitionError,
    Region,
    SpatialGrid,
    accessibility_ratio,
    analyze_state,
    classify_accessible,
    collective_superposition,
    degree_of,
    indeterminacy_report,
    marble_state,
    marginal_density,
    mass_density,
    mass_variance,
    normalize,
    nucleon,
    point_state,
    smear_density,
    split_product,
    superposition_and_product,
)


# ---------------------------------------------------------------------------
# Independent oracle: enumerate every configuration index
# ---------------------------------------------------------------------------

def brute_force_moments(state, cell_sets=None):
    """Mean and variance of the (cell- or set-integrated) mass observable.

    Walks all cell_count^N configuration tuples, reading the occupancy mass
    off each one.  Deliberately independent of the package's vectorized path.
    """
    L = state.grid.cell_count
    n = state.n_particles
    masses = [p.mass for p in state.particles]
    prob = state.probability_weights()
    if cell_sets is None:
        targets = [frozenset([i]) for i in range(L)]
    else:
        targets = [frozenset(s) for s in cell_sets]
    mean = np.zeros(len(targets))
    second = np.zeros(len(targets))
    for config in itertools.product(range(L), repeat=n):
        p = prob[config]
        for t, cells in enumerate(targets):
            mu = sum(m for m, idx in zip(masses, config) if idx in cells)
            mean[t] += p * mu
            second[t] += p * mu * mu
    return mean, second - mean ** 2


def random_state(seed, n, cells=8, width=0.5, masses=None):
    rng = np.random.default_rng(seed)
    if masses is None:
        masses = [1.0] * n
    particles = tuple(ParticleSpec(mass=m, label=f"p{k}") for k, m in enumerate(masses))
    raw = rng.normal(size=(cells,) * n) + 1j * rng.normal(size=(cells,) * n)
    grid = SpatialGrid(cell_count=cells, cell_width=width)
    return normalize(raw, grid, particles)


class TestBruteForceOracle:
    @pytest.mark.parametrize("seed,n", [(1, 1), (2, 2), (3, 3), (4, 2)])
    def test_per_cell_moments_match_enumeration(self, seed, n):
        state = random_state(seed, n)
        mean_o, var_o = brute_force_moments(state)
        mean = mass_density(state) * state.grid.cell_width
        var = mass_variance(state)
        assert np.allclose(mean, mean_o, atol=1e-12)
        assert np.allclose(var, var_o, atol=1e-12)

    def test_unequal_masses(self):
        state = random_state(7, 2, masses=[1.0, 1836.0])
        mean_o, var_o = brute_force_moments(state)
        mean = mass_density(state) * state.grid.cell_width
        var = mass_variance(state)
        assert np.allclose(mean, mean_o, rtol=1e-12, atol=1e-9)
        assert np.allclose(var, var_o, rtol=1e-12, atol=1e-9)

    def test_region_aggregation_matches_enumeration(self):
        state = random_state(11, 3, cells=6)
        sets = [frozenset({0, 1, 2}), frozenset({3, 4, 5})]
        regions = {"lo": {0, 1, 2}, "hi": {3, 4, 5}}
        mean_o, var_o = brute_force_moments(state, sets)
        mean = mass_density(state, regions=regions) * state.grid.cell_width
        var = mass_variance(state, regions=regions)
        assert np.allclose(mean, mean_o, atol=1e-12)
        assert np.allclose(var, var_o, atol=1e-12)

    def test_sixteen_cell_grid_three_particles(self):
        state = random_state(13, 3, cells=16, width=0.25)
        mean_o, var_o = brute_force_moments(state)
        mean = mass_density(state) * state.grid.cell_width
        var = mass_variance(state)
        assert np.allclose(mean, mean_o, atol=1e-12)
        assert np.allclose(var, var_o, atol=1e-12)


class TestWorkedValues:
    def test_superposed_state_region_density(self):
        # all-N-in-A / all-N-in-B equal superposition: region mass N*m/2
        sup, prod = superposition_and_product(1000, mass=1.0)
        f_sup = analyze_state(sup)
        f_prod = analyze_state(prod)
        assert f_sup.integrated_mass[0] == pytest.approx(500.0, rel=1e-12)
        assert f_prod.integrated_mass[0] == pytest.approx(500.0, rel=1e-12)
        assert np.allclose(f_sup.mean_density, f_prod.mean_density, rtol=1e-12)

    def test_superposed_variance_two_point_law(self):
        # occupancy N or 0 with probability 1/2 each: var = (N m)^2 / 4
        sup, prod = superposition_and_product(1000, mass=1.0)
        assert mass_variance(sup)[0] == pytest.approx(1000.0 ** 2 / 4.0, rel=1e-12)
        assert mass_variance(prod)[0] == 0.0

    def test_ratios_one_and_zero(self):
        sup, prod = superposition_and_product(1000, mass=1.0)
        assert analyze_state(sup).ratio[0] == pytest.approx(1.0, abs=1e-12)
        assert analyze_state(prod).ratio[0] == 0.0

    def test_single_particle_eigenstate(self):
        grid = SpatialGrid(cell_count=8, cell_width=0.5)
        state = point_state(grid, ParticleSpec(mass=3.0), 5)
        mass_in_cells = mass_density(state) * grid.cell_width
        assert mass_in_cells[5] == pytest.approx(3.0, rel=1e-12)
        assert np.all(mass_in_cells[np.arange(8) != 5] == 0.0)
        assert np.allclose(mass_variance(state), 0.0, atol=1e-12)

    def test_bernoulli_variance(self):
        # weight p in one cell: var = m^2 p (1 - p)
        grid = SpatialGrid(cell_count=2, cell_width=1.0)
        p = 0.3
        state = normalize(np.array([math.sqrt(p), math.sqrt(1 - p)]), grid,
                          (ParticleSpec(mass=2.0),))
        var = mass_variance(state)
        assert var[0] == pytest.approx(4.0 * p * (1 - p), rel=1e-12)

    @pytest.mark.parametrize("p", [0.5, 0.9, 0.99, 0.999])
    def test_two_outcome_ratio_law_exact_tier(self, p):
        # single particle on a 16-cell grid, weight p here / 1-p there
        grid = SpatialGrid(cell_count=16, cell_width=0.25)
        raw = np.zeros(16, dtype=complex)
        raw[3] = math.sqrt(p)
        raw[12] = math.sqrt(1 - p)
        state = normalize(raw, grid, 1)
        field = analyze_state(state)
        assert field.ratio[3] ** 2 == pytest.approx((1 - p) / p, rel=1e-9)
        assert field.ratio[12] ** 2 == pytest.approx(p / (1 - p), rel=1e-9)

    @pytest.mark.parametrize("p", [0.5, 0.9, 0.99, 0.999])
    def test_two_outcome_ratio_law_branch_tier(self, p):
        state = marble_state(p)
        field = analyze_state(state, eta=0.5)
        in_idx = state.region_names().index("in")
        assert field.ratio[in_idx] ** 2 == pytest.approx((1 - p) / p, rel=1e-9)

    def test_tail_cell_ratio_value(self):
        # p = 0.99 main cell leaves a 0.01 tail whose ratio is sqrt(99)
        state = marble_state(0.99)
        field = analyze_state(state, eta=0.5)
        out_idx = state.region_names().index("out")
        assert field.ratio[out_idx] == pytest.approx(math.sqrt(99.0), rel=1e-9)
        assert field.ratio[out_idx] == pytest.approx(9.9498743710662, rel=1e-9)


class TestMassConservation:
    @pytest.mark.parametrize("seed,n", [(21, 1), (22, 2), (23, 3)])
    def test_wavefunction_total_mass(self, seed, n):
        state = random_state(seed, n, masses=[1.0 + 0.5 * k for k in range(n)])
        total = float((mass_density(state) * state.grid.cell_width).sum())
        assert total == pytest.approx(state.total_mass(), rel=1e-9)

    def test_branch_total_mass(self):
        state = collective_superposition(
            (Region("A", -1.0), Region("B", 1.0)), 1000, 1.5)
        total = float((mass_density(state) * state.region_width).sum())
        assert total == pytest.approx(1500.0, rel=1e-9)


class TestRatioAndClassification:
    def test_undefined_below_floor(self):
        mean = np.array([1.0, 1e-15, 0.0])
        var = np.array([0.01, 0.0, 0.0])
        ratio = accessibility_ratio(mean, var, widths=1.0)
        assert np.isfinite(ratio[0])
        assert not np.isfinite(ratio[1])
        assert not np.isfinite(ratio[2])

    def test_ratio_identity_on_defined_cells(self):
        # ratio^2 * (integrated mass)^2 == variance wherever defined
        state = random_state(31, 2)
        field = analyze_state(state)
        defined = field.defined
        lhs = field.ratio[defined] ** 2 * field.integrated_mass[defined] ** 2
        assert np.allclose(lhs, field.variance[defined], rtol=1e-9, atol=1e-30)

    def test_variance_nonnegative(self):
        for seed in range(40, 46):
            state = random_state(seed, 2)
            assert np.all(mass_variance(state) >= 0.0)

    def test_classify_threshold_strictness(self):
        ratio = np.array([0.0, 0.1, 0.0999999, np.nan])
        mask = classify_accessible(ratio, eta=0.1)
        assert mask.tolist() == [True, False, True, False]

    def test_classify_invalid_threshold(self):
        with pytest.raises(ParameterError):
            classify_accessible(np.array([0.5]), eta=0.0)
        with pytest.raises(ParameterError):
            classify_accessible(np.array([0.5]), eta=-1.0)

    def test_mask_monotone_in_threshold(self):
        rng = np.random.default_rng(5)
        ratio = rng.uniform(0, 2, size=50)
        ratio[7] = np.nan
        etas = sorted(rng.uniform(0.01, 2.0, size=6))
        masks = [classify_accessible(ratio, e) for e in etas]
        for lo, hi in zip(masks, masks[1:]):
            assert np.all(hi[lo])  # accessible at lower eta stays accessible

    def test_smearing_preserves_mass(self):
        state = random_state(8, 1, cells=32, width=0.2)
        raw = mass_density(state)
        smeared = smear_density(raw, 0.2, alpha=0.5)
        assert float(smeared.sum()) == pytest.approx(float(raw.sum()), rel=1e-12)
        field = analyze_state(state, smear_alpha=0.5)
        assert field.total_mass == pytest.approx(1.0, rel=1e-9)


class TestDegrees:
    def test_marble_degrees(self):
        m = marble_state(0.99)
        profile = degree_of(m, MassObservablePartition.per_region(m))
        d = profile.degrees()
        assert d["in"] == pytest.approx(0.99, abs=1e-12)
        assert d["out"] == pytest.approx(0.01, abs=1e-12)

    def test_eigenstate_degree_one(self):
        grid = SpatialGrid(cell_count=6, cell_width=1.0)
        state = point_state(grid, nucleon(), 2)
        part = MassObservablePartition.of(
            "location", {"here": {2}, "elsewhere": {0, 1, 3, 4, 5}})
        d = degree_of(state, part).degrees()
        assert d["here"] == pytest.approx(1.0, abs=1e-12)
        assert d["elsewhere"] == pytest.approx(0.0, abs=1e-12)

    def test_equal_superposition_half_half(self):
        grid = SpatialGrid(cell_count=6, cell_width=1.0)
        raw = np.zeros(6, dtype=complex)
        raw[1] = raw[4] = 1.0
        state = normalize(raw, grid, 1)
        part = MassObservablePartition.of("location", {"lo": {0, 1, 2}, "hi": {3, 4, 5}})
        d = degree_of(state, part).degrees()
        assert d["lo"] == pytest.approx(0.5, abs=1e-12)
        assert d["hi"] == pytest.approx(0.5, abs=1e-12)

    def test_single_particle_degrees_match_marginal_weights(self):
        state = random_state(55, 1, cells=8)
        weights = marginal_density(state, 0) * state.grid.cell_width
        part = MassObservablePartition.of(
            "location", {"a": {0, 1, 2}, "b": {3, 4}, "c": {5, 6, 7}})
        d = degree_of(state, part).degrees()
        assert d["a"] == pytest.approx(float(weights[:3].sum()), abs=1e-12)
        assert d["b"] == pytest.approx(float(weights[3:5].sum()), abs=1e-12)
        assert d["c"] == pytest.approx(float(weights[5:].sum()), abs=1e-12)

    def test_degrees_sum_to_one(self):
        for seed, n in [(61, 1), (62, 2), (63, 3)]:
            state = random_state(seed, n, cells=6)
            part = MassObservablePartition.of(
                "location", {"lo": {0, 1, 2}, "hi": {3, 4, 5}})
            total = sum(degree_of(state, part).degrees().values())
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_split_branch_state_degrees(self):
        # a determinate half/half split has degree 1/2 per region
        s = split_product((Region("A", -1.0), Region("B", 1.0)), 10, 1.0)
        d = degree_of(s, MassObservablePartition.per_region(s)).degrees()
        assert d["A"] == pytest.approx(0.5, abs=1e-12)

    def test_non_exhaustive_partition_rejected(self):
        grid = SpatialGrid(cell_count=6, cell_width=1.0)
        state = point_state(grid, nucleon(), 5)
        part = MassObservablePartition.of("location", {"lo": {0, 1, 2}})
        with pytest.raises(PartitionError):
            degree_of(state, part)

    def test_overlapping_partition_rejected(self):
        grid = SpatialGrid(cell_count=4, cell_width=1.0)
        state = point_state(grid, nucleon(), 0)
        part = MassObservablePartition.of("location", {"a": {0, 1}, "b": {1, 2, 3}})
        with pytest.raises(PartitionError):
            degree_of(state, part)

    def test_profile_rejects_bad_sum(self):
        with pytest.raises(ParameterError):
            DegreeProfile("location", (("a", 0.6), ("b", 0.6)))


class TestIndeterminacyReport:
    def test_pure_eigenstate_is_determinate(self):
        profile = DegreeProfile("location", (("in", 1.0), ("out", 0.0)))
        report = indeterminacy_report(profile, eta=0.1)
        assert report.classification == "determinate"

    def test_dominant_with_tail_is_effectively_determinate(self):
        profile = DegreeProfile("location", (("in", 0.99), ("out", 0.01)))
        report = indeterminacy_report(profile, eta=0.1, degree_margin=0.05)
        assert report.classification == "effectively-determinate"
        (label, degree, accessible) = report.minor_components[0]
        assert label == "out"
        assert degree == pytest.approx(0.01, abs=1e-12)
        assert accessible is False  # present but non-accessible

    def test_equal_split_is_glutty_degree(self):
        profile = DegreeProfile("location", (("in", 0.5), ("out", 0.5)))
        report = indeterminacy_report(profile, eta=0.1)
        assert report.classification == "indeterminate-glutty-degree"

    def test_default_margin_derived_from_eta(self):
        profile = DegreeProfile("location", (("in", 0.99), ("out", 0.01)))
        report = indeterminacy_report(profile, eta=0.1)
        assert report.degree_margin == pytest.approx(0.05)
        assert report.classification == "effectively-determinate"

    def test_margin_validation(self):
        profile = DegreeProfile("location", (("in", 1.0), ("out", 0.0)))
        with pytest.raises(ParameterError):
            indeterminacy_report(profile, eta=0.1, degree_margin=1.5)


class TestExports:
    def test_csv_export_columns(self, tmp_path):
        state = marble_state(0.9)
        field = analyze_state(state, eta=0.5)
        path = tmp_path / "field.csv"
        field.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "label,cell_center,mean,variance,ratio,accessible"
        assert len(lines) == 3

    def test_json_export_has_threshold(self, tmp_path):
        state = marble_state(0.9)
        field = analyze_state(state, eta=0.42)
        path = tmp_path / "field.json"
        field.write_json(path)
        import json
        doc = json.loads(path.read_text())
        assert doc["threshold"] == 0.42
        assert doc["total_mass"] == pytest.approx(1.0, rel=1e-9)
