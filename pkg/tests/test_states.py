"""State-algebra tests: normalization, superposition, products, marginals."""

import numpy as np
import pytest

from grwsim import (
    Branch,
    BranchState,
    EmptyProductError,
    IncompatibleStateError,
    MassObservablePartition,
    ParameterError,
    ParticleSpec,
    Region,
    SpatialGrid,
    WaveFunction,
    ZeroStateError,
    collective_superposition,
    gaussian_packet,
    marble_state,
    marginal_density,
    normalize,
    nucleon,
    point_state,
    product_state,
    split_product,
    state_from_json,
    superpose,
    two_bump_state,
)


def grid10():
    return SpatialGrid(cell_count=10, cell_width=0.1)


class TestNormalize:
    def test_already_normalized_uniform(self):
        # sum 1^2 * 0.1 over 10 cells = 1, so amplitudes stay 1
        state = normalize(np.ones(10), grid10(), 1)
        assert np.allclose(state.amplitudes, 1.0, atol=1e-14)

    def test_two_cell_hand_value(self):
        # solve |a|^2 * 0.5 = 1 by hand: a = sqrt(2)
        grid = SpatialGrid(cell_count=2, cell_width=0.5)
        state = normalize(np.array([2.0, 0.0]), grid, 1)
        assert state.amplitudes[0] == pytest.approx(np.sqrt(2.0), abs=1e-14)
        assert state.amplitudes[1] == 0.0

    def test_all_zero_rejected(self):
        with pytest.raises(ZeroStateError):
            normalize(np.zeros(10), grid10(), 1)

    def test_direction_unchanged(self):
        rng = np.random.default_rng(3)
        raw = rng.normal(size=10) + 1j * rng.normal(size=10)
        state = normalize(raw, grid10(), 1)
        scale = state.amplitudes[0] / raw[0]
        assert scale.imag == pytest.approx(0.0, abs=1e-15)
        assert scale.real > 0
        assert np.allclose(state.amplitudes, raw * scale, atol=1e-12)

    def test_invariant_enforced_by_constructor(self):
        with pytest.raises(ParameterError):
            WaveFunction(grid10(), (nucleon(),), np.ones(10) * 2.0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_normalization_invariant_random_states(self, n):
        rng = np.random.default_rng(n)
        grid = SpatialGrid(cell_count=6, cell_width=0.3)
        raw = rng.normal(size=(6,) * n) + 1j * rng.normal(size=(6,) * n)
        state = normalize(raw, grid, n)
        assert state.norm_squared() == pytest.approx(1.0, abs=1e-12)

    def test_exact_tier_cap(self):
        grid = SpatialGrid(cell_count=3, cell_width=1.0)
        with pytest.raises(ParameterError):
            normalize(np.ones((3, 3, 3, 3)), grid, 4)


class TestSuperpose:
    def test_disjoint_supports_half_half(self):
        grid = grid10()
        left = point_state(grid, nucleon(), 2)
        right = point_state(grid, nucleon(), 7)
        c = 1.0 / np.sqrt(2.0)
        state = superpose([(c, left), (c, right)])
        dens = marginal_density(state, 0) * grid.cell_width
        assert dens[2] == pytest.approx(0.5, abs=1e-12)
        assert dens[7] == pytest.approx(0.5, abs=1e-12)

    def test_identity_with_zero_coefficient(self):
        grid = grid10()
        psi = gaussian_packet(grid, nucleon(), 0.5, 0.1)
        phi = point_state(grid, nucleon(), 9)
        out = superpose([(1.0, psi), (0.0, phi)])
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-14)

    @pytest.mark.parametrize("c", [0.3, -2.0, 1.5j])
    def test_collinearity_scale_invariance(self, c):
        # superpose with coefficients (c, 0) reproduces the state for any c != 0
        grid = grid10()
        psi = gaussian_packet(grid, nucleon(), 0.5, 0.1)
        out = superpose([(c, psi), (0.0, psi)])
        overlap = np.vdot(psi.amplitudes, out.amplitudes) * grid.cell_width
        assert abs(overlap) == pytest.approx(1.0, abs=1e-12)

    def test_equal_states_renormalize(self):
        grid = grid10()
        psi = gaussian_packet(grid, nucleon(), 0.5, 0.1)
        out = superpose([(1.0, psi), (1.0, psi)])
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-12)

    def test_mismatched_grids_rejected(self):
        a = gaussian_packet(grid10(), nucleon(), 0.5, 0.1)
        b = gaussian_packet(SpatialGrid(12, 0.1), nucleon(), 0.5, 0.1)
        with pytest.raises(IncompatibleStateError):
            superpose([(1.0, a), (1.0, b)])


class TestProductState:
    def test_marginals_equal_factors(self):
        grid = SpatialGrid(cell_count=16, cell_width=0.5, origin=-4.0)
        a = gaussian_packet(grid, nucleon("a"), -2.0, 0.5)
        b = gaussian_packet(grid, nucleon("b"), 2.0, 0.5)
        joint = product_state([a, b])
        assert np.allclose(marginal_density(joint, 0), marginal_density(a, 0), atol=1e-12)
        assert np.allclose(marginal_density(joint, 1), marginal_density(b, 0), atol=1e-12)

    def test_single_factor_is_identity(self):
        a = gaussian_packet(grid10(), nucleon(), 0.5, 0.1)
        out = product_state([a])
        assert np.allclose(out.amplitudes, a.amplitudes, atol=1e-14)

    def test_empty_factors_rejected(self):
        with pytest.raises(EmptyProductError):
            product_state([])

    def test_mixed_grids_rejected(self):
        a = gaussian_packet(grid10(), nucleon(), 0.5, 0.1)
        b = gaussian_packet(SpatialGrid(12, 0.1), nucleon(), 0.5, 0.1)
        with pytest.raises(IncompatibleStateError):
            product_state([a, b])


class TestMarginalDensity:
    def test_single_particle_direct(self):
        psi = gaussian_packet(grid10(), nucleon(), 0.5, 0.2)
        expected = np.abs(psi.amplitudes) ** 2
        assert np.allclose(marginal_density(psi, 0), expected, atol=1e-14)

    def test_bell_like_state_hand_sum(self):
        # (|AA> + |BB>)/sqrt(2) on 2 cells; by the 4-term sum each marginal is
        # (1/2, 1/2)
        grid = SpatialGrid(cell_count=2, cell_width=1.0)
        raw = np.zeros((2, 2), dtype=complex)
        raw[0, 0] = 1.0
        raw[1, 1] = 1.0
        state = normalize(raw, grid, 2)
        for k in (0, 1):
            dens = marginal_density(state, k)
            assert dens[0] == pytest.approx(0.5, abs=1e-12)
            assert dens[1] == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_integrates_to_one(self, n):
        rng = np.random.default_rng(10 + n)
        grid = SpatialGrid(cell_count=5, cell_width=0.7)
        state = normalize(rng.normal(size=(5,) * n) + 1j * rng.normal(size=(5,) * n),
                          grid, n)
        for k in range(n):
            dens = marginal_density(state, k)
            assert np.all(dens >= 0)
            assert float(dens.sum() * grid.cell_width) == pytest.approx(1.0, abs=1e-9)

    def test_out_of_range_index(self):
        psi = gaussian_packet(grid10(), nucleon(), 0.5, 0.2)
        with pytest.raises(IndexError):
            marginal_density(psi, 1)


class TestBranchState:
    def test_weights_sum_to_one(self):
        state = collective_superposition(
            (Region("A", -1.0), Region("B", 1.0)), 100, 1.0)
        assert state.weights().sum() == pytest.approx(1.0, abs=1e-12)

    def test_occupancy_must_sum_to_n(self):
        regions = (Region("A", 0.0), Region("B", 1.0))
        with pytest.raises(ParameterError):
            BranchState(regions, 5, 1.0, (Branch(1.0 + 0j, (2, 2)),))

    def test_branches_must_be_distinct(self):
        regions = (Region("A", 0.0), Region("B", 1.0))
        c = 1.0 / np.sqrt(2.0)
        with pytest.raises(ParameterError):
            BranchState(regions, 4, 1.0,
                        (Branch(c, (2, 2)), Branch(c, (2, 2))))

    def test_unnormalized_rejected(self):
        regions = (Region("A", 0.0), Region("B", 1.0))
        with pytest.raises(ParameterError):
            BranchState(regions, 2, 1.0, (Branch(0.5 + 0j, (2, 0)),))

    def test_marble_state_weights(self):
        m = marble_state(0.99)
        in_idx = m.region_names().index("in")
        w_in = next(b.weight for b in m.branches
                    if b.occupancy[in_idx] == m.particle_count)
        assert w_in == pytest.approx(0.99, abs=1e-12)

    def test_split_product_single_branch(self):
        s = split_product((Region("A", 0.0), Region("B", 1.0)), 10, 1.0)
        assert len(s.branches) == 1
        assert s.branches[0].occupancy == (5, 5)

    def test_with_branches_drops_zero_weight(self):
        s = collective_superposition((Region("A", 0.0), Region("B", 1.0)), 3, 1.0)
        out = s.with_branches([1.0, 0.0])
        assert len(out.branches) == 1
        assert out.branches[0].weight == pytest.approx(1.0, abs=1e-12)


class TestImmutability:
    def test_wavefunction_amplitudes_read_only(self):
        psi = gaussian_packet(grid10(), nucleon(), 0.5, 0.2)
        with pytest.raises(ValueError):
            psi.amplitudes[0] = 0.0

    def test_operations_do_not_mutate_inputs(self):
        psi = gaussian_packet(grid10(), nucleon(), 0.5, 0.2)
        before = psi.amplitudes.copy()
        superpose([(1.0, psi), (0.5, psi)])
        assert np.array_equal(psi.amplitudes, before)


class TestSerialization:
    def test_wavefunction_round_trip(self):
        psi = two_bump_state(SpatialGrid(40, 0.25, origin=-5.0), nucleon("t"),
                             -2.0, 2.0, 0.5, left_weight=0.3)
        doc = psi.to_json()
        back = state_from_json(doc)
        assert isinstance(back, WaveFunction)
        assert back.grid == psi.grid
        assert np.allclose(back.amplitudes, psi.amplitudes, atol=0)
        assert back.particles == psi.particles

    def test_branch_state_round_trip(self):
        s = marble_state(0.9, n_particles=7, mass=2.0)
        back = state_from_json(s.to_json())
        assert isinstance(back, BranchState)
        assert back.regions == s.regions
        assert back.particle_count == 7
        assert [b.occupancy for b in back.branches] == [b.occupancy for b in s.branches]
        assert np.allclose(back.weights(), s.weights(), atol=0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ParameterError):
            state_from_json({"kind": "mystery"})


class TestPartitions:
    def test_per_cell_partition_covers_grid(self):
        grid = grid10()
        part = MassObservablePartition.per_cell(grid)
        cells = set()
        for _, members in part.cells_by_determinate:
            cells |= set(members)
        assert cells == set(range(10))

    def test_particle_spec_validation(self):
        with pytest.raises(ParameterError):
            ParticleSpec(mass=0.0)
        with pytest.raises(ParameterError):
            ParticleSpec(mass=1.0, collapse_rate=-1.0)

    def test_grid_validation(self):
        with pytest.raises(ParameterError):
            SpatialGrid(cell_count=1, cell_width=1.0)
        with pytest.raises(ParameterError):
            SpatialGrid(cell_count=10, cell_width=0.0)

    def test_cell_centers_convention(self):
        grid = SpatialGrid(cell_count=4, cell_width=0.5, origin=2.0)
        assert np.allclose(grid.cell_centers(), [2.25, 2.75, 3.25, 3.75], atol=0)
