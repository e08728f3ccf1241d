"""Lattice construction, panel geometry and the elementary update rule."""

import numpy as np
import pytest
from scipy import stats

from oligosim import (
    AdvertisingField,
    DimensionError,
    DomainError,
    ModelKind,
    Shares,
    apply_update,
    concentrations,
    init_lattice,
    panel_geometry,
    sample_operator,
)
from oligosim.lattice import advance, largest_remainder_counts


def rng_of(*ints):
    return np.random.default_rng(np.random.SeedSequence(list(ints)))


def recount(lattice):
    return np.bincount(lattice.cells.ravel(), minlength=4)[1:]


class TestInitLattice:
    def test_counts_paper_scale(self):
        lat = init_lattice(100, Shares(0.40, 0.40, 0.20), 7)
        assert recount(lat).tolist() == [4000, 4000, 2000]
        assert lat.counts.tolist() == [4000, 4000, 2000]

    def test_degenerate_corner(self):
        lat = init_lattice(4, Shares(1.0, 0.0, 0.0), 1)
        assert np.all(lat.cells == 1)

    def test_largest_remainder_even_thirds(self):
        # remainder ties break toward the lowest label
        assert largest_remainder_counts(Shares(1/3, 1/3, 1/3), 100).tolist() == [34, 33, 33]

    def test_largest_remainder_self_correcting_floats(self):
        # 0.3 * 10 floats to 2.9999...; the remainder pass must still hand it 3
        assert largest_remainder_counts(Shares(0.3, 0.3, 0.4), 10).tolist() == [3, 3, 4]

    def test_too_small(self):
        with pytest.raises(DimensionError):
            init_lattice(3, Shares(1/3, 1/3, 1/3), 1)

    def test_invalid_shares_rejected_at_construction(self):
        with pytest.raises(DomainError):
            Shares(0.5, 0.6, -0.1)

    def test_placement_deterministic(self):
        a = init_lattice(20, Shares(0.3, 0.3, 0.4), 42)
        b = init_lattice(20, Shares(0.3, 0.3, 0.4), 42)
        assert np.array_equal(a.cells, b.cells)


class TestPanelGeometry:
    def test_corner_wrap(self):
        geo = panel_geometry((0, 0), 4)
        assert set(geo.neighbors) == {(3, 0), (3, 1), (2, 0), (2, 1),
                                      (0, 3), (1, 3), (0, 2), (1, 2)}
        assert set(geo.panel) == {(0, 0), (1, 0), (0, 1), (1, 1)}

    @pytest.mark.parametrize("L", [4, 5, 8, 13])
    def test_disjoint_and_complete(self, L):
        rng = rng_of(3, L)
        for _ in range(50):
            site = (int(rng.integers(L)), int(rng.integers(L)))
            geo = panel_geometry(site, L)
            assert len(set(geo.panel)) == 4
            assert len(set(geo.neighbors)) == 8
            assert not set(geo.panel) & set(geo.neighbors)

    def test_small_lattice_rejected(self):
        with pytest.raises(DimensionError):
            panel_geometry((0, 0), 3)

    def test_site_out_of_range(self):
        with pytest.raises(DomainError):
            panel_geometry((4, 0), 4)


class TestSampleOperator:
    def test_degenerate(self):
        rng = rng_of(1)
        assert all(sample_operator(AdvertisingField(1.0, 0.0, 0.0), rng) == 1
                   for _ in range(100))

    def test_multinomial_fit(self):
        h = AdvertisingField(0.4, 0.3, 0.3)
        rng = rng_of(2024)
        n = 10 ** 6
        draws = np.array([sample_operator(h, rng) for _ in range(n)])
        counts = np.bincount(draws, minlength=4)[1:]
        res = stats.chisquare(counts, f_exp=np.array([0.4, 0.3, 0.3]) * n)
        assert res.pvalue > 0.01

    def test_invalid_field(self):
        with pytest.raises(DomainError):
            AdvertisingField(0.5, 0.6, -0.1)
        with pytest.raises(DomainError):
            sample_operator((0.4, 0.3, 0.3), rng_of(1))


def make_lattice(rows):
    cells = np.array(rows, dtype=np.int8)
    counts = np.bincount(cells.ravel(), minlength=4)[1:].astype(np.int64)
    from oligosim import Lattice
    return Lattice(cells, counts)


MIXED_4X4 = [[1, 2, 3, 1],
             [2, 1, 2, 3],
             [3, 2, 1, 1],
             [1, 3, 2, 2]]

H = AdvertisingField(0.4, 0.3, 0.3)


class TestApplyUpdate:
    def test_cf_unanimous_converts_all_neighbors(self):
        for seed in range(5):
            lat = make_lattice(MIXED_4X4)
            lat.cells[1:3, 1:3] = 2  # panel at (1, 1) unanimous on 2
            lat.counts[:] = recount(lat)
            apply_update(lat, (1, 1), ModelKind.CF, 0.3, H, rng_of(seed))
            geo = panel_geometry((1, 1), 4)
            assert all(lat.cells[x, y] == 2 for x, y in geo.neighbors)

    def test_cf_non_unanimous_p1_changes_nothing(self):
        lat = make_lattice(MIXED_4X4)
        before = lat.cells.copy()
        changed = apply_update(lat, (1, 1), ModelKind.CF, 1.0, H, rng_of(9))
        assert changed == 0
        assert np.array_equal(lat.cells, before)

    def test_cap_p0_neighbor_frequencies_match_field(self):
        # with the conformity channel off every neighbor is an independent
        # draw from h; chi-square each neighbor's outcome over 1e5 updates
        reps = 10 ** 5
        rng = rng_of(77)
        geo = panel_geometry((1, 1), 4)
        tallies = np.zeros((8, 3), dtype=np.int64)
        for _ in range(reps):
            lat = make_lattice(MIXED_4X4)
            apply_update(lat, (1, 1), ModelKind.CAP, 0.0, H, rng)
            for k, (x, y) in enumerate(geo.neighbors):
                tallies[k, lat.cells[x, y] - 1] += 1
        expected = np.array([0.4, 0.3, 0.3]) * reps
        for k in range(8):
            assert stats.chisquare(tallies[k], f_exp=expected).pvalue > 0.01

    def test_locality(self):
        rng = rng_of(5)
        geo = panel_geometry((2, 3), 6)
        allowed = set(geo.neighbors)
        for _ in range(200):
            lat = make_lattice(np.array(MIXED_4X4).repeat(2, 0).repeat(2, 1)[:6, :6])
            before = lat.cells.copy()
            apply_update(lat, (2, 3), ModelKind.CAP, 0.5, H, rng)
            diff = np.argwhere(lat.cells != before)
            assert all((int(x), int(y)) in allowed for x, y in diff)

    def test_conservation_and_counts_coherence(self):
        rng = rng_of(6)
        lat = init_lattice(8, Shares(0.3, 0.3, 0.4), rng)
        for model in ModelKind:
            for _ in range(300):
                site = (int(rng.integers(8)), int(rng.integers(8)))
                apply_update(lat, site, model, 0.4, H, rng)
                assert lat.counts.sum() == 64
                assert np.array_equal(lat.counts, recount(lat))

    def test_changed_count_matches_diff(self):
        rng = rng_of(8)
        for _ in range(200):
            lat = make_lattice(MIXED_4X4)
            before = lat.cells.copy()
            changed = apply_update(lat, (0, 2), ModelKind.CF, 0.2, H, rng)
            assert changed == int(np.sum(lat.cells != before))

    @pytest.mark.parametrize("unanimous", [True, False])
    def test_p1_model_equivalence(self, unanimous):
        # identical lattice, site and draws: CF and CAP agree at p = 1
        for seed in range(20):
            lat_cf = make_lattice(MIXED_4X4)
            lat_cap = make_lattice(MIXED_4X4)
            if unanimous:
                for lat in (lat_cf, lat_cap):
                    lat.cells[1:3, 1:3] = 3
                    lat.counts[:] = recount(lat)
            apply_update(lat_cf, (1, 1), ModelKind.CF, 1.0, H, rng_of(30, seed))
            apply_update(lat_cap, (1, 1), ModelKind.CAP, 1.0, H, rng_of(30, seed))
            assert np.array_equal(lat_cf.cells, lat_cap.cells)
            if not unanimous:
                assert np.array_equal(lat_cf.cells, np.array(MIXED_4X4, dtype=np.int8))

    def test_kernel_matches_single_update_contract(self):
        # the trajectory kernel consumes the stream exactly like a python
        # loop of site draw + apply_update
        lat_a = init_lattice(10, Shares(0.3, 0.4, 0.3), rng_of(40))
        lat_b = lat_a.copy()
        rng_a = rng_of(41)
        rng_b = rng_of(41)
        advance(lat_a, ModelKind.CAP, 0.6, H, 500, rng_a)
        for _ in range(500):
            idx = int(rng_b.integers(0, 100))
            apply_update(lat_b, (idx // 10, idx % 10), ModelKind.CAP, 0.6, H, rng_b)
        assert np.array_equal(lat_a.cells, lat_b.cells)
        assert np.array_equal(lat_a.counts, lat_b.counts)

    def test_bad_p(self):
        with pytest.raises(DomainError):
            apply_update(make_lattice(MIXED_4X4), (0, 0), ModelKind.CF, 1.5, H, rng_of(1))


class TestConcentrations:
    def test_monochromatic(self):
        lat = init_lattice(5, Shares(0.0, 0.0, 1.0), 1)
        assert concentrations(lat) == Shares(0.0, 0.0, 1.0)

    def test_arithmetic_identity(self):
        lat = init_lattice(100, Shares(0.40, 0.40, 0.20), 3)
        c = concentrations(lat)
        assert (c.c1, c.c2, c.c3) == (0.40, 0.40, 0.20)

    def test_matches_fresh_tally_after_updates(self):
        rng = rng_of(50)
        lat = init_lattice(12, Shares(0.5, 0.25, 0.25), rng)
        for _ in range(100):
            site = (int(rng.integers(12)), int(rng.integers(12)))
            apply_update(lat, site, ModelKind.CF, 0.5, H, rng)
            c = concentrations(lat)
            fresh = recount(lat) / 144
            assert np.allclose([c.c1, c.c2, c.c3], fresh, atol=0, rtol=0)
            assert abs(c.c1 + c.c2 + c.c3 - 1.0) <= 1e-12
