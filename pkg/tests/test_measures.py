import numpy as np
import pytest

from fluidq.measures import (
    AtomicMeasure,
    TailFunction,
    atomic_from_text,
    atomic_to_text,
    prohorov,
    shift_tail,
    tail,
    tail_from_text,
    tail_function_agrees,
    tail_to_text,
)

from oracles import brute_prohorov


def m(*pairs):
    return AtomicMeasure.from_pairs(pairs)


class TestAtomicMeasure:
    def test_atoms_sorted_and_merged(self):
        a = AtomicMeasure([2.0, 1.0, 2.0], [1.0, 3.0, 0.5])
        assert list(a.locations) == [1.0, 2.0]
        assert list(a.weights) == [3.0, 1.5]

    def test_zero_weights_dropped(self):
        a = AtomicMeasure([1.0, 2.0], [0.0, 1.0])
        assert len(a) == 1

    def test_negative_location_rejected(self):
        with pytest.raises(ValueError):
            AtomicMeasure([-0.1], [1.0])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            AtomicMeasure([0.1], [-1.0])

    def test_one_sided_mass_queries(self):
        a = m((1.0, 1.0), (2.0, 3.0))
        assert a.mass_below(1.0) == 0.0
        assert a.mass_at_most(1.0) == 1.0
        assert a.mass_below(2.5) == 4.0
        assert tail(a, x=1.5) + a.mass_below(1.5) == a.total_mass


class TestTail:
    def test_empty(self):
        assert tail(AtomicMeasure(), 0.0) == 0.0

    def test_atom_above(self):
        assert tail(m((1.0, 1.0), (2.0, 1.0)), 1.5) == 1.0

    def test_closed_set_includes_atom_at_x(self):
        assert tail(m((1.0, 1.0), (2.0, 1.0)), 1.0) == 2.0

    def test_tail_at_zero_is_total_mass(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            k = rng.integers(0, 8)
            a = AtomicMeasure(rng.uniform(0, 5, k), rng.uniform(0.1, 2, k))
            assert tail(a, 0.0) == pytest.approx(a.total_mass, abs=1e-12)


class TestShiftTail:
    def test_translation(self):
        assert shift_tail(m((2.0, 1.0)), 0.5) == m((1.5, 1.0))

    def test_mass_reaching_zero_dropped(self):
        assert shift_tail(m((2.0, 1.0)), 2.0) == AtomicMeasure()

    def test_partial_expiry(self):
        assert shift_tail(m((1.0, 2.0), (3.0, 1.0)), 1.5) == m((1.5, 1.0))

    def test_semigroup(self):
        # (l - s) - t and l - (s + t) differ by rounding, so compare atoms
        # within 1e-12 rather than bit-exactly
        rng = np.random.default_rng(11)
        for _ in range(30):
            k = rng.integers(0, 8)
            a = AtomicMeasure(rng.uniform(0, 5, k), rng.uniform(0.1, 2, k))
            s, t = rng.uniform(0, 2, 2)
            once = shift_tail(a, s + t)
            twice = shift_tail(shift_tail(a, s), t)
            assert len(once) == len(twice)
            assert np.allclose(once.locations, twice.locations, atol=1e-12, rtol=0)
            assert np.array_equal(once.weights, twice.weights)


class TestProhorov:
    def test_identity(self):
        a = m((1.0, 1.0), (2.0, 1.0))
        assert prohorov(a, a) == 0.0

    def test_point_mass_shift(self):
        d = prohorov(m((0.0, 1.0)), m((0.3, 1.0)))
        assert d == pytest.approx(0.3, abs=2e-9)

    def test_mass_mismatch_at_same_point(self):
        d = prohorov(m((0.0, 1.0)), m((0.0, 2.0)))
        assert d == pytest.approx(1.0, abs=2e-9)

    def test_point_mass_pair_formula(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            a, b = rng.uniform(0, 3, 2)
            d = prohorov(m((a, 1.0)), m((b, 1.0)))
            assert d == pytest.approx(min(abs(a - b), 1.0), abs=2e-9)

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            k1, k2 = rng.integers(0, 6, 2)
            m1 = AtomicMeasure(rng.uniform(0, 3, k1), rng.uniform(0.1, 2, k1))
            m2 = AtomicMeasure(rng.uniform(0, 3, k2), rng.uniform(0.1, 2, k2))
            assert prohorov(m1, m2) == pytest.approx(brute_prohorov(m1, m2), abs=3e-9)

    def test_boundary_cases_match_oracle(self):
        # atoms whose enlargements just touch, unequal masses, clusters
        cases = [
            (m((0.0, 1.0), (0.6, 1.0)), m((0.3, 2.0))),
            (m((0.0, 1.0), (0.4, 1.0), (0.8, 1.0)), m((0.2, 1.0), (0.6, 1.0))),
            (m((1.0, 0.5)), m((1.0, 0.5), (1.0001, 0.5))),
            (m((0.0, 3.0)), AtomicMeasure()),
            (m((0.5, 1.0), (0.5 + 1e-12, 1.0)), m((0.5, 2.0))),
        ]
        for m1, m2 in cases:
            assert prohorov(m1, m2) == pytest.approx(brute_prohorov(m1, m2), abs=3e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            k1, k2 = rng.integers(0, 9, 2)
            m1 = AtomicMeasure(rng.uniform(0, 4, k1), rng.uniform(0.1, 1.5, k1))
            m2 = AtomicMeasure(rng.uniform(0, 4, k2), rng.uniform(0.1, 1.5, k2))
            assert prohorov(m1, m2) == prohorov(m2, m1)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(99)
        for _ in range(200):
            ms = []
            for _ in range(3):
                k = rng.integers(0, 7)
                ms.append(AtomicMeasure(rng.uniform(0, 3, k), rng.uniform(0.1, 2, k)))
            d01 = prohorov(ms[0], ms[1])
            d12 = prohorov(ms[1], ms[2])
            d02 = prohorov(ms[0], ms[2])
            assert d02 <= d01 + d12 + 2e-9

    def test_zero_iff_equal(self):
        a = m((1.0, 1.0), (2.0, 0.5))
        b = m((1.0, 1.0), (2.0, 0.5000001))
        assert prohorov(a, b) > 0.0
        assert prohorov(a, m((2.0, 0.5), (1.0, 1.0))) == 0.0


class TestTailFunction:
    def test_grid_must_start_at_zero(self):
        with pytest.raises(ValueError):
            TailFunction([1.0, 2.0], [1.0, 0.0])

    def test_values_must_decrease(self):
        with pytest.raises(ValueError):
            TailFunction([0.0, 1.0], [0.5, 0.8])

    def test_interpolation_brackets(self):
        tf = TailFunction([0.0, 1.0, 2.0], [1.0, 0.4, 0.0])
        assert tf(0.5) == pytest.approx(0.7)
        assert tf(1.5) == pytest.approx(0.2)
        assert tf(5.0) == 0.0  # constant beyond the grid

    def test_agrees_with_atomic_on_grid(self):
        rng = np.random.default_rng(17)
        grid = np.arange(0.0, 5.01, 0.25)
        for _ in range(20):
            k = rng.integers(0, 12)
            a = AtomicMeasure(rng.uniform(0, 6, k), rng.uniform(0.1, 2, k))
            tf = TailFunction.from_atomic(a, grid)
            assert tail_function_agrees(tf, a)
            for x in grid:
                assert tf(x) == tail(a, x)

    def test_inverse_round_trip(self):
        tf = TailFunction([0.0, 1.0, 3.0], [1.0, 0.5, 0.0])
        for level in (0.9, 0.5, 0.25, 0.01):
            x = float(tf.inverse(level))
            assert tf(x) == pytest.approx(level, abs=1e-12)


class TestSerialization:
    def test_atomic_round_trip(self):
        a = m((0.125, 1.5), (2.75, 0.3))
        assert atomic_from_text(atomic_to_text(a)) == a

    def test_empty_atomic(self):
        assert atomic_from_text(atomic_to_text(AtomicMeasure())) == AtomicMeasure()

    def test_tail_round_trip(self):
        tf = TailFunction([0.0, 0.5, 1.25], [1.0, 0.625, 0.0])
        back = tail_from_text(tail_to_text(tf))
        assert np.array_equal(back.grid, tf.grid)
        assert np.array_equal(back.values, tf.values)
