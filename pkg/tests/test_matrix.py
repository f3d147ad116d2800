import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A, B
from mutred import (
    CoverageMatrix,
    DomainError,
    InputError,
    KillMatrix,
    Sign,
    SuiteChain,
    filter_uncovered,
    half_sample_chain,
    killed_mutants,
    mutation_score,
    restrict,
    sign_sequence,
    thin_even_index,
)
from mutred.matrix import read_matrix, read_operators, write_matrix, write_operators


@st.composite
def matrices(draw, max_mutants=8, max_tests=8):
    m = draw(st.integers(1, max_mutants))
    t = draw(st.integers(1, max_tests))
    bits = draw(st.lists(st.booleans(), min_size=m * t, max_size=m * t))
    return KillMatrix(
        tuple(f"m{i}" for i in range(m)), tuple(f"t{j}" for j in range(t)), np.reshape(bits, (m, t))
    )


class TestConstruction:
    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            KillMatrix(("m1",), ("t1", "t2"), [[1]])

    def test_duplicate_ids(self):
        with pytest.raises(InputError, match="duplicate"):
            KillMatrix(("m1", "m1"), ("t1",), [[1], [0]])

    def test_empty_ids(self):
        with pytest.raises(InputError):
            KillMatrix((), ("t1",), np.zeros((0, 1)))

    def test_cells_read_only(self, kill):
        with pytest.raises(ValueError):
            kill.cells[0, 0] = False


class TestMutationScore:
    def test_full_suite(self, kill):
        assert mutation_score(kill, kill.test_ids) == 1.0

    def test_restricted_to_a(self, kill):
        assert mutation_score(restrict(kill, A), ["t1", "t2"]) == 0.5

    def test_restricted_to_b(self, kill):
        assert mutation_score(restrict(kill, B), ["t1", "t2"]) == 1.0

    def test_table_rows(self, kill):
        # T_1 = {t1, t2} and T_2 = {t1} both score 60% on all five mutants
        assert mutation_score(kill, ["t1", "t2"]) == pytest.approx(0.6)
        assert mutation_score(kill, ["t1"]) == pytest.approx(0.6)

    def test_empty_suite(self, kill):
        assert mutation_score(kill, []) == 0.0

    def test_unknown_test(self, kill):
        with pytest.raises(InputError, match="t9"):
            mutation_score(kill, ["t9"])


class TestKilledMutants:
    def test_t1_t3(self, kill):
        assert killed_mutants(kill, ["t1", "t3"]) == {"m1", "m2", "m3", "m4"}

    def test_t4(self, kill):
        assert killed_mutants(kill, ["t4"]) == {"m4", "m5"}

    def test_never_killed_row(self):
        k = KillMatrix(("a", "b"), ("t1", "t2"), [[1, 0], [0, 0]])
        assert "b" not in killed_mutants(k, k.test_ids)


class TestRestrict:
    def test_shape(self, kill):
        assert restrict(kill, B).shape == (2, 4)

    def test_identity(self, kill):
        assert restrict(kill, kill.mutant_ids) == kill

    def test_keeps_matrix_order(self, kill):
        assert restrict(kill, ["m4", "m1"]).mutant_ids == ("m1", "m4")

    def test_errors(self, kill):
        with pytest.raises(InputError):
            restrict(kill, [])
        with pytest.raises(InputError):
            restrict(kill, ["m9"])


class TestFilterUncovered:
    def test_all_ones(self, kill):
        cover = CoverageMatrix(kill.mutant_ids, kill.test_ids, np.ones(kill.shape))
        assert filter_uncovered(kill, cover) == kill.mutant_ids

    def test_zero_row(self, kill):
        cells = np.ones(kill.shape, dtype=bool)
        cells[2] = False
        cover = CoverageMatrix(kill.mutant_ids, kill.test_ids, cells)
        assert "m3" not in filter_uncovered(kill, cover)

    def test_example_as_coverage(self, kill, cover):
        assert len(filter_uncovered(kill, cover)) == 5

    def test_id_mismatch(self, kill):
        other = CoverageMatrix(("x",), kill.test_ids, np.ones((1, 4)))
        with pytest.raises(InputError):
            filter_uncovered(kill, other)


class TestHalfSampleChain:
    @pytest.mark.parametrize("n, sizes", [(4, (4, 2, 1)), (12, (12, 6, 3, 1)), (2, (2, 1))])
    def test_sizes(self, n, sizes):
        chain = half_sample_chain([f"t{i}" for i in range(n)], np.random.default_rng(0))
        assert chain.sizes == sizes
        assert chain.k == len(sizes) - 1

    @pytest.mark.parametrize("n", [2, 3, 5, 100, 1023, 1024, 10_000])
    def test_k_is_floor_log2(self, n):
        chain = half_sample_chain([f"t{i}" for i in range(n)], np.random.default_rng(n))
        assert chain.k == int(np.floor(np.log2(n)))
        for outer, inner in zip(chain.suites, chain.suites[1:]):
            assert set(inner) < set(outer)

    def test_too_small(self):
        with pytest.raises(DomainError):
            half_sample_chain(["t1"], np.random.default_rng(0))

    def test_reproducible(self):
        tests = [f"t{i}" for i in range(50)]
        a = half_sample_chain(tests, np.random.default_rng(7))
        b = half_sample_chain(tests, np.random.default_rng(7))
        assert a == b

    def test_first_step_uniform(self):
        # each 2-subset of 4 tests should come up about 1/6 of the time
        rng = np.random.default_rng(3)
        counts = {}
        for _ in range(6000):
            half = half_sample_chain(["a", "b", "c", "d"], rng).suites[1]
            counts[half] = counts.get(half, 0) + 1
        assert len(counts) == 6
        assert all(abs(c / 6000 - 1 / 6) < 0.02 for c in counts.values())

    def test_invalid_chains(self):
        with pytest.raises(InputError):
            SuiteChain.parse("t1,t2,t3,t4;t1;t1")
        with pytest.raises(InputError):
            SuiteChain.parse("t1,t2,t3,t4;t1,t5;t1")
        with pytest.raises(DomainError):
            SuiteChain.parse("t1")


class TestSignSequence:
    def test_full(self, kill, chain):
        assert sign_sequence(kill, chain) == [Sign.GT, Sign.EQ]

    def test_b(self, kill, chain):
        assert sign_sequence(restrict(kill, B), chain) == [Sign.EQ, Sign.EQ]

    def test_always_killed(self, chain):
        k = KillMatrix(("m",), ("t1", "t2", "t3", "t4"), [[1, 1, 1, 1]])
        assert sign_sequence(k, chain) == [Sign.EQ, Sign.EQ]


class TestThin:
    def test_four(self):
        assert thin_even_index(["t1", "t2", "t3", "t4"]) == ("t2", "t4")

    def test_three(self):
        assert thin_even_index(["t1", "t2", "t3"]) == ("t2",)

    def test_rethinning_halves_again(self):
        suite = [f"t{i}" for i in range(16)]
        assert len(thin_even_index(thin_even_index(suite))) == 4

    def test_empty_result(self):
        with pytest.raises(DomainError):
            thin_even_index(["t1"])


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(matrices(), st.data())
    def test_score_monotone(self, k, data):
        big = data.draw(st.sets(st.sampled_from(k.test_ids)))
        small = data.draw(st.sets(st.sampled_from(sorted(big)))) if big else set()
        assert mutation_score(k, small) <= mutation_score(k, big)
        assert killed_mutants(k, small) <= killed_mutants(k, big)

    @settings(max_examples=200, deadline=None)
    @given(matrices(), st.data())
    def test_restrict_score_matches_direct_count(self, k, data):
        subset = data.draw(st.sets(st.sampled_from(k.mutant_ids), min_size=1))
        suite = data.draw(st.sets(st.sampled_from(k.test_ids)))
        expected = len(killed_mutants(k, suite) & subset) / len(subset)
        assert mutation_score(restrict(k, subset), suite) == pytest.approx(expected)

    @settings(max_examples=200, deadline=None)
    @given(matrices(max_tests=10), st.data(), st.integers(0, 2**32 - 1))
    def test_equal_sign_propagates(self, k, data, seed):
        if len(k.test_ids) < 2:
            return
        chain = half_sample_chain(k.test_ids, np.random.default_rng(seed))
        subset = data.draw(st.sets(st.sampled_from(k.mutant_ids), min_size=1))
        full = sign_sequence(k, chain)
        reduced = sign_sequence(restrict(k, subset), chain)
        for f, r in zip(full, reduced):
            if f is Sign.EQ:
                assert r is Sign.EQ


class TestCsv:
    def test_round_trip(self, kill, tmp_path):
        write_matrix(kill, tmp_path / "k.csv")
        assert read_matrix(tmp_path / "k.csv") == kill

    def test_bad_cell_reports_position(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("mutant_id,t1,t2\nm1,1,0\nm2,0,x\n")
        with pytest.raises(InputError, match=r"bad.csv:3:3"):
            read_matrix(p)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("mutant_id,t1,t2\nm1,1\n")
        with pytest.raises(InputError, match=r":2"):
            read_matrix(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("id,t1\nm1,1\n")
        with pytest.raises(InputError, match=r":1:1"):
            read_matrix(p)

    def test_operators(self, tmp_path):
        ops = {"m1": "MATH", "m2": "RETURN_VALS"}
        write_operators(ops, tmp_path / "o.csv")
        assert read_operators(tmp_path / "o.csv", ["m1", "m2"]) == ops
        with pytest.raises(InputError, match="m3"):
            read_operators(tmp_path / "o.csv", ["m1", "m2", "m3"])
