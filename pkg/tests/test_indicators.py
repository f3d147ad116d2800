from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A, B, random_kill
from mutred import (
    DomainError,
    InputError,
    KillMatrix,
    ResourceError,
    SuiteChain,
    avg_vms,
    erop,
    full_oracle_op,
    half_sample_chain,
    mutation_score,
    nop,
    op_mean,
    op_single_chain,
    p_count,
    restrict,
    rr,
    strategy_effectiveness,
    vms,
)
from mutred.indicators import IndicatorReport, _changed_signs, erop_rep, p_count_sum, random_nonempty_subsets
from mutred.matrix import chain_kill_table
from oracles import as_sets, changed_arrows, exact_op, exhaustive_nop, p_sum


class TestReductionRatio:
    def test_values(self):
        assert rr(5, A) == pytest.approx(0.6)
        assert rr(10, 10) == 0.0
        assert rr(4, 1) == 0.75

    def test_bounds(self):
        with pytest.raises(InputError):
            rr(3, 4)
        with pytest.raises(InputError):
            rr(3, [])


class TestVMS:
    @pytest.mark.parametrize("sel", [A, B])
    def test_example_full_suite_zero(self, kill, sel):
        assert vms(kill, sel, kill.test_ids) == 0.0

    def test_known_values(self, kill):
        assert vms(kill, A, ["t1", "t2"]) == pytest.approx(0.1)
        assert vms(kill, B, ["t1", "t2"]) == pytest.approx(0.4)

    def test_avg_vms_matches_manual(self, kill, chain):
        expected = np.mean([vms(kill, B, s) for s in chain.suites])
        assert avg_vms(kill, B, [chain]) == pytest.approx(expected)
        assert avg_vms(kill, B, [chain]) == pytest.approx(4 / 15)

    def test_identity_is_zero(self, kill, chain):
        assert avg_vms(kill, kill.mutant_ids, [chain, chain]) == 0.0


class TestStrategyEffectiveness:
    def test_absolute_example(self, kill):
        suite = kill.test_ids
        assert strategy_effectiveness(kill, A, suite, rng=np.random.default_rng(0))[0] == pytest.approx(0.8)
        assert strategy_effectiveness(kill, B, suite, rng=np.random.default_rng(0))[0] == 1.0

    def test_relative_of_whole_set_is_zero(self, kill):
        absolute, relative = strategy_effectiveness(kill, kill.mutant_ids, kill.test_ids, 20, np.random.default_rng(0))
        assert absolute == 1.0 and relative == 0.0

    def test_relative_baseline_exact(self, kill):
        # enumerate all 10 pairs of mutants for the exact random-baseline mean
        sets = as_sets(kill)
        values = []
        for pair in combinations(kill.mutant_ids, 2):
            ts = set().union(*(sets[m] for m in pair))
            values.append(sum(1 for m in sets if sets[m] & ts) / 5)
        _, rel = strategy_effectiveness(kill, A, kill.test_ids, 20000, np.random.default_rng(1))
        assert rel == pytest.approx(0.8 - np.mean(values), abs=0.01)

    def test_undefined_when_nothing_killed(self):
        k = KillMatrix(("a",), ("t1",), [[0]])
        with pytest.raises(DomainError):
            strategy_effectiveness(k, ["a"], ["t1"])


class TestOrderPreservation:
    def test_canonical_chain(self, kill, chain):
        assert op_single_chain(kill, A, chain) == 1.0
        assert op_single_chain(kill, B, chain) == 0.5

    def test_identity_preserves_everything(self, kill, chain):
        assert op_single_chain(kill, kill.mutant_ids, chain) == 1.0

    @pytest.mark.parametrize("sel", [A, B, ("m5",), ("m1", "m2", "m5")])
    def test_mean_converges_to_exact(self, kill, sel):
        exact = float(exact_op(as_sets(kill), sel, kill.test_ids))
        got, per_rep = op_mean(kill, sel, reps=20000, rng=np.random.default_rng(4))
        assert len(per_rep) == 20000
        assert got == pytest.approx(exact, abs=0.01)

    def test_exact_op_example(self, kill):
        assert exact_op(as_sets(kill), A, kill.test_ids) == Fraction(3, 4)
        assert exact_op(as_sets(kill), B, kill.test_ids) == Fraction(5, 24)

    def test_drawer_is_called_per_rep(self, kill):
        calls = []

        def draw(rng):
            calls.append(1)
            return A

        op_mean(kill, draw, reps=7, rng=np.random.default_rng(0))
        assert len(calls) == 7

    def test_domain_errors(self, kill):
        with pytest.raises(DomainError):
            op_mean(kill, A, suite=["t1"])
        with pytest.raises(DomainError):
            SuiteChain.parse("t1")

    def test_runtime_equal_sign_assertion(self):
        # a table no subset of M can produce: full EQ, reduced GT
        table = np.array([[1, 0], [0, 1]], dtype=bool)
        with pytest.raises(AssertionError):
            _changed_signs(table, np.array([0]))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_op_range(self, seed):
        rng = np.random.default_rng(seed)
        kill = random_kill(rng, int(rng.integers(1, 15)), int(rng.integers(2, 17)), rng.uniform(0.05, 0.6))
        sel = rng.choice(kill.mutant_ids, size=int(rng.integers(1, kill.shape[0] + 1)), replace=False)
        chain = half_sample_chain(kill.test_ids, rng)
        value = op_single_chain(kill, sel, chain)
        assert 0.0 <= value <= 1.0
        assert value * chain.k == pytest.approx(round(value * chain.k))


class TestEROP:
    def test_identity_is_exactly_zero(self, kill):
        assert erop(kill, kill.mutant_ids, reps=50, rng=np.random.default_rng(0)) == 0.0

    def test_rep_is_rr_weighted(self, kill, chain):
        table = chain_kill_table(kill, chain)
        rows = kill.mutant_rows(A)
        for seed in range(20):
            value = erop_rep(kill, table, rows, np.random.default_rng(seed))
            # OP(A) = 1 on this chain, so the term is 0.6 * (1 - OP(random pair))
            assert value in (pytest.approx(0.0), pytest.approx(0.3), pytest.approx(0.6))

    def test_example_sign(self, kill):
        assert erop(kill, A, reps=4000, rng=np.random.default_rng(0)) > 0
        assert erop(kill, B, reps=4000, rng=np.random.default_rng(0)) < 0


class TestNOP:
    def test_identity(self, kill):
        assert nop(kill, kill.mutant_ids, rng=np.random.default_rng(0)) == 1.0

    def test_default_pair_count(self, kill):
        # 100 * k pairs, so the result is a multiple of 1/200 for n = 4
        value = nop(kill, B, rng=np.random.default_rng(3))
        assert value * 200 == pytest.approx(round(value * 200))

    def test_subsets_uniform(self):
        draws = random_nonempty_subsets(3, 70000, np.random.default_rng(0))
        assert draws.any(axis=1).all()
        codes = draws @ np.array([1, 2, 4])
        freq = np.bincount(codes, minlength=8)[1:] / len(codes)
        assert np.allclose(freq, 1 / 7, atol=0.006)

    def test_against_exhaustive(self, kill):
        for sel in (A, B):
            exact = float(exhaustive_nop(as_sets(kill), sel, kill.test_ids))
            assert nop(kill, sel, rng=np.random.default_rng(2), pairs=20000) == pytest.approx(exact, abs=0.015)


class TestPCount:
    @pytest.mark.parametrize("n", range(1, 21))
    def test_closed_form(self, n):
        assert p_count(n) == p_count_sum(n) == p_sum(n)

    def test_small(self):
        assert [p_count(n) for n in (1, 2, 3, 4)] == [0, 2, 9, 28]

    def test_invalid(self):
        with pytest.raises(InputError):
            p_count(0)


class TestFullOracle:
    def test_b_example(self, kill):
        preserved, changed, total = full_oracle_op(kill, B)
        assert (changed, total) == (19, 28)
        assert preserved == pytest.approx(9 / 28)

    def test_a_example_enumerated(self, kill):
        # independent enumeration counts eight changed arrows for {m1, m2}
        assert changed_arrows(as_sets(kill), A, kill.test_ids) == (8, 28)
        assert full_oracle_op(kill, A)[1:] == (8, 28)

    def test_guard(self, kill):
        with pytest.raises(ResourceError):
            full_oracle_op(kill, A, max_n=3)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_set_oracle(self, seed):
        rng = np.random.default_rng(seed)
        kill = random_kill(rng, int(rng.integers(1, 8)), int(rng.integers(2, 7)), rng.uniform(0.1, 0.7))
        sel = tuple(rng.choice(kill.mutant_ids, size=int(rng.integers(1, kill.shape[0] + 1)), replace=False))
        _, changed, total = full_oracle_op(kill, sel)
        assert (changed, total) == changed_arrows(as_sets(kill), sel, kill.test_ids)


class TestRandomSelectionExpectation:
    def test_mean_score_unbiased(self):
        rng = np.random.default_rng(8)
        kill = random_kill(rng, 30, 10, 0.1)
        full = mutation_score(kill, kill.test_ids)
        for m in (1, 5, 15):
            scores = [
                mutation_score(restrict(kill, rng.choice(kill.mutant_ids, m, replace=False)), kill.test_ids)
                for _ in range(3000)
            ]
            assert np.mean(scores) == pytest.approx(full, abs=0.03)


class TestReport:
    def test_unknown_indicator(self):
        with pytest.raises(InputError):
            IndicatorReport("rms", 0, "XYZ", 1.0, 0)
