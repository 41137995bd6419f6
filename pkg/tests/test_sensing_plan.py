from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from scipy.linalg import block_diag

from pushframe.noiselet.transform import PairingError, conjugate_pair_map, fast_noiselet, noiselet_matrix
from pushframe.sensing_plan.model import Ordering, PlanIntegrityError, SensingPlan
from pushframe.sensing_plan.operator import BlockOperator, build_operator
from pushframe.sensing_plan.planner import (
    RateError,
    SensingPlanner,
    build_slm,
    draw_rows,
    even_rows,
    layout_patterns,
    slm_digest,
)
from pushframe.sensing_plan.rng import seeded_permutation


def _pair_of(n: int, row: int) -> int:
    return conjugate_pair_map(n.bit_length() - 1)[row]


class TestDrawRows:
    def test_full_rate_takes_every_row(self):
        for rows in draw_rows(256, 256, 4, seed=5):
            assert rows == list(range(256))

    def test_second_column_gets_the_complement(self):
        first, second = draw_rows(8, 4, 2, seed=9)
        assert sorted(first + second) == list(range(8))

    def test_least_recently_used_pairs_return_first(self):
        first, second, third = draw_rows(8, 6, 3, seed=2)
        assert set(first) | set(second) == set(range(8))
        assert set(first) - set(second) <= set(third)
        assert len(third) == 6

    @pytest.mark.parametrize("n,m,b", [(16, 4, 4), (64, 8, 8), (256, 102, 16)])
    def test_pool_covers_every_row_when_budget_allows(self, n, m, b):
        assignments = draw_rows(n, m, b, seed=0)
        assert set().union(*map(set, assignments)) == set(range(n))

    @pytest.mark.parametrize("seed", [0, 1, 42])
    def test_assignments_are_pair_closed(self, seed):
        for rows in draw_rows(64, 20, 5, seed):
            assert len(rows) == len(set(rows)) == 20
            assert all(_pair_of(64, r) in rows for r in rows)

    def test_deterministic_for_a_seed(self, planner):
        assert draw_rows(128, 40, 6, seed=17) == draw_rows(128, 40, 6, seed=17)
        for ordering in Ordering:
            first = planner.plan(128, 40, 6, seed=17, ordering=ordering).to_json()
            second = SensingPlanner().plan(128, 40, 6, seed=17, ordering=ordering).to_json()
            assert first.encode("utf-8") == second.encode("utf-8")

    def test_rejects_odd_or_excess_rows(self):
        with pytest.raises(PairingError):
            draw_rows(16, 5, 2, seed=0)
        with pytest.raises(RateError):
            draw_rows(16, 18, 2, seed=0)
        with pytest.raises(ValueError):
            draw_rows(16, 4, 0, seed=0)

    def test_zero_rows(self):
        assert draw_rows(16, 0, 3, seed=0) == [[], [], []]


def test_seeded_permutation_is_a_permutation():
    order = seeded_permutation(50, seed=123)
    assert sorted(order) == list(range(50))
    assert order == seeded_permutation(50, seed=123)
    assert order != seeded_permutation(50, seed=124)


def test_even_rows():
    assert even_rows(0.4, 256) == 102
    assert even_rows(1.0, 256) == 256
    assert even_rows(0.0, 256) == 0
    with pytest.raises(RateError):
        even_rows(1.5, 256)


class TestSlm:
    @pytest.mark.parametrize("n", [4, 8, 16, 64])
    def test_shape_and_single_ones_column(self, n):
        slm = build_slm(n)
        assert slm.shape == (n, n + 1)
        assert slm.dtype == np.uint8
        assert np.all(slm[:, -1] == 1)
        assert int(np.all(slm == 1, axis=0).sum()) == 1

    def test_smallest_mask(self):
        assert build_slm(2).shape == (2, 3)

    def test_orderings_are_column_permutations(self):
        mirrored = build_slm(32, Ordering.MIRRORED)
        pastuszczak = build_slm(32, Ordering.PASTUSZCZAK)
        assert Counter(col.tobytes() for col in mirrored.T) == Counter(col.tobytes() for col in pastuszczak.T)
        assert slm_digest(mirrored) != slm_digest(pastuszczak)

    def test_pastuszczak_keeps_pairs_adjacent(self):
        layout = layout_patterns(16, Ordering.PASTUSZCZAK)
        assert layout.source_rows[0] == layout.source_rows[1] == 0
        assert layout.source_rows[16] is None

    def test_mirrored_puts_pair_halves_at_both_ends(self):
        layout = layout_patterns(256, Ordering.MIRRORED)
        assert layout.source_rows[0] == layout.source_rows[255] == 0
        assert layout.source_rows[256] is None

    @pytest.mark.parametrize("ordering", list(Ordering))
    def test_layout_recovers_coefficients(self, ordering, rng):
        layout = layout_patterns(32, ordering)
        x = rng.uniform(size=32)
        measurements = build_slm(32, ordering).T.astype(np.float64) @ x
        np.testing.assert_allclose(layout.recover(measurements), fast_noiselet(x)[layout.rows], atol=1e-12)

    def test_mask_is_read_only(self):
        with pytest.raises(ValueError):
            build_slm(8)[0, 0] = 0


class TestSensingPlan:
    def test_plan_matches_draw(self, planner):
        plan = planner.plan(64, 16, 4, seed=3)
        assert [list(rows) for rows in plan.assignments] == draw_rows(64, 16, 4, seed=3)
        assert plan.rate == 0.25
        assert plan.slm_hash == slm_digest(build_slm(64))

    def test_naive_repeats_first_assignment(self, planner):
        plan = planner.plan(64, 16, 4, seed=3, naive=True)
        assert len(set(plan.assignments)) == 1

    def test_column_lookup_wraps_by_block(self, planner):
        plan = planner.plan(16, 4, 3, seed=1)
        assert plan.assignment_for_column(4) == plan.assignments[1]
        needed = plan.patterns_for_column(0)
        assert needed[-1] == 16
        assert len(needed) == 4 + 1

    def test_json_round_trip(self, planner, tmp_path):
        plan = planner.plan(32, 8, 4, seed=11, ordering="pastuszczak")
        assert SensingPlan.from_json(plan.to_json()) == plan
        assert SensingPlan.load(plan.save(tmp_path / "plan.json")) == plan

    def test_tampered_hash_is_rejected(self, planner):
        text = planner.plan(16, 4, 2, seed=0).to_json().replace('"slm_hash": "', '"slm_hash": "0')
        with pytest.raises(PlanIntegrityError):
            SensingPlan.from_json(text)

    def test_invalid_assignments_are_rejected(self, planner):
        plan = planner.plan(16, 4, 2, seed=0)
        payload = plan.model_dump()
        payload["assignments"] = ((0, 1, 14, 15), (0, 1, 2, 3))
        with pytest.raises(ValueError):
            SensingPlan.model_validate(payload)

    def test_with_rows_keeps_seed_and_ordering(self, planner):
        plan = planner.plan(64, 32, 4, seed=8, ordering="pastuszczak")
        smaller = planner.with_rows(plan, 8)
        assert (smaller.seed, smaller.ordering, smaller.b, smaller.m) == (8, Ordering.PASTUSZCZAK, 4, 8)


class TestBlockOperator:
    def test_single_column_is_row_selection(self, planner, rng):
        plan = planner.plan(32, 10, 1, seed=4)
        x = rng.normal(size=32)
        expected = fast_noiselet(x)[list(plan.assignments[0])]
        np.testing.assert_allclose(build_operator(plan).matvec(x), expected, atol=1e-12)

    def test_matches_dense_block_diagonal(self, planner, rng):
        plan = planner.plan(16, 6, 4, seed=6)
        dense = noiselet_matrix(4)
        blocks = [dense[list(rows)] for rows in plan.assignments]
        matrix = block_diag(*blocks)
        x = rng.normal(size=(16, 4))
        operator = build_operator(plan)
        np.testing.assert_allclose(operator.matvec(x.reshape(-1, order="F")), matrix @ x.reshape(-1, order="F"), atol=1e-12)
        assert operator.shape == (24, 64)

    def test_adjoint_consistency(self, planner, rng):
        operator = build_operator(planner.plan(64, 20, 3, seed=2))
        x = rng.normal(size=operator.shape[1]) + 1j * rng.normal(size=operator.shape[1])
        y = rng.normal(size=operator.shape[0]) + 1j * rng.normal(size=operator.shape[0])
        lhs = np.vdot(y, operator.matvec(x))
        rhs = np.vdot(operator.rmatvec(y), x)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_naive_blocks_share_rows(self, planner):
        operator = build_operator(planner.plan(32, 8, 4, seed=0, naive=True))
        rows = operator.rows_at()
        segments = [tuple(rows[operator.segment(k)]) for k in range(4)]
        assert len(set(segments)) == 1

    def test_narrow_trailing_block(self, planner):
        operator = build_operator(planner.plan(16, 4, 4, seed=0), width=2)
        assert operator.shape == (8, 32)
        with pytest.raises(ValueError):
            build_operator(planner.plan(16, 4, 4, seed=0), width=5)

    def test_empty_assignment_operator(self):
        operator = BlockOperator(8, [[], []])
        assert operator.shape == (0, 16)
