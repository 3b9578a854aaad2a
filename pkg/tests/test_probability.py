import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from castore import probability as prob
from castore.probability import Probability

# Frozen from 50-digit mpmath evaluation of 1 - prod(1 - i/N) and friends.
EXACT_23_365 = 0.50729723432398540722
EXACT_256_65536 = 0.39267752673178727128
EXACT_1000_2_20 = 0.37905436699322016523
SAME_253_365 = 0.50047715403658201443
SAME_365_365 = 0.63262507933682778676
GM_PER_MS_100_10000 = 1.1869459682199748434e-54
GM_OVER_1000_YEARS = 3.7388797998929207568e-41
MPP_315E14 = 1.0968624958454317409e-46
M_1E6 = 1.4693664691599208571e-27


def close(p: Probability, expected: float, rel=1e-9):
    return math.isclose(p.value, expected, rel_tol=rel)


class TestProbabilityType:
    def test_rejects_positive_log(self):
        with pytest.raises(ValueError):
            Probability(0.1)

    def test_zero(self):
        z = Probability.zero()
        assert z.is_zero and z.value == 0.0 and z.decimal() == "0"

    def test_tiny_values_render(self):
        p = Probability(-248.0)
        assert p.decimal() == "2.21086e-75"
        assert p.power_of_two() == "2^-248.00"

    def test_beyond_float_range_renders(self):
        assert Probability(-5000.0).decimal().endswith("e-1506")

    @given(st.floats(min_value=-1000, max_value=0))
    def test_render_round_trip(self, lg):
        p = Probability(lg)
        mant, exp = p.decimal(digits=10).split("e")
        back = math.log2(float(mant)) + int(exp) * math.log2(10)
        assert math.isclose(back, lg, rel_tol=1e-6, abs_tol=1e-6)


class TestBirthday:
    def test_bound_smallest(self):
        with pytest.raises(ValueError):
            prob.collision_bound(2, 2)
        assert prob.collision_bound(2, 4).value == 0.25

    def test_bound_table1_row(self):
        assert close(prob.collision_bound(10**6, 2**128), M_1E6)

    def test_bound_vs_exact_256(self):
        bound = prob.collision_bound(256, 65536)
        exact = prob.exact_birthday(256, 65536)
        assert math.isclose(bound.value, 256 * 255 / 2 / 65536)
        assert close(exact, EXACT_256_65536, rel=1e-12)
        assert exact.value <= bound.value

    def test_exact_23(self):
        assert close(prob.exact_birthday(23, 365), EXACT_23_365, rel=1e-12)

    def test_exact_1000(self):
        assert close(prob.exact_birthday(1000, 2**20), EXACT_1000_2_20, rel=1e-12)

    def test_exact_one_ball(self):
        assert prob.exact_birthday(1, 10).is_zero

    def test_exact_pigeonhole(self):
        with pytest.raises(ValueError):
            prob.exact_birthday(366, 365)
        assert math.isclose(prob.exact_birthday(365, 365).value, 1.0)

    def test_same_as_you(self):
        assert close(prob.same_birthday_as_you(253, 365), SAME_253_365, rel=1e-12)
        assert close(prob.same_birthday_as_you(365, 365), SAME_365_365, rel=1e-12)
        assert math.isclose(prob.same_birthday_as_you(1, 365).value, 1 / 365)
        with pytest.raises(ValueError):
            prob.same_birthday_as_you(0, 365)

    def test_bound_dominates_exact(self):
        rng = random.Random(5)
        for _ in range(10_000):
            N = rng.randrange(3, 2**40)
            q = rng.randrange(2, min(N, 3000))
            assert prob.exact_birthday(q, N).log2_value <= prob.collision_bound(q, N).log2_value + 1e-12

    @given(st.integers(2, 10**6), st.integers(20, 200))
    def test_monotone(self, q, nbits):
        N = 2**nbits
        if q + 1 >= N:
            return
        assert prob.collision_bound(q + 1, N).log2_value >= prob.collision_bound(q, N).log2_value
        if prob.collision_bound(q, N).log2_value < 0:
            assert prob.collision_bound(q, 2 * N).log2_value < prob.collision_bound(q, N).log2_value


class TestSchemes:
    @pytest.mark.parametrize("exp", range(6, 16))
    def test_m_table1(self, exp):
        # table values carry one significant digit; factor-of-2 window
        p = prob.m_collision(10**exp).value
        target = 10.0 ** (-27 + 2 * (exp - 6))
        assert target / 2 <= p <= target * 2

    def test_m_two_files(self):
        assert prob.m_collision(2).log2_value == -128

    def test_m_range(self):
        with pytest.raises(ValueError):
            prob.m_collision(1)
        with pytest.raises(ValueError):
            prob.m_collision(2**128)

    @pytest.mark.parametrize("alpha", [1e-3, 1e-6, 1e-9, 1.234e-4])
    def test_alpha_form(self, alpha):
        q = alpha * 2**64
        assert math.isclose(prob.m_collision(q).value, alpha**2 / 2, rel_tol=1e-6)

    def test_mpp(self):
        assert close(prob.mpp_collision(3.15e14), MPP_315E14)
        half = prob.mpp_collision(2**124).value
        assert 0.4 <= half <= 0.5
        assert prob.mpp_collision(2).log2_value == -248

    def test_gm_set_size(self):
        assert prob.gm_set_size(100, 10_000) == 1077
        assert prob.gm_set_size(1, 1) == 2
        assert prob.gm_set_size(100, 2**10) == 200
        with pytest.raises(ValueError):
            prob.gm_set_size(10, 5)

    def test_gm_per_ms(self):
        assert close(prob.gm_collision_per_ms(100, 10_000), GM_PER_MS_100_10000)
        assert prob.gm_collision_per_ms(1, 1).log2_value == -219
        a = prob.gm_collision_per_ms(10, 1000).log2_value
        b = prob.gm_collision_per_ms(10, 2000).log2_value
        assert math.isclose(b - a, 2.0)

    def test_gm_over(self):
        p = prob.gm_collision_over(100, 10_000, 3.15e13)
        assert close(p, GM_OVER_1000_YEARS)
        assert prob.gm_collision_over(7, 70, 1) == prob.gm_collision_per_ms(7, 70)
        full = prob.gm_collision_over(100, 10_000, 2e6).log2_value
        half = prob.gm_collision_over(100, 10_000, 1e6).log2_value
        assert math.isclose(full - half, 1.0)

    def test_gm_clamped(self):
        assert prob.gm_collision_over(10**30, 10**30, 10**10).log2_value == 0.0


class TestAttackCost:
    def test_100mb_limit_case(self):
        cost = prob.second_preimage_cost(128, 21)
        assert cost.log2_dominant == 108.0
        assert abs(cost.log2_full - 108.0) < 0.1
        assert math.isclose(cost.log2_full, 108.00000000000344, rel_tol=0, abs_tol=1e-9)

    def test_block_exponent(self):
        assert prob.block_count_exponent(100_000_000) == 21
        assert prob.block_count_exponent(64) == 1
        assert prob.block_count_exponent(128) == 1
        assert prob.block_count_exponent(129) == 2

    def test_range(self):
        with pytest.raises(ValueError):
            prob.second_preimage_cost(20, 20)
        with pytest.raises(ValueError):
            prob.second_preimage_cost(128, 0)

    def test_meet_in_the_middle(self):
        assert prob.meet_in_the_middle_cost(128, 64) == 97.0


class TestMonteCarlo:
    def test_single_ball(self):
        res = prob.monte_carlo_birthday(1, 10, 100, seed=1)
        assert res.collisions == 0 and res.rate == 0.0

    def test_deterministic(self):
        a = prob.monte_carlo_birthday(30, 1000, 2000, seed=b"x")
        b = prob.monte_carlo_birthday(30, 1000, 2000, seed=b"x")
        assert a == b

    def test_budget(self):
        with pytest.raises(ValueError):
            prob.monte_carlo_birthday(10**5, 2**30, 10**5)
        with pytest.raises(ValueError):
            prob.monte_carlo_birthday(10, 2**41, 10)

    def test_certain_collision(self):
        assert prob.monte_carlo_birthday(11, 10, 50).rate == 1.0

    @pytest.mark.parametrize("q,N,expected", [(23, 365, EXACT_23_365), (256, 65536, EXACT_256_65536)])
    def test_within_three_sigma(self, q, N, expected):
        res = prob.monte_carlo_birthday(q, N, 10_000, seed=b"mc")
        assert abs(res.rate - expected) <= 3 * math.sqrt(expected * (1 - expected) / res.trials)
        assert res.rate <= prob.collision_bound(q, N).value
