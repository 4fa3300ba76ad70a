"""State space, momentum/velocity transforms, and the two vector-field forms."""

import math

import pytest

from relosc import (
    LuminalVelocityError,
    Problem,
    State,
    momentum_to_velocity,
    parse,
    rhs,
    rhs_regularized,
    velocity_to_momentum,
)


class TestTransforms:
    def test_zero_maps_to_zero(self):
        assert velocity_to_momentum(0.0) == 0.0
        assert momentum_to_velocity(0.0) == 0.0

    def test_closed_form_three_four_five(self):
        # 0.6 / sqrt(1 - 0.36) = 0.6 / 0.8
        assert velocity_to_momentum(0.6) == pytest.approx(0.75, abs=1e-15)
        assert velocity_to_momentum(-0.6) == pytest.approx(-0.75, abs=1e-15)
        assert momentum_to_velocity(0.75) == pytest.approx(0.6, abs=1e-15)

    def test_odd_symmetry(self):
        for p in (0.1, 0.5, 0.9, 0.999):
            assert velocity_to_momentum(-p) == -velocity_to_momentum(p)
        for u in (0.1, 1.0, 50.0):
            assert momentum_to_velocity(-u) == -momentum_to_velocity(u)

    def test_luminal_velocity_rejected(self):
        for p in (1.0, -1.0, 1.5, -2.0):
            with pytest.raises(LuminalVelocityError):
                velocity_to_momentum(p)

    def test_nonfinite_momentum_rejected(self):
        for u in (math.inf, -math.inf, math.nan):
            with pytest.raises(ValueError):
                momentum_to_velocity(u)

    def test_roundtrip_from_momentum_side(self):
        # |u| <= 1 reconstructs to full precision. At |u| = 1e3 the round
        # trip is limited by conditioning, not by the formulas: one ulp of
        # the intermediate p is amplified by du/dp = (1+u^2)^(3/2), which
        # puts the best reachable relative error near ulp*(1+u^2)^(3/2)/|u|
        # (about 1e-10 at |u| = 1e3). The transforms are exact inverses in
        # real arithmetic; the bound below pins the float64 floor.
        for u in (1e-3, -1e-3, 1.0, -1.0):
            back = velocity_to_momentum(momentum_to_velocity(u))
            assert abs(back - u) <= 1e-12 * abs(u)
        for u in (1e3, -1e3):
            back = velocity_to_momentum(momentum_to_velocity(u))
            assert abs(back - u) <= 5e-10 * abs(u)

    def test_roundtrip_from_velocity_side(self):
        # This direction is contractive, so full precision holds everywhere.
        for k in range(-999, 1000):
            p = k / 1000.0
            back = momentum_to_velocity(velocity_to_momentum(p))
            assert abs(back - p) <= 1e-12 * max(abs(p), 1e-300)

    def test_strictly_monotone(self):
        grid = [k / 500.0 for k in range(-499, 500)]
        values = [velocity_to_momentum(p) for p in grid]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestState:
    def test_luminal_boundary_allowed(self):
        assert State(0.0, 0.0, 1.0).p == 1.0
        assert State(0.0, 0.0, -1.0).p == -1.0

    def test_superluminal_rejected(self):
        with pytest.raises(LuminalVelocityError):
            State(0.0, 0.0, 1.0000000001)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            State(math.nan, 0.0, 0.0)
        with pytest.raises(ValueError):
            State(0.0, math.inf, 0.0)


class TestProblem:
    def test_period_must_be_positive(self):
        with pytest.raises(ValueError):
            Problem(force=parse("0"), period=0.0)
        with pytest.raises(ValueError):
            Problem(force=parse("0"), period=-1.0)

    def test_topology_validated(self):
        with pytest.raises(ValueError):
            Problem(force=parse("0"), period=1.0, topology="torus")

    def test_force_must_be_evaluable(self):
        with pytest.raises(TypeError):
            Problem(force="sin(q)", period=1.0)

    def test_time_reduced_modulo_period(self):
        prob = Problem(force=parse("t"), period=1.0)
        assert prob.force_value(1.5, 0.0, 0.0) == 0.5
        assert prob.force_value(17.25, 0.0, 0.0) == pytest.approx(0.25, abs=1e-12)
        # negative times wrap forward (periodic extension)
        assert prob.force_value(-0.25, 0.0, 0.0) == 0.75


class TestVectorFields:
    def test_equilibrium(self):
        prob = Problem(force=parse("sin(q)"), period=1.0)
        assert rhs(State(0.0, 0.0, 0.0), prob) == (0.0, 0.0)

    def test_upright_force(self):
        prob = Problem(force=parse("sin(q)"), period=1.0)
        dq, dp = rhs(State(0.0, math.pi / 2.0, 0.0), prob)
        assert dq == 0.0
        assert dp == 1.0

    def test_luminal_lines_invariant(self):
        # The momentum update is exactly zero at |p| = 1 however large the
        # force; the speed-limit lines cannot be crossed.
        prob = Problem(force=parse("1000"), period=1.0)
        assert rhs(State(0.0, 0.0, 1.0), prob) == (1.0, 0.0)
        assert rhs(State(0.0, 0.0, -1.0), prob) == (-1.0, 0.0)

    def test_regularized_at_rest(self):
        prob = Problem(force=parse("sin(q)"), period=1.0)
        assert rhs_regularized(0.0, 0.0, 0.0, prob) == (0.0, 0.0)
        assert rhs_regularized(0.0, math.pi / 2.0, 0.0, prob) == (0.0, 1.0)

    def test_chain_rule_consistency(self):
        # dp/dt from the velocity form must equal (1-p^2)^(3/2) * du/dt from
        # the regularized form at the matching point.
        prob = Problem(force=parse("0.5*cos(2*pi*t) + sin(q) - 0.3*p"), period=1.0)
        cases = [
            (0.0, 0.3, 0.2),
            (0.25, -1.0, 0.8),
            (0.7, 2.0, -0.95),
            (0.99, 0.0, 0.5),
        ]
        for t, q, p in cases:
            _, dp = rhs(State(t, q, p), prob)
            u = velocity_to_momentum(p)
            _, du = rhs_regularized(t, q, u, prob)
            assert abs(dp - math.pow(1.0 - p * p, 1.5) * du) <= 1e-12 * max(1.0, abs(dp))
