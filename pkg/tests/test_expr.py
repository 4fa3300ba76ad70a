"""Expression language: parsing, evaluation, and second-order jets."""

import math
import random

import pytest

from relosc import (
    DisallowedVariableError,
    ExprEvalError,
    ExprSyntaxError,
    Jet2,
    NondifferentiableError,
    UnknownIdentifierError,
    parse,
)


class TestParse:
    def test_function_call_tree(self):
        e = parse("sin(q)")
        assert e.variables == frozenset({"q"})
        assert e.to_text() == "sin(q)"

    def test_precedence_mul_over_add(self):
        assert parse("1+2*3").evaluate() == 7.0

    def test_power_right_associative(self):
        assert parse("2^3^2").evaluate() == 512.0

    def test_power_binds_tighter_than_unary_minus(self):
        assert parse("-2^2").evaluate() == -4.0

    def test_unary_minus_after_operator(self):
        assert parse("2*-3").evaluate() == -6.0
        assert parse("2^-1").evaluate() == 0.5

    def test_left_associativity(self):
        assert parse("8/4/2").evaluate() == 1.0
        assert parse("8-4-2").evaluate() == 2.0

    def test_pi_constant(self):
        assert parse("pi").evaluate() == math.pi

    def test_whitespace_insignificant(self):
        assert parse(" 1 +  2 * 3 ").root == parse("1+2*3").root

    def test_scientific_literals(self):
        assert parse("1e-3").evaluate() == 1e-3
        assert parse("2.5e2").evaluate() == 250.0
        assert parse(".5").evaluate() == 0.5

    def test_unknown_identifier_with_offset(self):
        with pytest.raises(UnknownIdentifierError) as exc:
            parse("sin(h)", ("t",))
        assert exc.value.offset == 4

    def test_disallowed_variable(self):
        with pytest.raises(DisallowedVariableError):
            parse("sin(q)", ("t",))

    def test_syntax_error_has_offset(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse("1 + * 2")
        assert exc.value.offset == 4

    def test_unexpected_character(self):
        with pytest.raises(ExprSyntaxError):
            parse("1 # 2")

    def test_trailing_input_rejected(self):
        with pytest.raises(ExprSyntaxError):
            parse("1 2")

    def test_unbalanced_parenthesis(self):
        with pytest.raises(ExprSyntaxError):
            parse("sin(q")

    def test_empty_input(self):
        with pytest.raises(ExprSyntaxError):
            parse("")


class TestPrinter:
    CORPUS = [
        "1+2*3",
        "(1+2)*3",
        "2^3^2",
        "(2^3)^2",
        "-2^2",
        "(-2)^2",
        "-(q+p)",
        "8-4-2",
        "8-(4-2)",
        "8/4/2",
        "t*sin(2*pi*t)-cos(q)/p",
        "sqrt(1-p^2)",
        "exp(-t)*log(1+t)",
    ]

    @pytest.mark.parametrize("text", CORPUS)
    def test_roundtrip_preserves_tree(self, text):
        e = parse(text)
        assert parse(e.to_text()).root == e.root

    @pytest.mark.parametrize("text", CORPUS)
    def test_printer_idempotent(self, text):
        once = parse(text).to_text()
        assert parse(once).to_text() == once


class TestEvaluate:
    def test_sin_at_half_pi(self):
        assert parse("sin(q)").evaluate(q=math.pi / 2.0) == 1.0

    def test_cosine_drive_at_zero(self):
        assert parse("0.5*cos(2*pi*t)").evaluate(t=0.0) == 0.5

    def test_division_by_zero_is_eval_error(self):
        with pytest.raises(ExprEvalError) as exc:
            parse("1/(1-p)").evaluate(p=1.0)
        assert "1.0/(1.0 - p)" in str(exc.value)

    def test_log_domain_error_names_node(self):
        with pytest.raises(ExprEvalError) as exc:
            parse("log(t-1)").evaluate(t=0.5)
        assert "log" in str(exc.value)

    def test_overflow_is_eval_error(self):
        with pytest.raises(ExprEvalError):
            parse("exp(t)").evaluate(t=1e9)

    def test_missing_variable(self):
        with pytest.raises(ExprEvalError):
            parse("sin(q)").evaluate(t=0.0)

    def test_repeated_evaluation_bit_identical(self):
        e = parse("sin(t)*cos(q)-p/3 + t^3")
        args = {"t": 0.7310585786300049, "q": -2.5, "p": 0.1}
        assert e.evaluate(**args) == e.evaluate(**args)

    def test_abs_allowed_in_plain_evaluation(self):
        assert parse("abs(p)").evaluate(p=-0.25) == 0.25


class TestJets:
    def test_sine_jet_at_zero(self):
        jet = parse("sin(2*pi*t)", ("t",)).eval_jet2(0.0)
        assert jet == Jet2(0.0, 2.0 * math.pi, 0.0)

    def test_quadratic_jet(self):
        jet = parse("t^2", ("t",)).eval_jet2(3.0)
        assert (jet.value, jet.d1, jet.d2) == (9.0, 6.0, 2.0)

    def test_scaled_sine_jet_at_quarter_period(self):
        jet = parse("0.1*sin(2*pi*t)", ("t",)).eval_jet2(0.25)
        assert jet.value == 0.1
        assert abs(jet.d1) < 1e-15
        assert jet.d2 == pytest.approx(-0.4 * math.pi**2, rel=1e-14)

    def test_quotient_jet(self):
        # d/dt (t/(1+t)) = 1/(1+t)^2, second derivative -2/(1+t)^3
        jet = parse("t/(1+t)", ("t",)).eval_jet2(1.0)
        assert jet.value == pytest.approx(0.5, rel=1e-15)
        assert jet.d1 == pytest.approx(0.25, rel=1e-14)
        assert jet.d2 == pytest.approx(-0.25, rel=1e-14)

    def test_variable_exponent_jet(self):
        # d/dt t^t = t^t (log t + 1) at t = 2
        jet = parse("t^t", ("t",)).eval_jet2(2.0)
        assert jet.value == pytest.approx(4.0, rel=1e-14)
        assert jet.d1 == pytest.approx(4.0 * (math.log(2.0) + 1.0), rel=1e-13)

    def test_jet_requires_t_only(self):
        with pytest.raises(ExprEvalError):
            parse("sin(q)").eval_jet2(0.0)

    def test_abs_nondifferentiable_at_zero(self):
        with pytest.raises(NondifferentiableError):
            parse("abs(t)", ("t",)).eval_jet2(0.0)

    def test_abs_jet_away_from_zero(self):
        jet = parse("abs(t)", ("t",)).eval_jet2(-2.0)
        assert (jet.value, jet.d1, jet.d2) == (2.0, -1.0, 0.0)

    def test_sqrt_nondifferentiable_at_zero(self):
        with pytest.raises(NondifferentiableError):
            parse("sqrt(t)", ("t",)).eval_jet2(0.0)

    def test_jet_in_other_variable(self):
        jet = parse("q^3 + t").eval_jet2_in("q", 2.0, t=5.0)
        assert jet.value == pytest.approx(13.0, rel=1e-15)
        assert jet.d1 == pytest.approx(12.0, rel=1e-14)
        assert jet.d2 == pytest.approx(12.0, rel=1e-14)

    def test_random_polynomial_jets_match_finite_differences(self):
        # The second central difference carries a rounding floor of roughly
        # eps*|f|/step^2 (about 1e-6 per unit of |f| at step 1e-5), so the
        # corpus keeps |f| well below 1 to stay inside the oracle's validity.
        rng = random.Random(20240817)
        step = 1e-5
        for _ in range(40):
            degree = rng.randint(1, 5)
            coeffs = [rng.uniform(-0.03, 0.03) for _ in range(degree + 1)]
            text = " + ".join(f"{c!r}*t^{k}" for k, c in enumerate(coeffs))
            e = parse(text, ("t",))
            for t in (0.1, 0.5, 0.9):
                jet = e.eval_jet2(t)
                f = lambda x: e.evaluate(t=x)
                d1_fd = (f(t + step) - f(t - step)) / (2.0 * step)
                d2_fd = (f(t + step) - 2.0 * f(t) + f(t - step)) / step**2
                assert abs(jet.d1 - d1_fd) < 1e-6
                assert abs(jet.d2 - d2_fd) < 1e-6
