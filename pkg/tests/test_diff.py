import numpy as np
import pytest

from dualmod import core, diff, linalg, sampling
from dualmod.core import EPS, ONE, ZERO, DualNumber, NotInvertible, ShapeMismatch
from dualmod.diff import (
    CrReport,
    DualFunc,
    EvaluationFailed,
    Expr,
    NonSmoothExpression,
    const,
    coord,
    head_coord,
    inv_expr,
    re_part,
    sharp_expr,
    tail_coord,
    ze_part,
)


def square_func():
    x = head_coord(0)
    return DualFunc((1, 0), (1, 0), (x * x,))


class TestEval:
    def test_square(self):
        f = square_func()
        got = diff.eval_func(f, core.vector([DualNumber(1.0, 2.0)], []))
        assert got.head[0] == DualNumber(1.0, 4.0)

    def test_sharp_and_inv(self):
        x = head_coord(0)
        f = DualFunc((1, 0), (1, 0), (sharp_expr(x),))
        got = diff.eval_func(f, core.vector([DualNumber(2.0, 3.0)], []))
        assert got.head[0] == DualNumber(0.0, 2.0)
        g = DualFunc((1, 0), (1, 0), (inv_expr(x),))
        got = diff.eval_func(g, core.vector([DualNumber(2.0, 3.0)], []))
        assert got.head[0] == DualNumber(0.5, -0.75)

    def test_projections(self):
        x = head_coord(0)
        p = core.vector([DualNumber(2.0, 3.0)], [])
        f = DualFunc((1, 0), (1, 0), (re_part(x),))
        assert diff.eval_func(f, p).head[0] == DualNumber(2.0, 0.0)
        g = DualFunc((1, 0), (1, 0), (ze_part(x),))
        assert diff.eval_func(g, p).head[0] == DualNumber(3.0, 0.0)

    def test_tail_coord_embeds_as_zero_divisor(self):
        f = diff.identity_func(0, 1)
        got = diff.eval_func(f, core.vector([], [3.0]))
        assert got.tail == (3.0,)
        e = tail_coord(0)
        assert diff.eval_expr(e, core.vector([], [3.0])) == DualNumber(0.0, 3.0)

    def test_tail_ze_coord_reads_real(self):
        e = coord("tail", 0, "ze")
        assert diff.eval_expr(e, core.vector([], [3.0])) == DualNumber(3.0, 0.0)

    def test_tail_component_must_be_zero_divisor(self):
        f = DualFunc((1, 0), (0, 1), (head_coord(0),))
        with pytest.raises(EvaluationFailed):
            diff.eval_func(f, core.vector([ONE], []))

    def test_inv_propagates_not_invertible(self):
        f = DualFunc((1, 0), (1, 0), (inv_expr(head_coord(0)),))
        with pytest.raises(NotInvertible):
            diff.eval_func(f, core.vector([EPS], []))

    def test_eval_shape_checks(self):
        f = square_func()
        with pytest.raises(ShapeMismatch):
            diff.eval_func(f, core.vector([], [1.0]))


class TestJacobian:
    def test_square_at_one(self):
        f = square_func()
        jac = diff.numeric_jacobian(f, core.vector([ONE], []))
        assert np.allclose(jac, [[2.0, 0.0], [0.0, 2.0]], atol=1e-9)

    def test_linear_map_exact_blocks(self):
        rng = np.random.default_rng(3)
        lam = sampling.random_module_map(rng, (2, 2), (2, 1))
        f = diff.func_from_module_map(lam)
        a = sampling.random_vector(rng, 2, 2)
        jac = diff.numeric_jacobian(f, a)
        assert np.allclose(jac, linalg.realify_map(lam), atol=1e-9)

    def test_probe_failure(self):
        # perturbing the ze coordinate leaves re at exactly zero
        f = DualFunc((1, 0), (1, 0), (inv_expr(head_coord(0)),))
        with pytest.raises(EvaluationFailed):
            diff.numeric_jacobian(f, core.vector([DualNumber(0.0, 1.0)], []))


class TestCrCheck:
    def test_square_passes_and_assembles_doubling(self):
        f = square_func()
        a = core.vector([DualNumber(1.0, 1.0)], [])
        report = diff.cr_check(f, a)
        assert report.passed
        d = report.derivative
        assert d is not None
        assert d.c_re[0, 0] == pytest.approx(2.0, abs=1e-6)
        assert d.c_ze[0, 0] == pytest.approx(2.0, abs=1e-6)

    def test_re_part_fails_with_unit_residual(self):
        f = DualFunc((1, 0), (1, 0), (re_part(head_coord(0)),))
        report = diff.cr_check(f, core.vector([DualNumber(0.3, -0.7)], []))
        assert not report.passed
        assert report.derivative is None
        assert report.residuals["ze_match"] == pytest.approx(1.0, abs=1e-6)

    def test_ze_part_fails(self):
        f = DualFunc((1, 0), (1, 0), (ze_part(head_coord(0)),))
        report = diff.cr_check(f, core.vector([DualNumber(0.3, 0.7)], []))
        assert not report.passed
        assert report.residuals["head_re_dze"] == pytest.approx(1.0, abs=1e-6)

    def test_head_depending_on_tail_fails(self):
        f = DualFunc((0, 1), (1, 0), (coord("tail", 0, "ze"),))
        report = diff.cr_check(f, core.vector([], [0.5]))
        assert not report.passed
        assert report.residuals["head_re_dtail"] == pytest.approx(1.0, abs=1e-6)

    def test_tail_depending_on_ze_fails(self):
        # tail output reading a head ze part violates the last condition
        f = DualFunc(
            (1, 0), (0, 1), (sharp_expr(coord("head", 0, "ze")),)
        )
        report = diff.cr_check(f, core.vector([DualNumber(0.4, 0.2)], []))
        assert not report.passed
        assert report.residuals["tail_dze"] == pytest.approx(1.0, abs=1e-6)

    def test_linear_maps_pass_everywhere(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            lam = sampling.random_module_map(rng, (2, 1), (1, 2))
            f = diff.func_from_module_map(lam)
            a = sampling.random_vector(rng, 2, 1)
            report = diff.cr_check(f, a)
            assert report.passed
            assert np.allclose(
                linalg.realify_map(report.derivative),
                linalg.realify_map(lam),
                atol=1e-6,
            )


class TestForwardDerivative:
    def test_inv_derivative(self):
        f = DualFunc((1, 0), (1, 0), (inv_expr(head_coord(0)),))
        d = diff.forward_derivative(f, core.vector([DualNumber(2.0, 0.0)], []))
        assert d.head_entry(0, 0) == DualNumber(-0.25, 0.0)

    def test_square_derivative_is_doubling(self):
        rng = np.random.default_rng(7)
        f = square_func()
        for _ in range(20):
            a = sampling.random_dual(rng)
            d = diff.forward_derivative(f, core.vector([a], []))
            expected = core.mul(DualNumber(2.0, 0.0), a)
            assert d.head_entry(0, 0).re == pytest.approx(expected.re, abs=1e-12)
            assert d.head_entry(0, 0).ze == pytest.approx(expected.ze, abs=1e-12)

    def test_linear_map_recovered_exactly(self):
        rng = np.random.default_rng(9)
        lam = sampling.random_module_map(rng, (2, 2), (2, 2))
        f = diff.func_from_module_map(lam)
        a = sampling.random_vector(rng, 2, 2)
        d = diff.forward_derivative(f, a)
        assert np.allclose(
            linalg.realify_map(d), linalg.realify_map(lam), atol=1e-12
        )

    def test_rejects_projections(self):
        f = DualFunc((1, 0), (1, 0), (re_part(head_coord(0)),))
        with pytest.raises(NonSmoothExpression):
            diff.forward_derivative(f, core.vector([ONE], []))
        g = DualFunc((0, 1), (1, 0), (coord("tail", 0, "ze"),))
        with pytest.raises(NonSmoothExpression):
            diff.forward_derivative(g, core.vector([], [1.0]))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            f, a = sampling.tame_case(rng, (2, 1), (1, 1), depth=5)
            ad = linalg.realify_map(diff.forward_derivative(f, a))
            fd = diff.numeric_jacobian(f, a)
            assert np.abs(ad - fd).max() <= 1e-5

    def test_matches_cr_assembled_map(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            f, a = sampling.tame_case(rng, (1, 1), (1, 1), depth=4)
            report = diff.cr_check(f, a)
            assert report.passed
            assert np.allclose(
                linalg.realify_map(report.derivative),
                linalg.realify_map(diff.forward_derivative(f, a)),
                atol=1e-5,
            )

    def test_chain_rule(self):
        rng = np.random.default_rng(17)
        done = 0
        while done < 10:
            f = sampling.random_func(rng, (2, 1), (2, 1), depth=3)
            g = sampling.random_func(rng, (2, 1), (1, 1), depth=3)
            comp = diff.compose_funcs(g, f)
            try:
                a = next(
                    a
                    for _ in range(8)
                    for a in [sampling.random_vector(rng, 2, 1)]
                    if _tame(comp, a)
                )
            except StopIteration:
                continue
            done += 1
            fa = diff.eval_func(f, a)
            lhs = diff.forward_derivative(comp, a)
            rhs = linalg.compose(
                diff.forward_derivative(g, fa), diff.forward_derivative(f, a)
            )
            assert np.abs(
                linalg.realify_map(lhs) - linalg.realify_map(rhs)
            ).max() <= 1e-9


def _tame(f, a, margin=0.5, cap=10.0):
    stats = {}
    try:
        diff.eval_func(f, a, stats=stats)
    except (NotInvertible, EvaluationFailed):
        return False
    return (
        stats.get("min_inv_re", np.inf) >= margin
        and stats.get("max_abs", 0.0) <= cap
    )


class TestLimitCheck:
    def test_square_confirmed(self):
        f = square_func()
        a = core.vector([DualNumber(1.0, 1.0)], [])
        d = diff.forward_derivative(f, a)
        assert diff.limit_check(f, a, d)

    def test_re_part_never_linearizes(self):
        f = DualFunc((1, 0), (1, 0), (re_part(head_coord(0)),))
        a = core.vector([DualNumber(1.0, 0.5)], [])
        # the best dual-linear candidate still leaves a constant quotient
        cand = linalg.ModuleMap.scalar(1, 0, DualNumber(0.5, 0.0))
        assert not diff.limit_check(f, a, cand)

    def test_random_passes_confirmed(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            f, a = sampling.tame_case(rng, (1, 1), (1, 1), depth=4)
            report = diff.cr_check(f, a)
            assert report.passed
            assert diff.limit_check(f, a, report.derivative, radius=0.01)


class TestComposeAndJson:
    def test_compose_substitutes_tail(self):
        # outer reads its tail slot; inner produces that slot from a head
        inner = DualFunc(
            (1, 0), (0, 1), (sharp_expr(head_coord(0)),)
        )
        outer = DualFunc((0, 1), (1, 0), (tail_coord(0),))
        comp = diff.compose_funcs(outer, inner)
        got = diff.eval_func(comp, core.vector([DualNumber(2.0, 5.0)], []))
        assert got.head[0] == DualNumber(0.0, 2.0)

    def test_compose_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            diff.compose_funcs(square_func(), diff.identity_func(0, 1))

    def test_expr_json_roundtrip(self):
        x = head_coord(0)
        e = inv_expr(const(DualNumber(1.0, -2.0)) + x * x) - sharp_expr(x)
        back = Expr.from_json(e.to_json())
        assert back == e

    def test_func_json_roundtrip(self):
        f = DualFunc(
            (1, 1), (1, 1), (head_coord(0), sharp_expr(tail_coord(0)))
        )
        assert DualFunc.from_json(f.to_json()) == f

    def test_bad_json(self):
        with pytest.raises(ValueError):
            Expr.from_json({"op": "frobnicate"})
        with pytest.raises(ValueError):
            DualFunc.from_json({"domain": [1, 0]})

    def test_identity_func_evaluates_to_input(self):
        rng = np.random.default_rng(23)
        f = diff.identity_func(2, 2)
        v = sampling.random_vector(rng, 2, 2)
        assert diff.eval_func(f, v) == v
