import math

import numpy as np
import pytest

from cnfopt.expr import (
    DialectError,
    DomainError,
    Expr,
    ParseError,
    Point,
    abs_,
    const,
    evaluate,
    gradient,
    is_smooth,
    max_,
    norm0_,
    parse,
    pretty,
    sum_,
    value_and_gradient,
    x_,
    y_,
)


def fd_gradient(e, p, h=1e-6):
    """Central finite differences over the flat (x, y) vector."""
    base = p.flat()
    out = np.zeros(base.shape[0])
    for i in range(base.shape[0]):
        up = base.copy()
        dn = base.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (
            evaluate(e, Point.from_flat(up, p.n, p.m))
            - evaluate(e, Point.from_flat(dn, p.n, p.m))
        ) / (2 * h)
    return out


class TestEvaluate:
    def test_lifted_objective_at_origin(self):
        e = (
            2 * x_(1) ** 2
            - 1.05 * y_(1)
            + const(1 / 6) * y_(2)
            + 0.5 * (x_(1) - x_(2)) ** 2
            - 0.5 * y_(3)
            + x_(2) ** 2
        )
        p = Point([0, 0], [0, 0, 0])
        assert evaluate(e, p) == 0.0

    def test_reference_dialect_value(self):
        # |1*1|^(1/3) + 1 + 1 = 3 by hand
        e = abs_(x_(1) * x_(2)) ** (1 / 3) + x_(1) ** 2 + x_(2) ** 2
        assert evaluate(e, Point([1, 1], [])) == pytest.approx(3.0, abs=1e-12)

    def test_norm0_counts_nonzeros(self):
        assert evaluate(norm0_("x"), Point([0, 0, 2], [])) == 1.0

    def test_norm0_threshold(self):
        assert evaluate(norm0_("x"), Point([1e-7, 2e-6, 0.5], [])) == 2.0

    def test_max_and_sum(self):
        e = max_([x_(1), x_(2), const(0.5)]) + sum_([y_(i) for i in range(1, 4)])
        assert evaluate(e, Point([0.2, -3], [1, 2, 3])) == pytest.approx(6.5)

    def test_deterministic_and_pure(self):
        e = x_(1) * y_(1) / (y_(2) + 2)
        p = Point([3], [4, 5])
        first = evaluate(e, p)
        assert evaluate(e, p) == first
        assert p.x[0] == 3 and p.y[1] == 5

    def test_division_by_zero(self):
        with pytest.raises(DomainError):
            evaluate(x_(1) / y_(1), Point([1], [0]))

    def test_sqrt_of_negative(self):
        from cnfopt.expr import sqrt_

        with pytest.raises(DomainError):
            evaluate(sqrt_(x_(1)), Point([-1], []))

    def test_fractional_pow_of_negative(self):
        with pytest.raises(DomainError):
            evaluate(x_(1) ** 0.5, Point([-2], []))

    def test_integer_pow_of_negative_is_fine(self):
        assert evaluate(x_(1) ** 3, Point([-2], [])) == -8.0

    def test_domain_error_carries_location(self):
        e = parse("x[1]/y[1]", n=1, m=1)
        with pytest.raises(DomainError, match="line 1"):
            evaluate(e, Point([1], [0]))


class TestGradient:
    def test_square(self):
        g = gradient(x_(1) ** 2, Point([3], []))
        assert g == pytest.approx([6.0])

    def test_quartic_minus_lifted(self):
        # d/dx1 (x1^4) = 32 at 2, d/dy1 (-y1) = -1; cross-checked against
        # central differences below
        e = x_(1) ** 4 - y_(1)
        p = Point([2], [0])
        g = gradient(e, p)
        assert g == pytest.approx([32.0, -1.0])
        assert g == pytest.approx(fd_gradient(e, p), rel=1e-6, abs=1e-8)

    def test_coupled_quadratic(self):
        e = 0.5 * (x_(1) + x_(2)) ** 2 - y_(1) - 0.5 * y_(2)
        p = Point([1, 1], [0, 0])
        g = gradient(e, p)
        assert g == pytest.approx([2.0, 2.0, -1.0, -0.5])
        assert g == pytest.approx(fd_gradient(e, p), rel=1e-6, abs=1e-8)

    def test_ordering_x_then_y(self):
        e = 3 * y_(2) + 5 * x_(1)
        g = gradient(e, Point([0, 0], [0, 0]))
        assert g == pytest.approx([5.0, 0.0, 0.0, 3.0])

    def test_wrt_subset(self):
        e = x_(1) * y_(1) + x_(2) ** 2
        p = Point([2, 3], [4])
        g = gradient(e, p, wrt=[1, 2])  # x[2] and y[1]
        assert g == pytest.approx([6.0, 2.0])

    def test_nonsmooth_rejected(self):
        with pytest.raises(DialectError):
            gradient(abs_(x_(1)), Point([1], []))
        with pytest.raises(DialectError):
            gradient(max_([x_(1), x_(2)]), Point([1, 2], []))
        with pytest.raises(DialectError):
            gradient(x_(1) ** 1.5, Point([1], []))

    def test_matches_finite_differences_random(self):
        rng = np.random.default_rng(7)
        exprs = [
            x_(1) ** 2 + y_(1) ** 2 - x_(1) * y_(2),
            (x_(1) + 2 * x_(2)) ** 3 - 0.5 * y_(1),
            x_(1) ** 4 - y_(1) * y_(2) + sum_([x_(1), x_(2), y_(2)]),
            x_(1) / (2 + y_(1) ** 2),
            (x_(2) - y_(2)) ** 2 * (1 + x_(1) ** 2),
        ]
        for e in exprs:
            for _ in range(20):
                p = Point(rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2))
                ad = gradient(e, p)
                fd = fd_gradient(e, p)
                np.testing.assert_allclose(ad, fd, rtol=1e-6, atol=1e-8)

    def test_sqrt_gradient(self):
        from cnfopt.expr import sqrt_

        e = sqrt_(1 + x_(1) ** 2)
        p = Point([2], [])
        assert gradient(e, p) == pytest.approx(fd_gradient(e, p), rel=1e-6)

    def test_value_and_gradient_agree_with_evaluate(self):
        e = (x_(1) - 1) ** 2 + 10 * (y_(1) - x_(1) ** 2) ** 2
        p = Point([0.3], [0.7])
        v, g = value_and_gradient(e, p)
        assert v == pytest.approx(evaluate(e, p))
        assert g == pytest.approx(fd_gradient(e, p), rel=1e-6, abs=1e-8)


class TestParse:
    def test_spec_tree_shape(self):
        got = parse("2*x[1]^2 - 1.05*y[1]", n=1, m=1)
        want = Expr(
            "add",
            children=(
                Expr("mul", children=(const(2), Expr("pow", value=2.0, children=(x_(1),)))),
                Expr("neg", children=(Expr("mul", children=(const(1.05), y_(1))),)),
            ),
        )
        assert got == want

    def test_reference_dialect_parse(self):
        e = parse("abs(x[1]*x[2])^(1/3)", n=2, m=0)
        assert not is_smooth(e)
        assert evaluate(e, Point([2, 4], [])) == pytest.approx(2.0)

    def test_index_out_of_declared_range(self):
        with pytest.raises(ParseError, match="out of range"):
            parse("x[3]", n=2, m=0)

    def test_unknown_identifier(self):
        with pytest.raises(ParseError, match="unknown identifier"):
            parse("foo + 1")

    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError) as err:
            parse("x[1] + * 2", n=1, m=0)
        assert err.value.line == 1
        assert err.value.col == 8

    def test_unary_minus_and_power(self):
        e = parse("-x[1]^2", n=1, m=0)
        assert evaluate(e, Point([3], [])) == -9.0

    def test_power_right_associative(self):
        e = parse("x[1]^2^3", n=1, m=0)
        assert evaluate(e, Point([2], [])) == 2**8

    def test_scientific_notation(self):
        e = parse("1.5e-3*x[1] + 2E2", n=1, m=0)
        assert evaluate(e, Point([2], [])) == pytest.approx(0.003 + 200)

    def test_norm0_takes_block(self):
        e = parse("norm0(y)", n=0, m=3)
        assert evaluate(e, Point([], [0, 1, 0])) == 1.0
        with pytest.raises(ParseError):
            parse("norm0(x[1])", n=1, m=0)

    def test_exponent_must_be_constant(self):
        with pytest.raises(ParseError, match="constant"):
            parse("x[1]^y[1]", n=1, m=1)

    def test_whitespace_insensitive(self):
        a = parse("2*x[1]  +\n  y[1]", n=1, m=1)
        b = parse("2*x[1]+y[1]", n=1, m=1)
        assert a == b


def ref_eval(e, p):
    """Independent straightforward interpreter used as the oracle for the
    compiled evaluation path."""
    k = e.kind
    ev = lambda c: ref_eval(c, p)
    if k == "const":
        return e.value
    if k == "var":
        return float(p.x[e.index] if e.block == "x" else p.y[e.index])
    if k == "add":
        return ev(e.children[0]) + ev(e.children[1])
    if k == "sub":
        return ev(e.children[0]) - ev(e.children[1])
    if k == "mul":
        return ev(e.children[0]) * ev(e.children[1])
    if k == "div":
        return ev(e.children[0]) / ev(e.children[1])
    if k == "neg":
        return -ev(e.children[0])
    if k == "pow":
        return ev(e.children[0]) ** e.value
    if k == "sqrt":
        return ev(e.children[0]) ** 0.5
    if k == "abs":
        return abs(ev(e.children[0]))
    if k == "sum":
        return sum(ev(c) for c in e.children)
    if k == "max":
        return max(ev(c) for c in e.children)
    if k == "norm0":
        block = p.x if e.block == "x" else p.y
        return float(sum(1 for t in block if abs(t) > 1e-6))
    raise AssertionError(k)


def ref_grad(e, p):
    """Independent forward-mode interpreter over dense vectors."""
    width = p.n + p.m

    def walk(c):
        k = c.kind
        if k == "const":
            return c.value, np.zeros(width)
        if k == "var":
            g = np.zeros(width)
            g[c.index if c.block == "x" else p.n + c.index] = 1.0
            return (float(p.x[c.index] if c.block == "x" else p.y[c.index]), g)
        parts = [walk(ch) for ch in c.children]
        if k == "add":
            return parts[0][0] + parts[1][0], parts[0][1] + parts[1][1]
        if k == "sub":
            return parts[0][0] - parts[1][0], parts[0][1] - parts[1][1]
        if k == "neg":
            return -parts[0][0], -parts[0][1]
        if k == "mul":
            (va, ga), (vb, gb) = parts
            return va * vb, ga * vb + gb * va
        if k == "div":
            (va, ga), (vb, gb) = parts
            return va / vb, (ga * vb - gb * va) / vb**2
        if k == "pow":
            v, g = parts[0]
            kk = int(c.value)
            return v**kk, kk * v ** (kk - 1) * g if kk != 0 else np.zeros(width)
        if k == "sqrt":
            v, g = parts[0]
            s = v**0.5
            return s, g / (2 * s)
        if k == "sum":
            return (sum(pv for pv, _ in parts),
                    np.sum([pg for _, pg in parts], axis=0))
        raise AssertionError(k)

    return walk(e)


def random_smooth_tree(rng, depth, n, m):
    if depth == 0 or rng.random() < 0.25:
        roll = rng.random()
        if roll < 0.3:
            return const(rng.uniform(-3, 3))
        if roll < 0.65 and n:
            return x_(int(rng.integers(1, n + 1)))
        return y_(int(rng.integers(1, m + 1)))
    child = lambda: random_smooth_tree(rng, depth - 1, n, m)
    op = rng.integers(0, 7)
    if op == 0:
        return child() + child()
    if op == 1:
        return child() - child()
    if op == 2:
        return child() * child()
    if op == 3:
        return -child()
    if op == 4:
        return child() ** int(rng.integers(2, 4))
    if op == 5:
        return sum_([child() for _ in range(int(rng.integers(2, 5)))])
    return child() / (const(2.0) + child() ** 2)  # denominator bounded away from 0


class TestCompiledAgainstReference:
    def test_values_match_interpreter(self):
        rng = np.random.default_rng(31)
        for _ in range(120):
            e = random_smooth_tree(rng, int(rng.integers(1, 5)), 2, 2)
            p = Point(rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2))
            assert evaluate(e, p) == pytest.approx(ref_eval(e, p), rel=1e-12, abs=1e-12)

    def test_gradients_match_interpreter(self):
        rng = np.random.default_rng(32)
        for _ in range(120):
            e = random_smooth_tree(rng, int(rng.integers(1, 5)), 2, 2)
            p = Point(rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2))
            want_v, want_g = ref_grad(e, p)
            got_v, got_g = value_and_gradient(e, p)
            assert got_v == pytest.approx(want_v, rel=1e-12, abs=1e-12)
            np.testing.assert_allclose(got_g, want_g, rtol=1e-10, atol=1e-12)

    def test_reference_dialect_values_match(self):
        rng = np.random.default_rng(33)
        e = parse("abs(x[1]*x[2])^(1/3) + max(x[1], x[2], 0.1) + norm0(x)", n=2, m=0)
        for _ in range(50):
            p = Point(rng.uniform(-2, 2, 2), [])
            assert evaluate(e, p) == pytest.approx(ref_eval(e, p), rel=1e-12)

    def test_wrt_restriction_matches_dense_slice(self):
        rng = np.random.default_rng(34)
        for _ in range(40):
            e = random_smooth_tree(rng, 3, 3, 2)
            p = Point(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 2))
            dense = ref_grad(e, p)[1]
            wrt = [0, 2, 4]  # x1, x3, y2
            got = gradient(e, p, wrt=wrt)
            np.testing.assert_allclose(got, dense[wrt], rtol=1e-10, atol=1e-12)

    def test_deep_chain_compiles(self):
        e = x_(1)
        for _ in range(200):
            e = e + x_(1) * 0.01
        p = Point([0.5], [])
        assert evaluate(e, p) == pytest.approx(ref_eval(e, p), rel=1e-12)
        assert gradient(e, p)[0] == pytest.approx(1 + 200 * 0.01, rel=1e-12)


class TestConcurrentReads:
    def test_shared_tree_evaluates_safely_across_threads(self):
        import threading

        text = "2*x[1]^2 - 1.05*y[1] + 0.5*(x[1] - x[2])^2 + x[2]^2"
        p = Point([1.2, -0.7], [0.4])
        reference = parse(text, n=2, m=1)
        want = evaluate(reference, p)
        want_g = gradient(reference, p)
        # a separate identical tree whose first-time compilation happens
        # concurrently in the workers
        e = parse(text, n=2, m=1)
        failures = []

        def worker():
            try:
                for _ in range(200):
                    assert evaluate(e, p) == want
                    assert np.array_equal(gradient(e, p), want_g)
            except Exception as err:  # surfaced in the main thread
                failures.append(err)

        threads = [threading.Thread(target=worker) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not failures


class TestPretty:
    CASES = [
        "2*x[1]^2 - 1.05*y[1]",
        "abs(x[1]*x[2])^(1/3) + x[1]^2 + x[2]^2",
        "-(x[1] + y[2])*3",
        "x[1]/(y[1]/y[2])",
        "max(x[1], x[2], 0.5) + norm0(x)",
        "(x[1] - x[2])^2 - (x[1] - 3)",
        "sqrt(1 + x[1]^2)",
        "x[1]^(-2) + 2^x_const",
    ]

    @pytest.mark.parametrize(
        "text",
        [c for c in CASES if "x_const" not in c],
    )
    def test_round_trip_idempotent(self, text):
        first = parse(text, n=2, m=2)
        second = parse(pretty(first), n=2, m=2)
        assert second == parse(pretty(second), n=2, m=2)

    def test_round_trip_preserves_value(self):
        rng = np.random.default_rng(3)
        for text in [c for c in self.CASES if "x_const" not in c]:
            e = parse(text, n=2, m=2)
            e2 = parse(pretty(e), n=2, m=2)
            for _ in range(5):
                p = Point(rng.uniform(0.1, 2, 2), rng.uniform(0.1, 2, 2))
                assert evaluate(e2, p) == pytest.approx(evaluate(e, p), rel=1e-12)

    def test_builder_trees_round_trip(self):
        e = 2 * x_(1) ** 2 - 1.05 * y_(1) + sum_([y_(2), -y_(3)]) * 0.5
        r = parse(pretty(e), n=1, m=3)
        p = Point([1.3], [0.2, -0.7, 2.0])
        assert evaluate(r, p) == pytest.approx(evaluate(e, p), rel=1e-12)
        assert parse(pretty(r), n=1, m=3) == r
