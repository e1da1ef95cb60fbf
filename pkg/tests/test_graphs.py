import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from monoheat import graphs as gr
from monoheat.errors import GraphAuditError, InvalidArgument, Unsupported


def oracle_resolvent(beta_fn, lam, x, lo, hi, iters=200):
    """Independent bisection on y + lam*beta(y) - x, used as a test oracle."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid + lam * beta_fn(mid) > x:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestResolvent:
    def test_linear_closed_form(self):
        assert gr.resolvent(gr.Linear(2.0), 0.5, 4.0) == pytest.approx(2.0, abs=1e-12)

    def test_sign_dead_zone(self):
        assert gr.resolvent(gr.Sign(), 1.0, 0.3) == 0.0

    def test_physical_beta_against_bisection_oracle(self):
        # root of y^4 + 2y - 3 = 0, which is exactly 1
        beta = gr.PhysicalBeta(1.0, 1.0)
        expected = oracle_resolvent(lambda y: y + abs(y) ** 3 * y, 1.0, 3.0, 0.0, 3.0)
        assert expected == pytest.approx(1.0, abs=1e-12)
        assert gr.resolvent(beta, 1.0, 3.0) == pytest.approx(expected, abs=1e-10)

    def test_composite_linear_plus_sign(self):
        # shifted soft threshold: y(1+lam) + lam*sign(y) = x away from the dead zone
        comp = gr.CompositeSum([gr.Linear(1.0), gr.Sign()])
        lam = 0.5
        assert gr.resolvent(comp, lam, 0.4) == pytest.approx(0.0, abs=1e-12)
        x = 2.0
        expected = (x - lam) / (1.0 + lam)
        assert gr.resolvent(comp, lam, x) == pytest.approx(expected, abs=1e-10)

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(InvalidArgument):
            gr.resolvent(gr.Linear(1.0), 0.0, 1.0)


class TestYosida:
    def test_linear(self):
        assert gr.yosida(gr.Linear(2.0), 0.5, 4.0) == pytest.approx(4.0, abs=1e-12)

    def test_sign_clamp(self):
        assert gr.yosida(gr.Sign(), 1.0, 0.3) == pytest.approx(0.3, abs=1e-14)
        assert gr.yosida(gr.Sign(), 0.1, 3.0) == pytest.approx(1.0, abs=1e-14)

    def test_physical_beta_lands_in_graph(self):
        beta = gr.PhysicalBeta(1.0, 1.0)
        a_lam = gr.yosida(beta, 1.0, 3.0)
        j_lam = gr.resolvent(beta, 1.0, 3.0)
        assert a_lam == pytest.approx(2.0, abs=1e-9)
        assert a_lam == pytest.approx(float(beta.value(j_lam)), abs=1e-9)


class TestMinimalSection:
    def test_sign_at_origin(self):
        assert gr.minimal_section(gr.Sign(), 0.0) == 0.0

    def test_single_valued(self):
        assert gr.minimal_section(gr.Linear(2.0), 3.0) == 6.0
        assert gr.minimal_section(gr.PhysicalBeta(1.0, 1.0), 1.0) == pytest.approx(2.0)

    def test_composite_interval(self):
        comp = gr.CompositeSum([gr.Linear(1.0), gr.Sign()])
        # graph(0) = [-1, 1], minimal element is 0
        assert gr.minimal_section(comp, 0.0) == 0.0


class TestPotential:
    def test_normalization_at_zero(self):
        for graph in gr.builtin_graphs():
            assert gr.potential(graph, 0.0) == 0.0

    def test_linear(self):
        assert gr.potential(gr.Linear(2.0), 3.0) == pytest.approx(9.0, abs=1e-12)

    def test_physical_beta_closed_form_vs_quadrature(self):
        beta = gr.PhysicalBeta(1.0, 1.0)
        expected, err = quad(lambda s: s + abs(s) ** 3 * s, 0.0, 1.0, epsabs=1e-13)
        assert expected == pytest.approx(0.7, abs=1e-10)
        assert gr.potential(beta, 1.0) == pytest.approx(expected, abs=1e-10)

    def test_generic_quadrature_path(self):
        # nonlinear inner graph has no closed-form potential
        beta = gr.PhysicalBeta(1.0, 1.0, inner=gr.SaturatingBiLipschitz(1.0, 1.0))
        w = lambda s: s + s / (1.0 + abs(s))
        expected, _ = quad(lambda s: w(s) + abs(w(s)) ** 3 * w(s), 0.0, 1.3,
                           epsabs=1e-13)
        assert gr.potential(beta, 1.3) == pytest.approx(expected, abs=1e-9)


class TestMoreauEnvelope:
    def test_linear_against_grid_minimization(self):
        lam, x = 0.5, 4.0
        graph = gr.Linear(2.0)
        ys = np.linspace(-1.0, 6.0, 200001)
        oracle = np.min((ys - x) ** 2 / (2 * lam) + np.asarray(graph.potential(ys)))
        assert oracle == pytest.approx(8.0, abs=1e-7)
        assert gr.moreau_envelope(graph, lam, x) == pytest.approx(8.0, abs=1e-12)

    def test_sign_huber_zone(self):
        assert gr.moreau_envelope(gr.Sign(), 1.0, 0.3) == pytest.approx(0.045, abs=1e-14)

    def test_zero_at_origin(self):
        for graph in gr.builtin_graphs():
            assert gr.moreau_envelope(graph, 0.5, 0.0) == pytest.approx(0.0, abs=1e-14)


class TestConjugate:
    def test_linear_quadratic(self):
        assert gr.conjugate_potential(gr.Linear(2.0), 4.0) == pytest.approx(4.0, abs=1e-12)

    def test_fenchel_young_equality(self):
        graph = gr.Linear(2.0)
        xi = float(graph.value(3.0))
        assert xi == 6.0
        total = gr.potential(graph, 3.0) + gr.conjugate_potential(graph, xi)
        assert total == pytest.approx(18.0, abs=1e-12)

    def test_saturating_lower_bound_vs_grid_sup(self):
        graph = gr.SaturatingBiLipschitz(1.0, 1.0)
        y = float(graph.value(2.0))
        conj = gr.conjugate_potential(graph, y)
        grid = np.linspace(-10.0, 10.0, 400001)
        sup_oracle = np.max(grid * y - np.asarray(graph.potential(grid)))
        assert conj == pytest.approx(float(sup_oracle), abs=1e-7)
        c_up = graph.constants().lipschitz_upper
        assert conj >= y**2 / (4.0 * c_up)

    def test_sign_unsupported(self):
        with pytest.raises(Unsupported):
            gr.conjugate_potential(gr.Sign(), 0.5)


class TestTruncatedYosida:
    @pytest.mark.parametrize("x,expected", [(6.0, 2.0), (-3.6, -2.0), (1.2, 1.0)])
    def test_clamp_cases(self, x, expected):
        # Linear(5) at lam=1 has yosida value 5x/6: 5, -3 and 1 at these x
        assert gr.truncated_yosida(gr.Linear(5.0), 1.0, 0.5, x) == pytest.approx(expected)

    def test_requires_positive_parameters(self):
        with pytest.raises(InvalidArgument):
            gr.truncated_yosida(gr.Linear(1.0), 1.0, 0.0, 1.0)


class TestPropertySuite:
    def test_linear_all_pass(self):
        rep = gr.graph_property_suite(gr.Linear(2.0), [1.0, 0.5], [-1.0, 0.0, 3.0])
        assert rep.passed

    def test_sign_yosida_monotone_in_lambda(self):
        vals = [abs(gr.yosida(gr.Sign(), lam, 0.3)) for lam in (1.0, 0.5, 0.25)]
        assert vals == pytest.approx([0.3, 0.6, 1.0])
        assert vals[-1] <= abs(gr.minimal_section(gr.Sign(), 0.3)) + 1e-14

    def test_nested_regularization_semigroup(self):
        beta = gr.PhysicalBeta(1.0, 1.0)
        nested = gr.yosida(gr.YosidaGraph(beta, 0.5), 0.5, 3.0)
        direct = gr.yosida(beta, 1.0, 3.0)
        assert nested == pytest.approx(direct, abs=1e-10)

    def test_all_builtins_pass(self):
        xs = np.linspace(-3.0, 3.0, 25)
        for graph in gr.builtin_graphs():
            rep = gr.graph_property_suite(graph, [1.0, 0.5, 0.25, 0.125], xs)
            assert rep.passed, rep.failures()[:3]

    def test_rejects_bad_lambda_list(self):
        with pytest.raises(InvalidArgument):
            gr.graph_property_suite(gr.Linear(1.0), [0.5, 1.0], [0.0])


class TestConstantsAudit:
    def test_builtins_pass(self):
        for graph in gr.builtin_graphs():
            gr.audit_constants(graph)

    def test_mis_declared_graph_is_rejected(self):
        class Overconfident(gr.Linear):
            def constants(self):
                return gr.GraphConstants(lipschitz_lower=self.alpha * 2.0,
                                         lipschitz_upper=self.alpha * 2.0)

        with pytest.raises(GraphAuditError):
            gr.audit_constants(Overconfident(1.0))


@settings(max_examples=80, deadline=None)
@given(x=st.floats(-20, 20), y=st.floats(-20, 20),
       lam=st.floats(1e-3, 10.0))
def test_resolvent_nonexpansive_property(x, y, lam):
    beta = gr.PhysicalBeta(1.0, 0.5)
    jx = gr.resolvent(beta, lam, x)
    jy = gr.resolvent(beta, lam, y)
    assert abs(jx - jy) <= abs(x - y) + 1e-9 * max(1.0, abs(x), abs(y))


@settings(max_examples=80, deadline=None)
@given(x=st.floats(-20, 20), lam=st.floats(1e-3, 10.0))
def test_resolvent_solves_inclusion(x, lam):
    beta = gr.SaturatingBiLipschitz(1.0, 2.0)
    j = gr.resolvent(beta, lam, x)
    assert j + lam * float(beta.value(j)) == pytest.approx(x, abs=1e-8 * max(1.0, abs(x)))


class TestCustomGraphExtension:
    def test_exponential_graph_through_generic_machinery(self):
        # graphs with first-order exponential growth are supported through
        # the generic resolvent; only closed-form constants are missing
        class ExpGraph(gr.ScalarGraph):
            label = "expm1"

            def value(self, x):
                return np.expm1(np.asarray(x, dtype=float))

            def derivative(self, x):
                return np.exp(np.asarray(x, dtype=float))

        graph = ExpGraph()
        lam, x = 0.5, 2.0
        j = gr.resolvent(graph, lam, x)
        assert j + lam * float(np.expm1(j)) == pytest.approx(x, abs=1e-11)
        from scipy.optimize import brentq
        oracle = brentq(lambda y: y + lam * np.expm1(y) - x, 0.0, x, xtol=1e-14)
        assert j == pytest.approx(oracle, abs=1e-10)
        rep = gr.graph_property_suite(graph, [1.0, 0.5], np.linspace(-2, 2, 9))
        assert rep.passed, rep.failures()[:3]
