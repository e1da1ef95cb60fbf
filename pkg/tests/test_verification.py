import math

import numpy as np
import pytest

from monoheat import fem, graphs as gr
from monoheat import verification as ver
from monoheat.errors import (
    BoundViolation,
    HypothesisViolation,
    InsufficientLevels,
)
from monoheat.stepper import ProblemSpec, SolverConfig, solve_transient
from conftest import random_problem


def uniform_ode_setup():
    mesh = fem.build_mesh_1d(1.0, 4, "none")
    spec = ProblemSpec(mesh=mesh, c0=1.0, gamma=gr.Linear(2.0),
                       beta=gr.Linear(1.0), g=1.0, h=None, u0=0.0, T=0.5)
    cfg = SolverConfig(tau=0.1, lambda_schedule=(0.0,))
    return spec, cfg, fem.assemble(mesh)


class TestEnergyMonitors:
    def test_steady_state_has_no_dissipation(self):
        mesh = fem.build_mesh_1d(1.0, 8, "right")
        beta = gr.PhysicalBeta(1.0, 1.0)
        spec = ProblemSpec(mesh=mesh, c0=1.0, gamma=gr.Linear(2.0), beta=beta,
                           g=None, h=float(beta.value(1.0)), u0=1.0, T=0.5)
        state = solve_transient(spec, SolverConfig(tau=0.1, lambda_schedule=(0.0,)))
        rep = ver.energy_monitors(state, spec, fem.assemble(mesh))
        assert np.all(rep.grad_sq_cum == 0.0)

    def test_zero_data_all_zero(self):
        mesh = fem.build_mesh_1d(1.0, 8, "right")
        spec = ProblemSpec(mesh=mesh, c0=1.0, gamma=gr.Linear(1.0),
                           beta=gr.Linear(1.0), g=None, h=None, u0=0.0, T=0.5)
        state = solve_transient(spec, SolverConfig(tau=0.1, lambda_schedule=(0.0,)))
        rep = ver.energy_monitors(state, spec, fem.assemble(mesh))
        for series in (rep.l2_u, rep.grad_sq_cum, rep.phi_star, rep.bhat_l1,
                       rep.boundary_work, rep.dual_rate):
            assert np.all(series == 0.0)

    def test_uniform_ode_conjugate_closed_form(self):
        # exact discrete solution u_k = t_k/2 gives phi_star = t^2/4 on |Omega|=1
        spec, cfg, ops = uniform_ode_setup()
        state = solve_transient(spec, cfg, ops=ops)
        rep = ver.energy_monitors(state, spec, ops)
        assert np.abs(rep.phi_star - state.times**2 / 4.0).max() < 1e-10

    def test_conjugate_matches_quadratic_formula_with_capacity(self, rng):
        # for a linear volume graph: phi_star = sum m v^2 / (2*alpha*c0)
        mesh = fem.build_mesh_1d(1.0, 8, "right")
        alpha, c0 = 1.7, 2.0
        spec = ProblemSpec(mesh=mesh, c0=c0, gamma=gr.Linear(alpha),
                           beta=gr.Linear(1.0), g=rng.normal(size=9),
                           h=None, u0=rng.normal(size=9), T=0.2)
        ops = fem.assemble(mesh)
        state = solve_transient(spec, SolverConfig(tau=0.05, lambda_schedule=(0.0,)), ops=ops)
        rep = ver.energy_monitors(state, spec, ops)
        for k in range(state.n_steps + 1):
            closed = float(np.sum(ops.mass * state.v[k] ** 2)) / (2 * alpha * c0)
            assert rep.phi_star[k] == pytest.approx(closed, abs=1e-10)


class TestAprioriBounds:
    def test_zero_data_trivial(self):
        mesh = fem.build_mesh_1d(1.0, 8, "right")
        spec = ProblemSpec(mesh=mesh, c0=1.0, gamma=gr.Linear(1.0),
                           beta=gr.Linear(1.0), g=None, h=None, u0=0.0, T=0.5)
        state = solve_transient(spec, SolverConfig(tau=0.1, lambda_schedule=(0.0,)))
        rep = ver.verify_solution(state, spec, fem.assemble(mesh))
        assert rep.all_bounds_pass

    def test_steady_preset_constants_by_hand(self):
        # gamma = 2r (c_low = c_up = 2): the conjugate floor constant is 1/2
        mesh = fem.build_mesh_1d(1.0, 8, "right")
        beta = gr.PhysicalBeta(1.0, 1.0)
        spec = ProblemSpec(mesh=mesh, c0=1.0, gamma=gr.Linear(2.0), beta=beta,
                           g=None, h=float(beta.value(1.0)), u0=1.0, T=0.5)
        ops = fem.assemble(mesh)
        state = solve_transient(spec, SolverConfig(tau=0.05, lambda_schedule=(0.0,)), ops=ops)
        rep = ver.verify_solution(state, spec, ops)
        assert rep.constants["C1"] == pytest.approx(0.5)
        m1 = rep.constants["M1"]
        assert m1 == pytest.approx(2.0)  # |v0| * |u0| = 2 * 1 on unit measure
        c_tr = rep.constants["C_tr"]
        h_sq = spec.T / 0.05 * 0.05 * float(beta.value(1.0)) ** 2  # sum tau h^2 on one node
        c2 = m1 + 0.0 + c_tr**2 * h_sq
        assert rep.constants["C2"] == pytest.approx(c2, rel=1e-12)
        n = 10
        growth = (1.0 - 0.05 / (2 * 0.5)) ** (-n)
        assert rep.constants["A1"] == pytest.approx(math.sqrt(c2 / 0.5 * growth), rel=1e-12)
        # monitored value: sup |u| = 1
        a1_check = [c for c in rep.bound_checks if c.name == "A1_sup_l2_u"][0]
        assert a1_check.monitored == pytest.approx(1.0)
        assert a1_check.passed

    def test_randomized_suite_no_violations(self, rng):
        for _ in range(10):
            spec = random_problem(rng, n_elems=16, T=0.5)
            cfg = SolverConfig(tau=0.025, lambda_schedule=(0.125,), newton_tol=1e-13)
            state = solve_transient(spec, cfg)
            rep = ver.verify_solution(state, spec, fem.assemble(spec.mesh))
            assert rep.all_bounds_pass

    def test_violation_raises_with_time_index(self):
        spec, cfg, ops = uniform_ode_setup()
        state = solve_transient(spec, cfg, ops=ops)
        rep = ver.energy_monitors(state, spec, ops)
        norms = ver.data_norms(spec, ops, state)
        # corrupt a monitor to force a violation
        rep.l2_u[-1] = 1e9
        with pytest.raises(BoundViolation):
            ver.apriori_bounds(rep, spec.gamma.scaled(spec.c0).constants(),
                               spec.beta.constants(), norms, 1.0)

    def test_dissipation_without_forcing(self, rng):
        spec = random_problem(rng, n_elems=12, T=0.5)
        spec = ProblemSpec(mesh=spec.mesh, c0=spec.c0, gamma=spec.gamma,
                           beta=spec.beta, g=None, h=None, u0=spec.u0, T=spec.T)
        state = solve_transient(spec, SolverConfig(tau=0.05, lambda_schedule=(0.0,),
                                                   newton_tol=1e-14))
        rep = ver.energy_monitors(state, spec, fem.assemble(spec.mesh))
        diffs = np.diff(rep.phi_star)
        assert np.all(diffs <= 1e-11 * max(1.0, rep.phi_star[0]))

    def test_constants_do_not_depend_on_solver_path(self, rng):
        spec = random_problem(rng, n_elems=8, T=0.2)
        ops = fem.assemble(spec.mesh)
        reports = []
        for kind in ("picard", "newton"):
            cfg = SolverConfig(tau=0.05, lambda_schedule=(0.25,), solver_kind=kind,
                               picard_tol=1e-12, newton_tol=1e-12, max_iters=500)
            state = solve_transient(spec, cfg, ops=ops)
            reports.append(ver.verify_solution(state, spec, ops))
        for key, val in reports[0].constants.items():
            assert reports[1].constants[key] == pytest.approx(val, rel=1e-12)


class TestManufacturedSource:
    def test_constant_field_reproduces_steady_data(self):
        mesh = fem.build_mesh_1d(1.0, 8, "right")
        beta = gr.PhysicalBeta(1.0, 1.0)
        template = ver.ProblemTemplate(mesh=mesh, c0=1.0, gamma=gr.Linear(2.0),
                                       beta=beta, T=0.5)
        exact = ver.ManufacturedSolution("1.3 + 0*x + 0*t", dim=1)
        spec = ver.manufactured_source(exact, template)
        assert np.abs(spec.g_at(0.2)).max() == 0.0
        assert spec.h_at(0.2)[-1] == pytest.approx(float(beta.value(1.3)))

    def test_time_ramp_field(self):
        mesh = fem.build_mesh_1d(1.0, 8, "right")
        template = ver.ProblemTemplate(mesh=mesh, c0=1.5, gamma=gr.Linear(2.0),
                                       beta=gr.Linear(0.7), T=0.5)
        spec = ver.manufactured_source(ver.ManufacturedSolution("t + 0*x", dim=1),
                                       template)
        # spatial terms vanish: g = c0*alpha, h = beta(t)
        assert np.allclose(spec.g_at(0.3), 1.5 * 2.0)
        assert spec.h_at(0.3)[-1] == pytest.approx(0.7 * 0.3)

    def test_decaying_cosine_source_formula(self):
        # hand-derived: for unit graph and capacity, g = (pi^2 - 1) e^{-t} cos(pi x)
        mesh = fem.build_mesh_1d(1.0, 16, "right")
        template = ver.ProblemTemplate(mesh=mesh, c0=1.0, gamma=gr.Linear(1.0),
                                       beta=gr.Linear(1.0), T=0.5)
        exact = ver.ManufacturedSolution("exp(-t)*cos(pi*x)", dim=1)
        spec = ver.manufactured_source(exact, template)
        t = 0.37
        expected = (math.pi**2 - 1.0) * math.exp(-t) * np.cos(math.pi * mesh.nodes)
        assert np.abs(spec.g_at(t) - expected).max() < 1e-12

    def test_discrete_residual_is_consistent(self):
        # plugging the exact field into the scheme leaves only truncation error,
        # which shrinks under refinement
        exact = ver.ManufacturedSolution("exp(-t)*cos(pi*x/2)", dim=1)

        def residual_norm(n, steps):
            mesh = fem.build_mesh_1d(1.0, n, "right")
            template = ver.ProblemTemplate(mesh=mesh, c0=1.0, gamma=gr.Linear(1.0),
                                           beta=gr.Linear(1.0), T=0.25)
            spec = ver.manufactured_source(exact, template)
            ops = fem.assemble(mesh)
            tau = template.T / steps
            t0, t1 = 0.0, tau
            u_now = exact.sample(mesh, t1)
            v_prev = spec.v_of(exact.sample(mesh, t0))
            res = (ops.mass * spec.v_of(u_now) / tau
                   + ops.stiffness @ u_now
                   + ops.boundary_mass * np.asarray(spec.beta.value(u_now))
                   - ops.mass * v_prev / tau
                   - ops.mass * spec.g_at(t1)
                   - ops.boundary_mass * spec.h_at(t1))
            return float(np.linalg.norm(res))

        coarse = residual_norm(16, 8)
        fine = residual_norm(32, 16)
        assert fine < coarse

    def test_two_dimensional_boundary_data(self):
        mesh = fem.build_mesh_rect(1.0, 1.0, 4, 4, True)
        template = ver.ProblemTemplate(mesh=mesh, c0=1.0, gamma=gr.Linear(1.0),
                                       beta=gr.Linear(2.0), T=0.5)
        exact = ver.ManufacturedSolution("exp(-t)*cos(pi*x/2)*cos(pi*y)", dim=2)
        spec = ver.manufactured_source(exact, template)
        h = spec.h_at(0.0)
        for i in mesh.gamma1_nodes:
            x, y = mesh.nodes[i]
            u_star = math.cos(math.pi * x / 2) * math.cos(math.pi * y)
            flux = -math.pi / 2 * math.sin(math.pi * x / 2) * math.cos(math.pi * y)
            normal = -1.0 if x < 0.5 else 1.0
            assert h[i] == pytest.approx(2.0 * u_star + normal * flux, abs=1e-12)


class TestConvergenceOrder:
    @staticmethod
    def make_template(n):
        return ver.ProblemTemplate(mesh=fem.build_mesh_1d(1.0, n, "right"), c0=1.0,
                                   gamma=gr.Linear(2.0), beta=gr.Linear(1.0), T=0.5)

    def test_orders_for_linear_robin_heat(self):
        cfg = SolverConfig(tau=0.1, lambda_schedule=(0.0,))
        space = ver.convergence_order(
            self.make_template, ver.ManufacturedSolution("(1 + t/2)*cos(pi*x/2)", 1),
            [16, 32, 64], [8, 16, 32], fine_space=64, fine_time=32, config=cfg)
        assert 1.9 <= space["order_space"] <= 2.1
        time = ver.convergence_order(
            self.make_template, ver.ManufacturedSolution("exp(-t)*cos(pi*x/2)", 1),
            [16, 32, 64], [8, 16, 32], fine_space=128, fine_time=256, config=cfg)
        assert 0.9 <= time["order_time"] <= 1.1

    def test_saturation_on_representable_solution(self):
        cfg = SolverConfig(tau=0.1, lambda_schedule=(0.0,))
        res = ver.convergence_order(
            self.make_template, ver.ManufacturedSolution("1.0 + 0*x + 0*t", 1),
            [8, 16, 32], [4, 8, 16], fine_space=32, fine_time=16, config=cfg)
        assert res["saturated"]
        assert res["order_space"] == math.inf

    def test_needs_three_levels(self):
        cfg = SolverConfig(tau=0.1, lambda_schedule=(0.0,))
        with pytest.raises(InsufficientLevels):
            ver.convergence_order(self.make_template,
                                  ver.ManufacturedSolution("t + 0*x", 1),
                                  [8, 16], [4, 8, 16], 32, 16, cfg)


def linear_pair(alpha=2.0, beta_slope=1.0, delta=0.0, g_shift=0.0, n=8, T=0.5):
    mesh = fem.build_mesh_1d(1.0, n, "right")
    common = dict(mesh=mesh, c0=1.0, gamma=gr.Linear(alpha),
                  beta=gr.Linear(beta_slope), T=T)
    spec1 = ProblemSpec(g=0.3, h=0.1, u0=0.5, **common)
    spec2 = ProblemSpec(g=0.3 + g_shift, h=0.1, u0=0.5 + delta, **common)
    return spec1, spec2


class TestDependence:
    def test_identical_data_zero_margin(self):
        spec1, spec2 = linear_pair()
        cfg = SolverConfig(tau=0.05, lambda_schedule=(0.0,))
        rep = ver.dependence_check(spec1, spec2, cfg)
        assert rep.lhs == 0.0
        assert rep.margin == 0.0

    def test_perturbed_source_nonnegative_margin(self):
        spec1, spec2 = linear_pair(g_shift=0.4)
        rep = ver.dependence_check(spec1, spec2,
                                   SolverConfig(tau=0.05, lambda_schedule=(0.0,)))
        assert rep.lhs > 0.0
        assert rep.margin >= 0.0

    def test_three_node_closed_form_propagator(self):
        # linear everything: the difference evolves by resolvent powers of the
        # dense operator pencil, computable independently with dense algebra
        alpha, b, delta, tau = 2.0, 1.0, 0.7, 0.05
        spec1, spec2 = linear_pair(alpha=alpha, beta_slope=b, delta=delta, n=2, T=0.5)
        ops = fem.assemble(spec1.mesh)
        cfg = SolverConfig(tau=tau, lambda_schedule=(0.0,), newton_tol=1e-14)
        rep = ver.dependence_check(spec1, spec2, cfg, ops=ops)

        m = np.diag(ops.mass)
        bmat = ops.stiffness.toarray() + b * np.diag(ops.boundary_mass)
        prop = np.linalg.solve(alpha * m + tau * bmat, alpha * m)
        e = np.full(3, -delta)
        sup_sq = float(e @ m @ e)
        grad_sq = 0.0
        n_steps = int(round(spec1.T / tau))
        for _ in range(n_steps):
            e = prop @ e
            sup_sq = max(sup_sq, float(e @ m @ e))
            grad_sq += tau * float(e @ ops.stiffness.toarray() @ e)
        lhs_closed = max(sup_sq, grad_sq)
        assert rep.lhs == pytest.approx(lhs_closed, abs=1e-8, rel=1e-8)
        assert rep.margin >= 0.0

    def test_randomized_margins(self, rng):
        for _ in range(5):
            alpha = float(rng.uniform(0.5, 2.0))
            spec1, spec2 = linear_pair(alpha=alpha,
                                       delta=float(rng.normal() * 0.3),
                                       g_shift=float(rng.normal() * 0.3))
            rep = ver.dependence_check(spec1, spec2,
                                       SolverConfig(tau=0.05, lambda_schedule=(0.0,)))
            assert rep.margin >= 0.0

    def test_nonlinear_gamma_rejected(self):
        mesh = fem.build_mesh_1d(1.0, 4, "right")
        spec1 = ProblemSpec(mesh=mesh, c0=1.0, gamma=gr.SaturatingBiLipschitz(1.0, 1.0),
                            beta=gr.Linear(1.0), g=None, h=None, u0=0.0, T=0.5)
        with pytest.raises(HypothesisViolation):
            ver.dependence_check(spec1, spec1, SolverConfig(tau=0.1, lambda_schedule=(0.0,)))

    def test_mesh_mismatch_rejected(self):
        spec1, _ = linear_pair(n=8)
        _, spec2 = linear_pair(n=16)
        with pytest.raises(HypothesisViolation):
            ver.dependence_check(spec1, spec2,
                                 SolverConfig(tau=0.1, lambda_schedule=(0.0,)))

    def test_mass_term_rejected(self):
        spec1, spec2 = linear_pair()
        cfg = SolverConfig(tau=0.1, lambda_schedule=(0.5,), use_lambda_mass=True)
        with pytest.raises(HypothesisViolation):
            ver.dependence_check(spec1, spec2, cfg)


class TestDualRate:
    def test_uniform_over_schedule(self, rng):
        spec = random_problem(rng, n_elems=12, T=0.4)
        ops = fem.assemble(spec.mesh)
        rates = []
        for lam in (0.5, 0.25, 0.125, 0.0625):
            cfg = SolverConfig(tau=0.05, lambda_schedule=(lam,))
            state = solve_transient(spec, cfg, ops=ops)
            rates.append(ver.dual_rate_l2(ver.energy_monitors(state, spec, ops)))
        assert max(rates) <= 2.0 * min(rates)


class TestTruncationDiagnostic:
    def test_reports_finite_values(self, rng):
        spec = random_problem(rng, n_elems=8, T=0.2)
        cfg = SolverConfig(tau=0.05, lambda_schedule=(0.25,), epsilon=0.5)
        state = solve_transient(spec, cfg)
        diag = ver.truncation_envelope_diagnostic(state, spec,
                                                  fem.assemble(spec.mesh), 0.5)
        assert np.all(np.isfinite(diag["lhs"]))
        assert np.all(np.isfinite(diag["rhs"]))
        assert diag["within"] in (True, False)

    def test_requires_truncation(self, rng):
        spec = random_problem(rng, n_elems=8, T=0.2)
        state = solve_transient(spec, SolverConfig(tau=0.05, lambda_schedule=(0.25,)))
        with pytest.raises(ver.ValidationError):
            ver.truncation_envelope_diagnostic(state, spec,
                                               fem.assemble(spec.mesh), 0.0)
