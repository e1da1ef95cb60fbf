"""Estimate monitors, a-priori bound constants and validation studies.

The monitors evaluate, on a discrete solution, the energy functionals that
drive the well-posedness theory for the flow: the conjugate potential of
the volume nonlinearity, the cumulative gradient dissipation, the boundary
potential mass and the boundary flux.  The bound calculators then rebuild
the corresponding a-priori constants *from data and declared graph
constants only* and assert that the monitored values stay below them.
Backward Euler inherits the continuous Gronwall chains verbatim, with the
exponential factor replaced by its implicit discrete analogue
``prod (1-q_k)^-1``, so a violation indicates an implementation bug,
never an unlucky data set.

Also here: manufactured sources for convergence-order studies and the
continuous-dependence check for linear volume graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import sympy

from . import graphs as gr
from .errors import (
    BoundViolation,
    HypothesisViolation,
    InsufficientLevels,
    ValidationError,
)
from .fem import AssembledOperators, Mesh, assemble, trace_constant
from .graphs import GraphConstants
from .stepper import ProblemSpec, SolutionState, SolverConfig, solve_transient


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------


@dataclass
class BoundCheck:
    name: str
    bound: float
    monitored: float
    passed: bool
    time_index: Optional[int] = None


@dataclass
class EstimateReport:
    """Per-level monitor values plus (after bounding) the computed constants."""

    times: np.ndarray
    lam: float
    tau: float
    l2_u: np.ndarray             # lumped l2 norm of u per level
    h1_sq_u: np.ndarray          # squared discrete h1 norm of u
    grad_sq: np.ndarray          # squared gradient seminorm per level
    grad_sq_cum: np.ndarray      # cumulative tau-weighted dissipation
    phi_star: np.ndarray         # conjugate potential of v
    bhat_l1: np.ndarray          # lumped mass of the regularized boundary potential
    boundary_work: np.ndarray    # xi' * Mb * u per level
    boundary_work_cum: np.ndarray
    boundary_flux_sq: np.ndarray  # squared boundary l2 norm of xi
    forcing_work: np.ndarray     # (g,u) + (h,u)_boundary per level
    l2_v: np.ndarray
    h1_sq_v: np.ndarray
    dual_rate: np.ndarray        # dual norm of (v_k - v_{k-1})/tau, k >= 1
    step_slack: np.ndarray       # per-step inexactness allowance
    constants: dict = field(default_factory=dict)
    bound_checks: list = field(default_factory=list)

    @property
    def all_bounds_pass(self) -> bool:
        return bool(self.bound_checks) and all(c.passed for c in self.bound_checks)


def energy_monitors(solution: SolutionState, spec: ProblemSpec,
                    ops: AssembledOperators) -> EstimateReport:
    """Evaluate every estimate functional at every time level."""
    m = ops.mass
    k_mat = ops.stiffness
    bm = ops.boundary_mass
    eff_gamma = spec.gamma.scaled(spec.c0)
    n_levels = solution.times.shape[0]
    tau = solution.tau

    l2_u = np.empty(n_levels)
    h1_sq_u = np.empty(n_levels)
    grad_sq = np.empty(n_levels)
    phi_star = np.empty(n_levels)
    bhat = np.empty(n_levels)
    bwork = np.empty(n_levels)
    bflux = np.empty(n_levels)
    fwork = np.zeros(n_levels)
    l2_v = np.empty(n_levels)
    h1_sq_v = np.empty(n_levels)

    for k in range(n_levels):
        u = solution.u[k]
        v = solution.v[k]
        xi = solution.xi[k]
        l2_sq = float(u @ (m * u))
        g_sq = float(u @ (k_mat @ u))
        l2_u[k] = math.sqrt(max(l2_sq, 0.0))
        grad_sq[k] = max(g_sq, 0.0)
        h1_sq_u[k] = max(l2_sq + g_sq, 0.0)
        phi_star[k] = float(np.sum(m * np.asarray(
            gr.conjugate_potential(eff_gamma, v), dtype=float)))
        bhat[k] = float(np.sum(m * np.asarray(
            gr.regularized_potential(spec.beta, solution.lam, u), dtype=float)))
        bwork[k] = float(xi @ (bm * u))
        bflux[k] = float(xi @ (bm * xi))
        vl2_sq = float(v @ (m * v))
        l2_v[k] = math.sqrt(max(vl2_sq, 0.0))
        h1_sq_v[k] = max(vl2_sq + float(v @ (k_mat @ v)), 0.0)
        if k >= 1:
            t = solution.times[k]
            fwork[k] = float(u @ (m * spec.g_at(t))) + float(u @ (bm * spec.h_at(t)))

    dual_rate = np.zeros(n_levels)
    h1_solve = spla.factorized((sp.diags(m) + k_mat).tocsc())
    for k in range(1, n_levels):
        w = (solution.v[k] - solution.v[k - 1]) / tau
        y = h1_solve(m * w)
        dual_rate[k] = math.sqrt(max(float(w @ (m * y)), 0.0))

    step_slack = np.zeros(n_levels)
    for k in range(1, n_levels):
        step_slack[k] = float(solution.residuals[k - 1]) * (
            1.0 + float(np.linalg.norm(solution.u[k])))

    return EstimateReport(
        times=solution.times, lam=solution.lam, tau=tau,
        l2_u=l2_u, h1_sq_u=h1_sq_u, grad_sq=grad_sq,
        grad_sq_cum=np.concatenate([[0.0], np.cumsum(tau * grad_sq[1:])]),
        phi_star=phi_star, bhat_l1=bhat,
        boundary_work=bwork,
        boundary_work_cum=np.concatenate([[0.0], np.cumsum(tau * bwork[1:])]),
        boundary_flux_sq=bflux,
        forcing_work=fwork, l2_v=l2_v, h1_sq_v=h1_sq_v,
        dual_rate=dual_rate, step_slack=step_slack)


# ---------------------------------------------------------------------------
# Data norms and bound constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataNorms:
    """Everything the bound formulas consume besides graph constants."""

    m1: float                 # product bound for the initial conjugate potential
    m2_sq: float              # squared boundary-data space-time norm
    g_l2l2_sq: float
    g_linf_steps: np.ndarray  # sup norm of g at each implicit sample time
    g_l1linf: float
    initial_bpot_l1: float    # lumped mass of the raw boundary potential at u(0)
    omega: float
    T: float
    tau: float
    n_steps: int


def data_norms(spec: ProblemSpec, ops: AssembledOperators,
               solution: SolutionState) -> DataNorms:
    """Norms of the problem data on the solve's own time grid."""
    tau = solution.tau
    n_steps = solution.n_steps
    m = ops.mass
    bm = ops.boundary_mass
    u0 = solution.u[0]
    v0 = solution.v[0]
    m1 = math.sqrt(float(v0 @ (m * v0))) * math.sqrt(float(u0 @ (m * u0)))
    g_l2l2_sq = 0.0
    m2_sq = 0.0
    g_linf = np.zeros(n_steps)
    for k in range(1, n_steps + 1):
        t = solution.times[k]
        g_k = spec.g_at(t)
        h_k = spec.h_at(t)
        g_l2l2_sq += tau * float(g_k @ (m * g_k))
        m2_sq += tau * float(h_k @ (bm * h_k))
        g_linf[k - 1] = float(np.max(np.abs(g_k)))
    bpot = float(np.sum(m * np.asarray(spec.beta.potential(u0), dtype=float)))
    return DataNorms(
        m1=m1, m2_sq=m2_sq, g_l2l2_sq=g_l2l2_sq,
        g_linf_steps=g_linf, g_l1linf=float(tau * g_linf.sum()),
        initial_bpot_l1=bpot, omega=ops.domain_measure,
        T=float(solution.times[-1]), tau=tau, n_steps=n_steps)


def _implicit_gronwall_factor(q: np.ndarray) -> float:
    """prod (1 - q_k)^-1 for the implicit discrete Gronwall lemma."""
    if np.any(q >= 1.0):
        raise ValidationError(
            "time step too large for the discrete Gronwall chain; reduce tau")
    return float(np.exp(-np.sum(np.log1p(-q))))


def apriori_bounds(report: EstimateReport, gamma_constants: GraphConstants,
                   beta_constants: GraphConstants, norms: DataNorms,
                   c_tr: float, raise_on_violation: bool = True) -> EstimateReport:
    """Compute the bound constants and test every monitor against them.

    ``gamma_constants`` must describe the *effective* volume graph (heat
    capacity included).  The constants depend on data and declared graph
    properties only; the solution enters solely through the monitors.
    """
    c_low = gamma_constants.lipschitz_lower
    c_up = gamma_constants.lipschitz_upper
    if c_low is None or c_up is None:
        raise ValidationError("volume graph must declare bi-Lipschitz constants")
    tau, n_steps = norms.tau, norms.n_steps

    c1 = c_low**2 / (4.0 * c_up)
    c2 = norms.m1 + norms.g_l2l2_sq + c_tr**2 * norms.m2_sq
    grow1 = _implicit_gronwall_factor(np.full(n_steps, tau / (2.0 * c1)))
    a1 = math.sqrt(c2 / c1 * grow1)
    a2 = math.sqrt(2.0 * c2 + 2.0 * norms.T * a1**2)
    a3 = c_up * a2

    constants = dict(C1=c1, C2=c2, A1=a1, A2=a2, A3=a3,
                     M1=norms.m1, M2=math.sqrt(norms.m2_sq),
                     L=norms.initial_bpot_l1, C_tr=c_tr)

    checks: list[BoundCheck] = []

    def add(name, bound, monitored, idx=None):
        checks.append(BoundCheck(name, float(bound), float(monitored),
                                 bool(monitored <= bound), idx))

    def add_series(name, bound, series, slack=0.0):
        excess = np.asarray(series) - bound - slack
        worst = int(np.argmax(excess))
        checks.append(BoundCheck(name, float(bound), float(np.max(series)),
                                 bool(excess[worst] <= 0.0), worst))

    add_series("A1_sup_l2_u", a1, report.l2_u)
    add("A2_l2_h1_u", a2, math.sqrt(float(tau * report.h1_sq_u[1:].sum())))
    add("A3_l2_h1_v", a3, math.sqrt(float(tau * report.h1_sq_v[1:].sum())))
    add("M1_initial_phi_star", norms.m1 * (1.0 + 1e-12) + 1e-12, report.phi_star[0])

    d1 = beta_constants.potential_bound_d1
    d2 = beta_constants.potential_bound_d2
    if d1 is not None and d2 is not None:
        a_core = (c_up * norms.initial_bpot_l1 + 0.5 * norms.m2_sq
                  + d2 * norms.omega * norms.g_l1linf)
        grow2 = _implicit_gronwall_factor(tau * d1 * norms.g_linf_steps / c_low)
        b1 = a_core / c_low * grow2
        b2 = math.sqrt(2.0 * a_core + 2.0 * d1 * norms.g_l1linf * b1)
        constants.update(B1=b1, B2=b2, D1=d1, D2=d2)
        add_series("B1_sup_l1_bpot", b1, report.bhat_l1)
        add("B2_l2_boundary_flux", b2,
            math.sqrt(float(tau * report.boundary_flux_sq[1:].sum())))

    # structural inequalities the scheme satisfies step by step
    slack = report.step_slack
    lower_gap = c1 * report.l2_u**2 - report.phi_star
    add_series("conjugate_lower_bound", 0.0, lower_gap,
               slack=1e-9 * np.maximum(1.0, report.phi_star.max(initial=1.0)))
    energy_gap = (report.phi_star[1:] - report.phi_star[:-1]
                  + tau * report.grad_sq[1:] - tau * report.forcing_work[1:]
                  - slack[1:] - 1e-10 * np.maximum(1.0, np.abs(report.phi_star[1:])))
    add_series("energy_step_inequality", 0.0, energy_gap)
    add_series("boundary_sign", 0.0, -(report.boundary_work[1:] + slack[1:] + 1e-12))

    report.constants.update(constants)
    report.bound_checks = checks
    if raise_on_violation:
        bad = [c for c in checks if not c.passed]
        if bad:
            worst = bad[0]
            raise BoundViolation(
                f"bound {worst.name} violated: monitored {worst.monitored:.6e} "
                f"> bound {worst.bound:.6e}", time_index=worst.time_index)
    return report


def verify_solution(solution: SolutionState, spec: ProblemSpec,
                    ops: AssembledOperators,
                    raise_on_violation: bool = True) -> EstimateReport:
    """Monitors plus bound checks in one call."""
    report = energy_monitors(solution, spec, ops)
    return apriori_bounds(
        report,
        spec.gamma.scaled(spec.c0).constants(),
        spec.beta.constants(),
        data_norms(spec, ops, solution),
        trace_constant(ops),
        raise_on_violation=raise_on_violation)


def dual_rate_l2(report: EstimateReport) -> float:
    """Space-time dual norm of the discrete time derivative of v."""
    return math.sqrt(float(report.tau * np.sum(report.dual_rate[1:] ** 2)))


def truncation_envelope_diagnostic(solution: SolutionState, spec: ProblemSpec,
                                   ops: AssembledOperators, eps: float) -> dict:
    """Per-step analogue of the invariant set used by the truncated
    fixed-point construction, reported but never enforced.

    For each step compares ``(1/2 + lam)|u|^2 + (3/2)|grad u|^2`` against
    ``(C_tr*|Gamma1|/eps + |F|_dual)^2 / 2`` with F the step's right-hand
    functional.  The time-stepping problem only parallels the stationary
    construction, so this stays a diagnostic.
    """
    if not eps > 0.0:
        raise ValidationError("diagnostic needs an active truncation level")
    c_tr = trace_constant(ops)
    h1_solve = spla.factorized((sp.diags(ops.mass) + ops.stiffness).tocsc())
    tau, lam = solution.tau, solution.lam
    lhs = np.zeros(solution.n_steps)
    rhs = np.zeros(solution.n_steps)
    for k in range(1, solution.n_steps + 1):
        u = solution.u[k]
        lhs[k - 1] = ((0.5 + lam) * float(u @ (ops.mass * u))
                      + 1.5 * float(u @ (ops.stiffness @ u)))
        t = solution.times[k]
        f_repr = (ops.mass * (solution.v[k - 1] / tau + spec.g_at(t))
                  + ops.boundary_mass * spec.h_at(t))
        f_dual = math.sqrt(max(float(f_repr @ h1_solve(f_repr)), 0.0))
        rhs[k - 1] = 0.5 * (c_tr * ops.gamma1_measure / eps + f_dual) ** 2
    return {"lhs": lhs, "rhs": rhs, "within": bool(np.all(lhs <= rhs))}


# ---------------------------------------------------------------------------
# Manufactured solutions
# ---------------------------------------------------------------------------


class ManufacturedSolution:
    """Closed-form space-time field with symbolic derivatives.

    ``expr`` uses variables x (and y in 2-D) and t.  Used to manufacture
    sources so the field solves the flow exactly, and to sample reference
    values in convergence studies.
    """

    def __init__(self, expr, dim: int):
        if dim not in (1, 2):
            raise ValidationError("dimension must be 1 or 2")
        self.dim = dim
        x, y, t = sympy.symbols("x y t")
        self.vars = (x, t) if dim == 1 else (x, y, t)
        if isinstance(expr, str):
            expr = sympy.sympify(expr)
        self.expr = sympy.sympify(expr)
        free = self.expr.free_symbols - set(self.vars)
        if free:
            raise ValidationError(f"unexpected symbols in exact solution: {free}")
        self._u = sympy.lambdify(self.vars, self.expr, "numpy")
        self._dx = sympy.lambdify(self.vars, sympy.diff(self.expr, x), "numpy")
        lap = sympy.diff(self.expr, x, 2)
        if dim == 2:
            lap = lap + sympy.diff(self.expr, y, 2)
        self._lap = sympy.lambdify(self.vars, lap, "numpy")

    def _args(self, mesh: Mesh, t: float):
        if self.dim == 1:
            return (mesh.nodes, t)
        return (mesh.nodes[:, 0], mesh.nodes[:, 1], t)

    def sample(self, mesh: Mesh, t: float) -> np.ndarray:
        return np.broadcast_to(np.asarray(self._u(*self._args(mesh, t)), dtype=float),
                               (mesh.n_nodes,)).copy()

    def laplacian(self, mesh: Mesh, t: float) -> np.ndarray:
        return np.broadcast_to(np.asarray(self._lap(*self._args(mesh, t)), dtype=float),
                               (mesh.n_nodes,)).copy()

    def x_derivative(self, mesh: Mesh, t: float) -> np.ndarray:
        return np.broadcast_to(np.asarray(self._dx(*self._args(mesh, t)), dtype=float),
                               (mesh.n_nodes,)).copy()


@dataclass
class ProblemTemplate:
    """Problem data without sources; completed by ``manufactured_source``."""

    mesh: Mesh
    c0: float
    gamma: gr.ScalarGraph
    beta: gr.ScalarGraph
    T: float


def _lateral_normal_sign(mesh: Mesh) -> np.ndarray:
    """Outward normal direction (+-1 along x) at each active boundary node."""
    sign = np.zeros(mesh.n_nodes)
    coords = mesh.nodes if mesh.dim == 1 else mesh.nodes[:, 0]
    xmin, xmax = float(np.min(coords)), float(np.max(coords))
    for i in mesh.gamma1_nodes:
        xi = float(coords[i])
        if abs(xi - xmin) <= 1e-12 * max(1.0, abs(xmax)):
            sign[i] = -1.0
        elif abs(xi - xmax) <= 1e-12 * max(1.0, abs(xmax)):
            sign[i] = 1.0
        else:
            raise ValidationError(
                "active boundary node off the lateral sides; cannot orient the normal")
    return sign


def manufactured_source(exact: ManufacturedSolution,
                        template: ProblemTemplate) -> ProblemSpec:
    """Complete a problem so that ``exact`` is its solution.

    The volume source is ``c0 * d/dt gamma(u*) - lap(u*)`` and the boundary
    datum adds the outward normal derivative of the exact field to the
    boundary nonlinearity evaluated along it.  The exact field must have
    zero normal derivative on the insulated boundary; that is the caller's
    choice of field, not checked here.
    """
    mesh = template.mesh
    x, t_sym = exact.vars[0], exact.vars[-1]
    gamma_expr = template.gamma.to_sympy(exact.expr)
    dgdt = sympy.diff(gamma_expr, t_sym)
    dgdt_fn = sympy.lambdify(exact.vars, dgdt, "numpy")

    def g_fn(t: float) -> np.ndarray:
        args = exact._args(mesh, t)
        rate = np.broadcast_to(np.asarray(dgdt_fn(*args), dtype=float),
                               (mesh.n_nodes,))
        return template.c0 * rate - exact.laplacian(mesh, t)

    normal_sign = _lateral_normal_sign(mesh)
    beta = template.beta

    def h_fn(t: float) -> np.ndarray:
        u_star = exact.sample(mesh, t)
        flux = normal_sign * exact.x_derivative(mesh, t)
        return np.asarray(beta.minimal_section(u_star), dtype=float) + flux

    return ProblemSpec(mesh=mesh, c0=template.c0, gamma=template.gamma,
                       beta=template.beta, g=g_fn, h=h_fn,
                       u0=exact.sample(mesh, 0.0), T=template.T)


def convergence_order(make_template: Callable[[int], ProblemTemplate],
                      exact: ManufacturedSolution,
                      space_levels: Sequence[int],
                      time_levels: Sequence[int],
                      fine_space: int, fine_time: int,
                      config: SolverConfig) -> dict:
    """Observed convergence orders from dyadic refinement studies.

    Spatial slopes are measured with the finest time step, temporal slopes
    on the finest mesh; errors are lumped-l2 at the final time.  Needs at
    least three levels per axis.
    """
    if len(space_levels) < 3 or len(time_levels) < 3:
        raise InsufficientLevels("need at least three refinement levels per axis")

    def run(n_elems: int, n_steps: int):
        template = make_template(n_elems)
        spec = manufactured_source(exact, template)
        cfg = SolverConfig(
            tau=template.T / n_steps, lambda_schedule=config.lambda_schedule,
            epsilon=config.epsilon, picard_damping=config.picard_damping,
            picard_tol=config.picard_tol, newton_tol=config.newton_tol,
            max_iters=config.max_iters, solver_kind=config.solver_kind,
            use_lambda_mass=config.use_lambda_mass)
        ops = assemble(spec.mesh)
        sol = solve_transient(spec, cfg, ops=ops)
        err = sol.u[-1] - exact.sample(spec.mesh, spec.T)
        h = float(np.max(spec.mesh.element_sizes)) if spec.mesh.dim == 1 else \
            math.sqrt(2.0 * float(np.max(spec.mesh.element_sizes)))
        return h, math.sqrt(float(err @ (ops.mass * err)))

    errors_space = [run(n, fine_time) for n in space_levels]
    errors_time = []
    for m in time_levels:
        template = make_template(fine_space)
        _, e = run(fine_space, m)
        errors_time.append((template.T / m, e))

    def slope(pairs):
        xs = np.log([p[0] for p in pairs])
        ys = np.log([max(p[1], 1e-300) for p in pairs])
        return float(np.polyfit(xs, ys, 1)[0])

    saturated_space = all(e < 1e-12 for _, e in errors_space)
    saturated_time = all(e < 1e-12 for _, e in errors_time)
    return {
        "order_space": math.inf if saturated_space else slope(errors_space),
        "order_time": math.inf if saturated_time else slope(errors_time),
        "errors_space": errors_space,
        "errors_time": errors_time,
        "saturated": saturated_space and saturated_time,
    }


# ---------------------------------------------------------------------------
# Continuous dependence
# ---------------------------------------------------------------------------


@dataclass
class DependenceReport:
    lhs: float
    rhs: float
    c_dep: float
    margin: float
    alpha_eff: float
    sup_sq_l2: float
    grad_sq_l2l2: float
    rhs_initial: float
    rhs_g: float
    rhs_h: float


def dependence_check(spec1: ProblemSpec, spec2: ProblemSpec,
                     config: SolverConfig,
                     ops: Optional[AssembledOperators] = None) -> DependenceReport:
    """Two-run stability test for a linear volume graph.

    Checks the squared distance of the two solutions (sup-in-time lumped
    l2 and cumulative gradient dissipation) against the Gronwall constant
    ``2*exp(T/alpha)/(alpha*min(1,1/alpha))`` applied to the data distance.
    Requires the same linear volume graph, heat capacity, mesh and horizon
    on both problems, with the regularizing mass term and the truncation
    disabled.
    """
    g1, g2 = spec1.gamma, spec2.gamma
    if not (isinstance(g1, gr.Linear) and isinstance(g2, gr.Linear)):
        raise HypothesisViolation("dependence check needs a linear volume graph")
    if g1.alpha != g2.alpha or spec1.c0 != spec2.c0:
        raise HypothesisViolation("both problems must share the volume graph")
    m1, m2 = spec1.mesh, spec2.mesh
    if (m1.dim != m2.dim or m1.nodes.shape != m2.nodes.shape
            or not np.array_equal(m1.nodes, m2.nodes)
            or not np.array_equal(m1.boundary_labels, m2.boundary_labels)):
        raise HypothesisViolation("both problems must share the mesh")
    if spec1.T != spec2.T:
        raise HypothesisViolation("both problems must share the time horizon")
    if config.use_lambda_mass and config.lambda_schedule[-1] > 0.0:
        raise HypothesisViolation("dependence check runs without the mass term")
    if config.epsilon != 0.0:
        raise HypothesisViolation("dependence check runs without truncation")
    if config.smooth_u0_lambda != 0.0:
        raise HypothesisViolation("dependence check compares raw initial data")

    ops = ops if ops is not None else assemble(m1)
    alpha = spec1.c0 * g1.alpha
    sol1 = solve_transient(spec1, config, ops=ops)
    sol2 = solve_transient(spec2, config, ops=ops)
    tau = config.tau
    n_steps = sol1.n_steps

    e = sol1.u - sol2.u
    sup_sq = max(float(ek @ (ops.mass * ek)) for ek in e)
    grad_sq = tau * sum(float(ek @ (ops.stiffness @ ek)) for ek in e[1:])
    lhs = max(sup_sq, grad_sq)

    e0 = e[0]
    rhs_initial = 0.5 * alpha * float(e0 @ (ops.mass * e0))
    rhs_g = 0.0
    rhs_h = 0.0
    for k in range(1, n_steps + 1):
        t = sol1.times[k]
        dg = spec1.g_at(t) - spec2.g_at(t)
        dh = spec1.h_at(t) - spec2.h_at(t)
        rhs_g += tau * float(dg @ (ops.mass * dg))
        rhs_h += tau * float(dh @ (ops.boundary_mass * dh))
    c_tr = trace_constant(ops)
    rhs = rhs_initial + rhs_g + c_tr**2 * rhs_h
    c_dep = 2.0 * math.exp(spec1.T / alpha) / (alpha * min(1.0, 1.0 / alpha))
    return DependenceReport(
        lhs=lhs, rhs=rhs, c_dep=c_dep, margin=c_dep * rhs - lhs,
        alpha_eff=alpha, sup_sq_l2=sup_sq, grad_sq_l2l2=grad_sq,
        rhs_initial=rhs_initial, rhs_g=rhs_g, rhs_h=rhs_h)
