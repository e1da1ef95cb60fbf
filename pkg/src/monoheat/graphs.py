"""Calculus for maximal monotone graphs on the real line.

Every graph here is a (possibly set-valued) monotone map on R with
``0 in graph(0)``.  The solver never evaluates a set-valued graph
directly; it goes through the resolvent

    J_lam(x) = (I + lam*A)^(-1) x,

which is single valued and nonexpansive, and the Yosida approximation
``A_lam = (I - J_lam)/lam``, a monotone ``1/lam``-Lipschitz function.
The module also provides convex potentials (``A = d(potential)``),
Moreau envelopes, convex conjugates, the hard clamp used to truncate
the Yosida approximation, and a diagnostic suite that samples the
standard regularization identities.

All evaluation routines accept scalars or numpy arrays and are pure;
graph objects are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DomainError,
    GraphAuditError,
    InvalidArgument,
    NonConvergence,
    QuadratureFailure,
    Unsupported,
)

_BISECT_CAP = 200
_BISECT_REL_WIDTH = 1e-13
_NEWTON_POLISH_STEPS = 3
_SIMPSON_TOL = 1e-11
_SIMPSON_MAX_DEPTH = 48


def _asarray(x):
    return np.asarray(x, dtype=float)


def _match(x_in, out):
    """Return a float for scalar input, an ndarray otherwise."""
    if np.isscalar(x_in) or (isinstance(x_in, np.ndarray) and x_in.ndim == 0):
        return float(np.asarray(out).reshape(-1)[0]) if np.ndim(out) else float(out)
    return out


@dataclass(frozen=True)
class GraphConstants:
    """Structural constants declared at construction and audited by sampling.

    ``lipschitz_lower``/``lipschitz_upper`` bracket difference quotients,
    ``linear_bound_c1``/``c2`` give ``|xi| <= c1*|x| + c2`` for xi in
    graph(x), and ``potential_bound_d1``/``d2`` give
    ``|A0(r)| <= d1*potential(r) + d2``.  Fields are ``None`` when the
    graph does not satisfy (or does not declare) the property.
    """

    lipschitz_lower: Optional[float] = None
    lipschitz_upper: Optional[float] = None
    linear_bound_c1: Optional[float] = None
    linear_bound_c2: Optional[float] = None
    potential_bound_d1: Optional[float] = None
    potential_bound_d2: Optional[float] = None

    @property
    def bi_lipschitz(self) -> bool:
        return self.lipschitz_lower is not None and self.lipschitz_upper is not None


class ScalarGraph:
    """Base class: a maximal monotone graph on R with 0 in graph(0)."""

    label = "graph"
    domain = (-math.inf, math.inf)
    single_valued = True
    invertible = True
    #: closed forms exist for every operation (tighter test tolerances apply)
    closed_form = False

    # -- pointwise evaluation ------------------------------------------------

    def section_bounds(self, x):
        """Return ``(inf graph(x), sup graph(x))`` elementwise."""
        v = self.value(x)
        return v, v

    def value(self, x):
        """Single-valued evaluation; equals the minimal section by default."""
        raise NotImplementedError

    def minimal_section(self, x):
        """Element of graph(x) with smallest absolute value."""
        x = _asarray(x)
        self._check_domain(x)
        lo, hi = self.section_bounds(x)
        out = np.where(lo > 0.0, lo, np.where(hi < 0.0, hi, 0.0))
        return out

    def derivative(self, x):
        """Pointwise a.e. derivative (used by Newton steppers)."""
        raise NotImplementedError

    def constant_derivative(self) -> Optional[float]:
        """Slope if the graph is globally linear, else ``None``."""
        return None

    # -- integral quantities -------------------------------------------------

    def potential(self, r):
        """Convex potential ``int_0^r A0(s) ds``, normalized to 0 at 0."""
        r_arr = _asarray(r)
        self._check_domain(r_arr)
        flat = np.atleast_1d(r_arr).ravel()
        vals = np.array([_adaptive_simpson(lambda s: float(self.minimal_section(s)), t)
                         for t in flat])
        return _match(r, vals.reshape(np.atleast_1d(r_arr).shape) if np.ndim(r) else vals[0])

    # -- resolvent machinery ---------------------------------------------------

    def resolvent(self, lam, x):
        """Unique y with ``x in y + lam*graph(y)``."""
        x_arr = _asarray(x)
        y = _resolvent_bisect(self, lam, np.atleast_1d(x_arr).astype(float))
        return _match(x, y.reshape(np.atleast_1d(x_arr).shape) if np.ndim(x) else y[0])

    def inverse(self, y):
        """Inverse of the single-valued selection (strictly increasing graphs)."""
        if not self.invertible:
            raise Unsupported(f"{self.label} has no invertible selection")
        y_arr = np.atleast_1d(_asarray(y))
        out = _inverse_bisect(self, y_arr)
        return _match(y, out.reshape(np.shape(y)) if np.ndim(y) else out[0])

    # -- metadata --------------------------------------------------------------

    def constants(self) -> GraphConstants:
        return GraphConstants()

    def to_sympy(self, var):
        raise Unsupported(f"{self.label} has no symbolic form")

    def scaled(self, factor: float) -> "ScaledGraph":
        return ScaledGraph(self, factor)

    def _check_domain(self, x):
        lo, hi = self.domain
        if np.any(_asarray(x) < lo) or np.any(_asarray(x) > hi):
            raise DomainError(f"argument outside domain of {self.label}")

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


def _adaptive_simpson(f, r, tol=_SIMPSON_TOL):
    """Adaptive Simpson quadrature of f over [0, r] (r may be negative)."""
    if r == 0.0:
        return 0.0
    a, b, sign = (0.0, r, 1.0) if r > 0 else (r, 0.0, -1.0)

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) * (f0 + 4.0 * f1 + f2) / 6.0

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        xm = 0.5 * (x0 + x2)
        xl, xr = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        if depth >= _SIMPSON_MAX_DEPTH:
            raise QuadratureFailure("adaptive Simpson refinement stalled")
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, xm, f0, fl, f1, left, eps / 2.0, depth + 1)
                + recurse(xm, x2, f1, fr, f2, right, eps / 2.0, depth + 1))

    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simpson(a, b, fa, fm, fb)
    return sign * recurse(a, b, fa, fm, fb, whole, tol, 0)


def _resolvent_bisect(graph, lam, x):
    """Vectorized safeguarded bisection for the resolvent inclusion.

    Monotonicity and 0 in graph(0) bracket the root in [min(0,x), max(0,x)];
    bisection to relative width 1e-13 is followed by a few Newton polish
    steps when a derivative is available.
    """
    dom_lo, dom_hi = graph.domain
    lo = np.maximum(np.minimum(0.0, x), dom_lo)
    hi = np.minimum(np.maximum(0.0, x), dom_hi)
    flo_lo, _ = graph.section_bounds(lo)
    _, fhi_hi = graph.section_bounds(hi)
    if np.any(lo + lam * flo_lo - x > 0.0) or np.any(hi + lam * fhi_hi - x < 0.0):
        raise DomainError(f"resolvent of {graph.label} cannot be bracketed")

    width_target = _BISECT_REL_WIDTH * np.maximum(1.0, np.abs(x))
    converged = False
    for _ in range(_BISECT_CAP):
        mid = 0.5 * (lo + hi)
        sec_lo, sec_hi = graph.section_bounds(mid)
        too_high = mid + lam * sec_lo > x
        too_low = mid + lam * sec_hi < x
        exact = ~too_high & ~too_low
        hi = np.where(too_high | exact, mid, hi)
        lo = np.where(too_low | exact, mid, lo)
        if np.all(hi - lo <= width_target):
            converged = True
            break
    if not converged:
        raise NonConvergence(
            f"resolvent bisection for {graph.label} exceeded {_BISECT_CAP} iterations")
    y = 0.5 * (lo + hi)
    if graph.single_valued:
        for _ in range(_NEWTON_POLISH_STEPS):
            with np.errstate(all="ignore"):
                deriv = graph.derivative(y)
                step = (y + lam * graph.value(y) - x) / (1.0 + lam * deriv)
            step = np.where(np.isfinite(step), step, 0.0)
            y = np.clip(y - step, lo, hi)
    return y


def _inverse_bisect(graph, y):
    """Solve value(t) = y by expanding bracket plus bisection and polish."""
    t_lo = np.where(y >= 0.0, 0.0, -1.0)
    t_hi = np.where(y >= 0.0, 1.0, 0.0)
    for _ in range(200):
        need_lo = graph.value(t_lo) > y
        need_hi = graph.value(t_hi) < y
        if not (np.any(need_lo) or np.any(need_hi)):
            break
        t_lo = np.where(need_lo, 2.0 * t_lo - 1.0, t_lo)
        t_hi = np.where(need_hi, 2.0 * t_hi + 1.0, t_hi)
    else:
        raise NonConvergence(f"could not bracket inverse of {graph.label}")
    for _ in range(_BISECT_CAP):
        mid = 0.5 * (t_lo + t_hi)
        high = graph.value(mid) > y
        t_hi = np.where(high, mid, t_hi)
        t_lo = np.where(high, t_lo, mid)
        if np.all(t_hi - t_lo <= _BISECT_REL_WIDTH * np.maximum(1.0, np.abs(t_hi))):
            break
    t = 0.5 * (t_lo + t_hi)
    for _ in range(_NEWTON_POLISH_STEPS):
        with np.errstate(all="ignore"):
            step = (graph.value(t) - y) / graph.derivative(t)
        step = np.where(np.isfinite(step), step, 0.0)
        t = np.clip(t - step, t_lo, t_hi)
    return t


# ---------------------------------------------------------------------------
# Built-in graphs
# ---------------------------------------------------------------------------


class Linear(ScalarGraph):
    """The graph x -> alpha*x with alpha > 0."""

    closed_form = True

    def __init__(self, alpha: float):
        if not alpha > 0.0:
            raise InvalidArgument("linear graph needs a positive slope")
        self.alpha = float(alpha)
        self.label = f"linear({self.alpha:g})"

    def value(self, x):
        return self.alpha * _asarray(x)

    def derivative(self, x):
        return np.full_like(_asarray(x), self.alpha)

    def constant_derivative(self):
        return self.alpha

    def potential(self, r):
        r_arr = _asarray(r)
        return _match(r, 0.5 * self.alpha * r_arr**2)

    def resolvent(self, lam, x):
        return _match(x, _asarray(x) / (1.0 + lam * self.alpha))

    def inverse(self, y):
        return _match(y, _asarray(y) / self.alpha)

    def constants(self):
        return GraphConstants(
            lipschitz_lower=self.alpha,
            lipschitz_upper=self.alpha,
            linear_bound_c1=self.alpha,
            linear_bound_c2=0.0,
            potential_bound_d1=2.0,
            potential_bound_d2=self.alpha / 4.0,
        )

    def to_sympy(self, var):
        return self.alpha * var


class SaturatingBiLipschitz(ScalarGraph):
    """x -> alpha*x + b*x/(1+|x|); slope stays in [alpha, alpha+b].

    A strictly monotone bi-Lipschitz graph whose curvature saturates, with
    closed forms for potential and inverse.
    """

    def __init__(self, alpha: float, b: float):
        if not (alpha > 0.0 and b >= 0.0):
            raise InvalidArgument("saturating graph needs alpha > 0 and b >= 0")
        self.alpha = float(alpha)
        self.b = float(b)
        self.label = f"saturating({self.alpha:g},{self.b:g})"

    def value(self, x):
        x = _asarray(x)
        return self.alpha * x + self.b * x / (1.0 + np.abs(x))

    def derivative(self, x):
        x = _asarray(x)
        return self.alpha + self.b / (1.0 + np.abs(x)) ** 2

    def potential(self, r):
        r_arr = _asarray(r)
        a = np.abs(r_arr)
        return _match(r, 0.5 * self.alpha * r_arr**2 + self.b * (a - np.log1p(a)))

    def inverse(self, y):
        # alpha*t^2 + (alpha + b - |y|)*t - |y| = 0 on the branch sign(t)=sign(y)
        y_arr = _asarray(y)
        a = np.abs(y_arr)
        bq = self.alpha + self.b - a
        t = (-bq + np.sqrt(bq**2 + 4.0 * self.alpha * a)) / (2.0 * self.alpha)
        return _match(y, np.sign(y_arr) * t)

    def constants(self):
        return GraphConstants(
            lipschitz_lower=self.alpha,
            lipschitz_upper=self.alpha + self.b,
            linear_bound_c1=self.alpha + self.b,
            linear_bound_c2=0.0,
            potential_bound_d1=2.0 * (self.alpha + self.b) / self.alpha,
            potential_bound_d2=(self.alpha + self.b) / 4.0,
        )

    def to_sympy(self, var):
        import sympy as sp

        return self.alpha * var + self.b * var / (1 + sp.Abs(var))


class Power(ScalarGraph):
    """Odd power graph x -> sign(x)*|x|^p, p > 0."""

    def __init__(self, p: float):
        if not p > 0.0:
            raise InvalidArgument("power graph needs p > 0")
        self.p = float(p)
        self.label = f"power({self.p:g})"

    def value(self, x):
        x = _asarray(x)
        return np.sign(x) * np.abs(x) ** self.p

    def derivative(self, x):
        x = _asarray(x)
        with np.errstate(divide="ignore"):
            d = self.p * np.abs(x) ** (self.p - 1.0)
        return d

    def potential(self, r):
        r_arr = _asarray(r)
        return _match(r, np.abs(r_arr) ** (self.p + 1.0) / (self.p + 1.0))

    def inverse(self, y):
        y_arr = _asarray(y)
        return _match(y, np.sign(y_arr) * np.abs(y_arr) ** (1.0 / self.p))

    def constants(self):
        lip = GraphConstants(
            potential_bound_d1=self.p + 1.0,
            potential_bound_d2=1.0,
        )
        if self.p == 1.0:
            return GraphConstants(
                lipschitz_lower=1.0, lipschitz_upper=1.0,
                linear_bound_c1=1.0, linear_bound_c2=0.0,
                potential_bound_d1=2.0, potential_bound_d2=0.25)
        if self.p < 1.0:
            # sublinear: |x|^p <= |x| + 1
            return GraphConstants(
                linear_bound_c1=1.0, linear_bound_c2=1.0,
                potential_bound_d1=lip.potential_bound_d1,
                potential_bound_d2=lip.potential_bound_d2)
        return lip

    def to_sympy(self, var):
        import sympy as sp

        return sp.sign(var) * sp.Abs(var) ** self.p


class Sign(ScalarGraph):
    """Subdifferential of |x|: the sign graph, set-valued at the origin."""

    single_valued = False
    invertible = False
    closed_form = True

    def __init__(self):
        self.label = "sign"

    def section_bounds(self, x):
        x = _asarray(x)
        lo = np.where(x > 0.0, 1.0, np.where(x < 0.0, -1.0, -1.0))
        hi = np.where(x > 0.0, 1.0, np.where(x < 0.0, -1.0, 1.0))
        return lo, hi

    def value(self, x):
        return self.minimal_section(x)

    def derivative(self, x):
        x = _asarray(x)
        return np.where(x == 0.0, np.inf, 0.0)

    def potential(self, r):
        return _match(r, np.abs(_asarray(r)))

    def resolvent(self, lam, x):
        x_arr = _asarray(x)
        # soft threshold with dead zone |x| <= lam
        return _match(x, np.sign(x_arr) * np.maximum(np.abs(x_arr) - lam, 0.0))

    def constants(self):
        return GraphConstants(
            linear_bound_c1=1.0, linear_bound_c2=1.0,
            potential_bound_d1=1.0, potential_bound_d2=1.0)


class PhysicalBeta(ScalarGraph):
    """Boundary radiation law r -> h*w + s*|w|^3*w with w = inner(r).

    With the identity inner graph this is the linear-plus-fourth-power
    radiative flux; using the problem's own temperature graph as ``inner``
    reproduces the physical boundary nonlinearity of the heating model.
    """

    def __init__(self, h_coef: float, s_coef: float, inner: Optional[ScalarGraph] = None):
        if not (h_coef >= 0.0 and s_coef >= 0.0 and h_coef + s_coef > 0.0):
            raise InvalidArgument("physical graph needs nonnegative h, s, not both zero")
        self.h_coef = float(h_coef)
        self.s_coef = float(s_coef)
        self.inner = inner if inner is not None else Linear(1.0)
        if not self.inner.single_valued:
            raise InvalidArgument("physical graph needs a single-valued inner graph")
        self.label = f"physical(h={self.h_coef:g},s={self.s_coef:g};{self.inner.label})"

    def value(self, x):
        w = self.inner.value(x)
        return self.h_coef * w + self.s_coef * np.abs(w) ** 3 * w

    def derivative(self, x):
        w = self.inner.value(x)
        return (self.h_coef + 4.0 * self.s_coef * np.abs(w) ** 3) * self.inner.derivative(x)

    def potential(self, r):
        cd = self.inner.constant_derivative()
        if cd is not None:
            r_arr = _asarray(r)
            val = (0.5 * self.h_coef * cd * r_arr**2
                   + 0.2 * self.s_coef * cd**4 * np.abs(r_arr) ** 5)
            return _match(r, val)
        return super().potential(r)

    def inverse(self, y):
        if not self.inner.invertible:
            raise Unsupported(f"{self.label} has no invertible selection")
        y_arr = np.atleast_1d(_asarray(y))
        # solve h*w + s*|w|^3*w = y for w, then invert the inner graph
        outer = _OuterRadiation(self.h_coef, self.s_coef)
        w = _inverse_bisect(outer, y_arr)
        out = self.inner.inverse(w)
        return _match(y, out)

    def constants(self):
        inner_c = self.inner.constants()
        if not inner_c.bi_lipschitz:
            return GraphConstants()
        ci, Ci = inner_c.lipschitz_lower, inner_c.lipschitz_upper
        ratio = (Ci / ci) ** 4
        return GraphConstants(
            potential_bound_d1=5.0 * ratio,
            potential_bound_d2=self.h_coef * Ci + self.s_coef * Ci**4,
        )

    def to_sympy(self, var):
        import sympy as sp

        w = self.inner.to_sympy(var)
        return self.h_coef * w + self.s_coef * sp.Abs(w) ** 3 * w


class _OuterRadiation(ScalarGraph):
    """Helper graph w -> h*w + s*|w|^3*w used to invert PhysicalBeta."""

    def __init__(self, h_coef, s_coef):
        self.h_coef = h_coef
        self.s_coef = s_coef
        self.label = "radiation"

    def value(self, w):
        w = _asarray(w)
        return self.h_coef * w + self.s_coef * np.abs(w) ** 3 * w

    def derivative(self, w):
        w = _asarray(w)
        return self.h_coef + 4.0 * self.s_coef * np.abs(w) ** 3


class CompositeSum(ScalarGraph):
    """Pointwise sum of monotone graphs (again maximal monotone on R)."""

    def __init__(self, parts: Sequence[ScalarGraph]):
        if not parts:
            raise InvalidArgument("composite graph needs at least one part")
        self.parts = tuple(parts)
        self.label = "sum(" + ",".join(p.label for p in self.parts) + ")"

    @property
    def single_valued(self):  # type: ignore[override]
        return all(p.single_valued for p in self.parts)

    @property
    def invertible(self):  # type: ignore[override]
        return all(p.invertible for p in self.parts)

    def section_bounds(self, x):
        lo = hi = 0.0
        for p in self.parts:
            plo, phi = p.section_bounds(x)
            lo = lo + plo
            hi = hi + phi
        return lo, hi

    def value(self, x):
        return sum(p.value(x) for p in self.parts)

    def derivative(self, x):
        return sum(p.derivative(x) for p in self.parts)

    def potential(self, r):
        return sum(p.potential(r) for p in self.parts)

    def constants(self):
        parts = [p.constants() for p in self.parts]

        def total(attr):
            vals = [getattr(c, attr) for c in parts]
            return None if any(v is None for v in vals) else sum(vals)

        lower = [c.lipschitz_lower for c in parts]
        return GraphConstants(
            lipschitz_lower=None if any(v is None for v in lower) else sum(lower),
            lipschitz_upper=total("lipschitz_upper"),
            linear_bound_c1=total("linear_bound_c1"),
            linear_bound_c2=total("linear_bound_c2"),
        )

    def to_sympy(self, var):
        return sum(p.to_sympy(var) for p in self.parts)


class ScaledGraph(ScalarGraph):
    """The graph x -> factor*graph(x) for factor > 0."""

    def __init__(self, base: ScalarGraph, factor: float):
        if not factor > 0.0:
            raise InvalidArgument("scaling factor must be positive")
        self.base = base
        self.factor = float(factor)
        self.label = f"{factor:g}*{base.label}"

    @property
    def single_valued(self):  # type: ignore[override]
        return self.base.single_valued

    @property
    def invertible(self):  # type: ignore[override]
        return self.base.invertible

    def section_bounds(self, x):
        lo, hi = self.base.section_bounds(x)
        return self.factor * lo, self.factor * hi

    def value(self, x):
        return self.factor * self.base.value(x)

    def derivative(self, x):
        return self.factor * self.base.derivative(x)

    def constant_derivative(self):
        cd = self.base.constant_derivative()
        return None if cd is None else self.factor * cd

    def potential(self, r):
        return self.factor * self.base.potential(r)

    def inverse(self, y):
        return self.base.inverse(_asarray(y) / self.factor)

    def constants(self):
        c = self.base.constants()

        def scale(v):
            return None if v is None else self.factor * v

        return GraphConstants(
            lipschitz_lower=scale(c.lipschitz_lower),
            lipschitz_upper=scale(c.lipschitz_upper),
            linear_bound_c1=scale(c.linear_bound_c1),
            linear_bound_c2=scale(c.linear_bound_c2),
            potential_bound_d1=c.potential_bound_d1,
            potential_bound_d2=scale(c.potential_bound_d2),
        )

    def to_sympy(self, var):
        return self.factor * self.base.to_sympy(var)


class YosidaGraph(ScalarGraph):
    """The Yosida approximation of a base graph, viewed as a graph itself."""

    def __init__(self, base: ScalarGraph, mu: float):
        if not mu > 0.0:
            raise InvalidArgument("regularization parameter must be positive")
        self.base = base
        self.mu = float(mu)
        self.label = f"yosida({base.label},{mu:g})"

    def value(self, x):
        return yosida(self.base, self.mu, x)

    def derivative(self, x):
        return yosida_derivative(self.base, self.mu, x)

    def potential(self, r):
        return moreau_envelope(self.base, self.mu, r)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def resolvent(graph: ScalarGraph, lam: float, x):
    """Resolvent ``(I + lam*graph)^(-1)`` evaluated at x, lam > 0."""
    if not lam > 0.0:
        raise InvalidArgument("resolvent needs lam > 0")
    return graph.resolvent(lam, x)


def yosida(graph: ScalarGraph, lam: float, x):
    """Yosida approximation ``(x - J_lam(x))/lam``."""
    if not lam > 0.0:
        raise InvalidArgument("yosida needs lam > 0")
    x_arr = _asarray(x)
    return _match(x, (x_arr - _asarray(graph.resolvent(lam, x_arr))) / lam)


def yosida_derivative(graph: ScalarGraph, lam: float, x):
    """A.e. derivative of the Yosida approximation, in [0, 1/lam]."""
    if not lam > 0.0:
        raise InvalidArgument("yosida needs lam > 0")
    j = _asarray(graph.resolvent(lam, _asarray(x)))
    with np.errstate(all="ignore"):
        d = _asarray(graph.derivative(j))
        out = np.where(np.isinf(d), 1.0 / lam, d / (1.0 + lam * d))
    return _match(x, out)


def minimal_section(graph: ScalarGraph, x):
    """Minimum-norm element of graph(x)."""
    return _match(x, graph.minimal_section(x))


def potential(graph: ScalarGraph, r):
    """Convex potential of the graph, zero at the origin."""
    return graph.potential(r)


def moreau_envelope(graph: ScalarGraph, lam: float, x):
    """Quadratic inf-convolution of the potential; minimum sits at J_lam(x)."""
    if not lam > 0.0:
        raise InvalidArgument("moreau envelope needs lam > 0")
    x_arr = _asarray(x)
    j = _asarray(graph.resolvent(lam, x_arr))
    a_lam = (x_arr - j) / lam
    return _match(x, 0.5 * lam * a_lam**2 + _asarray(graph.potential(j)))


def conjugate_potential(graph: ScalarGraph, y):
    """Convex conjugate of the potential at y, via the inverse selection.

    For a single-valued strictly increasing graph the supremum defining
    the conjugate is attained at the inverse point ``x`` with
    ``graph(x) = y``, giving ``y*x - potential(x)``.
    """
    if not (graph.single_valued and graph.invertible):
        raise Unsupported(f"conjugate of {graph.label} needs an invertible selection")
    y_arr = _asarray(y)
    x = _asarray(graph.inverse(y_arr))
    return _match(y, y_arr * x - _asarray(graph.potential(x)))


def truncated_yosida(graph: ScalarGraph, lam: float, eps: float, r):
    """Yosida approximation clamped to [-1/eps, 1/eps]."""
    if not (lam > 0.0 and eps > 0.0):
        raise InvalidArgument("truncated yosida needs lam > 0 and eps > 0")
    cap = 1.0 / eps
    r_arr = _asarray(r)
    return _match(r, np.clip(_asarray(yosida(graph, lam, r_arr)), -cap, cap))


def regularized_value(graph: ScalarGraph, lam: float, eps: float, r):
    """Boundary nonlinearity actually used by the stepper.

    lam > 0 selects the Yosida approximation, lam == 0 the minimal
    section; eps > 0 applies the hard clamp at 1/eps, eps == 0 disables it.
    """
    r_arr = _asarray(r)
    if lam > 0.0:
        out = _asarray(yosida(graph, lam, r_arr))
    else:
        out = _asarray(graph.minimal_section(r_arr))
    if eps > 0.0:
        out = np.clip(out, -1.0 / eps, 1.0 / eps)
    return _match(r, out)


def regularized_derivative(graph: ScalarGraph, lam: float, eps: float, r):
    """Generalized slope of ``regularized_value``, in [0, Lipschitz bound].

    For lam > 0 the regularized map is Lipschitz but only piecewise smooth
    (resolvent dead zones, clamp thresholds); evaluating a branch
    derivative at the resolvent point picks the wrong branch whenever the
    iterate sits within rounding of a kink, which stalls Newton.  A short
    centered difference of the map itself selects a valid element of the
    generalized Jacobian on either side of (or astride) every kink.
    """
    r_arr = _asarray(r)
    if lam > 0.0:
        delta = 1e-6 * np.maximum(1.0, np.abs(r_arr))
        up = _asarray(regularized_value(graph, lam, eps, r_arr + delta))
        dn = _asarray(regularized_value(graph, lam, eps, r_arr - delta))
        return _match(r, np.maximum((up - dn) / (2.0 * delta), 0.0))
    with np.errstate(all="ignore"):
        d = _asarray(graph.derivative(r_arr))
    d = np.where(np.isfinite(d), d, 0.0)
    if eps > 0.0:
        val = _asarray(graph.minimal_section(r_arr))
        d = np.where(np.abs(val) >= 1.0 / eps, 0.0, d)
    return _match(r, d)


def regularized_potential(graph: ScalarGraph, lam: float, r):
    """Potential of the working nonlinearity: Moreau envelope, or the
    potential itself when lam == 0."""
    if lam > 0.0:
        return moreau_envelope(graph, lam, r)
    return graph.potential(r)


# ---------------------------------------------------------------------------
# Constants audit and diagnostic property suite
# ---------------------------------------------------------------------------

_DEFAULT_AUDIT_SAMPLES = np.concatenate([
    np.linspace(-8.0, 8.0, 33),
    np.array([-0.73, -0.11, 0.07, 0.42, 1.9, 3.3]),
])


def audit_constants(graph: ScalarGraph, samples=None, rel_slack: float = 1e-9) -> None:
    """Cross-check declared constants against sampled behaviour.

    Raises GraphAuditError on any violation; silence means the declared
    constants are safe to plug into bound formulas.
    """
    x = np.sort(_asarray(samples if samples is not None else _DEFAULT_AUDIT_SAMPLES))
    c = graph.constants()
    sec = _asarray(graph.minimal_section(x))
    pot = _asarray(graph.potential(x))
    slack = rel_slack * np.maximum(1.0, np.abs(sec))

    if c.lipschitz_lower is not None or c.lipschitz_upper is not None:
        dx = np.diff(x)
        dv = np.diff(sec)
        if c.lipschitz_lower is not None and np.any(dv < c.lipschitz_lower * dx * (1 - rel_slack) - rel_slack):
            raise GraphAuditError(f"{graph.label}: declared lower Lipschitz bound too large")
        if c.lipschitz_upper is not None and np.any(dv > c.lipschitz_upper * dx * (1 + rel_slack) + rel_slack):
            raise GraphAuditError(f"{graph.label}: declared upper Lipschitz bound too small")
    if c.linear_bound_c1 is not None:
        if np.any(np.abs(sec) > c.linear_bound_c1 * np.abs(x) + c.linear_bound_c2 + slack):
            raise GraphAuditError(f"{graph.label}: linear growth bound violated")
    if c.potential_bound_d1 is not None:
        if np.any(np.abs(sec) > c.potential_bound_d1 * pot + c.potential_bound_d2 + slack):
            raise GraphAuditError(f"{graph.label}: potential growth bound violated")


@dataclass
class PropertyCheck:
    graph: str
    prop: str
    lam: Optional[float]
    x: Optional[float]
    passed: bool
    error: float


@dataclass
class PropertyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def worst_error(self) -> float:
        return max((c.error for c in self.checks), default=0.0)


def _grid_conjugate(graph, xi, anchor):
    """Conjugate value by finite supremum over a grid plus the anchor point."""
    grid = np.concatenate([np.linspace(-12.0, 12.0, 2001), [anchor]])
    vals = grid * xi - _asarray(graph.potential(grid))
    return float(np.max(vals))


def graph_property_suite(graph: ScalarGraph, lam_list: Sequence[float],
                         sample_points: Sequence[float],
                         tol: Optional[float] = None) -> PropertyReport:
    """Sample the standard regularization identities on a grid.

    ``lam_list`` must be strictly decreasing.  Each identity produces one
    check per (lam, x) pair (pair-based identities report the worst
    partner), tagged pass/fail against ``tol``; the default tolerance is
    1e-10 when the graph advertises closed forms and 1e-8 otherwise.
    Purely diagnostic: nothing is mutated and nothing raises on failure.
    """
    lams = [float(l) for l in lam_list]
    if not lams or any(b >= a for a, b in zip(lams, lams[1:])):
        raise InvalidArgument("lam_list must be nonempty and strictly decreasing")
    xs = np.sort(_asarray(sample_points))
    if xs.size == 0:
        raise InvalidArgument("sample_points must be nonempty")
    if tol is None:
        tol = 1e-10 if graph.closed_form else 1e-8
    rep = PropertyReport()
    add = rep.checks.append
    name = graph.label

    a0 = np.abs(_asarray(graph.minimal_section(xs)))
    j_by_lam = {l: _asarray(graph.resolvent(l, xs)) for l in lams}
    a_by_lam = {l: (xs - j_by_lam[l]) / l for l in lams}
    env_by_lam = {
        l: 0.5 * l * a_by_lam[l] ** 2 + _asarray(graph.potential(j_by_lam[l]))
        for l in lams
    }
    pot = _asarray(graph.potential(xs))

    for l in lams:
        j = j_by_lam[l]
        a = a_by_lam[l]
        scale = np.maximum(1.0, np.abs(xs))
        # resolvent nonexpansive / Yosida 1/lam-Lipschitz, worst partner per x
        dxs = np.abs(xs[:, None] - xs[None, :])
        dj = np.abs(j[:, None] - j[None, :])
        da = np.abs(a[:, None] - a[None, :])
        exp_excess = np.max(dj - dxs, axis=1)
        lip_excess = np.max(da - dxs / l, axis=1)
        for i, x in enumerate(xs):
            e = float(exp_excess[i])
            add(PropertyCheck(name, "resolvent_nonexpansive", l, float(x),
                              e <= tol * scale[i], max(e, 0.0)))
            e = float(lip_excess[i])
            add(PropertyCheck(name, "yosida_lipschitz", l, float(x),
                              e <= tol * scale[i] / l, max(e, 0.0)))
        # A_lam(x) lands in graph(J_lam(x))
        lo, hi = graph.section_bounds(j)
        dist = np.maximum(lo - a, a - hi)
        for i, x in enumerate(xs):
            e = float(max(dist[i], 0.0))
            add(PropertyCheck(name, "yosida_in_graph", l, float(x), e <= tol * scale[i], e))
        # dominated by the minimal section
        over = np.abs(a) - a0
        for i, x in enumerate(xs):
            e = float(max(over[i], 0.0))
            add(PropertyCheck(name, "yosida_dominated", l, float(x), e <= tol * scale[i], e))
        # nested regularization collapses: (A_mu)_lam == A_{mu+lam}
        nested = _asarray(yosida(YosidaGraph(graph, l), l, xs))
        direct = _asarray(yosida(graph, 2.0 * l, xs))
        err = np.abs(nested - direct)
        for i, x in enumerate(xs):
            e = float(err[i])
            add(PropertyCheck(name, "resolvent_semigroup", l, float(x), e <= tol * scale[i], e))
        # envelope gradient matches the Yosida approximation; checked as a
        # limit: the central difference either sits at tolerance already or
        # shrinks by the expected factor when h is reduced
        def _fd_error(h):
            env_p = _asarray(moreau_envelope(graph, l, xs + h))
            env_m = _asarray(moreau_envelope(graph, l, xs - h))
            return np.abs((env_p - env_m) / (2.0 * h) - a)

        h1 = 1e-3 * np.maximum(1.0, np.abs(xs))
        err1 = _fd_error(h1)
        err2 = _fd_error(h1 / 8.0)
        gtol = tol * np.maximum(1.0, np.abs(a))
        for i, x in enumerate(xs):
            converging = err2[i] <= max(0.35 * err1[i], gtol[i])
            add(PropertyCheck(name, "envelope_gradient", l, float(x),
                              bool(converging), float(err2[i])))

    # |A_lam x| cannot decrease as lam decreases
    for la, lb in zip(lams, lams[1:]):
        mono = np.abs(a_by_lam[la]) - np.abs(a_by_lam[lb])
        for i, x in enumerate(xs):
            e = float(max(mono[i], 0.0))
            add(PropertyCheck(name, "yosida_dominated", lb, float(x),
                              e <= tol * max(1.0, abs(x)), e))

    # envelopes increase monotonically to the potential as lam decreases
    for la, lb in zip(lams, lams[1:]):
        gap = env_by_lam[la] - env_by_lam[lb]
        for i, x in enumerate(xs):
            e = float(max(gap[i], 0.0))
            add(PropertyCheck(name, "envelope_monotone", lb, float(x),
                              e <= tol * max(1.0, abs(pot[i])), e))
    over = env_by_lam[lams[-1]] - pot
    under = pot - env_by_lam[lams[-1]] - lams[-1] * a0**2
    for i, x in enumerate(xs):
        e = float(max(over[i], 0.0))
        add(PropertyCheck(name, "envelope_monotone", lams[-1], float(x),
                          e <= tol * max(1.0, abs(pot[i])), e))
        e = float(max(under[i], 0.0))
        add(PropertyCheck(name, "envelope_converges", lams[-1], float(x),
                          e <= max(tol, 1e-8) * max(1.0, abs(pot[i])), e))

    # conjugate duality: potential(x) + conjugate(xi) == x*xi on the graph
    sec = _asarray(graph.minimal_section(xs))
    use_closed = graph.single_valued and graph.invertible
    for i, x in enumerate(xs):
        xi = float(sec[i])
        if use_closed:
            conj = float(conjugate_potential(graph, xi))
        else:
            conj = _grid_conjugate(graph, xi, float(x))
        e = abs(float(pot[i]) + conj - float(x) * xi)
        add(PropertyCheck(name, "fenchel_young", None, float(x),
                          e <= tol * max(1.0, abs(x * xi)), e))

    return rep


#: graphs exercised by default in diagnostics and the command line front end
def builtin_graphs():
    return [
        Linear(2.0),
        SaturatingBiLipschitz(1.0, 1.0),
        PhysicalBeta(1.0, 1.0),
        Power(3.0),
        Sign(),
    ]
