"""Line-oriented ``key = value`` configuration grammar.

Sections are introduced by ``[name]``; values are numbers, bare words,
quoted strings, bracketed lists or calls like ``linear(2.0)`` and
``physical(h=1.0, s=1.0)``.  Parsing is strict by default: unknown
sections or keys are errors, so silently ignored physics cannot happen.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import sympy

from . import graphs as gr
from .errors import ParseError, ValidationError
from .fem import Mesh, build_mesh_1d, build_mesh_rect
from .stepper import ProblemSpec, SolverConfig

COMMANDS = ("graph-check", "solve", "continuation", "convergence", "dependence")


# ---------------------------------------------------------------------------
# Value grammar
# ---------------------------------------------------------------------------


@dataclass
class Call:
    name: str
    args: list
    kwargs: dict


_TOKEN_RE = re.compile(r"""
    \s*(
        -?\d+\.?\d*(?:[eE][+-]?\d+)?   # number
      | [A-Za-z_][A-Za-z0-9_\-]*       # word
      | "[^"]*"                        # string
      | [()\[\],=]                     # punctuation
    )
""", re.VERBOSE)


def _tokenize(text: str, line_no: int):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise ParseError(f"cannot tokenize {text[pos:].strip()!r}", line_no)
            break
        out.append(m.group(1))
        pos = m.end()
    return out


class _ValueParser:
    def __init__(self, tokens, line_no):
        self.tokens = tokens
        self.i = 0
        self.line_no = line_no

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ParseError(f"expected {expected or 'a value'}, got {tok!r}", self.line_no)
        self.i += 1
        return tok

    def parse(self):
        value = self.value()
        if self.peek() is not None:
            raise ParseError(f"trailing input {self.peek()!r}", self.line_no)
        return value

    def value(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("missing value", self.line_no)
        if tok == "[":
            return self.list_value()
        if tok.startswith('"'):
            self.take()
            return tok[1:-1]
        if re.fullmatch(r"-?\d+\.?\d*(?:[eE][+-]?\d+)?", tok):
            self.take()
            return float(tok)
        word = self.take()
        if self.peek() == "(":
            return self.call_value(word)
        lowered = word.lower()
        if lowered in ("on", "true", "yes"):
            return True
        if lowered in ("off", "false", "no"):
            return False
        return word

    def list_value(self):
        self.take("[")
        items = []
        if self.peek() == "]":
            self.take("]")
            return items
        items.append(self.value())
        while self.peek() == ",":
            self.take(",")
            items.append(self.value())
        self.take("]")
        return items

    def call_value(self, name):
        self.take("(")
        args, kwargs = [], {}
        if self.peek() != ")":
            while True:
                tok = self.peek()
                if (tok is not None and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok)
                        and self.i + 1 < len(self.tokens)
                        and self.tokens[self.i + 1] == "="):
                    key = self.take()
                    self.take("=")
                    kwargs[key] = self.value()
                else:
                    if kwargs:
                        raise ParseError("positional argument after keyword", self.line_no)
                    args.append(self.value())
                if self.peek() == ",":
                    self.take(",")
                    continue
                break
        self.take(")")
        return Call(name, args, kwargs)


def _parse_sections(text: str):
    """Split the raw text into {section: {key: (value, line_no)}}."""
    sections = {"": {}}
    current = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", line_no)
            current = line[1:-1].strip()
            if not current:
                raise ParseError("empty section name", line_no)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line_no)
        key, _, rhs = line.partition("=")
        key = key.strip()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
            raise ParseError(f"bad key {key!r}", line_no)
        if key in sections[current]:
            raise ParseError(f"duplicate key {key!r}", line_no)
        tokens = _tokenize(rhs.strip(), line_no)
        value = _ValueParser(tokens, line_no).parse()
        sections[current][key] = (value, line_no)
    return sections


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _build_graph(value, line_no, gamma: Optional[gr.ScalarGraph] = None) -> gr.ScalarGraph:
    if isinstance(value, str) and value == "sign":
        return gr.Sign()
    if not isinstance(value, Call):
        raise ValidationError(f"line {line_no}: expected a graph constructor")
    name = value.name
    try:
        if name == "linear":
            return gr.Linear(*value.args, **value.kwargs)
        if name == "saturating":
            return gr.SaturatingBiLipschitz(*value.args, **value.kwargs)
        if name == "power":
            return gr.Power(*value.args, **value.kwargs)
        if name == "sign":
            return gr.Sign()
        if name == "physical":
            kwargs = dict(value.kwargs)
            h_coef = kwargs.pop("h", value.args[0] if value.args else None)
            s_coef = kwargs.pop("s", value.args[1] if len(value.args) > 1 else None)
            if kwargs:
                raise ValidationError(f"unknown arguments {sorted(kwargs)}")
            if h_coef is None or s_coef is None:
                raise ValidationError("physical(...) needs h and s")
            return gr.PhysicalBeta(h_coef, s_coef, inner=gamma)
        if name == "composite":
            parts = [_build_graph(a, line_no, gamma) for a in value.args]
            return gr.CompositeSum(parts)
    except (TypeError, ValidationError) as exc:
        raise ValidationError(f"line {line_no}: bad graph {name}: {exc}") from exc
    raise ValidationError(f"line {line_no}: unknown graph kind {name!r}")


def _build_mesh(value, line_no) -> Mesh:
    if not isinstance(value, Call):
        raise ValidationError(f"line {line_no}: expected interval(...) or rect(...)")
    try:
        if value.name == "interval":
            kwargs = dict(value.kwargs)
            side = kwargs.pop("gamma1", "right")
            if kwargs:
                raise ValidationError(f"unknown arguments {sorted(kwargs)}")
            length, n = value.args
            return build_mesh_1d(float(length), int(n), str(side))
        if value.name == "rect":
            args = list(value.args)
            lateral = True
            if args and isinstance(args[-1], str):
                flag = args.pop()
                if flag not in ("lateral", "none"):
                    raise ValidationError(f"rect boundary flag must be lateral or none, got {flag!r}")
                lateral = flag == "lateral"
            if "lateral" in value.kwargs:
                lateral = bool(value.kwargs["lateral"])
            lx, ly, nx, ny = args
            return build_mesh_rect(float(lx), float(ly), int(nx), int(ny), lateral)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"line {line_no}: bad domain: {exc}") from exc
    raise ValidationError(f"line {line_no}: unknown domain kind {value.name!r}")


def _expr_field(expr_text: str, mesh: Mesh, line_no: int, time_dependent: bool):
    x, y, t = sympy.symbols("x y t")
    allowed = {x, t} if mesh.dim == 1 else {x, y, t}
    if not time_dependent:
        allowed = allowed - {t}
    try:
        expr = sympy.sympify(expr_text)
    except (sympy.SympifyError, SyntaxError) as exc:
        raise ValidationError(f"line {line_no}: bad expression: {exc}") from exc
    extra = expr.free_symbols - allowed
    if extra:
        raise ValidationError(f"line {line_no}: unexpected symbols {extra} in expression")
    args = (x, t) if mesh.dim == 1 else (x, y, t)
    fn = sympy.lambdify(args, expr, "numpy")
    coords = (mesh.nodes,) if mesh.dim == 1 else (mesh.nodes[:, 0], mesh.nodes[:, 1])

    if time_dependent:
        def field_fn(tv: float) -> np.ndarray:
            return np.broadcast_to(
                np.asarray(fn(*coords, tv), dtype=float), (mesh.n_nodes,)).copy()
        return field_fn
    vals = np.broadcast_to(np.asarray(fn(*coords, 0.0), dtype=float), (mesh.n_nodes,)).copy()
    return vals


def _build_data_field(value, mesh, line_no, beta=None, time_dependent=True):
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, Call):
        if value.name == "constant":
            (c,) = value.args
            return float(c)
        if value.name == "expr":
            (text,) = value.args
            return _expr_field(str(text), mesh, line_no, time_dependent)
        if value.name == "beta_of":
            if beta is None:
                raise ValidationError(f"line {line_no}: beta_of needs a boundary graph")
            (u_b,) = value.args
            return float(np.asarray(beta.minimal_section(float(u_b))))
    raise ValidationError(f"line {line_no}: expected constant(...), expr(...) or beta_of(...)")


_PROBLEM_KEYS = {"domain", "c0", "gamma", "beta", "g", "h", "u0", "T"}
_SOLVER_KEYS = {"tau", "lambda_schedule", "epsilon", "picard_damping", "picard_tol",
                "newton_tol", "max_iters", "solver_kind", "lambda_mass_term",
                "smooth_u0_lambda"}
_GRAPH_CHECK_KEYS = {"lambdas", "samples", "tolerance"}
_CONVERGENCE_KEYS = {"dim", "length", "gamma1", "c0", "gamma", "beta", "T",
                     "exact_space", "exact_time", "space_levels", "time_levels",
                     "fine_space", "fine_time"}

_SECTION_KEYS = {
    "problem": _PROBLEM_KEYS,
    "problem2": _PROBLEM_KEYS,
    "solver": _SOLVER_KEYS,
    "graph_check": _GRAPH_CHECK_KEYS,
    "convergence": _CONVERGENCE_KEYS,
}

_REQUIRED_SECTIONS = {
    "graph-check": (),
    "solve": ("problem", "solver"),
    "continuation": ("problem", "solver"),
    "convergence": ("convergence", "solver"),
    "dependence": ("problem", "problem2", "solver"),
}


@dataclass
class RunConfig:
    command: str
    strict: bool = True
    out_dir: str = "."
    dump_mesh: bool = False
    problem: Optional[ProblemSpec] = None
    problem2: Optional[ProblemSpec] = None
    solver: Optional[SolverConfig] = None
    graph_check: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _build_problem(entries, strict, warnings) -> ProblemSpec:
    known = {k: v for k, v in entries.items() if k in _PROBLEM_KEYS}
    missing = {"domain", "gamma", "beta", "T"} - set(known)
    if missing:
        raise ValidationError(f"problem section missing keys {sorted(missing)}")
    mesh = _build_mesh(*known["domain"])
    gamma = _build_graph(*known["gamma"])
    beta = _build_graph(known["beta"][0], known["beta"][1], gamma=gamma)
    c0 = float(known["c0"][0]) if "c0" in known else 1.0
    T = float(known["T"][0])

    def datum(key, time_dependent=True):
        if key not in known:
            return None
        return _build_data_field(known[key][0], mesh, known[key][1],
                                 beta=beta, time_dependent=time_dependent)

    u0 = datum("u0", time_dependent=False)
    return ProblemSpec(mesh=mesh, c0=c0, gamma=gamma, beta=beta,
                       g=datum("g"), h=datum("h"),
                       u0=0.0 if u0 is None else u0, T=T)


def _build_solver(entries) -> SolverConfig:
    kwargs = {}
    for key, (value, line_no) in entries.items():
        if key == "lambda_schedule":
            sched = value if isinstance(value, list) else [value]
            kwargs["lambda_schedule"] = tuple(float(v) for v in sched)
        elif key == "lambda_mass_term":
            kwargs["use_lambda_mass"] = bool(value)
        elif key == "max_iters":
            kwargs[key] = int(value)
        elif key == "solver_kind":
            kwargs[key] = str(value)
        else:
            kwargs[key] = float(value)
    if "tau" not in kwargs:
        raise ValidationError("solver section must set tau")
    return SolverConfig(**kwargs)


def parse_config(text: str, command: str, strict: bool = True) -> RunConfig:
    """Parse and fully validate a configuration for one command."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    sections = _parse_sections(text)
    warnings: list = []

    stray = {k: v for k, v in sections.get("", {}).items()}
    if stray:
        msg = f"keys outside any section: {sorted(stray)}"
        if strict:
            raise ValidationError(msg)
        warnings.append(msg)
    for name, entries in sections.items():
        if not name:
            continue
        if name not in _SECTION_KEYS:
            msg = f"unknown section [{name}]"
            if strict:
                raise ValidationError(msg)
            warnings.append(msg)
            continue
        unknown = set(entries) - _SECTION_KEYS[name]
        if unknown:
            msg = f"unknown keys in [{name}]: {sorted(unknown)}"
            if strict:
                raise ValidationError(msg)
            warnings.append(msg)

    for required in _REQUIRED_SECTIONS[command]:
        if required not in sections:
            raise ValidationError(f"command {command} needs a [{required}] section")

    rc = RunConfig(command=command, strict=strict, warnings=warnings)
    if "problem" in sections and command != "graph-check":
        rc.problem = _build_problem(sections["problem"], strict, warnings)
    if "problem2" in sections and command == "dependence":
        rc.problem2 = _build_problem(sections["problem2"], strict, warnings)
    if "solver" in sections and command != "graph-check":
        rc.solver = _build_solver(sections["solver"])
    if command == "continuation" and rc.solver is not None:
        if len(rc.solver.lambda_schedule) < 2:
            raise ValidationError("continuation needs at least two lambda values")

    if command == "graph-check":
        gc = {}
        entries = sections.get("graph_check", {})
        lambdas = entries.get("lambdas", ([1.0, 0.5, 0.25, 0.125], 0))[0]
        gc["lambdas"] = [float(v) for v in (lambdas if isinstance(lambdas, list) else [lambdas])]
        samples = entries.get("samples", (None, 0))[0]
        gc["samples"] = (np.linspace(-3.0, 3.0, 25) if samples is None
                         else np.asarray([float(v) for v in samples]))
        tol = entries.get("tolerance", (None, 0))[0]
        gc["tolerance"] = None if tol is None else float(tol)
        rc.graph_check = gc

    if command == "convergence":
        entries = sections["convergence"]

        def need(key):
            if key not in entries:
                raise ValidationError(f"[convergence] missing key {key!r}")
            return entries[key]

        dim = int(need("dim")[0])
        if dim not in (1, 2):
            raise ValidationError("[convergence] dim must be 1 or 2")
        gamma = _build_graph(*need("gamma"))
        beta = _build_graph(need("beta")[0], need("beta")[1], gamma=gamma)
        conv = {
            "dim": dim,
            "length": float(entries.get("length", (1.0, 0))[0]),
            "gamma1": str(entries.get("gamma1", ("right", 0))[0]),
            "c0": float(entries.get("c0", (1.0, 0))[0]),
            "gamma": gamma,
            "beta": beta,
            "T": float(need("T")[0]),
            "exact_space": str(need("exact_space")[0]),
            "exact_time": str(need("exact_time")[0]),
            "space_levels": [int(v) for v in need("space_levels")[0]],
            "time_levels": [int(v) for v in need("time_levels")[0]],
            "fine_space": int(need("fine_space")[0]),
            "fine_time": int(need("fine_time")[0]),
        }
        rc.convergence = conv

    return rc
