"""P1 finite elements on intervals and structured rectangles.

The boundary is partitioned into an active part (label ``GAMMA1``), which
carries the nonlinear flux, and an insulated part (``GAMMA0``).  Assembly
produces a row-sum lumped mass diagonal, the exact P1 stiffness matrix and
a lumped boundary-mass diagonal supported on the active nodes.  Lumping
diagonalizes all nodewise nonlinear terms, which is what makes the
resolvent-based per-step solves well posed.

Both mesh families have nonnegative stiffness edge weights (intervals
trivially, rectangles because the triangles are right triangles), a fact
the energy monitors rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DegenerateElement,
    DimensionMismatch,
    EmptyBoundary,
    InvalidArgument,
)

INTERIOR = 0
GAMMA0 = 1
GAMMA1 = 2

_DENSE_EIG_LIMIT = 1400


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh with a labeled boundary partition."""

    dim: int
    nodes: np.ndarray              # (n,) in 1-D, (n, 2) in 2-D
    elements: np.ndarray           # (m, dim+1) vertex indices
    boundary_labels: np.ndarray    # per node: INTERIOR / GAMMA0 / GAMMA1
    boundary_facets: Tuple[Tuple[Tuple[int, ...], int], ...]  # (vertex ids, label)
    element_sizes: np.ndarray      # length / area per element

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def gamma1_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_labels == GAMMA1)

    @property
    def gamma0_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_labels == GAMMA0)


@dataclass
class AssembledOperators:
    """Lumped mass, stiffness and boundary mass for one mesh."""

    mesh: Mesh
    mass: np.ndarray               # lumped diagonal, volume measure
    stiffness: sp.csr_matrix
    boundary_mass: np.ndarray      # lumped diagonal, active-boundary measure
    domain_measure: float
    gamma1_measure: float
    _trace_cache: Optional[float] = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.mass.shape[0]


_GAMMA1_SIDES = ("left", "right", "both", "none")


def build_mesh_1d(length: float, n_elems: int, gamma1_side: str = "right") -> Mesh:
    """Uniform mesh of [0, L]; endpoints labeled by ``gamma1_side``.

    ``none`` labels both endpoints as insulated (pure zero-flux setup).
    """
    if not length > 0.0:
        raise InvalidArgument("interval length must be positive")
    if n_elems < 1:
        raise InvalidArgument("need at least one element")
    if gamma1_side not in _GAMMA1_SIDES:
        raise InvalidArgument(f"gamma1_side must be one of {_GAMMA1_SIDES}")
    n = n_elems + 1
    nodes = np.linspace(0.0, length, n)
    elements = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    labels = np.zeros(n, dtype=np.int8)
    left = GAMMA1 if gamma1_side in ("left", "both") else GAMMA0
    right = GAMMA1 if gamma1_side in ("right", "both") else GAMMA0
    labels[0] = left
    labels[-1] = right
    facets = (((0,), int(left)), ((n - 1,), int(right)))
    sizes = np.full(n_elems, length / n_elems)
    return Mesh(1, nodes, elements, labels, facets, sizes)


def build_mesh_rect(lx: float, ly: float, nx: int, ny: int,
                    lateral_gamma1: bool = True) -> Mesh:
    """Structured triangulation of [0,Lx] x [0,Ly].

    With ``lateral_gamma1`` the sides x=0 and x=Lx are active boundary
    (corners included); top and bottom are insulated.  Without it the whole
    boundary is insulated.
    """
    if not (lx > 0.0 and ly > 0.0):
        raise InvalidArgument("rectangle sides must be positive")
    if nx < 1 or ny < 1:
        raise InvalidArgument("need at least one subdivision per direction")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(ix, iy):
        return iy * (nx + 1) + ix

    tris = []
    for iy in range(ny):
        for ix in range(nx):
            v00, v10 = nid(ix, iy), nid(ix + 1, iy)
            v01, v11 = nid(ix, iy + 1), nid(ix + 1, iy + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    elements = np.array(tris, dtype=np.int64)

    labels = np.zeros(nodes.shape[0], dtype=np.int8)
    on_x = np.isin(np.arange(nodes.shape[0]) % (nx + 1), [0, nx])
    on_y = (np.arange(nodes.shape[0]) < (nx + 1)) | (np.arange(nodes.shape[0]) >= ny * (nx + 1))
    labels[on_y] = GAMMA0
    labels[on_x] = GAMMA1 if lateral_gamma1 else GAMMA0

    facets = []
    lateral = GAMMA1 if lateral_gamma1 else GAMMA0
    for iy in range(ny):
        facets.append(((nid(0, iy), nid(0, iy + 1)), lateral))
        facets.append(((nid(nx, iy), nid(nx, iy + 1)), lateral))
    for ix in range(nx):
        facets.append(((nid(ix, 0), nid(ix + 1, 0)), GAMMA0))
        facets.append(((nid(ix, ny), nid(ix + 1, ny)), GAMMA0))

    area = (lx / nx) * (ly / ny) / 2.0
    sizes = np.full(elements.shape[0], area)
    return Mesh(2, nodes, elements, labels, tuple(facets), sizes)


def assemble(mesh: Mesh) -> AssembledOperators:
    """Assemble lumped mass, P1 stiffness and lumped active-boundary mass."""
    if np.any(mesh.element_sizes <= 0.0):
        raise DegenerateElement("element with nonpositive measure")
    n = mesh.n_nodes
    mass = np.zeros(n)
    rows, cols, vals = [], [], []

    if mesh.dim == 1:
        for (i, j), h in zip(mesh.elements, mesh.element_sizes):
            mass[i] += h / 2.0
            mass[j] += h / 2.0
            k = 1.0 / h
            rows += [i, i, j, j]
            cols += [i, j, i, j]
            vals += [k, -k, -k, k]
    else:
        pts = mesh.nodes
        for tri, area in zip(mesh.elements, mesh.element_sizes):
            i, j, k = (int(t) for t in tri)
            p = pts[[i, j, k]]
            # gradients of barycentric coordinates
            b = np.array([p[1, 1] - p[2, 1], p[2, 1] - p[0, 1], p[0, 1] - p[1, 1]])
            c = np.array([p[2, 0] - p[1, 0], p[0, 0] - p[2, 0], p[1, 0] - p[0, 0]])
            det = b[0] * c[1] - b[1] * c[0]
            if abs(det) < 1e-300:
                raise DegenerateElement("triangle with zero area")
            local = (np.outer(b, b) + np.outer(c, c)) / (4.0 * area)
            for a_loc, a_glob in enumerate((i, j, k)):
                mass[a_glob] += area / 3.0
                for b_loc, b_glob in enumerate((i, j, k)):
                    rows.append(a_glob)
                    cols.append(b_glob)
                    vals.append(local[a_loc, b_loc])

    stiffness = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    stiffness.sum_duplicates()

    boundary_mass = np.zeros(n)
    gamma1_measure = 0.0
    for facet, label in mesh.boundary_facets:
        if label != GAMMA1:
            continue
        if mesh.dim == 1:
            boundary_mass[facet[0]] += 1.0  # counting measure for endpoints
            gamma1_measure += 1.0
        else:
            i, j = facet
            ln = float(np.linalg.norm(mesh.nodes[j] - mesh.nodes[i]))
            boundary_mass[i] += ln / 2.0
            boundary_mass[j] += ln / 2.0
            gamma1_measure += ln

    return AssembledOperators(
        mesh=mesh,
        mass=mass,
        stiffness=stiffness,
        boundary_mass=boundary_mass,
        domain_measure=float(mass.sum()),
        gamma1_measure=gamma1_measure,
    )


def trace_constant(ops: AssembledOperators) -> float:
    """Sharp discrete constant C with ||z||_boundary <= C ||z||_h1.

    Square root of the largest generalized eigenvalue of the pair
    (boundary mass, mass + stiffness).  Cached on the operator set.
    """
    if ops._trace_cache is not None:
        return ops._trace_cache
    if not np.any(ops.boundary_mass > 0.0):
        raise EmptyBoundary("active boundary has no nodes")
    n = ops.n_nodes
    h1 = sp.diags(ops.mass) + ops.stiffness
    if n <= _DENSE_EIG_LIMIT:
        w = scipy.linalg.eigh(
            np.diag(ops.boundary_mass), h1.toarray(), eigvals_only=True)
        mu = float(w[-1])
    else:
        bm = sp.diags(ops.boundary_mass).tocsc()
        v0 = np.ones(n)
        try:
            w = spla.eigsh(bm, k=1, M=h1.tocsc(), which="LA",
                           v0=v0, return_eigenvectors=False)
            mu = float(w[0])
        except spla.ArpackError:
            mu = _power_iteration(ops.boundary_mass, h1, v0)
    ops._trace_cache = float(np.sqrt(max(mu, 0.0)))
    return ops._trace_cache


def _power_iteration(bm_diag, h1, v0, iters=5000, tol=1e-13):
    solve = spla.factorized(h1.tocsc())
    z = v0 / np.linalg.norm(v0)
    mu = 0.0
    for _ in range(iters):
        w = solve(bm_diag * z)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        z_new = w / nrm
        mu_new = float((z_new * bm_diag * z_new).sum() / (z_new @ (h1 @ z_new)))
        if abs(mu_new - mu) <= tol * max(1.0, abs(mu_new)):
            return mu_new
        z, mu = z_new, mu_new
    return mu


def dump_mesh(mesh: Mesh, node_path, element_path) -> None:
    """Write the node list (with boundary labels) and element list as CSV."""
    label_names = {INTERIOR: "interior", GAMMA0: "gamma0", GAMMA1: "gamma1"}
    with open(node_path, "w", encoding="utf-8") as fh:
        if mesh.dim == 1:
            fh.write("node_id,x,label\n")
            for i, x in enumerate(mesh.nodes):
                fh.write(f"{i},{x:.17g},{label_names[int(mesh.boundary_labels[i])]}\n")
        else:
            fh.write("node_id,x,y,label\n")
            for i, (x, y) in enumerate(mesh.nodes):
                fh.write(f"{i},{x:.17g},{y:.17g},"
                         f"{label_names[int(mesh.boundary_labels[i])]}\n")
    with open(element_path, "w", encoding="utf-8") as fh:
        fh.write("element_id," + ",".join(f"v{j}" for j in range(mesh.dim + 1)) + "\n")
        for e, verts in enumerate(mesh.elements):
            fh.write(f"{e}," + ",".join(str(int(v)) for v in verts) + "\n")


def norms(ops: AssembledOperators, f: np.ndarray) -> dict:
    """Discrete norms of a nodal field: lumped l2, h1, l1 and boundary l2."""
    f = np.asarray(f, dtype=float)
    if f.shape != (ops.n_nodes,):
        raise DimensionMismatch(
            f"field has shape {f.shape}, expected ({ops.n_nodes},)")
    l2_sq = float(f @ (ops.mass * f))
    h1_sq = l2_sq + float(f @ (ops.stiffness @ f))
    return {
        "l2": np.sqrt(max(l2_sq, 0.0)),
        "h1": np.sqrt(max(h1_sq, 0.0)),
        "l1": float(np.sum(ops.mass * np.abs(f))),
        "boundary_l2": np.sqrt(max(float(f @ (ops.boundary_mass * f)), 0.0)),
    }
