"""P1 finite element operators for density-dependent plane elasticity.

State operator: the stiffness matrix of the elasticity form with Lame moduli
interpolated as ``m0 + rho^p (m1 - m0)`` from the vertex density field.
Also assembles the traction load and the density-space mass/stiffness pair
used by the phase-field regularization.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .mesh import EdgeTag, TriMesh, DomainSpec, dirichlet_vertex_set
from .sparse import SparseMatrix, solve_direct

__all__ = [
    "MaterialModel",
    "DofMap",
    "default_material",
    "make_dofmap",
    "element_geometry",
    "assemble_state_operator",
    "assemble_traction_load",
    "assemble_gl_operators",
    "solve_state",
    "QUAD_BARY",
    "QUAD_W",
]

# Six-point symmetric triangle rule, exact through polynomial degree 4.
# The density is P1, so with the default interpolation exponent 3 every
# density-dependent volume term (rho^3, rho^2 phi_i, rho phi_i phi_j) is
# integrated exactly.  The identical rule is applied in all derivative
# assemblies; residual and Jacobian therefore discretize the same function.
_QA = 0.445948490915965
_QB = 0.091576213509771
QUAD_BARY = np.array(
    [
        [1.0 - 2.0 * _QA, _QA, _QA],
        [_QA, 1.0 - 2.0 * _QA, _QA],
        [_QA, _QA, 1.0 - 2.0 * _QA],
        [1.0 - 2.0 * _QB, _QB, _QB],
        [_QB, 1.0 - 2.0 * _QB, _QB],
        [_QB, _QB, 1.0 - 2.0 * _QB],
    ]
)
QUAD_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)

# Exact P1 mass matrix on the reference triangle, scaled by area later.
_MASS3 = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True)
class MaterialModel:
    """Two-phase Lame moduli with power-law interpolation in the density."""

    lambda0: float
    lambda1: float
    mu0: float
    mu1: float
    exponent: float = 3.0

    def __post_init__(self):
        if min(self.lambda0, self.lambda1, self.mu0, self.mu1) <= 0:
            raise ValueError("material: all moduli must be positive")
        if self.lambda1 <= self.lambda0 or self.mu1 <= self.mu0:
            raise ValueError("material: phase-1 moduli must exceed phase-0 moduli")
        if self.exponent < 1:
            raise ValueError("material: exponent must be at least 1")


def default_material() -> MaterialModel:
    """Stiff phase and near-void ersatz phase, four orders of magnitude apart."""
    return MaterialModel(lambda0=7.498e-5, lambda1=0.750, mu0=3.750e-5, mu1=0.375)


@dataclass(frozen=True, eq=False)
class DofMap:
    """Vertex density DOFs plus reduced displacement DOFs.

    Clamped vertices carry no displacement index (entry -1); the remaining
    vertices get two consecutive indices in vertex order.
    """

    n_density: int
    disp_index: np.ndarray  # (n_v, 2), -1 on clamped vertices
    n_disp: int

    def __post_init__(self):
        self.disp_index.setflags(write=False)


def make_dofmap(mesh: TriMesh) -> DofMap:
    fixed = dirichlet_vertex_set(mesh)
    disp = np.full((mesh.n_vertices, 2), -1, dtype=np.int64)
    k = 0
    for v in range(mesh.n_vertices):
        if v not in fixed:
            disp[v, 0] = k
            disp[v, 1] = k + 1
            k += 2
    return DofMap(n_density=mesh.n_vertices, disp_index=disp, n_disp=k)


@dataclass(frozen=True, eq=False)
class _ElementTables:
    tri: np.ndarray    # (E, 3)
    area: np.ndarray   # (E,)
    grads: np.ndarray  # (E, 3, 2) hat-function gradients
    div6: np.ndarray   # (E, 6) divergence of the six local displacement modes
    dmat6: np.ndarray  # (E, 6, 6) div outer div
    gmat6: np.ndarray  # (E, 6, 6) 2 E(psi_a):E(psi_b)


_GEOMETRY_CACHE: "weakref.WeakKeyDictionary[TriMesh, _ElementTables]" = weakref.WeakKeyDictionary()


def element_geometry(mesh: TriMesh) -> _ElementTables:
    """Per-element geometry tables, cached per mesh."""
    tables = _GEOMETRY_CACHE.get(mesh)
    if tables is not None:
        return tables
    tri = np.asarray(mesh.triangles, dtype=np.int64)
    v0 = mesh.vertices[tri[:, 0]]
    v1 = mesh.vertices[tri[:, 1]]
    v2 = mesh.vertices[tri[:, 2]]
    d1 = v1 - v0
    d2 = v2 - v0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    ne = tri.shape[0]
    grads = np.empty((ne, 3, 2))
    grads[:, 0, 0] = v1[:, 1] - v2[:, 1]
    grads[:, 0, 1] = v2[:, 0] - v1[:, 0]
    grads[:, 1, 0] = v2[:, 1] - v0[:, 1]
    grads[:, 1, 1] = v0[:, 0] - v2[:, 0]
    grads[:, 2, 0] = v0[:, 1] - v1[:, 1]
    grads[:, 2, 1] = v1[:, 0] - v0[:, 0]
    grads /= det[:, None, None]
    div6 = grads.reshape(ne, 6)
    dmat6 = np.einsum("ea,eb->eab", div6, div6)
    gg = np.einsum("eik,ejk->eij", grads, grads)
    gmat6 = np.zeros((ne, 6, 6))
    gmat6[:, 0::2, 0::2] = gg
    gmat6[:, 1::2, 1::2] = gg
    gmat6 += np.einsum("eib,eja->eiajb", grads, grads).reshape(ne, 6, 6)
    tables = _ElementTables(tri, area, grads, div6, dmat6, gmat6)
    _GEOMETRY_CACHE[mesh] = tables
    return tables


def local_displacements(dofmap: DofMap, tri: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Gather a reduced displacement vector to (E, 6) local values, zero where clamped."""
    idx = dofmap.disp_index[tri]  # (E, 3, 2)
    out = vec[np.maximum(idx, 0)]
    out[idx < 0] = 0.0
    return out.reshape(tri.shape[0], 6)


def _effective_weights(geo: _ElementTables, material: MaterialModel, rho: np.ndarray):
    """Per-element integrals of the interpolated moduli: int_T lambda(rho), int_T mu(rho)."""
    rho_q = rho[geo.tri] @ QUAD_BARY.T  # (E, Q)
    int_rho_p = geo.area * ((rho_q ** material.exponent) @ QUAD_W)
    lam_w = material.lambda0 * geo.area + (material.lambda1 - material.lambda0) * int_rho_p
    mu_w = material.mu0 * geo.area + (material.mu1 - material.mu0) * int_rho_p
    return lam_w, mu_w


def assemble_state_operator(mesh: TriMesh, dofmap: DofMap, material: MaterialModel,
                            rho: np.ndarray) -> SparseMatrix:
    """Reduced elasticity stiffness K(rho) on the free displacement DOFs."""
    geo = element_geometry(mesh)
    rho = np.asarray(rho, dtype=np.float64)
    lam_w, mu_w = _effective_weights(geo, material, rho)
    ke = lam_w[:, None, None] * geo.dmat6 + mu_w[:, None, None] * geo.gmat6
    gdof = dofmap.disp_index[geo.tri].reshape(-1, 6)
    rows = np.broadcast_to(gdof[:, :, None], ke.shape)
    cols = np.broadcast_to(gdof[:, None, :], ke.shape)
    keep = (rows >= 0) & (cols >= 0)
    return SparseMatrix.from_triplets(dofmap.n_disp, dofmap.n_disp,
                                      rows[keep], cols[keep], ke[keep])


def assemble_traction_load(mesh: TriMesh, dofmap: DofMap, spec: DomainSpec) -> np.ndarray:
    """Edge-wise P1 trace integral of the traction over the loaded boundary."""
    f = np.zeros(dofmap.n_disp)
    g = np.asarray(spec.traction, dtype=np.float64)
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        if tag != int(EdgeTag.NEUMANN_TRACTION):
            continue
        h = float(np.linalg.norm(mesh.vertices[b] - mesh.vertices[a]))
        for v in (a, b):
            for d in range(2):
                k = dofmap.disp_index[v, d]
                if k >= 0:
                    f[k] += 0.5 * h * g[d]
    return f


def assemble_gl_operators(mesh: TriMesh, dofmap: DofMap):
    """Density-space stiffness, mass, and hat-function volume vector.

    Returns ``(k_rho, mass, phi_vol)`` with ``phi_vol[i]`` the integral of the
    i-th hat function; entries sum to the domain area.
    """
    geo = element_geometry(mesh)
    n = dofmap.n_density
    gg = np.einsum("eik,ejk->eij", geo.grads, geo.grads)
    k_vals = geo.area[:, None, None] * gg
    m_vals = geo.area[:, None, None] * _MASS3
    rows = np.broadcast_to(geo.tri[:, :, None], k_vals.shape)
    cols = np.broadcast_to(geo.tri[:, None, :], k_vals.shape)
    k_rho = SparseMatrix.from_triplets(n, n, rows.ravel(), cols.ravel(), k_vals.ravel())
    mass = SparseMatrix.from_triplets(n, n, rows.ravel(), cols.ravel(), m_vals.ravel())
    phi_vol = np.zeros(n)
    np.add.at(phi_vol, geo.tri.ravel(), np.repeat(geo.area / 3.0, 3))
    return k_rho, mass, phi_vol


def solve_state(mesh: TriMesh, dofmap: DofMap, material: MaterialModel,
                rho: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Displacement solving K(rho) u = f."""
    return solve_direct(assemble_state_operator(mesh, dofmap, material, rho), f)
