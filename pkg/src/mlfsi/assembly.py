"""P1 finite element assembly of the coupled heat / surface-wave / interior-wave system.

State layout (one flat vector):

    x = [ u (fluid interior + interface) | h0 (interface) | w0 (solid interior) | w1 (solid interior) ]

The interface block of u doubles as the surface velocity and as the trace of
the interior-wave velocity; the interface block of the interior-wave
displacement is h0 itself. With that sharing, the kinematic constraints hold
by construction and the composite mass matrix M equals the Gram matrix of the
energy inner product, so the semi-discrete system M x' = A x satisfies the
exact algebraic dissipation identity Re(x^H A x) = -u^H K_f u.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .geometry import FLUID, GAMMA_F, GAMMA_TAGS, SOLID, Mesh
from .linalg import Factorization


def assemble_volume(mesh: Mesh, region) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """P1 mass and stiffness over the tagged region, indexed by mesh vertex.

    Element integrals are exact: the mass matrix uses the closed form
    (V/20)(1 + delta_ij), the stiffness uses the constant barycentric
    gradients of the affine element.
    """
    keep = mesh.tet_regions == region
    if not np.any(keep):
        raise ValueError(f"region {region} has no tetrahedra")
    tets = mesh.tets[keep]
    p = mesh.vertices[tets]                      # (m, 4, 3)
    d = p[:, 1:] - p[:, :1]                      # (m, 3, 3) edge matrix
    vol = np.linalg.det(d) / 6.0
    dinv = np.linalg.inv(d)                      # rows of dinv^T are grad(lambda_1..3)
    grads = np.empty((tets.shape[0], 4, 3))
    grads[:, 1:, :] = np.transpose(dinv, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)

    ke = np.einsum("tid,tjd,t->tij", grads, grads, vol)
    mpat = (np.ones((4, 4)) + np.eye(4)) / 20.0
    me = vol[:, None, None] * mpat

    rows = np.repeat(tets, 4, axis=1).ravel()
    cols = np.tile(tets, (1, 4)).ravel()
    nv = mesh.vertices.shape[0]
    mass = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    stiff = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    return mass, stiff


def _triangle_matrices(pts):
    """Exact P1 mass/stiffness for flat triangles embedded in 3D; (m,3,3) each."""
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    nrm = np.cross(e1, e2)
    area2 = np.linalg.norm(nrm, axis=1)          # = 2 * area
    nhat = nrm / area2[:, None]
    # In-plane gradients: grad(lambda_i) = nhat x (opposite edge) / (2 area)
    opp = np.stack([pts[:, 2] - pts[:, 1], pts[:, 0] - pts[:, 2], pts[:, 1] - pts[:, 0]], axis=1)
    grads = np.cross(nhat[:, None, :], opp) / area2[:, None, None]
    area = 0.5 * area2
    ke = np.einsum("tid,tjd,t->tij", grads, grads, area)
    mpat = (np.ones((3, 3)) + np.eye(3)) / 12.0
    me = area[:, None, None] * mpat
    return me, ke


def assemble_surface(mesh: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """P1 mass and surface-Laplacian stiffness over the interface triangulation.

    All six cube faces assemble into shared vertex unknowns, which is what
    enforces displacement continuity and weak flux matching along face edges.
    Indexed by mesh vertex; rows away from the interface are zero.
    """
    tris = mesh.interface_tris()
    if tris.shape[0] == 0:
        raise ValueError("mesh has no interface triangles")
    me, ke = _triangle_matrices(mesh.vertices[tris])
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    nv = mesh.vertices.shape[0]
    mass = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    stiff = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    return mass, stiff


@dataclass(frozen=True)
class DofMap:
    """Vertex index partitions and the flat state layout built on them.

    Interface vertices are exactly the vertices of the interface triangles;
    a vertex on a cube edge or corner appears in the vertex list of every
    face containing it. Outer-boundary vertices carry no unknown.
    """

    fluid_interior: np.ndarray
    interface: np.ndarray
    solid_interior: np.ndarray
    face_vertices: dict

    @property
    def n_fi(self):
        return self.fluid_interior.size

    @property
    def n_i(self):
        return self.interface.size

    @property
    def n_s(self):
        return self.solid_interior.size

    @property
    def n_u(self):
        return self.n_fi + self.n_i

    @property
    def total(self):
        return self.n_u + self.n_i + 2 * self.n_s

    @property
    def fluid_free(self):
        return np.concatenate([self.fluid_interior, self.interface])

    @property
    def solid_all(self):
        return np.concatenate([self.solid_interior, self.interface])

    @property
    def slice_u(self):
        return slice(0, self.n_u)

    @property
    def slice_h0(self):
        return slice(self.n_u, self.n_u + self.n_i)

    @property
    def slice_w0(self):
        return slice(self.n_u + self.n_i, self.n_u + self.n_i + self.n_s)

    @property
    def slice_w1(self):
        return slice(self.n_u + self.n_i + self.n_s, self.total)

    def interface_local(self, tag):
        """Positions within the interface block of the vertices of face ``tag``."""
        lookup = {v: k for k, v in enumerate(self.interface)}
        return np.array([lookup[v] for v in self.face_vertices[tag]], dtype=np.int64)


def build_dofmap(mesh: Mesh) -> DofMap:
    iface_tris = mesh.tris[mesh.tri_tags != GAMMA_F]
    if iface_tris.shape[0] == 0:
        raise ValueError("mesh has no fluid/solid interface")
    outer = np.unique(mesh.tris[mesh.tri_tags == GAMMA_F])
    interface = np.unique(iface_tris)
    if np.intersect1d(outer, interface).size:
        raise ValueError("outer boundary touches the interface; geometry invalid")

    fluid_verts = np.unique(mesh.tets[mesh.tet_regions == FLUID])
    solid_verts = np.unique(mesh.tets[mesh.tet_regions != FLUID])
    fluid_interior = np.setdiff1d(fluid_verts, np.union1d(outer, interface))
    solid_interior = np.setdiff1d(solid_verts, interface)

    faces = {}
    for tag in GAMMA_TAGS:
        sel = mesh.tri_tags == tag
        if np.any(sel):
            faces[int(tag)] = np.unique(mesh.tris[sel])
    return DofMap(fluid_interior, interface, solid_interior, faces)


@dataclass
class State:
    """Flat coefficient vector plus views on its blocks."""

    dof: DofMap
    vec: np.ndarray

    @classmethod
    def zeros(cls, dof, dtype=float):
        return cls(dof, np.zeros(dof.total, dtype=dtype))

    @classmethod
    def random(cls, dof, seed, dtype=float):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(dof.total)
        if np.dtype(dtype).kind == "c":
            v = v + 1j * rng.standard_normal(dof.total)
        return cls(dof, v.astype(dtype))

    @property
    def u(self):
        return self.vec[self.dof.slice_u]

    @property
    def h0(self):
        return self.vec[self.dof.slice_h0]

    @property
    def w0_int(self):
        return self.vec[self.dof.slice_w0]

    @property
    def w1_int(self):
        return self.vec[self.dof.slice_w1]

    @property
    def trace_u(self):
        return self.u[self.dof.n_fi:]

    @property
    def w0_full(self):
        return np.concatenate([self.w0_int, self.h0])

    @property
    def w1_full(self):
        return np.concatenate([self.w1_int, self.trace_u])

    def copy(self):
        return State(self.dof, self.vec.copy())


def _embed(block, row_off, col_off, shape):
    coo = sp.coo_matrix(block)
    return sp.coo_matrix(
        (coo.data, (coo.row + row_off, coo.col + col_off)), shape=shape
    )


def compose_first_order(dof: DofMap, M_f, K_f, M_G, K_G, M_s, K_s):
    """Composite (M, A) of the first-order system from the restricted blocks.

    M is the Gram matrix of the energy inner product on the shared-trace
    layout; the kinematic rows are premultiplied by the corresponding Gram
    blocks so they fit the same M x' = A x shape.
    """
    n_fi, n_i, n_s, n_u = dof.n_fi, dof.n_i, dof.n_s, dof.n_u
    s_int = slice(0, n_s)
    s_ifc = slice(n_s, n_s + n_i)

    Ms_II = M_s[s_int, s_int]
    Ms_GI, Ms_GG = M_s[s_ifc, s_int], M_s[s_ifc, s_ifc]
    Ks_II, Ks_IG = K_s[s_int, s_int], K_s[s_int, s_ifc]
    Ks_GI, Ks_GG = K_s[s_ifc, s_int], K_s[s_ifc, s_ifc]
    S_G = (K_G + M_G).tocsr()

    G_uu = (M_f + _embed(M_G + Ms_GG, n_fi, n_fi, (n_u, n_u))).tocsr()
    G_uw1 = _embed(Ms_GI, n_fi, 0, (n_u, n_s)).tocsr()
    G_h0h0 = (S_G + Ks_GG).tocsr()

    M = sp.bmat(
        [
            [G_uu, None, None, G_uw1],
            [None, G_h0h0, Ks_GI, None],
            [None, Ks_IG, Ks_II, None],
            [G_uw1.T, None, None, Ms_II],
        ],
        format="csr",
    )

    A = sp.bmat(
        [
            [-K_f, _embed(-G_h0h0, n_fi, 0, (n_u, n_i)), _embed(-Ks_GI, n_fi, 0, (n_u, n_s)), None],
            [_embed(G_h0h0, 0, n_fi, (n_i, n_u)), None, None, Ks_GI],
            [_embed(Ks_IG, 0, n_fi, (n_s, n_u)), None, None, Ks_II],
            [None, -Ks_IG, -Ks_II, None],
        ],
        format="csr",
    )
    return M, A


class SystemMatrices:
    """Assembled blocks, the composite pair (M, A), and cached factorizations.

    Blocks are restricted to their own index sets: fluid matrices to
    [fluid interior, interface], solid matrices to [solid interior,
    interface], surface matrices to the interface.
    """

    def __init__(self, mesh, dof, M_f, K_f, M_G, K_G, M_s, K_s, M, A):
        self.mesh = mesh
        self.dof = dof
        self.M_f, self.K_f = M_f, K_f
        self.M_G, self.K_G = M_G, K_G
        self.M_s, self.K_s = M_s, K_s
        self.M, self.A = M, A

    @cached_property
    def mass_factor(self) -> Factorization:
        return Factorization(self.M)

    def mass_solve(self, rhs):
        return self.mass_factor.solve(rhs)

    @cached_property
    def surface_spectral(self) -> "SurfaceSpectral":
        return SurfaceSpectral(self.K_G, self.M_G)

    def state(self, vec) -> State:
        return State(self.dof, np.asarray(vec))


def _restrict(mat, idx):
    return mat[idx][:, idx].tocsr()


def build_system(mesh: Mesh) -> SystemMatrices:
    """Assemble all blocks and the composite first-order pair for a mesh."""
    dof = build_dofmap(mesh)
    Mf_all, Kf_all = assemble_volume(mesh, FLUID)
    Ms_all, Ks_all = assemble_volume(mesh, SOLID)
    Mg_all, Kg_all = assemble_surface(mesh)

    M_f = _restrict(Mf_all, dof.fluid_free)
    K_f = _restrict(Kf_all, dof.fluid_free)
    M_s = _restrict(Ms_all, dof.solid_all)
    K_s = _restrict(Ks_all, dof.solid_all)
    M_G = _restrict(Mg_all, dof.interface)
    K_G = _restrict(Kg_all, dof.interface)

    M, A = compose_first_order(dof, M_f, K_f, M_G, K_G, M_s, K_s)
    return SystemMatrices(mesh, dof, M_f, K_f, M_G, K_G, M_s, K_s, M, A)


def energy_norm(x: State, sys: SystemMatrices) -> float:
    """Norm of the energy inner product, sqrt(x^H M x)."""
    q = np.vdot(x.vec, sys.M @ x.vec).real
    return float(np.sqrt(max(q, 0.0)))


def h_inner(a: State, b: State, sys: SystemMatrices) -> complex:
    """Energy inner product <a, b>, conjugate-linear in the first argument."""
    return complex(np.vdot(a.vec, sys.M @ b.vec))


def graph_norm(x: State, sys: SystemMatrices) -> float:
    """Energy norm of x plus the energy norm of M^{-1} A x."""
    ax = sys.mass_solve(sys.A @ x.vec)
    return energy_norm(x, sys) + energy_norm(State(sys.dof, ax), sys)


def fluid_gradient_norm(x: State, sys: SystemMatrices) -> float:
    """The dissipation seminorm |grad u| over the fluid region."""
    q = np.vdot(x.u, sys.K_f @ x.u).real
    return float(np.sqrt(max(q, 0.0)))


class SurfaceSpectral:
    """Fractional surface norms from the pencil (K_G + M_G, M_G).

    With generalized eigenpairs (K_G + M_G) v_k = omega_k M_G v_k and the
    v_k M_G-orthonormal, a nodal surface function g has
    |g|_s^2 = sum_k omega_k^s |(V^T M_G g)_k|^2, and a load vector f
    (f_i = <F, phi_i>) has dual norm |F|_{-s}^2 = sum_k omega_k^{-s} |(V^T f)_k|^2.
    """

    def __init__(self, K_G, M_G):
        S = (K_G + M_G).toarray()
        Md = M_G.toarray()
        omega, V = scipy.linalg.eigh(S, Md)
        self.omega = np.maximum(omega, 1e-14)
        self.V = V
        self.M_G = M_G

    def norm_function(self, g, s) -> float:
        c = self.V.T @ (self.M_G @ g)
        return float(np.sqrt((self.omega**s * np.abs(c) ** 2).sum()))

    def dual_norm(self, f, s) -> float:
        c = self.V.T @ f
        return float(np.sqrt((self.omega ** (-s) * np.abs(c) ** 2).sum()))


def gram_extreme_eigs(sys: SystemMatrices):
    """Smallest and largest eigenvalues of the composite Gram matrix (dense)."""
    w = scipy.linalg.eigvalsh(sys.M.toarray())
    return float(w[0]), float(w[-1])
