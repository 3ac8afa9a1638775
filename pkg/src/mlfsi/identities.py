"""Numerical probes of the static coupling identities on the solid region.

Provides the discrete harmonic (Dirichlet) extension and its flux map, the
homogenized interior field z built from a frequency-domain solution, exact
evaluation of the two wave multiplier identities, and the monitored ratio
chain used across frequency sweeps. All normal derivatives are recovered
variationally (residual tested against interface hat functions), which is
the one flux notion for which the discrete Green identities hold exactly.

Orientation convention: nu points from the fluid into the solid everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi

import numpy as np

from .assembly import (
    DofMap,
    State,
    SurfaceSpectral,
    assemble_surface,
    assemble_volume,
    build_dofmap,
    energy_norm,
    fluid_gradient_norm,
)
from .geometry import GAMMA_F, SOLID, Mesh, build_mesh, MeshConfig
from .linalg import Factorization


class SolidSystem:
    """Solid-side operators only; enough for extension, flux, and multiplier work.

    Duck-type compatible with SystemMatrices for every function in this module.
    """

    def __init__(self, mesh, dof, M_s, K_s, M_G, K_G):
        self.mesh = mesh
        self.dof = dof
        self.M_s, self.K_s = M_s, K_s
        self.M_G, self.K_G = M_G, K_G


def build_solid_system(mesh: Mesh) -> SolidSystem:
    dof = build_dofmap(mesh)
    Ms_all, Ks_all = assemble_volume(mesh, SOLID)
    Mg_all, Kg_all = assemble_surface(mesh)
    sel_s, sel_i = dof.solid_all, dof.interface
    return SolidSystem(
        mesh,
        dof,
        Ms_all[sel_s][:, sel_s].tocsr(),
        Ks_all[sel_s][:, sel_s].tocsr(),
        Mg_all[sel_i][:, sel_i].tocsr(),
        Kg_all[sel_i][:, sel_i].tocsr(),
    )


class DirichletMap:
    """Discrete harmonic extension from the interface into the solid.

    ``extend`` solves the interior stiffness equations exactly, so the
    extension agrees with boundary data at interface vertices and is
    discrete harmonic at every interior vertex. ``neumann`` returns the
    variational flux functional psi -> (grad E g, grad E psi), i.e. the
    stiffness Schur complement applied to g: symmetric positive
    semidefinite with the constants as kernel. The nu-oriented normal
    derivative of the extension is the negative of that functional.
    """

    def __init__(self, sys):
        dof = sys.dof
        n_s = dof.n_s
        K = sys.K_s.tocsr()
        self.n_s, self.n_i = n_s, dof.n_i
        self.K_IG = K[:n_s, n_s:]
        self.K_GI = K[n_s:, :n_s]
        self.K_GG = K[n_s:, n_s:]
        self.factor = Factorization(K[:n_s, :n_s].tocsc()) if n_s else None

    def extend(self, g):
        g = np.asarray(g)
        if self.n_s == 0:
            return g.copy()
        interior = -self.factor.solve(self.K_IG @ g)
        return np.concatenate([interior, g])

    def neumann(self, g):
        e = self.extend(g)
        if self.n_s == 0:
            return self.K_GG @ g
        return self.K_GI @ e[: self.n_s] + self.K_GG @ g

    def h1_ratio(self, g, sys, spectral: SurfaceSpectral) -> float:
        """Monitored boundedness constant |E g|_{H1} / |g|_{1/2,h}."""
        e = self.extend(g)
        h1 = np.sqrt(np.vdot(e, (sys.K_s + sys.M_s) @ e).real)
        gn = spectral.norm_function(g, 0.5)
        return float(h1 / gn) if gn > 0 else 0.0


def dirichlet_extend(g, sys, dmap: DirichletMap | None = None):
    if dmap is None:
        dmap = DirichletMap(sys)
    return dmap.extend(g)


def dirichlet_neumann(g, sys, dmap: DirichletMap | None = None):
    if dmap is None:
        dmap = DirichletMap(sys)
    return dmap.neumann(g)


@dataclass
class ZField:
    """Homogenized interior wave field; vanishes on the interface by construction."""

    values: np.ndarray      # nodal, solid ordering [interior, interface]
    beta: float
    provenance: str
    boundary_residual: float = 0.0


def interface_lift(x: State, b: State, beta) -> np.ndarray:
    """(i/beta) * (trace u + data displacement trace) on the interface.

    Shared between the static solve (which substitutes the thin kinematic row
    with exactly this expression) and the z construction (which adds it back),
    so the boundary cancellation is exact in floating point, not just in
    exact arithmetic.
    """
    return (1j / beta) * (x.trace_u + b.h0)


def build_z(x: State, b: State, beta, sys, dmap: DirichletMap | None = None) -> ZField:
    """z = w0 + (i/beta) E(trace u + trace of the data displacement).

    The kinematic rows of the static solve make the interface values cancel
    exactly, so the boundary trace must vanish to solver precision; this is
    asserted at 1e-12 relative to the field's max magnitude.
    """
    if abs(beta) < 1.0:
        raise ValueError(f"z construction requires |beta| >= 1, got {beta}")
    if dmap is None:
        dmap = DirichletMap(sys)
    g = x.trace_u + b.h0
    ext = dmap.extend(g)
    lift = interface_lift(x, b, beta)
    z = x.w0_full.astype(complex)
    z[: sys.dof.n_s] += (1j / beta) * ext[: sys.dof.n_s]
    z[sys.dof.n_s:] += lift
    scale = float(np.max(np.abs(z))) if z.size else 0.0
    bres = float(np.max(np.abs(z[sys.dof.n_s:]))) if sys.dof.n_i else 0.0
    if scale > 0 and bres > 1e-12 * scale:
        raise ValueError(
            f"boundary trace of z failed to vanish: {bres:.3g} vs scale {scale:.3g}"
        )
    return ZField(z, float(beta), "resolvent", boundary_residual=bres)


def z_equation_load(x: State, b: State, beta, sys, dmap: DirichletMap) -> np.ndarray:
    """Right-hand side of the homogenized equation -beta^2 z - Delta z = F."""
    g = x.trace_u + b.h0
    ext = dmap.extend(g)
    return -1j * beta * ext + b.w1_full + 1j * beta * b.w0_full


def interface_flux(v_full, load_full, beta, sys) -> np.ndarray:
    """Variational nu-flux functional of v with -beta^2 v - Delta v = load.

    Component i is <dv/dnu, psi_i> for the interface hat psi_i, with nu into
    the solid.
    """
    v = np.asarray(v_full)
    load = np.asarray(load_full)
    r = sys.K_s @ v - sys.M_s @ (beta**2 * v + load)
    return -r[sys.dof.n_s:]


def fluid_interface_flux(x: State, b: State, beta, sys) -> np.ndarray:
    """Variational nu-flux functional of the heat field on the interface."""
    r = sys.K_f @ x.u + 1j * beta * (sys.M_f @ x.u) - sys.M_f @ b.u
    return r[sys.dof.n_fi:]


class _SolidQuadrature:
    """Exact element integrals for the multiplier identities."""

    def __init__(self, mesh: Mesh, dof: DofMap):
        nv = mesh.vertices.shape[0]
        to_local = np.full(nv, -1, dtype=np.int64)
        to_local[dof.solid_all] = np.arange(dof.solid_all.size)

        solid = mesh.tet_regions == SOLID
        tets = mesh.tets[solid]
        p = mesh.vertices[tets]
        d = p[:, 1:] - p[:, :1]
        vol = np.linalg.det(d) / 6.0
        dinv = np.linalg.inv(d)
        grads = np.empty((tets.shape[0], 4, 3))
        grads[:, 1:, :] = np.transpose(dinv, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        self.tet_local = to_local[tets]
        self.tet_coords = p
        self.tet_grads = grads
        self.tet_vol = vol
        self.tet_mass = vol[:, None, None] * (np.ones((4, 4)) + np.eye(4)) / 20.0

        keep = mesh.tri_tags != GAMMA_F
        tris = mesh.tris[keep]
        self.tri_local = to_local[tris] - dof.n_s     # into the interface block
        self.tri_coords = mesh.vertices[tris]
        self.tri_normals = mesh.tri_normals[keep]
        e1 = self.tri_coords[:, 1] - self.tri_coords[:, 0]
        e2 = self.tri_coords[:, 2] - self.tri_coords[:, 0]
        self.tri_area = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        self.tri_mass = self.tri_area[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0

        # Adjacent solid tet of every interface triangle, for boundary gradients.
        face_of = {}
        local_faces = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
        for t in range(tets.shape[0]):
            for lf in local_faces:
                face_of[tuple(sorted(tets[t, lf]))] = t
        adj = np.array([face_of[tuple(sorted(tri))] for tri in tris], dtype=np.int64)
        self.tri_tet = adj

        # Exact integral of products of three P1 hats on a triangle, per unit
        # area: int lam^a lam^b lam^c = 2A a! b! c! / (a+b+c+2)!.
        T = np.zeros((3, 3, 3))
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    expo = np.bincount([i, j, k], minlength=3)
                    num = np.prod([factorial(int(e)) for e in expo])
                    T[i, j, k] = 2.0 * num / factorial(5)
        self.tri_cubic = T


def _quadrature_pack(sys) -> _SolidQuadrature:
    pack = getattr(sys, "_solid_quadrature", None)
    if pack is None:
        pack = _SolidQuadrature(sys.mesh, sys.dof)
        sys._solid_quadrature = pack
    return pack


def _mass_g_factor(sys) -> Factorization:
    fact = getattr(sys, "_mass_g_factor", None)
    if fact is None:
        fact = Factorization(sys.M_G.tocsc())
        sys._mass_g_factor = fact
    return fact


def surface_spectral_of(sys) -> SurfaceSpectral:
    """Shared fractional-norm machinery for a system, built once per object."""
    spectral = getattr(sys, "_surface_spectral", None)
    if spectral is None:
        if hasattr(sys, "surface_spectral"):
            spectral = sys.surface_spectral
        else:
            spectral = SurfaceSpectral(sys.K_G, sys.M_G)
        sys._surface_spectral = spectral
    return spectral


def recover_flux_nodal(flux_functional, sys) -> np.ndarray:
    """Nodal P1 representative of a flux functional: solve M_G lam = f."""
    return _mass_g_factor(sys).solve(np.asarray(flux_functional))


@dataclass
class MultiplierReport:
    which: str
    lhs: float
    rhs: float
    residual: float
    h: float
    flux_method: str = "variational"
    quadrature: str = "exact-p1-products"

    def as_dict(self):
        return {
            "identity": self.which,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "h": self.h,
            "flux_method": self.flux_method,
            "quadrature": self.quadrature,
        }


def _mesh_h(sys) -> float:
    q = _quadrature_pack(sys)
    edges = q.tet_coords[:, [0, 0, 0, 1, 1, 2]] - q.tet_coords[:, [1, 2, 3, 2, 3, 3]]
    return float(np.max(np.linalg.norm(edges, axis=2)))


def multiplier_residual(z: ZField, f, beta, sys, which) -> MultiplierReport:
    """Evaluate both sides of a wave multiplier identity for the field z.

    ``which`` is "radial" for the gradient identity with m(x) = x (Jacobian
    the identity), or "unit-div" for the equipartition identity with
    div m = 1 (m = x/3, so the grad-div correction drops). ``f`` is the
    nodal right-hand side of -beta^2 z - Delta z = f.
    """
    q = _quadrature_pack(sys)
    zv = np.asarray(z.values, dtype=complex)
    fv = np.asarray(f, dtype=complex)
    beta = float(beta)

    grad_sq = float(np.vdot(zv, sys.K_s @ zv).real)
    mass_sq = float(np.vdot(zv, sys.M_s @ zv).real)

    if which == "unit-div":
        lhs = grad_sq - beta**2 * mass_sq
        rhs = float(np.vdot(zv, sys.M_s @ fv).real)
        return MultiplierReport(which, lhs, rhs, abs(lhs - rhs), _mesh_h(sys))
    if which != "radial":
        raise ValueError(f"unknown identity {which!r}")

    # m(x) = x: LHS is the gradient energy; RHS collects the boundary flux
    # terms (with nu into the solid), the div-m volume term, and the load term.
    zt = zv[q.tet_local]
    grad_z = np.einsum("tv,tvd->td", zt, q.tet_grads)

    flux = interface_flux(zv, fv, beta, sys)
    lam = recover_flux_nodal(flux, sys)
    lam_tri = lam[q.tri_local]

    g_adj = grad_z[q.tri_tet]                          # gradient on adjacent tet
    c_tri = np.einsum("tvd,td->tv", q.tri_coords, g_adj.conj())
    term_a = -np.einsum("tv,tvw,tw->", lam_tri, q.tri_mass, c_tri).real

    s_tri = np.einsum("tvd,td->tv", q.tri_coords, q.tri_normals)
    lam_sq = np.einsum("tv,vij,ti,tj->t", s_tri, q.tri_cubic, lam_tri.conj(), lam_tri)
    term_b = 0.5 * float((lam_sq.real * q.tri_area).sum())

    term_c = 1.5 * (grad_sq - beta**2 * mass_sq)

    f_tet = fv[q.tet_local]
    c_tet = np.einsum("tvd,td->tv", q.tet_coords, grad_z.conj())
    term_d = np.einsum("tv,tvw,tw->", f_tet, q.tet_mass, c_tet).real

    lhs = grad_sq
    rhs = float(term_a + term_b + term_c + term_d)
    return MultiplierReport(which, lhs, rhs, abs(lhs - rhs), _mesh_h(sys))


@dataclass
class FluxChainRecord:
    r_crux: float
    r_s3: float
    r_I1: float
    dtn_norm: float
    z_boundary: float = 0.0     # boundary trace of z relative to max |z|
    degenerate: bool = False


def flux_chain_monitor(x: State, b: State, beta, sys,
                       dmap: DirichletMap | None = None,
                       spectral: SurfaceSpectral | None = None) -> FluxChainRecord:
    """Monitored ratios of the interface flux chain on a static solution.

    Each ratio divides a flux or energy quantity by the frequency-weighted
    majorant it is expected to stay below; the constants are unknown, so
    only boundedness across a sweep is meaningful, never a specific value.
    """
    if abs(beta) < 1.0:
        raise ValueError(f"flux chain monitors require |beta| >= 1, got {beta}")
    bnorm = energy_norm(b, sys)
    if bnorm == 0.0:
        return FluxChainRecord(0.0, 0.0, 0.0, 0.0, degenerate=True)
    if dmap is None:
        dmap = DirichletMap(sys)
    if spectral is None:
        spectral = surface_spectral_of(sys)

    ab = abs(beta)
    z = build_z(x, b, beta, sys, dmap)
    fz = z_equation_load(x, b, beta, sys, dmap)
    flux_z = interface_flux(z.values, fz, beta, sys)
    lam = recover_flux_nodal(flux_z, sys)
    flux_l2 = float(np.sqrt(np.vdot(lam, sys.M_G @ lam).real))

    zh1 = float(np.sqrt(np.vdot(z.values, (sys.K_s + sys.M_s) @ z.values).real))
    zb = ab * float(np.sqrt(np.vdot(z.values, sys.M_s @ z.values).real))
    grad_u = fluid_gradient_norm(x, sys)
    denom = ab ** 2.75 * grad_u + ab**3 * bnorm

    thin = float(np.vdot(x.h0, (sys.K_G + sys.M_G) @ x.h0).real)
    fw0 = 1j * beta * b.w0_full + b.w1_full
    flux_w0 = interface_flux(x.w0_full, fw0, beta, sys)
    pairing = abs(np.vdot(x.h0, flux_w0))
    denom_thin = pairing + grad_u**2 + bnorm**2

    g = x.trace_u + b.h0
    gn = spectral.norm_function(g, 0.5)
    dtn_norm = spectral.dual_norm(dmap.neumann(g), 0.5) / gn if gn > 0 else 0.0

    zscale = float(np.max(np.abs(z.values))) if z.values.size else 0.0
    return FluxChainRecord(
        r_crux=flux_l2 / denom,
        r_s3=(zh1 + zb + flux_l2) / denom,
        r_I1=thin / denom_thin,
        dtn_norm=float(dtn_norm),
        z_boundary=z.boundary_residual / zscale if zscale > 0 else 0.0,
    )


def manufactured_field(mesh: Mesh, dof: DofMap, beta) -> tuple[np.ndarray, np.ndarray]:
    """Product-sine field vanishing on the cube faces, with its wave load.

    Uses the fundamental sine mode per axis: a full period would interpolate
    to the zero field on the coarsest study mesh (every interior node sits on
    a sine zero), which degenerates the refinement study. Returns nodal
    (z, f) on the solid ordering for -beta^2 z - Delta z = f.
    """
    if mesh.config is None:
        raise ValueError("manufactured field needs the mesh configuration for the cube bounds")
    a = np.asarray(mesh.config.inner_lo, float)
    bb = np.asarray(mesh.config.inner_hi, float)
    kappa = pi / (bb - a)
    coords = mesh.vertices[dof.solid_all]
    z = np.prod(np.sin(kappa * (coords - a)), axis=1)
    f = (float(np.sum(kappa**2)) - beta**2) * z
    return z, f


def manufactured_study(ns, beta=2.0, base_config: MeshConfig | None = None):
    """Multiplier residuals of both identities over a refinement sequence.

    Returns a list of per-resolution dicts and the fitted convergence orders
    (slope of log residual versus log h).
    """
    if base_config is None:
        base_config = MeshConfig()
    rows = []
    for n in ns:
        config = MeshConfig(
            base_config.outer_lo, base_config.outer_hi,
            base_config.inner_lo, base_config.inner_hi, int(n),
        )
        mesh = build_mesh(config)
        sys = build_solid_system(mesh)
        zv, fv = manufactured_field(mesh, sys.dof, beta)
        z = ZField(zv.astype(complex), float(beta), "manufactured")
        rep_rad = multiplier_residual(z, fv, beta, sys, "radial")
        rep_div = multiplier_residual(z, fv, beta, sys, "unit-div")
        rows.append({"n": int(n), "radial": rep_rad, "unit_div": rep_div})

    orders = {}
    for key in ("radial", "unit_div"):
        hs = np.array([r[key].h for r in rows])
        res = np.array([max(r[key].residual, 1e-300) for r in rows])
        orders[key] = float(np.polyfit(np.log(hs), np.log(res), 1)[0]) if len(rows) > 1 else float("nan")
    return rows, orders
