"""Frequency-domain engine: shifted solves, operator norms, sweeps, growth fits.

For a real frequency beta the static system is (i beta M - A) x = M b. The
operator norm of the map b -> x is measured with the energy Gram matrix M on
both sides, which is the operator norm on the discrete energy space. The
exact algebraic dissipation identity

    u^H K_f u = Re <b, x>_H

holds for every solve up to solver tolerance and is recorded per sample,
along with the sharpened-Poincare ratio, trace and flux ratios, and the
flux-chain monitors.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import State, SystemMatrices, energy_norm, fluid_gradient_norm
from .identities import (
    DirichletMap,
    fluid_interface_flux,
    flux_chain_monitor,
    interface_lift,
    surface_spectral_of,
)
from .linalg import Factorization, SingularMatrixError, power_opnorm

GROWTH_REFERENCE_EXPONENT = 11.0 / 2.0


class FrequencySingularityError(RuntimeError):
    """The shifted matrix is singular to tolerance: i*beta sits at (or numerically
    near) a discrete eigenvalue, which would contradict the expected spectrum."""

    def __init__(self, beta, detail):
        super().__init__(f"shifted system at beta = {beta} is singular: {detail}")
        self.beta = beta


class InsufficientPointsError(ValueError):
    pass


@dataclass
class ResolventSample:
    beta: float
    opnorm: float
    dissipation_residual: float
    poincare_ratio: float
    trace_ratio: float
    flux_ratio: float
    iters: int
    r_crux: float
    r_s3: float
    r_I1: float
    dtn_norm: float
    z_boundary: float = 0.0     # diagnostic only, not a CSV column


@dataclass
class GrowthFit:
    betas: np.ndarray
    slope: float
    residual: float
    window: tuple
    points: int

    def as_dict(self):
        return {
            "slope": self.slope,
            "residual": self.residual,
            "beta_window": [float(self.window[0]), float(self.window[1])],
            "points": self.points,
            "reference_exponent": GROWTH_REFERENCE_EXPONENT,
        }


CSV_HEADER = (
    "beta,opnorm,dissipation_residual,poincare_ratio,trace_ratio,flux_ratio,"
    "iters,r_crux,r_s3,r_I1,dtn_norm"
)


class ShiftedFactor:
    """Complex LU of (i beta M - A), shared by solves and the opnorm adjoint."""

    def __init__(self, beta, sys: SystemMatrices):
        self.beta = float(beta)
        shifted = (1j * self.beta) * sys.M.astype(np.complex128) - sys.A.astype(np.complex128)
        try:
            self.factor = Factorization(sp.csc_matrix(shifted))
        except SingularMatrixError as exc:
            raise FrequencySingularityError(beta, str(exc)) from exc
        self.matrix = self.factor.matrix

    def solve(self, rhs):
        return self.factor.solve(np.asarray(rhs, dtype=np.complex128))

    def solve_adjoint(self, rhs):
        return self.factor.solve(np.asarray(rhs, dtype=np.complex128), trans="H")


def solve_static(beta, b: State, sys: SystemMatrices,
                 shifted: ShiftedFactor | None = None, tol=1e-10) -> State:
    """Solve (i beta M - A) x = M b to relative residual <= tol.

    After the factorized solve, the thin kinematic row is substituted in
    closed form, h0 = (trace u + data trace) / (i beta), so that relation
    holds exactly in floating point (the residual is then re-verified on the
    substituted solution). This is what makes the boundary trace of the
    homogenized field cancel identically.
    """
    if shifted is None:
        shifted = ShiftedFactor(beta, sys)
    rhs = sys.M @ b.vec.astype(np.complex128)
    xvec = shifted.solve(rhs)
    x = State(sys.dof, xvec)
    xvec[sys.dof.slice_h0] = -interface_lift(x, b, beta)
    nb = np.linalg.norm(rhs)
    if nb > 0:
        res = np.linalg.norm(shifted.matrix @ xvec - rhs) / nb
        if not np.isfinite(res) or res > tol:
            raise FrequencySingularityError(beta, f"solve residual {res:g} exceeds {tol:g}")
    return x


def dissipation_residual(beta, b: State, x: State, sys: SystemMatrices) -> float:
    """|u^H K_f u - Re <b, x>_H|; an exact identity up to solver tolerance."""
    grad_sq = np.vdot(x.u, sys.K_f @ x.u).real
    pairing = np.vdot(b.vec, sys.M @ x.vec).real
    return float(abs(grad_sq - pairing))


def poincare_ratio(beta, b: State, x: State, sys: SystemMatrices) -> float:
    """|beta|^(1/2) |u| / (|grad u| + |b|_H), monitored for boundedness."""
    if abs(beta) < 1.0:
        raise ValueError(f"poincare ratio is monitored for |beta| >= 1, got {beta}")
    unorm = math.sqrt(max(np.vdot(x.u, sys.M_f @ x.u).real, 0.0))
    denom = fluid_gradient_norm(x, sys) + energy_norm(b, sys)
    return float(math.sqrt(abs(beta)) * unorm / denom) if denom > 0 else 0.0


def trace_ratio(beta, b: State, x: State, sys: SystemMatrices, spectral=None) -> float:
    """|beta h0|_{1/2,h} / (|grad u| + |b|_H), the kinematic trace monitor."""
    spectral = spectral or surface_spectral_of(sys)
    num = abs(beta) * spectral.norm_function(x.h0, 0.5)
    denom = fluid_gradient_norm(x, sys) + energy_norm(b, sys)
    return float(num / denom) if denom > 0 else 0.0


def flux_ratio(beta, b: State, x: State, sys: SystemMatrices, spectral=None) -> float:
    """Variational heat flux in the dual half norm against its |beta|^(1/2) majorant."""
    spectral = spectral or surface_spectral_of(sys)
    fl = fluid_interface_flux(x, b, beta, sys)
    denom = math.sqrt(abs(beta)) * (fluid_gradient_norm(x, sys) + energy_norm(b, sys))
    return float(spectral.dual_norm(fl, 0.5) / denom) if denom > 0 else 0.0


def resolvent_opnorm(beta, sys: SystemMatrices, tol=1e-4,
                     shifted: ShiftedFactor | None = None, seed=0):
    """Operator norm of b -> x in the energy metric; returns (value, iterations)."""
    if shifted is None:
        shifted = ShiftedFactor(beta, sys)
    M = sys.M

    def matvec(v):
        return shifted.solve(M @ v)

    def rmatvec(v):
        return M @ shifted.solve_adjoint(v)

    info = power_opnorm(
        (matvec, rmatvec), M, sys.dof.total, tol=tol, seed=seed,
        gram_solve=lambda r: sys.mass_solve(r),
    )
    return info.sigma, info.iterations


def resolvent_norm(beta, sys: SystemMatrices, tol=1e-4) -> float:
    """Energy-metric norm of the discrete resolvent at i*beta, |beta| >= 1."""
    if abs(beta) < 1.0:
        raise ValueError(f"resolvent norm is tracked for |beta| >= 1, got {beta}")
    value, _ = resolvent_opnorm(beta, sys, tol=tol)
    return value


def probe_state(sys: SystemMatrices, seed) -> State:
    """Seeded random probe data with unit energy norm."""
    b = State.random(sys.dof, seed)
    b.vec /= energy_norm(b, sys)
    return b


def sample_point(beta, sys: SystemMatrices, b: State, *,
                 shifted: ShiftedFactor | None = None,
                 compute_opnorm=True, opnorm_tol=1e-4, solve_tol=1e-10,
                 dmap: DirichletMap | None = None, spectral=None) -> ResolventSample:
    """All per-frequency diagnostics for one beta and one probe vector."""
    if shifted is None:
        shifted = ShiftedFactor(beta, sys)
    spectral = spectral or surface_spectral_of(sys)
    dmap = dmap or DirichletMap(sys)

    x = solve_static(beta, b, sys, shifted=shifted, tol=solve_tol)
    diss = dissipation_residual(beta, b, x, sys)
    chain = flux_chain_monitor(x, b, beta, sys, dmap=dmap, spectral=spectral)
    if compute_opnorm:
        opnorm, iters = resolvent_opnorm(beta, sys, tol=opnorm_tol, shifted=shifted)
    else:
        opnorm, iters = float("nan"), 0
    return ResolventSample(
        beta=float(beta),
        opnorm=opnorm,
        dissipation_residual=diss / energy_norm(b, sys) ** 2,
        poincare_ratio=poincare_ratio(beta, b, x, sys),
        trace_ratio=trace_ratio(beta, b, x, sys, spectral),
        flux_ratio=flux_ratio(beta, b, x, sys, spectral),
        iters=iters,
        r_crux=chain.r_crux,
        r_s3=chain.r_s3,
        r_I1=chain.r_I1,
        dtn_norm=chain.dtn_norm,
        z_boundary=chain.z_boundary,
    )


def _sweep_worker(args):
    beta, sys, b, compute_opnorm, opnorm_tol, solve_tol = args
    return sample_point(
        beta, sys, b, compute_opnorm=compute_opnorm, opnorm_tol=opnorm_tol,
        solve_tol=solve_tol,
    )


def sweep(betas, sys: SystemMatrices, *, probe_seed=2, compute_opnorm=True,
          opnorm_tol=1e-4, solve_tol=1e-10, jobs=1) -> list[ResolventSample]:
    """Diagnostics along a frequency grid; results ordered by the grid.

    Per-frequency work is independent; with jobs > 1 the grid is distributed
    over processes and reassembled in order, so output does not depend on jobs.
    """
    betas = np.asarray(betas, dtype=float)
    if betas.size < 1:
        raise InsufficientPointsError("empty frequency grid")
    if np.any(np.diff(betas) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    if betas[0] < 1.0:
        raise ValueError("frequency grid must start at beta >= 1")
    b = probe_state(sys, probe_seed)
    if jobs > 1:
        work = [(float(bb), sys, b, compute_opnorm, opnorm_tol, solve_tol) for bb in betas]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_worker, work))
    return [
        sample_point(
            float(bb), sys, b, compute_opnorm=compute_opnorm,
            opnorm_tol=opnorm_tol, solve_tol=solve_tol,
        )
        for bb in betas
    ]


def fit_growth(samples, top_decade=True) -> GrowthFit:
    """Log-log slope of the operator norm versus frequency.

    By default the fit uses only the top decade of the grid, where the
    growth regime is not contaminated by the order-one plateau at small beta.
    """
    pts = [s for s in samples if np.isfinite(s.opnorm)]
    if len(pts) < 2:
        raise InsufficientPointsError(
            f"growth fit needs at least 2 finite samples, got {len(pts)}"
        )
    betas = np.array([s.beta for s in pts])
    if top_decade:
        keep = betas >= betas.max() / 10.0
        pts = [s for s, k in zip(pts, keep) if k]
        betas = betas[keep]
    if len(pts) < 2:
        raise InsufficientPointsError("top decade holds fewer than 2 samples")
    norms = np.array([s.opnorm for s in pts])
    lb, ln = np.log(betas), np.log(norms)
    coef, res_info = np.polyfit(lb, ln, 1, full=True)[:2]
    residual = float(np.sqrt(res_info[0] / len(pts))) if res_info.size else 0.0
    return GrowthFit(
        betas=betas,
        slope=float(coef[0]),
        residual=residual,
        window=(float(betas.min()), float(betas.max())),
        points=len(pts),
    )


def trend_slope(betas, values) -> float:
    """Least-squares slope of log(value) versus log(beta); 0 for all-zero data."""
    betas = np.asarray(betas, float)
    values = np.asarray(values, float)
    keep = values > 0
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(betas[keep]), np.log(values[keep]), 1)[0])


def write_sweep_csv(samples, path):
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for s in samples:
            row = [
                s.beta, s.opnorm, s.dissipation_residual, s.poincare_ratio,
                s.trace_ratio, s.flux_ratio,
            ]
            fh.write(
                ",".join(format(v, ".17g") for v in row)
                + f",{s.iters},"
                + ",".join(format(v, ".17g") for v in (s.r_crux, s.r_s3, s.r_I1, s.dtn_norm))
                + "\n"
            )


def write_growth_json(fit: GrowthFit, path):
    with open(path, "w") as fh:
        json.dump(fit.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
