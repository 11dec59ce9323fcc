"""Jump matrices and the collocation solver for the two-circle Riemann-Hilbert problems.

The unknown is mu = M_- on gamma, which solves  mu - C_-(mu (J - I)) = I.
Rows of mu decouple, so both rows are solved with one LU factorisation of a
(4n x 4n) system; the same factorisation serves the x-derivative equation
dmu - C_-(dmu (J - I)) = C_-(mu dJ).

M(z) = I + (1/2 pi i) int mu (J - I) / (s - z) ds, and its 1/z coefficient is
M1 = -(1/2 pi i) int mu (J - I) ds, from which psi = 2i (M1)_12 and
|psi|^2 = -2i (d_x M1)_22.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import zgecon

from .contour import (ContourGrid, cauchy_minus, cauchy_minus_matrix, cauchy_offcontour,
                      contour_integral, norm_l2)
from .errors import AccuracyError, ContractViolation, SolvabilityError
from .spectral import EigenvalueDomain, Interpolant, SpectralSample

SIE_TOL = 1e-10
JUMP_QUAD_TOL = 1e-10
MODSQ_IMAG_TOL = 1e-8


@dataclass(frozen=True)
class SpacetimePoint:
    x: float
    t: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise ContractViolation(f"t must be nonnegative, got {self.t}")

    def theta(self, z):
        z = np.asarray(z, dtype=complex)
        return 2j * self.x * z + 2j * self.t * z * z

    def dtheta_dx(self, z):
        return 2j * np.asarray(z, dtype=complex)


@lru_cache(maxsize=16)
def _minus_matrix(grid: ContourGrid) -> np.ndarray:
    K = cauchy_minus_matrix(grid)
    K.setflags(write=False)
    return K


def domain_stieltjes(domain: EigenvalueDomain, r: Interpolant, z, refine: int = 1):
    """int r(w)/(z - w) dmu(w) by the domain quadrature."""
    w, wt = domain.quadrature(refine)
    z = np.asarray(z, dtype=complex)
    vals = (wt * r(w))[None, :] / (z.reshape(-1, 1) - w[None, :])
    return vals.sum(axis=1).reshape(z.shape)


@lru_cache(maxsize=32)
def _averaged_upper(domain: EigenvalueDomain, r: Interpolant, grid: ContourGrid) -> np.ndarray:
    s = grid.nodes[grid.upper]
    if np.any(domain.distance_to(s) <= 0):
        raise ContractViolation("the eigenvalue domain is not strictly inside gamma+")
    S = domain_stieltjes(domain, r, s)
    probe = np.arange(0, grid.n, max(1, grid.n // 10))[:10]
    fine = domain_stieltjes(domain, r, s[probe], refine=2)
    err = float(np.max(np.abs(fine - S[probe])))
    if err > JUMP_QUAD_TOL * max(1.0, float(np.max(np.abs(S)))):
        raise AccuracyError(
            f"domain quadrature changes the averaged jump by {err:.3g} under node doubling; "
            "increase the quadrature counts"
        )
    S.setflags(write=False)
    return S


@dataclass(frozen=True)
class JumpField:
    """Jump matrix on gamma for a random sample or for the averaged problem.

    On gamma+ J = [[1, 0], [-e^theta S(z), 1]]; on gamma- J = [[1, e^-theta S*(z)], [0, 1]],
    with S*(z) = conj(S(conj z)) and S the Stieltjes-type sum of the data.
    """

    kind: str
    point: SpacetimePoint
    sample: SpectralSample | None = None
    domain: EigenvalueDomain | None = None
    interpolant: Interpolant | None = None

    def stieltjes(self, z, grid: ContourGrid | None = None):
        """S(z) = sum c_k/(z - lambda_k), or its average over the domain."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "random":
            lam, c = self.sample.eigenvalues, self.sample.constants
            if lam.size == 0:
                return np.zeros(z.shape, dtype=complex)
            return (c[None, :] / (z.reshape(-1, 1) - lam[None, :])).sum(axis=1).reshape(z.shape)
        if self.interpolant.is_zero:
            return np.zeros(z.shape, dtype=complex)
        if grid is not None and z.shape == (grid.n,) and np.array_equal(z, grid.nodes[grid.upper]):
            return _averaged_upper(self.domain, self.interpolant, grid)
        return domain_stieltjes(self.domain, self.interpolant, z)

    def upper_entry(self, z):
        """(2,1) entry of J on gamma+."""
        return -np.exp(self.point.theta(z)) * self.stieltjes(z)

    def lower_entry(self, z):
        """(1,2) entry of J on gamma-."""
        z = np.asarray(z, dtype=complex)
        return np.exp(-self.point.theta(z)) * np.conj(self.stieltjes(np.conj(z)))

    def check_support(self, grid: ContourGrid):
        if self.kind == "random":
            lam = self.sample.eigenvalues
            if lam.size and np.any(np.abs(lam - grid.center) >= grid.radius):
                raise ContractViolation("an eigenvalue lies on or outside gamma+")
        elif np.any(self.domain.distance_to(grid.nodes[grid.upper]) <= 0):
            raise ContractViolation("the eigenvalue domain is not strictly inside gamma+")

    def on_grid(self, grid: ContourGrid) -> tuple[np.ndarray, np.ndarray]:
        """(J - I, d_x J) at every node, each of shape (2n, 2, 2)."""
        self.check_support(grid)
        s = grid.nodes
        up, lo = grid.upper, grid.lower
        S_up = self.stieltjes(s[up], grid)
        mirror = grid.mirror_index()[lo]  # gamma+ index of conj(s) for s on gamma-
        S_lo = np.conj(S_up[mirror])
        V = np.zeros((grid.size, 2, 2), dtype=complex)
        dV = np.zeros_like(V)
        V[up, 1, 0] = -np.exp(self.point.theta(s[up])) * S_up
        V[lo, 0, 1] = np.exp(-self.point.theta(s[lo])) * S_lo
        dV[up, 1, 0] = self.point.dtheta_dx(s[up]) * V[up, 1, 0]
        dV[lo, 0, 1] = -self.point.dtheta_dx(s[lo]) * V[lo, 0, 1]
        return V, dV


def jump_random(sample: SpectralSample, p: SpacetimePoint) -> JumpField:
    return JumpField("random", p, sample=sample)


def jump_averaged(domain: EigenvalueDomain, r: Interpolant, p: SpacetimePoint) -> JumpField:
    return JumpField("averaged", p, domain=domain, interpolant=r)


@dataclass(frozen=True)
class RHSolution:
    """Collocation solution: mu = M_- at the nodes and the 1/z coefficient M1."""

    grid: ContourGrid
    jump: JumpField
    mu: np.ndarray
    m1: np.ndarray
    residual: float
    condition: float
    V: np.ndarray
    dV: np.ndarray
    lu: tuple | None = None
    dmu: np.ndarray | None = None
    dm1: np.ndarray | None = None

    @property
    def has_dx(self) -> bool:
        return self.dmu is not None


def _rows_to_blocks(f: np.ndarray, size: int) -> np.ndarray:
    # f[node, row, entry] -> column per row, entry blocks stacked
    return np.concatenate([f[:, :, 0], f[:, :, 1]], axis=0)


def _blocks_to_rows(sol: np.ndarray, size: int) -> np.ndarray:
    out = np.empty((size, 2, 2), dtype=complex)
    out[:, :, 0] = sol[:size]
    out[:, :, 1] = sol[size:]
    return out


def _check_sie_residual(mu, V, grid) -> float:
    res = mu - np.eye(2) - cauchy_minus(mu @ V, grid)
    return norm_l2(res, grid) / max(norm_l2(mu, grid), 1e-300)


def solve_sie(jump: JumpField, grid: ContourGrid) -> RHSolution:
    """Solve mu - C_-(mu (J - I)) = I by dense collocation."""
    V, dV = jump.on_grid(grid)
    size = grid.size
    if not np.any(V):
        mu = np.broadcast_to(np.eye(2, dtype=complex), (size, 2, 2)).copy()
        return RHSolution(grid, jump, mu, np.zeros((2, 2), complex), 0.0, 1.0, V, dV, None)
    K = _minus_matrix(grid)
    A = np.eye(2 * size, dtype=complex)
    # block (a, b) maps entry b of a row of mu to entry a: K diag(V[:, b, a])
    for a in range(2):
        for b in range(2):
            if np.any(V[:, b, a]):
                A[a * size:(a + 1) * size, b * size:(b + 1) * size] -= K * V[None, :, b, a]
    rhs = _rows_to_blocks(np.broadcast_to(np.eye(2, dtype=complex), (size, 2, 2)), size)
    try:
        lu = sla.lu_factor(A, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SolvabilityError(f"collocation matrix factorisation failed: {exc}") from exc
    rcond, _ = zgecon(lu[0], np.abs(A).sum(axis=0).max())
    cond = 1.0 / rcond if rcond > 0 else np.inf
    if not np.isfinite(cond) or cond > 1e13:
        raise SolvabilityError(f"collocation matrix is singular (cond ~ {cond:.3g})", cond)
    mu = _blocks_to_rows(sla.lu_solve(lu, rhs), size)
    residual = _check_sie_residual(mu, V, grid)
    if residual > SIE_TOL:
        raise AccuracyError(f"SIE residual {residual:.3g} exceeds {SIE_TOL}")
    m1 = -contour_integral(mu @ V, grid) / (2j * np.pi)
    return RHSolution(grid, jump, mu, m1, residual, cond, V, dV, lu)


def _same_jump(a: JumpField, b: JumpField) -> bool:
    if a is b:
        return True
    if a.kind != b.kind or a.point != b.point:
        return False
    if a.kind == "random":
        return (np.array_equal(a.sample.eigenvalues, b.sample.eigenvalues)
                and np.array_equal(a.sample.constants, b.sample.constants))
    return a.domain == b.domain and a.interpolant == b.interpolant


def solve_sie_dx(jump: JumpField, grid: ContourGrid, base: RHSolution) -> RHSolution:
    """Solve dmu - C_-(dmu (J - I)) = C_-(mu d_x J) with the base factorisation."""
    if base.grid != grid or not _same_jump(base.jump, jump):
        raise ContractViolation("base solution was computed for a different grid or jump")
    V, dV, mu = base.V, base.dV, base.mu
    forcing = cauchy_minus(mu @ dV, grid)
    if base.lu is None:
        dmu = forcing  # J = I: the operator is the identity
    else:
        dmu = _blocks_to_rows(sla.lu_solve(base.lu, _rows_to_blocks(forcing, grid.size)),
                              grid.size)
    res = dmu - cauchy_minus(dmu @ V, grid) - forcing
    scale = max(norm_l2(dmu, grid), norm_l2(forcing, grid), 1e-300)
    if norm_l2(res, grid) > SIE_TOL * scale:
        raise AccuracyError("derivative SIE residual above tolerance")
    dm1 = -contour_integral(dmu @ V + mu @ dV, grid) / (2j * np.pi)
    return replace(base, dmu=dmu, dm1=dm1)


def solve(jump: JumpField, grid: ContourGrid, with_dx: bool = True) -> RHSolution:
    sol = solve_sie(jump, grid)
    return solve_sie_dx(jump, grid, sol) if with_dx else sol


def recover_field(sol: RHSolution) -> complex:
    """psi = 2i (M1)_12."""
    return complex(2j * sol.m1[0, 1])


def recover_modsq(sol: RHSolution) -> float:
    """|psi|^2 = -2i (d_x M1)_22, from the derivative equation."""
    if not sol.has_dx:
        raise ContractViolation("solution has no x-derivative companion")
    val = -2j * sol.dm1[1, 1]
    if abs(val.imag) > MODSQ_IMAG_TOL * max(1.0, abs(val.real)):
        raise AccuracyError(f"|psi|^2 has imaginary residue {val.imag:.3g}")
    return float(val.real)


def eval_M_off(sol: RHSolution, z, derivative: bool = False) -> np.ndarray:
    """M(z) (or d_x M(z)) off the contour, shape z.shape + (2, 2)."""
    z = np.asarray(z, dtype=complex)
    if derivative:
        if not sol.has_dx:
            raise ContractViolation("solution has no x-derivative companion")
        return cauchy_offcontour(sol.dmu @ sol.V + sol.mu @ sol.dV, sol.grid, z)
    return np.eye(2) + cauchy_offcontour(sol.mu @ sol.V, sol.grid, z)


def schwarz_defect(sol: RHSolution, z) -> float:
    """max |M22(z) - conj M11(conj z)|, |M21(z) + conj M12(conj z)| over probes."""
    z = np.asarray(z, dtype=complex)
    M = eval_M_off(sol, z)
    Mb = eval_M_off(sol, np.conj(z))
    d1 = np.abs(M[..., 1, 1] - np.conj(Mb[..., 0, 0]))
    d2 = np.abs(M[..., 1, 0] + np.conj(Mb[..., 0, 1]))
    return float(max(d1.max(), d2.max()))


def averaged_solution(domain: EigenvalueDomain, r: Interpolant, grid: ContourGrid,
                      p: SpacetimePoint, with_dx: bool = True) -> RHSolution:
    return solve(jump_averaged(domain, r, p), grid, with_dx)
