"""Linear statistics, the small-norm event, the Gaussian limit kernels and their moments.

For a sample with c_k = r(lambda_k)/N the centred statistic

    X(z) = sum_k r(lambda_k)/(z - lambda_k) - N int r(w)/(z - w) dmu(w)

controls the difference between the random and averaged jumps: J_N - J has the
single off-diagonal entry -e^theta X/N on gamma+ and e^-theta conj(X(conj z))/N on
gamma-. To first order psi_N - psi_inf = X^{G1}/N and |psi_N|^2 - |psi_inf|^2 =
X^{G2}/N, where X^G = sum_k G(lambda_k) - N int G dmu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .contour import ContourGrid, contour_integral, frobenius
from .errors import AccuracyError, ContractViolation
from .rhp import RHSolution, SpacetimePoint, domain_stieltjes, eval_M_off, jump_random
from .spectral import EigenvalueDomain, Interpolant, SpectralSample, draw_sample

MOMENT_QUAD_TOL = 1e-8


def linear_statistic(sample: SpectralSample, r: Interpolant, domain: EigenvalueDomain, z):
    """X_N(z) for z outside the closed domain (vectorised over z)."""
    z = np.asarray(z, dtype=complex)
    if np.any(domain.distance_to(z) <= 0):
        raise ContractViolation("linear statistic evaluated inside the closed domain")
    lam = sample.eigenvalues
    zf = z.reshape(-1, 1)
    emp = (r(lam)[None, :] / (zf - lam[None, :])).sum(axis=1).reshape(z.shape)
    return emp - lam.size * domain_stieltjes(domain, r, z)


def linear_statistic_lower(sample, r, domain, z):
    """The statistic seen on gamma-: conj(X_N(conj z))."""
    return np.conj(linear_statistic(sample, r, domain, np.conj(np.asarray(z, dtype=complex))))


def _statistic_derivative(sample, r, domain, z):
    z = np.asarray(z, dtype=complex)
    lam = sample.eigenvalues
    w, wt = domain.quadrature()
    emp = -(r(lam)[None, :] / (z.reshape(-1, 1) - lam[None, :]) ** 2).sum(axis=1)
    avg = -((wt * r(w))[None, :] / (z.reshape(-1, 1) - w[None, :]) ** 2).sum(axis=1)
    return (emp - lam.size * avg).reshape(z.shape)


# ---------------------------------------------------------------- membership


@dataclass(frozen=True)
class MembershipVerdict:
    delta: float
    alpha: float
    mesh_size: int
    sup: float
    inside: bool


MAX_MESH = 2**20
_MESH_CHUNK = 1024


def mesh_size(grid: ContourGrid, n: int, delta: float, alpha: float, c_tilde: float) -> int:
    """M = ceil(1 + L_{gamma+} c N^(1 - alpha) / delta)."""
    if math.isinf(delta):
        return 1
    return int(math.ceil(1 + 2 * math.pi * grid.radius * c_tilde * n ** (1 - alpha) / delta))


def estimate_d0(domain: EigenvalueDomain, r: Interpolant, grid: ContourGrid,
                n: int = 64, trials: int = 64, seed: int = 20240611) -> float:
    """Pilot estimate of sup over gamma+ of |X_N'|/N (the derivative constant d0)."""
    return _estimate_d0(domain, r, grid, n, trials, seed)


@lru_cache(maxsize=16)
def _estimate_d0(domain, r, grid, n, trials, seed):
    z = grid.nodes[grid.upper]
    best = 0.0
    for i in range(trials):
        s = draw_sample(domain, r, n, int(np.random.SeedSequence([seed, n, i]).generate_state(1)[0]))
        best = max(best, float(np.max(np.abs(_statistic_derivative(s, r, domain, z)))) / n)
    return best


def bdelta_membership(sample: SpectralSample, r: Interpolant, domain: EigenvalueDomain,
                      grid: ContourGrid, delta: float, alpha: float = 1.0,
                      c_tilde: float | None = None) -> MembershipVerdict:
    """Is sup over a gamma+ mesh of |X_N|/N^alpha below delta?"""
    if not delta > 0:
        raise ContractViolation("delta must be positive")
    if not 0.5 < alpha <= 1:
        raise ContractViolation("alpha must lie in (1/2, 1]")
    n = sample.n
    if c_tilde is None:
        c_tilde = 2.0 * estimate_d0(domain, r, grid)
    M = mesh_size(grid, n, delta, alpha, c_tilde)
    if M > MAX_MESH:
        raise ContractViolation(f"membership mesh of {M} points exceeds {MAX_MESH}; raise delta")
    sup = 0.0
    if not r.is_zero:
        # chunked: the averaged Stieltjes term costs one quadrature row per mesh point
        for start in range(0, M, _MESH_CHUNK):
            k = np.arange(start, min(start + _MESH_CHUNK, M))
            mesh = grid.center + grid.radius * np.exp(2j * np.pi * k / M)
            sup = max(sup, float(np.max(np.abs(linear_statistic(sample, r, domain, mesh)))))
        sup /= n**alpha
    return MembershipVerdict(float(delta), float(alpha), M, sup, sup < delta)


# ---------------------------------------------------------------- limit kernels


def _check_point(p: SpacetimePoint | None, avg: RHSolution):
    if avg.jump.kind != "averaged":
        raise ContractViolation("limit kernels need the averaged solution")
    if p is not None and p != avg.jump.point:
        raise ContractViolation("averaged solution was computed at a different point")


def _inside(avg: RHSolution, z):
    z = np.asarray(z, dtype=complex)
    if not np.all(avg.grid.inside_upper(z)):
        raise ContractViolation("limit kernels are evaluated strictly inside gamma+")
    return z


def eval_G1(z, avg: RHSolution, r: Interpolant, p: SpacetimePoint | None = None):
    """G1 = -2i [e^theta r M12^2 + conj(e^theta r M22^2)]."""
    _check_point(p, avg)
    z = _inside(avg, z)
    if r.is_zero:
        return np.zeros(z.shape, dtype=complex)
    M = eval_M_off(avg, z)
    er = np.exp(avg.jump.point.theta(z)) * r(z)
    return -2j * (er * M[..., 0, 1] ** 2 + np.conj(er * M[..., 1, 1] ** 2))


def eval_G2(z, avg: RHSolution, r: Interpolant, p: SpacetimePoint | None = None):
    """G2 = -4 d_x Im[e^theta r M12 M22], differentiated by the product rule."""
    _check_point(p, avg)
    z = _inside(avg, z)
    if r.is_zero:
        return np.zeros(z.shape)
    M = eval_M_off(avg, z)
    dM = eval_M_off(avg, z, derivative=True)
    er = np.exp(avg.jump.point.theta(z)) * r(z)
    m12, m22, d12, d22 = M[..., 0, 1], M[..., 1, 1], dM[..., 0, 1], dM[..., 1, 1]
    inner = er * (2j * z * m12 * m22 + d12 * m22 + m12 * d22)
    return -4.0 * inner.imag


def _kernel(which: str):
    if which == "G1":
        return eval_G1
    if which == "G2":
        return eval_G2
    raise ContractViolation(f"unknown kernel {which!r}")


def kernel_mean(which: str, avg: RHSolution, r: Interpolant, domain: EigenvalueDomain,
                refine: int = 1):
    """int G dmu over the domain."""
    w, wt = domain.quadrature(refine)
    return complex(np.sum(wt * _kernel(which)(w, avg, r)))


def statistic_of_kernel(which: str, sample: SpectralSample, avg: RHSolution, r: Interpolant,
                        domain: EigenvalueDomain, mean=None):
    """X^G = sum_k G(lambda_k) - N int G dmu."""
    if mean is None:
        mean = kernel_mean(which, avg, r, domain)
    return complex(np.sum(_kernel(which)(sample.eigenvalues, avg, r)) - sample.n * mean)


def _pair_moment(Ga, Gb, wt):
    """int Ga conj(Gb) - int Ga conj(int Gb)."""
    ma, mb = np.sum(wt * Ga), np.sum(wt * Gb)
    return complex(np.sum(wt * Ga * np.conj(Gb)) - ma * np.conj(mb))


def _moments(G, wt):
    m = np.sum(wt * G)
    cov = complex(np.sum(wt * G * G) - m * m)
    var = _pair_moment(G, G, wt).real
    return cov, var


def clt_moments(which: str, avg: RHSolution, r: Interpolant, domain: EigenvalueDomain,
                p: SpacetimePoint | None = None) -> tuple[complex, float]:
    """(covariance, variance) of the Gaussian limit: int G^2 - (int G)^2 and int |G|^2 - |int G|^2."""
    _check_point(p, avg)
    kern = _kernel(which)
    w, wt = domain.quadrature()
    cov, var = _moments(kern(w, avg, r), wt)
    w2, wt2 = domain.quadrature(2)
    cov2, var2 = _moments(kern(w2, avg, r), wt2)
    err = max(abs(cov2 - cov), abs(var2 - var))
    if err > MOMENT_QUAD_TOL * max(1.0, abs(var)):
        raise AccuracyError(f"limit moments move by {err:.3g} under quadrature doubling")
    return cov, var


def correlation_limit(avg1: RHSolution, avg2: RHSolution, r: Interpolant,
                      domain: EigenvalueDomain) -> complex:
    """int G1(p1) conj G1(p2) dmu - int G1(p1) dmu conj(int G1(p2) dmu)."""
    _check_point(None, avg1)
    _check_point(None, avg2)
    w, wt = domain.quadrature()
    corr = _pair_moment(eval_G1(w, avg1, r), eval_G1(w, avg2, r), wt)
    w2, wt2 = domain.quadrature(2)
    corr2 = _pair_moment(eval_G1(w2, avg1, r), eval_G1(w2, avg2, r), wt2)
    if abs(corr2 - corr) > MOMENT_QUAD_TOL * max(1.0, abs(corr)):
        raise AccuracyError("correlation moves under quadrature doubling")
    return corr


def clt_remainder(x_g1: complex, psi_n: complex, psi_inf: complex, n: int) -> complex:
    """U = X^{G1} - N (psi_N - psi_inf)."""
    return x_g1 - n * (psi_n - psi_inf)


# ---------------------------------------------------------------- error-problem jump


def _random_minus_averaged(sample: SpectralSample, avg: RHSolution):
    V_N, dV_N = jump_random(sample, avg.jump.point).on_grid(avg.grid)
    return V_N - avg.V, dV_N - avg.dV


def _inv2(m):
    out = np.empty_like(m)
    out[..., 0, 0], out[..., 1, 1] = m[..., 1, 1], m[..., 0, 0]
    out[..., 0, 1], out[..., 1, 0] = -m[..., 0, 1], -m[..., 1, 0]
    return out / (m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0])[..., None, None]


def error_jump(sample: SpectralSample, avg: RHSolution):
    """W_N = M_- (J_N J^-1 - I) M_-^-1 at the nodes, with its x-derivative if available."""
    D, dD = _random_minus_averaged(sample, avg)
    mu = avg.mu
    mu_inv = _inv2(mu)
    W = mu @ D @ mu_inv
    if not avg.has_dx:
        return W, None
    dmu = avg.dmu
    dW = dmu @ D @ mu_inv + mu @ dD @ mu_inv - W @ dmu @ mu_inv
    return W, dW


def wn_norms(sample: SpectralSample, avg: RHSolution) -> tuple[float, float]:
    """(L-infinity, L2) norms of W_N on gamma, Frobenius per node."""
    W, _ = error_jump(sample, avg)
    f = frobenius(W)
    return float(f.max()), float(np.sqrt(np.sum(f**2 * avg.grid.arc_weights)))


def contour_route(sample: SpectralSample, avg: RHSolution) -> tuple[complex, complex]:
    """First-order field and modulus corrections from the error jump.

    Returns (-(1/pi) int (W_N)_12 ds, (1/pi) int d_x (W_N)_22 ds), to be compared
    with X^{G1}/N and X^{G2}/N.
    """
    W, dW = error_jump(sample, avg)
    g1 = -contour_integral(W[:, 0, 1], avg.grid) / np.pi
    g2 = np.nan if dW is None else contour_integral(dW[:, 1, 1], avg.grid) / np.pi
    return complex(g1), complex(g2)
