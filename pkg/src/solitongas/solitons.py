"""Exact reflectionless N-soliton solutions of the focusing NLS equation.

Two independent algebraic routes are provided:

* ``nsoliton_residue`` solves the 2N x 2N linear system that the residue
  conditions impose on the partial-fraction ansatz
  X(z) = I + sum_k A_k/(z - lambda_k) + B_k/(z - conj(lambda_k)).
* ``nsoliton_dressing`` adds one soliton at a time with rank-one Darboux
  factors T_n(z) = I + (lambda_n - conj lambda_n)/(z - lambda_n) P_n applied to
  the free solution.

The dressing constants are tied to the RHP norming constants by

    C_n = (lambda_n - conj lambda_n) / c_n * prod_{j != n} (lambda_n - conj lambda_j) / (lambda_n - lambda_j),

which follows from writing X_n = T_n X_{n-1} diag(1, (z - lambda_n)/(z - conj lambda_n)).
For N = 1 it reduces to C = 2i Im(lambda)/c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateDressingError, SolvabilityError
from .spectral import SpectralSample

COINCIDENCE_TOL = 1e-12
RESIDUAL_TOL = 1e-10


def theta(z, x, t):
    """Phase 2ixz + 2itz^2."""
    z = np.asarray(z, dtype=complex)
    return 2j * x * z + 2j * t * z * z


def free_solution(z, x, t) -> np.ndarray:
    """diag(exp(-izx - iz^2 t), exp(izx + iz^2 t)), the ZS solution for zero potential."""
    z = complex(z)
    e = np.exp(-1j * z * x - 1j * z * z * t)
    return np.array([[e, 0], [0, 1.0 / e]], dtype=complex)


def amplitude_bound(sample: SpectralSample) -> float:
    """4 * sum Im(lambda_k), an upper bound for |psi_N| at every (x, t)."""
    return 4.0 * float(np.sum(sample.eigenvalues.imag))


def one_soliton(lam: complex, c: complex, x, t):
    """Closed-form one-soliton with eigenvalue ``lam`` and norming constant ``c``.

    psi = -2i eta exp(-i arg C) sech(log|C| - log(2 eta)),  C = c exp(theta(lam)),
    eta = Im(lam). The peak 2 eta sits where |C| = 2 eta.
    """
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    eta = lam.imag
    th = theta(lam, x, t)
    log_mod = np.log(abs(c)) + th.real
    arg = np.angle(c) + th.imag
    return -2j * eta * np.exp(-1j * arg) / np.cosh(log_mod - np.log(2.0 * eta))


def _check_distinct(lam: np.ndarray):
    if lam.size < 2:
        return
    d = np.abs(lam[:, None] - lam[None, :])
    d[np.diag_indices(lam.size)] = np.inf
    scale = max(1.0, float(np.max(np.abs(lam))))
    if d.min() <= COINCIDENCE_TOL * scale:
        raise ContractViolation("coincident eigenvalues: the residue conditions need simple poles")


@dataclass(frozen=True)
class ResidueSystem:
    """Linear system for the residue numerators at one (x, t).

    ``matrix`` acts on (a_1..a_N, b_1..b_N), where a_k is the first column of
    A_k and b_k the second column of B_k; each solution column is one vector
    component. Rows are equilibrated so that no entry exceeds one in modulus.
    """

    eigenvalues: np.ndarray
    log_norming: np.ndarray  # log(c_k) + theta(lambda_k; x, t)
    matrix: np.ndarray
    rhs: np.ndarray
    solution: np.ndarray
    condition: float
    residual: float

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def residues(self) -> tuple[np.ndarray, np.ndarray]:
        """A_k and B_k as arrays of 2x2 matrices."""
        N = self.n
        A = np.zeros((N, 2, 2), dtype=complex)
        B = np.zeros((N, 2, 2), dtype=complex)
        A[:, :, 0] = self.solution[:N, :]
        B[:, :, 1] = self.solution[N:, :]
        return A, B

    def first_moment(self) -> np.ndarray:
        """The 1/z coefficient of X."""
        A, B = self.residues()
        return A.sum(axis=0) + B.sum(axis=0)

    def psi(self) -> complex:
        return 2j * self.first_moment()[0, 1]

    def regular_part(self, k: int, conjugate: bool = False) -> np.ndarray:
        """X at lambda_k (or conj lambda_k) with its own pole removed."""
        lam = self.eigenvalues
        A, B = self.residues()
        z = np.conj(lam[k]) if conjugate else lam[k]
        X = np.eye(2, dtype=complex)
        for j in range(self.n):
            if conjugate or j != k:
                X = X + A[j] / (z - lam[j])
            if not conjugate or j != k:
                X = X + B[j] / (z - np.conj(lam[j]))
        return X

    def residue_defects(self) -> np.ndarray:
        """Largest violation of the two residue conditions at each pole."""
        A, B = self.residues()
        out = np.empty(self.n)
        for k in range(self.n):
            C = np.exp(self.log_norming[k])
            Nk = np.array([[0, 0], [C, 0]], dtype=complex)
            Nb = np.array([[0, -np.conj(C)], [0, 0]], dtype=complex)
            d1 = A[k] - self.regular_part(k) @ Nk
            d2 = B[k] - self.regular_part(k, conjugate=True) @ Nb
            scale = 1.0 + abs(C) * np.abs(self.regular_part(k)).max()
            out[k] = max(np.abs(d1).max(), np.abs(d2).max()) / scale
        return out


def _assemble(lam, log_C, components=(0, 1)):
    """Equilibrated residue matrices and right-hand sides, batched over leading axes."""
    N = lam.size
    shift = np.maximum(log_C.real, 0.0)
    s = np.exp(-shift)
    sC = np.exp(log_C - shift)
    sD = -np.conj(sC)
    K1 = 1.0 / (lam[:, None] - np.conj(lam)[None, :])
    K2 = np.conj(K1)
    batch = log_C.shape[:-1]
    A = np.zeros(batch + (2 * N, 2 * N), dtype=complex)
    idx = np.arange(N)
    A[..., idx, idx] = s
    A[..., idx + N, idx + N] = s
    A[..., :N, N:] = -sC[..., :, None] * K1
    A[..., N:, :N] = -sD[..., :, None] * K2
    rhs = np.zeros(batch + (2 * N, len(components)), dtype=complex)
    for col, comp in enumerate(components):
        if comp == 0:
            rhs[..., N:, col] = sD
        else:
            rhs[..., :N, col] = sC
    return A, rhs


def residue_system(sample: SpectralSample, x: float, t: float) -> ResidueSystem:
    """Full residue system at one (x, t), with conditioning and residual diagnostics."""
    if t < 0:
        raise ContractViolation("t must be nonnegative")
    lam = sample.eigenvalues
    _check_distinct(lam)
    log_C = np.log(sample.constants) + theta(lam, x, t)
    A, rhs = _assemble(lam, log_C)
    cond = float(np.linalg.cond(A)) if lam.size else 1.0
    if not np.isfinite(cond) or cond > 1e14:
        raise SolvabilityError(f"residue system is numerically singular (cond ~ {cond:.3g})", cond)
    sol = np.linalg.solve(A, rhs)
    res = float(np.linalg.norm(A @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300))
    if res > RESIDUAL_TOL:
        raise SolvabilityError(f"residue system residual {res:.3g} exceeds {RESIDUAL_TOL}", cond)
    return ResidueSystem(lam, log_C, A, rhs, sol, cond, res)


def nsoliton_residue(sample: SpectralSample, x, t=0.0):
    """psi_N(x, t) from the residue system; ``x`` and ``t`` broadcast together."""
    xb, tb = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    if np.any(tb < 0):
        raise ContractViolation("t must be nonnegative")
    lam = sample.eigenvalues
    if lam.size == 0:
        return np.zeros(xb.shape, dtype=complex)[()]
    _check_distinct(lam)
    log_C = np.log(sample.constants) + theta(lam, xb[..., None], tb[..., None])
    A, rhs = _assemble(lam, log_C, components=(0,))
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolvabilityError(f"residue system is singular: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SolvabilityError("residue system produced non-finite residues")
    N = lam.size
    psi = 2j * sol[..., N:, 0].sum(axis=-1)
    return psi[()]


def dressing_constants(sample: SpectralSample) -> np.ndarray:
    """Dressing constants C_n equivalent to the sample's RHP norming constants."""
    lam = sample.eigenvalues
    _check_distinct(lam)
    C = (lam - np.conj(lam)) / sample.constants
    for n in range(lam.size):
        others = np.delete(lam, n)
        C[n] *= np.prod((lam[n] - np.conj(others)) / (lam[n] - others))
    return C


@dataclass(frozen=True)
class DressingState:
    """Dressing recursion after ``step`` solitons have been added.

    ``phi`` holds Phi^(step) at conj(lambda_m) for every m, batched over the
    evaluation points: shape (N, P, 2, 2).
    """

    step: int
    psi: np.ndarray
    eigenvalues: np.ndarray
    constants: np.ndarray
    phi: np.ndarray

    @property
    def done(self) -> bool:
        return self.step == self.eigenvalues.size


def initial_dressing_state(eigenvalues, constants, x, t) -> DressingState:
    lam = np.atleast_1d(np.asarray(eigenvalues, dtype=complex))
    C = np.atleast_1d(np.asarray(constants, dtype=complex))
    x = np.atleast_1d(np.asarray(x, float))
    t = np.broadcast_to(np.asarray(t, float), x.shape)
    z = np.conj(lam)[:, None]
    e = np.exp(-1j * z * x[None, :] - 1j * z * z * t[None, :])
    phi = np.zeros((lam.size, x.size, 2, 2), dtype=complex)
    phi[..., 0, 0] = e
    phi[..., 1, 1] = 1.0 / e
    return DressingState(0, np.zeros(x.size, dtype=complex), lam, C, phi)


def dressing_step(state: DressingState) -> DressingState:
    """Add soliton number ``state.step + 1`` to the potential."""
    n = state.step
    if state.done:
        raise ContractViolation("all solitons have already been added")
    lam, C = state.eigenvalues[n], state.constants[n]
    if lam.imag <= 0:
        raise ContractViolation("eigenvalue must lie in the open upper half-plane")
    if C == 0:
        raise ContractViolation("dressing constant must be nonzero")
    # v = conj(q_n) with q_n = conj(Phi(conj lam)) (1, C_n)^T
    w = np.array([1.0, np.conj(C)])
    v = state.phi[n] @ w
    norm2 = np.sum(np.abs(v) ** 2, axis=-1)
    if np.any(norm2 == 0) or not np.all(np.isfinite(norm2)):
        raise DegenerateDressingError(f"dressing vector vanished at step {n + 1}")
    gap = lam - np.conj(lam)
    psi = state.psi + 2j * gap * v[:, 0] * np.conj(v[:, 1]) / norm2
    proj = v[:, :, None] * np.conj(v)[:, None, :] / norm2[:, None, None]
    phi = state.phi.copy()
    for m in range(n + 1, state.eigenvalues.size):
        zm = np.conj(state.eigenvalues[m])
        T = np.eye(2) + (gap / (zm - lam)) * proj
        phi[m] = T @ phi[m]
        # Phi only matters up to a scalar multiple at each point
        phi[m] /= np.abs(phi[m]).max(axis=(-2, -1), keepdims=True)
    return DressingState(n + 1, psi, state.eigenvalues, state.constants, phi)


def nsoliton_dressing(sample: SpectralSample, x, t=0.0):
    """psi_N(x, t) by N successive Darboux dressings of the zero potential."""
    xb, tb = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    if np.any(tb < 0):
        raise ContractViolation("t must be nonnegative")
    if sample.n == 0:
        return np.zeros(xb.shape, dtype=complex)[()]
    state = initial_dressing_state(sample.eigenvalues, dressing_constants(sample),
                                   xb.ravel(), tb.ravel())
    while not state.done:
        state = dressing_step(state)
    return state.psi.reshape(xb.shape)[()]


def fnls_residual(psi, x, t, h):
    """Centered-difference residual of i psi_t + psi_xx/2 + |psi|^2 psi at (x, t).

    ``psi`` is a vectorised callable psi(x, t).
    """
    x = np.asarray(x, float)
    t = np.asarray(t, float)
    p0 = psi(x, t)
    pt = (psi(x, t + h) - psi(x, t - h)) / (2 * h)
    pxx = (psi(x + h, t) - 2 * p0 + psi(x - h, t)) / h**2
    return 1j * pt + 0.5 * pxx + np.abs(p0) ** 2 * p0
