import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from solitongas.contour import ContourGrid, build_contour, cauchy_minus
from solitongas.errors import ContractViolation
from solitongas.rhp import (SpacetimePoint, averaged_solution, domain_stieltjes, eval_M_off,
                            jump_averaged, jump_random, recover_field, recover_modsq,
                            schwarz_defect, solve, solve_sie, solve_sie_dx)
from solitongas.solitons import nsoliton_residue, one_soliton
from solitongas.spectral import EigenvalueDomain, Interpolant, SpectralSample, draw_sample

DISK = EigenvalueDomain.disk(1j, 0.5)
R1 = Interpolant.constant(1.0)
GRID = build_contour(DISK, 128, 0.2)
P0 = SpacetimePoint(0.0, 0.0)
EMPTY = SpectralSample(np.array([], complex), np.array([], complex))


def test_theta():
    p = SpacetimePoint(0.7, 0.3)
    assert p.theta(0) == 0
    assert p.theta(1 + 1j) == pytest.approx(2j * 0.7 * (1 + 1j) + 2j * 0.3 * (1 + 1j) ** 2)
    with pytest.raises(ContractViolation):
        SpacetimePoint(0, -1)


def test_random_jump_examples():
    V, dV = jump_random(EMPTY, P0).on_grid(GRID)
    assert not np.any(V) and not np.any(dV)
    j = jump_random(SpectralSample([1j], [1.0]), P0)
    assert j.upper_entry(2j) == pytest.approx(1j)


def test_jump_structure():
    s = draw_sample(DISK, R1, 16, 3)
    for jump in (jump_random(s, SpacetimePoint(0.3, 0.2)),
                 jump_averaged(DISK, R1, SpacetimePoint(0.3, 0.2))):
        V, _ = jump.on_grid(GRID)
        J = V + np.eye(2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        assert np.max(np.abs(det - 1)) <= 1e-12
        assert not np.any(V[GRID.upper, 0, 1]) and not np.any(V[GRID.lower, 1, 0])
        # gamma- entry at conj(z) is conj of the gamma+ entry up to sign and the e^{+-theta} pattern
        m = GRID.mirror_index()[GRID.lower]
        z = GRID.nodes[GRID.upper][m]
        up = -V[GRID.upper, 1, 0][m] / np.exp(jump.point.theta(z))
        lo = V[GRID.lower, 0, 1] / np.exp(-jump.point.theta(np.conj(z)))
        assert np.max(np.abs(lo - np.conj(up))) <= 1e-12


def test_jump_outside_contour_rejected():
    s = SpectralSample([1j, 3j], [1.0, 1.0])
    with pytest.raises(ContractViolation):
        jump_random(s, P0).on_grid(GRID)


def test_averaged_stieltjes_mean_value():
    # 1/(z - w) is harmonic in w on the disk, so its mean is the centre value
    val = domain_stieltjes(DISK, R1, 2j)
    assert abs(val - (-1j)) < 1e-13
    assert jump_averaged(DISK, R1, P0).upper_entry(2j) == pytest.approx(1j, abs=1e-13)

    def part(f):
        g = lambda rho, phi: f(1 / (2j - (1j + rho * np.exp(1j * phi)))) * rho  # noqa: E731
        return integrate.dblquad(g, 0, 2 * np.pi, 0, 0.5, epsabs=1e-13)[0] / DISK.area

    brute = part(np.real) + 1j * part(np.imag)
    assert abs(brute - val) < 1e-10


def test_averaged_quadrature_self_convergence():
    r = Interpolant.exponential(0.8, 0.4 - 0.3j)
    z = GRID.nodes[GRID.upper][::13]
    for dom in (DISK, EigenvalueDomain.rectangle(-0.3, 0.3, 0.8, 1.2)):
        a = domain_stieltjes(dom, r, z)
        b = domain_stieltjes(dom, r, z, refine=2)
        assert np.max(np.abs(a - b)) <= 1e-10


def test_zero_interpolant_gives_identity():
    sol = averaged_solution(DISK, Interpolant.constant(0), GRID, P0)
    assert np.array_equal(sol.mu, np.broadcast_to(np.eye(2), sol.mu.shape))
    assert not np.any(sol.m1)
    assert not np.any(sol.dmu)
    assert recover_field(sol) == 0 and recover_modsq(sol) == 0
    assert np.allclose(eval_M_off(sol, np.array([0.3 + 2j, -1 - 1j])), np.eye(2))


def test_random_sie_reproduces_two_soliton():
    s = SpectralSample([1j, 0.5 + 1.5j], [1.0, 0.5])
    dom = EigenvalueDomain.disk(0.25 + 1.25j, 0.4)
    errs = {}
    for n in (64, 128, 256):
        g = build_contour(dom, n, 0.1)
        errs[n] = max(abs(recover_field(solve(jump_random(s, SpacetimePoint(x, t)), g, False))
                          - nsoliton_residue(s, x, t))
                      for x, t in [(0.0, 0.0), (0.7, 0.2), (-1.3, 0.5)])
    assert errs[256] <= 1e-6
    assert errs[64] >= 10 * errs[128]


def test_small_jump_neumann_first_order():
    eps = 1e-3
    sol = averaged_solution(DISK, Interpolant.constant(eps), GRID, SpacetimePoint(0.2, 0.1), False)
    first = np.eye(2) + cauchy_minus(sol.V, GRID)
    assert np.max(np.abs(sol.mu - first)) <= 1e-5


def test_derivative_matches_finite_difference():
    h = 1e-4
    x, t = 0.4, 0.15
    base = averaged_solution(DISK, R1, GRID, SpacetimePoint(x, t))
    plus = averaged_solution(DISK, R1, GRID, SpacetimePoint(x + h, t), False)
    minus = averaged_solution(DISK, R1, GRID, SpacetimePoint(x - h, t), False)
    fd = (plus.m1 - minus.m1) / (2 * h)
    assert np.max(np.abs(fd - base.dm1)) <= 1e-7


def test_solve_dx_requires_matching_base():
    a = solve_sie(jump_averaged(DISK, R1, P0), GRID)
    with pytest.raises(ContractViolation):
        solve_sie_dx(jump_averaged(DISK, R1, SpacetimePoint(1.0, 0.0)), GRID, a)


def test_modsq_two_ways_and_nonnegative():
    for x in np.linspace(-2, 2, 21):
        sol = averaged_solution(DISK, R1, GRID, SpacetimePoint(x, 0.1))
        m = recover_modsq(sol)
        assert m >= 0
        assert abs(m - abs(recover_field(sol)) ** 2) <= 1e-6
        assert abs((-2j * sol.dm1[1, 1]).imag) <= 1e-9


def test_averaged_disk_is_one_soliton():
    # the averaged jump of a disk equals a one-soliton jump at the centre with c = r(centre)
    for r in (R1, Interpolant.exponential(0.7 + 0.2j, 0.3 - 0.5j)):
        for x, t in [(0.0, 0.0), (0.5, 0.2), (-1.1, 0.4)]:
            psi = recover_field(averaged_solution(DISK, r, GRID, SpacetimePoint(x, t), False))
            exact = one_soliton(1j, complex(r(1j)), x, t)
            assert abs(psi - exact) <= 1e-12


def test_offcontour_determinant_and_schwarz():
    sol = averaged_solution(DISK, Interpolant.affine(1.0, 0.3j), GRID, SpacetimePoint(0.3, 0.1))
    rng = np.random.default_rng(5)
    z = 1j + (0.1 + 2.5 * rng.random(10)) * np.exp(1j * np.pi * (0.1 + 0.8 * rng.random(10)))
    z = z[GRID.distance(z) > 0.1]
    M = eval_M_off(sol, z)
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    assert np.max(np.abs(det - 1)) <= 1e-9
    assert schwarz_defect(sol, z) <= 1e-9
    assert abs(np.conj(sol.m1[1, 0]) + sol.m1[0, 1]) <= 1e-9


def test_grid_convergence_past_128():
    p = SpacetimePoint(0.5, 0.2)
    a = recover_field(averaged_solution(DISK, R1, GRID, p, False))
    b = recover_field(averaged_solution(DISK, R1, GRID.refined(), p, False))
    assert abs(a - b) <= 1e-8


def test_sie_residual_reported():
    sol = solve(jump_random(draw_sample(DISK, R1, 8, 1), SpacetimePoint(0.1, 0.0)), GRID)
    assert sol.residual <= 1e-10
    assert 1 <= sol.condition < 1e6


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(0, 0.5))
def test_random_sie_matches_residue_property(n, seed, x, t):
    s = draw_sample(DISK, R1, n, seed)
    g = ContourGrid(1j, 0.7, 256)
    psi = recover_field(solve(jump_random(s, SpacetimePoint(x, t)), g, False))
    assert abs(psi - nsoliton_residue(s, x, t)) <= 1e-8
