"""Self-verification suite run by ``solitongas verify``.

Each check records the measured value, its tolerance and a verdict; the suite
passes only if every check does.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .contour import ContourGrid, cauchy_minus, cauchy_plus
from .ensemble import trial_seed
from .errors import SolitonGasError
from .fluctuations import contour_route, statistic_of_kernel
from .rhp import (SpacetimePoint, averaged_solution, jump_averaged, jump_random, recover_field,
                  recover_modsq, schwarz_defect, solve)
from .solitons import amplitude_bound, fnls_residual, nsoliton_dressing, nsoliton_residue
from .spectral import draw_sample


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return f"[{mark}] {self.name}: {self.value:.3e} (tol {self.tolerance:.1e}){extra}"


@dataclass
class VerificationReport:
    config: ExperimentConfig
    checks: list[Check] = field(default_factory=list)
    convergence: list[dict] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name, value, tol, note="", passed=None):
        value = float(value)
        ok = bool(value <= tol) if passed is None else bool(passed)
        self.checks.append(Check(name, value, float(tol), ok, note))

    def text(self) -> str:
        lines = [c.line() for c in self.checks]
        if self.convergence:
            lines.append("grid convergence (averaged field at the first point):")
            lines.append("  nodes/circle   |psi - psi_finest|")
            for row in self.convergence:
                lines.append(f"  {row['nodes']:>12d}   {row['difference']:.3e}")
        lines.append("verification " + ("passed" if self.passed else "FAILED"))
        return "\n".join(lines)

    def to_json(self) -> str:
        doc = {"config": self.config.to_dict(), "config_hash": self.config.content_hash(),
               "passed": self.passed,
               "checks": [{"name": c.name, "value": c.value if np.isfinite(c.value) else str(c.value),
                           "tolerance": c.tolerance, "passed": c.passed, "note": c.note}
                          for c in self.checks],
               "convergence": self.convergence}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _samples(cfg: ExperimentConfig, n: int, count: int, salt: int):
    return [draw_sample(cfg.domain, cfg.interpolant, n, trial_seed(cfg.seed + salt, n, i))
            for i in range(count)]


def _n_values(n_max: int):
    out, n = [], 1
    while n <= n_max:
        out.append(n)
        n *= 2
    return out


def check_two_routes(cfg, report):
    x = np.linspace(-5, 5, 41)
    worst = 0.0
    for n in _n_values(cfg.verify_n_max):
        for s in _samples(cfg, n, cfg.verify_seeds, 1):
            for t in (0.0, 0.5, 1.0):
                d = nsoliton_dressing(s, x, t) - nsoliton_residue(s, x, t)
                worst = max(worst, float(np.max(np.abs(d))))
    report.add("dressing vs residue N-soliton", worst, cfg.tolerance("two_route", 1e-8))


def check_amplitude(cfg, report):
    x = np.linspace(-5, 5, 101)
    worst = -np.inf
    for n in (1, 4, 16, 32):
        for s in _samples(cfg, n, cfg.verify_seeds, 2):
            bound = amplitude_bound(s)
            for t in (0.0, 0.3):
                worst = max(worst, float(np.max(np.abs(nsoliton_residue(s, x, t)))) - bound)
    report.add("amplitude bound excess", max(worst, 0.0), 1e-9,
               note=f"max |psi| - bound = {worst:.3e}")


def check_plemelj(grid: ContourGrid, report):
    rng = np.random.default_rng(0)
    n = grid.n
    k = np.arange(-n // 4, n // 4)
    coef = rng.normal(size=(2, k.size)) + 1j * rng.normal(size=(2, k.size))
    phase = np.exp(2j * np.pi * np.outer(np.arange(n), k) / n)
    h = np.concatenate([phase @ coef[0], phase @ coef[1]])
    d = cauchy_plus(h, grid) - cauchy_minus(h, grid) - h
    report.add("Plemelj C+ - C- = I", np.max(np.abs(d)) / np.max(np.abs(h)), 1e-12)


def check_structure(cfg, grid, report):
    p = SpacetimePoint(*cfg.points[0])
    s = _samples(cfg, 16, 1, 3)[0]
    worst = 0.0
    for jump in (jump_random(s, p), jump_averaged(cfg.domain, cfg.interpolant, p)):
        V, _ = jump.on_grid(grid)
        J = V + np.eye(2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        worst = max(worst, float(np.max(np.abs(det - 1))))
    report.add("det J = 1 on the contour", worst, 1e-12)

    avg = averaged_solution(cfg.domain, cfg.interpolant, grid, p)
    rng = np.random.default_rng(1)
    # probes above gamma+ and inside the domain; their mirrors sit below the axis
    far = grid.center + grid.radius * (1.5 + rng.random(5)) * np.exp(1j * np.pi * (0.1 + 0.8 * rng.random(5)))
    near = cfg.domain.centroid + 0.5 * cfg.domain.circumradius * np.exp(
        2j * np.pi * rng.random(5))
    probes = np.concatenate([far, near])
    report.add("Schwarz symmetry of M", schwarz_defect(avg, probes), 1e-9)
    m1 = avg.m1
    report.add("M1 structure conj(M1_21) = -M1_12", abs(np.conj(m1[1, 0]) + m1[0, 1]), 1e-9)
    psi = recover_field(avg)
    report.add("|psi_inf|^2 two ways", abs(recover_modsq(avg) - abs(psi) ** 2), 1e-6)


def check_pde(cfg, grid, report):
    dom, r = cfg.domain, cfg.interpolant
    x0, t0 = cfg.points[-1]
    t0 = max(t0, 0.1)

    def psi_inf(x, t):
        return np.array([recover_field(averaged_solution(dom, r, grid, SpacetimePoint(xi, ti),
                                                         with_dx=False))
                         for xi, ti in zip(np.ravel(x), np.ravel(np.broadcast_to(t, np.shape(x))))])

    res = [abs(fnls_residual(psi_inf, np.array([x0]), t0, h)[0]) for h in (4e-3, 2e-3, 1e-3)]
    order = np.log2(res[0] / res[1]) if res[1] > 0 else np.inf
    report.add("fNLS residual of psi_inf at h = 1e-3", res[-1],
               cfg.tolerance("pde_inf", 1e-4), note=f"observed order {order:.2f}")
    s = _samples(cfg, 3, 1, 4)[0]
    res_n = [abs(fnls_residual(lambda x, t: nsoliton_residue(s, x, t), np.array([x0]), t0, h)[0])
             for h in (4e-3, 2e-3, 1e-3)]
    order_n = np.log2(res_n[0] / res_n[1])
    report.add("fNLS residual of psi_3 at h = 1e-3", res_n[-1], 1e-4,
               note=f"observed order {order_n:.2f}")
    report.add("second-order decay of the psi_3 residual", abs(order_n - 2), 0.3,
               note=f"order {order_n:.2f}")


def check_routes(cfg, grid, report):
    dom, r = cfg.domain, cfg.interpolant
    worst = 0.0
    for xt in cfg.points:
        avg = averaged_solution(dom, r, grid, SpacetimePoint(*xt))
        for n in _n_values(cfg.verify_n_max):
            for s in _samples(cfg, n, 2, 5):
                c1, c2 = contour_route(s, avg)
                g1 = statistic_of_kernel("G1", s, avg, r, dom) / n
                g2 = statistic_of_kernel("G2", s, avg, r, dom) / n
                worst = max(worst, abs(c1 - g1), abs(c2 - g2))
    report.add("contour integrals vs kernel statistics", worst, 1e-8)


def check_random_sie(cfg, grid, report):
    worst = 0.0
    for xt in cfg.points:
        s = _samples(cfg, 2, 1, 6)[0]
        psi = recover_field(solve(jump_random(s, SpacetimePoint(*xt)), grid, with_dx=False))
        worst = max(worst, abs(psi - nsoliton_residue(s, *xt)))
    report.add("random-jump SIE vs N = 2 soliton", worst, 1e-6)


def convergence_table(cfg, report):
    dom, r = cfg.domain, cfg.interpolant
    p = SpacetimePoint(*cfg.points[0])
    vals = {}
    for n in sorted(cfg.verify_nodes):
        grid = ContourGrid(cfg.domain.centroid, cfg.domain.circumradius + cfg.clearance, n)
        vals[n] = recover_field(averaged_solution(dom, r, grid, p, with_dx=False))
    finest = max(vals)
    rows = [{"nodes": n, "psi_re": v.real, "psi_im": v.imag,
             "difference": abs(v - vals[finest])} for n, v in vals.items()]
    report.convergence = rows
    past = [r_["difference"] for r_ in rows if r_["nodes"] >= 128]
    if past:
        report.add("grid change past 128 nodes", max(past), 1e-8)
    diffs = [r_["difference"] for r_ in rows[:-1]]
    floor = 1e-12
    monotone = all(b <= a or b <= floor for a, b in zip(diffs, diffs[1:]))
    report.add("convergence table decreasing", 0.0 if monotone else 1.0, 0.5,
               note="differences shrink as nodes double until roundoff")


def run_verify(config: ExperimentConfig) -> VerificationReport:
    start = time.perf_counter()
    report = VerificationReport(config)
    try:
        grid = config.grid()
    except SolitonGasError as exc:
        report.add("contour geometry", 1.0, 0.0, note=str(exc), passed=False)
        report.seconds = time.perf_counter() - start
        return report
    steps = [
        lambda: check_two_routes(config, report),
        lambda: check_amplitude(config, report),
        lambda: check_plemelj(grid, report),
        lambda: check_structure(config, grid, report),
        lambda: check_random_sie(config, grid, report),
        lambda: check_pde(config, grid, report),
        lambda: check_routes(config, grid, report),
        lambda: convergence_table(config, report),
    ]
    for step in steps:
        try:
            step()
        except SolitonGasError as exc:
            report.add(f"{type(exc).__name__}", 1.0, 0.0, note=str(exc), passed=False)
    report.seconds = time.perf_counter() - start
    return report

