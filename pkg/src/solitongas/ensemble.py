"""Monte Carlo ensembles of random N-solitons compared with the averaged problem.

Every trial draws its own sample from seed = SeedSequence([base, N, i]), so a
trial's outcome depends only on (config, N, i). Trials may run in a process
pool; results are gathered in trial order and reduced single-threaded, so
outputs are identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .config import ExperimentConfig
from .errors import SolitonGasError
from .fluctuations import (bdelta_membership, clt_moments, clt_remainder, correlation_limit,
                           estimate_d0, kernel_mean, mesh_size, statistic_of_kernel)
from .rhp import RHSolution, SpacetimePoint, averaged_solution, recover_field, recover_modsq
from .solitons import nsoliton_residue
from .spectral import draw_sample

FAILURE_LIMIT = 0.01
SKEW_TOL = 0.1
KURT_TOL = 0.2
KS_LEVEL = 0.01

CLT_COLUMNS = [
    "N", "x", "t", "trials",
    "emp_var_G1_re", "emp_var_G1_im", "emp_E_sq_G1_re", "emp_E_sq_G1_im",
    "pred_var_G1", "pred_cov_G1_re", "pred_cov_G1_im", "emp_var_G2", "pred_var_G2",
    "se_var_G1_re", "se_var_G1_im", "se_E_sq_G1_re", "se_E_sq_G1_im", "se_var_G2",
    "failures",
]

LLN_COLUMNS = [
    "N", "x", "t", "trials",
    "mean_abs_field", "se_mean_abs_field", "mean_abs_modsq", "se_mean_abs_modsq",
    "mean_field_re", "se_mean_field_re", "mean_field_im", "se_mean_field_im",
    "var_field", "se_var_field", "mean_modsq", "se_mean_modsq", "var_modsq", "se_var_modsq",
    "mean_abs_U_over_sqrtN", "se_mean_abs_U_over_sqrtN", "membership_out_freq",
    "se_membership_out_freq", "failures",
]

REMAINDER_COLUMNS = ["N", "x", "t", "trials", "mean_abs_U_over_sqrtN",
                     "se_mean_abs_U_over_sqrtN", "failures"]

MEMBERSHIP_COLUMNS = ["N", "trials", "delta", "alpha", "mesh_size", "out_freq", "se_out_freq",
                      "fitted_bound", "failures"]

CORR_COLUMNS = ["N", "x1", "t1", "x2", "t2", "trials", "emp_corr_re", "emp_corr_im",
                "pred_corr_re", "pred_corr_im", "se_corr_re", "se_corr_im", "failures"]


def trial_seed(base: int, n: int, i: int) -> int:
    return int(np.random.SeedSequence([base, n, i]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------- shared state


@dataclass(frozen=True)
class PointContext:
    point: SpacetimePoint
    avg: RHSolution
    psi_inf: complex
    modsq_inf: float
    mean_g1: complex
    mean_g2: float


@dataclass
class EnsembleContext:
    config: ExperimentConfig
    points: list[PointContext]
    c_tilde: float
    degenerate: bool

    @classmethod
    def build(cls, config: ExperimentConfig, points) -> "EnsembleContext":
        grid = config.grid()
        dom, r = config.domain, config.interpolant
        ctxs = []
        for x, t in points:
            p = SpacetimePoint(x, t)
            avg = averaged_solution(dom, r, grid, p)
            ctxs.append(PointContext(p, avg, recover_field(avg), recover_modsq(avg),
                                     kernel_mean("G1", avg, r, dom),
                                     kernel_mean("G2", avg, r, dom).real))
        degenerate = r.is_zero
        if config.c_tilde is not None:
            c_tilde = config.c_tilde
        elif degenerate:
            c_tilde = 1.0
        else:
            c_tilde = 2.0 * estimate_d0(dom, r, grid, seed=config.seed)
        return cls(config, ctxs, c_tilde, degenerate)


@dataclass
class TrialResult:
    index: int
    seed: int
    ok: bool
    error: str = ""
    psi: np.ndarray = field(default=None, repr=False)
    modsq: np.ndarray = field(default=None, repr=False)
    xg1: np.ndarray = field(default=None, repr=False)
    xg2: np.ndarray = field(default=None, repr=False)
    sup: float = 0.0
    outside: bool = False


def run_trial(ctx: EnsembleContext, n: int, i: int) -> TrialResult:
    cfg = ctx.config
    seed = trial_seed(cfg.seed, n, i)
    P = len(ctx.points)
    if ctx.degenerate:
        z = np.zeros(P, dtype=complex)
        return TrialResult(i, seed, True, "", z, np.zeros(P), z.copy(), np.zeros(P), 0.0, False)
    try:
        s = draw_sample(cfg.domain, cfg.interpolant, n, seed)
        psi = np.empty(P, dtype=complex)
        xg1 = np.empty(P, dtype=complex)
        xg2 = np.empty(P)
        for k, pc in enumerate(ctx.points):
            psi[k] = nsoliton_residue(s, pc.point.x, pc.point.t)
            xg1[k] = statistic_of_kernel("G1", s, pc.avg, cfg.interpolant, cfg.domain, pc.mean_g1)
            xg2[k] = statistic_of_kernel("G2", s, pc.avg, cfg.interpolant, cfg.domain,
                                         pc.mean_g2).real
        verdict = bdelta_membership(s, cfg.interpolant, cfg.domain, ctx.points[0].avg.grid,
                                    cfg.delta, cfg.alpha, ctx.c_tilde)
    except (SolitonGasError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return TrialResult(i, seed, False, f"{type(exc).__name__}: {exc}")
    modsq = psi.real**2 + psi.imag**2
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(xg1))):
        return TrialResult(i, seed, False, "non-finite trial output")
    return TrialResult(i, seed, True, "", psi, modsq, xg1, xg2, verdict.sup, not verdict.inside)


_WORKER_CTX: EnsembleContext | None = None


def _init_worker(config_dict, points):
    global _WORKER_CTX
    _WORKER_CTX = EnsembleContext.build(ExperimentConfig.from_dict(config_dict), points)


def _work(args):
    n, i = args
    return run_trial(_WORKER_CTX, n, i)


def run_trials(ctx: EnsembleContext, n: int, trials: int, threads: int = 1) -> list[TrialResult]:
    if threads <= 1:
        return [run_trial(ctx, n, i) for i in range(trials)]
    pts = [(pc.point.x, pc.point.t) for pc in ctx.points]
    with ProcessPoolExecutor(threads, initializer=_init_worker,
                             initargs=(ctx.config.to_dict(), pts)) as pool:
        chunk = max(1, trials // (8 * threads))
        return list(pool.map(_work, [(n, i) for i in range(trials)], chunksize=chunk))


@dataclass
class Batch:
    """Trials at one N, split into successes (stacked arrays) and failures."""

    n: int
    trials: int
    results: list[TrialResult]

    def __post_init__(self):
        good = [r for r in self.results if r.ok]
        self.failures = [{"index": r.index, "seed": r.seed, "error": r.error}
                         for r in self.results if not r.ok]
        self.count = len(good)
        if good:
            self.psi = np.array([r.psi for r in good])
            self.modsq = np.array([r.modsq for r in good])
            self.xg1 = np.array([r.xg1 for r in good])
            self.xg2 = np.array([r.xg2 for r in good])
            self.outside = np.array([r.outside for r in good], dtype=float)
        else:
            raise SolitonGasError(f"every trial failed at N = {self.n}")

    @property
    def failure_fraction(self) -> float:
        return len(self.failures) / self.trials


def run_batches(ctx, spec_n_list, trials, threads) -> list[Batch]:
    return [Batch(n, trials, run_trials(ctx, n, trials, threads)) for n in spec_n_list]


# ---------------------------------------------------------------- statistics


def mean_se(v) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if v.size < 2:
        return float(v.mean()), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def second_moment(a, b=None) -> complex:
    """Sample mean of a conj(b), computed the same way for every caller."""
    b = a if b is None else b
    return complex(np.mean(a * np.conj(b)))


def normality(v) -> dict:
    v = np.asarray(v, dtype=float)
    sd = v.std()
    if not sd > 0:
        return {"skewness": 0.0, "excess_kurtosis": 0.0, "ks_pvalue": 1.0, "pass": False,
                "degenerate": True}
    z = (v - v.mean()) / sd
    sk = float(stats.skew(z))
    ku = float(stats.kurtosis(z))
    ks = float(stats.kstest(z, "norm").pvalue)
    return {"skewness": sk, "excess_kurtosis": ku, "ks_pvalue": ks,
            "pass": bool(abs(sk) <= SKEW_TOL and abs(ku) <= KURT_TOL and ks >= KS_LEVEL),
            "degenerate": False}


def loglog_slope(ns, means) -> float:
    ns, means = np.asarray(ns, float), np.asarray(means, float)
    if np.any(means <= 0):
        return float("nan")
    return float(np.polyfit(np.log(ns), np.log(means), 1)[0])


def strictly_decreasing(v) -> bool:
    return bool(np.all(np.diff(np.asarray(v, float)) < 0))


def decreasing_within_se(means, ses) -> bool:
    """No step increases by more than the combined standard error."""
    m, s = np.asarray(means, float), np.asarray(ses, float)
    return bool(np.all(m[1:] - m[:-1] <= np.hypot(s[1:], s[:-1])))


def membership_fit(ns, freq, delta: float, alpha: float, p: int) -> dict:
    """Non-negative fit of c1 d^-2p N^-p(2a-1) + c2 d^-(2p+1) N^-(a(2p+1)-(p+1))."""
    ns = np.asarray(ns, float)
    e1 = p * (2 * alpha - 1)
    e2 = alpha * (2 * p + 1) - (p + 1)
    A = np.column_stack([delta ** (-2 * p) * ns ** (-e1), delta ** (-(2 * p + 1)) * ns ** (-e2)])
    coef, resid = optimize.nnls(A, np.asarray(freq, float))
    return {"p": p, "exponent_1": e1, "exponent_2": e2, "c1": float(coef[0]),
            "c2": float(coef[1]), "residual": float(resid), "fitted": (A @ coef).tolist()}


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class EnsembleSummary:
    command: str
    config: ExperimentConfig
    tables: dict[str, tuple[list[str], list[dict]]]
    checks: dict[str, bool]
    details: dict
    failures: list[dict]
    valid: bool
    seconds: float = 0.0

    def to_json(self) -> str:
        doc = {"command": self.command, "config": self.config.to_dict(),
               "config_hash": self.config.content_hash(), "checks": self.checks,
               "valid": self.valid, "failures": self.failures, "details": self.details,
               "tables": {k: rows for k, (_, rows) in self.tables.items()}}
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> list[Path]:
        """CSV tables and the JSON summary; wall-clock time goes to a separate file."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, (cols, rows) in self.tables.items():
            path = out / f"{name}.csv"
            path.write_text(csv_text(cols, rows))
            paths.append(path)
        path = out / f"{self.command}_summary.json"
        path.write_text(self.to_json())
        paths.append(path)
        (out / f"{self.command}_timing.json").write_text(
            json.dumps({"command": self.command, "seconds": self.seconds}) + "\n")
        return paths


def _collect_failures(batches) -> tuple[list[dict], bool]:
    failures = []
    valid = True
    for b in batches:
        failures.extend({"N": b.n, **f} for f in b.failures)
        valid &= b.failure_fraction <= FAILURE_LIMIT
    return failures, bool(valid)


# ---------------------------------------------------------------- experiments


def run_lln(config: ExperimentConfig, threads: int | None = None) -> EnsembleSummary:
    """Mean absolute deviations of psi_N and |psi_N|^2 from the averaged field, by N."""
    start = time.perf_counter()
    threads = threads or config.threads
    ctx = EnsembleContext.build(config, config.points)
    spec = config.lln
    batches = run_batches(ctx, spec.n_list, spec.trials, threads)
    rows, details = [], {"points": []}
    checks = {}
    for k, pc in enumerate(ctx.points):
        per_point = {"x": pc.point.x, "t": pc.point.t, "psi_inf": pc.psi_inf,
                     "modsq_inf": pc.modsq_inf}
        abs_f, abs_m = [], []
        for b in batches:
            d = b.psi[:, k] - pc.psi_inf
            dm = b.modsq[:, k] - pc.modsq_inf
            u = np.abs(clt_remainder(b.xg1[:, k], b.psi[:, k], pc.psi_inf, b.n)) / math.sqrt(b.n)
            row = {"N": b.n, "x": pc.point.x, "t": pc.point.t, "trials": b.count,
                   "failures": len(b.failures)}
            row["mean_abs_field"], row["se_mean_abs_field"] = mean_se(np.abs(d))
            row["mean_abs_modsq"], row["se_mean_abs_modsq"] = mean_se(np.abs(dm))
            row["mean_field_re"], row["se_mean_field_re"] = mean_se(d.real)
            row["mean_field_im"], row["se_mean_field_im"] = mean_se(d.imag)
            dev = d - d.mean()
            row["var_field"], row["se_var_field"] = mean_se(dev.real**2 + dev.imag**2)
            row["mean_modsq"], row["se_mean_modsq"] = mean_se(dm)
            row["var_modsq"], row["se_var_modsq"] = mean_se((dm - dm.mean()) ** 2)
            row["mean_abs_U_over_sqrtN"], row["se_mean_abs_U_over_sqrtN"] = mean_se(u)
            row["membership_out_freq"], row["se_membership_out_freq"] = mean_se(b.outside)
            rows.append(row)
            abs_f.append(row["mean_abs_field"])
            abs_m.append(row["mean_abs_modsq"])
        ns = [b.n for b in batches]
        per_point["slope_field"] = loglog_slope(ns, abs_f)
        per_point["slope_modsq"] = loglog_slope(ns, abs_m)
        tag = f"x={pc.point.x:g},t={pc.point.t:g}"
        if ctx.degenerate:
            per_point["degenerate"] = True
            checks[f"zero_means[{tag}]"] = bool(max(abs_f + abs_m) == 0.0)
        else:
            checks[f"decreasing_field[{tag}]"] = strictly_decreasing(abs_f)
            checks[f"decreasing_modsq[{tag}]"] = strictly_decreasing(abs_m)
            for name in ("slope_field", "slope_modsq"):
                checks[f"{name}_in_band[{tag}]"] = bool(-0.65 <= per_point[name] <= -0.35)
        details["points"].append(per_point)

    grid = ctx.points[0].avg.grid
    mem_rows = []
    for b in batches:
        freq, se = mean_se(b.outside)
        mem_rows.append({"N": b.n, "trials": b.count, "delta": config.delta,
                         "alpha": config.alpha,
                         "mesh_size": mesh_size(grid, b.n, config.delta, config.alpha, ctx.c_tilde),
                         "out_freq": freq, "se_out_freq": se, "failures": len(b.failures)})
    fit = membership_fit([r["N"] for r in mem_rows], [r["out_freq"] for r in mem_rows],
                         config.delta, config.alpha, config.fit_p)
    for row, val in zip(mem_rows, fit["fitted"]):
        row["fitted_bound"] = val
    details["membership"] = {"c_tilde": ctx.c_tilde, "fit": fit}
    if not ctx.degenerate:
        tail = [r for r in mem_rows if r["N"] >= 16]
        checks["membership_decreasing"] = decreasing_within_se(
            [r["out_freq"] for r in tail], [r["se_out_freq"] for r in tail])
    failures, valid = _collect_failures(batches)
    checks["failure_fraction_ok"] = valid
    return EnsembleSummary("lln", config,
                           {"lln": (LLN_COLUMNS, rows),
                            "membership": (MEMBERSHIP_COLUMNS, mem_rows)},
                           checks, details, failures, valid, time.perf_counter() - start)


def _z_score(emp, pred, se) -> float:
    if not se > 0:
        return 0.0 if emp == pred else float("inf")
    return float((emp - pred) / se)


def run_clt(config: ExperimentConfig, threads: int | None = None) -> EnsembleSummary:
    """Scaled fluctuations against the Gaussian limit moments, plus the remainder table."""
    start = time.perf_counter()
    threads = threads or config.threads
    ctx = EnsembleContext.build(config, config.points)
    spec = config.clt
    batches = run_batches(ctx, spec.n_list, spec.trials, threads)
    dom, r = config.domain, config.interpolant
    rows, rem_rows, diag = [], [], []
    checks = {}
    for k, pc in enumerate(ctx.points):
        if ctx.degenerate:
            cov1, var1, var2 = 0j, 0.0, 0.0
        else:
            cov1, var1 = clt_moments("G1", pc.avg, r, dom)
            _, var2 = clt_moments("G2", pc.avg, r, dom)
        rem_means, rem_ses = [], []
        for b in batches:
            rn = math.sqrt(b.n)
            a = rn * (b.psi[:, k] - pc.psi_inf)
            m = rn * (b.modsq[:, k] - pc.modsq_inf)
            xa = b.xg1[:, k] / rn
            xb = b.xg2[:, k] / rn
            row = {"N": b.n, "x": pc.point.x, "t": pc.point.t, "trials": b.count,
                   "failures": len(b.failures), "pred_var_G1": var1,
                   "pred_cov_G1_re": cov1.real, "pred_cov_G1_im": cov1.imag,
                   "pred_var_G2": var2}
            row["emp_var_G1_re"], row["se_var_G1_re"] = mean_se(a.real**2)
            row["emp_var_G1_im"], row["se_var_G1_im"] = mean_se(a.imag**2)
            sq = a * a
            row["emp_E_sq_G1_re"], row["se_E_sq_G1_re"] = mean_se(sq.real)
            row["emp_E_sq_G1_im"], row["se_E_sq_G1_im"] = mean_se(sq.imag)
            row["emp_var_G2"], row["se_var_G2"] = mean_se(m**2)
            rows.append(row)

            u = np.abs(clt_remainder(b.xg1[:, k], b.psi[:, k], pc.psi_inf, b.n)) / rn
            um, us = mean_se(u)
            rem_means.append(um)
            rem_ses.append(us)
            rem_rows.append({"N": b.n, "x": pc.point.x, "t": pc.point.t, "trials": b.count,
                             "mean_abs_U_over_sqrtN": um, "se_mean_abs_U_over_sqrtN": us,
                             "failures": len(b.failures)})

            field_mod = a.real**2 + a.imag**2
            lin_mod = xa.real**2 + xa.imag**2
            e_field, se_field = mean_se(field_mod)
            e_lin, se_lin = mean_se(lin_mod)
            e_m2, se_m2 = mean_se(m**2)
            e_x2, se_x2 = mean_se(xb**2)
            entry = {"N": b.n, "x": pc.point.x, "t": pc.point.t, "degenerate": ctx.degenerate,
                     "field": {"E_abs_sq": e_field, "se": se_field,
                               "z": _z_score(e_field, var1, se_field),
                               "E_sq": second_moment(a, np.conj(a)),
                               "modsq_E_sq": e_m2, "modsq_se": se_m2,
                               "modsq_z": _z_score(e_m2, var2, se_m2)},
                     "linear_statistic": {"E_abs_sq": e_lin, "se": se_lin,
                                          "z": _z_score(e_lin, var1, se_lin),
                                          "E_sq": second_moment(xa, np.conj(xa)),
                                          "G2_E_sq": e_x2, "G2_se": se_x2,
                                          "G2_z": _z_score(e_x2, var2, se_x2)}}
            if not ctx.degenerate:
                entry["field"]["normality"] = {"re": normality(a.real), "im": normality(a.imag),
                                               "modsq": normality(m)}
                entry["linear_statistic"]["normality"] = {
                    "re": normality(xa.real), "im": normality(xa.imag), "G2": normality(xb)}
            diag.append(entry)
        tag = f"x={pc.point.x:g},t={pc.point.t:g}"
        if not ctx.degenerate:
            checks[f"remainder_decreasing[{tag}]"] = decreasing_within_se(rem_means, rem_ses)
    for e in diag:
        if e["degenerate"]:
            continue
        tag = f"N={e['N']},x={e['x']:g},t={e['t']:g}"
        checks[f"var_G1_field[{tag}]"] = abs(e["field"]["z"]) <= 3
        checks[f"var_G2_field[{tag}]"] = abs(e["field"]["modsq_z"]) <= 3
        checks[f"var_G1_linear[{tag}]"] = abs(e["linear_statistic"]["z"]) <= 3
        checks[f"var_G2_linear[{tag}]"] = abs(e["linear_statistic"]["G2_z"]) <= 3
    failures, valid = _collect_failures(batches)
    checks["failure_fraction_ok"] = valid
    return EnsembleSummary("clt", config,
                           {"clt": (CLT_COLUMNS, rows), "remainder": (REMAINDER_COLUMNS, rem_rows)},
                           checks, {"diagnostics": diag}, failures, valid,
                           time.perf_counter() - start)


def run_corr(config: ExperimentConfig, threads: int | None = None) -> EnsembleSummary:
    """Two-point correlation N E[(psi_N - psi_inf)(p1) conj (psi_N - psi_inf)(p2)]."""
    start = time.perf_counter()
    threads = threads or config.threads
    ctx = EnsembleContext.build(config, config.corr_points)
    spec = config.corr
    batches = run_batches(ctx, spec.n_list, spec.trials, threads)
    dom, r = config.domain, config.interpolant
    c1, c2 = ctx.points
    if ctx.degenerate:
        pred, identity_defect = 0j, 0.0
    else:
        pred = correlation_limit(c1.avg, c2.avg, r, dom)
        identity_defect = abs(correlation_limit(c1.avg, c1.avg, r, dom)
                              - clt_moments("G1", c1.avg, r, dom)[1])
    rows, checks = [], {}
    for b in batches:
        rn = math.sqrt(b.n)
        a1 = rn * (b.psi[:, 0] - c1.psi_inf)
        a2 = rn * (b.psi[:, 1] - c2.psi_inf)
        prod = a1 * np.conj(a2)
        row = {"N": b.n, "x1": c1.point.x, "t1": c1.point.t, "x2": c2.point.x,
               "t2": c2.point.t, "trials": b.count, "failures": len(b.failures),
               "pred_corr_re": pred.real, "pred_corr_im": pred.imag}
        row["emp_corr_re"], row["se_corr_re"] = mean_se(prod.real)
        row["emp_corr_im"], row["se_corr_im"] = mean_se(prod.imag)
        rows.append(row)
        if not ctx.degenerate:
            tag = f"N={b.n}"
            checks[f"corr_re[{tag}]"] = abs(_z_score(row["emp_corr_re"], pred.real,
                                                     row["se_corr_re"])) <= 3
            checks[f"corr_im[{tag}]"] = abs(_z_score(row["emp_corr_im"], pred.imag,
                                                     row["se_corr_im"])) <= 3
    checks["diagonal_identity"] = identity_defect <= 1e-14
    failures, valid = _collect_failures(batches)
    checks["failure_fraction_ok"] = valid
    details = {"pred_corr": pred, "diagonal_identity_defect": identity_defect}
    return EnsembleSummary("corr", config, {"corr": (CORR_COLUMNS, rows)}, checks, details,
                           failures, valid, time.perf_counter() - start)
