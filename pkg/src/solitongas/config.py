"""Experiment configuration: a JSON document, validated before any computation.

Complex numbers are written as two-element lists [re, im]. Every section is
optional and falls back to the defaults below.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .contour import ContourGrid, build_contour
from .errors import ContractViolation
from .spectral import EigenvalueDomain, Interpolant

DEFAULTS: dict = {
    "domain": {"kind": "disk", "center": [0.0, 1.0], "radius": 0.5,
               "quad": [32, 128], "d_min": 0.05},
    "interpolant": {"preset": "constant", "coeffs": [[1.0, 0.0]]},
    "contour": {"nodes_per_circle": 128, "clearance": 0.2},
    "seed": 2024,
    "points": [[0.0, 0.0], [0.5, 0.2]],
    "lln": {"n_list": [8, 16, 32, 64, 128], "trials": 2000},
    "clt": {"n_list": [16, 32, 64, 128], "trials": 4000},
    "corr": {"n_list": [64], "trials": 4000, "points": [[0.0, 0.0], [0.5, 0.1]]},
    "membership": {"delta": 0.5, "alpha": 1.0, "c_tilde": None, "fit_p": 2},
    "verify": {"nodes": [16, 32, 64, 128, 256], "seeds": 5, "n_max": 8},
    "tolerances": {},
    "output": {"dir": "results"},
    "threads": 1,
}


def _complex(v, what: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(a, (int, float)) for a in v):
        return complex(v[0], v[1])
    raise ContractViolation(f"{what}: expected a number or [re, im], got {v!r}")


def _pair(c: complex) -> list[float]:
    return [float(c.real), float(c.imag)]


def _positive_int(v, what: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ContractViolation(f"{what} must be a positive integer, got {v!r}")
    return v


def _points(raw, what: str) -> tuple[tuple[float, float], ...]:
    if not isinstance(raw, list) or not raw:
        raise ContractViolation(f"{what} must be a nonempty list of [x, t]")
    out = []
    for p in raw:
        if not (isinstance(p, (list, tuple)) and len(p) == 2):
            raise ContractViolation(f"{what}: bad point {p!r}")
        x, t = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(t)) or t < 0:
            raise ContractViolation(f"{what}: need finite x and t >= 0, got {p!r}")
        out.append((x, t))
    return tuple(out)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ContractViolation(f"unknown config key {k!r}")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunSpec:
    n_list: tuple[int, ...]
    trials: int


@dataclass(frozen=True)
class ExperimentConfig:
    domain: EigenvalueDomain
    interpolant: Interpolant
    nodes_per_circle: int
    clearance: float
    seed: int
    points: tuple[tuple[float, float], ...]
    lln: RunSpec
    clt: RunSpec
    corr: RunSpec
    corr_points: tuple[tuple[float, float], ...]
    delta: float
    alpha: float
    c_tilde: float | None
    fit_p: int
    verify_nodes: tuple[int, ...]
    verify_seeds: int
    verify_n_max: int
    tolerances: dict = field(default_factory=dict, compare=False, hash=False)
    out_dir: str = "results"
    threads: int = 1

    # ------------------------------------------------------------ parsing

    @classmethod
    def from_dict(cls, raw: dict | None = None) -> "ExperimentConfig":
        raw = dict(raw or {})
        dom_raw = raw.pop("domain", None)
        d = _merge(DEFAULTS, raw)
        dom = d["domain"]
        if dom_raw is not None:
            if dom_raw.get("kind", "disk") == "disk":
                dom = _merge(dom, dom_raw)
            else:
                dom = {"quad": [64, 64], "d_min": dom["d_min"], **dom_raw}
        quad = tuple(_positive_int(q, "domain.quad") for q in dom["quad"])
        if len(quad) != 2:
            raise ContractViolation("domain.quad needs two node counts")
        if dom["kind"] == "disk":
            domain = EigenvalueDomain.disk(_complex(dom["center"], "domain.center"),
                                           float(dom["radius"]), quad, float(dom["d_min"]))
        elif dom["kind"] == "rectangle":
            try:
                x1, x2, y1, y2 = (float(dom[k]) for k in ("x1", "x2", "y1", "y2"))
            except KeyError as exc:
                raise ContractViolation(f"rectangle domain is missing {exc}") from None
            domain = EigenvalueDomain.rectangle(x1, x2, y1, y2, quad, float(dom["d_min"]))
        else:
            raise ContractViolation(f"unknown domain kind {dom['kind']!r}")
        ip = d["interpolant"]
        interp = Interpolant(ip["preset"],
                             tuple(_complex(c, "interpolant.coeffs") for c in ip["coeffs"]))
        con = d["contour"]
        nodes = _positive_int(con["nodes_per_circle"], "contour.nodes_per_circle")
        clearance = float(con["clearance"])
        seed = d["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ContractViolation(f"seed must be an unsigned 64-bit integer, got {seed!r}")

        def run(section):
            s = d[section]
            n_list = tuple(_positive_int(n, f"{section}.n_list") for n in s["n_list"])
            if not n_list:
                raise ContractViolation(f"{section}.n_list is empty")
            return RunSpec(n_list, _positive_int(s["trials"], f"{section}.trials"))

        mem = d["membership"]
        c_tilde = mem["c_tilde"]
        if c_tilde is not None and not float(c_tilde) > 0:
            raise ContractViolation("membership.c_tilde must be positive or null")
        delta = float(mem["delta"])
        alpha = float(mem["alpha"])
        if not delta > 0:
            raise ContractViolation("membership.delta must be positive")
        if not 0.5 < alpha <= 1:
            raise ContractViolation("membership.alpha must lie in (1/2, 1]")
        ver = d["verify"]
        cfg = cls(
            domain=domain, interpolant=interp, nodes_per_circle=nodes, clearance=clearance,
            seed=seed, points=_points(d["points"], "points"),
            lln=run("lln"), clt=run("clt"), corr=run("corr"),
            corr_points=_points(d["corr"]["points"], "corr.points"),
            delta=delta, alpha=alpha,
            c_tilde=None if c_tilde is None else float(c_tilde),
            fit_p=_positive_int(mem["fit_p"], "membership.fit_p"),
            verify_nodes=tuple(_positive_int(n, "verify.nodes") for n in ver["nodes"]),
            verify_seeds=_positive_int(ver["seeds"], "verify.seeds"),
            verify_n_max=_positive_int(ver["n_max"], "verify.n_max"),
            tolerances=dict(d["tolerances"]),
            out_dir=str(d["output"]["dir"]),
            threads=_positive_int(d["threads"], "threads"),
        )
        if len(cfg.corr_points) != 2:
            raise ContractViolation("corr.points must hold exactly two [x, t] points")
        if not clearance > 0:
            raise ContractViolation("contour.clearance must be positive")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        dom = self.domain
        if dom.kind == "disk":
            ddom = {"kind": "disk", "center": _pair(dom.center), "radius": dom.radius}
        else:
            ddom = {"kind": "rectangle", "x1": dom.x1, "x2": dom.x2, "y1": dom.y1, "y2": dom.y2}
        ddom.update(quad=list(dom.quad), d_min=dom.d_min)
        run = lambda s: {"n_list": list(s.n_list), "trials": s.trials}  # noqa: E731
        corr = run(self.corr)
        corr["points"] = [list(p) for p in self.corr_points]
        return {
            "domain": ddom,
            "interpolant": {"preset": self.interpolant.preset,
                            "coeffs": [_pair(c) for c in self.interpolant.coeffs]},
            "contour": {"nodes_per_circle": self.nodes_per_circle, "clearance": self.clearance},
            "seed": self.seed,
            "points": [list(p) for p in self.points],
            "lln": run(self.lln),
            "clt": run(self.clt),
            "corr": corr,
            "membership": {"delta": self.delta, "alpha": self.alpha,
                           "c_tilde": self.c_tilde, "fit_p": self.fit_p},
            "verify": {"nodes": list(self.verify_nodes), "seeds": self.verify_seeds,
                       "n_max": self.verify_n_max},
            "tolerances": dict(self.tolerances),
            "output": {"dir": self.out_dir},
            "threads": self.threads,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def content_hash(self) -> str:
        """git-style blob hash of the canonical JSON."""
        return blob_hash(self.to_json().encode())

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        for k, v in kw.items():
            if v is None:
                continue
            if k == "seed":
                d["seed"] = v
            elif k == "threads":
                d["threads"] = v
            elif k == "out_dir":
                d["output"]["dir"] = v
            else:
                raise ContractViolation(f"unknown override {k!r}")
        return ExperimentConfig.from_dict(d)

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def grid(self) -> ContourGrid:
        return build_contour(self.domain, self.nodes_per_circle, self.clearance)


def blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def default_config() -> ExperimentConfig:
    return ExperimentConfig.from_dict({})


def write_default(path) -> None:
    Path(path).write_text(default_config().to_json() + "\n")


__all__ = ["ExperimentConfig", "RunSpec", "DEFAULTS", "default_config", "blob_hash",
           "write_default"]
