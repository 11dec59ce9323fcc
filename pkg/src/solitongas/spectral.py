"""Eigenvalue domains, interpolating functions and random spectral data.

Eigenvalues are i.i.d. uniform on a domain D+ in the upper half-plane and the
norming constants are tied to them through an interpolant, ``c_k = r(lambda_k)/N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractViolation, GeometryError, SamplingError

REJECTION_CAP_FACTOR = 1000


@lru_cache(maxsize=64)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class EigenvalueDomain:
    """A disk or an axis-aligned rectangle strictly inside the upper half-plane.

    ``quad`` holds the node counts of the domain quadrature: (radial, angular)
    for a disk, (nx, ny) for a rectangle.
    """

    kind: str
    center: complex = 0j
    radius: float = 0.0
    x1: float = 0.0
    x2: float = 0.0
    y1: float = 0.0
    y2: float = 0.0
    quad: tuple[int, int] = (32, 128)
    d_min: float = 0.05

    def __post_init__(self):
        if self.kind == "disk":
            if not self.radius > 0:
                raise ContractViolation(f"disk radius must be positive, got {self.radius}")
        elif self.kind == "rectangle":
            if not (self.x2 > self.x1 and self.y2 > self.y1):
                raise ContractViolation("rectangle needs x1 < x2 and y1 < y2")
        else:
            raise ContractViolation(f"unknown domain kind {self.kind!r}")
        if min(self.quad) < 1:
            raise ContractViolation("quadrature node counts must be positive")
        if self.inf_im < self.d_min:
            raise GeometryError(
                f"domain reaches Im z = {self.inf_im:.3g}, below d_min = {self.d_min}"
            )

    @classmethod
    def disk(cls, center, radius, quad=(32, 128), d_min=0.05) -> "EigenvalueDomain":
        return cls("disk", center=complex(center), radius=float(radius),
                   quad=tuple(quad), d_min=d_min)

    @classmethod
    def rectangle(cls, x1, x2, y1, y2, quad=(64, 64), d_min=0.05) -> "EigenvalueDomain":
        return cls("rectangle", x1=float(x1), x2=float(x2), y1=float(y1), y2=float(y2),
                   quad=tuple(quad), d_min=d_min)

    @property
    def area(self) -> float:
        if self.kind == "disk":
            return np.pi * self.radius**2
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def inf_im(self) -> float:
        if self.kind == "disk":
            return self.center.imag - self.radius
        return self.y1

    @property
    def centroid(self) -> complex:
        if self.kind == "disk":
            return self.center
        return complex(0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    @property
    def circumradius(self) -> float:
        """Radius of the smallest centroid-centred circle containing the domain."""
        if self.kind == "disk":
            return self.radius
        return 0.5 * float(np.hypot(self.x2 - self.x1, self.y2 - self.y1))

    def bbox(self) -> tuple[float, float, float, float]:
        if self.kind == "disk":
            c, R = self.center, self.radius
            return c.real - R, c.real + R, c.imag - R, c.imag + R
        return self.x1, self.x2, self.y1, self.y2

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "disk":
            return np.abs(z - self.center) < self.radius
        return (z.real > self.x1) & (z.real < self.x2) & (z.imag > self.y1) & (z.imag < self.y2)

    def distance_to(self, z) -> np.ndarray:
        """Euclidean distance from points outside the domain to its closure."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "disk":
            return np.maximum(np.abs(z - self.center) - self.radius, 0.0)
        dx = np.maximum(np.maximum(self.x1 - z.real, z.real - self.x2), 0.0)
        dy = np.maximum(np.maximum(self.y1 - z.imag, z.imag - self.y2), 0.0)
        return np.hypot(dx, dy)

    def quadrature(self, refine: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights for integrals against the uniform law d^2z/m.

        ``refine`` multiplies both node counts (used for self-convergence checks).
        """
        return _domain_quadrature(self, refine)


@lru_cache(maxsize=32)
def _domain_quadrature(domain: EigenvalueDomain, refine: int):
    n1, n2 = domain.quad[0] * refine, domain.quad[1] * refine
    if domain.kind == "disk":
        R = domain.radius
        xr, wr = _gauss_legendre(n1)
        rho = 0.5 * R * (xr + 1.0)
        wrho = 0.5 * R * wr * rho
        phi = 2.0 * np.pi * np.arange(n2) / n2
        nodes = domain.center + rho[:, None] * np.exp(1j * phi)[None, :]
        weights = wrho[:, None] * np.full(n2, 2.0 * np.pi / n2)[None, :] / domain.area
    else:
        xg, wx = _gauss_legendre(n1)
        yg, wy = _gauss_legendre(n2)
        hx, hy = 0.5 * (domain.x2 - domain.x1), 0.5 * (domain.y2 - domain.y1)
        xs = domain.x1 + hx * (xg + 1.0)
        ys = domain.y1 + hy * (yg + 1.0)
        nodes = xs[:, None] + 1j * ys[None, :]
        weights = (hx * wx)[:, None] * (hy * wy)[None, :] / domain.area
    nodes = nodes.ravel()
    weights = weights.ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True)
class Interpolant:
    """Entire interpolating function r(z) from a small family of presets.

    constant:    r(z) = a
    affine:      r(z) = a + b z
    exponential: r(z) = a exp(b z)
    """

    preset: str = "constant"
    coeffs: tuple[complex, ...] = (1.0 + 0j,)

    def __post_init__(self):
        need = {"constant": 1, "affine": 2, "exponential": 2}
        if self.preset not in need:
            raise ContractViolation(f"unknown interpolant preset {self.preset!r}")
        if len(self.coeffs) != need[self.preset]:
            raise ContractViolation(
                f"{self.preset} interpolant takes {need[self.preset]} coefficients"
            )
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    @classmethod
    def constant(cls, a) -> "Interpolant":
        return cls("constant", (a,))

    @classmethod
    def affine(cls, a, b) -> "Interpolant":
        return cls("affine", (a, b))

    @classmethod
    def exponential(cls, a, b) -> "Interpolant":
        return cls("exponential", (a, b))

    @property
    def is_zero(self) -> bool:
        return self.coeffs[0] == 0 and (self.preset != "affine" or self.coeffs[1] == 0)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.preset == "constant":
            return np.full(z.shape, self.coeffs[0], dtype=complex)
        a, b = self.coeffs
        if self.preset == "affine":
            return a + b * z
        return a * np.exp(b * z)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        if self.preset == "constant":
            return np.zeros(z.shape, dtype=complex)
        a, b = self.coeffs
        if self.preset == "affine":
            return np.full(z.shape, b, dtype=complex)
        return a * b * np.exp(b * z)

    def reflected(self, w):
        """r*(w) = conj(r(conj w))."""
        return np.conj(self(np.conj(np.asarray(w, dtype=complex))))

    def scaled(self, factor) -> "Interpolant":
        coeffs = list(self.coeffs)
        coeffs[0] *= factor
        if self.preset == "affine":
            coeffs[1] *= factor
        return Interpolant(self.preset, tuple(coeffs))


@dataclass(frozen=True)
class SpectralSample:
    """Eigenvalues and t = 0 norming constants of one random N-soliton."""

    eigenvalues: np.ndarray
    constants: np.ndarray
    seed: int | None = None
    t_origin: float = field(default=0.0, repr=False)

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=complex))
        c = np.atleast_1d(np.asarray(self.constants, dtype=complex))
        if lam.shape != c.shape or lam.ndim != 1:
            raise ContractViolation("eigenvalues and constants must be 1-D and equal length")
        if np.any(lam.imag <= 0):
            raise ContractViolation("eigenvalues must lie in the open upper half-plane")
        if np.any(c == 0):
            raise ContractViolation("norming constants must be nonzero")
        lam.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "constants", c)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def shifted(self, a: float) -> "SpectralSample":
        """Same constants, eigenvalues translated by the real number ``a``."""
        return SpectralSample(self.eigenvalues + a, self.constants, self.seed)


def sample_eigenvalues(domain: EigenvalueDomain, n: int, seed: int) -> np.ndarray:
    """n i.i.d. uniform points of ``domain`` by rejection from its bounding box."""
    if n < 1:
        raise ContractViolation(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    xa, xb, ya, yb = domain.bbox()
    out = np.empty(n, dtype=complex)
    filled = 0
    drawn = 0
    cap = REJECTION_CAP_FACTOR * n
    while filled < n:
        batch = max(16, 2 * (n - filled))
        pts = rng.uniform(xa, xb, batch) + 1j * rng.uniform(ya, yb, batch)
        drawn += batch
        pts = pts[domain.contains(pts)][: n - filled]
        out[filled:filled + pts.size] = pts
        filled += pts.size
        if filled < n and drawn > cap:
            raise SamplingError(
                f"rejection sampling accepted {filled}/{n} points after {drawn} draws; "
                "domain is degenerate relative to its bounding box"
            )
    return out


def norming_constants(eigenvalues, r: Interpolant) -> np.ndarray:
    """c_k = r(lambda_k) / N."""
    lam = np.atleast_1d(np.asarray(eigenvalues, dtype=complex))
    if lam.size == 0:
        raise ContractViolation("need at least one eigenvalue")
    vals = r(lam)
    if np.any(vals == 0):
        raise ContractViolation("interpolant vanishes at an eigenvalue; sample rejected")
    return vals / lam.size


def evolve_norming(c, lam, t):
    """Norming constant at time t: c exp(2 i t lambda^2)."""
    if np.any(np.asarray(t) < 0):
        raise ContractViolation("t must be nonnegative")
    return c * np.exp(2j * t * np.asarray(lam) ** 2)


def draw_sample(domain: EigenvalueDomain, r: Interpolant, n: int, seed: int) -> SpectralSample:
    """Sample eigenvalues and attach their interpolated norming constants."""
    lam = sample_eigenvalues(domain, n, seed)
    return SpectralSample(lam, norming_constants(lam, r), seed)
