"""Two-circle contour and discrete Cauchy operators.

gamma+ is a counterclockwise circle around the eigenvalue domain and gamma- its
Schwarz reflection, also counterclockwise. Densities live on the nodes of both
circles, stored as arrays of shape (2n, ...) with gamma+ first.

On a single circle with u = (s - center)/radius, a density sum_k h_k u^k has
boundary values C+ h = sum_{k>=0} h_k u^k (interior, left side) and
C- h = -sum_{k<0} h_k u^k (exterior, right side). The other circle contributes a
smooth kernel, integrated by the trapezoid rule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, GeometryError
from .spectral import EigenvalueDomain

SIGMA2 = np.array([[0, -1j], [1j, 0]])
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class ContourGrid:
    center: complex
    radius: float
    n: int

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ContractViolation(f"nodes per circle must be a power of two >= 16, got {self.n}")
        if not self.radius > 0:
            raise ContractViolation("radius must be positive")
        if self.center.imag - self.radius <= 0:
            raise GeometryError(
                f"gamma+ (center {self.center}, radius {self.radius:.4g}) crosses the real axis"
            )
        angles = 2 * np.pi * np.arange(self.n) / self.n
        u = np.exp(1j * angles)
        centers = np.array([self.center, np.conj(self.center)])
        nodes = (centers[:, None] + self.radius * u[None, :]).ravel()
        # ds = i R u dphi, trapezoid step 2 pi / n
        weights = np.tile(2j * np.pi * self.radius * u / self.n, 2)
        for arr in (nodes, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return 2 * self.n

    @property
    def upper(self) -> slice:
        return slice(0, self.n)

    @property
    def lower(self) -> slice:
        return slice(self.n, 2 * self.n)

    @property
    def length(self) -> float:
        """Total length of gamma = gamma+ U gamma-."""
        return 4 * np.pi * self.radius

    @property
    def arc_weights(self) -> np.ndarray:
        """|ds| weights."""
        return np.abs(self.weights)

    @property
    def spacing(self) -> float:
        return 2 * np.pi * self.radius / self.n

    @property
    def min_im_upper(self) -> float:
        return self.center.imag - self.radius

    def mirror_index(self) -> np.ndarray:
        """Index j' with nodes[j'] == conj(nodes[j])."""
        n = self.n
        k = (-np.arange(n)) % n
        return np.concatenate([n + k, k])

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        d_up = np.abs(np.abs(z - self.center) - self.radius)
        d_lo = np.abs(np.abs(z - np.conj(self.center)) - self.radius)
        return np.minimum(d_up, d_lo)

    def inside_upper(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def refined(self, factor: int = 2) -> "ContourGrid":
        return ContourGrid(self.center, self.radius, self.n * factor)


def build_contour(domain: EigenvalueDomain, nodes_per_circle: int = 128,
                  clearance: float = 0.2) -> ContourGrid:
    """Circle around the domain centroid with radius circumradius + clearance."""
    if not clearance > 0:
        raise ContractViolation("clearance must be positive")
    radius = domain.circumradius + clearance
    center = domain.centroid
    if center.imag - radius <= 0:
        raise GeometryError(
            f"contour radius {radius:.4g} around {center} crosses the real axis "
            f"(min Im = {center.imag - radius:.4g}); enlarge d_min or shrink the clearance"
        )
    return ContourGrid(center, radius, nodes_per_circle)


def _fourier_split(h: np.ndarray, n: int, negative: bool) -> np.ndarray:
    """Keep the negative (or nonnegative) frequencies of node data along axis 0."""
    hat = np.fft.fft(h, axis=0)
    k = np.fft.fftfreq(n, 1.0 / n)
    mask = (k < 0) if negative else (k >= 0)
    shape = (n,) + (1,) * (h.ndim - 1)
    return np.fft.ifft(hat * mask.reshape(shape), axis=0)


def _cross_matrix(grid: ContourGrid) -> np.ndarray:
    """Trapezoid Cauchy kernel between the two circles, shape (2n, 2n), zero self blocks."""
    n = grid.n
    s = grid.nodes
    K = np.zeros((2 * n, 2 * n), dtype=complex)
    up, lo = grid.upper, grid.lower
    K[up, lo] = grid.weights[None, lo] / (2j * np.pi * (s[None, lo] - s[up, None]))
    K[lo, up] = grid.weights[None, up] / (2j * np.pi * (s[None, up] - s[lo, None]))
    return K


def _boundary_value(h: np.ndarray, grid: ContourGrid, minus: bool) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.shape[0] != grid.size:
        raise ContractViolation(f"density has {h.shape[0]} nodes, grid has {grid.size}")
    n = grid.n
    out = np.empty_like(h)
    for part in (grid.upper, grid.lower):
        own = _fourier_split(h[part], n, negative=minus)
        out[part] = -own if minus else own
    flat = h.reshape(grid.size, -1)
    out += (_cross_matrix(grid) @ flat).reshape(h.shape)
    return out


def cauchy_minus(h, grid: ContourGrid) -> np.ndarray:
    """Boundary value of the Cauchy integral from the right (exterior) of gamma."""
    return _boundary_value(h, grid, minus=True)


def cauchy_plus(h, grid: ContourGrid) -> np.ndarray:
    """Boundary value of the Cauchy integral from the left (interior) of gamma."""
    return _boundary_value(h, grid, minus=False)


def cauchy_minus_matrix(grid: ContourGrid) -> np.ndarray:
    """Dense (2n, 2n) matrix of C- acting on scalar node values."""
    n = grid.n
    K = _cross_matrix(grid)
    self_block = -_fourier_split(np.eye(n, dtype=complex), n, negative=True)
    K[grid.upper, grid.upper] = self_block
    K[grid.lower, grid.lower] = self_block
    return K


def cauchy_offcontour(h, grid: ContourGrid, z) -> np.ndarray:
    """(1/2 pi i) int_gamma h(s)/(s - z) ds by the trapezoid rule.

    ``h`` has shape (2n, ...); the result has shape z.shape + h.shape[1:].
    """
    h = np.asarray(h, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if np.any(grid.distance(z) < grid.spacing):
        warnings.warn("Cauchy integral evaluated within one node spacing of the contour",
                      RuntimeWarning, stacklevel=2)
    kernel = grid.weights[None, :] / (2j * np.pi * (grid.nodes[None, :] - z.reshape(-1, 1)))
    out = kernel @ h.reshape(grid.size, -1)
    return out.reshape(z.shape + h.shape[1:])


def contour_integral(h, grid: ContourGrid) -> np.ndarray:
    """int_gamma h(s) ds."""
    h = np.asarray(h, dtype=complex)
    return np.tensordot(grid.weights, h, axes=(0, 0))


def frobenius(h) -> np.ndarray:
    """Pointwise Frobenius norm of an array of 2x2 matrices."""
    h = np.asarray(h)
    return np.sqrt(np.sum(np.abs(h) ** 2, axis=(-2, -1)))


def norm_l2(h, grid: ContourGrid) -> float:
    return float(np.sqrt(np.sum(frobenius(h) ** 2 * grid.arc_weights)))


def norm_linf(h) -> float:
    return float(np.max(frobenius(h)))
