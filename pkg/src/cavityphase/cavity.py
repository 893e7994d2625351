"""Static eigenbasis and wall-motion kinematics for a pulsating hard-wall cavity.

Everything is dimensionless: hbar = mass = equilibrium radius = 1.  The wall
follows R(t) = 1 + epsilon*sin(omega*t) and the problem is posed on the fixed
domain y in [0, 1] after rescaling by alpha(t) = 1/(1 + epsilon*sin(omega*t)).
Only the zero-angular-momentum sector is supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import j0, j1


class QuadratureError(RuntimeError):
    """Raised when the coupling-matrix quadrature fails to converge."""


@dataclass(frozen=True)
class Geometry:
    """Cavity geometry: 'cylindrical' or 'spherical' hard wall.

    xi is the wavefunction rescaling exponent and n_d the radial measure
    power; both are fixed by the kind.  m_d = 0 (no angular excitation).
    """

    kind: str
    xi: float
    n_d: int
    m_d: int = 0

    def __post_init__(self):
        allowed = {"cylindrical": (1.0, 1), "spherical": (1.5, 2)}
        if self.kind not in allowed:
            raise ValueError(f"unknown geometry kind: {self.kind!r}")
        if (self.xi, self.n_d) != allowed[self.kind]:
            raise ValueError(f"inconsistent (xi, n_d) for {self.kind}")
        if self.m_d != 0:
            raise ValueError("only the m_d = 0 sector is supported")


def cylindrical() -> Geometry:
    return Geometry("cylindrical", 1.0, 1)


def spherical() -> Geometry:
    return Geometry("spherical", 1.5, 2)


def geometry_from_name(name: str) -> Geometry:
    if name == "cylindrical":
        return cylindrical()
    if name == "spherical":
        return spherical()
    raise ValueError(f"unknown geometry kind: {name!r}")


@dataclass(frozen=True)
class CavityConfig:
    """Drive parameters: amplitude epsilon, frequency omega, basis truncation."""

    geometry: Geometry
    epsilon: float
    omega: float
    basis_size: int = 16

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must satisfy 0 <= epsilon < 1")
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        if self.basis_size < 2:
            raise ValueError("basis_size must be at least 2")

    @property
    def tau(self) -> float:
        """Wall oscillation period."""
        return 2.0 * np.pi / self.omega


def alpha_at(t, cfg: CavityConfig):
    """Domain scale factor alpha(t) = 1/(1 + epsilon*sin(omega*t))."""
    return 1.0 / (1.0 + cfg.epsilon * np.sin(cfg.omega * np.asarray(t)))


def wall_log_derivative(t, cfg: CavityConfig):
    """Rdot/R = epsilon*omega*cos(omega*t) / (1 + epsilon*sin(omega*t))."""
    t = np.asarray(t)
    return (cfg.epsilon * cfg.omega * np.cos(cfg.omega * t)
            / (1.0 + cfg.epsilon * np.sin(cfg.omega * t)))


# ---------------------------------------------------------------------------
# eigenbasis of the static well
# ---------------------------------------------------------------------------

def _bessel_j0_zero(k: int) -> float:
    """k-th positive zero of J0, by bracketing and bisection/Newton.

    Brackets come from the large-argument spacing of the zeros (about pi
    apart, near (k - 1/4)*pi); each bracket isolates exactly one zero.
    """
    center = (k - 0.25) * np.pi
    lo, hi = center - 0.5 * np.pi, center + 0.5 * np.pi
    lo = max(lo, 1e-6)
    flo, fhi = j0(lo), j0(hi)
    # widen defensively; never needed for k >= 1 but cheap insurance
    while flo * fhi > 0.0:
        lo -= 0.1
        hi += 0.1
        flo, fhi = j0(lo), j0(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fm = j0(mid)
        if fm == 0.0:
            lo = hi = mid
            break
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo < 1e-13:
            break
    x = 0.5 * (lo + hi)
    for _ in range(3):  # Newton polish; J0' = -J1
        x -= j0(x) / (-j1(x))
    return float(x)


@lru_cache(maxsize=None)
def bessel_j0_zeros(count: int) -> tuple[float, ...]:
    return tuple(_bessel_j0_zero(k) for k in range(1, count + 1))


def radial_root(geometry: Geometry, k: int) -> float:
    """Dispersion root of mode k: J0 zero (cylindrical) or k*pi (spherical)."""
    if k < 1:
        raise ValueError("mode index k must be >= 1")
    if geometry.kind == "cylindrical":
        return bessel_j0_zeros(k)[k - 1]
    return k * np.pi


def eigenenergy(geometry: Geometry, k: int) -> float:
    """Energy of the k-th static mode, root**2 / 2."""
    r = radial_root(geometry, k)
    return 0.5 * r * r


def _norm_constant(geometry: Geometry, k: int) -> float:
    # unit norm under the measure y**n_d dy on [0, 1]
    if geometry.kind == "cylindrical":
        r = radial_root(geometry, k)
        return np.sqrt(2.0) / abs(j1(r))
    return np.sqrt(2.0)


def basis_function(geometry: Geometry, k: int, y):
    """Normalized static mode phi_k(y) on [0, 1]; phi_k(1) = 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise ValueError("y must lie in [0, 1]")
    r = radial_root(geometry, k)
    c = _norm_constant(geometry, k)
    if geometry.kind == "cylindrical":
        return c * j0(r * y)
    # sin(k*pi*y)/y, stable at y = 0 via sinc
    return c * r * np.sinc(k * y)


def dilation_of_basis_function(geometry: Geometry, k: int, y):
    """(y d/dy + xi) phi_k(y), in a form stable down to y = 0."""
    y = np.asarray(y, dtype=float)
    r = radial_root(geometry, k)
    c = _norm_constant(geometry, k)
    if geometry.kind == "cylindrical":
        return c * (-r * y * j1(r * y)) + geometry.xi * basis_function(geometry, k, y)
    # y d/dy [sin(r y)/y] = r cos(r y) - sin(r y)/y
    ydphi = c * (r * np.cos(r * y) - r * np.sinc(k * y))
    return ydphi + geometry.xi * basis_function(geometry, k, y)


def _gauss_nodes(n: int):
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def coupling_matrix(geometry: Geometry, size: int,
                    start_nodes: int = 256, tol: float = 1e-10,
                    max_nodes: int = 4096) -> np.ndarray:
    """Wall-motion coupling matrix eta[n, k] = <phi_n | (y d/dy + xi) | phi_k>.

    Fixed Gauss-Legendre quadrature, refined by node doubling until two
    successive resolutions agree elementwise to `tol`.  The result is real
    and antisymmetric (zero diagonal).
    """
    if size < 2:
        raise ValueError("coupling matrix needs size >= 2")

    def assemble(n_nodes: int) -> np.ndarray:
        y, w = _gauss_nodes(n_nodes)
        measure = w * y ** geometry.n_d
        phi = np.array([basis_function(geometry, k, y) for k in range(1, size + 1)])
        dil = np.array([dilation_of_basis_function(geometry, k, y) for k in range(1, size + 1)])
        return (phi * measure) @ dil.T

    eta = assemble(start_nodes)
    nodes = start_nodes
    while True:
        nodes *= 2
        if nodes > max_nodes:
            raise QuadratureError(
                f"coupling quadrature did not converge to {tol} by {max_nodes} nodes"
            )
        refined = assemble(nodes)
        if np.max(np.abs(refined - eta)) < tol:
            eta = refined
            break
        eta = refined
    # enforce the exact structure implied by integration by parts
    eta = 0.5 * (eta - eta.T)
    np.fill_diagonal(eta, 0.0)
    return eta


@dataclass(frozen=True)
class Basis:
    """Static eigenbasis: energies, dispersion roots, and coupling matrix."""

    geometry: Geometry
    energies: np.ndarray
    roots: np.ndarray
    eta: np.ndarray

    @property
    def size(self) -> int:
        return len(self.energies)

    def omega_nk(self, n: int, k: int) -> float:
        """Transition frequency E_n - E_k (1-based mode labels)."""
        return float(self.energies[n - 1] - self.energies[k - 1])


@lru_cache(maxsize=8)
def _build_basis_cached(kind: str, size: int) -> Basis:
    geometry = geometry_from_name(kind)
    roots = np.array([radial_root(geometry, k) for k in range(1, size + 1)])
    energies = 0.5 * roots ** 2
    eta = coupling_matrix(geometry, size)
    energies.setflags(write=False)
    roots.setflags(write=False)
    eta.setflags(write=False)
    return Basis(geometry, energies, roots, eta)


def build_basis(geometry: Geometry, size: int) -> Basis:
    """Construct (and cache) the basis for a geometry and truncation size."""
    return _build_basis_cached(geometry.kind, size)
