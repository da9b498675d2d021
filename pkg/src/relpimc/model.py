"""Physical parameters, the regularized Coulomb potential and the free
relativistic link kernel in one dimension.

Units: hbar = c = 1 and the charge is folded into the coupling, so the
potential strength is just ``alpha``.  A "link" joins two neighbouring
time slices separated by ``dt`` with displacement ``dq``; with
``s = sqrt(dt**2 + dq**2)`` the free kernel is

    rho(dq; dt) = m dt / (pi s) * K1(m s)            (m > 0)
    rho(dq; dt) = dt / (pi s**2)                     (m = 0, Cauchy)

which integrates over ``dq`` to ``exp(-m dt)`` (it is the Euclidean
propagator of sqrt(p**2 + m**2)).
"""
import math
from dataclasses import dataclass

from numba import njit

from .specfun import k0_over_k1_nb, log_k1_nb

_LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class ModelParams:
    """Mass, coupling and regularization length of the particle."""

    mass: float
    alpha: float
    a_reg: float

    def __post_init__(self):
        if not (math.isfinite(self.mass) and self.mass >= 0.0):
            raise ValueError(f"mass must be >= 0, got {self.mass!r}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")
        if not (math.isfinite(self.a_reg) and self.a_reg > 0.0):
            raise ValueError(f"a_reg must be > 0, got {self.a_reg!r}")

    @property
    def ultra_relativistic(self) -> bool:
        return self.mass == 0.0


@dataclass(frozen=True)
class LatticeParams:
    """Imaginary-time lattice: ``n_slices`` links of length ``dt``."""

    n_slices: int
    dt: float

    def __post_init__(self):
        if int(self.n_slices) != self.n_slices or self.n_slices < 2:
            raise ValueError(f"n_slices must be an integer >= 2, got {self.n_slices!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")

    @property
    def beta(self) -> float:
        return self.n_slices * self.dt

    @classmethod
    def from_beta(cls, beta: float, n_slices: int) -> "LatticeParams":
        return cls(n_slices=n_slices, dt=beta / n_slices)


# -- compiled kernels (scalar arguments, used inside the sampler) ----------

@njit(cache=True)
def potential_nb(q, alpha, a_reg):
    return -alpha / math.sqrt(q * q + a_reg * a_reg)


@njit(cache=True)
def virial_correction_nb(q, alpha, a_reg):
    r2 = q * q + a_reg * a_reg
    return a_reg * a_reg * alpha / (r2 * math.sqrt(r2))


@njit(cache=True)
def log_link_weight_nb(dq, mass, dt):
    s2 = dt * dt + dq * dq
    if mass == 0.0:
        return math.log(dt / s2) - _LOG_PI
    s = math.sqrt(s2)
    return math.log(mass * dt / s) - _LOG_PI + log_k1_nb(mass * s)


@njit(cache=True)
def link_kinetic_nb(dq, mass, dt):
    s2 = dt * dt + dq * dq
    second = (dt * dt - dq * dq) / (dt * s2)
    if mass == 0.0:
        return second
    s = math.sqrt(s2)
    return mass * dt / s * k0_over_k1_nb(mass * s) + second


# -- public API -------------------------------------------------------------

def _check_dt(dt):
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be > 0, got {dt!r}")


def potential(q: float, p: ModelParams) -> float:
    """Regularized Coulomb potential -alpha / sqrt(q**2 + a**2)."""
    return potential_nb(float(q), p.alpha, p.a_reg)


def potential_derivative(q: float, p: ModelParams) -> float:
    r2 = q * q + p.a_reg * p.a_reg
    return p.alpha * q / (r2 * math.sqrt(r2))


def virial_correction(q: float, p: ModelParams) -> float:
    """Regularization term D with q V'(q) = -V(q) - D(q)."""
    return virial_correction_nb(float(q), p.alpha, p.a_reg)


def log_link_weight(dq: float, p: ModelParams, dt: float) -> float:
    """Log of the free relativistic kernel for one link (no potential factor)."""
    _check_dt(dt)
    return log_link_weight_nb(float(dq), p.mass, float(dt))


def link_kinetic_estimator(dq: float, p: ModelParams, dt: float) -> float:
    """Per-link estimator of <sqrt(p**2 + m**2)>, i.e. -d/d(dt) ln rho.

    At m = 0 the Bessel term drops out and only the geometric term
    (dt**2 - dq**2) / (dt s**2) remains, which is the exact derivative of
    the Cauchy kernel.
    """
    _check_dt(dt)
    return link_kinetic_nb(float(dq), p.mass, float(dt))
