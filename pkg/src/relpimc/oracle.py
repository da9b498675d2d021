"""Ground states from grid diagonalization, independent of the sampler.

Both Hamiltonians live on a periodic grid of ``n_points`` over
``[-L, L)``.  The non-relativistic kinetic term is the central second
difference; the relativistic one is diagonal in the discrete momentum
basis, ``sqrt(p_k**2 + m**2)``, which makes it a symmetric circulant in
position space.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .model import ModelParams

DENSE_LIMIT = 2048


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_points: int
    box_half_width: float

    def __post_init__(self):
        if self.n_points < 4:
            raise ValueError("n_points must be >= 4")
        if not self.box_half_width > 0:
            raise ValueError("box_half_width must be > 0")

    @property
    def spacing(self) -> float:
        return 2.0 * self.box_half_width / self.n_points

    @property
    def points(self) -> np.ndarray:
        return -self.box_half_width + self.spacing * np.arange(self.n_points)

    @property
    def momenta(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    def coarser(self) -> "GridSpec":
        return GridSpec(self.n_points // 2, self.box_half_width)


@dataclass(frozen=True)
class SpectralResult:
    ground_energy: float
    q2_expectation: float
    converged: bool
    wavefunction: np.ndarray | None = None


def _potential_diag(model, grid, potential):
    q = grid.points
    if potential is not None:
        return np.asarray(potential(q), dtype=float)
    if grid.spacing > 2.0 * model.a_reg:
        warnings.warn(f"grid spacing {grid.spacing:.3g} exceeds a_reg={model.a_reg}; "
                      "the potential core is under-resolved", stacklevel=3)
    return -model.alpha / np.sqrt(q * q + model.a_reg ** 2)


def nr_hamiltonian(model: ModelParams, grid: GridSpec, potential=None):
    """Sparse NR Hamiltonian -(1/2m) d^2/dq^2 + V, rest mass excluded."""
    if not model.mass > 0:
        raise ValueError("the non-relativistic oracle needs mass > 0")
    n, h = grid.n_points, grid.spacing
    c = 1.0 / (2.0 * model.mass * h * h)
    off = -c * np.ones(n)
    lap = sparse.diags([off[:-1], 2 * c * np.ones(n), off[:-1]], [-1, 0, 1], format="lil")
    lap[0, n - 1] = -c
    lap[n - 1, 0] = -c
    return (lap + sparse.diags(_potential_diag(model, grid, potential))).tocsr()


def relativistic_kinetic_kernel(model: ModelParams, grid: GridSpec) -> np.ndarray:
    """First row of the circulant matrix of sqrt(p**2 + m**2)."""
    disp = np.sqrt(grid.momenta ** 2 + model.mass ** 2)
    return np.fft.ifft(disp).real


def rel_hamiltonian(model: ModelParams, grid: GridSpec, potential=None) -> np.ndarray:
    """Dense relativistic Hamiltonian sqrt(p^2 + m^2) + V, rest mass included."""
    h = linalg.circulant(relativistic_kinetic_kernel(model, grid))
    h[np.diag_indices_from(h)] += _potential_diag(model, grid, potential)
    return h


def _lowest(h, n, solver):
    if solver == "auto":
        solver = "dense" if n <= DENSE_LIMIT else "iterative"
    if solver == "dense":
        dense = h.toarray() if sparse.issparse(h) else h
        w, v = linalg.eigh(dense, subset_by_index=[0, 0])
        return w[0], v[:, 0]
    if solver != "iterative":
        raise ValueError(f"unknown solver {solver!r}")
    try:
        w, v = eigsh(h, k=1, which="SA", tol=1e-12, maxiter=20 * n)
    except ArpackNoConvergence as exc:
        raise OracleError(f"Lanczos did not converge on {n} points") from exc
    return w[0], v[:, 0]


def _result(energy, vec, grid, coarse_energy, tol):
    prob = vec * vec
    prob /= prob.sum()
    q2 = float(np.dot(prob, grid.points ** 2))
    converged = coarse_energy is not None and abs(energy - coarse_energy) < tol * max(1.0, abs(energy))
    return SpectralResult(float(energy), q2, bool(converged), vec / math.sqrt(grid.spacing * (vec @ vec)))


def nr_ground_state(model: ModelParams, grid: GridSpec, potential=None,
                    solver: str = "auto", tol: float = 1e-4) -> SpectralResult:
    """Lowest eigenpair of the non-relativistic Hamiltonian (without the rest mass).

    ``potential`` replaces the Coulomb term by any vectorized callable of q,
    which is how the solver is checked against exactly solvable wells.
    ``converged`` compares against the same problem on half as many points.
    """
    e, v = _lowest(nr_hamiltonian(model, grid, potential), grid.n_points, solver)
    coarse = grid.coarser()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e_coarse, _ = _lowest(nr_hamiltonian(model, coarse, potential), coarse.n_points, solver)
    return _result(e, v, grid, e_coarse, tol)


def _rel_operator(model, grid, potential):
    disp = np.sqrt(grid.momenta ** 2 + model.mass ** 2)
    pot = _potential_diag(model, grid, potential)

    def matvec(x):
        x = np.ravel(x)
        return np.fft.ifft(disp * np.fft.fft(x)).real + pot * x

    n = grid.n_points
    return LinearOperator((n, n), matvec=matvec, dtype=float)


def rel_ground_state(model: ModelParams, grid: GridSpec, potential=None,
                     solver: str = "auto", tol: float = 1e-4) -> SpectralResult:
    """Lowest eigenpair of sqrt(p^2 + m^2) + V, rest mass included.

    ``mass = 0`` gives the ultra-relativistic |p| kinetic term exactly.
    """
    def solve(g):
        if solver == "dense" or (solver == "auto" and g.n_points <= DENSE_LIMIT):
            return _lowest(rel_hamiltonian(model, g, potential), g.n_points, "dense")
        return _lowest(_rel_operator(model, g, potential), g.n_points, "iterative")

    e, v = solve(grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e_coarse, _ = solve(grid.coarser())
    return _result(e, v, grid, e_coarse, tol)


def rayleigh_quotient(h, vec) -> float:
    vec = np.asarray(vec, dtype=float)
    return float(vec @ (h @ vec) / (vec @ vec))
