"""Metropolis sampling of periodic worldlines.

The log weight of a path is

    sum_i log_link_weight(q[i+1] - q[i]) - dt * sum_i V(q[i])

with periodic indices.  A sweep visits every site in order and proposes
``q -> q + U(-delta, delta)``, then attempts ``segment_moves`` rigid shifts
of a random contiguous block of slices (the whole path included).  A
block shift only changes the two links at its ends, and it is what lets
the heavy-tailed massless paths decorrelate: their long links separate
clusters of slices that single-site moves can only drag along one site at
a time.  ``delta`` is tuned during thermalization only and frozen for the
measured part of the chain.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from . import __version__
from .estimators import ObservableSeries
from .model import (LatticeParams, ModelParams, link_kinetic_nb,
                    log_link_weight_nb, potential_nb, virial_correction_nb)

log = logging.getLogger(__name__)

RNG_NAME = "numpy.random.PCG64"
TUNE_WINDOW = 10
DEAD_BAND = 0.05
FROZEN_WINDOW = 100
FROZEN_ACCEPTANCE = 0.01
# block shifts draw their width from delta * 2**k, k uniform in [0, SEGMENT_SCALES)
SEGMENT_SCALES = 6


class NumericalFailure(RuntimeError):
    """A chain that can no longer produce meaningful samples."""


class CollapseError(NumericalFailure):
    """Path has fallen onto the regularized singularity (or produced a non-finite weight)."""

    def __init__(self, message, site=None, q=None):
        super().__init__(message)
        self.site = site
        self.q = q


class FrozenChainError(NumericalFailure):
    pass


# -- compiled kernels -------------------------------------------------------

@njit(cache=True, nogil=True)
def _local_delta(path, site, new_q, mass, alpha, a_reg, dt):
    n = path.shape[0]
    q = path[site]
    q_prev = path[(site - 1) % n]
    q_next = path[(site + 1) % n]
    # grouped old/new per link so a no-op move gives exactly 0
    d_fwd = log_link_weight_nb(q_next - new_q, mass, dt) - log_link_weight_nb(q_next - q, mass, dt)
    d_back = log_link_weight_nb(new_q - q_prev, mass, dt) - log_link_weight_nb(q - q_prev, mass, dt)
    d_pot = potential_nb(new_q, alpha, a_reg) - potential_nb(q, alpha, a_reg)
    return d_fwd + d_back - dt * d_pot


@njit(cache=True, nogil=True)
def _sweeps(path, rng, delta, n_sweeps, n_segment, mass, alpha, a_reg, dt):
    """Run ``n_sweeps`` sweeps in place.

    Returns (accepted single-site moves, accepted segment moves, bad_site);
    bad_site >= 0 flags a non-finite weight change at that site, in which
    case the sweep is abandoned.
    """
    n = path.shape[0]
    accepted = 0
    seg_accepted = 0
    for _ in range(n_sweeps):
        for i in range(n):
            new_q = path[i] + delta * (2.0 * rng.random() - 1.0)
            d = _local_delta(path, i, new_q, mass, alpha, a_reg, dt)
            if not math.isfinite(d):
                return accepted, seg_accepted, i
            if d >= 0.0 or rng.random() < math.exp(d):
                path[i] = new_q
                accepted += 1
        if n_segment > 0:
            seg_accepted += _segment_moves(path, rng, delta, n_segment, mass, alpha, a_reg, dt)
    return accepted, seg_accepted, -1


@njit(cache=True, nogil=True)
def _segment_moves(path, rng, delta, n_moves, mass, alpha, a_reg, dt):
    n = path.shape[0]
    accepted = 0
    for _ in range(n_moves):
        start = int(rng.random() * n)
        length = 1 + int(rng.random() * n)
        shift = delta * 2.0 ** int(rng.random() * SEGMENT_SCALES) * (2.0 * rng.random() - 1.0)
        d = 0.0
        if length < n:
            end = (start + length - 1) % n
            q_in = path[(start - 1) % n]
            q_out = path[(end + 1) % n]
            d += (log_link_weight_nb(path[start] + shift - q_in, mass, dt)
                  - log_link_weight_nb(path[start] - q_in, mass, dt))
            d += (log_link_weight_nb(q_out - path[end] - shift, mass, dt)
                  - log_link_weight_nb(q_out - path[end], mass, dt))
        if alpha != 0.0:
            d_pot = 0.0
            for t in range(length):
                q = path[(start + t) % n]
                d_pot += potential_nb(q + shift, alpha, a_reg) - potential_nb(q, alpha, a_reg)
            d -= dt * d_pot
        if not math.isfinite(d):
            continue
        if d >= 0.0 or rng.random() < math.exp(d):
            for t in range(length):
                path[(start + t) % n] += shift
            accepted += 1
    return accepted


@njit(cache=True, nogil=True)
def _measure(path, mass, alpha, a_reg, dt):
    n = path.shape[0]
    kin = 0.0
    pot = 0.0
    vd = 0.0
    q2 = 0.0
    for i in range(n):
        q = path[i]
        kin += link_kinetic_nb(path[(i + 1) % n] - q, mass, dt)
        pot += potential_nb(q, alpha, a_reg)
        vd += virial_correction_nb(q, alpha, a_reg)
        q2 += q * q
    return kin / n, pot / n, vd / n, q2 / n


@njit(cache=True, nogil=True)
def _log_weight(path, mass, alpha, a_reg, dt):
    n = path.shape[0]
    total = 0.0
    for i in range(n):
        total += log_link_weight_nb(path[(i + 1) % n] - path[i], mass, dt)
        total -= dt * potential_nb(path[i], alpha, a_reg)
    return total


# -- state and configuration ------------------------------------------------

@dataclass
class RunConfig:
    model: ModelParams
    lattice: LatticeParams
    seed: int = 0
    n_therm_sweeps: int | None = None
    n_measure_sweeps: int = 10_000
    measure_every: int = 1
    target_acceptance: float = 0.5
    initial_path: str = "cold"
    hot_width: float = 1.0
    initial_step: float | None = None
    segment_moves: int | None = None

    def __post_init__(self):
        if self.segment_moves is None:
            self.segment_moves = self.lattice.n_slices
        if self.segment_moves < 0:
            raise ValueError("segment_moves must be >= 0")
        if self.n_therm_sweeps is None:
            self.n_therm_sweeps = 10 * self.lattice.n_slices
        if self.n_therm_sweeps < 0:
            raise ValueError("n_therm_sweeps must be >= 0")
        if self.measure_every < 1:
            raise ValueError("measure_every must be >= 1")
        if self.n_measure_sweeps < self.measure_every:
            raise ValueError("n_measure_sweeps must be >= measure_every")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if self.initial_path not in ("cold", "hot"):
            raise ValueError(f"initial_path must be 'cold' or 'hot', got {self.initial_path!r}")
        if not self.hot_width > 0.0:
            raise ValueError("hot_width must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def metadata(self) -> dict:
        meta = {
            **asdict(self.model),
            "n_slices": self.lattice.n_slices,
            "dt": self.lattice.dt,
            "beta": self.lattice.beta,
        }
        for key in ("seed", "n_therm_sweeps", "n_measure_sweeps", "measure_every",
                    "target_acceptance", "initial_path", "hot_width", "initial_step",
                    "segment_moves"):
            meta[key] = getattr(self, key)
        meta["rng"] = RNG_NAME
        meta["version"] = __version__
        meta["kinetic_convention"] = "includes rest mass; K_nr = kinetic - mass"
        return meta


def default_step(model: ModelParams, dt: float) -> float:
    """Width of a typical link: dt when relativistic, sqrt(dt/m) when not."""
    if model.mass * dt > 1.0:
        return math.sqrt(dt / model.mass)
    return dt


@dataclass
class ChainState:
    path: np.ndarray
    rng: np.random.Generator
    step_delta: float
    accept_count: int = 0
    propose_count: int = 0
    sweep_index: int = 0
    segment_accept: int = 0
    segment_propose: int = 0
    window_accept: int = field(default=0, repr=False)
    window_propose: int = field(default=0, repr=False)

    @classmethod
    def initial(cls, config: RunConfig) -> "ChainState":
        rng = np.random.Generator(np.random.PCG64(config.seed))
        n = config.lattice.n_slices
        if config.initial_path == "hot":
            path = rng.uniform(-config.hot_width, config.hot_width, size=n)
        else:
            path = np.zeros(n)
        step = config.initial_step or default_step(config.model, config.lattice.dt)
        return cls(path=path, rng=rng, step_delta=step)

    @property
    def acceptance(self) -> float:
        return self.accept_count / self.propose_count if self.propose_count else 0.0


# -- operations -------------------------------------------------------------

def local_action_delta(path, site: int, new_q: float, model: ModelParams, dt: float) -> float:
    """Change in log weight when ``path[site]`` moves to ``new_q``."""
    path = np.asarray(path, dtype=float)
    if not 0 <= site < len(path):
        raise IndexError(f"site {site} outside path of length {len(path)}")
    return _local_delta(path, site, float(new_q), model.mass, model.alpha, model.a_reg, dt)


def path_log_weight(path, model: ModelParams, dt: float) -> float:
    """Full log weight of a periodic path (brute-force reference for the local update)."""
    return _log_weight(np.asarray(path, dtype=float), model.mass, model.alpha, model.a_reg, dt)


def metropolis_sweep(state: ChainState, model: ModelParams, lattice: LatticeParams,
                     n_sweeps: int = 1, segment_moves: int = 0) -> ChainState:
    """Advance the chain by ``n_sweeps`` sweeps (in place).

    ``segment_moves`` block shifts are attempted after each single-site pass.
    """
    n = lattice.n_slices
    accepted, seg_accepted, bad = _sweeps(
        state.path, state.rng, state.step_delta, n_sweeps, segment_moves,
        model.mass, model.alpha, model.a_reg, lattice.dt)
    if bad >= 0:
        raise CollapseError(
            f"non-finite action change at site {bad}, q={state.path[bad]!r}; "
            "collapse onto the singularity suspected",
            site=bad, q=float(state.path[bad]))
    state.accept_count += accepted
    state.propose_count += n * n_sweeps
    state.segment_accept += seg_accepted
    state.segment_propose += segment_moves * n_sweeps
    state.window_accept += accepted
    state.window_propose += n * n_sweeps
    state.sweep_index += n_sweeps
    return state


def tune_step(state: ChainState, target: float) -> ChainState:
    """Nudge the proposal width towards the target acceptance and reset the window."""
    if state.window_propose:
        rate = state.window_accept / state.window_propose
        if rate > target + DEAD_BAND:
            state.step_delta *= 1.1
        elif rate < target - DEAD_BAND:
            state.step_delta *= 0.9
    state.window_accept = 0
    state.window_propose = 0
    return state


def measure(state: ChainState, model: ModelParams, lattice: LatticeParams):
    """Path averages (kinetic, potential, virial_d, q2) of the current path."""
    return _measure(state.path, model.mass, model.alpha, model.a_reg, lattice.dt)


def is_collapsed(q2_mean: float, v_mean: float, model: ModelParams) -> bool:
    """Whole path sitting in the core of the regularized well."""
    a = model.a_reg
    return q2_mean < (2.0 * a) ** 2 and v_mean < -0.9 * model.alpha / a


def thermalize(state: ChainState, config: RunConfig) -> ChainState:
    model, lattice = config.model, config.lattice
    done = 0
    while done < config.n_therm_sweeps:
        k = min(TUNE_WINDOW, config.n_therm_sweeps - done)
        metropolis_sweep(state, model, lattice, k, config.segment_moves)
        tune_step(state, config.target_acceptance)
        done += k
    return state


def run_chain(config: RunConfig, strict: bool = True) -> ObservableSeries:
    """Thermalize, then measure every ``measure_every`` sweeps.

    With ``strict`` a collapsed or frozen chain raises; otherwise the
    condition is recorded under ``metadata['flags']`` and the series is
    returned.
    """
    model, lattice = config.model, config.lattice
    state = ChainState.initial(config)
    thermalize(state, config)
    state.accept_count = state.propose_count = 0
    state.segment_accept = state.segment_propose = 0

    n_meas = config.n_measure_sweeps // config.measure_every
    cols = np.empty((n_meas, 5))
    sweeps = np.empty(n_meas, dtype=np.int64)
    flags = []
    frozen_acc = frozen_prop = frozen_sweeps = 0
    n = lattice.n_slices
    for j in range(n_meas):
        before = state.accept_count
        metropolis_sweep(state, model, lattice, config.measure_every, config.segment_moves)
        acc = state.accept_count - before
        kin, pot, vd, q2 = measure(state, model, lattice)
        cols[j] = kin, pot, vd, q2, acc / (n * config.measure_every)
        sweeps[j] = state.sweep_index

        frozen_acc += acc
        frozen_prop += n * config.measure_every
        frozen_sweeps += config.measure_every
        if frozen_sweeps >= FROZEN_WINDOW:
            if frozen_acc < FROZEN_ACCEPTANCE * frozen_prop and "frozen" not in flags:
                msg = (f"acceptance {frozen_acc / frozen_prop:.3g} over {frozen_sweeps} sweeps "
                       f"ending at sweep {state.sweep_index}: chain is frozen")
                if strict:
                    raise FrozenChainError(msg)
                log.warning(msg)
                flags.append("frozen")
            frozen_acc = frozen_prop = frozen_sweeps = 0

    meta = config.metadata()
    meta["step_delta"] = state.step_delta
    meta["segment_acceptance"] = (state.segment_accept / state.segment_propose
                                  if state.segment_propose else None)
    window = cols[-min(100, n_meas):]
    if is_collapsed(window[:, 3].mean(), window[:, 1].mean(), model):
        msg = (f"path collapsed onto the attractive centre: <q^2>={window[:, 3].mean():.3g} "
               f"< (2a)^2 and <V>={window[:, 1].mean():.4g} < -0.9 alpha/a")
        if strict:
            raise CollapseError(msg)
        log.warning(msg)
        flags.append("collapsed")
    meta["flags"] = flags
    return ObservableSeries(sweeps, *cols.T, metadata=meta)
