"""Bound/unbound classification and the critical-coupling search.

A chain started on the attractive centre either stays there (its <q^2>
settles on a plateau, independent of the number of sweeps) or escapes and
wanders off like a random walk (<q^2> grows linearly with the sweep
count).  ``classify_state`` decides between the two with a least-squares
slope test on block means; ``find_critical_coupling`` bisects in alpha on
the verdict combined over independent chains.

A single escaped chain is a weak witness: a 1D random walk is recurrent,
so its q^2 often drifts back towards where it started.  Testing several
independent chains for any significant trend, whatever its sign, restores
the power of the test (see ``combine_verdicts``).
"""
import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .model import LatticeParams, ModelParams
from .sampler import RunConfig, run_chain
from .specfun import k0_over_k1

log = logging.getLogger(__name__)

SLOPE_T = 3.0


class Phase(enum.Enum):
    BOUND = "Bound"
    UNBOUND = "Unbound"
    COLLAPSED = "Collapsed"
    INCONCLUSIVE = "Inconclusive"

    @property
    def captured(self) -> bool:
        """True on the strong-coupling side of the transition."""
        return self in (Phase.BOUND, Phase.COLLAPSED)


@dataclass(frozen=True)
class PhaseVerdict:
    phase: Phase
    q2_slope: float
    q2_plateau: float
    slope_significance: float


@dataclass(frozen=True)
class CriticalPoint:
    mass: float
    a_reg: float
    alpha_cr: float
    alpha_lo: float
    alpha_hi: float
    n_chains_per_probe: int
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def width(self) -> float:
        return self.alpha_hi - self.alpha_lo


class CriticalSearchError(RuntimeError):
    def __init__(self, message, alpha_lo=math.nan, alpha_hi=math.nan):
        super().__init__(message)
        self.alpha_lo = alpha_lo
        self.alpha_hi = alpha_hi


def free_particle_reference(beta: float, mass: float) -> float:
    """Thermal <sqrt(p^2 + m^2)> of a free particle, m K0(bm)/K1(bm) + 1/b."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    if mass < 0:
        raise ValueError(f"mass must be >= 0, got {mass!r}")
    if mass == 0:
        return 1.0 / beta
    return mass * k0_over_k1(beta * mass) + 1.0 / beta


# -- classification ---------------------------------------------------------

def q2_blocks(series, n_blocks: int = 16):
    """Block means of <q^2> paired with the mean sweep index of each block."""
    n = len(series) // n_blocks * n_blocks
    sweeps = series.sweep[:n].reshape(n_blocks, -1).mean(axis=1)
    q2 = series.q2[:n].reshape(n_blocks, -1).mean(axis=1)
    return list(zip(sweeps, q2))


def classify_state(q2_blocks, model: ModelParams) -> PhaseVerdict:
    """Bound if the block means of <q^2> show no trend, Unbound if they grow.

    ``q2_blocks`` is a sequence of (sweep_index, block-mean q^2) pairs.
    The slope significance is the OLS slope over its standard error, where
    the block noise is estimated from successive differences (von Neumann)
    rather than from fit residuals: for independent blocks the two agree,
    but a wandering series inflates the residuals and would hide its own
    growth.  A plateau at or below (2a)^2 means the whole path sits in the
    core of the well and is reported as Collapsed.
    """
    data = np.asarray(q2_blocks, dtype=float)
    if data.ndim != 2 or len(data) < 8:
        raise ValueError(f"need at least 8 (sweep, q2) blocks, got {len(data)}")
    x, y = data[:, 0], data[:, 1]
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    noise_var = float(np.sum(np.diff(y) ** 2)) / (2.0 * (len(y) - 1))
    se = math.sqrt(noise_var / sxx)
    if se > 0:
        t = slope / se
    else:
        t = 0.0 if slope == 0 else math.copysign(math.inf, slope)
    plateau = float(y.mean())
    return PhaseVerdict(_phase(plateau, t, model), slope, plateau, t)


def _phase(plateau, t, model):
    if plateau <= (2.0 * model.a_reg) ** 2:
        return Phase.COLLAPSED
    if abs(t) < SLOPE_T:
        return Phase.BOUND
    if t > 0:
        return Phase.UNBOUND
    return Phase.INCONCLUSIVE


def combine_verdicts(verdicts, model: ModelParams, n_blocks: int = 32) -> PhaseVerdict:
    """One verdict from independent chains.

    Each chain's slope t-value is mapped to a normal deviate through the
    t distribution with ``n_blocks - 2`` degrees of freedom, and the sum of
    squares is tested against chi^2(n).  The test is two-sided on purpose:
    once thermalized, an escaped walker sits far from the centre and its
    q^2 drifts up or down with equal odds, so opposite signs must not
    cancel.  A stationary (bound) chain has small |t| of either sign.  The
    combined significance is reported as the equivalent one-sided normal
    deviate; slope and plateau are plain averages.
    """
    if not verdicts:
        raise ValueError("no verdicts to combine")
    t = np.array([v.slope_significance for v in verdicts], dtype=float)
    slope = float(np.mean([v.q2_slope for v in verdicts]))
    plateau = float(np.mean([v.q2_plateau for v in verdicts]))
    if plateau <= (2.0 * model.a_reg) ** 2:
        return PhaseVerdict(Phase.COLLAPSED, slope, plateau, 0.0)
    if np.any(np.isnan(t)):
        return PhaseVerdict(Phase.INCONCLUSIVE, slope, plateau, math.nan)
    z = stats.norm.isf(stats.t.sf(np.abs(t), max(n_blocks - 2, 1)))
    log_p = stats.chi2.logsf(float(np.sum(z * z)), len(t))
    sig = float(stats.norm.isf(math.exp(log_p))) if log_p > -700 else math.inf
    phase = Phase.BOUND if sig < SLOPE_T else Phase.UNBOUND
    return PhaseVerdict(phase, slope, plateau, sig)


# -- probes -----------------------------------------------------------------

@dataclass(frozen=True)
class ProbeSettings:
    """How one coupling is probed: lattice, chain length and chain count."""

    beta: float = 16.0
    n_slices: int = 128
    n_therm_sweeps: int | None = None
    n_measure_sweeps: int = 20_000
    measure_every: int = 10
    n_blocks: int = 32
    n_chains: int = 5
    base_seed: int = 1
    max_retries: int = 2
    threads: int = 1

    def run_config(self, model: ModelParams, seed: int, sweep_factor: int = 1) -> RunConfig:
        lattice = LatticeParams.from_beta(self.beta, self.n_slices)
        n_therm = self.n_therm_sweeps if self.n_therm_sweeps is not None else 10 * self.n_slices
        return RunConfig(model=model, lattice=lattice, seed=seed, n_therm_sweeps=n_therm,
                         n_measure_sweeps=self.n_measure_sweeps * sweep_factor,
                         measure_every=self.measure_every, initial_path="cold")


def _probe_chain(args):
    settings, model, seed, factor = args
    series = run_chain(settings.run_config(model, seed, factor), strict=False)
    return q2_blocks(series, settings.n_blocks)


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def probe_seeds(settings: ProbeSettings, alpha: float) -> list[int]:
    # seeds depend only on (base_seed, alpha), never on evaluation order
    key = int(round(alpha * 1e9)) % 1_000_003
    return [(settings.base_seed * 1_000_003 + key) * 64 + k for k in range(settings.n_chains)]


def probe_phase(model: ModelParams, settings: ProbeSettings) -> tuple[Phase, list[PhaseVerdict]]:
    """Verdict at one coupling from ``n_chains`` independent chains.

    Per-chain verdicts are merged by ``combine_verdicts``; an Inconclusive
    result re-runs every chain with doubled sweeps, at most
    ``max_retries`` times.  Returns the combined phase and the per-chain
    verdicts.
    """
    seeds = probe_seeds(settings, model.alpha)
    factor = 1
    for attempt in range(settings.max_retries + 1):
        blocks = _map(_probe_chain, [(settings, model, s, factor) for s in seeds], settings.threads)
        per_chain = [classify_state(b, model) for b in blocks]
        verdict = combine_verdicts(per_chain, model, settings.n_blocks)
        log.debug("alpha=%g attempt %d: combined %s (t=%.2f), chains %s", model.alpha, attempt,
                  verdict.phase.value, verdict.slope_significance, [v.phase.value for v in per_chain])
        if verdict.phase is not Phase.INCONCLUSIVE:
            return verdict.phase, per_chain
        factor *= 2
    return Phase.INCONCLUSIVE, per_chain


def find_critical_coupling(mass: float, a_reg: float, alpha_bracket=(0.05, 2.0),
                           rel_tol: float = 0.1, settings: ProbeSettings | None = None,
                           ) -> CriticalPoint:
    """Bisect in alpha between an Unbound and a captured coupling.

    Probes sit at the geometric midpoint of the bracket (the brackets
    routinely span decades).  Stops once (alpha_hi - alpha_lo) / alpha_cr <
    ``rel_tol`` and returns the arithmetic bracket midpoint as alpha_cr.
    """
    settings = settings or ProbeSettings()
    lo, hi = map(float, alpha_bracket)
    if not 0 <= lo < hi:
        raise CriticalSearchError(f"invalid bracket ({lo}, {hi})", lo, hi)

    def phase_at(alpha):
        phase, _ = probe_phase(ModelParams(mass, alpha, a_reg), settings)
        log.info("m=%g a=%g alpha=%.5g -> %s", mass, a_reg, alpha, phase.value)
        if phase is Phase.INCONCLUSIVE:
            raise CriticalSearchError(f"persistently inconclusive at alpha={alpha}", lo, hi)
        return phase

    if phase_at(lo) is not Phase.UNBOUND:
        raise CriticalSearchError(f"lower end alpha={lo} is not unbound", lo, hi)
    if not phase_at(hi).captured:
        raise CriticalSearchError(f"upper end alpha={hi} is not bound", lo, hi)
    while (hi - lo) / (0.5 * (lo + hi)) >= rel_tol:
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        if phase_at(mid).captured:
            hi = mid
        else:
            lo = mid
    return CriticalPoint(mass, a_reg, 0.5 * (lo + hi), lo, hi, settings.n_chains)


def scan_mass(masses, a_reg: float, alpha_bracket=(0.05, 2.0), rel_tol: float = 0.1,
              settings: ProbeSettings | None = None, threads: int = 1) -> list[CriticalPoint]:
    """Critical coupling for each mass, sorted by mass.

    A failed search is reported as a CriticalPoint carrying ``error`` and a
    NaN alpha_cr; the remaining masses still run.
    """
    masses = [float(m) for m in masses]
    if not masses or any(m < 0 for m in masses):
        raise ValueError("masses must be a non-empty sequence of values >= 0")
    settings = settings or ProbeSettings()

    def one(mass):
        try:
            return find_critical_coupling(mass, a_reg, alpha_bracket, rel_tol, settings)
        except CriticalSearchError as exc:
            log.warning("m=%g: %s", mass, exc)
            return CriticalPoint(mass, a_reg, math.nan, exc.alpha_lo, exc.alpha_hi,
                                 settings.n_chains, error=str(exc))

    return sorted(_map(one, masses, threads), key=lambda p: p.mass)


def scan_alpha(mass: float, a_reg: float, alphas, sweep_budgets,
               settings: ProbeSettings | None = None) -> list[dict]:
    """Final-block <q^2> of one chain per (alpha, N_s) pair.

    Bound couplings give the same value for every budget; unbound ones
    grow with it.
    """
    settings = settings or ProbeSettings()
    rows = []
    for alpha in alphas:
        model = ModelParams(mass, float(alpha), a_reg)
        seed = probe_seeds(settings, float(alpha))[0]
        for n_s in sweep_budgets:
            cfg = replace(settings.run_config(model, seed), n_measure_sweeps=int(n_s))
            series = run_chain(cfg, strict=False)
            tail = series.q2[-max(1, len(series) // settings.n_blocks):]
            rows.append({"alpha": float(alpha), "n_sweeps": int(n_s), "q2": float(tail.mean()),
                         "log2_alpha": math.log2(alpha), "log2_q2": math.log2(tail.mean())})
    return rows
