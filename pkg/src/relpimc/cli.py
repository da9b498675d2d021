"""Command-line entry point: ``relpimc <command> --config FILE --output-dir DIR``.

Exit codes: 0 success, 1 a check ran but failed (free-check), 2 config
error, 3 numerical failure, 4 I/O error.  Failures after the output
directory exists also leave an ``error.json`` there.
"""
import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .diagnostics import (CriticalSearchError, ProbeSettings, find_critical_coupling,
                          free_particle_reference, scan_alpha, scan_mass)
from .estimators import auto_binned_estimate, binned_estimate, nonrelativistic_kinetic, virial_residual
from .io import (COMMANDS, CRITICAL_HEADER, ConfigError, emit_series, parse_config, write_table)
from .oracle import GridSpec, OracleError, nr_ground_state, rel_ground_state
from .sampler import NumericalFailure, run_chain

log = logging.getLogger("relpimc")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


class Job:
    """Everything one invocation needs: parsed config plus output policy."""

    def __init__(self, command, config_text, output_dir, seed_override=None, threads=None,
                 force=False, timestamp=True):
        self.command = command
        self.output_dir = Path(output_dir)
        self.force = force
        self.timestamp = timestamp
        self.config, self.section, self.values = parse_config(config_text, command)
        if seed_override is not None:
            self.config = replace(self.config, seed=seed_override)
            self.values["seed"] = seed_override
        if threads is not None:
            if threads < 1:
                raise ConfigError("threads must be >= 1")
            self.values["threads"] = threads
        self.threads = self.values["threads"]
        self.written = []

    def metadata(self, **extra):
        return {"command": self.command, **self.values, **{f"{self.command}.{k}": v
                for k, v in self.section.items()}, **extra}

    def open(self, name):
        path = self.output_dir / name
        if path.exists() and not self.force:
            raise FileExistsError(f"{path} exists; pass --force to overwrite")
        self.written.append(path)
        return path.open("w", encoding="utf-8", newline="")


def _probe_settings(job: Job) -> ProbeSettings:
    sec, cfg = job.section, job.config
    return ProbeSettings(beta=cfg.lattice.beta, n_slices=cfg.lattice.n_slices,
                         n_therm_sweeps=cfg.n_therm_sweeps, n_measure_sweeps=cfg.n_measure_sweeps,
                         measure_every=cfg.measure_every, n_blocks=sec["n_blocks"],
                         n_chains=sec["n_chains"], base_seed=cfg.seed,
                         max_retries=sec["max_retries"], threads=job.threads)


# -- commands ---------------------------------------------------------------

def cmd_run(job):
    series = run_chain(job.config)
    with job.open("series.csv") as fh:
        emit_series(series, fh, job.timestamp, job.metadata())
    e = auto_binned_estimate(series.q2, min_bins=16)
    print(f"<q^2> = {e}   <K> = {auto_binned_estimate(series.kinetic, 16)}   "
          f"<V> = {auto_binned_estimate(series.potential, 16)}")
    return EXIT_OK


def cmd_virial(job):
    series = run_chain(job.config)
    bin_size = job.section["bin_size"]
    res = virial_residual(series, bin_size)
    size = res.bin_size
    k_nr = binned_estimate(nonrelativistic_kinetic(series), size)
    pot = binned_estimate(series.potential, size)
    vd = binned_estimate(series.virial_d, size)
    with job.open("series.csv") as fh:
        emit_series(series, fh, job.timestamp, job.metadata())
    header = ("mass", "alpha", "a_reg", "kinetic_nr", "kinetic_nr_err", "potential", "potential_err",
              "virial_d", "virial_d_err", "residual", "residual_err", "bin_size")
    m = job.config.model
    row = (m.mass, m.alpha, m.a_reg, k_nr.mean, k_nr.std_error, pot.mean, pot.std_error,
           vd.mean, vd.std_error, res.mean, res.std_error, size)
    with job.open("virial.csv") as fh:
        write_table(fh, header, [row], job.metadata(), job.timestamp)
    verdict = "holds" if res.within(0.0) else "violated"
    print(f"2<K_nr> + <V + D> = {res}  (non-relativistic virial relation {verdict} at 3 sigma)")
    return EXIT_OK


def cmd_free_check(job):
    cfg = replace(job.config, model=replace(job.config.model, alpha=0.0))
    series = run_chain(cfg)
    est = auto_binned_estimate(series.kinetic)
    ref = free_particle_reference(cfg.lattice.beta, cfg.model.mass)
    n_sigma = float(job.section["n_sigma"])
    ok = est.within(ref, n_sigma)
    with job.open("free_check.csv") as fh:
        write_table(fh, ("beta", "mass", "measured", "std_error", "reference", "passed"),
                    [(cfg.lattice.beta, cfg.model.mass, est.mean, est.std_error, ref, str(ok))],
                    job.metadata(alpha=0.0), job.timestamp)
    z = (est.mean - ref) / est.std_error if est.std_error else math.inf
    print(f"measured <K> = {est}, reference = {ref:.10g}, deviation = {z:+.2f} sigma -> "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_scan_alpha(job):
    sec = job.section
    n = int(round((sec["log2_alpha_max"] - sec["log2_alpha_min"]) / sec["log2_alpha_step"])) + 1
    alphas = [2.0 ** (sec["log2_alpha_min"] + k * sec["log2_alpha_step"]) for k in range(n)]
    settings = replace(_probe_settings_basic(job), n_chains=1)
    rows = scan_alpha(job.config.model.mass, job.config.model.a_reg, alphas,
                      sec["sweep_budgets"], settings)
    header = ("alpha", "log2_alpha", "n_sweeps", "q2", "log2_q2")
    with job.open("scan_alpha.csv") as fh:
        write_table(fh, header, [tuple(r[h] for h in header) for r in rows],
                    job.metadata(), job.timestamp)
    for r in rows:
        print(f"log2 alpha = {r['log2_alpha']:+.2f}  N_s = {r['n_sweeps']:>7d}  log2 <q^2> = {r['log2_q2']:+.3f}")
    return EXIT_OK


def _probe_settings_basic(job):
    cfg = job.config
    return ProbeSettings(beta=cfg.lattice.beta, n_slices=cfg.lattice.n_slices,
                         n_therm_sweeps=cfg.n_therm_sweeps, measure_every=cfg.measure_every,
                         base_seed=cfg.seed, threads=job.threads)


def _critical_rows(points):
    return [(p.mass, p.a_reg, p.alpha_cr, p.alpha_lo, p.alpha_hi) for p in points]


def cmd_find_critical(job):
    sec, m = job.section, job.config.model
    point = find_critical_coupling(m.mass, m.a_reg, (sec["alpha_lo"], sec["alpha_hi"]),
                                   sec["rel_tol"], _probe_settings(job))
    with job.open("critical.csv") as fh:
        write_table(fh, CRITICAL_HEADER, _critical_rows([point]), job.metadata(), job.timestamp)
    print(f"m = {point.mass:g}, a = {point.a_reg:g}: alpha_cr = {point.alpha_cr:.4g} "
          f"in [{point.alpha_lo:.4g}, {point.alpha_hi:.4g}]")
    return EXIT_OK


def cmd_scan_mass(job):
    sec = job.section
    settings = replace(_probe_settings(job), threads=1)
    points = scan_mass(sec["masses"], job.config.model.a_reg, (sec["alpha_lo"], sec["alpha_hi"]),
                       sec["rel_tol"], settings, threads=job.threads)
    with job.open("scan_mass.csv") as fh:
        write_table(fh, CRITICAL_HEADER, _critical_rows(points), job.metadata(), job.timestamp)
    for p in points:
        status = f"FAILED ({p.error})" if p.failed else f"[{p.alpha_lo:.4g}, {p.alpha_hi:.4g}]"
        print(f"m = {p.mass:<8g} alpha_cr = {p.alpha_cr:.4g}  {status}")
    failed = [p for p in points if p.failed]
    if len(failed) == len(points):
        raise CriticalSearchError("every mass failed")
    return EXIT_OK


def _cmd_oracle(job, solver, name):
    sec, m = job.section, job.config.model
    grid = GridSpec(int(sec["n_points"]), float(sec["box_half_width"]))
    res = solver(m, grid)
    header = ("mass", "alpha", "a_reg", "n_points", "box_half_width", "ground_energy", "q2", "converged")
    with job.open(f"{name}.csv") as fh:
        write_table(fh, header, [(m.mass, m.alpha, m.a_reg, grid.n_points, grid.box_half_width,
                                  res.ground_energy, res.q2_expectation, str(res.converged))],
                    job.metadata(), job.timestamp)
    print(f"E0 = {res.ground_energy:.10g}  <q^2> = {res.q2_expectation:.6g}  converged = {res.converged}")
    return EXIT_OK


COMMAND_FUNCS = {
    "run": cmd_run,
    "virial": cmd_virial,
    "free-check": cmd_free_check,
    "scan-alpha": cmd_scan_alpha,
    "find-critical": cmd_find_critical,
    "scan-mass": cmd_scan_mass,
    "oracle-nr": lambda job: _cmd_oracle(job, nr_ground_state, "oracle_nr"),
    "oracle-rel": lambda job: _cmd_oracle(job, rel_ground_state, "oracle_rel"),
}


def run_command(job: Job) -> int:
    """Run one job, translating failures into exit codes and ``error.json``."""
    try:
        job.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {job.output_dir}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return COMMAND_FUNCS[job.command](job)
    except ConfigError as exc:
        return _fail(job, EXIT_CONFIG, exc)
    except (NumericalFailure, CriticalSearchError, OracleError) as exc:
        return _fail(job, EXIT_NUMERICAL, exc)
    except OSError as exc:
        return _fail(job, EXIT_IO, exc)


def _fail(job, code, exc):
    print(f"error: {exc}", file=sys.stderr)
    doc = {"error": type(exc).__name__ + ": " + str(exc),
           "context": {"command": job.command, "exit_code": code, "config": job.values}}
    partial = [str(p) for p in job.written if p.exists()]
    if partial:
        doc["partial_results_path"] = partial[0] if len(partial) == 1 else partial
    try:
        (job.output_dir / "error.json").write_text(json.dumps(doc, indent=2, default=str) + "\n")
    except OSError:
        pass
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="relpimc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("-c", "--config", required=True, help="JSON config file ('-' for stdin)")
    parser.add_argument("-o", "--output-dir", required=True)
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--force", action="store_true", help="overwrite existing output files")
    parser.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp metadata line (byte-identical reruns)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    seed = args.seed
    if seed is None and os.environ.get("RELPIMC_SEED"):
        try:
            seed = int(os.environ["RELPIMC_SEED"])
        except ValueError:
            print("error: RELPIMC_SEED must be an integer", file=sys.stderr)
            return EXIT_CONFIG
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        job = Job(args.command, text, args.output_dir, seed, args.threads,
                  args.force, not args.no_timestamp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_command(job)


if __name__ == "__main__":
    sys.exit(main())
