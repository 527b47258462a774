"""Scan runners behind the command-line subcommands.

Each runner takes a validated :class:`ScanConfig` and returns a
:class:`ResultTable` whose metadata echoes the config.  Grid points are
independent, so they may be fanned out to threads; results are assembled in
grid order regardless of the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import ScanConfig
from .estimation import default_phase_grid, hellinger_sq, max_cfi_over_phase, moment_sensitivity, qfi_pure
from .protocols import GHZ_CHI_T, build_protocol, default_t1_grid, evaluate_protocol, fixed_T_scan, pseudospin_protocol
from .spin import make_collective_operator
from .tables import ResultTable
from .theorem import KIND_NAMES, THEOREM, verify_theorem

NOISE_EXPERIMENTS = ("sensitivity-vs-sigma", "maxcfi-vs-sigma")


def _map(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _metadata(cfg: ScanConfig, assumptions=(), **results) -> dict:
    meta = {"tool": "spinlab", "version": __version__, "experiment": cfg.experiment,
            "config": cfg.to_mapping()}
    if assumptions:
        meta["assumptions"] = list(assumptions)
    if results:
        meta["results"] = results
    return meta


def _assumptions(cfg: ScanConfig, chit: float) -> list:
    notes = []
    if cfg.experiment in ("sensitivity-vs-chit",) + NOISE_EXPERIMENTS and cfg.n_particles == 100:
        notes.append("n = 100 is an adopted default for this scan")
    if chit == GHZ_CHI_T or "ghz-readout" in cfg.protocols:
        notes.append("twisting at chi_t = pi/2 includes alignment rotations that orient "
                     "the cat state along the Jy generator")
    return notes


def _kind_spec(cfg: ScanConfig, kind: str, chit: float):
    chit2 = cfg.chit2 if kind in ("asymmetric", "pseudo-forward") else None
    return build_protocol(kind, cfg.n_particles, chit, chit2)


def _moment(cfg: ScanConfig, kind: str, chit: float, sigma: float, grid) -> float:
    N = cfg.n_particles
    spec = pseudospin_protocol(kind, N, chit)
    curve = moment_sensitivity(spec, make_collective_operator(N, "z"), grid, sigma)
    return N * curve.best_value


def _qfi(cfg: ScanConfig, chit: float) -> float:
    spec = build_protocol("trivial", cfg.n_particles, chit)
    return qfi_pure(spec.entangled_state(), spec.generator_operator())


def run_sensitivity_vs_chit(cfg: ScanConfig, threads: int = 1) -> ResultTable:
    N = cfg.n_particles
    sigma = cfg.resolved_sigma()
    grid = default_phase_grid(cfg.phase_points)
    kinds = cfg.protocols

    def row(chit):
        cfi = [N / max_cfi_over_phase(_kind_spec(cfg, k, chit), sigma, grid).max_value for k in kinds]
        return (chit, _moment(cfg, "trivial", chit, sigma, grid),
                _moment(cfg, "echo", chit, sigma, grid), *cfi, N / _qfi(cfg, chit))

    columns = ("chit", "N_dphi2_trivial_moment", "N_dphi2_echo_moment",
               *(f"N_over_cfi_{k}" for k in kinds), "N_over_qfi")
    rows = _map(row, cfg.chit_grid, threads)
    return ResultTable(columns, rows, _metadata(cfg, _assumptions(cfg, 0.0), sigma=sigma))


def run_noise_scans(cfg: ScanConfig, threads: int = 1) -> ResultTable:
    if cfg.experiment not in NOISE_EXPERIMENTS:
        raise ValueError(f"noise scans need experiment in {NOISE_EXPERIMENTS}, got {cfg.experiment!r}")
    N = cfg.n_particles
    chit = cfg.resolved_chit()
    grid = default_phase_grid(cfg.phase_points)
    kinds = cfg.protocols
    qfi = _qfi(cfg, chit)
    specs = {k: _kind_spec(cfg, k, chit) for k in kinds}

    if cfg.experiment == "maxcfi-vs-sigma":
        columns = ["sigma", "qfi"]
        for k in kinds:
            columns += [f"max_cfi_{k}", f"argmax_phi_{k}", f"below_snl_{k}"]

        def row(sigma):
            out = [sigma, qfi]
            for k in kinds:
                curve = max_cfi_over_phase(specs[k], sigma, grid)
                out += [curve.max_value, curve.argmax_phase, int(curve.max_value < N)]
            return tuple(out)
    else:
        columns = ["sigma", "N_dphi2_trivial_moment", "N_dphi2_echo_moment"]
        for k in kinds:
            columns += [f"N_over_cfi_{k}", f"below_snl_{k}"]
        columns.append("N_over_qfi")

        def row(sigma):
            out = [sigma, _moment(cfg, "trivial", chit, sigma, grid), _moment(cfg, "echo", chit, sigma, grid)]
            for k in kinds:
                f = max_cfi_over_phase(specs[k], sigma, grid).max_value
                out += [N / f, int(f < N)]
            out.append(N / qfi)
            return tuple(out)

    rows = _map(row, cfg.sigma_grid, threads)
    return ResultTable(columns, rows, _metadata(cfg, _assumptions(cfg, chit), chit=chit))


def run_histograms(cfg: ScanConfig, threads: int = 1) -> ResultTable:
    N = cfg.n_particles
    chit, sigma, dphi = cfg.resolved_chit(), cfg.resolved_sigma(), cfg.resolved_dphi()
    columns = ["k", "m"]
    data, hellinger, bases = [], {}, {}
    for kind in cfg.protocols:
        spec = build_protocol(kind, N, chit)
        bases[kind] = spec.basis.label
        clean = [evaluate_protocol(spec, phi).distribution.probabilities for phi in (0.0, dphi)]
        noisy = [evaluate_protocol(spec, phi, sigma).distribution.probabilities for phi in (0.0, dphi)]
        hellinger[kind] = {"clean": math.sqrt(max(hellinger_sq(*clean), 0.0)),
                           "noisy": math.sqrt(max(hellinger_sq(*noisy), 0.0))}
        columns += [f"P_{kind}_0", f"P_{kind}_dphi", f"Pnoisy_{kind}_0", f"Pnoisy_{kind}_dphi"]
        data += [*clean, *noisy]
    ks = np.arange(N + 1)
    cols = [ks, ks - N / 2, *data]
    rows = [tuple(int(c[i]) if j == 0 else float(c[i]) for j, c in enumerate(cols)) for i in range(N + 1)]
    return ResultTable(columns, rows, _metadata(
        cfg, _assumptions(cfg, chit), chit=chit, sigma=sigma, dphi=dphi,
        basis=bases, hellinger_distance=hellinger))


def run_fixed_T(cfg: ScanConfig, threads: int = 1) -> ResultTable:
    N = cfg.n_particles
    grid = default_phase_grid(cfg.phase_points)
    points = [(T, s) for T in sorted(cfg.T_grid) for s in sorted(cfg.sigma_grid)]

    def row(point):
        T, sigma = point
        out = [T, sigma]
        for fam in cfg.families:
            scan = fixed_T_scan(N, T, sigma, fam, default_t1_grid(T, cfg.t1_points), grid)
            out += [scan.best_t1, scan.best_max_cfi]
        for kind, t1 in (("trivial", T), ("echo", T / 2), ("pseudo-echo", T / 2)):
            out.append(max_cfi_over_phase(build_protocol(kind, N, t1), sigma, grid).max_value)
        return tuple(out)

    columns = ["T", "sigma"]
    for fam in cfg.families:
        columns += [f"best_t1_{fam}", f"max_cfi_{fam}"]
    columns += ["max_cfi_no_readout", "max_cfi_echo_half", "max_cfi_pseudo_echo_half"]
    rows = _map(row, points, threads)
    return ResultTable(columns, rows, _metadata(cfg, _assumptions(cfg, 0.0)))


def run_verify_theorem(cfg: ScanConfig, threads: int = 1) -> ResultTable:
    report = verify_theorem(cfg.seed, n_cases=cfg.verify_cases, max_n=cfg.verify_max_n)
    columns = ("case", "kind", "n", "basis", "parity", "fc0", "four_var_g", "relative_gap")
    rows = [(c.index, KIND_NAMES[c.kind], c.n_particles, c.basis_axis, c.parity,
             c.fc0, c.four_var, c.relative_gap) for c in report.cases]
    violations = [{"case": c.index, "kind": KIND_NAMES[c.kind], "seed": [cfg.seed, c.kind, c.index],
                   "relative_gap": c.relative_gap} for c in report.violations]
    gaps = {}
    for kind, name in KIND_NAMES.items():
        if kind == THEOREM:
            continue
        g = [c.relative_gap for c in report.cases if c.kind == kind]
        gaps[name] = {"cases": len(g), "falsified_fraction": report.falsified_fraction[name],
                      "min_gap": min(g, default=0.0), "median_gap": float(np.median(g)) if g else 0.0}
    meta = _metadata(cfg, cases=cfg.verify_cases, max_relative_deviation=report.max_relative_deviation,
                     tolerance=report.tolerance, falsification=gaps, violations=violations,
                     passed=report.passed)
    return ResultTable(columns, rows, meta)


RUNNERS = {
    "sensitivity-vs-chit": run_sensitivity_vs_chit,
    "sensitivity-vs-sigma": run_noise_scans,
    "maxcfi-vs-sigma": run_noise_scans,
    "histograms": run_histograms,
    "fixed-T": run_fixed_T,
    "verify-theorem": run_verify_theorem,
}


def run(cfg: ScanConfig, threads: int = 1) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg, threads)
