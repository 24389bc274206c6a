"""Command-line experiments with deterministic, diffable outputs.

Every subcommand reads one config file and writes CSV or JSON into the output
directory.  Output files start with a header block recording the library
version, the config hash, the seed, and the window, so identical inputs
reproduce byte-identical artifacts.  Reals are printed with 17 significant
digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import ExperimentConfig, load_config
from .diophantine import density_witness, omega_stability_report, translate_density_scan
from .eigenlab import assemble, domain_scan, eigen_check, eigenpair_track, fixed_point_lambda
from .errors import (
    ContractionError,
    DomainError,
    FloqlabError,
    ResonanceError,
    TrackingError,
)
from .perturbation import cutoff_covariance, cutoff_mean_estimate, divergence_partial_sum
from .reduction import ReductionWork
from .rs_series import rs_recursive, rs_tree_formula, tail_diagnostic
from .spectrum import (
    FloquetGrid,
    decompose_spectrum,
    gap_check,
    multiplicative_check,
    pairwise_gap_bound,
)

_FLOAT_FMT = "%.17g"


def _fmt(value: float) -> str:
    return _FLOAT_FMT % value


def _meta(cfg: ExperimentConfig, seed: int | None, window: str) -> dict:
    return {
        "version": __version__,
        "config_sha256": cfg.sha256,
        "seed": seed,
        "window": window,
    }


def _write_csv(path: Path, meta: dict, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="\n") as fh:
        for key, value in meta.items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(x) if isinstance(x, float) else x for x in row]
            )


def _write_json(path: Path, meta: dict, payload: dict) -> None:
    doc = {"_meta": meta}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_spectrum_check(cfg: ExperimentConfig, args, outdir: Path) -> None:
    model = cfg.build_model()
    k_max = int(cfg.run_value("k_max", "100"))
    seed = cfg.seed(args.seed)
    gap_min = gap_check(model, k_max)
    rng = np.random.Generator(np.random.Philox(seed))
    pair_ok = True
    probe_hi = min(k_max, model.k_max or k_max)
    for _ in range(200):
        j, k = rng.integers(1, probe_hi + 1, size=2)
        if j == k:
            continue
        pair_ok = pair_ok and pairwise_gap_bound(model, int(j), int(k))
    mult: dict[str, bool] = {}
    if model.mult_constant is not None:
        for variant in ("power", "exponential"):
            mult[variant] = multiplicative_check(model, variant, min(probe_hi, 50))
    cover_k = min(64, probe_hi)
    parts = decompose_spectrum(model, cover_k)
    seen = sorted(x for members in parts.values() for x in members)
    payload = {
        "k_max": k_max,
        "gap_min": gap_min,
        "gap_ok": bool(gap_min >= model.gap_constant),
        "pairwise_sample_ok": bool(pair_ok),
        "multiplicative": mult,
        "partition_cover_ok": bool(seen == list(range(1, cover_k + 1))),
    }
    _write_json(outdir / "spectrum_check.json", _meta(cfg, seed, "-"), payload)


def _cmd_dioph_scan(cfg: ExperimentConfig, args, outdir: Path) -> None:
    model = cfg.build_model()
    ladder = cfg.window_ladder()
    scan = cfg.omega_scan()
    grid0 = cfg.build_grid(model)
    omegas = [grid0.omega] if scan is None else [float(w) for w in scan]
    sigma = cfg.exponent_choice(model.alpha).sigma
    rows: list[list] = []
    for omega in omegas:
        grid = FloquetGrid(model=model, omega=omega, eta=grid0.eta)
        report = omega_stability_report(grid, sigma, ladder)
        for window, gamma, flag in zip(report.windows, report.gammas, report.flags):
            rows.append([float(omega), window.n1_max, window.n2_max,
                         float(gamma), int(flag or gamma == 0.0)])
    _write_csv(
        outdir / "dioph_scan.csv",
        _meta(cfg, cfg.seed(args.seed), str(ladder[-1])),
        ["omega", "window_n1", "window_n2", "gamma_hat", "flagged"],
        rows,
    )


def _cmd_rs_compute(cfg: ExperimentConfig, args, outdir: Path) -> None:
    model = cfg.build_model()
    grid = cfg.build_grid(model)
    window = cfg.main_window()
    v = cfg.build_perturbation(model, grid.omega)
    ell = int(cfg.run_value("ell", "5"))
    rec = rs_recursive(grid, v, ell, window)
    agreement = None
    method = "recursive"
    if ell <= 6:
        tree = rs_tree_formula(grid, v, ell, window)
        scale = np.maximum(np.abs(rec.lambdas), 1e-300)
        agreement = float(np.max(np.abs(rec.lambdas - tree.lambdas) / scale))
        method = "recursive+tree"
    ladder = cfg.window_ladder()
    tail = tail_diagnostic(grid, v, ell, ladder)
    last_diffs = tail.diffs[-1].tolist() if tail.diffs.shape[0] else [0.0] * ell
    payload = {
        "ell": ell,
        "lambdas": rec.lambdas.tolist(),
        "tail": last_diffs,
        "tail_converged": list(tail.converged),
        "window": str(window),
        "method": method,
        "agreement": agreement,
        "diag_shift": rec.diag_shift,
    }
    _write_json(outdir / "rs_compute.json", _meta(cfg, cfg.seed(args.seed), str(window)),
                payload)


def _beta_grid(cfg: ExperimentConfig) -> list[float]:
    lo = float(cfg.run_value("beta_min", "1e-4"))
    hi = float(cfg.run_value("beta_max", "1e-2"))
    per_decade = float(cfg.run_value("points_per_decade", "4"))
    count = max(2, int(round(math.log10(hi / lo) * per_decade)))
    mags = np.logspace(math.log10(lo), math.log10(hi), count)
    return [float(s * m) for s in (1.0, -1.0) for m in mags]


def _cmd_eigen_verify(cfg: ExperimentConfig, args, outdir: Path) -> None:
    model = cfg.build_model()
    grid = cfg.build_grid(model)
    window = cfg.main_window()
    v = cfg.build_perturbation(model, grid.omega)
    profile = cfg.build_profile(grid, window)
    work = ReductionWork(grid, v, window)
    betas = _beta_grid(cfg)

    def one(beta: float) -> list:
        op = assemble(grid, v, beta, window)
        try:
            tracked = eigenpair_track(op)
            f_beta, overlap = tracked.f_beta, tracked.overlap
        except TrackingError:
            f_beta, overlap = math.nan, math.nan
        try:
            fp = fixed_point_lambda(grid, v, profile, beta, window, work=work)
            lam_fp = grid.f_eta + fp.f_total
            in_domain = fp.in_domain
            residual = eigen_check(grid, v, profile, beta, window, work=work, fp=fp) \
                if fp.in_domain else math.nan
        except (DomainError, ContractionError, ResonanceError):
            lam_fp, in_domain, residual = math.nan, False, math.nan
        return [beta, f_beta, lam_fp, int(in_domain), residual, overlap]

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(one, betas))
    else:
        rows = [one(b) for b in betas]
    _write_csv(
        outdir / "eigen_verify.csv",
        _meta(cfg, cfg.seed(args.seed), str(window)),
        ["beta", "F_beta", "lambda_fp", "in_domain", "residual", "overlap"],
        rows,
    )


def _cmd_domain_density(cfg: ExperimentConfig, args, outdir: Path) -> None:
    model = cfg.build_model()
    grid = cfg.build_grid(model)
    window = cfg.main_window()
    v = cfg.build_perturbation(model, grid.omega)
    profile = cfg.build_profile(grid, window)
    deltas = cfg.run_floats("deltas", "1e-1 3e-2 1e-2 3e-3 1e-3")
    samples = int(cfg.run_value("samples_per_level", "400"))
    scan = domain_scan(grid, v, profile, deltas, samples, window)
    rows = [[d, dens, samples] for d, dens in zip(scan.delta_levels, scan.densities)]
    _write_csv(
        outdir / "domain_density.csv",
        _meta(cfg, cfg.seed(args.seed), str(window)),
        ["delta", "density", "samples"],
        rows,
    )


def _cmd_counterexample(cfg: ExperimentConfig, args, outdir: Path) -> None:
    model = cfg.build_model()
    grid = cfg.build_grid(model)
    seed = cfg.seed(args.seed)
    eta2 = grid.eta.n2
    levels = cfg.run_ints("divergence_levels", "100 1000 10000 100000")
    sums: dict[str, float] = {}
    resonances: list[int] = []
    for n in levels:
        try:
            sums[str(n)] = divergence_partial_sum(model, grid.omega, eta2, n)
        except ResonanceError as exc:
            resonances.append(int(exc.index))
            break
    theta = float(cfg.run_value("theta", "0.4"))
    ks = cfg.run_ints("cutoff_k", "10 20 40")
    samples = int(cfg.run_value("samples", "100000"))
    h = lambda k: 2.0**k  # noqa: E731 - doubling scales satisfy the growth condition
    means = []
    for i, k in enumerate(ks):
        st = cutoff_mean_estimate(h, k, theta, samples, seed + i)
        target = theta * math.log(k)
        means.append({
            "k": k,
            "theta": theta,
            "mean": st.mean,
            "stderr": st.stderr,
            "target": target,
            "bias_bound": target / h(k),
            "ok": bool(abs(st.mean - target) <= target / h(k) + 3 * st.stderr),
        })
    covs = []
    for i, (j, k) in enumerate((a, b) for a in ks for b in ks if a < b):
        st = cutoff_covariance(h, j, k, theta, samples, seed + 100 + i)
        bound = 9.0 * j**theta * (h(j) / h(k)) * theta * math.log(k)
        covs.append({
            "j": j,
            "k": k,
            "cov": st.cov,
            "stderr": st.stderr,
            "bound": bound,
            "ok": bool(abs(st.cov) <= bound + 3 * st.stderr),
        })
    payload = {
        "partial_sums": sums,
        "strictly_increasing": bool(
            all(b > a for a, b in zip(sums.values(), list(sums.values())[1:]))
        ),
        "resonances": resonances,
        "cutoff_means": means,
        "covariances": covs,
    }
    _write_json(outdir / "counterexample.json", _meta(cfg, seed, "-"), payload)


def _cmd_density_appendix_a(cfg: ExperimentConfig, args, outdir: Path) -> None:
    model = cfg.build_model()
    seed = cfg.seed(args.seed)
    interval = cfg.run_floats("interval", "0.3 0.4")
    omega_range = cfg.run_floats("omega_range", "1.0 2.0")
    k_max = int(cfg.run_value("k_max", "10000"))
    samples = int(cfg.run_value("samples", "1000"))
    fraction = translate_density_scan(
        model, (interval[0], interval[1]), (omega_range[0], omega_range[1]),
        k_max, samples, seed,
    )
    u, v = 0.0, 0.5
    comps = [(1.0, 2.0)]
    x = 100.0
    intervals = density_witness(u, v, comps, x)
    payload = {
        "fraction": fraction,
        "k_max": k_max,
        "samples": samples,
        "witness_demo": {
            "u": u,
            "v": v,
            "open_set": comps,
            "x": x,
            "count": len(intervals),
            "measure": sum(w.hi - w.lo for w in intervals),
            "required": 0.25 * (v - u) * math.log(2.0),
        },
    }
    _write_json(outdir / "density_appendix_a.json", _meta(cfg, seed, "-"), payload)


_COMMANDS = {
    "spectrum-check": _cmd_spectrum_check,
    "dioph-scan": _cmd_dioph_scan,
    "rs-compute": _cmd_rs_compute,
    "eigen-verify": _cmd_eigen_verify,
    "domain-density": _cmd_domain_density,
    "counterexample": _cmd_counterexample,
    "density-appendix-a": _cmd_density_appendix_a,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="floqlab",
        description="Desk-scale driven-spectrum perturbation experiments.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override [run] seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        # one BLAS thread per worker: small dense problems thrash otherwise
        with threadpool_limits(limits=1):
            _COMMANDS[args.command](cfg, args, outdir)
    except FloqlabError as exc:
        print(f"floqlab: {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
