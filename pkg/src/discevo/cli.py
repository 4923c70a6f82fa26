"""Command-line experiment runner.

Subcommands write their artifacts plus ``manifest.json`` into ``--out``.
Exit status: 0 on success, 2 when an acceptance check fails, 1 on usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import acceptance
from . import eigen_engine as eig
from . import evolution as evo
from . import favard as fav
from . import lattice_ops as lo
from . import special_fn as sf
from . import stationary as st
from . import uniqueness_probe as up
from .config import ConfigError, ExperimentConfig, load_config

log = logging.getLogger("discevo")

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment file (key = value sections, or .json)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
    p.add_argument("--tolerance-scale", type=float, default=None,
                   help="multiply acceptance tolerances by this factor")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discevo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"discevo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "propagate du/dt = A u and write the trajectory CSV",
        "models": "closed-form model solutions and their residuals",
        "eigen": "extend a generalized eigenvector and audit its growth",
        "favard": "polynomial families, coordinate reconstruction, completeness probe",
        "probe": "entire-function probe experiments",
        "stationary": "decay thresholds and audits for stationary solutions",
        "verify": "run the full acceptance suite",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "probe":
            p.add_argument("--experiment", choices=["entire", "growth", "indicator", "decay", "sharpness"],
                           default=None, help="which probe to run (default from config: sharpness)")
    return parser


def _operator(cfg: ExperimentConfig) -> lo.BandedOperator:
    spec = cfg.operator
    if spec.kind == "laplacian":
        return lo.build_laplacian_1d(spec.alpha, spec.window)
    if spec.kind == "higher":
        return lo.build_higher_order_model(spec.s, spec.window)
    if spec.kind == "schrodinger":
        rng = np.random.default_rng(spec.v_seed)
        n = spec.window[1] - spec.window[0] + 1
        V = spec.v_amplitude * rng.uniform(-1.0, 1.0, size=n)
        return lo.build_schrodinger_with_potential(spec.alpha, V, spec.window)
    return lo.random_banded(np.random.default_rng(cfg.seed), spec.s, spec.window, m=spec.m)


def _times(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.steps == 1:
        return np.array([cfg.t0])
    return np.linspace(cfg.t0, cfg.t0 + cfg.T, cfg.steps)


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def cmd_simulate(cfg, out: Path, quiet: bool) -> int:
    A = _operator(cfg)
    times = _times(cfg)
    u0 = lo.LatticeState.delta(A.window, 0, A.m, t=times[0])
    traj = evo.propagate(A, u0, times)
    with open(out / "trajectory.csv", "w") as fh:
        traj.to_csv(fh)
    report = {"subcommand": "simulate", "operator": cfg.operator.kind, "window": A.window,
              "times": times, "initial": "delta_0"}
    if cfg.operator.kind == "laplacian" and cfg.operator.alpha.imag == 0 and A.m == 1:
        j_min, j_max = A.window
        margin = max(1, (j_max - j_min) // 5)
        sel = (A.indices >= j_min + margin) & (A.indices <= j_max - margin)
        errs = []
        for stt in traj.states:
            ref = evo.model_solution_heat(cfg.operator.alpha.real, stt.t, times[0], A.window).scalar()
            errs.append(float(np.max(np.abs(stt.scalar()[sel] - ref[sel]))
                              / max(np.max(np.abs(ref[sel])), 1e-300)))
        report["interior_relative_error_vs_closed_form"] = max(errs)
    _dump(out / "report.json", report)
    return EXIT_OK


def cmd_models(cfg, out: Path, quiet: bool) -> int:
    times = _times(cfg)
    W = cfg.operator.window
    alpha = cfg.operator.alpha
    states = [evo.model_solution_heat(alpha, t, cfg.t0, W) for t in times]
    with open(out / "heat_model.csv", "w") as fh:
        evo.write_states_csv(fh, states)
    with open(out / "schrodinger_model.csv", "w") as fh:
        evo.write_states_csv(fh, [evo.model_solution_schrodinger(t, W) for t in times])
    s = cfg.operator.s
    with open(out / "higher_model.csv", "w") as fh:
        evo.write_states_csv(fh, [evo.model_solution_higher(s, 1.0, t, cfg.t0, W, damped=True)
                                  for t in times])
    heat = acceptance.run_criterion(2, cfg.seed, cfg.tolerance_scale)
    schr = acceptance.run_criterion(3, cfg.seed, cfg.tolerance_scale)
    report = {"subcommand": "models", "heat": heat.to_dict()["measured"],
              "schrodinger": schr.to_dict()["measured"],
              "higher_order_residual": _higher_residual(s, cfg.t0, times, W)}
    _dump(out / "report.json", report)
    return EXIT_OK


def _higher_residual(s, t0, times, W) -> float:
    """``|| du/dt - A u ||_inf`` on the interior for the damped higher-order model.

    The derivative uses ``2 I_q' = I_{q-1} + I_{q+1}``.
    """
    A = lo.build_higher_order_model(s, W)
    lo_i, hi_i = A.interior
    n = A.indices
    q = np.floor_divide(n, s)
    sel = (n >= lo_i) & (n <= hi_i)
    worst = 0.0
    for t in times:
        x = 2.0 * (t - t0)
        I = sf.bessel_i_array(int(np.abs(q).max()) + 1, x)
        du = (I[np.abs(q - 1)] + I[np.abs(q + 1)] - 2.0 * I[np.abs(q)]) * math.exp(-x)
        Au = lo.apply(A, evo.model_solution_higher(s, 1.0, t, t0, W, damped=True)).scalar()
        worst = max(worst, float(np.max(np.abs(du[sel] - Au[sel]))))
    return worst


def cmd_eigen(cfg, out: Path, quiet: bool) -> int:
    A = _operator(cfg)
    lam = complex(cfg.lambda_value)
    rows = []
    families = []
    consts = lo.audit_constants(A)
    for r in range(-A.s, A.s):
        fam = eig.extend_eigenvector(A, eig.unit_seeds(A.s, r, A.m), lam)
        families.append(fam)
        rep = eig.growth_audit(fam, consts)
        rows.append({"r": r, "relative_residual": eig.verify_eigen(A, fam),
                     "growth_bound_holds": rep.bound_holds, "fitted_b": rep.fitted_b,
                     "fitted_C": rep.fitted_C})
    with open(out / "eigenvectors.csv", "w") as fh:
        families[A.s].to_csv(fh)
    _dump(out / "report.json", {"subcommand": "eigen", "lambda": lam, "a": consts.a,
                                "delta": consts.delta, "families": rows})
    return EXIT_OK


def cmd_favard(cfg, out: Path, quiet: bool) -> int:
    A = _operator(cfg)
    fams = fav.build_all_families(A)
    (out / "families.json").write_text(
        json.dumps([f.to_dict() for f in fams], sort_keys=True) + "\n")
    errs = {}
    for n in range(-cfg.n_max, cfg.n_max + 1):
        rec = fav.reconstruct_coordinate(A, n, fams).values
        rec[n - A.window[0], 0] -= 1.0
        errs[str(n)] = float(np.linalg.norm(rec))
    probe = fav.completeness_probe(lo.LatticeState.delta(A.window, 0, A.m), A, families=fams)
    target = np.zeros(A.size)
    target[-A.window[0]] = 1.0
    report = {"subcommand": "favard", "max_reconstruction_error": max(errs.values()),
              "reconstruction_error": errs,
              "completeness_error_delta0": float(np.max(np.abs(probe.values - target))),
              "truncation_warning": probe.truncation_warning,
              "degree_bound_holds": all(fav.degree_bound_holds(f) for f in fams)}
    _dump(out / "report.json", report)
    return EXIT_OK


def cmd_probe(cfg, out: Path, quiet: bool, experiment: str) -> int:
    T = cfg.T
    grid = up.default_lambda_grid(cfg.lambda_radius, cfg.lambda_rings, cfg.lambda_angles)
    samples = []
    extra = {}
    defect = verdict = None
    indicator = []
    margins = []
    if experiment == "entire":
        A = _operator(cfg)
        u0 = lo.LatticeState.delta(A.window, 0, A.m, t=cfg.t0)
        traj = evo.propagate(A, u0, _times(cfg))
        rep = up.check_entire_identity(traj, A, lambda_grid=grid)
        defect, samples = rep.defect_max, rep.samples
        extra["boundary_spill"] = rep.boundary_spill
    elif experiment == "growth":
        A = lo.build_laplacian_1d(1.0, cfg.operator.window)
        eps = cfg.eps if cfg.eps > 0 else 1.0
        e = up.envelope_state(A.window, T, cfg.delta, eps)
        rep = up.growth_bound_check(e, e, A, T, eps, grid, delta=cfg.delta)
        margins = rep.margins
        extra.update(holds=rep.holds, worst_margin=rep.worst_margin, log_C_fit=rep.log_C_fit,
                     holds_without_allowance=rep.holds_without_allowance, eps=eps)
    elif experiment == "indicator":
        A = lo.build_laplacian_1d(1.0, cfg.operator.window)
        radii = np.linspace(2.0, 20.0, 10)
        ests = []
        for t in (0.0, T):
            u = evo.model_solution_heat(1.0, t, T / 2, A.window)
            smp = up.ray_samples(u, A, 0.0, radii)
            samples.extend(smp)
            ests.append(up.indicator_estimate(smp))
        indicator = ests
        extra["difference"] = ests[1].slope - ests[0].slope
        extra["T"] = T
    elif experiment == "decay":
        W = cfg.operator.window
        u0 = evo.model_solution_heat(1.0, 0.0, T / 2, W)
        uT = evo.model_solution_heat(1.0, T, T / 2, W)
        rep = up.decay_audit(u0, uT, T, cfg.delta, cfg.eps, 1)
        verdict, margins = rep.verdict, rep.margins
        extra["k"] = rep.k
    else:
        res = up.sharpness_experiment(T=T)
        verdict, margins = res.decay.verdict, res.decay.margins
        extra.update(model_margins=res.model_margins, within_band=res.within_band,
                     candidates=res.candidates, q=res.q)
    text = up.experiment_report(experiment, defect, verdict, indicator,
                                margins, **_jsonable(extra))
    (out / "report.json").write_text(text + "\n")
    if samples:
        with open(out / "phi.csv", "w") as fh:
            up.write_phi_csv(fh, samples)
    if not quiet:
        print(f"probe {experiment}: verdict={verdict} defect_max={defect}")
    return EXIT_OK


def cmd_stationary(cfg, out: Path, quiet: bool) -> int:
    A = _operator(cfg)
    consts = lo.audit_constants(A)
    rng = np.random.default_rng(cfg.seed)
    u = st.kernel_vector(A, rng.normal(size=(2 * A.s, A.m)))
    verdict = st.check_stationary_decay(u, A, consts)
    u1, V1 = st.exponential_eigenfunction_1d(30)
    shell = st.shell_decay_audit(u1, V1)
    with open(out / "shells.csv", "w") as fh:
        shell.to_csv(fh)
    report = {"subcommand": "stationary",
              "kernel_decay_threshold": verdict.threshold,
              "kernel_rate_estimate": verdict.rate_estimate,
              "kernel_forces_zero": verdict.forces_zero,
              "schrodinger_threshold": shell.threshold,
              "shell_rate_estimate": shell.rate_estimate,
              "shell_violations": shell.violations}
    _dump(out / "report.json", report)
    return EXIT_OK


def cmd_verify(cfg, out: Path, quiet: bool) -> tuple[int, dict]:
    runs = []
    texts = []
    for _ in range(2):
        res = acceptance.run_all(cfg.seed, cfg.tolerance_scale)
        runs.append(res)
        texts.append(acceptance.report_json(res, cfg.seed))
    det = acceptance.determinism_result(texts[0], texts[1])
    results = runs[0] + [det]
    (out / "verify.json").write_text(acceptance.report_json(results, cfg.seed))
    if not quiet:
        for r in results:
            print(r.line())
    timing = {f"criterion_{r.number}": [r.seconds, r2.seconds] for r, r2 in zip(runs[0], runs[1])}
    return (EXIT_OK if all(r.ok for r in results) else EXIT_FAILED), timing


def _manifest(out: Path, command: str, cfg: ExperimentConfig, wall: float, extra=None) -> None:
    doc = {
        "subcommand": command,
        "config_sha256": cfg.digest() if cfg.source_text else hashlib.sha256(b"").hexdigest(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": {"discevo": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": wall,
        "files": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    if extra:
        doc["timing_s"] = extra
    _dump(out / "manifest.json", doc)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
    except ConfigError as exc:
        print(f"discevo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tolerance_scale is not None:
        if args.tolerance_scale <= 0:
            print("discevo: --tolerance-scale must be positive", file=sys.stderr)
            return EXIT_USAGE
        cfg.tolerance_scale = args.tolerance_scale
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"discevo: cannot create output directory {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    timing = None
    try:
        if args.command == "verify":
            code, timing = cmd_verify(cfg, args.out, args.quiet)
        elif args.command == "probe":
            code = cmd_probe(cfg, args.out, args.quiet, args.experiment or cfg.probe_experiment)
        else:
            handler = {"simulate": cmd_simulate, "models": cmd_models, "eigen": cmd_eigen,
                       "favard": cmd_favard, "stationary": cmd_stationary}[args.command]
            code = handler(cfg, args.out, args.quiet)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"discevo {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _manifest(args.out, args.command, cfg, time.perf_counter() - start, timing)
    if not args.quiet:
        log.info("wrote %s", args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
