"""Command-line front end: ``ttsa run|oracles|constants CONFIG``.

Exit codes: 0 success, 1 invalid config or inadmissible parameters,
2 numeric blow-up, 3 a ``--check`` criterion failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis import (aux_lemma_grid, check_bound_domination, default_aux_cells, default_window, fit_rate,
                       fit_summary, oracle_noise_variance, oracle_xstar_lipschitz, run_ensemble)
from .config import ExperimentConfig, load_config
from .engine import IDENTITY_TOL, run_trajectory
from .exceptions import NumericBlowupError, TTSAError

EXIT_OK, EXIT_INVALID, EXIT_BLOWUP, EXIT_CHECK = 0, 1, 2, 3
LIPSCHITZ_SLACK = 1e-6


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code; argparse's default 2 means blow-up here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ttsa", description="Two-time-scale stochastic approximation experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "simulate and write CSVs and reports"),
                            ("oracles", "run the brute-force oracles"),
                            ("constants", "print the bound constants")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="YAML experiment config")
        sp.add_argument("--out", help="output directory (overrides outputs.directory)")
        if name != "constants":
            sp.add_argument("--seed", type=int, help="base seed (overrides run.base_seed)")
            sp.add_argument("--trials", type=int, help="trial count (overrides run.trials)")
            sp.add_argument("--check", action="store_true", help="exit 3 if any configured check fails")
    return ap


def _outdir(cfg: ExperimentConfig, args) -> Path:
    out = Path(args.out if args.out else cfg.outputs["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, cfg: ExperimentConfig, command: str, files: list, constants=None, extra=None):
    manifest = {
        "command": command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "config_hash": cfg.config_hash(),
        "base_seed": cfg.run["base_seed"],
        "trials": cfg.run["trials"],
        "files": sorted(files),
        "config": cfg.to_dict(),
        "constants": constants.as_dict() if constants is not None else None,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _line(status: bool, text: str) -> str:
    return f"{'PASS' if status else 'FAIL'}  {text}"


def cmd_run(cfg: ExperimentConfig, args) -> int:
    p = cfg.build_problem()
    s = cfg.build_schedule(p)
    x0, y0 = cfg.start(p)
    r = cfg.run
    out = _outdir(cfg, args)
    files = ["constants.txt", "report.txt", "manifest.json"]
    report = [f"problem: {p.name} (d1={p.dim_fast}, d2={p.dim_slow}, lam={p.lam!r}, mu={p.mu!r}, "
              f"L={p.lipschitz!r}, c1={p.c1!r})",
              f"schedule: {s.regime.value} alpha={s.alpha!r} beta={s.beta!r} offset={s.offset!r} "
              f"a={s.exponent_a!r} strict={s.strict}",
              f"bound valid from k={'never' if s.valid_from is None else s.valid_from}"]
    if s.side_violations:
        report.append("side conditions failing at k=0: " + "; ".join(s.side_violations))
    checks = []
    ck = cfg.checks

    if r["trials"] >= 2:
        stats = run_ensemble(p, s, x0, y0, r["horizon"], r["stride"], r["trials"], r["base_seed"],
                             r["log_points"], backend=r["backend"])
        stats.to_csv(out / "ensemble.csv")
        files.append("ensemble.csv")
        idx, series = stats.indices, stats.mean
        identity = stats.max_identity_residual
        final_x = None
    else:
        tr = run_trajectory(p, s, x0, y0, r["horizon"], r["stride"], r["base_seed"], r["log_points"],
                            backend=r["backend"])
        tr.to_csv(out / "trajectory.csv")
        files.append("trajectory.csv")
        idx = tr.indices
        series = {"err_xy": tr.err_xy, "err_x": tr.err_x, "err_z": tr.err_z, "normU2": tr.normU2}
        identity = float(np.max(tr.identity_residual))
        final_x = tr.x[-1]
        stats = None

    window = default_window(r["horizon"])
    for name in ("err_xy", "err_x"):
        try:
            fit = fit_rate(idx, series[name], *window, offset=s.offset)
        except TTSAError as exc:
            report.append(f"rate fit {name}: n/a ({exc})")
        else:
            report.append(f"rate fit {name}: {fit_summary(fit)}")
    report.append(f"max relative |y - z - U|: {identity!r}")
    checks.append(_line(identity <= IDENTITY_TOL, f"identity y = z + U within {IDENTITY_TOL:g} (max {identity:.3e})"))

    if stats is not None:
        for which in ("xy", "x"):
            br = check_bound_domination(stats, s.constants, s, which)
            report.append(br.summary())
            for k, lhs, rhs in br.violations[:10]:
                report.append(f"  violation k={k}: mean+hw={lhs!r} > bound={rhs!r}")
            if which == "xy" and ck["bound_domination"]:
                checks.append(_line(br.ok, br.summary()))

    if ck.get("rate"):
        rc = ck["rate"]
        w = tuple(rc["window"]) if rc["window"] else window
        lo, hi = rc["range"]
        try:
            fit = fit_rate(idx, series[rc["series"]], *w, offset=s.offset)
            ok, msg = lo <= fit.slope <= hi, f"slope {fit.slope:.4f}"
        except TTSAError as exc:
            ok, msg = False, str(exc)
        checks.append(_line(ok, f"rate of {rc['series']} over {list(w)} in [{lo}, {hi}]: {msg}"))
    if ck.get("noise_slope") and stats is not None:
        nv = oracle_noise_variance(p, s, stats=stats)
        lo, hi = ck["noise_slope"]
        ok = nv.ok and nv.slope is not None and lo <= nv.slope.slope <= hi
        checks.append(_line(ok, f"E|U|^2 below 2 c1 Gamma beta_m ({len(nv.violations)} violations), "
                                f"slope {fit_summary(nv.slope)} in [{lo}, {hi}]"))
    if ck.get("final_err_xy") is not None:
        final = float(series["err_xy"][-1])
        checks.append(_line(final <= ck["final_err_xy"], f"final err_xy {final:.3e} <= {ck['final_err_xy']:g}"))
    if ck.get("constraint_residual") is not None:
        if p.name != "lagrangian" or final_x is None:
            checks.append(_line(False, "constraint residual needs a single-trajectory Lagrangian run"))
        else:
            A = np.array(cfg.problem["A"])
            res = float(np.linalg.norm(A @ final_x - np.array(cfg.problem["b"])))
            checks.append(_line(res <= ck["constraint_residual"],
                                f"constraint residual {res:.3e} <= {ck['constraint_residual']:g}"))

    (out / "constants.txt").write_text(s.constants.to_text())
    (out / "report.txt").write_text("\n".join(report + ["", "checks:"] + checks) + "\n")
    _write_manifest(out, cfg, "run", files, s.constants)
    print("\n".join(report))
    for c in checks:
        print(c)
    if args.check and any(c.startswith("FAIL") for c in checks):
        return EXIT_CHECK
    return EXIT_OK


def cmd_oracles(cfg: ExperimentConfig, args) -> int:
    p = cfg.build_problem()
    s = cfg.build_schedule(p)
    x0, y0 = cfg.start(p)
    o, r = cfg.outputs, cfg.run
    out = _outdir(cfg, args)
    lines, failed = [], False

    if "aux_lemma" in o["oracles"]:
        cells = o["aux_cells"]
        if cells is None:
            a = s.exponent_a if s.exponent_a is not None else 0.75
            cells = default_aux_cells(mu_prime=p.derived.mu_prime, alpha=s.alpha, a=a, beta_slow=s.beta,
                                      K_slow=max(s.offset, p.derived.mu_prime * s.beta))
        for status, cell, res in aux_lemma_grid(cells, k_max=o["aux_k_max"]):
            desc = ", ".join(f"{k}={v!r}" for k, v in cell.items())
            if status == "skipped":
                lines.append(f"SKIP  auxiliary recursion ({desc}): skipped-inadmissible: {res}")
            else:
                failed |= status == "FAIL"
                lines.append(f"{status}  auxiliary recursion ({desc}): max_ratio={res.max_ratio!r}")

    if "xstar_lipschitz" in o["oracles"]:
        ratio, L0 = oracle_xstar_lipschitz(p, o["lipschitz_pairs"], seed=r["base_seed"])
        ok = ratio <= L0 + LIPSCHITZ_SLACK
        failed |= not ok
        lines.append(_line(ok, f"x*(y) Lipschitz: max ratio {ratio!r} <= L0 + {LIPSCHITZ_SLACK:g} = {L0!r}"))

    if "noise_variance" in o["oracles"]:
        trials = max(2, r["trials"])
        nv = oracle_noise_variance(p, s, x0, y0, trials=trials, horizon=r["horizon"], base_seed=r["base_seed"],
                                   log_points=r["log_points"])
        ok = nv.ok
        failed |= not ok
        lines.append(_line(ok, f"averaged noise E|U_m|^2 <= 2 c1 Gamma beta_m (Gamma={nv.gamma!r} from "
                               f"{nv.gamma_source}): {len(nv.violations)} violations; fit {fit_summary(nv.slope)}"))

    (out / "oracles.txt").write_text("\n".join(lines) + "\n")
    _write_manifest(out, cfg, "oracles", ["oracles.txt", "manifest.json"], s.constants)
    print("\n".join(lines))
    return EXIT_CHECK if args.check and failed else EXIT_OK


def cmd_constants(cfg: ExperimentConfig, args) -> int:
    p = cfg.build_problem()
    s = cfg.build_schedule(p)
    text = s.constants.to_text()
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "constants.txt").write_text(text)
        _write_manifest(out, cfg, "constants", ["constants.txt", "manifest.json"], s.constants)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "oracles": cmd_oracles, "constants": cmd_constants}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command != "constants":
            cfg = cfg.with_overrides(seed=args.seed, trials=args.trials)
        return COMMANDS[args.command](cfg, args)
    except NumericBlowupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (TTSAError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
