"""``kerr-ring`` command-line front end.

Every subcommand reads an INI config (see :mod:`kerr_ring.config`), accepts
``--param section.key=value`` overrides and writes CSV plus SVG files into
``--out``.  Failures print one JSON line on stderr and exit with

    2  configuration error
    3  solver failure
    4  resource limit (Liouvillian too large)
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import output, quantum
from .config import RunConfig, load_config
from .exceptions import (
    ConfigError,
    DegenerateState,
    DegenerateVariance,
    DimensionTooLarge,
    KerrRingError,
    SingularSolve,
    StepSizeUnderflow,
)
from .semiclassical import (
    DEFAULT_STARTS,
    SemiclassicalState,
    asymmetry_ratio,
    branch_rows,
    integrate,
    sweep_drive,
    sweep_parameter,
)
from .stability import solution_count_map

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_RESOURCE = 0, 2, 3, 4
BRANCH_HEADER = ("x", "re_alpha", "im_alpha", "re_beta", "im_beta", "n_alpha", "n_beta", "stability")
TRAJECTORY_HEADER = ("t",) + BRANCH_HEADER[1:-1]


def _initial_conditions(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(";"):
        parts = chunk.replace(",", " ").split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ConfigError(f"[dynamics] initial: expected 'n_alpha n_beta' pairs, got {chunk.strip()!r}")
        try:
            na, nb = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ConfigError(f"[dynamics] initial: bad number in {chunk.strip()!r}") from exc
        if na < 0 or nb < 0:
            raise ConfigError("[dynamics] initial populations must be >= 0")
        out.append((na, nb))
    if not out:
        raise ConfigError("[dynamics] initial is empty")
    return out


def cmd_dynamics(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    sec = cfg.section("dynamics")
    t_end = sec.float("t_end", 100.0)
    tol = sec.float("tol", 1e-9)
    n_samples = sec.int("n_samples", 501)
    initial = _initial_conditions(sec.get("initial", "6 0"))
    files, summary, series = [], [], []
    for k, (na0, nb0) in enumerate(initial):
        traj = integrate(SemiclassicalState.from_populations(na0, nb0), cfg.model, t_end, tol, n_samples)
        rows = (
            (t, a.real, a.imag, b.real, b.imag, abs(a) ** 2, abs(b) ** 2)
            for t, a, b in zip(traj.times, traj.alpha, traj.beta)
        )
        files.append(output.write_csv(out / f"dynamics_{k}.csv", TRAJECTORY_HEADER, rows))
        final = traj.final
        total = final.n_alpha + final.n_beta
        ratio = asymmetry_ratio(final) if total > 0 else 0.0
        summary.append((k, na0, nb0, final.n_alpha, final.n_beta, ratio, traj.final_residual))
        series += [(f"n_alpha ({na0:g},{nb0:g})", traj.times, traj.n_alpha), (f"n_beta ({na0:g},{nb0:g})", traj.times, traj.n_beta)]
    header = ("run", "n_alpha0", "n_beta0", "n_alpha", "n_beta", "asymmetry_ratio", "residual")
    files.append(output.write_csv(out / "dynamics_summary.csv", header, summary))
    files.append(output.plot_lines(out / "dynamics.svg", series, "t", "population"))
    return files


def cmd_sweep(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    sec = cfg.section("sweep")
    name = sec.get("parameter", "f_in")
    values = sec.grid("x")
    n_starts = cfg.section("run").int("n_starts", DEFAULT_STARTS)
    if name in ("f_in", "f"):
        results = sweep_drive(cfg.model, values, n_starts, cfg.seed)
    else:
        try:
            results = sweep_parameter(cfg.model, name, values, n_starts, cfg.seed)
        except ValueError as exc:
            raise ConfigError(f"[sweep] parameter: {exc}") from exc
    rows = branch_rows(results)
    return [
        output.write_csv(out / "sweep.csv", BRANCH_HEADER, rows),
        output.plot_branches(out / "sweep.svg", rows, name),
    ]


def cmd_map(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    sec = cfg.section("map")
    axis = sec.get("x_axis", "delta")
    if axis not in ("delta", "epsilon"):
        raise ConfigError("[map] x_axis must be 'delta' or 'epsilon'")
    n_starts = cfg.section("run").int("n_starts", DEFAULT_STARTS)
    cmap = solution_count_map(cfg.model, axis, sec.grid("x"), sec.grid("f"), n_starts, cfg.seed, threads)
    header = (axis, "f_in", "count_total", "count_stable")
    return [
        output.write_csv(out / "map.csv", header, cmap.rows()),
        output.plot_heatmap(out / "map_total.svg", cmap.x_values, cmap.f_values, cmap.total, axis, "F_in", "fixed points"),
        output.plot_heatmap(out / "map_stable.svg", cmap.x_values, cmap.f_values, cmap.stable, axis, "F_in", "stable fixed points"),
    ]


def cmd_quantum(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    sec = cfg.section("quantum")
    space = quantum.FockSpace(sec.int("n_max", quantum.DEFAULT_N_MAX))
    files = []
    if "f_num" in sec.values or "f_values" in sec.values:
        # drive sweep: quantum means against semiclassical branches
        f_values = sec.grid("f")
        reports = quantum.drive_sweep(cfg.model, f_values, space, threads)
        rows = [(f, r.mean_a, r.mean_b, r.mean_delta_n, r.var_delta_n) for f, r in zip(f_values, reports)]
        files.append(output.write_csv(out / "quantum_sweep.csv", ("f_in", "n_a", "n_b", "mean_delta_n", "var_delta_n"), rows))
        n_starts = cfg.section("run").int("n_starts", DEFAULT_STARTS)
        branches = branch_rows(sweep_drive(cfg.model, f_values, n_starts, cfg.seed))
        files.append(output.write_csv(out / "semiclassical.csv", BRANCH_HEADER, branches))
        stable = [r for r in branches if r[7] == "stable"]
        markers = [
            ("n_alpha semiclassical", [r[0] for r in stable], [r[5] for r in stable]),
            ("n_beta semiclassical", [r[0] for r in stable], [r[6] for r in stable]),
        ]
        series = [("<n_a>", f_values, [r[1] for r in rows]), ("<n_b>", f_values, [r[2] for r in rows])]
        files.append(output.plot_lines(out / "quantum_sweep.svg", series, "F_in", "population", markers=markers))
        return files

    rho, rep = quantum.solve_statistics(cfg.model, space)
    n = np.arange(space.local_dim)
    files.append(output.write_csv(out / "distributions.csv", ("n", "p_a", "p_b"), zip(n, rep.p_a, rep.p_b)))
    stats = [
        ("mean_a", rep.mean_a),
        ("mean_b", rep.mean_b),
        ("mean_delta_n", rep.mean_delta_n),
        ("var_delta_n", rep.var_delta_n),
        ("sigma_shot", rep.sigma_shot),
    ]
    tau = sec.float("tau", 50.0)
    if rep.var_delta_n > 0:
        s = np.sqrt(rep.var_delta_n)
        x = np.linspace(min(rep.mean_a, rep.mean_b) - 5 * s, max(rep.mean_a, rep.mean_b) + 5 * s, sec.int("pdf_points", 401))
        single = rep.pdfs(x)
        averaged = rep.pdfs(x, tau)
        rows = zip(x, single[0], single[1], averaged[0], averaged[1])
        header = ("x", "pdf_a", "pdf_b", "pdf_a_tau", "pdf_b_tau")
        files.append(output.write_csv(out / "pdf.csv", header, rows))
        stats += [("tau", tau), ("sem", rep.sem(tau)), ("overlap", quantum.pdf_overlap(rep)), ("overlap_tau", quantum.pdf_overlap(rep, tau))]
        series = [("PDF_a", x, single[0]), ("PDF_b", x, single[1]), ("PDF_a (tau)", x, averaged[0]), ("PDF_b (tau)", x, averaged[1])]
        files.append(output.plot_lines(out / "pdf.svg", series, "n", "density"))
    files.append(output.write_csv(out / "statistics.csv", ("quantity", "value"), stats))
    files.append(output.plot_lines(out / "distributions.svg", [("P_a", n, rep.p_a), ("P_b", n, rep.p_b)], "n", "P(n)"))
    if sec.get("dump_rho", "false").lower() in ("1", "true", "yes"):
        path = out / "rho.bin"
        quantum.save_density_matrix(path, rho)
        files.append(path)
    return files


def cmd_snr(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    sec = cfg.section("snr")
    space = quantum.FockSpace(sec.int("n_max", quantum.DEFAULT_N_MAX))
    tau = sec.grid("tau", log=True)
    level = sec.float("threshold", 5.0)
    files = []
    for kind in ("thermal", "dephasing"):
        key = f"{kind}_values"
        if key not in sec.values:
            continue
        smap = quantum.snr_map(cfg.model, tau, sec.floats(key), kind, space, threads)
        label = "n_th" if kind == "thermal" else "gamma_phi"
        files.append(output.write_csv(out / f"snr_{kind}.csv", ("tau", label, "snr"), smap.rows()))
        thresholds = zip(smap.noise_values, smap.signal, smap.sigma_shot, smap.threshold_tau(level), smap.flagged)
        files.append(
            output.write_csv(out / f"snr_{kind}_threshold.csv", (label, "signal", "sigma_shot", "kappa_tau_at_threshold", "flagged"), thresholds)
        )
        files.append(
            output.plot_contour(out / f"snr_{kind}.svg", tau * cfg.model.kappa, smap.noise_values, smap.snr.T, "kappa tau", label, "SNR", level)
        )
    if not files:
        raise ConfigError("[snr] needs thermal_values and/or dephasing_values")
    return files


def cmd_spectrum(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    sec = cfg.section("spectrum")
    v_values = sec.grid("v")
    n_total = sec.int("n_total", 2)
    if n_total < 0:
        raise ConfigError("[spectrum] n_total must be >= 0")
    exact = quantum.undriven_spectrum(cfg.model, v_values, n_total)
    mean_field = quantum.mean_field_spectrum(cfg.model, v_values, n_total)
    header = ("v",) + tuple(f"eig_{k + 1}" for k in range(n_total + 1))
    files = [
        output.write_csv(out / "spectrum.csv", header, [(v, *e) for v, e in exact]),
        output.write_csv(out / "spectrum_mean_field.csv", header, [(v, *e) for v, e in mean_field]),
    ]
    ex = np.array([e for _, e in exact])
    mf = np.array([e for _, e in mean_field])
    series = [(f"E{k + 1}", v_values, ex[:, k]) for k in range(ex.shape[1])]
    series += [(f"mean-field E{k + 1}", v_values, mf[:, k]) for k in range(mf.shape[1])]
    files.append(output.plot_lines(out / "spectrum.svg", series, "V", "energy"))
    return files


COMMANDS = {
    "dynamics": cmd_dynamics,
    "sweep": cmd_sweep,
    "map": cmd_map,
    "quantum": cmd_quantum,
    "snr": cmd_snr,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="override, e.g. v=0.1 or sweep.x_num=51")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, help="base seed (default: [run] seed or 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid cells")
    common.add_argument("--dry-run", action="store_true", help="print the resolved parameters and exit")
    parser = argparse.ArgumentParser(prog="kerr-ring", description="Two-mode Kerr ring resonator simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__ or name)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    print(json.dumps({"error": type(exc).__name__, "code": code, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.param, args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.dry_run:
            print(json.dumps(cfg.resolved(), indent=2, sort_keys=True))
            return EXIT_OK
        files = COMMANDS[args.command](cfg, args.out, args.threads)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except (DimensionTooLarge, MemoryError) as exc:
        return _fail(EXIT_RESOURCE, exc)
    except (StepSizeUnderflow, SingularSolve, DegenerateState, DegenerateVariance, KerrRingError) as exc:
        return _fail(EXIT_SOLVER, exc)
    for path in files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
