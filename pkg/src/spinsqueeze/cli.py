"""Command-line front end: runs, ensembles, sweeps and design reports as CSV/text.

Subcommands: evolve (deterministic run), ensemble (trajectory average with a
deterministic cross-check), sweep (squeezing minimum vs atom number plus a
power-law fit), design (experimental feasibility report).  Dynamics runs are
dimensionless (measurement strength 1, time in units of Mt); SI units appear
only in the design subcommand.  Byte-level output schemas live in FORMATS.md.

Exit codes: 0 success, 2 validation error, 3 numerical-invariant violation,
4 acceptance-threshold failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .design import (ExperimentalParams, alpha, attainable_squeezing,
                     cesium_preset, laser_constraints, loss_rate_and_budget,
                     single_shot_floor)
from .dynamics import InvariantViolation, MeParams, integrate_me
from .feedback import FeedbackLaw, MeanSpinCollapse
from .observables import ObservableSeries, find_minimum, fit_inverse_scaling
from .spin import SpinSystem, build_spin_operators, css_x
from .trajectories import ensemble_average

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_THRESHOLD = 4

TRACE_DIST_FACTOR = 5.0     # ensemble fails when trace_dist > factor/sqrt(K)


def _fmt(x) -> str:
    """Shortest round-trip decimal form; locale-independent."""
    return repr(float(x))


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="ascii", newline="")


def _series_rows(series: ObservableSeries, extra: dict | None = None) -> str:
    cols = ["tau", "jx", "jy2", "jz2", "xi2", "purity", "lambda"]
    arrays = [series.tau, series.jx, series.jy2, series.jz2, series.xi2,
              series.purity, series.lam]
    if extra:
        cols += list(extra.keys())
        arrays += list(extra.values())
    lines = [",".join(cols)]
    for i in range(len(series.tau)):
        lines.append(",".join(_fmt(a[i]) for a in arrays))
    return "\n".join(lines) + "\n"


def _minimum_footer(series: ObservableSeries) -> str:
    try:
        tau_star, xi2_min = find_minimum(series)
    except ValueError:
        return "# minimum=none\n"
    i = int(np.argmin(series.xi2))
    return (f"# tau_star={_fmt(tau_star)}\n"
            f"# xi2_min={_fmt(xi2_min)}\n"
            f"# purity_at_min={_fmt(series.purity[i])}\n")


def _parse_n_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"bad N list {text!r}: {exc}") from None
    if not values:
        raise ValueError("empty N list")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"N list must be strictly increasing, got {values}")
    if values[0] < 1:
        raise ValueError("N values must be >= 1")
    return values


def _make_law(args) -> FeedbackLaw:
    kind = args.law
    if kind == "off":
        return FeedbackLaw.off()
    if kind == "constant":
        return FeedbackLaw.constant(args.lambda0)
    if kind == "analytic":
        return FeedbackLaw.analytic(args.n, eta=args.eta, scale=args.scale)
    return FeedbackLaw.conditional(scale=args.scale)


def _me_params(args, t_max=None) -> MeParams:
    return MeParams(m=args.m, eta=args.eta, dt=args.dt,
                    t_max=t_max if t_max is not None else args.t_max,
                    sample_dt=args.sample_dt)


def cmd_evolve(args) -> int:
    sys_ = SpinSystem(args.n)
    ops = build_spin_operators(sys_)
    series, _ = integrate_me(css_x(sys_), _me_params(args), _make_law(args), ops)
    _write_text(args.output, _series_rows(series) + _minimum_footer(series))
    return EXIT_OK


def cmd_ensemble(args) -> int:
    sys_ = SpinSystem(args.n)
    rho0 = css_x(sys_)
    result = ensemble_average(rho0, _me_params(args), _make_law(args),
                              args.k, args.master_seed, workers=args.workers,
                              keep_trajectories=args.dump_trajectories is not None)
    extra = {
        "trace_dist_to_me": result.trace_dist,
        "stat_scale": np.full_like(result.trace_dist, result.stat_scale),
    }
    threshold = TRACE_DIST_FACTOR * result.stat_scale
    worst = float(result.trace_dist.max())
    footer = (f"# max_trace_dist={_fmt(worst)}\n"
              f"# stat_scale={_fmt(result.stat_scale)}\n"
              f"# threshold={_fmt(threshold)}\n")
    _write_text(args.output, _series_rows(result.series, extra) + footer)
    if args.dump_trajectories is not None:
        _dump_trajectories(Path(args.dump_trajectories), result.trajectories)
    if worst > threshold:
        print(f"ensemble deviates from the master equation: max trace distance "
              f"{worst:.4g} > {threshold:.4g}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def _dump_trajectories(directory: Path, trajectories: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    taus = trajectories["taus"]
    count = trajectories["jx"].shape[0]
    for k in range(count):
        lines = ["tau,Ic_dt,Jx_c,Jz_c,Jz2_c,purity_c"]
        for i in range(len(taus)):
            lines.append(",".join(_fmt(v) for v in (
                taus[i], trajectories["charge"][k, i], trajectories["jx"][k, i],
                trajectories["jz"][k, i], trajectories["jz2"][k, i],
                trajectories["purity"][k, i])))
        (directory / f"trajectory_{k:05d}.csv").write_text(
            "\n".join(lines) + "\n", encoding="ascii", newline="")


def cmd_sweep(args) -> int:
    n_values = _parse_n_list(args.n_list)
    rows = []
    failures = []
    for n in n_values:
        sys_ = SpinSystem(n)
        ops = build_spin_operators(sys_)
        series, _ = integrate_me(css_x(sys_), _me_params(args),
                                 _make_law_for_n(args, n), ops)
        try:
            tau_star, xi2_min = find_minimum(series)
        except ValueError as exc:
            failures.append(f"N={n}: {exc}")
            continue
        rows.append((n, tau_star, xi2_min, n * xi2_min))
    if failures:
        for line in failures:
            print(line, file=sys.stderr)
        return EXIT_NUMERICAL
    fit = fit_inverse_scaling([(n, x) for n, _, x, _ in rows])
    lines = ["n,tau_star,xi2_min,n_xi2_min"]
    for n, tau_star, xi2_min, n_xi2 in rows:
        lines.append(",".join([str(n), _fmt(tau_star), _fmt(xi2_min), _fmt(n_xi2)]))
    lines.append(f"# fit_exponent={_fmt(fit.exponent)}")
    lines.append(f"# fit_coefficient={_fmt(fit.coefficient)}")
    lines.append(f"# fit_residual={_fmt(fit.residual)}")
    _write_text(args.output, "\n".join(lines) + "\n")
    return EXIT_OK


def _make_law_for_n(args, n: int) -> FeedbackLaw:
    if args.law == "off":
        return FeedbackLaw.off()
    if args.law == "constant":
        return FeedbackLaw.constant(args.lambda0)
    if args.law == "analytic":
        return FeedbackLaw.analytic(n, eta=args.eta, scale=args.scale)
    return FeedbackLaw.conditional(scale=args.scale)


def _design_params(args) -> ExperimentalParams:
    if args.cs_preset:
        overrides = {}
        if args.regime:
            overrides["regime"] = args.regime
        if args.n is not None:
            overrides["n_atoms"] = args.n
        if args.power is not None:
            overrides["power"] = args.power
        if args.detuning is not None:
            overrides["detuning"] = args.detuning
        if args.kappa is not None:
            overrides["kappa"] = args.kappa
        if args.g is not None:
            overrides["g"] = args.g
        if args.area is not None:
            overrides["area"] = args.area
        if args.feedback_delay is not None:
            overrides["feedback_delay"] = args.feedback_delay
        return cesium_preset(**overrides)
    if args.regime is None:
        raise ValueError("design requires --regime (or --cs-preset)")
    missing = [name for name, val in (("--n", args.n), ("--gamma", args.gamma),
                                      ("--wavelength", args.wavelength),
                                      ("--power", args.power),
                                      ("--detuning", args.detuning)) if val is None]
    if missing:
        raise ValueError(f"design requires {', '.join(missing)}")
    area = args.area
    if args.area_min:
        area = args.wavelength**2 / (16 * np.pi**2)
    return ExperimentalParams(
        regime=args.regime, n_atoms=args.n, gamma=args.gamma,
        wavelength=args.wavelength, power=args.power, detuning=args.detuning,
        kappa=args.kappa, g=args.g, area=area,
        feedback_delay=args.feedback_delay)


def cmd_design(args) -> int:
    params = _design_params(args)
    a = float(args.alpha_override) if args.alpha_override is not None else alpha(params)
    if a <= 0:
        raise ValueError(f"alpha must be positive, got {a}")
    lasers = laser_constraints(params, alpha_override=a)
    outlook = attainable_squeezing(a, params.n_atoms)
    budget = loss_rate_and_budget(a, lasers.m, params.n_atoms, 1.0 / lasers.m)
    floor = single_shot_floor(args.epsilon, params.n_atoms)

    mark = "<<" if lasers.far_detuned_ok else "NOT <<"
    delay_line = "feedback delay: not specified"
    if lasers.delay_ok is not None:
        verdict = "ok" if lasers.delay_ok else "TOO SLOW"
        delay_line = (f"feedback delay: {params.feedback_delay:.3e} s vs required "
                      f"~{lasers.tau_fb_required:.3e} s -> {verdict}")
    report = [
        "probe-and-feedback design report (all outputs order-of-magnitude)",
        f"regime: {params.regime}, N = {params.n_atoms:.3e} atoms",
        f"loss-per-measurement parameter alpha = {a:.3e}"
        + (" (override)" if args.alpha_override is not None else ""),
        f"measurement strength M = {lasers.m:.3e} 1/s",
        f"single-atom loss rate alpha*M = {budget.loss_rate:.3e} 1/s; atoms lost "
        f"by t = 1/M: {budget.atoms_lost:.3e}"
        + (" (exceeds the sample)" if budget.total_loss else ""),
        f"attainable squeezing ~ sqrt(alpha/N) = {outlook.xi2:.3e} ({outlook.regime})",
        f"far-detuned power budget: P/Delta^2 = "
        f"{params.power / params.detuning**2:.3e} {mark} "
        f"{lasers.power_bound:.3e} W s^2/rad^2 (threshold ratio 0.1, "
        f"actual ratio {lasers.far_detuned_ratio:.3e})",
        delay_line,
        f"single-shot comparison: gain error {args.epsilon:g} floors xi2 at "
        f"{floor.xi2_floor:.3e} (error variance ~ {floor.err_variance:.3e})",
        "note: gamma is the plain linewidth number (no 2*pi); a 2*pi convention"
        " shift moves the bounds by ~an order of magnitude",
        "",
    ]
    kv = [
        f"regime={params.regime}",
        f"n_atoms={_fmt(params.n_atoms)}",
        f"alpha={_fmt(a)}",
        f"m_per_s={_fmt(lasers.m)}",
        f"loss_rate_per_s={_fmt(budget.loss_rate)}",
        f"atoms_lost_by_inverse_m={_fmt(budget.atoms_lost)}",
        f"xi2_attainable={_fmt(outlook.xi2)}",
        f"squeezing_regime={outlook.regime}",
        f"power_bound_w_s2={_fmt(lasers.power_bound)}",
        f"far_detuned_ok={str(lasers.far_detuned_ok).lower()}",
        f"far_detuned_ratio={_fmt(lasers.far_detuned_ratio)}",
        f"tau_fb_required_s={_fmt(lasers.tau_fb_required)}",
        f"delay_ok={'unknown' if lasers.delay_ok is None else str(lasers.delay_ok).lower()}",
        f"single_shot_xi2_floor={_fmt(floor.xi2_floor)}",
        f"single_shot_err_variance={_fmt(floor.err_variance)}",
    ]
    _write_text(args.output, "\n".join(report + kv) + "\n")
    return EXIT_OK


def _add_dynamics_flags(p: argparse.ArgumentParser, t_max: float) -> None:
    p.add_argument("--n", type=int, required=False, default=20,
                   help="atom number N (Hilbert dimension N+1)")
    p.add_argument("--m", type=float, default=1.0,
                   help="measurement strength; 0 freezes the dynamics "
                        "(runs are reported in units of Mt)")
    p.add_argument("--eta", type=float, default=1.0, help="detection efficiency in (0, 1]")
    p.add_argument("--law", choices=("off", "constant", "analytic", "conditional"),
                   default="analytic", help="feedback policy")
    p.add_argument("--lambda0", type=float, default=0.0,
                   help="gain for --law constant (units of M)")
    p.add_argument("--scale", type=float, default=1.0,
                   help="gain miscalibration multiplier (1.2 = +20%%)")
    p.add_argument("--dt", type=float, default=None,
                   help="integration step in Mt units (default: automatic)")
    p.add_argument("--t-max", type=float, default=t_max, help="final time in Mt units")
    p.add_argument("--sample-dt", type=float, default=1e-2,
                   help="observable sampling interval in Mt units")
    p.add_argument("--output", default="-", help="output path ('-' = stdout)")
    p.add_argument("--config", default=None,
                   help="key = value file; flags override config values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinsqueeze",
        description="Continuous QND measurement-and-feedback spin squeezing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="deterministic master-equation run -> CSV")
    _add_dynamics_flags(p, t_max=2.0)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("ensemble", help="trajectory ensemble average -> CSV")
    _add_dynamics_flags(p, t_max=1.5)
    p.add_argument("--k", type=int, default=100, help="number of trajectories")
    p.add_argument("--master-seed", type=int, default=0,
                   help="seed of the per-trajectory noise streams")
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes (output is identical for any value)")
    p.add_argument("--dump-trajectories", default=None, metavar="DIR",
                   help="also write per-trajectory CSVs into DIR")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("sweep", help="squeezing minimum vs N, with power-law fit")
    _add_dynamics_flags(p, t_max=1.5)
    p.add_argument("--n-list", default="10,20,30,40,50,60,70,80,90,100",
                   help="comma-separated strictly increasing atom numbers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("design", help="experimental feasibility report")
    p.add_argument("--regime", choices=("cavity", "freespace"), default=None)
    p.add_argument("--cs-preset", action="store_true",
                   help="cesium worked example (852 nm, gamma = 5 MHz, N = 1e7)")
    p.add_argument("--n", type=float, default=None, help="atom number")
    p.add_argument("--gamma", type=float, default=None, help="spontaneous emission rate (1/s)")
    p.add_argument("--kappa", type=float, default=None, help="cavity linewidth (1/s)")
    p.add_argument("--g", type=float, default=None, help="one-photon Rabi frequency (rad/s)")
    p.add_argument("--area", type=float, default=None, help="beam cross-section (m^2)")
    p.add_argument("--area-min", action="store_true",
                   help="use the diffraction-scale area wavelength^2/(16 pi^2)")
    p.add_argument("--wavelength", type=float, default=None, help="probe wavelength (m)")
    p.add_argument("--power", type=float, default=None, help="probe power (W)")
    p.add_argument("--detuning", type=float, default=None, help="probe detuning (rad/s)")
    p.add_argument("--feedback-delay", type=float, default=None, help="loop latency (s)")
    p.add_argument("--alpha-override", type=float, default=None,
                   help="use this alpha instead of computing it")
    p.add_argument("--epsilon", type=float, default=0.2,
                   help="single-shot relative gain error for the comparison floor")
    p.add_argument("--output", default="-", help="output path ('-' = stdout)")
    p.add_argument("--config", default=None,
                   help="key = value file; flags override config values")
    p.set_defaults(func=cmd_design)
    return parser


_TRUE_WORDS = ("1", "true", "yes", "on")
_FALSE_WORDS = ("0", "false", "no", "off")


def config_tokens(path: str) -> list[str]:
    """Translate a flat key = value config file into CLI tokens.

    Keys are long option names (hyphens or underscores); '#' starts a comment.
    Boolean keys take true/false words.  The tokens are inserted before the
    explicit flags, so explicit flags win.
    """
    tokens: list[str] = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValueError(f"cannot read config {path!r}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        flag = "--" + key.replace("_", "-")
        if flag == "--config":
            raise ValueError(f"{path}:{lineno}: config files cannot nest")
        low = value.lower()
        if low in _TRUE_WORDS:
            tokens.append(flag)
        elif low in _FALSE_WORDS:
            pass
        else:
            tokens.extend([flag, value])
    return tokens


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            merged = [argv[0]] + config_tokens(args.config) + argv[1:]
            args = parser.parse_args(merged)
        return args.func(args)
    except (ValueError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InvariantViolation, MeanSpinCollapse, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
