"""Batch command-line surface: sweeps, validation campaigns, optimizers.

Commands: `outage`, `goodput`, `optimize --mode {power,rate,joint}`,
`validate`, `dmt`. Sweep commands emit one CSV row per (snr, m, k) with
the fixed header below (UTF-8, LF line endings, full-precision floats
with lowercase exponents); `m` and `k` are 1-based in the output.

Exit codes: 0 on success, 2 for scenario/validation errors, 3 when a row
carries a runtime analytic error flag (series cancellation). The
infeasible-theta, asymptote-clamped, and mc-trial-discards flags are
informational and leave the exit code at 0.
"""

import argparse
import dataclasses
import math
import sys

import numpy as np

from .errors import NomalinkError, ScenarioError
from .mcsim import TrialPlan, report_with_mc
from .optim import (
    asymptotic_goodput,
    joint_optimize,
    optimal_power,
    optimal_rate,
)
from .outage import (
    FLAG_CANCELLATION,
    FLAG_CLAMPED,
    FLAG_INFEASIBLE,
    FLAG_MC_DISCARDS,
    dmt_gain,
    outage_report,
    phi_table,
    theta_table,
)
from .scenario import Scenario, load_scenario

CSV_HEADER = (
    "snr_db,m,k,theta,p_exact_approx,p_asym,p_mc,mc_ci_low,mc_ci_high,"
    "goodput_exact,goodput_asym,goodput_mc,flags"
)

_FLAG_ORDER = (FLAG_INFEASIBLE, FLAG_CLAMPED, FLAG_CANCELLATION, FLAG_MC_DISCARDS)
ERROR_FLAGS = frozenset({FLAG_CANCELLATION})


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return repr(v)


def _flags_str(flags) -> str:
    ordered = [f for f in _FLAG_ORDER if f in flags]
    return ";".join(ordered)


def _resolve_power_at(point: Scenario) -> Scenario:
    """Fill in the allocation for optimized mode (per SNR point, since
    the asymptotic constants scale with the transmit SNR)."""
    if point.power is not None:
        return point
    phi = phi_table(point.system, point.clusters, point.corr)
    power, _ = optimal_power(point.rates, phi, point.system)
    return point.with_power(power)


def run_outage_sweep(sc: Scenario, validate: bool = False):
    """Rows of the sweep CSV; returns (list of row strings, error flag seen)."""
    rows = []
    saw_error = False
    if validate and sc.mc is None:
        raise ScenarioError("validation requested but no [mc] trial plan given")
    for snr in sc.snr_points():
        point = _resolve_power_at(sc.at_snr(snr))
        rep = outage_report(
            point.system, point.clusters, point.corr, point.power, point.rates
        )
        if validate:
            rep = report_with_mc(rep, point.mc, point)
        theta = theta_table(point.power, point.rates)
        flag_map = dict(rep.flags)
        m_streams, k_clusters = point.power.shape
        for mi in range(m_streams):
            for ki in range(k_clusters):
                flags = flag_map.get((mi, ki), ())
                if ERROR_FLAGS.intersection(flags):
                    saw_error = True
                has_mc = rep.p_mc is not None
                rows.append(
                    ",".join(
                        [
                            _fmt(snr),
                            str(mi + 1),
                            str(ki + 1),
                            _fmt(theta.theta[mi, ki]),
                            _fmt(rep.p_exact_approx[mi, ki]),
                            _fmt(rep.p_asym[mi, ki]),
                            _fmt(rep.p_mc[mi, ki] if has_mc else None),
                            _fmt(rep.mc_ci_low[mi, ki] if has_mc else None),
                            _fmt(rep.mc_ci_high[mi, ki] if has_mc else None),
                            _fmt(rep.goodput_exact),
                            _fmt(rep.goodput_asym),
                            _fmt(rep.goodput_mc),
                            _flags_str(flags),
                        ]
                    )
                )
    return rows, saw_error


def _matrix_lines(name: str, matrix: np.ndarray):
    lines = [f"[{name}]"]
    for mi in range(matrix.shape[0]):
        lines.append(
            str(mi + 1) + "," + ",".join(_fmt(v) for v in matrix[mi])
        )
    return lines


def run_optimize(sc: Scenario, mode: str, epsilon_tol: float = 1e-5,
                 max_iter: int = 100):
    """Optimize and render the deterministic report (list of lines)."""
    cfg = sc.system
    phi = phi_table(cfg, sc.clusters, sc.corr)
    trace = ()
    iterations = None
    converged = None
    if mode == "power":
        power, theta = optimal_power(sc.rates, phi, cfg)
        rates = sc.rates
    elif mode == "rate":
        if sc.power is None:
            raise ScenarioError("rate mode needs a fixed power allocation")
        power = sc.power
        rates, theta = optimal_rate(power, phi, cfg)
    elif mode == "joint":
        init = sc.rates if sc.rates_explicit else None
        res = joint_optimize(init, epsilon_tol, max_iter, sc)
        power, rates, theta = res.zeta_star, res.rates_star, res.theta_star
        trace = res.trace
        iterations = res.iterations
        converged = res.converged
    else:
        raise ScenarioError(f"unknown optimize mode {mode!r}")

    rep = outage_report(cfg, sc.clusters, sc.corr, power, rates)
    lines = [
        f"mode = {mode}",
        f"snr_db = {_fmt(cfg.snr_db)}",
        f"goodput_asym = {_fmt(asymptotic_goodput(power, rates, phi))}",
        f"goodput_asym_clamped = {_fmt(rep.goodput_asym)}",
        f"goodput_exact_approx = {_fmt(rep.goodput_exact)}",
    ]
    if mode == "joint":
        lines.insert(1, f"converged = {str(converged).lower()}")
        lines.insert(2, f"iterations = {iterations}")
    lines += _matrix_lines("zeta", power.zeta)
    lines += _matrix_lines("rates", rates.rates)
    lines += _matrix_lines("theta", theta.theta)
    if mode == "joint":
        lines.append("[trace]")
        lines.append("iter,goodput_asym")
        for i, val in enumerate(trace, start=1):
            lines.append(f"{i},{_fmt(val)}")
    return lines


def run_dmt(sc: Scenario, multiplexing, power_exponents):
    """DMT CSV rows: per-cluster diversity gains for the given scalings."""
    from .errors import DomainError

    r = np.asarray(multiplexing, dtype=float)
    u = np.asarray(power_exponents, dtype=float)
    k = sc.clusters.k_clusters
    if r.shape != (k,) or u.shape != (k,):
        raise ScenarioError(f"need exactly {k} multiplexing gains and exponents")
    try:
        gains = dmt_gain(r, u, sc.system)
    except DomainError as exc:
        # bad user-supplied scalings are a validation problem, not an
        # analytic one
        raise ScenarioError(str(exc)) from exc
    lines = ["k,r,upsilon,d_star"]
    for ki in range(k):
        lines.append(f"{ki + 1},{_fmt(r[ki])},{_fmt(u[ki])},{_fmt(gains[ki])}")
    return lines


def _write_out(lines, path):
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _load(args) -> Scenario:
    sc = load_scenario(args.config, preset=args.preset)
    if args.trials is not None or args.seed is not None:
        base = sc.mc
        trials = args.trials if args.trials is not None else (
            base.trials if base else None
        )
        if trials is None:
            raise ScenarioError("--seed given without trials ([mc] or --trials)")
        seed = args.seed if args.seed is not None else (base.seed if base else 0)
        plan = TrialPlan(
            trials=trials,
            seed=seed,
            partitions=base.partitions if base else 1,
            antithetic=base.antithetic if base else False,
        )
        sc = dataclasses.replace(sc, mc=plan)
    return sc


def _cmd_sweep(args, force_validate=False):
    sc = _load(args)
    validate = force_validate or getattr(args, "validate", False)
    rows, saw_error = run_outage_sweep(sc, validate=validate)
    _write_out([CSV_HEADER] + rows, args.out)
    return 3 if saw_error else 0


def _cmd_optimize(args):
    sc = _load(args)
    lines = run_optimize(sc, args.mode, epsilon_tol=args.tol, max_iter=args.max_iter)
    _write_out(lines, args.out)
    return 0


def _cmd_dmt(args):
    sc = _load(args)
    import ast

    r = ast.literal_eval(args.multiplexing)
    u = ast.literal_eval(args.power_exponents)
    lines = run_dmt(sc, r, u)
    _write_out(lines, args.out)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nomalink",
        description="Outage/goodput analysis and goodput maximization for "
        "downlink virtual MIMO-NOMA with zero-forcing receivers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="scenario file path")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--seed", type=int, default=None, help="Monte Carlo seed")
        p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials")
        p.add_argument(
            "--preset", default=None, choices=["paper-v"], help="named preset"
        )

    p_out = sub.add_parser("outage", help="outage sweep CSV")
    common(p_out)
    p_out.add_argument("--validate", action="store_true", help="fill MC columns")
    p_out.set_defaults(func=_cmd_sweep)

    p_gp = sub.add_parser("goodput", help="goodput sweep CSV (same row schema)")
    common(p_gp)
    p_gp.add_argument("--validate", action="store_true", help="fill MC columns")
    p_gp.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="sweep with Monte Carlo columns forced")
    common(p_val)
    p_val.set_defaults(func=lambda a: _cmd_sweep(a, force_validate=True))

    p_opt = sub.add_parser("optimize", help="power/rate/joint goodput maximization")
    common(p_opt)
    p_opt.add_argument("--mode", required=True, choices=["power", "rate", "joint"])
    p_opt.add_argument("--tol", type=float, default=1e-5, help="joint stop tolerance")
    p_opt.add_argument("--max-iter", type=int, default=100, dest="max_iter")
    p_opt.set_defaults(func=_cmd_optimize)

    p_dmt = sub.add_parser("dmt", help="diversity-multiplexing tradeoff table")
    common(p_dmt)
    p_dmt.add_argument("--multiplexing", required=True,
                       help="bracketed list of per-cluster multiplexing gains")
    p_dmt.add_argument("--power-exponents", required=True, dest="power_exponents",
                       help="bracketed list of per-cluster power scaling exponents")
    p_dmt.set_defaults(func=_cmd_dmt)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NomalinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
