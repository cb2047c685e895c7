"""Command line entry points.

Exit codes: 0 on a completed command, 2 for configuration errors, 3 for
numerical divergence, 4 for a fixed-point iteration that fails to converge,
5 for a degenerate mass matrix caused by vanishing density.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .estimates import write_ndjson
from .pipeline import (
    converge_study,
    gronwall_check_file,
    momentum_probes,
    run_simulation,
    taylor_benchmark,
    uniqueness_study,
    vacuum_sweep,
    write_run_outputs,
)
from .solver import (
    DivergenceError,
    PicardNonConvergenceError,
    VacuumDegenerateError,
)

EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_PICARD = 4
EXIT_VACUUM = 5


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated float list, got {text!r}") from exc


def _print_checks(checks: list[dict]) -> None:
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"[{status}] {c['check']} margin={c['margin']:.6e}")


def cmd_run(args) -> int:
    config = parse_config(args.config)
    result = run_simulation(config, seed=args.seed)
    write_run_outputs(result, args.out)
    _print_checks(result.checks)
    pic = result.picard
    print(
        f"picard: {pic.iterations} iterations, final delta {pic.deltas[-1]:.6e}"
    )
    print(f"wrote {Path(args.out) / 'ledger.ndjson'}")
    return 0


def cmd_converge(args) -> int:
    config = parse_config(args.config)
    study = converge_study(config, _int_list(args.n_list))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ndjson(out / "converge.ndjson", study.rows)
    for res in study.results:
        write_run_outputs(res, out / f"N{res.config.N}")
    for row in study.rows:
        if "l2_time_diff" in row:
            print(
                f"N={row['n_small']} vs N={row['n_big']}: "
                f"L2(0,T;L2) diff {row['l2_time_diff']:.6e}"
            )
    print(f"wrote {out / 'converge.ndjson'}")
    return 0


def cmd_vacuum(args) -> int:
    config = parse_config(args.config)
    sweep = vacuum_sweep(config, _int_list(args.n_list))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(sweep.rows)
    rows.append({"sup_grad_variation": sweep.sup_grad_variation})
    write_ndjson(out / "vacuum.ndjson", rows)
    for res, rep in zip(sweep.results, sweep.momentum):
        n = res.source.floor_n
        write_run_outputs(res, out / f"n{n}")
        t, norms = momentum_probes(res)
        write_ndjson(
            out / f"momentum_n{n}.ndjson",
            [{"t": float(tj), "norm": float(nj)} for tj, nj in zip(t, norms)],
        )
        slope = "none" if rep.slope is None else f"{rep.slope:.4f}"
        print(
            f"n={n}: sup|grad u|^2={res.ledger.column('grad_u_l2').max()**2:.6e} "
            f"momentum slope={slope} pass={rep.passed}"
        )
    print(f"cross-floor sup|grad u|^2 variation: {sweep.sup_grad_variation:.4%}")
    print(f"wrote {out / 'vacuum.ndjson'}")
    return 0


def cmd_uniqueness(args) -> int:
    config = parse_config(args.config)
    study = uniqueness_study(config, delta=args.delta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "seed_diff_max": study.seed_diff_max,
        "seed_pass": study.seed_pass,
        "fitted_A": study.fitted_A,
        "fitted_C": study.fitted_C,
        "perturb_pass": study.perturb_pass,
        "gronwall_message": study.gronwall.message,
        "gronwall_f_margin": study.gronwall.f_margin,
        "gronwall_eta_margin": study.gronwall.eta_margin,
    }
    write_ndjson(out / "uniqueness.ndjson", [summary])
    curves = study.curves
    write_ndjson(
        out / "curves.ndjson",
        [
            {
                "t": float(curves["t"][k]),
                "f": float(curves["f"][k]),
                "g": float(curves["g"][k]),
                "G": float(curves["G"][k]),
            }
            for k in range(len(curves["t"]))
        ],
    )
    print(f"[{'PASS' if study.seed_pass else 'FAIL'}] seed independence")
    print(f"[{'PASS' if study.perturb_pass else 'FAIL'}] perturbation bound "
          f"(A={study.fitted_A:.4e}, C={study.fitted_C:.4e})")
    print(f"wrote {out / 'uniqueness.ndjson'}")
    return 0


def cmd_gronwall(args) -> int:
    _, report = gronwall_check_file(args.input)
    print(f"hypotheses: {'ok' if report.hypotheses_ok else 'FAIL'} "
          f"(margin {report.hypothesis_margin:.6e})")
    print(f"conclusion: {'ok' if report.conclusion_ok else 'FAIL'} "
          f"(f margin {report.f_margin:.6e}, eta margin {report.eta_margin:.6e})")
    print(report.message)
    return 0 if report.passed else 1


def cmd_taylor(args) -> int:
    config = parse_config(args.config)
    dts = _float_list(args.dt_list) if args.dt_list else None
    rep = taylor_benchmark(config, dts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ndjson(
        out / "taylor.ndjson",
        [
            {
                "dt": float(dt),
                "max_rel_error": float(err),
            }
            for dt, err in zip(rep.dts, rep.errors)
        ]
        + [{"orders": [float(o) for o in rep.orders], "pass": rep.passed}],
    )
    for dt, err in zip(rep.dts, rep.errors):
        print(f"dt={dt:g}: max relative error {err:.6e}")
    if rep.orders:
        print("observed orders: " + ", ".join(f"{o:.3f}" for o in rep.orders))
    print(f"[{'PASS' if rep.passed else 'FAIL'}] single-mode decay benchmark")
    print(f"wrote {out / 'taylor.ndjson'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusflow",
        description="Spectral Galerkin solver for variable-density "
        "incompressible flow on the periodic square, with built-in "
        "verification of its energy and regularity estimates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_required=True):
        p.add_argument("--config", required=True, help="path to a run config file")
        p.add_argument("--out", required=out_required, help="output directory")

    p_run = sub.add_parser("run", help="solve one configuration and write its ledger")
    add_common(p_run)
    p_run.add_argument(
        "--seed",
        choices=("initial", "zero"),
        default="initial",
        help="fixed-point starting field",
    )
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("converge", help="mode-count refinement study")
    add_common(p_conv)
    p_conv.add_argument(
        "--N-list", dest="n_list", required=True, help="comma-separated mode counts"
    )
    p_conv.set_defaults(func=cmd_converge)

    p_vac = sub.add_parser("vacuum-sweep", help="vacuum floor sweep")
    add_common(p_vac)
    p_vac.add_argument(
        "--n-list", dest="n_list", required=True, help="comma-separated floor values n"
    )
    p_vac.set_defaults(func=cmd_vacuum)

    p_uni = sub.add_parser("uniqueness", help="seed independence and perturbation bound")
    add_common(p_uni)
    p_uni.add_argument(
        "--delta", type=float, default=1e-3, help="initial density shift"
    )
    p_uni.set_defaults(func=cmd_uniqueness)

    p_gro = sub.add_parser(
        "gronwall-check", help="verify a discrete comparison inequality from JSON"
    )
    p_gro.add_argument("--input", required=True, help="JSON file with t,f,g,G,alpha,beta,A,g0")
    p_gro.set_defaults(func=cmd_gronwall)

    p_tay = sub.add_parser("taylor", help="exact single-mode decay benchmark")
    add_common(p_tay)
    p_tay.add_argument(
        "--dt-list", default=None, help="comma-separated steps for an order study"
    )
    p_tay.set_defaults(func=cmd_taylor)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except PicardNonConvergenceError as exc:
        print(f"fixed point failed: {exc}", file=sys.stderr)
        return EXIT_PICARD
    except VacuumDegenerateError as exc:
        print(f"degenerate mass matrix: {exc}", file=sys.stderr)
        return EXIT_VACUUM


if __name__ == "__main__":
    sys.exit(main())
