# ============================================================
# app/cli.py — Interfaz de línea de comandos
# ============================================================
# Subcomandos:
#   run <config.yaml | manifest.json>   ejecuta un experimento
#   summarize <results.csv>             resumen por celda
#   plot <summary.csv>                  script gnuplot + datos
#   width-table                         tabla de anchos gaussianos/empíricos
#   sufficient-m <theorem>              calculadora de m suficiente
#   serve                               API HTTP (uvicorn)
#
# Códigos de salida: 0 éxito, 2 error de uso/configuración/dominio,
# 1 error inesperado. Los errores se escriben en stderr como una
# línea `error {json}`.
# ============================================================

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from app.config import configure_logging, get_settings
from app.onebit.errors import ConfigError, OneBitError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    """argparse que lanza en vez de salir, para reportar el error en JSON."""

    def error(self, message):
        raise ConfigError(message)


def _report(exc: BaseException) -> None:
    payload = {"type": type(exc).__name__, "message": str(exc), "key_path": getattr(exc, "key_path", None)}
    print("error " + json.dumps(payload, ensure_ascii=False), file=sys.stderr)


def _to_json(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


# ============================================================
# Subcomandos
# ============================================================
def _cmd_run(args) -> int:
    from app.harness.experiment_config import load_config
    from app.harness.runner import run_experiment, run_from_manifest
    from app.utils.file_utils import is_manifest

    if is_manifest(args.config):
        result = run_from_manifest(args.config, output_dir=args.output, workers=args.workers)
    else:
        result = run_experiment(load_config(args.config), output_dir=args.output, workers=args.workers)
    print(json.dumps({"output_dir": str(result.output_dir), "results": str(result.results_csv),
                      "manifest": str(result.manifest), "rows": result.rows}))
    return EXIT_OK


def _cmd_summarize(args) -> int:
    from app.harness.summary import DEFAULT_GROUP_BY, summarize

    summary = summarize(args.csv, tuple(args.group_by or DEFAULT_GROUP_BY), rho=args.rho)
    output = args.output or str(Path(args.csv).with_name("summary.csv"))
    summary.to_csv(output, index=False, float_format="%.10g", lineterminator="\n")
    print(summary.to_string(index=False))
    return EXIT_OK


def _cmd_plot(args) -> int:
    from app.harness.plots import emit_plots

    summary = pd.read_csv(args.summary)
    script, data = emit_plots(summary, args.kind, args.out_dir or str(Path(args.summary).parent), args.stem)
    print(json.dumps({"script": str(script), "data": str(data)}))
    return EXIT_OK


def _size(text: str):
    try:
        s, n = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"tamaño inválido {text!r}; use s,n") from None
    return s, n


def _cmd_width_table(args) -> int:
    from app.onebit.complexity import empirical_width, gaussian_mean_width
    from app.onebit.types import MeasurementEnsemble, RowLaw, SeedPlan, SignalSetDescriptor

    plan = SeedPlan(args.seed)
    law = RowLaw(args.law)
    rows = []
    for s, n in args.size or [(1, 16), (2, 64), (4, 256)]:
        if args.kind == "sparse_ball":
            descriptor = SignalSetDescriptor.sparse_ball(s, n, args.radius)
        else:
            descriptor = SignalSetDescriptor.l1l2_ball(s, n, args.radius)
        if law is RowLaw.GAUSSIAN:
            estimate = gaussian_mean_width(descriptor, args.n_mc, plan)
        else:
            ensemble = MeasurementEnsemble(law, n=n, m=args.m, lam=1.0, df=args.df, alpha=args.alpha)
            estimate = empirical_width(descriptor, ensemble, args.n_mc, plan)
        reference = args.radius * math.sqrt(s * math.log(math.e * n / s))
        rows.append({"kind": args.kind, "s": s, "n": n, "law": law.value, "width": estimate.value,
                     "standard_error": estimate.standard_error, "reference": reference,
                     "ratio": estimate.value / reference})
    table = pd.DataFrame(rows)
    if args.output:
        table.to_csv(args.output, index=False, float_format="%.10g", lineterminator="\n")
    print(table.to_csv(index=False, float_format="%.6g", lineterminator="\n"), end="")
    return EXIT_OK


def _cmd_sufficient_m(args) -> int:
    from app.onebit.complexity import (
        Theorem,
        TheoremConstants,
        TheoremParams,
        admissible_levels,
        sufficient_m,
    )
    from app.onebit.types import MeasurementEnsemble, RowLaw, SignalSetDescriptor

    descriptor = None
    if args.kind:
        if args.s is None or args.n is None:
            raise ConfigError("--kind requiere --s y --n", "descriptor")
        build = SignalSetDescriptor.sparse_ball if args.kind == "sparse_ball" else SignalSetDescriptor.l1l2_ball
        descriptor = build(args.s, args.n, args.R)
    ensemble = None
    if args.law and descriptor is not None:
        ensemble = MeasurementEnsemble(RowLaw(args.law), n=descriptor.n, m=1, lam=args.lam or 1.0,
                                       df=args.df, alpha=args.alpha)
    params = TheoremParams(
        R=args.R, rho=args.rho, lam=args.lam, sigma=args.sigma, mu=args.mu, beta=args.beta,
        descriptor=descriptor, ensemble=ensemble, width=args.width, local_width=args.local_width,
        empirical_width=args.empirical_width, log_covering=args.log_covering, n_mc=args.n_mc, seed=args.seed,
    )
    constants = TheoremConstants(**{k: getattr(args, k) for k in ("c0", "c1", "c2", "c3", "c4", "c5")})
    theorem = Theorem(args.theorem)
    result = sufficient_m(theorem, params, constants)
    levels = admissible_levels(theorem, params, constants)
    print(json.dumps({
        "theorem": theorem.value, "m": result.m, "r": result.r, "lambda": result.lam,
        "terms": {k: _to_json(v) for k, v in result.terms.items()},
        "admissible": {k: _to_json(v) for k, v in levels.items()},
    }, ensure_ascii=False))
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port or get_settings().port)
    return EXIT_OK


# ============================================================
# Construcción del parser
# ============================================================
def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onebit", description="Medición one-bit con dither, teselaciones y recuperación.")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (por defecto ONEBIT_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="ejecuta un experimento desde YAML o manifest.json")
    run.add_argument("config")
    run.add_argument("--output", default=None)
    run.add_argument("--workers", type=int, default=None)
    run.set_defaults(handler=_cmd_run)

    summ = sub.add_parser("summarize", help="resumen por celda de un results.csv")
    summ.add_argument("csv")
    summ.add_argument("--group-by", nargs="+", default=None)
    summ.add_argument("--rho", type=float, default=None)
    summ.add_argument("--output", default=None)
    summ.set_defaults(handler=_cmd_summarize)

    plot = sub.add_parser("plot", help="script gnuplot a partir de un summary.csv")
    plot.add_argument("summary")
    plot.add_argument("--kind", default="error_vs_m", choices=("error_vs_m", "success_vs_m", "error_vs_beta"))
    plot.add_argument("--out-dir", default=None)
    plot.add_argument("--stem", default="")
    plot.set_defaults(handler=_cmd_plot)

    width = sub.add_parser("width-table", help="anchos de conjuntos dispersos")
    width.add_argument("--kind", default="sparse_ball", choices=("sparse_ball", "l1l2_ball"))
    width.add_argument("--size", type=_size, action="append", help="par s,n (repetible)")
    width.add_argument("--radius", type=float, default=1.0)
    width.add_argument("--law", default="gaussian", choices=("gaussian", "rademacher", "student_t", "coord_heavy"))
    width.add_argument("--df", type=float, default=None)
    width.add_argument("--alpha", type=float, default=None)
    width.add_argument("--m", type=int, default=1000)
    width.add_argument("--n-mc", type=int, default=200)
    width.add_argument("--seed", type=int, default=0)
    width.add_argument("--output", default=None)
    width.set_defaults(handler=_cmd_width_table)

    suff = sub.add_parser("sufficient-m", help="m suficiente para un resultado")
    suff.add_argument("theorem", choices=("tess_subgaussian", "tess_heavy", "recover_subgaussian",
                                          "recover_heavy", "convex"))
    suff.add_argument("--R", type=float, default=1.0)
    suff.add_argument("--rho", type=float, required=True)
    suff.add_argument("--lam", type=float, default=None)
    suff.add_argument("--sigma", type=float, default=0.0)
    suff.add_argument("--mu", type=float, default=0.0)
    suff.add_argument("--beta", type=float, default=0.0)
    suff.add_argument("--kind", default=None, choices=("sparse_ball", "l1l2_ball"))
    suff.add_argument("--s", type=float, default=None)
    suff.add_argument("--n", type=int, default=None)
    suff.add_argument("--law", default=None, choices=("gaussian", "rademacher", "student_t", "coord_heavy"))
    suff.add_argument("--df", type=float, default=None)
    suff.add_argument("--alpha", type=float, default=None)
    suff.add_argument("--width", type=float, default=None)
    suff.add_argument("--local-width", type=float, default=None)
    suff.add_argument("--empirical-width", type=float, default=None)
    suff.add_argument("--log-covering", type=float, default=None)
    suff.add_argument("--n-mc", type=int, default=200)
    suff.add_argument("--seed", type=int, default=0)
    for name in ("c0", "c1", "c2", "c3", "c4", "c5"):
        suff.add_argument(f"--{name}", type=float, default=1.0)
    suff.set_defaults(handler=_cmd_sufficient_m)

    serve = sub.add_parser("serve", help="levanta la API HTTP")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=None)
    serve.set_defaults(handler=_cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
        configure_logging(args.log_level)
        return args.handler(args)
    except (OneBitError, ValueError, OSError) as exc:
        _report(exc)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        logger.exception("Error inesperado")
        _report(exc)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
