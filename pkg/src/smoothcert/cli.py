"""Command-line front end.

Subcommands:
  certify   counts file -> per-example results (csv/jsonl/markdown table)
  synth     synthetic classifier experiment -> counts and/or results
  curve     ablation curves (sqrt-d, k, n, sigma-q) -> curve CSV
  table     results file(s) -> certified-accuracy table

Exit codes: 0 success, 1 validation error, 2 numeric failure.  Errors go
to stderr with a machine-readable prefix: "smoothcert:error:validation:"
or "smoothcert:error:numeric:".  Flags override config-file entries
(--config, flat KEY=VALUE lines), which override built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import _special
from .distributions import NoiseSpec, radial_quantile
from .errors import NumericFailure
from .io import (
    DEFAULT_GRID,
    RunConfig,
    emit_counts,
    emit_curve,
    emit_results,
    emit_table,
    load_config_file,
    parse_counts,
    parse_grid,
    parse_results,
)
from .pipeline import (
    ablation_k,
    ablation_n,
    ablation_sigma_q,
    certify_batch,
    sqrt_d_curve,
)
from .synthetic import BallClassifier, LinearClassifier, mc_counts

logger = logging.getLogger(__name__)

_VALIDATION_PREFIX = "smoothcert:error:validation:"
_NUMERIC_PREFIX = "smoothcert:error:numeric:"


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors follow the exit-code contract
    (1 for bad arguments, not argparse's default 2)."""

    def error(self, message: str) -> None:  # noqa: A003 - argparse API
        print(f"{_VALIDATION_PREFIX} {message}", file=sys.stderr)
        raise SystemExit(1)


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat KEY=VALUE configuration file")
    parser.add_argument("--mode", choices=("np", "dsrs", "both"))
    parser.add_argument("--sigma-p", type=float, dest="sigma_p")
    parser.add_argument("--sigma-q", type=float, dest="sigma_q")
    parser.add_argument("--k", type=int)
    parser.add_argument("--d", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--num-samples", type=int, dest="n_samples")
    parser.add_argument("--grid", help="radius grid start:stop:step")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output path")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cli = {
        key: getattr(args, key, None)
        for key in ("mode", "sigma_p", "sigma_q", "k", "d", "alpha",
                    "n_samples", "grid", "tol", "workers", "seed", "out")
    }
    file_cfg = load_config_file(args.config) if getattr(args, "config", None) else None
    cfg = RunConfig.build(cli, file_cfg)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smoothcert",
                     description="Certified robustness radii for smoothed classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cert = sub.add_parser("certify", parents=[], help="certify a counts file",
                            description="Read count records and emit certified radii.")
    p_cert.add_argument("counts", help="JSON-lines counts file")
    p_cert.add_argument("--format", choices=("csv", "jsonl", "markdown"), default="csv")
    _common_flags(p_cert)

    p_synth = sub.add_parser("synth", help="synthetic experiment",
                             description="Sample counts for synthetic classifiers, "
                                         "then optionally certify them.")
    family = p_synth.add_mutually_exclusive_group()
    family.add_argument("--ball", action="store_true",
                        help="norm-threshold classifier family (default)")
    family.add_argument("--linear", action="store_true",
                        help="halfspace classifier family")
    p_synth.add_argument("--n-examples", type=int, default=20)
    p_synth.add_argument("--counts-out", help="also write the sampled counts here")
    p_synth.add_argument("--format", choices=("csv", "jsonl", "markdown"), default="csv")
    _common_flags(p_synth)

    p_curve = sub.add_parser("curve", help="ablation curves",
                             description="Emit a curve CSV for one ablation axis.")
    p_curve.add_argument("--ablation", required=True,
                         choices=("sqrt-d", "k", "n", "sigma-q"))
    p_curve.add_argument("--values",
                         help="comma-separated x values (dims, k values, "
                              "sample counts, or sigma_q values)")
    p_curve.add_argument("--input", help="counts file for the n ablation")
    p_curve.add_argument("--pa", type=float, default=0.99,
                         help="primary lower bound for the k ablation")
    p_curve.add_argument("--qa", type=float, default=0.999,
                         help="secondary probability for the k ablation")
    _common_flags(p_curve)

    p_table = sub.add_parser("table", help="certified-accuracy table",
                             description="Aggregate results files (one per run) "
                                         "into an accuracy table.")
    p_table.add_argument("results", nargs="+", help="results csv/jsonl files")
    p_table.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    _common_flags(p_table)
    return parser


def _synth_records(cfg: RunConfig, spec_p: NoiseSpec, spec_q: NoiseSpec,
                   n_examples: int, linear: bool) -> list:
    """Deterministic batch of classifier instances at spread confidence
    levels; example i uses seed cfg.seed + i."""
    if n_examples < 1:
        raise ValueError(f"n_examples must be >= 1, got {n_examples}")
    records = []
    origin = [0.0] * cfg.d
    for i in range(n_examples):
        frac = i / max(1, n_examples - 1)
        p_target = 0.55 + 0.445 * frac
        if linear:
            # margin from the coordinate marginal; exact for k = 0 and a
            # monotone spread either way
            bias = spec_p.sigma * float(_special.normal_quantile(p_target))
            classifier = LinearClassifier(weight=(1.0,) + (0.0,) * (cfg.d - 1),
                                          bias=bias)
        else:
            thr = float(radial_quantile(spec_p, p_target))
            classifier = BallClassifier(center=tuple(origin), threshold=thr)
        records.append(
            mc_counts(classifier, origin, spec_p, spec_q, cfg.n_samples,
                      seed=cfg.seed + i, example_id=f"ex{i:04d}", label=1)
        )
    return records


def _cmd_certify(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    out = cfg.out or "results.csv"
    records = list(parse_counts(args.counts))
    if not records:
        raise ValueError(f"no valid count records in {args.counts}")
    failures: list = []
    results = certify_batch(records, alpha=cfg.alpha, tol=cfg.tol,
                            mode=cfg.mode, workers=cfg.workers, failures=failures)
    emit_results(results, args.format, out, grid=cfg.grid)
    if failures:
        print(f"{len(failures)} of {len(records)} records failed; "
              f"first: {failures[0][0]}: {failures[0][1]}", file=sys.stderr)
    print(f"wrote {len(results)} results for {len(records)} records to {out}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    spec_p, spec_q = cfg.validate()
    records = _synth_records(cfg, spec_p, spec_q, args.n_examples, args.linear)
    if args.counts_out:
        emit_counts(records, args.counts_out)
        print(f"wrote {len(records)} count records to {args.counts_out}")
        if cfg.out is None:
            return 0
    out = cfg.out or "results.csv"
    results = certify_batch(records, alpha=cfg.alpha, tol=cfg.tol,
                            mode=cfg.mode, workers=cfg.workers)
    emit_results(results, args.format, out, grid=cfg.grid)
    print(f"wrote {len(results)} results for {len(records)} records to {out}")
    return 0


def _curve_values(args: argparse.Namespace, defaults: list) -> list[float]:
    if args.values is None:
        return defaults
    return [float(v) for v in args.values.split(",") if v.strip()]


def _cmd_curve(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if args.ablation in ("n", "sigma-q") and args.d is None:
        # small default instance so the curve finishes quickly
        cfg.d, cfg.k = 64, 24
        if args.sigma_q is None:
            cfg.sigma_q = None
    spec_p, spec_q = cfg.validate()
    out = cfg.out or "curve.csv"
    if args.ablation == "sqrt-d":
        dims = [int(v) for v in _curve_values(args, [64, 256, 1024, 4096])]
        rows = sqrt_d_curve(dims, sigma=cfg.sigma_p, tol=cfg.tol)
    elif args.ablation == "k":
        d = cfg.d if args.d is not None else 784
        defaults = [0, d // 4, 3 * d // 8, d // 2 - 8, d // 2 - 4]
        k_values = [int(v) for v in _curve_values(args, defaults)]
        rows = ablation_k(d, cfg.sigma_p, k_values, args.pa, args.qa, tol=cfg.tol)
    elif args.ablation == "n":
        if args.input:
            records = list(parse_counts(args.input))
            if not records:
                raise ValueError(f"no valid count records in {args.input}")
        else:
            records = _synth_records(cfg, spec_p, spec_q, 10, linear=False)
        n_values = [int(v) for v in
                    _curve_values(args, [50, 100, 1000, 10_000, 50_000])]
        rows = ablation_n(records, n_values, alpha=cfg.alpha, tol=cfg.tol,
                          workers=cfg.workers)
    else:
        scale = cfg.sigma_p / 0.5
        values = _curve_values(args, [0.4 * scale, 0.5 * scale, 0.6 * scale])
        balls = [
            BallClassifier(center=(0.0,) * cfg.d,
                           threshold=float(radial_quantile(spec_p, p)))
            for p in (0.7, 0.85, 0.95, 0.99)
        ]
        rows = ablation_sigma_q(balls, spec_p, values, n_samples=cfg.n_samples,
                                alpha=cfg.alpha, seed=cfg.seed, tol=cfg.tol)
    emit_curve(rows, out)
    print(f"wrote {len(rows)} curve rows to {out}")
    return 0


def _cmd_table(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    out = cfg.out or ("table.md" if args.format == "markdown" else "table.csv")
    runs = []
    for path in args.results:
        if not Path(path).exists():
            raise ValueError(f"results file not found: {path}")
        runs.append(parse_results(path))
    emit_table(runs, cfg.grid, args.format, out)
    print(f"wrote table over {len(runs)} run(s) to {out}")
    return 0


_COMMANDS = {
    "certify": _cmd_certify,
    "synth": _cmd_synth,
    "curve": _cmd_curve,
    "table": _cmd_table,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except NumericFailure as exc:
        print(f"{_NUMERIC_PREFIX} {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"{_NUMERIC_PREFIX} {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"{_VALIDATION_PREFIX} {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
