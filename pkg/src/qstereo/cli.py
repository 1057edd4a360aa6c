"""Command-line interface.

Subcommands compose module operations; no numeric logic lives here.
Exit codes: 0 success, 2 usage, 3 data/parse, 4 capacity, 5 solver
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import imaging, metrics, pbo, report, stereo
from .errors import (
    CapacityError,
    ParseError,
    SolverError,
    StructureError,
    UndefinedStatisticError,
)
from .imaging import DisparityMap
from .mrf import read_mrf
from .onehot import encode_one_hot, read_qubo_file, write_qubo_file
from .solve import solve_chain_dp, solve_exhaustive, solve_sa


def _parse_epsilon_rule(rule: str) -> float | None:
    if rule == "rel":
        return None
    if rule.startswith("abs:"):
        value = float(rule[4:])
        if not value > 0:
            raise ValueError("epsilon must be positive")
        return value
    raise ValueError(f"bad --epsilon-rule {rule!r}, expected 'rel' or 'abs:<v>'")


def _load_stereo_config(source: str | None) -> stereo.StereoConfig:
    if source is None or source == "middlebury":
        return stereo.middlebury_config()
    if source == "sintel":
        return stereo.sintel_config()
    return stereo.load_config(source)


def _load_estimate(path: str, scale: float) -> DisparityMap:
    if str(path).endswith(".f32"):
        return imaging.read_float_raster(path)
    return imaging.load_disparity(path, scale=scale)


# --- subcommands ---------------------------------------------------------------


def cmd_encode(args) -> int:
    m = read_mrf(args.mrf)
    if args.scheme == "onehot":
        q = encode_one_hot(m, epsilon=_parse_epsilon_rule(args.epsilon_rule), t=args.t)
    else:
        poly = pbo.encode_binary(m)
        if args.dump_poly:
            with open(args.dump_poly, "w", encoding="utf-8") as fh:
                fh.write(pbo.dump_polynomial(poly))
        q = pbo.pbo_to_qubo(pbo.quadratize(poly))
    write_qubo_file(q, args.out, comment=f"{args.scheme} encoding of {args.mrf}")
    print(f"wrote {args.out}: n={q.n} entries={len(q.entries)} offset={q.offset!r}")
    return 0


def cmd_solve(args) -> int:
    if (args.qubo is None) == (args.mrf is None):
        raise ValueError("pass exactly one of --qubo or --mrf")
    start = time.perf_counter()

    if args.solver == "chain-dp":
        if args.mrf is None:
            raise ValueError("--solver chain-dp operates on an MRF file (--mrf)")
        m = read_mrf(args.mrf)
        lab, e = solve_chain_dp(m)
        record = {
            "solver": "chain-dp",
            "labelling": [int(x) for x in lab],
            "best_energy": e,
            "elapsed_ms": (time.perf_counter() - start) * 1e3 if args.timing else None,
        }
    else:
        if args.qubo is None:
            raise ValueError(f"--solver {args.solver} operates on a QUBO file (--qubo)")
        q = read_qubo_file(args.qubo)
        if args.solver == "exhaustive":
            res = solve_exhaustive(q)
        else:
            beta = None
            if args.beta:
                parts = [float(x) for x in args.beta.split(",")]
                if len(parts) != 2:
                    raise ValueError("--beta expects 'start,end'")
                beta = (parts[0], parts[1])
            res = solve_sa(
                q, reads=args.reads, sweeps=args.sweeps, beta_range=beta, seed=args.seed
            )
        record = res.to_json_dict(include_timing=args.timing)
        record["solver"] = args.solver
        record["offset"] = q.offset
        record["best_energy_plus_offset"] = res.best_energy + q.offset

    text = json.dumps(record, sort_keys=True, indent=1) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_stereo(args) -> int:
    cfg = _load_stereo_config(args.config)
    if args.solver:
        cfg.solver.name = args.solver
    if args.seed is not None:
        cfg.solver.seed = args.seed
    if args.reads:
        cfg.solver.reads = args.reads
    if args.sweeps:
        cfg.solver.sweeps = args.sweeps
    if args.t is not None:
        cfg.rectifier.t = args.t
    cfg.validate()

    il = imaging.load_image(args.left)
    ir = imaging.load_image(args.right)
    start = time.perf_counter()
    result = stereo.stereo_match(il, ir, cfg, jobs=args.jobs)
    elapsed_ms = (time.perf_counter() - start) * 1e3

    imaging.save_disparity_pgm(args.out, result.disparity, scale=args.scale)
    imaging.write_float_raster(str(args.out) + ".f32", result.disparity)

    if args.energy_log:
        with open(args.energy_log, "w", encoding="utf-8") as fh:
            fh.write("level,bundle,energy\n")
            for li, level_energies in enumerate(result.bundle_energies):
                for bi, e in enumerate(level_energies):
                    fh.write(f"{li},{bi},{e!r}\n")

    if args.figure:
        report.render_disparity_figure(
            str(args.out) + ".png", result.disparity.values, title=str(args.out)
        )

    if args.gt:
        gt = imaging.load_disparity(args.gt, scale=args.gt_scale)
        record = metrics.metrics_record(
            metrics.rmse(result.disparity, gt),
            metrics.bpp(result.disparity, gt, delta=args.delta),
            int(gt.valid.sum()),
            stereo.config_hash(cfg),
            cfg.solver.name,
            elapsed_ms if args.timing else None,
        )
        text = metrics.dump_metrics(record)
        with open(str(args.out) + ".metrics.json", "w", encoding="utf-8") as fh:
            fh.write(text)
        sys.stdout.write(text)
    else:
        print(f"wrote {args.out} (+ .f32 sidecar)")
    return 0


def cmd_eval(args) -> int:
    est = _load_estimate(args.est, args.scale)
    gt = imaging.load_disparity(args.gt, scale=args.scale)
    record = metrics.metrics_record(
        metrics.rmse(est, gt),
        metrics.bpp(est, gt, delta=args.delta),
        int(gt.valid.sum()),
        "n/a",
        "n/a",
        None,
    )
    text = metrics.dump_metrics(record)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_stats(args) -> int:
    q = read_qubo_file(args.qubo)
    stats = metrics.graph_stats(q)
    print(f"{stats['nodes']}/{stats['edges']}")
    if args.json:
        print(json.dumps(stats, sort_keys=True, indent=1))
    return 0


_ABLATION_DEFAULT_GRIDS = {
    "regularizer": "nonlinear,linear,off",
    "filters": "all,no-bilateral,none",
    "levels": "all,drop:1",
    "t": "0,0.25,0.5,0.75,1,1.25,1.5",
}


def _apply_ablation(cfg: stereo.StereoConfig, which: str, setting: str) -> stereo.StereoConfig:
    if which == "regularizer":
        return stereo.with_overrides(cfg, regularizer=setting)
    if which == "filters":
        if setting == "all":
            return cfg
        if setting == "no-bilateral":
            return stereo.with_overrides(cfg, bilateral_filtering=False)
        if setting == "none":
            return stereo.with_overrides(
                cfg, bilateral_filtering=False, median_filtering=False
            )
        raise ValueError(f"unknown filters setting {setting!r}")
    if which == "levels":
        if setting == "all":
            return cfg
        if setting.startswith("drop:"):
            drop = int(setting[5:])
            if not 0 <= drop < len(cfg.levels) - 1:
                raise ValueError(f"cannot drop level {drop}")
            levels = [lv for i, lv in enumerate(cfg.levels) if i != drop]
            return stereo.with_overrides(cfg, levels=levels)
        raise ValueError(f"unknown levels setting {setting!r}")
    if which == "t":
        out = stereo.with_overrides(cfg)
        out.rectifier = stereo.RectifierConfig(cfg.rectifier.epsilon, float(setting))
        if out.solver.name == "chain-dp":
            # t only exists on the QUBO route
            out.solver = stereo.SolverConfig(
                "sa", cfg.solver.reads, cfg.solver.sweeps, cfg.solver.beta_range,
                cfg.solver.seed,
            )
        return out
    raise ValueError(f"unknown ablation {which!r}")


def cmd_ablate(args) -> int:
    base = _load_stereo_config(args.config)
    if args.solver:
        base.solver.name = args.solver
    if args.seed is not None:
        base.solver.seed = args.seed
    if args.reads:
        base.solver.reads = args.reads
    if args.sweeps:
        base.solver.sweeps = args.sweeps
    base.validate()
    il = imaging.load_image(args.left)
    ir = imaging.load_image(args.right)
    gt = imaging.load_disparity(args.gt, scale=args.gt_scale)

    grid = (args.grid or _ABLATION_DEFAULT_GRIDS[args.which]).split(",")
    rows = []
    for setting in grid:
        cfg = _apply_ablation(base, args.which, setting.strip()).validate()
        result = stereo.stereo_match(il, ir, cfg, jobs=args.jobs)
        rows.append(
            {
                "which": args.which,
                "setting": setting.strip(),
                "rmse": metrics.rmse(result.disparity, gt),
                "bpp": metrics.bpp(result.disparity, gt, delta=args.delta),
                "n_valid": int(gt.valid.sum()),
            }
        )
        print(f"{args.which}={setting.strip()}: rmse={rows[-1]['rmse']:.4f} "
              f"bpp={rows[-1]['bpp']:.2f}")

    report.write_sweep_csv(args.out_csv, rows)
    if not args.no_figure:
        figure_path = str(args.out_csv).rsplit(".", 1)[0] + ".png"
        report.render_sweep_figure(figure_path, rows, title=f"sweep over {args.which}")
        print(f"wrote {args.out_csv} and {figure_path}")
    else:
        print(f"wrote {args.out_csv}")
    return 0


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qstereo",
        description="MRF MAP inference as QUBO, with solvers and stereo matching",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode an MRF file as a QUBO file")
    p.add_argument("--mrf", required=True)
    p.add_argument("--scheme", choices=["onehot", "binary"], default="onehot")
    p.add_argument("--epsilon-rule", default="rel", help="'rel' or 'abs:<value>'")
    p.add_argument("--t", type=float, default=1.0, help="rectifier strength")
    p.add_argument("--dump-poly", help="binary scheme: write the polynomial dump here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="run a solver backend")
    p.add_argument("--qubo", help="QUBO file (exhaustive / sa)")
    p.add_argument("--mrf", help="MRF file (chain-dp)")
    p.add_argument("--solver", choices=["exhaustive", "sa", "chain-dp"], required=True)
    p.add_argument("--reads", type=int, default=500)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--beta", help="SA inverse-temperature range 'start,end'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", action="store_true", help="include elapsed_ms in the JSON")
    p.add_argument("--out", help="write the result JSON here as well")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stereo", help="coarse-to-fine stereo matching")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--config", help="config JSON, or 'middlebury' / 'sintel'")
    p.add_argument("--solver", choices=["chain-dp", "sa", "exhaustive"])
    p.add_argument("--reads", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--t", type=float, help="rectifier strength for QUBO solvers")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel bundle workers")
    p.add_argument("--scale", type=float, default=8.0, help="PGM disparity scale")
    p.add_argument("--gt", help="ground-truth PGM for inline metrics")
    p.add_argument("--gt-scale", type=float, default=8.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--energy-log", help="CSV of per-bundle optimal energies")
    p.add_argument("--figure", action="store_true", help="also render a PNG preview")
    p.add_argument("--timing", action="store_true")
    p.add_argument("--out", required=True, help="output 16-bit PGM path")
    p.set_defaults(func=cmd_stereo)

    p = sub.add_parser("eval", help="metrics between two disparity maps")
    p.add_argument("--est", required=True, help="estimate PGM or .f32 raster")
    p.add_argument("--gt", required=True)
    p.add_argument("--scale", type=float, default=8.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="QUBO problem-graph statistics")
    p.add_argument("--qubo", required=True)
    p.add_argument("--json", action="store_true", help="print the full record")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ablate", help="metric sweeps over pipeline variants")
    p.add_argument("--which", choices=["regularizer", "filters", "levels", "t"],
                   required=True)
    p.add_argument("--grid", help="comma-separated settings (defaults per --which)")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--gt-scale", type=float, default=8.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--config", help="config JSON, or 'middlebury' / 'sintel'")
    p.add_argument("--solver", choices=["chain-dp", "sa", "exhaustive"])
    p.add_argument("--reads", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out-csv", required=True)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (StructureError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except UndefinedStatisticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON input: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
