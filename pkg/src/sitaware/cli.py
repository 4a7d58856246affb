"""Command-line front end; one subcommand per pipeline stage.

Exit codes: 0 success, 1 other module error, 2 missing input file or bad
usage, 3 validation, parse or schema failure, 4 training divergence.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import ingest, meta, nn, plots, preprocess, score, search
from .errors import ParseError, SchemaError, SitawareError, TrainingDivergedError, ValidationError
from .fileio import (
    atomic_write_text,
    comment_header,
    dumps_json,
    provenance,
    read_json,
    write_json,
)

log = logging.getLogger("sitaware")

SEED_ENV = "SITAWARE_SEED"
DEFAULT_SEED = 42

EXIT_OK, EXIT_ERROR, EXIT_MISSING, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2, 3, 4


class MissingInput(Exception):
    pass


def default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    log.info("default seed overridden by %s=%s", SEED_ENV, raw)
    return int(raw)


def _ints(text):
    text = text.strip()
    if text in ("", "0", "none"):
        return ()
    return tuple(int(t) for t in text.split(","))


def _floats(text):
    return tuple(float(t) for t in text.split(","))


def _grid(text):
    lo, sep, hi = text.partition("..")
    if not sep:
        return _ints(text)
    return tuple(range(int(lo), int(hi) + 1))


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise MissingInput(f"input file not found: {p}")


def _load_dataset(path):
    """Dataset from a ``prep`` JSON output or a plain CSV."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        obj = json.loads(text)
        return preprocess.from_dict(obj.get("dataset", obj))
    return preprocess.parse_csv(text)


def _write_csv(path, meta_block, header, rows):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, comment_header(meta_block) + buf.getvalue())


# --- commands ---------------------------------------------------------------


def cmd_ingest(args):
    _require(args.inp)
    table = ingest.load_report_table(args.inp)
    out = {"metadata": provenance("ingest", args.seed, {"in": args.inp})}
    out.update(ingest.to_dict(table))
    write_json(args.out, out)
    log.info("ingested %d rows x %d indicators", len(table.rows), len(table.columns))


def _meta_outputs(args, kind, estimates, extra, inputs, options):
    result = meta.pool(estimates)
    pdata = meta.plot_data(estimates, result, args.ci)
    md = provenance(kind, args.seed, inputs, options)
    out = {
        "metadata": md,
        **extra,
        "ci_level": args.ci,
        "estimates": [{"study_id": e.study_id, "effect": e.effect, "variance": e.variance} for e in estimates],
        "pooling": result.to_dict(),
        "plot_data": pdata.to_dict(),
    }
    write_json(args.out, out)
    if args.plots:
        _emit_svgs(Path(args.plots), out)
    log.info(
        "k=%d Q=%.4g I2=%.3f tau2=%.4g common=%.6g random=%.6g",
        len(estimates), result.Q, result.I2, result.tau2, result.pooled_common, result.pooled_random,
    )


def cmd_meta_two_arm(args):
    _require(args.table)
    arms = [a.strip() for a in args.arms.split(",")]
    if len(arms) != 2:
        raise ValidationError([ingest.Violation(None, "arms", "need exactly two columns C1,C2")])
    table = ingest.load_report_table(args.table)
    estimates = meta.two_arm_estimates(table, *arms)
    _meta_outputs(
        args, "meta-two-arm", estimates,
        {"analysis": "two-arm", "arms": arms, "effect_measure": "log count ratio"},
        {"table": args.table}, {"arms": arms, "ci": args.ci},
    )


def cmd_meta_pooled(args):
    _require(args.table, args.bias_rates)
    table = ingest.load_report_table(args.table)
    rates = meta.parse_bias_rates(Path(args.bias_rates).read_text(encoding="utf-8"))
    estimates = meta.single_source_estimates(table, args.col, rates)
    _meta_outputs(
        args, "meta-pooled", estimates,
        {"analysis": "single-source", "column": args.col, "effect_measure": "count"},
        {"table": args.table, "bias_rates": args.bias_rates}, {"col": args.col, "ci": args.ci},
    )


def cmd_prep(args):
    _require(args.table)
    table = ingest.load_report_table(args.table)
    columns = [c.strip() for c in args.columns.split(",")] if args.columns else list(table.columns)
    raw = preprocess.from_report_table(table, columns)
    scaler = preprocess.minmax_fit(raw)
    scaled = preprocess.minmax_apply(scaler, raw)
    coeffs = _floats(args.coeffs) if args.coeffs else preprocess.DEFAULT_COEFFICIENTS
    data = preprocess.synthesize_target(scaled, coeffs, args.noise_sd, args.seed)
    target = {"name": data.target_name, "coefficients": list(coeffs), "noise_sd": args.noise_sd, "seed": args.seed}
    md = provenance("prep", args.seed, {"table": args.table}, {"columns": columns, "target": target})
    if str(args.out).endswith(".csv"):
        md["scaler"] = scaler.to_dict()
        atomic_write_text(args.out, comment_header(md) + preprocess.to_csv(data))
    else:
        write_json(
            args.out,
            {"metadata": md, "target": target, "scaler": scaler.to_dict(), "dataset": preprocess.to_dict(data)},
        )


def cmd_train(args):
    _require(args.data)
    data = _load_dataset(args.data)
    config = nn.NetConfig(
        n_inputs=data.p,
        hidden_sizes=_ints(args.hidden),
        threshold=args.threshold,
        step_max=args.stepmax,
        seed=args.seed,
        algorithm=args.algorithm,
    )
    result = nn.train(config, data)
    if not result.converged:
        log.warning("stopped at step_max=%d with reached threshold %.3g", config.step_max, result.reached_threshold)
    out = {"metadata": provenance("train", args.seed, {"data": args.data}, {"hidden": list(config.hidden_sizes)})}
    out.update(nn.model_to_dict(result, data.feature_names, data.target_name))
    out["result_matrix"] = dict(
        zip(
            ["error", "reached.threshold", "steps", *nn.weight_names(config, data.feature_names, [data.target_name])],
            nn.result_matrix(result).tolist(),
        )
    )
    write_json(args.out, out)
    log.info("error=%.6g reached=%.3g steps=%d converged=%s", result.error, result.reached_threshold, result.steps, result.converged)


def cmd_search(args):
    _require(args.data)
    data = _load_dataset(args.data)
    candidates = [_ints(g) for g in args.depths.split("|")]
    params = search.TrainParams(threshold=args.threshold, step_max=args.stepmax)
    table = search.compare_architectures(data, candidates, args.restarts, args.seed, params, args.jobs)
    best = search.select_best(table)
    out = {
        "metadata": provenance(
            "search", args.seed, {"data": args.data},
            {"depths": args.depths, "restarts": args.restarts, "grid": args.grid},
        ),
        "comparison": table.to_dict(),
        "comparison_text": table.to_text(),
        "selected": best.to_dict(),
    }
    sys.stdout.write(table.to_text())
    if args.grid:
        grid = _grid(args.grid)
        sizes, trace = search.stepwise_refine(
            data, len(best.hidden_sizes), grid, args.seed, params, args.restarts, jobs=args.jobs
        )
        out["refinement"] = {
            "depth": len(best.hidden_sizes),
            "grid": list(grid),
            "best_sizes": list(sizes),
            "trace": [t.to_dict() for t in trace],
        }
        log.info("refined sizes: %s", sizes)
    write_json(args.out, out)


def cmd_gw(args):
    _require(args.model, args.data)
    result, names, _ = nn.model_from_dict(read_json(args.model))
    data = _load_dataset(args.data)
    gw = nn.generalized_weights(result.network, data)
    header = list(names or data.feature_names)
    md = provenance("gw", result.network.config.seed, {"model": args.model, "data": args.data})
    _write_csv(args.out, md, header, [[repr(float(v)) for v in row] for row in gw])


def cmd_score(args):
    _require(args.matrix, args.weights)
    matrix = ingest.parse_parameter_matrix(read_json(args.matrix))
    weights = score.SituationWeights.from_dict(read_json(args.weights))
    value = score.situation_score(matrix, weights)
    write_json(
        args.out,
        {
            "metadata": provenance("score", args.seed, {"matrix": args.matrix, "weights": args.weights}),
            "score": value,
            "bias": weights.bias,
            "contributions": (weights.omega * matrix.flat()).reshape(5, 5).tolist(),
            "factor_labels": list(matrix.factor_labels),
        },
    )
    sys.stdout.write(f"{value!r}\n")


def _emit_svgs(out_dir, doc, meta_block=None):
    pdata = meta.PlotData.from_dict(doc["plot_data"])
    pooled = doc["pooling"]["pooled_common"]
    label = doc.get("effect_measure", "Effect")
    md = dumps_json(meta_block or doc["metadata"]).strip()
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "forest.svg", plots.forest_svg(pdata, effect_label=label, metadata=md))
    atomic_write_text(out_dir / "funnel.svg", plots.funnel_svg(pdata, pooled, effect_label=label, metadata=md))
    atomic_write_text(out_dir / "residuals.svg", plots.residual_svg(pdata, metadata=md))


def cmd_report(args):
    _require(args.meta)
    doc = read_json(args.meta)
    md = provenance("report", doc.get("metadata", {}).get("seed", args.seed), {"meta": args.meta}, {"format": args.format})
    out_dir = Path(args.out_dir)
    if args.format == "svg":
        _emit_svgs(out_dir, doc, md)
        return
    pdata = meta.PlotData.from_dict(doc["plot_data"])
    fields = ["study_id", "effect", "ci_low", "ci_high", "weight_common", "weight_random"]
    _write_csv(
        out_dir / "forest.csv", md, fields,
        [[r.study_id, *(repr(float(getattr(r, f))) for f in fields[1:])] for r in pdata.forest_rows],
    )
    labels = [r.study_id for r in pdata.forest_rows[: len(pdata.residuals)]]
    _write_csv(
        out_dir / "funnel.csv", md, ["study_id", "effect", "standard_error"],
        [[s, repr(float(e)), repr(float(se))] for s, (e, se) in zip(labels, pdata.funnel_points)],
    )
    _write_csv(
        out_dir / "residuals.csv", md, ["study_id", "standardized_residual"],
        [[s, repr(float(r))] for s, r in zip(labels, pdata.residuals)],
    )
    pool = doc["pooling"]
    keys = [k for k in pool if not isinstance(pool[k], list)]
    _write_csv(out_dir / "summary.csv", md, ["statistic", "value"], [[k, repr(pool[k])] for k in keys])


# --- parser -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="sitaware", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=None, help=f"RNG seed (default {DEFAULT_SEED}, env {SEED_ENV})")
        return sp

    sp = add("ingest", cmd_ingest, "validate a report CSV and write canonical JSON")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)

    sp = add("meta-two-arm", cmd_meta_two_arm, "pool log count ratios of two indicator columns")
    sp.add_argument("--table", required=True)
    sp.add_argument("--arms", required=True, help="C1,C2")
    sp.add_argument("--ci", type=float, default=0.95)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plots", help="directory for forest/funnel/residual SVGs")

    sp = add("meta-pooled", cmd_meta_pooled, "pool one indicator using per-source bias rates")
    sp.add_argument("--table", required=True)
    sp.add_argument("--col", required=True)
    sp.add_argument("--bias-rates", required=True)
    sp.add_argument("--ci", type=float, default=0.95)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plots")

    sp = add("prep", cmd_prep, "min-max scale a report table and add the synthetic target")
    sp.add_argument("--table", required=True)
    sp.add_argument("--columns", help="indicator columns to use (default: all)")
    sp.add_argument("--coeffs", help="comma-separated target coefficients")
    sp.add_argument("--noise-sd", type=float, default=preprocess.DEFAULT_NOISE_SD)
    sp.add_argument("--out", required=True, help=".json (default layout) or .csv")

    sp = add("train", cmd_train, "train one network")
    sp.add_argument("--data", required=True)
    sp.add_argument("--hidden", default="10,5")
    sp.add_argument("--threshold", type=float, default=0.01)
    sp.add_argument("--stepmax", type=int, default=100000)
    sp.add_argument("--algorithm", choices=nn.ALGORITHMS, default="rprop+")
    sp.add_argument("--out", required=True)

    sp = add("search", cmd_search, "compare architectures and refine layer sizes")
    sp.add_argument("--data", required=True)
    sp.add_argument("--depths", default="5|10,5|4,5,3", help='candidates, e.g. "5|10,5|4,5,3"')
    sp.add_argument("--restarts", type=int, default=search.DEFAULT_RESTARTS)
    sp.add_argument("--grid", help="refinement grid lo..hi (omit to skip refinement)")
    sp.add_argument("--threshold", type=float, default=0.01)
    sp.add_argument("--stepmax", type=int, default=100000)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", required=True)

    sp = add("gw", cmd_gw, "export generalized weights of a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)

    sp = add("score", cmd_score, "compute the linear situation score")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--out", required=True)

    sp = add("report", cmd_report, "render plots or CSV tables from a meta-analysis JSON")
    sp.add_argument("--meta", required=True)
    sp.add_argument("--format", choices=("svg", "csv"), default="svg")
    sp.add_argument("--out-dir", required=True)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is None:
        args.seed = default_seed()
    try:
        args.func(args)
    except MissingInput as exc:
        log.error("%s", exc)
        return EXIT_MISSING
    except ValidationError as exc:
        log.error("validation failed:")
        for v in exc.violations:
            sys.stderr.write(f"  {v}\n")
        return EXIT_INVALID
    except (ParseError, SchemaError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    except TrainingDivergedError as exc:
        log.error("training diverged at step %d", exc.step)
        return EXIT_DIVERGED
    except (SitawareError, ValueError, KeyError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
