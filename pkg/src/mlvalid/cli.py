"""Command-line entry point: ``mlvalid <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 schema mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import artifact, report
from .bishop import DensityBank
from .core import DataError, Quantizer, Schema, SchemaMismatch, SplitSpec, ingest_csv, iter_csv_rows, split
from .knn import KnnIndex
from .predictor import fit_predict_builtin, iter_prediction_rows, load_external
from .prob import ProbConfig, ProbValidator
from .synth import write_synth

log = logging.getLogger("mlvalid")

EXIT_USAGE, EXIT_DATA, EXIT_SCHEMA = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _weights(text: str) -> list[float]:
    try:
        w = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("weights must be comma-separated numbers") from None
    if any(not v > 0 for v in w):
        raise argparse.ArgumentTypeError("weights must be positive")
    return w


GLOBAL_DEFAULTS = {
    "schema": None,
    "seed": 0,
    "mode": None,
    "threshold_validity": None,
    "threshold_error": None,
    "bins": None,
    "k": None,
    "min_count": None,
    "weights": None,
    "verbose": False,
}


def _common() -> argparse.ArgumentParser:
    # defaults are suppressed so flags given before the subcommand survive
    # the subparser's own parse; main() fills them in afterwards
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("global options")
    g.add_argument("--schema", type=Path, help="schema JSON document")
    g.add_argument("--seed", type=int)
    g.add_argument("--mode", choices=["simplified", "online"])
    g.add_argument("--threshold-validity", type=float)
    g.add_argument("--threshold-error", type=float)
    g.add_argument("--bins", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--min-count", type=int)
    g.add_argument("--weights", type=_weights, help="per-output weights, e.g. 3,1")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="mlvalid", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a Gaussian-cluster CSV")
    p.add_argument("--spec", type=Path, required=True, help="cluster spec JSON")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--schema-out", type=Path)

    p = sub.add_parser("split", parents=[common], help="seeded train/test split of a CSV")
    p.add_argument("data", type=Path)
    p.add_argument("--fraction", type=float, default=0.5, help="train fraction")
    p.add_argument("--train-out", type=Path, required=True)
    p.add_argument("--test-out", type=Path, required=True)

    p = sub.add_parser("predict", parents=[common], help="built-in 1-NN predictions")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("data", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a validator on training data")
    p.add_argument("train", type=Path)
    p.add_argument("--validator", choices=["prob", "knn", "bishop"], default="prob")
    p.add_argument("--predictions", type=Path, help="model predictions on the training rows "
                   "(default: the training outputs)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--aggregation", choices=["sum", "median", "min-quality"], default="sum")
    p.add_argument("--q-min", type=float, default=0.0)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--window", type=int)
    p.add_argument("--padding", type=float, default=0.01)
    p.add_argument("--condition-on", choices=["prediction", "truth"], default="prediction")
    p.add_argument("--variant", choices=["cell", "global"], default="cell", help="kNN neighbour pool")

    p = sub.add_parser("validate", parents=[common], help="stream validity reports as JSON lines")
    p.add_argument("artifact", type=Path)
    p.add_argument("data", type=Path)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")

    p = sub.add_parser("report", parents=[common], help="evaluate a validity stream")
    p.add_argument("data", type=Path, help="ground-truth CSV")
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--validity", type=Path, required=True, help="JSON-lines stream from validate")
    p.add_argument("--artifact", type=Path, help="validator artifact (supplies class counts)")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")
    return parser


def _schema(args) -> Schema:
    if args.schema is None:
        raise _UsageError("--schema is required for this command")
    return Schema.load(args.schema)


class _UsageError(Exception):
    pass


def cmd_synth(args) -> None:
    ds = write_synth(args.spec, args.out, args.seed, args.schema_out)
    log.info("wrote %d rows to %s", len(ds), args.out)


def cmd_split(args) -> None:
    ds = ingest_csv(args.data, _schema(args))
    train, test = split(ds, SplitSpec(args.fraction, args.seed))
    train.write_csv(args.train_out)
    test.write_csv(args.test_out)
    print(f"{len(ds)} rows ({ds.dropped} dropped): train {len(train)}, test {len(test)}")


def cmd_predict(args) -> None:
    schema = _schema(args)
    preds = fit_predict_builtin(ingest_csv(args.train, schema), ingest_csv(args.data, schema))
    preds.write_csv(args.out)


def fit_options(args) -> dict:
    """Every option that shaped the artifact, defaults included."""
    opts = {
        "validator": args.validator,
        "seed": args.seed,
        "threshold_validity": 0.6 if args.threshold_validity is None else args.threshold_validity,
        "weights": args.weights,
        "predictions": None if args.predictions is None else args.predictions.name,
    }
    if args.validator == "prob":
        opts.update(
            mode=args.mode or "simplified",
            bins=args.bins or 32,
            min_count=5 if args.min_count is None else args.min_count,
            aggregation=args.aggregation,
            q_min=args.q_min,
            smoothing=args.smoothing,
            window=args.window,
            padding=args.padding,
            condition_on=args.condition_on,
        )
    elif args.validator == "knn":
        opts.update(k=args.k, variant=args.variant)
    else:
        opts.update(bins=args.bins or 32, padding=args.padding)
    return opts


def cmd_fit(args) -> None:
    schema = _schema(args)
    train = ingest_csv(args.train, schema)
    preds = train.Y if args.predictions is None else load_external(args.predictions, train).values
    opts = fit_options(args)
    quantizer = Quantizer.from_schema(schema, np.vstack([train.Y, preds]))
    if args.validator == "prob":
        cfg = ProbConfig(bins=opts["bins"], padding=opts["padding"], min_count=opts["min_count"],
                         mode=opts["mode"], aggregation=opts["aggregation"], q_min=opts["q_min"],
                         threshold=opts["threshold_validity"], smoothing=opts["smoothing"],
                         window=opts["window"], condition_on=opts["condition_on"])
        v = ProbValidator.fit(train, preds, quantizer, cfg, args.weights)
    elif args.validator == "knn":
        v = KnnIndex.fit(train, preds, quantizer, args.k, args.variant,
                         threshold=opts["threshold_validity"], weights=args.weights)
        opts["k"] = v.k
    else:
        v = DensityBank.fit(train, opts["bins"], opts["padding"], threshold=opts["threshold_validity"])
    artifact.save(args.out, v, opts)
    fit_report = describe(v, args.out)
    report_path = args.out.with_name(args.out.stem + ".fit-report.json")
    report_path.write_text(artifact.dumps(fit_report))
    print(json.dumps(fit_report, indent=1, sort_keys=True))


def describe(v, path: Path) -> dict:
    """Cell occupancy, insufficient cells and storage size of a fitted validator."""
    out = {"artifact": path.name, "artifact_bytes": path.stat().st_size}
    if isinstance(v, ProbValidator):
        occ = [[v.gt.cell_count(j, k) for k in range(s)] for j, s in enumerate(v.gt.sizes)]
        out["cell_occupancy"] = occ
        out["insufficient_cells"] = [[k for k, c in enumerate(row) if c < v.config.min_count] for row in occ]
        out["stored_counts"] = int(sum(c.size for c in v.gt.counts))
    elif isinstance(v, KnnIndex):
        out["cell_occupancy"] = [[len(m) for m in ms] for ms in v._members]
        if v.variant == "cell":
            out["insufficient_cells"] = [
                [k for k, m in enumerate(ms) if len(m) < v.k or v.d_ref[j][k] is None]
                for j, ms in enumerate(v._members)
            ]
        out["stored_values"] = int(v.Z.size + v.cells.size)
        out["memory_note"] = "kNN index size grows linearly with the number of training rows"
    else:
        out["stored_counts"] = int(v.counts.size)
    return out


def cmd_validate(args) -> None:
    schema = _schema(args)
    v = artifact.load(args.artifact, args.threshold_validity, args.mode, args.weights)
    artifact.check_schema(v, schema.column_hash())
    n = schema.n_features
    rows = (vals for _, vals in iter_csv_rows(args.data, schema) if vals is not None)
    features = (vals[:n] for vals in rows)
    preds = iter_prediction_rows(args.predictions, schema.n_outputs)
    ctx = open(args.out, "w") if args.out else nullcontext(sys.stdout)
    with ctx as fh:
        count = artifact.stream_validate(v, features, preds, fh)
    log.info("validated %d rows", count)


def cmd_report(args) -> None:
    schema = _schema(args)
    ds = ingest_csv(args.data, schema)
    preds = load_external(args.predictions, ds).values
    with open(args.validity) as fh:
        validity = report.read_validity_stream(fh, schema.n_outputs)
    if len(validity) != len(ds):
        raise DataError(f"{len(validity)} validity records for {len(ds)} rows")
    if args.artifact is not None:
        v = artifact.load(args.artifact)
        artifact.check_schema(v, schema.column_hash())
        quantizer = v.quantizer if hasattr(v, "quantizer") else Quantizer.from_schema(schema, np.vstack([ds.Y, preds]))
    else:
        quantizer = Quantizer.from_schema(schema, np.vstack([ds.Y, preds]))
    tau_v = 0.6 if args.threshold_validity is None else args.threshold_validity
    tau_e = 0.1 if args.threshold_error is None else args.threshold_error
    summary = report.summarize(ds.Y, preds, validity, quantizer, tau_v, tau_e)
    report.write_report(args.out_dir, summary, ds.Y, preds, validity, quantizer, figures=not args.no_figures)
    print(report.format_table(summary))


COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "predict": cmd_predict,
    "fit": cmd_fit,
    "validate": cmd_validate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mlvalid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaMismatch as exc:
        print(f"mlvalid: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"mlvalid: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
