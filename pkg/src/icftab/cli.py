"""Umbrella command line: gen, detect, encode, train, search, report.

Exit codes: 0 on success, 2 on configuration errors (including argparse
failures), 3 on data errors. Heavy imports (torch) stay inside the
subcommands that need them so data-only commands start fast.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, DataError

log = logging.getLogger("icftab")


def _split_arg(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split must be three comma-separated fractions")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def _load_split(args):
    from .data import load_csv, split_dataset

    ds = load_csv(args.data, args.schema)
    return split_dataset(ds, args.split, args.split_seed if args.split_seed is not None else args.seed)


def _cmd_gen(args) -> int:
    from .data import save_csv
    from .synth import gen_nonsmooth_regression, gen_planted_icf

    if args.generator == "planted":
        ds = gen_planted_icf(args.n, args.k, args.d_noise, args.flip_prob, args.seed)
    else:
        ds = gen_nonsmooth_regression(args.n, args.frequency, args.noise_std, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_suffix(".csv")
    schema_path = out.with_suffix(".schema.json")
    save_csv(ds, csv_path, schema_path)
    log.info("wrote %s and %s (%d rows)", csv_path, schema_path, ds.n_rows)
    print(csv_path)
    print(schema_path)
    return 0


def _cmd_detect(args) -> int:
    from .icf import IcfConfig, run_icf

    ds = _load_split(args)
    cfg = IcfConfig(
        test=args.test,
        chi_thresh=args.chi_thresh,
        anova_thresh=args.anova_thresh,
        mi_thresh=args.mi_thresh,
        min_cardinality=args.min_cardinality,
        max_cardinality=args.max_cardinality,
        auto_low_card=args.auto_low_card,
    )
    report = run_icf(ds, cfg)
    Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    log.info("flagged columns: %s", report.icf_indices)
    print(args.out)
    return 0


def _cmd_encode(args) -> int:
    from .encoding import CfdEncoder, write_tensor
    from .icf import IcfReport

    ds = _load_split(args)
    report = IcfReport.load(args.icf_report)
    enc = CfdEncoder(append_raw=args.append_raw).fit(ds, set(report.icf_indices))
    tensor = enc.transform(ds.X)
    write_tensor(args.out, tensor)
    log.info("encoded %d rows at depth M=%d", ds.n_rows, tensor.M)
    print(args.out)
    return 0


def _cmd_train(args) -> int:
    import numpy as np

    from .search import record_to_dict, run_trial, sample_hyperparams

    ds = _load_split(args)
    rng = np.random.default_rng(args.seed)
    sample = sample_hyperparams(rng, args.model, ds.task, combined_mode=args.combined_mode)
    record = run_trial(ds, sample, args.model, 0, snapshot_path=args.save_model)
    Path(args.out).write_text(json.dumps(record_to_dict(record), indent=2) + "\n", encoding="utf-8")
    log.info(
        "trial %s: val=%s test=%s (%d epochs, %s)",
        record.status, record.val_criterion, record.test_metric,
        record.epochs_run, record.stop_reason,
    )
    if args.save_model and record.status == "completed":
        log.info("snapshot written to %s", args.save_model)
    print(args.out)
    return 0


def _cmd_search(args) -> int:
    from .search import run_search

    ds = _load_split(args)
    records = run_search(
        ds,
        args.model,
        runs=args.runs,
        seed=args.seed,
        out_path=args.out,
        combined_mode=args.combined_mode,
        workers=args.workers,
    )
    done = sum(r.status == "completed" for r in records)
    log.info("search finished: %d/%d completed trials -> %s", done, len(records), args.out)
    print(args.out)
    return 0


def _cmd_report(args) -> int:
    from .report import build_report, render_plots, write_report
    from .search import read_records

    records = []
    for path in args.records:
        records.extend(read_records(path))
    if not records:
        raise DataError("no records found in the given files")
    report = build_report(records, args.task, n_sims=args.sims, k_top=args.top_k, seed=args.seed)
    written = write_report(report, args.out_dir)
    if args.plot:
        written += render_plots(report, args.out_dir)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icf-tab",
        description="Implicitly-categorical feature detection and Fourier "
        "embeddings for tabular deep learning: data generation, detection, "
        "encoding, training, random search, and reporting.",
    )
    parser.add_argument("--seed", type=int, default=0, help="global seed")
    parser.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    parser.add_argument("--log-level", default="INFO", help="logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit a synthetic CSV + schema pair")
    gsub = p.add_subparsers(dest="generator", required=True)
    g = gsub.add_parser("planted", help="classification data with a planted categorical column")
    g.add_argument("--n", type=int, default=4000)
    g.add_argument("--k", type=int, default=20)
    g.add_argument("--d-noise", type=int, default=4)
    g.add_argument("--flip-prob", type=float, default=0.1)
    g.add_argument("--out", required=True, help="output path prefix")
    g.set_defaults(func=_cmd_gen)
    g = gsub.add_parser("nonsmooth", help="high-frequency 1-D regression data")
    g.add_argument("--n", type=int, default=4000)
    g.add_argument("--frequency", type=float, default=20.0)
    g.add_argument("--noise-std", type=float, default=0.05)
    g.add_argument("--out", required=True, help="output path prefix")
    g.set_defaults(func=_cmd_gen)

    def add_data_args(p):
        p.add_argument("--data", required=True, help="CSV file")
        p.add_argument("--schema", required=True, help="JSON schema sidecar")
        p.add_argument("--split", type=_split_arg, default=(0.6, 0.2, 0.2))
        p.add_argument("--split-seed", type=int, default=None, help="defaults to --seed")

    p = sub.add_parser("detect", help="run implicitly-categorical feature detection")
    add_data_args(p)
    p.add_argument("--test", default="chi2", choices=["chi2", "anova", "mutual_info"])
    p.add_argument("--chi-thresh", type=float, default=1e-3)
    p.add_argument("--anova-thresh", type=float, default=1e-3)
    p.add_argument("--mi-thresh", type=float, default=1.25)
    p.add_argument("--min-cardinality", type=int, default=10)
    p.add_argument("--max-cardinality", type=int, default=5000)
    p.add_argument("--auto-low-card", action="store_true")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("encode", help="encode a dataset as a channel tensor file")
    add_data_args(p)
    p.add_argument("--icf-report", required=True, help="detection report JSON")
    p.add_argument("--append-raw", action="store_true",
                   help="prepend the standardized raw value as channel 0")
    p.add_argument("--out", required=True, help="binary tensor path")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("train", help="run a single sampled trial")
    add_data_args(p)
    p.add_argument("--model", default="mlp", choices=["mlp", "resnet", "mlp-fc", "resnet-fc"])
    p.add_argument("--combined-mode", action="store_true")
    p.add_argument("--out", required=True, help="trial record JSON path")
    p.add_argument("--save-model", default=None, help="optional snapshot path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("search", help="random hyperparameter search")
    add_data_args(p)
    p.add_argument("--model", required=True, choices=["mlp", "resnet", "mlp-fc", "resnet-fc"])
    p.add_argument("--runs", type=int, default=150)
    p.add_argument("--out", required=True, help="records JSONL path")
    p.add_argument("--combined-mode", action="store_true",
                   help="one-hot detected columns and embed the rest in one pass")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("report", help="aggregate records into evaluation artifacts")
    p.add_argument("--records", nargs="+", required=True, help="one or more JSONL files")
    p.add_argument("--task", required=True, choices=["classification", "regression"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sims", type=int, default=15)
    p.add_argument("--top-k", type=int, default=8)
    p.add_argument("--plot", action="store_true", help="also render PNG figures")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))
    try:
        return args.func(args)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except DataError as exc:
        log.error("data error: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
