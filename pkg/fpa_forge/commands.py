"""Subcommand handlers: turn parsed options into module calls and files."""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import Dict, List

import pandas as pd

from fpa_forge.analysis.report import metric_report
from fpa_forge.analysis.surrogate import (
    encode_matrix,
    evaluate_fpa,
    fit_encoder,
    load_surrogate,
    save_surrogate,
    train,
)
from fpa_forge.config import (
    campaign_from_dict,
    experiment_from_dict,
    load_yaml,
    parse_duration,
    resolve_seed,
)
from fpa_forge.core.capture import write_pcap
from fpa_forge.craft.campaign import craft_campaign
from fpa_forge.craft.live import LiveEndpoint, live_send
from fpa_forge.errors import ConfigError, ModelError
from fpa_forge.features.extract import extract, extract_pcap, read_feature_csv, write_feature_csv
from fpa_forge.features.schema import BY_NAME, profile_columns
from fpa_forge.soc.experiment import PRESETS, run_experiment, write_results_csv

logger = logging.getLogger(__name__)

LABEL_COLUMN = "Attack_type"


def _config(path) -> Dict:
    return load_yaml(path) if path else {}


def _echo(report: Dict) -> None:
    print(json.dumps(report, indent=2, default=str))


def cmd_craft(args: argparse.Namespace) -> int:
    data = _config(args.config)
    seed = resolve_seed(args.seed, data)
    spec = campaign_from_dict(data)
    result = craft_campaign(spec, seed=seed, start=args.start)
    written = write_pcap(result["frames"], args.out)
    if args.csv:
        records = extract(result["frames"]).records
        write_feature_csv(records, args.csv, args.profile, args.label)
    summary = dict(result["summary"], frames=written, seed=seed, pcap=str(args.out))
    _echo(summary)
    return 0


def _endpoint(args: argparse.Namespace) -> LiveEndpoint:
    if args.public_broker:
        return LiveEndpoint.public(args.public_broker, opt_in=True, timeout=args.timeout)
    if not args.host:
        raise ConfigError("live-send needs --host or --public-broker")
    return LiveEndpoint(args.host, args.port, args.timeout)


def cmd_live_send(args: argparse.Namespace) -> int:
    data = _config(args.config)
    seed = resolve_seed(args.seed, data)
    report = live_send(campaign_from_dict(data), _endpoint(args), seed=seed, capture_path=args.capture)
    if args.capture and args.csv:
        write_feature_csv(extract_pcap(args.capture).records, args.csv, args.profile, args.label)
    _echo(report)
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    result = extract_pcap(args.input)
    rows = write_feature_csv(result.records, args.out, args.profile, args.label)
    print(f"{rows} rows written to {args.out} ({result.skipped} frames skipped)")
    return 0


def csv_floats(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None


def cmd_simulate(args: argparse.Namespace) -> int:
    data = _config(args.config)
    if args.preset:
        data["preset"] = args.preset
    overrides = {
        "mode": args.mode,
        "eta": args.eta,
        "mu": args.budget,
        "rho": args.rho,
        "fp": args.fp,
        "horizon": args.horizon,
        "repeats": args.repeats,
        "servers": args.servers,
        "pairing": args.pairing,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["seed"] = resolve_seed(args.seed, data)
    if args.rho is not None and "mode" not in data and "preset" not in data:
        data["mode"] = "budget_sweep"
    cfg = experiment_from_dict(data)
    result = run_experiment(cfg, max_workers=args.workers)
    table = result["table"]
    write_results_csv(table, args.out)
    print(table.to_string(index=False))
    return 0


def _named_paths(values: List[str]) -> Dict[str, Path]:
    named = {}
    for value in values:
        name, sep, path = value.partition("=")
        if not sep:
            name, path = Path(value).stem, value
        named[name] = Path(path)
    return named


def _profile_subset(df: pd.DataFrame, profile: str) -> List[str]:
    return [c for c in profile_columns(profile) if c in df.columns]


def cmd_analyze(args: argparse.Namespace) -> int:
    reference = read_feature_csv(args.reference)
    columns = _profile_subset(reference, args.profile)
    classes = {name: read_feature_csv(path) for name, path in _named_paths(args.crafted).items()}
    result = metric_report(reference, classes, columns, args.mode, args.kl_components, resolve_seed(args.seed))
    result["table"].to_csv(args.out, index=False, lineterminator="\n")
    logger.info("Metric report over %d encoded dimensions written to %s", result["dimension"], args.out)
    print(result["table"].to_string(index=False))
    return 0


def _split_columns(columns: List[str]):
    categorical = [c for c in columns if c in BY_NAME and not BY_NAME[c].numeric and c != "frame.time"]
    numeric = [c for c in columns if c in BY_NAME and BY_NAME[c].numeric]
    return categorical, numeric


def cmd_surrogate_fit(args: argparse.Namespace) -> int:
    df = read_feature_csv(args.train)
    if LABEL_COLUMN not in df:
        raise ModelError(f"{args.train} has no {LABEL_COLUMN} column")
    categorical, numeric = _split_columns(_profile_subset(df, args.profile))
    vocab = fit_encoder(df, categorical, numeric, mode=args.encoder)
    X = encode_matrix(vocab, df)
    model = train(X, df[LABEL_COLUMN].astype(str), args.epochs, args.learning_rate, resolve_seed(args.seed))
    save_surrogate(args.out, model, vocab)
    line = f"{len(model.labels)} classes, dimension {model.dim}"
    if model.loss_history:
        line += f", final loss {model.loss_history[-1]:.4f}"
    print(line)
    return 0


def cmd_surrogate_eval(args: argparse.Namespace) -> int:
    model, vocab = load_surrogate(args.model)
    if vocab is None:
        raise ModelError(f"{args.model} carries no encoder")
    report = evaluate_fpa(model, vocab, read_feature_csv(args.crafted), args.benign_label)
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, default=str) + "\n", encoding="utf-8")
    _echo(report)
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    from fpa_forge.plots import plot_results

    for path in plot_results(args.csv_path):
        print(f"Created: {path}")
    return 0


def duration(value: str) -> float:
    try:
        return parse_duration(value)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def preset(value: str) -> str:
    if value not in PRESETS:
        raise argparse.ArgumentTypeError(f"choose from {', '.join(PRESETS)}")
    return value

