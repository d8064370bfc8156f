"""Command-line entry point: ``python -m fpa_forge <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from fpa_forge import commands
from fpa_forge.analysis.report import DISTANCE_MODES
from fpa_forge.analysis.surrogate import MODES as ENCODER_MODES
from fpa_forge.craft.live import PUBLIC_BROKERS
from fpa_forge.errors import ForgeError
from fpa_forge.features.schema import PROFILES
from fpa_forge.soc.experiment import MODES, PAIRINGS

logger = logging.getLogger("fpa_forge")

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


def _seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="random seed (default: config, $FPA_FORGE_SEED, 0)")


def _feature_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--profile", choices=sorted(PROFILES), default="full61", help="feature column subset")
    parser.add_argument("--label", default=None, help="Attack_type value to append (Attack_label derived)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpa_forge",
        description="Forge benign MQTT traffic that inflates NIDS false positives and measure the impact",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("craft", help="generate an attack campaign as a pcap")
    p.add_argument("--config", help="campaign YAML file")
    p.add_argument("--out", required=True, help="pcap to write")
    p.add_argument("--csv", help="also write extracted features here")
    p.add_argument("--start", type=float, default=0.0, help="timestamp of the first frame (epoch seconds)")
    _feature_output(p)
    _seed(p)
    p.set_defaults(handler=commands.cmd_craft)

    p = sub.add_parser("live-send", help="send a campaign to a real broker and verify PUBACKs")
    p.add_argument("--config", help="campaign YAML file")
    target = p.add_mutually_exclusive_group()
    target.add_argument("--host", help="broker hostname or IPv4 address")
    target.add_argument("--public-broker", choices=sorted(PUBLIC_BROKERS), help="named public test broker (opt-in)")
    p.add_argument("--port", type=int, default=1883)
    p.add_argument("--timeout", type=float, default=5.0, help="seconds to wait for CONNACK and each PUBACK")
    p.add_argument("--capture", help="pcap of the exchange")
    p.add_argument("--csv", help="features of the capture")
    _feature_output(p)
    _seed(p)
    p.set_defaults(handler=commands.cmd_live_send)

    p = sub.add_parser("extract", help="per-packet features from a pcap")
    p.add_argument("--in", dest="input", required=True, help="pcap to read")
    p.add_argument("--out", required=True, help="CSV to write")
    _feature_output(p)
    p.set_defaults(handler=commands.cmd_extract)

    p = sub.add_parser("simulate", help="SOC alert queue sweeps")
    p.add_argument("--config", help="experiment YAML file")
    p.add_argument("--preset", type=commands.preset, help="named sweep")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--eta", type=commands.csv_floats, help="alert arrival rates per hour, comma separated")
    p.add_argument("--budget", type=commands.csv_floats, help="analyst service rates per hour, comma separated")
    p.add_argument("--rho", type=float, help="traffic intensity for budget sweeps")
    p.add_argument("--fp", type=commands.csv_floats, help="false positive shares in percent, comma separated")
    p.add_argument("--horizon", type=commands.duration, help="e.g. 1h, 1d, 30m")
    p.add_argument("--repeats", type=int)
    p.add_argument("--servers", type=int, help="number of analysts")
    p.add_argument("--pairing", choices=PAIRINGS)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="results CSV")
    _seed(p)
    p.set_defaults(handler=commands.cmd_simulate)

    p = sub.add_parser("analyze", help="similarity, distance and KL of crafted classes against a reference")
    p.add_argument("--reference", required=True, help="feature CSV of original traffic")
    p.add_argument("--crafted", required=True, nargs="+", metavar="[NAME=]CSV", help="crafted feature CSVs")
    p.add_argument("--profile", choices=sorted(PROFILES), default="fpa_affected")
    p.add_argument("--mode", choices=DISTANCE_MODES, default="centroid")
    p.add_argument("--kl-components", type=int, default=2)
    p.add_argument("--out", required=True, help="report CSV")
    _seed(p)
    p.set_defaults(handler=commands.cmd_analyze)

    p = sub.add_parser("surrogate", help="desk-scale softmax NIDS")
    surrogate = p.add_subparsers(dest="action", required=True)
    fit = surrogate.add_parser("fit", help="train on a labelled feature CSV")
    fit.add_argument("--train", required=True)
    fit.add_argument("--profile", choices=sorted(PROFILES), default="fpa_affected")
    fit.add_argument("--encoder", choices=ENCODER_MODES, default="strict")
    fit.add_argument("--epochs", type=int, default=300)
    fit.add_argument("--learning-rate", type=float, default=1.0)
    fit.add_argument("--out", required=True, help="model file")
    _seed(fit)
    fit.set_defaults(handler=commands.cmd_surrogate_fit)
    ev = surrogate.add_parser("eval", help="ASR and confidence statistics on crafted benign traffic")
    ev.add_argument("--model", required=True)
    ev.add_argument("--crafted", required=True)
    ev.add_argument("--benign-label", default="Normal")
    ev.add_argument("--out", help="JSON report")
    ev.set_defaults(handler=commands.cmd_surrogate_eval)

    p = sub.add_parser("plot", help="SVG figures from a results or report CSV")
    p.add_argument("csv_path")
    p.set_defaults(handler=commands.cmd_plot)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv and dispatch; 0 on success, 1 on runtime errors, 2 on usage errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except (ForgeError, OSError, ValueError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


def main() -> None:
    sys.exit(run())
