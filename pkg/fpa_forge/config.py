"""YAML campaign and experiment configs, flag overrides and seed resolution."""

from __future__ import annotations

import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from fpa_forge.core.mqtt import ConnectOptions
from fpa_forge.craft.campaign import CraftSpec, TokenTopics
from fpa_forge.craft.topics import AclRule, Permission
from fpa_forge.errors import ConfigError
from fpa_forge.soc.experiment import PRESETS, ExperimentConfig, with_overrides

logger = logging.getLogger(__name__)

SEED_ENV = "FPA_FORGE_SEED"

_DURATION = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([smhd]?)\s*$")
_UNIT_HOURS = {"s": 1 / 3600, "m": 1 / 60, "h": 1.0, "d": 24.0, "": 1.0}

_CAMPAIGN_KEYS = {
    "base_topic", "topic_pad_range", "base_payload", "payload_pad_counts", "qos_mix",
    "retain_mix", "publish_count", "acl", "mss", "allow_long_remaining_length", "gap_ms",
    "client", "session", "topics", "token_topics", "seed",
}
_EXPERIMENT_KEYS = {"mode", "eta", "mu", "rho", "fp", "horizon", "repeats", "servers", "seed", "pairing", "preset"}


def parse_duration(value: Union[str, int, float]) -> float:
    """Hours from ``1h``, ``1d``, ``30m``, ``3600s`` or a bare number of hours."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        hours = float(value)
    else:
        match = _DURATION.match(str(value))
        if not match:
            raise ConfigError(f"cannot parse duration {value!r}")
        hours = float(match.group(1)) * _UNIT_HOURS[match.group(2)]
    if hours <= 0:
        raise ConfigError(f"duration must be positive, got {value!r}")
    return hours


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    logger.debug("Loaded config %s with keys %s", path, sorted(data))
    return data


def resolve_seed(flag: Optional[int] = None, config: Optional[Mapping[str, Any]] = None) -> int:
    """--seed flag, then config ``seed``, then $FPA_FORGE_SEED, then 0."""
    if flag is not None:
        return int(flag)
    if config and config.get("seed") is not None:
        return int(config["seed"])
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def _unknown(data: Mapping[str, Any], allowed: set, what: str) -> None:
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"unknown {what} keys: {', '.join(sorted(extra))}")


def _mix(value: Any, name: str) -> Dict[int, float]:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{name} must map values to weights")
    return {int(k): float(v) for k, v in value.items()}


def _payload(value: Any) -> bytes:
    return value if isinstance(value, bytes) else str(value).encode("utf-8")


def campaign_from_dict(data: Mapping[str, Any]) -> CraftSpec:
    """Build a CraftSpec; absent keys keep the CraftSpec defaults."""
    _unknown(data, _CAMPAIGN_KEYS, "campaign")
    kwargs: Dict[str, Any] = {}
    try:
        if "base_topic" in data:
            kwargs["base_topic"] = str(data["base_topic"])
        if "base_payload" in data:
            kwargs["base_payload"] = _payload(data["base_payload"])
        if "topic_pad_range" in data:
            lo, hi = data["topic_pad_range"]
            kwargs["topic_pad_range"] = (int(lo), int(hi))
        if "payload_pad_counts" in data:
            kwargs["payload_pad_counts"] = tuple(int(n) for n in data["payload_pad_counts"])
        if "qos_mix" in data:
            kwargs["qos_mix"] = _mix(data["qos_mix"], "qos_mix")
        if "retain_mix" in data:
            kwargs["retain_mix"] = _mix(data["retain_mix"], "retain_mix")
        for key, cast in (("publish_count", int), ("mss", int), ("gap_ms", float)):
            if key in data:
                kwargs[key] = cast(data[key])
        if "allow_long_remaining_length" in data:
            kwargs["allow_long"] = bool(data["allow_long_remaining_length"])
        if "acl" in data:
            acl = data["acl"]
            kwargs["acl_rule"] = AclRule(Permission(acl["permission"]), str(acl["pattern"]))
        if "client" in data:
            client = dict(data["client"])
            username = client.get("username")
            password = client.get("password")
            kwargs["client"] = ConnectOptions(
                client_id=str(client.get("client_id", "sensor-01")),
                username_flag=int(username is not None),
                password_flag=int(password is not None),
                clean_session=int(client.get("clean_session", 0)),
                keep_alive=int(client.get("keep_alive", 0)),
                username=str(username or ""),
                password=_payload(password or b""),
            )
        if "session" in data:
            session = data["session"]
            for key in ("src_ip", "dst_ip"):
                if key in session:
                    kwargs[key] = str(session[key])
            for key in ("src_port", "dst_port"):
                if key in session:
                    kwargs[key] = int(session[key])
        if data.get("topics"):
            kwargs["topics"] = tuple(str(t) for t in data["topics"])
        if data.get("token_topics"):
            tokens = data["token_topics"]
            kwargs["token_topics"] = TokenTopics(
                tuple(str(t) for t in tokens["pool"]),
                int(tokens.get("levels", 1)),
                tokens.get("prefix"),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid campaign config: {exc}") from exc
    spec = CraftSpec(**kwargs)
    spec.validate()
    return spec


def _floats(value: Any) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return (float(value),)


def experiment_from_dict(data: Mapping[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Build an ExperimentConfig on top of ``base`` (a preset) or the defaults."""
    _unknown(data, _EXPERIMENT_KEYS, "experiment")
    if base is None:
        preset = data.get("preset")
        if preset is not None and preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        base = PRESETS[preset] if preset else ExperimentConfig()
    try:
        cfg = with_overrides(
            base,
            mode=data.get("mode"),
            eta=_floats(data["eta"]) if "eta" in data else None,
            mu=_floats(data["mu"]) if "mu" in data else None,
            rho=float(data["rho"]) if data.get("rho") is not None else None,
            fp=_floats(data["fp"]) if "fp" in data else None,
            horizon=parse_duration(data["horizon"]) if "horizon" in data else None,
            repeats=int(data["repeats"]) if "repeats" in data else None,
            servers=int(data["servers"]) if "servers" in data else None,
            seed=int(data["seed"]) if data.get("seed") is not None else None,
            pairing=data.get("pairing"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc
    cfg.validate()
    return cfg
