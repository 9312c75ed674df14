"""INI configuration: service settings, client settings, scenario configs.

Environment variables prefixed ``IOTSENTRY_`` override file values for the
client (``IOTSENTRY_ENDPOINT``, ``IOTSENTRY_TOKEN``, ``IOTSENTRY_TOKEN_PATH``,
``IOTSENTRY_CONFIG``).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .clock import PIPELINE_OPS
from .domain import Institution, NetworkProfile, Role
from .errors import ConfigMissing
from .harness.scenario import ScenarioConfig
from .service.runtime import RuntimeSettings
from .severity import parse_policy

ENV_PREFIX = "IOTSENTRY_"


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(delimiters=("=",), interpolation=None)


def default_scenario_text() -> str:
    return resources.files("iotsentry.data").joinpath("default_scenario.cfg").read_text()


def default_policy_text() -> str:
    return resources.files("iotsentry.data").joinpath("default_policy.conf").read_text()


# -- scenario config -----------------------------------------------------------


def parse_scenario_config(text: str) -> ScenarioConfig:
    cp = _parser()
    cp.read_string(text)
    section = cp["scenario"] if cp.has_section("scenario") else {}
    delays = {}
    if cp.has_section("delays"):
        for name, value in cp["delays"].items():
            delays[name] = float(value)
    config = ScenarioConfig(
        device_count=int(section.get("device_count", 1)),
        attack_profile=section.get("attack_profile", "sql_injection"),
        op_delays=delays,
        probe_interval=float(section.get("probe_interval", 0.5)),
        repetitions=int(section.get("repetitions", 1)),
        seed=int(section.get("seed", 1)),
        detection_delay=float(section.get("detection_delay", 12.1)),
        notice_count=int(section.get("notice_count", 1)),
        poll_interval=float(section.get("poll_interval", 0.2)),
        probe_horizon=float(section.get("probe_horizon", 30.0)),
        ip_pool=section.get("ip_pool", "192.168.1.0/24"),
    )
    config.validate()
    return config


def render_scenario_config(config: ScenarioConfig) -> str:
    lines = [
        "[scenario]",
        f"device_count = {config.device_count}",
        f"attack_profile = {config.attack_profile}",
        f"repetitions = {config.repetitions}",
        f"seed = {config.seed}",
        f"probe_interval = {config.probe_interval}",
        f"detection_delay = {config.detection_delay}",
        f"notice_count = {config.notice_count}",
        f"poll_interval = {config.poll_interval}",
        f"probe_horizon = {config.probe_horizon}",
        f"ip_pool = {config.ip_pool}",
        "",
        "[delays]",
    ]
    for op in PIPELINE_OPS:
        if op in config.op_delays:
            lines.append(f"{op} = {config.op_delays[op]}")
    return "\n".join(lines) + "\n"


def load_scenario_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return parse_scenario_config(default_scenario_text())
    p = Path(path)
    if not p.exists():
        raise ConfigMissing(f"scenario config {path} not found")
    return parse_scenario_config(p.read_text())


# -- service config ---------------------------------------------------------------


@dataclass
class ServeConfig:
    settings: RuntimeSettings
    host: str = "127.0.0.1"
    port: int = 8080


def load_serve_config(path: str | None) -> ServeConfig:
    """Build runtime settings from an INI file; sensible single-campus defaults without one."""
    if path is None:
        settings = RuntimeSettings.single_institution()
        return ServeConfig(settings=settings)
    p = Path(path)
    if not p.exists():
        raise ConfigMissing(f"service config {path} not found")
    cp = _parser()
    cp.read_string(p.read_text())
    service = cp["service"] if cp.has_section("service") else {}

    institutions: dict[str, Institution] = {}
    for section in cp.sections():
        if not section.startswith("institution:"):
            continue
        inst_id = section.split(":", 1)[1]
        block = cp[section]
        institutions[inst_id] = Institution(
            inst_id,
            name=block.get("name", inst_id),
            network_profile=NetworkProfile(
                endpoint=block.get("endpoint", "sim://local"),
                credential_ref=block.get("credential_ref", ""),
                interface=block.get("interface", "lan"),
                ip_pool=block.get("ip_pool", ""),
            ),
        )

    users = []
    if cp.has_section("users"):
        for username, spec in cp["users"].items():
            parts = [x.strip() for x in spec.split(",")]
            if len(parts) < 3:
                raise ConfigMissing(f"user {username}: expected password,role,institutions")
            password, role_name, insts = parts[0], parts[1], parts[2:]
            users.append((username, password, Role(role_name.capitalize()), set("|".join(insts).split("|"))))

    policy = None
    policy_file = service.get("policy_file", "")
    if policy_file:
        policy = parse_policy(Path(policy_file).read_text())

    settings = RuntimeSettings(
        institutions=institutions,
        users=users,
        firewall_mode=service.get("firewall_mode", "simulated"),
        storage_path=service.get("storage_path") or None,
        notice_log=service.get("notice_log") or None,
        poll_interval=float(service.get("poll_interval", 0.2)),
        token_secret=service.get("token_secret") or None,
        sync_interval=float(service.get("sync_interval", 0)),
    )
    if policy is not None:
        settings.policy = policy
    if not settings.institutions:
        settings = RuntimeSettings.single_institution()
    return ServeConfig(
        settings=settings,
        host=service.get("host", "127.0.0.1"),
        port=int(service.get("port", 8080)),
    )


# -- client config ------------------------------------------------------------------


@dataclass
class ClientConfig:
    endpoint: str
    token: Optional[str] = None


def load_client_config(path: str | None) -> ClientConfig:
    """Endpoint and token for client verbs; env overrides file values."""
    endpoint = os.environ.get(ENV_PREFIX + "ENDPOINT")
    token = os.environ.get(ENV_PREFIX + "TOKEN")
    token_path = os.environ.get(ENV_PREFIX + "TOKEN_PATH")
    path = path or os.environ.get(ENV_PREFIX + "CONFIG")
    if path and Path(path).exists():
        cp = _parser()
        cp.read_string(Path(path).read_text())
        if cp.has_section("client"):
            block = cp["client"]
            endpoint = endpoint or block.get("endpoint")
            token_path = token_path or block.get("token_path")
    if token is None and token_path and Path(token_path).exists():
        token = Path(token_path).read_text().strip()
    if not endpoint:
        raise ConfigMissing(
            "no API endpoint configured (set IOTSENTRY_ENDPOINT or a [client] section)"
        )
    return ClientConfig(endpoint=endpoint, token=token)
