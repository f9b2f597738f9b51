"""
Framework settings and monitor presets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional
from urllib.parse import urlsplit

import yaml
from platformdirs import user_data_dir

from .models import MonitorConfig, TopicConfig

APP_NAME = "TwinMon"
APP_AUTHOR = "TwinMon"

BROKER_SCHEMES = ("mqtt", "tcp", "memory")
MONITOR_BACKENDS = ("direct", "stream")


@dataclass
class Preset:
    """Named set of monitor constants."""
    name: str
    description: str
    config: MonitorConfig

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Preset:
        return cls(
            name=data["name"],
            description=data.get("description", ""),
            config=MonitorConfig.from_dict(data["config"]),
        )


DEFAULT_PRESETS = [
    Preset(
        name="nominal",
        description="Default tolerances",
        config=MonitorConfig(),
    ),
    Preset(
        name="strict",
        description="Tight speed tolerance, corrects small slips",
        config=MonitorConfig(delta=0.02),
    ),
    Preset(
        name="lenient",
        description="Loose speed tolerance, corrects only large slips",
        config=MonitorConfig(delta=0.1),
    ),
]


@dataclass
class Settings:
    """Twin service and transport settings."""
    # Transport
    broker_url: str = "memory://"
    state_topic: str = "tessla"
    action_topic: str = "action"
    qos: int = 1
    payload_format: str = "json"
    backoff_base: float = 0.5          # s, first reconnect delay
    backoff_cap: float = 8.0           # s, longest reconnect delay

    # Monitors
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    monitor_backend: str = "direct"    # direct | stream
    custom_presets: list[Preset] = field(default_factory=list)

    # Service
    log_path: Optional[str] = None
    status_port: int = 0               # 0 = no status endpoint
    verdict_timeout: float = 1.0       # s, robot side

    @classmethod
    def get_data_dir(cls) -> Path:
        """Application data directory."""
        path = Path(user_data_dir(APP_NAME, APP_AUTHOR))
        path.mkdir(parents=True, exist_ok=True)
        return path

    @classmethod
    def get_settings_path(cls) -> Path:
        return cls.get_data_dir() / "settings.json"

    def resolved_log_path(self) -> Path:
        """Where the twin log goes; the data directory unless configured."""
        if self.log_path:
            return Path(self.log_path).expanduser()
        return self.get_data_dir() / "twin_log.jsonl"

    def topic_config(self) -> TopicConfig:
        return TopicConfig(
            broker_url=self.broker_url,
            state_topic=self.state_topic,
            action_topic=self.action_topic,
            payload_format=self.payload_format,
            qos=self.qos,
        )

    def get_all_presets(self) -> list[Preset]:
        return DEFAULT_PRESETS + self.custom_presets

    def get_preset_by_name(self, name: str) -> Optional[Preset]:
        for preset in self.get_all_presets():
            if preset.name == name:
                return preset
        return None

    def apply_preset(self, name: str) -> None:
        """Replace the monitor constants with a preset's."""
        preset = self.get_preset_by_name(name)
        if preset is None:
            known = ", ".join(p.name for p in self.get_all_presets())
            raise ValueError(f"unknown preset {name!r} (known: {known})")
        self.monitor = MonitorConfig.from_dict(preset.config.to_dict())

    def validate(self) -> None:
        """Raise ValueError describing the first invalid setting."""
        self.topic_config().validate()
        self.monitor.validate()
        parts = urlsplit(self.broker_url)
        if parts.scheme not in BROKER_SCHEMES:
            raise ValueError(f"broker_url scheme must be one of {BROKER_SCHEMES}, "
                             f"got {self.broker_url!r}")
        if parts.scheme != "memory" and not parts.hostname:
            raise ValueError(f"broker_url has no host: {self.broker_url!r}")
        try:
            parts.port
        except ValueError as e:
            raise ValueError(f"broker_url has a bad port: {self.broker_url!r}") from e
        if self.monitor_backend not in MONITOR_BACKENDS:
            raise ValueError(f"monitor_backend must be one of {MONITOR_BACKENDS}")
        if not 0 <= self.status_port <= 65535:
            raise ValueError(f"status_port out of range: {self.status_port}")
        if self.verdict_timeout <= 0:
            raise ValueError("verdict_timeout must be > 0")
        if self.backoff_base <= 0 or self.backoff_cap < self.backoff_base:
            raise ValueError("backoff needs 0 < backoff_base <= backoff_cap")

    def to_dict(self) -> dict:
        return {
            "broker_url": self.broker_url,
            "topics": {"state": self.state_topic, "action": self.action_topic},
            "qos": self.qos,
            "payload_format": self.payload_format,
            "backoff_base": self.backoff_base,
            "backoff_cap": self.backoff_cap,
            "monitor": self.monitor.to_dict(),
            "monitor_backend": self.monitor_backend,
            "custom_presets": [p.to_dict() for p in self.custom_presets],
            "log_path": self.log_path,
            "status_port": self.status_port,
            "verdict_timeout": self.verdict_timeout,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Settings:
        topics = data.get("topics") or {}
        return cls(
            broker_url=data.get("broker_url", "memory://"),
            state_topic=topics.get("state", "tessla"),
            action_topic=topics.get("action", "action"),
            qos=data.get("qos", 1),
            payload_format=data.get("payload_format", "json"),
            backoff_base=data.get("backoff_base", 0.5),
            backoff_cap=data.get("backoff_cap", 8.0),
            monitor=MonitorConfig.from_dict(data.get("monitor") or {}),
            monitor_backend=data.get("monitor_backend", "direct"),
            custom_presets=[Preset.from_dict(p) for p in data.get("custom_presets", [])],
            log_path=data.get("log_path"),
            status_port=data.get("status_port", 0),
            verdict_timeout=data.get("verdict_timeout", 1.0),
        )

    def save(self, path: Optional[Path] = None) -> Path:
        """Write settings as JSON, or YAML for .yaml/.yml paths."""
        path = Path(path) if path else self.get_settings_path()
        if path.suffix in (".yaml", ".yml"):
            path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))
        else:
            path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path: Optional[Path] = None) -> Settings:
        """
        Load settings.

        Without a path the default settings file is used and a missing file
        gives defaults. An explicit path must exist and parse.
        """
        if path is None:
            path = cls.get_settings_path()
            if not path.exists():
                return cls()
        path = Path(path)
        text = path.read_text()
        try:
            if path.suffix in (".yaml", ".yml"):
                data = yaml.safe_load(text) or {}
            else:
                data = json.loads(text) if text.strip() else {}
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ValueError(f"cannot parse settings file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ValueError(f"settings file {path} must hold a mapping")
        return cls.from_dict(data)
