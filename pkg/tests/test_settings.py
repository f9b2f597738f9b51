"""Tests for framework settings and presets."""

import json

import pytest

from app.core.models import MonitorConfig
from app.core.settings import DEFAULT_PRESETS, Preset, Settings


class TestSettings:
    """Settings tests."""

    def test_defaults_validate(self):
        """Default settings use the in-memory bus and validate."""
        settings = Settings()
        settings.validate()
        assert settings.broker_url == "memory://"
        assert settings.topic_config().state_topic == "tessla"
        assert settings.topic_config().action_topic == "action"

    def test_round_trip(self):
        """to_dict / from_dict keeps every key."""
        settings = Settings(broker_url="mqtt://localhost:1883", qos=0,
                            monitor=MonitorConfig(delta=0.02), monitor_backend="stream",
                            status_port=8080, verdict_timeout=0.5)
        restored = Settings.from_dict(settings.to_dict())
        assert restored.to_dict() == settings.to_dict()

    @pytest.mark.parametrize("url", ["http://host", "mqtt://", "mqtt://host:notaport", "nonsense"])
    def test_bad_broker_url(self, url):
        """Malformed broker URLs fail validation."""
        with pytest.raises(ValueError, match="broker_url"):
            Settings(broker_url=url).validate()

    def test_bad_monitor_constant(self):
        """Monitor constants are validated with the settings."""
        with pytest.raises(ValueError, match="gamma"):
            Settings(monitor=MonitorConfig(gamma=0)).validate()

    def test_bad_backend(self):
        """Only direct and stream backends."""
        with pytest.raises(ValueError, match="monitor_backend"):
            Settings(monitor_backend="fpga").validate()

    def test_backoff_order(self):
        """backoff_cap below backoff_base is rejected."""
        with pytest.raises(ValueError, match="backoff"):
            Settings(backoff_base=2.0, backoff_cap=1.0).validate()

    def test_save_load_json(self, tmp_path):
        """JSON settings files load back."""
        path = Settings(status_port=9000).save(tmp_path / "settings.json")
        assert json.loads(path.read_text())["status_port"] == 9000
        assert Settings.load(path).status_port == 9000

    def test_save_load_yaml(self, tmp_path):
        """YAML is chosen by suffix."""
        path = Settings(action_topic="verdicts").save(tmp_path / "settings.yaml")
        assert "verdicts" in path.read_text()
        assert Settings.load(path).action_topic == "verdicts"

    def test_load_garbage(self, tmp_path):
        """Unparsable files raise ValueError."""
        path = tmp_path / "settings.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="cannot parse"):
            Settings.load(path)

    def test_resolved_log_path(self, tmp_path):
        """An explicit log path wins over the data directory."""
        settings = Settings(log_path=str(tmp_path / "twin.jsonl"))
        assert settings.resolved_log_path() == tmp_path / "twin.jsonl"


class TestPresets:
    """Monitor preset tests."""

    def test_default_presets(self):
        """nominal, strict and lenient ship by default."""
        names = [p.name for p in DEFAULT_PRESETS]
        assert names == ["nominal", "strict", "lenient"]

    def test_apply_preset(self):
        """Applying a preset copies its constants."""
        settings = Settings()
        settings.apply_preset("strict")
        assert settings.monitor.delta == 0.02
        settings.monitor.delta = 0.07
        assert settings.get_preset_by_name("strict").config.delta == 0.02

    def test_unknown_preset(self):
        """Unknown presets list the known ones."""
        with pytest.raises(ValueError, match="nominal"):
            Settings().apply_preset("reckless")

    def test_custom_preset(self):
        """Custom presets persist through to_dict."""
        custom = Preset("mat", "yoga mat", MonitorConfig(delta=0.03))
        settings = Settings.from_dict(Settings(custom_presets=[custom]).to_dict())
        settings.apply_preset("mat")
        assert settings.monitor.delta == 0.03
