from pathlib import Path

import pytest

from mcfrac.config import Settings, resolve_cors_origins, resolve_settings
from mcfrac.errors import ConfigError


@pytest.fixture(autouse=True)
def clear_settings_cache(monkeypatch):
    for key in ("MCFRAC_PRECISION", "MCFRAC_FORMAT", "MCFRAC_CACHE_DIR", "MCFRAC_WORKERS"):
        monkeypatch.delenv(key, raising=False)
    resolve_settings.cache_clear()
    yield
    resolve_settings.cache_clear()


def test_defaults():
    settings = resolve_settings()
    assert settings.precision == 192
    assert settings.output_format == "table"
    assert settings.cache_dir == Path("~/.cache/mcfrac").expanduser()
    assert settings.uncertified is False


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("MCFRAC_PRECISION", "256")
    monkeypatch.setenv("MCFRAC_FORMAT", "json")
    monkeypatch.setenv("MCFRAC_CACHE_DIR", str(tmp_path))
    monkeypatch.setenv("MCFRAC_WORKERS", "2")
    settings = resolve_settings()
    assert settings.precision == 256
    assert settings.output_format == "json"
    assert settings.cache_dir == tmp_path
    assert settings.workers == 2


def test_settings_are_cached(monkeypatch):
    assert resolve_settings().precision == 192
    monkeypatch.setenv("MCFRAC_PRECISION", "512")
    assert resolve_settings().precision == 192
    resolve_settings.cache_clear()
    assert resolve_settings().precision == 512


@pytest.mark.parametrize(
    ("key", "value"),
    [
        ("MCFRAC_PRECISION", "32"),
        ("MCFRAC_PRECISION", "lots"),
        ("MCFRAC_FORMAT", "xml"),
        ("MCFRAC_WORKERS", "0"),
    ],
)
def test_invalid_environment_raises_config_error(monkeypatch, key, value):
    monkeypatch.setenv(key, value)
    with pytest.raises(ConfigError) as excinfo:
        resolve_settings()
    assert excinfo.value.error_kind == "config"


def test_with_overrides_ignores_none_and_validates(tmp_path):
    base = Settings()
    updated = base.with_overrides(precision=320, output_format=None, cache_dir=tmp_path)
    assert updated.precision == 320
    assert updated.output_format == "table"
    assert updated.cache_dir == tmp_path
    assert base.precision == 192
    with pytest.raises(ConfigError):
        base.with_overrides(precision=16)


def test_cors_origins(monkeypatch):
    monkeypatch.delenv("MCFRAC_CORS_ALLOW_ORIGINS", raising=False)
    assert resolve_cors_origins() == []
    monkeypatch.setenv(
        "MCFRAC_CORS_ALLOW_ORIGINS", "http://localhost:3000, ,https://a.example"
    )
    assert resolve_cors_origins() == [
        "http://localhost:3000",
        "https://a.example",
    ]
