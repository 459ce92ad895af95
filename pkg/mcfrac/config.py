from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

DEFAULT_CACHE_DIR = Path("~/.cache/mcfrac").expanduser()
MIN_PRECISION = 64

OutputFormat = Literal["json", "table"]


class Settings(BaseModel):
    model_config = ConfigDict(extra="ignore", validate_assignment=True)

    precision: int = 192
    output_format: OutputFormat = "table"
    cache_dir: Path = DEFAULT_CACHE_DIR
    uncertified: bool = False
    workers: int = Field(default=4, ge=1)
    max_escalations: int = Field(default=4, ge=0)

    @field_validator("precision")
    @classmethod
    def _check_precision(cls, value: int) -> int:
        if value < MIN_PRECISION:
            raise ValueError(f"precision must be >= {MIN_PRECISION} bits")
        return value

    @field_validator("cache_dir")
    @classmethod
    def _expand_cache_dir(cls, value: Path) -> Path:
        return value.expanduser()

    def with_overrides(self, **overrides: Any) -> Settings:
        """Apply non-None overrides (CLI flags) and validate the result."""
        update = {key: value for key, value in overrides.items() if value is not None}
        return _validated(self.model_copy(update=update).model_dump())


_ENV_FIELDS = {
    "MCFRAC_PRECISION": "precision",
    "MCFRAC_FORMAT": "output_format",
    "MCFRAC_CACHE_DIR": "cache_dir",
    "MCFRAC_WORKERS": "workers",
}


def _validated(values: dict[str, Any]) -> Settings:
    try:
        return Settings.model_validate(values)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from exc


@lru_cache(maxsize=1)
def resolve_settings() -> Settings:
    values: dict[str, Any] = {}
    for env_key, field_name in _ENV_FIELDS.items():
        env_value = os.getenv(env_key, "").strip()
        if env_value:
            values[field_name] = env_value
    return _validated(values)


def resolve_cors_origins() -> list[str]:
    allowed_origins = os.getenv("MCFRAC_CORS_ALLOW_ORIGINS", "").strip()
    if not allowed_origins:
        return []
    return [origin.strip() for origin in allowed_origins.split(",") if origin.strip()]
