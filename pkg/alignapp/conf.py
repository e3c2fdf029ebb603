"""Run configuration: ``settings.ALIGN``, then a ``--config`` file, then flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from django.conf import settings

from .exceptions import ConfigError
from .proficiency import BandConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    tomllib = None

STAGES = ("preferences", "proficiency", "diagnose", "compat", "summary")
STAGE_MODES = {
    "preferences": ("rule", "agent"),
    "proficiency": ("rule", "agent"),
    "diagnose": ("rule", "agent"),
    "compat": ("rule", "agent"),
    "summary": ("template", "agent"),
}

# keys a config file may set, mapped to RunConfig fields
FILE_KEYS = {
    "course": "course",
    "tau": "tau",
    "bands": "bands",
    "k": "k",
    "k_per_gap": "k_per_gap",
    "include_exams": "include_exams",
    "modes": "modes",
    "model": "model_id",
    "model_id": "model_id",
    "label_models": "label_models",
    "agent_models": "agent_models",
    "workers": "workers",
    "replay": "replay",
    "record": "record",
    "fixtures": "fixtures",
    "out": "out",
    "generated_at": "generated_at",
}


@dataclass
class RunConfig:
    course: Path | None = None
    tau: float = 0.70
    bands: BandConfig = field(default_factory=BandConfig)
    k: int = 5
    k_per_gap: bool = False
    include_exams: bool = False
    modes: dict = field(default_factory=lambda: {"preferences": "rule", "proficiency": "rule", "diagnose": "rule",
                                                  "compat": "rule", "summary": "template"})
    model_id: str = "gpt-4o"
    label_models: list = field(default_factory=list)
    agent_models: list = field(default_factory=list)
    workers: int = 4
    replay: Path | None = None
    record: Path | None = None
    fixtures: Path | None = None
    out: Path = Path("out")
    generated_at: datetime | None = None

    @classmethod
    def from_settings(cls) -> "RunConfig":
        align = settings.ALIGN
        return cls(
            tau=float(align["TAU"]),
            bands=_bands(align["BANDS"]),
            k=int(align["K"]),
            k_per_gap=bool(align["K_PER_GAP"]),
            include_exams=bool(align["INCLUDE_EXAMS"]),
            modes=dict(align["MODES"]),
            model_id=align["MODEL_ID"],
            label_models=list(align["LABEL_MODELS"]),
            agent_models=list(align["AGENT_MODELS"]),
            workers=int(align["WORKERS"]),
        )

    @classmethod
    def build(cls, flags: dict) -> "RunConfig":
        """Layer a config file and then command-line flags over the settings defaults."""
        config = cls.from_settings()
        if flags.get("config"):
            config.apply(read_config_file(flags["config"]), relative_to=Path(flags["config"]).parent)
        config.apply({key: value for key, value in flags.items() if key in FILE_KEYS and value is not None})
        modes = {stage: flags.get(f"mode_{stage}") for stage in STAGES}
        config.modes.update({stage: mode for stage, mode in modes.items() if mode})
        config.validate()
        return config

    def apply(self, values: dict, relative_to: Path | None = None):
        for key, value in values.items():
            if key not in FILE_KEYS:
                raise ConfigError(f"unknown configuration key {key!r}")
            name = FILE_KEYS[key]
            if name in ("course", "replay", "record", "fixtures", "out"):
                path = Path(value)
                if relative_to is not None and not path.is_absolute():
                    path = relative_to / path
                value = path
            elif name == "bands":
                value = _bands(value)
            elif name == "modes":
                if not isinstance(value, dict):
                    raise ConfigError("modes must be a table of stage = mode")
                value = {**self.modes, **value}
            elif name in ("label_models", "agent_models"):
                value = _model_list(value)
            elif name == "generated_at":
                value = parse_timestamp(value)
            elif name in ("tau",):
                value = _number(key, value, float)
            elif name in ("k", "workers"):
                value = _number(key, value, int)
            setattr(self, name, value)

    def validate(self):
        if not 0 <= self.tau <= 1:
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if self.k < 1:
            raise ConfigError(f"K must be at least 1, got {self.k}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        for stage, mode in self.modes.items():
            if stage not in STAGE_MODES:
                raise ConfigError(f"unknown stage {stage!r} in modes")
            if mode not in STAGE_MODES[stage]:
                raise ConfigError(f"mode {mode!r} is not valid for {stage}; use one of {', '.join(STAGE_MODES[stage])}")
        if self.replay is not None and not self.replay.is_file():
            raise ConfigError(f"replay store {self.replay} does not exist")
        if self.fixtures is not None and not (self.fixtures / "search.json").is_file():
            raise ConfigError(f"fixture directory {self.fixtures} has no search.json")

    def agent(self, stage: str) -> bool:
        return self.modes.get(stage) == "agent"

    @property
    def needs_model(self) -> bool:
        return any(self.agent(stage) for stage in STAGES)


def _bands(value) -> BandConfig:
    if isinstance(value, BandConfig):
        return value
    if isinstance(value, str):
        return BandConfig.parse(value)
    if isinstance(value, dict):
        try:
            return BandConfig(high_min=float(value["high"]), medium_min=float(value["medium"]))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"bands must give numeric high and medium cutoffs, got {value!r}") from None
    raise ConfigError(f"cannot read band cutoffs from {value!r}")


def _model_list(value) -> list[str]:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, (list, tuple)):
        return [str(item).strip() for item in value if str(item).strip()]
    raise ConfigError(f"model lists must be a list or a comma-separated string, got {value!r}")


def _number(key, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        if path.suffix == ".toml":
            if tomllib is None:
                raise ConfigError("TOML config files need Python 3.11 or newer; use JSON instead")
            data = tomllib.loads(raw.decode("utf-8"))
        else:
            data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ConfigError(f"config file {path} cannot be parsed: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a single table/object")
    return data


def parse_timestamp(value) -> datetime:
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    text = str(value).strip()
    if text.isdigit():
        return datetime.fromtimestamp(int(text), tz=timezone.utc)
    try:
        parsed = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ConfigError(f"cannot read timestamp {value!r}") from None
    return parsed if parsed.tzinfo else parsed.replace(tzinfo=timezone.utc)


def report_timestamp(config: RunConfig) -> datetime:
    """--generated-at, else SOURCE_DATE_EPOCH, else the course manifest's mtime."""
    if config.generated_at is not None:
        return config.generated_at
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return parse_timestamp(epoch)
    if config.course is not None and config.course.exists():
        return datetime.fromtimestamp(int(config.course.stat().st_mtime), tz=timezone.utc)
    return datetime(1970, 1, 1, tzinfo=timezone.utc)
