"""Configuration management for the simulator."""

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.fl.engine import participant_count
from src.fl.strategies import StrategyKind, StrategySpec
from src.utils.errors import ConfigError


# Load environment variables from .env file
load_dotenv()

PRESETS_PATH = Path(__file__).parent / "presets.yaml"

# Fields that change where or how fast a run executes, never what it computes.
EXECUTION_ONLY_FIELDS = {"output_dir", "parallel_clients"}

LogLevelName = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class RuntimeSettings(BaseSettings):
    """Process-level settings taken from ``SIM_*`` environment variables."""
    model_config = SettingsConfigDict(env_prefix="SIM_", env_file=".env", extra="ignore")

    output_dir: str = Field(default="outputs", description="Fallback output directory")
    log_level: LogLevelName = Field(default="INFO", description="Logging level")

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_level(cls, value: Any) -> Any:
        return value.strip().upper() if isinstance(value, str) else value


class ExperimentConfig(BaseModel):
    """Every knob of one experiment. Defaults follow the reference setup."""
    model_config = ConfigDict(extra="forbid")

    # Data
    dataset: Literal["synthetic", "idx"] = Field(default="synthetic", description="Data source")
    synth_num_classes: int = Field(default=10, ge=1, description="Synthetic class count")
    synth_per_class: int = Field(default=100, ge=1, description="Synthetic samples per class")
    synth_dim: int = Field(default=20, ge=1, description="Synthetic feature dimension")
    synth_spread: float = Field(default=1.0, ge=0, description="Synthetic per-coordinate noise std")
    images_path: Optional[str] = Field(default=None, description="IDX image file")
    labels_path: Optional[str] = Field(default=None, description="IDX label file")

    # Partition
    partition: Literal["dirichlet", "pathological", "iid"] = Field(default="dirichlet", description="Client data split")
    alpha: float = Field(default=0.1, gt=0, description="Dirichlet concentration")
    shards_per_client: int = Field(default=2, ge=1, description="Classes per client in the pathological split")
    test_fraction: float = Field(default=0.2, gt=0, lt=1, description="Per-client test share")

    # Federation
    n_clients: int = Field(default=20, ge=1, description="Number of clients")
    participation_rate: float = Field(default=1.0, gt=0, le=1, description="Fraction of clients per round")
    rounds: int = Field(default=50, ge=0, description="Communication rounds T")
    epochs: int = Field(default=5, ge=0, description="Local epochs E")
    batch_size: int = Field(default=64, ge=1, description="Local batch size B")
    literal_weights: bool = Field(default=False, description="Weight by |D_k|/|D| without renormalizing")

    # Model and optimizer
    hidden_sizes: List[int] = Field(default_factory=lambda: [64], description="Hidden layer widths")
    lr: float = Field(default=0.01, ge=0, description="Learning rate")
    momentum: float = Field(default=0.9, ge=0, lt=1, description="SGD momentum")
    weight_decay: float = Field(default=1e-5, ge=0, description="SGD weight decay")
    reset_momentum: bool = Field(default=True, description="Zero momentum at the start of each local update")

    # Strategy
    strategy: StrategyKind = Field(description="fedavg, fedprox, pfedsd or fedckd")
    mu: float = Field(default=0.01, ge=0, description="FedProx proximal weight")
    lambda0: float = Field(default=0.5, ge=0, description="Initial distillation weight")
    tau: float = Field(default=3.0, gt=0, description="Distillation temperature")
    gamma: float = Field(default=0.99, gt=0, le=1, description="Per-round decay of the distillation weight")
    annealing: bool = Field(default=True, description="Decay the distillation weight each round")
    use_global_teacher: bool = Field(default=True, description="FedCKD: distill from the global model")
    kl_direction: Literal["teacher_student", "student_teacher"] = Field(
        default="teacher_student", description="Argument order of the KL terms"
    )
    kd_tau_squared: bool = Field(default=False, description="Scale KL terms by tau^2")

    # Run control
    master_seed: int = Field(default=0, ge=0, description="Root of every random stream")
    repeats: int = Field(default=1, ge=1, description="Independent repeats with seeds master_seed + i")
    output_dir: Optional[str] = Field(default=None, description="Output directory (falls back to SIM_OUTPUT_DIR)")
    parallel_clients: int = Field(default=1, ge=1, description="Threads for client updates within a round")

    @field_validator("hidden_sizes", mode="before")
    @classmethod
    def _split_sizes(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("hidden_sizes")
    @classmethod
    def _positive_sizes(cls, value: List[int]) -> List[int]:
        if any(size < 1 for size in value):
            raise ValueError("hidden layer widths must be >= 1")
        return value

    @model_validator(mode="after")
    def _check_cross_fields(self) -> "ExperimentConfig":
        if self.dataset == "idx" and not (self.images_path and self.labels_path):
            raise ValueError("dataset 'idx' needs images_path and labels_path")
        if self.partition == "pathological" and self.dataset == "synthetic" \
                and self.shards_per_client > self.synth_num_classes:
            raise ValueError("shards_per_client cannot exceed synth_num_classes")
        return self

    def strategy_spec(self) -> StrategySpec:
        return StrategySpec(
            kind=self.strategy,
            mu=self.mu,
            lambda0=self.lambda0,
            tau=self.tau,
            gamma=self.gamma,
            annealing=self.annealing,
            use_global_teacher=self.use_global_teacher,
            kl_direction=self.kl_direction,
            tau_squared=self.kd_tau_squared,
        )

    @property
    def num_participants(self) -> int:
        """K = max(1, round(r * n))."""
        return participant_count(self.n_clients, self.participation_rate)

    def echo(self) -> Dict[str, Any]:
        """Mapping that replays this run, minus execution-only fields."""
        return self.model_dump(mode="json", exclude=EXECUTION_ONLY_FIELDS)


class Preset(BaseModel):
    """A named bundle of config values."""
    description: str = Field(description="What the preset reproduces")
    settings: Dict[str, Any] = Field(default_factory=dict, description="Config values")


def expand_env_vars(data: Any) -> Any:
    """Recursively expand environment variables in configuration data.

    Supports ${VAR} and ${VAR:default} syntax.
    """
    if isinstance(data, dict):
        return {key: expand_env_vars(value) for key, value in data.items()}
    elif isinstance(data, list):
        return [expand_env_vars(item) for item in data]
    elif isinstance(data, str):
        if data.startswith("${") and data.endswith("}"):
            var_part = data[2:-1]
            if ":" in var_part:
                var_name, default_value = var_part.split(":", 1)
                return os.getenv(var_name, default_value)
            return os.getenv(var_part, data)
        return data
    return data


def load_presets(path: Path = PRESETS_PATH) -> Dict[str, Preset]:
    """Load the named presets from YAML."""
    with open(path, 'r', encoding='utf-8') as f:
        raw = yaml.safe_load(f) or {}
    return {name: Preset(**body) for name, body in raw.items()}


def load_config_file(config_path: Path) -> Dict[str, Any]:
    """Read a flat JSON/YAML mapping of config values.

    Raises:
        ConfigError: If the file is missing or is not a flat mapping
    """
    if not config_path.exists():
        raise ConfigError(f"Configuration file not found: {config_path}")
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Could not parse {config_path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{config_path} must hold a key-value object, got {type(data).__name__}")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError("nested objects are not supported; use flat keys", key=str(key))
    return expand_env_vars(data)


def parse_overrides(flags: Sequence[str]) -> Dict[str, str]:
    """Turn ``["--lr", "0.01", "--tau=3"]`` into ``{"lr": "0.01", "tau": "3"}``."""
    overrides: Dict[str, str] = {}
    i = 0
    while i < len(flags):
        flag = flags[i]
        if not flag.startswith("--") or len(flag) <= 2:
            raise ConfigError(f"expected --key value, got '{flag}'")
        name = flag[2:]
        if "=" in name:
            name, value = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(flags):
                raise ConfigError("flag is missing a value", key=name.replace("-", "_"))
            value = flags[i + 1]
            i += 2
        overrides[name.replace("-", "_")] = value
    return overrides


def _config_error(exc: ValidationError) -> ConfigError:
    errors = exc.errors()
    first = errors[0]
    key = str(first["loc"][0]) if first["loc"] else None
    details = "; ".join(
        f"{'.'.join(str(part) for part in err['loc']) or 'config'}: {err['msg']}" for err in errors
    )
    return ConfigError(details, key=key)


def parse_config(file: Optional[Path] = None, overrides: Sequence[str] = (),
                 preset: Optional[str] = None) -> ExperimentConfig:
    """Build a validated config from defaults, a preset, a file and flags.

    Later sources win: defaults < preset < file < ``--key value`` flags.

    Args:
        file: Flat JSON/YAML config file (optional)
        overrides: Command-line flags in ``--key value`` form
        preset: Name of a preset from ``config/presets.yaml``

    Returns:
        ExperimentConfig: Fully validated configuration

    Raises:
        ConfigError: Missing file, unknown preset, unknown key, type or range error
    """
    data: Dict[str, Any] = {}
    if preset is not None:
        presets = load_presets()
        if preset not in presets:
            raise ConfigError(f"unknown preset '{preset}'; available: {', '.join(sorted(presets))}", key="preset")
        data.update(presets[preset].settings)
    if file is not None:
        data.update(load_config_file(Path(file)))
    data.update(parse_overrides(overrides))

    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        raise _config_error(exc) from exc


def validate_config(config: ExperimentConfig) -> List[str]:
    """Soft checks that do not stop a run but deserve a warning.

    Args:
        config: Experiment configuration

    Returns:
        List of warning messages (empty if nothing looks off)
    """
    warnings = []

    if int(config.participation_rate * config.n_clients) < 1:
        warnings.append(
            f"participation_rate {config.participation_rate} x {config.n_clients} clients is below one; "
            "one client will be sampled per round"
        )

    if config.partition == "pathological" and config.dataset == "synthetic" \
            and config.n_clients * config.shards_per_client < config.synth_num_classes:
        warnings.append("pathological split leaves some classes unassigned (n_clients * s < classes)")

    if config.parallel_clients > config.num_participants:
        warnings.append(f"parallel_clients {config.parallel_clients} exceeds the {config.num_participants} participants per round")

    if config.strategy is StrategyKind.FEDCKD and config.lambda0 == 0:
        warnings.append("fedckd with lambda0 = 0 trains exactly like fedavg")

    if config.strategy is StrategyKind.FEDCKD and not config.use_global_teacher \
            and config.annealing and config.gamma < 1 and config.lambda0 > 0:
        warnings.append(
            "fedckd without the global teacher still anneals lambda; it matches pfedsd only with "
            "annealing off or gamma = 1"
        )

    return warnings


def resolve_output_dir(config: ExperimentConfig, settings: Optional[RuntimeSettings] = None) -> Path:
    """Config output_dir, else SIM_OUTPUT_DIR, else ./outputs."""
    if config.output_dir:
        return Path(config.output_dir)
    settings = settings or RuntimeSettings()
    return Path(settings.output_dir)
