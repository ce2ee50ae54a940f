"""Simulation configuration models and YAML loading."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.errors import ConfigError

logger = logging.getLogger(__name__)


class ChannelConfig(BaseModel):
    """Wireless hop loss model.

    ``bernoulli`` drops each packet independently with ``p_loss``.
    ``gilbert_elliott`` is a two-state Markov channel: per packet the state
    moves Good->Bad with ``p_g2b`` and Bad->Good with ``p_b2g``, then the
    packet is lost with ``p_good`` or ``p_bad`` depending on the state.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    variant: Literal["bernoulli", "gilbert_elliott"] = "gilbert_elliott"
    p_loss: float = Field(0.0078, ge=0.0, le=1.0)
    p_good: float = Field(0.0069, ge=0.0, le=1.0)
    p_bad: float = Field(0.1, ge=0.0, le=1.0)
    p_g2b: float = Field(0.001, ge=0.0, le=1.0)
    p_b2g: float = Field(0.1, ge=0.0, le=1.0)

    def bad_state_share(self) -> float:
        """Stationary probability of the Bad state."""
        total = self.p_g2b + self.p_b2g
        if total == 0.0:
            return 0.0
        return self.p_g2b / total

    def stationary_loss(self) -> float:
        """Long-run loss probability of the channel."""
        if self.variant == "bernoulli":
            return self.p_loss
        pi_bad = self.bad_state_share()
        return pi_bad * self.p_bad + (1.0 - pi_bad) * self.p_good


class PayloadConfig(BaseModel):
    """Segment payload sizes: all full-MSS, or a mix of full and partial segments."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    pattern: Literal["constant", "mixed"] = "constant"
    full_fraction: float = Field(0.8, ge=0.0, le=1.0)
    min_partial_bytes: int = Field(64, ge=1)


class PolicyConfig(BaseModel):
    """Loss-reaction policy of the sender."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: Literal["always_reduce", "oracle_discriminate", "model_discriminate"] = "always_reduce"
    model_path: Optional[str] = None


class SimConfig(BaseModel):
    """One long TCP flow: server -> wired hop -> bottleneck queue -> wireless hop -> client."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(1, ge=0)
    target_packets: Optional[int] = Field(100_000, ge=1)
    duration_s: Optional[float] = Field(None, gt=0.0)
    max_duration_s: float = Field(3600.0, gt=0.0)
    mss_bytes: int = Field(1448, gt=0)
    wired_delay_ms: float = Field(10.0, ge=0.0)
    wired_rate_mbps: float = Field(4.0, gt=0.0)
    queue_capacity_pkts: int = Field(5, ge=0)
    wireless_delay_ms: float = Field(5.0, ge=0.0)
    channel: ChannelConfig = ChannelConfig()
    init_ssthresh_segments: int = Field(64, ge=2)
    init_cwnd_segments: int = Field(1, ge=1)
    rwnd_segments: int = Field(64, ge=1)
    dupack_threshold: int = Field(3, ge=1)
    rto_ms: float = Field(1000.0, gt=0.0)
    sample_interval_s: float = Field(0.1, gt=0.0)
    policy: PolicyConfig = PolicyConfig()
    payload: PayloadConfig = PayloadConfig()

    @model_validator(mode="after")
    def _check_stop_condition(self) -> "SimConfig":
        if self.target_packets is None and self.duration_s is None:
            raise ValueError("one of target_packets or duration_s must be set")
        if self.payload.pattern == "mixed" and self.payload.min_partial_bytes >= self.mss_bytes:
            raise ValueError("payload.min_partial_bytes must be smaller than mss_bytes")
        return self

    def base_rtt_ms(self) -> float:
        """Round-trip propagation delay, without serialization or queueing."""
        return 2.0 * (self.wired_delay_ms + self.wireless_delay_ms)

    def with_overrides(self, **changes: Any) -> "SimConfig":
        """Return a validated copy with top-level fields replaced."""
        tree = self.model_dump()
        tree.update(changes)
        return build_config(tree)


def _format_validation_error(exc: ValidationError) -> str:
    problems = []
    for err in exc.errors():
        key = ".".join(str(part) for part in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            problems.append(f"unknown key '{key}'")
        else:
            problems.append(f"invalid value for '{key}': {err['msg']}")
    return "; ".join(problems)


def build_config(tree: Dict[str, Any]) -> SimConfig:
    """Validate a key/value tree into a SimConfig."""
    try:
        return SimConfig.model_validate(tree)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from None


def validate_config(config: SimConfig) -> SimConfig:
    """Re-run validation; catches configs assembled with ``model_construct``."""
    return build_config(config.model_dump())


def apply_overrides(tree: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply ``key.path=value`` overrides; values are parsed as YAML scalars."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = [part for part in key.strip().split(".") if part]
        if not parts:
            raise ConfigError(f"override '{item}' has an empty key")
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"override '{key}': '{part}' is not a section")
            node = child
        try:
            node[parts[-1]] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override '{key}': cannot parse value '{raw}': {exc}") from None
    return tree


def load_sim_config(path: Optional[Path] = None, overrides: Iterable[str] = ()) -> SimConfig:
    """Load a YAML config file (or the built-in defaults) and apply overrides."""
    tree: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a key/value mapping")
        tree = loaded
    tree = apply_overrides(tree, overrides)
    config = build_config(tree)
    logger.debug("Resolved simulation config: %s", config.model_dump())
    return config


def config_to_yaml(config: SimConfig) -> str:
    """Serialize a config to YAML with fields in declaration order."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)


__all__ = [
    "ChannelConfig",
    "PayloadConfig",
    "PolicyConfig",
    "SimConfig",
    "apply_overrides",
    "build_config",
    "config_to_yaml",
    "load_sim_config",
    "validate_config",
]
