"""Policy replay: the same flow and seed run once per loss-reaction policy."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from app.core.errors import ConfigError, UsageError
from app.core.settings import SimConfig
from app.core.sim.engine import LossClassifier, load_policy_classifier, run_simulation
from app.core.sim.tcp import LossPolicy
from app.core.tasks import run_tasks
from config import POLICY_NAMES

logger = logging.getLogger(__name__)

POLICY_BY_NAME = {name: LossPolicy(policy_id) for name, policy_id in POLICY_NAMES}
POLICY_BY_NAME.update({policy_id: LossPolicy(policy_id) for _, policy_id in POLICY_NAMES})

Series = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class PolicyOutcome:
    policy: str
    mean_throughput_mbps: float
    retransmissions: int
    loss_events: int
    reductions: int
    skipped_reductions: int
    timeouts: int
    total_packets: int
    end_time_s: float
    trace_digest: str
    cwnd_series: Series
    throughput_series: Series


@dataclass(frozen=True)
class _Arm:
    config: SimConfig
    classifier: Optional[LossClassifier]


def resolve_policy(name: str) -> LossPolicy:
    try:
        return POLICY_BY_NAME[name]
    except KeyError:
        valid = ", ".join(n for n, _ in POLICY_NAMES)
        raise UsageError(f"unknown policy '{name}' (expected one of {valid})") from None


def _run_arm(arm: _Arm) -> PolicyOutcome:
    trace = run_simulation(arm.config, arm.classifier)
    stats = trace.stats
    return PolicyOutcome(
        policy=arm.config.policy.name,
        mean_throughput_mbps=stats.mean_throughput_mbps,
        retransmissions=trace.summary.retransmissions,
        loss_events=stats.loss_events,
        reductions=stats.reductions,
        skipped_reductions=stats.skipped_reductions,
        timeouts=stats.timeouts,
        total_packets=trace.summary.total_packets,
        end_time_s=stats.end_time_s,
        trace_digest=trace.digest(include_config=False),
        cwnd_series=trace.cwnd_series,
        throughput_series=trace.throughput_series,
    )


def replay_policy(
    config: SimConfig,
    policies: Sequence[str],
    model_path: Optional[str] = None,
    classifier: Optional[LossClassifier] = None,
    jobs: int = 1,
) -> List[PolicyOutcome]:
    """One outcome per policy, all arms sharing ``config.seed``.

    The model-discriminate arm uses ``classifier`` when given, otherwise the
    model file at ``model_path`` (or ``config.policy.model_path``). Missing or
    unreadable model files fail before any arm runs.
    """
    if not policies:
        raise UsageError("no policies to replay")
    arms = []
    for name in policies:
        policy = resolve_policy(name)
        path = model_path or config.policy.model_path
        arm_config = config.with_overrides(policy={"name": policy.value, "model_path": path})
        arm_classifier = None
        if policy is LossPolicy.MODEL_DISCRIMINATE:
            if classifier is not None:
                arm_classifier = classifier
            elif not path:
                raise ConfigError("model-discriminate policy needs a model file (--model)")
            else:
                arm_classifier = load_policy_classifier(arm_config)
        arms.append(_Arm(arm_config, arm_classifier))
    outcomes = run_tasks(_run_arm, arms, jobs=jobs, description="Policy replay")
    for outcome in outcomes:
        logger.info(
            "%s: %.3f Mbps, %d retransmissions, %d/%d reductions applied",
            outcome.policy,
            outcome.mean_throughput_mbps,
            outcome.retransmissions,
            outcome.reductions,
            outcome.loss_events,
        )
    return outcomes


def no_loss_events(outcomes: Sequence[PolicyOutcome]) -> bool:
    return all(outcome.loss_events == 0 for outcome in outcomes)


__all__ = ["POLICY_BY_NAME", "PolicyOutcome", "no_loss_events", "replay_policy", "resolve_policy"]
