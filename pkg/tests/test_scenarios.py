"""Tests for the wired / stationary / mobile client comparison."""

from pathlib import Path

import pytest

from app.core.errors import ConfigError
from app.core.settings import build_config, load_sim_config
from app.core.sim.scenarios import compare_scenarios, scenario_configs
from config import SCENARIOS

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_bundled_configs_match_presets():
    presets = scenario_configs(build_config({}))
    for name in SCENARIOS:
        assert load_sim_config(CONFIG_DIR / f"{name}.yaml") == presets[name]


def test_presets_keep_base_topology():
    base = build_config({"wired_rate_mbps": 8.0, "queue_capacity_pkts": 12})
    for config in scenario_configs(base).values():
        assert config.wired_rate_mbps == 8.0
        assert config.queue_capacity_pkts == 12
    assert scenario_configs(base)["wired"].channel.p_loss == 0.0


def test_comparison_table_follows_scenario_order():
    configs = scenario_configs(build_config({"target_packets": 1500}))
    comparison = compare_scenarios(configs, n_seeds=2, master_seed=4)
    table = comparison.table
    assert table["scenario"].tolist() == list(SCENARIOS)
    assert set(comparison.series) == set(SCENARIOS)
    wired = table.set_index("scenario").loc["wired"]
    assert wired["wdrop_pct"] == 0.0
    assert (table["mean_throughput_mbps"] > 0).all()
    assert all(throughput and cwnd for throughput, cwnd in comparison.series.values())


def test_rejects_empty_or_seedless_comparison():
    with pytest.raises(ConfigError):
        compare_scenarios({})
    with pytest.raises(ConfigError):
        compare_scenarios(scenario_configs(build_config({"target_packets": 100})), n_seeds=0)


@pytest.mark.slow
def test_wireless_clients_lose_throughput():
    """Wired beats stationary wireless, which beats the lossy mobile client."""
    configs = scenario_configs(build_config({"target_packets": 20_000}))
    table = compare_scenarios(configs, n_seeds=3).table.set_index("scenario")["mean_throughput_mbps"]
    assert table["wired"] >= table["stationary_wireless"] > table["mobile_wireless"]
