import pytest

from ecgnode.errors import ConfigError
from ecgnode.power import (
    Battery,
    NodeConfig,
    battery_life_days,
    exec_time,
    ledger_from_sim,
    mode_power,
)
from ecgnode.procnet import NodeSimulator, ThresholdPolicy
from ecgnode.traceio import synth_trace

# published per-task execution times at 8 MHz and their print precision
EXEC_TIME_TABLE = [
    ("get_data", 105e-6, 0.01),
    ("get_data_peak", 300e-6, 0.01),
    ("cnn_4_4_100", 45e-3, 0.01),
    ("cnn_20_20_100", 215e-3, 0.01),
    ("threshold", 114e-6, 0.01),
    ("send", 3e-3, 0.05),  # published as an approximate figure
]


class TestExecTime:
    @pytest.mark.parametrize("task,expected,rel", EXEC_TIME_TABLE)
    def test_reference_column(self, node_cfg, task, expected, rel):
        assert exec_time(task, 8e6, node_cfg) == pytest.approx(expected, rel=rel)

    def test_half_frequency_doubles_time(self, node_cfg):
        t8 = exec_time("cnn_4_4_100", 8e6, node_cfg)
        t4 = exec_time("cnn_4_4_100", 4e6, node_cfg)
        assert t4 == pytest.approx(2 * t8)

    def test_unknown_task(self, node_cfg):
        with pytest.raises(ConfigError):
            exec_time("nope", 8e6, node_cfg)


class TestModePower:
    def test_raw_at_8mhz(self, node_cfg):
        p = mode_power("raw", 60, None, node_cfg, 8e6)
        assert p == pytest.approx(9.22e-3, abs=0.01e-3)

    def test_cnn_60bpm_4mhz(self, node_cfg):
        p = mode_power("cnn", 60, None, node_cfg, 4e6)
        assert p == pytest.approx(4.81e-3, abs=0.01e-3)

    def test_peak_zero_rate_limit(self, node_cfg):
        p = mode_power("peak", 0, 0.0, node_cfg, 2e6)
        expected = (
            node_cfg.e_get_data_peak * 330
            + node_cfg.idle_power[2e6]
            + node_cfg.sensor_power
        )
        assert p == pytest.approx(expected)

    def test_raw_constant_in_bpm(self, node_cfg):
        values = {mode_power("raw", bpm, None, node_cfg, 8e6) for bpm in (0, 60, 200)}
        assert len(values) == 1

    def test_strictly_increasing_in_bpm(self, node_cfg):
        for mode, freq in (("peak", 2e6), ("cnn", 4e6)):
            powers = [mode_power(mode, bpm, None, node_cfg, freq) for bpm in range(0, 220, 20)]
            assert all(b > a for a, b in zip(powers, powers[1:]))

    def test_cnn_below_raw_at_governor_clocks(self, node_cfg):
        from ecgnode.report import auto_freq

        raw_p = mode_power("raw", 0, None, node_cfg, 8e6)
        for bpm in range(20, 201, 10):
            freq = auto_freq("cnn", bpm, node_cfg)
            assert mode_power("cnn", bpm, None, node_cfg, freq) < raw_p

    def test_unknown_frequency(self, node_cfg):
        with pytest.raises(ConfigError):
            mode_power("raw", 60, None, node_cfg, 3e6)


class TestBatteryLife:
    def test_one_day_identity(self):
        battery = Battery()
        power = battery.energy_j / 86_400.0
        assert battery_life_days(power, battery) == pytest.approx(1.0)

    def test_raw_reference_within_10pct(self, node_cfg):
        p = mode_power("raw", 60, None, node_cfg, 8e6)
        days = battery_life_days(p, node_cfg.battery)
        assert abs(days - 10.29) / 10.29 <= 0.10

    def test_peak_reference_within_10pct(self, node_cfg):
        p = mode_power("peak", 60, 1.0, node_cfg, 2e6)
        days = battery_life_days(p, node_cfg.battery)
        assert abs(days - 23.49) / 23.49 <= 0.10

    def test_cnn_reference_within_10pct(self, node_cfg):
        p = mode_power("cnn", 60, None, node_cfg, 4e6)
        days = battery_life_days(p, node_cfg.battery)
        assert abs(days - 20.20) / 20.20 <= 0.10

    def test_positive_power_required(self):
        with pytest.raises(ValueError):
            battery_life_days(0.0, Battery())


class TestLedger:
    def test_empty_log_baseline_only(self, node_cfg):
        class EmptyReport:
            events = []
            duration_ns = 10_000_000_000
            initial_freq_hz = 4e6
            initial_mode = "peak"

        ledger = ledger_from_sim(EmptyReport(), node_cfg)
        expected = (node_cfg.idle_power[4e6] + node_cfg.sensor_power) * 10.0
        assert ledger.total_j == pytest.approx(expected)
        assert ledger.task_j == {}

    def test_total_is_sum_of_components(self, node_cfg, fixture_model):
        trace, _ = synth_trace(60, 20.0, 330.0, 0.0, seed=7)
        sim = NodeSimulator(
            trace, node_cfg, mode="cnn", freq_hz=4e6,
            policy=ThresholdPolicy(always_send=True), model=fixture_model,
        )
        ledger = ledger_from_sim(sim.run(), node_cfg)
        component_sum = sum(ledger.task_j.values()) + ledger.baseline_j + ledger.sensor_j
        assert ledger.total_j == pytest.approx(component_sum)
        share_sum = sum(share for _, _, share in ledger.rows())
        assert share_sum == pytest.approx(1.0)

    @pytest.mark.parametrize("mode,freq", [("raw", 8e6), ("peak", 2e6), ("cnn", 4e6)])
    def test_sim_matches_closed_form_60s(self, node_cfg, fixture_model, mode, freq):
        trace, _ = synth_trace(60, 60.0, 330.0, 0.0, seed=7)
        sim = NodeSimulator(
            trace, node_cfg, mode=mode, freq_hz=freq,
            policy=ThresholdPolicy(always_send=True),
            model=fixture_model if mode == "cnn" else None,
        )
        ledger = ledger_from_sim(sim.run(), node_cfg)
        closed = mode_power(mode, 60, None, node_cfg, freq)
        assert abs(ledger.avg_power_w - closed) / closed <= 0.02

    def test_cnn_without_anomalies_no_send_energy(self, node_cfg, always_n_model):
        trace, _ = synth_trace(60, 20.0, 330.0, 0.0, seed=7)
        sim = NodeSimulator(
            trace, node_cfg, mode="cnn", freq_hz=4e6,
            policy=ThresholdPolicy(), model=always_n_model,
        )
        report = sim.run()
        ledger = ledger_from_sim(report, node_cfg)
        assert len(report.packets) == 0
        assert "Send" not in ledger.task_j


class TestNodeConfig:
    def test_freq_set_sorted(self, node_cfg):
        assert node_cfg.freq_set == (2e6, 4e6, 8e6)

    def test_alpha(self, node_cfg):
        assert node_cfg.alpha == pytest.approx(1 / 8)

    def test_validation(self):
        with pytest.raises(ConfigError):
            NodeConfig(sample_rate_hz=0)
        with pytest.raises(ConfigError):
            NodeConfig(cnn_model="9_9_9")

    def test_cycles_lookup(self, node_cfg):
        assert node_cfg.task_cycles("get_data") == 841
        assert node_cfg.task_cycles("get_data_peak") == 2391
        assert node_cfg.task_cycles("cnn_4_4_100") == 361_360
        assert node_cfg.task_cycles("cnn_20_20_100") == 1_719_582
        assert node_cfg.task_cycles("threshold") == 910
        assert node_cfg.task_cycles("send") == 25_000
