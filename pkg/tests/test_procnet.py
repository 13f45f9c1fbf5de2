import json

import numpy as np
import pytest

from ecgnode.adam import AdamManager
from ecgnode.procnet import (
    OPERATING_MODES,
    Command,
    DeadlockError,
    Fifo,
    NodeSimulator,
    SimValueError,
    ThresholdPolicy,
    build_network,
    decode_packet,
    encode_packet,
    step,
    threshold_decision,
)
from ecgnode.traceio import EcgTrace, synth_trace


class TestTopologies:
    def test_raw_two_tasks_one_edge(self, node_cfg):
        net = build_network("raw", node_cfg)
        assert net.active_tasks == {"GetData", "Send"}
        assert net.edges == {("GetData", "Send")}

    def test_cnn_five_tasks_four_edges(self, node_cfg):
        net = build_network("cnn", node_cfg)
        assert len(net.active_tasks) == 5
        assert len(net.edges) == 4

    def test_peak_connects_threshold_without_cnn(self, node_cfg):
        net = build_network("peak", node_cfg)
        assert ("Peak", "Threshold") in net.edges
        assert "Cnn" not in net.active_tasks
        assert all("Cnn" not in e for e in net.edges)

    def test_all_fifos_start_empty(self, node_cfg):
        for mode in OPERATING_MODES:
            net = build_network(mode, node_cfg)
            assert all(len(f) == 0 for f in net.out_fifo.values())

    def test_unknown_mode(self, node_cfg):
        with pytest.raises(SimValueError):
            build_network("turbo", node_cfg)

    def test_topology_assertion_after_every_reconfiguration(self, node_cfg):
        net = build_network("raw", node_cfg)
        for target in ("peak", "cnn", "raw", "cnn", "peak"):
            net.reconfigure(target)
            assert net.active_tasks == OPERATING_MODES[target].active_tasks
            assert net.edges == OPERATING_MODES[target].edges


class TestFifo:
    def test_capacity_enforced(self):
        f = Fifo("a", "b", 2)
        f.write(1)
        f.write(2)
        assert not f.can_write()
        with pytest.raises(SimValueError):
            f.write(3)

    def test_conservation_counters(self):
        f = Fifo("a", "b", 8)
        for i in range(5):
            f.write(i)
        f.pop()
        f.pop()
        assert f.written == f.read + len(f)

    def test_fifo_order(self):
        f = Fifo("a", "b", 8)
        for i in range(5):
            f.write(i)
        assert [f.pop() for _ in range(5)] == [0, 1, 2, 3, 4]


class TestPackets:
    def test_raw_packet_20_bytes_round_trip(self):
        samples = [100, -200, 3000, -32767, 32767, 0, 7, -1]
        pkt = encode_packet("raw", {"samples": samples, "timestamp_ms": 123456})
        assert len(pkt.data) == 20
        back = decode_packet("raw", pkt.data)
        assert back["samples"] == samples
        assert back["timestamp_ms"] == 123456

    def test_peak_packet_bytes(self):
        pkt = encode_packet("peak", {"bpm": 60, "timestamp_ms": 1000})
        assert pkt.data == bytes([60, 0xE8, 0x03, 0x00, 0x00])
        assert len(pkt.data) == 5

    def test_cnn_packet_6_bytes(self):
        pkt = encode_packet("cnn", {"bpm": 60, "label": 2, "timestamp_ms": 0})
        assert len(pkt.data) == 6
        back = decode_packet("cnn", pkt.data)
        assert back == {"bpm": 60, "label": 2, "timestamp_ms": 0}

    def test_bpm_saturates_at_255(self):
        pkt = encode_packet("peak", {"bpm": 300, "timestamp_ms": 0})
        assert pkt.saturated
        assert decode_packet("peak", pkt.data)["bpm"] == 255

    def test_timestamp_wraps_32bit(self):
        pkt = encode_packet("peak", {"bpm": 1, "timestamp_ms": 2**32 + 5})
        assert decode_packet("peak", pkt.data)["timestamp_ms"] == 5

    def test_raw_needs_eight_samples(self):
        with pytest.raises(SimValueError):
            encode_packet("raw", {"samples": [1, 2, 3], "timestamp_ms": 0})


class TestThresholdTask:
    def test_bpm_inside_band_no_message(self):
        assert not threshold_decision("peak", ThresholdPolicy(50, 120), bpm=72)

    def test_bpm_outside_band_message(self):
        assert threshold_decision("peak", ThresholdPolicy(50, 120), bpm=190)
        assert threshold_decision("peak", ThresholdPolicy(50, 120), bpm=30)

    def test_anomalous_class_message(self):
        policy = ThresholdPolicy(anomaly_classes=frozenset({1, 2, 3, 4}))
        assert threshold_decision("cnn", policy, cnn_class=4)
        assert not threshold_decision("cnn", policy, cnn_class=0)

    def test_always_send(self):
        assert threshold_decision("peak", ThresholdPolicy(always_send=True), bpm=72)

    def test_band_validation(self):
        with pytest.raises(SimValueError):
            ThresholdPolicy(120, 50)


class TestSimulator:
    def test_raw_1s_about_41_packets(self, node_cfg):
        trace, _ = synth_trace(60, 1.0, 330.0, 0.0, seed=7)
        report = NodeSimulator(trace, node_cfg, mode="raw", freq_hz=8e6, audit=True).run()
        sample_events = [e for e in report.events if e.kind == "sample_in"]
        assert len(sample_events) == 330
        assert len(report.packets) == 41  # one 20-byte packet per 8 samples
        assert all(len(p.data) == 20 for p in report.packets)

    def test_zero_length_trace_only_sleep(self, node_cfg):
        trace = EcgTrace(330.0, np.zeros(0, dtype=np.int32))
        report = NodeSimulator(trace, node_cfg, mode="raw", freq_hz=8e6).run(1.0)
        kinds = {e.kind for e in report.events}
        assert kinds == {"sleep_enter", "sleep_exit"}

    def test_cnn_no_anomaly_zero_packets(self, node_cfg, always_n_model):
        trace, _ = synth_trace(60, 10.0, 330.0, 0.0, seed=7)
        report = NodeSimulator(
            trace, node_cfg, mode="cnn", freq_hz=4e6,
            policy=ThresholdPolicy(), model=always_n_model,
        ).run()
        assert len(report.packets) == 0
        assert len(report.classifications) == 10

    def test_peak_band_gating(self, node_cfg):
        trace, _ = synth_trace(150, 10.0, 330.0, 0.0, seed=7)
        outside = NodeSimulator(
            trace, node_cfg, mode="peak", freq_hz=2e6,
            policy=ThresholdPolicy(50, 120),
        ).run()
        assert len(outside.packets) > 0  # 150 bpm is above the alert band
        inside = NodeSimulator(
            trace, node_cfg, mode="peak", freq_hz=2e6,
            policy=ThresholdPolicy(50, 200),
        ).run()
        assert len(inside.packets) == 0

    def test_event_log_sorted_and_deterministic(self, node_cfg, fixture_model):
        trace, _ = synth_trace(90, 5.0, 330.0, 20.0, seed=3)

        def run():
            report = NodeSimulator(
                trace, node_cfg, mode="cnn", freq_hz=4e6,
                policy=ThresholdPolicy(always_send=True), model=fixture_model,
            ).run()
            return json.dumps(
                [[e.t_ns, e.kind, sorted(e.payload.items())] for e in report.events]
            )

        log1, log2 = run(), run()
        assert log1 == log2
        parsed = json.loads(log1)
        times = [row[0] for row in parsed]
        assert times == sorted(times)

    def test_fifo_conservation_audited(self, node_cfg, fixture_model):
        trace, _ = synth_trace(120, 5.0, 330.0, 40.0, seed=5)
        sim = NodeSimulator(
            trace, node_cfg, mode="cnn", freq_hz=4e6,
            policy=ThresholdPolicy(always_send=True), model=fixture_model, audit=True,
        )
        sim.run()
        for fifo in sim.network.out_fifo.values():
            assert fifo.written == fifo.read + len(fifo)

    def test_busy_plus_sleep_equals_duration(self, node_cfg):
        trace, _ = synth_trace(60, 5.0, 330.0, 0.0, seed=7)
        sim = NodeSimulator(trace, node_cfg, mode="peak", freq_hz=2e6)
        report = sim.run()
        total_busy = sum(sim.busy_ns.values())
        assert total_busy + sim.sleep_ns == report.duration_ns

    def test_deadlock_detected_with_snapshot(self, node_cfg):
        trace, _ = synth_trace(60, 2.0, 330.0, 0.0, seed=7)
        sim = NodeSimulator(trace, node_cfg, mode="raw", freq_hz=8e6)
        sim.network.tasks["Send"].enabled = False  # consumer dies, producer keeps going
        with pytest.raises(DeadlockError, match="GetData->Send"):
            sim.run()

    def test_cnn_mode_requires_model(self, node_cfg):
        trace, _ = synth_trace(60, 3.0, 330.0, 0.0, seed=7)
        sim = NodeSimulator(trace, node_cfg, mode="cnn", freq_hz=4e6)
        with pytest.raises(SimValueError, match="model"):
            sim.run()

    def test_step_convenience(self, node_cfg):
        trace, _ = synth_trace(60, 1.0, 330.0, 0.0, seed=7)
        net = build_network("raw", node_cfg, freq_hz=8e6)
        report = step(net, trace, 1.0)
        assert len(report.packets) == 41


class TestReconfiguration:
    def test_script_switch_raw_to_cnn_no_sample_loss(self, node_cfg, fixture_model):
        trace, _ = synth_trace(60, 6.0, 330.0, 0.0, seed=7)
        manager = AdamManager(node_cfg=node_cfg)
        sim = NodeSimulator(
            trace, node_cfg, mode="raw",
            policy=ThresholdPolicy(always_send=True),
            model=fixture_model, manager=manager,
            commands=[Command(3.0, "set_mode", ("cnn",))],
            audit=True,
        )
        report = sim.run()
        changes = [e for e in report.events if e.kind == "mode_change"]
        assert len(changes) == 1
        assert changes[0].payload["mode"] == "cnn"
        assert changes[0].t_ns == pytest.approx(3e9, abs=0.2e9)
        # every acquired sample is either consumed downstream or still queued
        get_data_fifo = sim.network.out_fifo["GetData"]
        consumed = sum(1 for e in report.events if e.kind == "task_end"
                       and e.payload["task"] == "GetData")
        assert get_data_fifo.written == consumed
        assert get_data_fifo.written == get_data_fifo.read + len(get_data_fifo)

    def test_mode_change_at_scripted_time(self, node_cfg):
        trace, _ = synth_trace(60, 8.0, 330.0, 0.0, seed=7)
        manager = AdamManager(node_cfg=node_cfg)
        sim = NodeSimulator(
            trace, node_cfg, mode="raw", manager=manager,
            commands=[Command(5.0, "set_mode", ("peak",))],
        )
        report = sim.run()
        change = next(e for e in report.events if e.kind == "mode_change")
        assert change.t_ns >= 5_000_000_000
        assert change.t_ns - 5_000_000_000 < 50_000_000  # within one activation
        assert report.final_mode == "peak"

    def test_band_command_changes_policy(self, node_cfg):
        trace, _ = synth_trace(150, 10.0, 330.0, 0.0, seed=7)
        manager = AdamManager(node_cfg=node_cfg)
        sim = NodeSimulator(
            trace, node_cfg, mode="peak", manager=manager,
            commands=[Command(0.0, "set_band", (50.0, 200.0))],
        )
        report = sim.run()
        assert any(e.kind == "band_change" for e in report.events)
        assert len(report.packets) == 0  # 150 bpm now inside the alert band

    def test_adam_adjusts_frequency_to_workload(self, node_cfg, fixture_model):
        trace, _ = synth_trace(60, 5.0, 330.0, 0.0, seed=7)
        manager = AdamManager(node_cfg=node_cfg)
        sim = NodeSimulator(
            trace, node_cfg, mode="cnn", policy=ThresholdPolicy(),
            model=fixture_model, manager=manager,
        )
        report = sim.run()
        assert report.final_freq_hz == 4e6  # 60 bpm steady state

    def test_randomized_scripts_keep_invariants(self, node_cfg, fixture_model):
        rng = np.random.default_rng(0)
        modes = ("raw", "peak", "cnn")
        for seed in range(20):
            trace, _ = synth_trace(100, 3.0, 330.0, 30.0, seed=seed)
            commands = [
                Command(float(t), "set_mode", (modes[rng.integers(0, 3)],))
                for t in sorted(rng.uniform(0.2, 2.8, rng.integers(1, 4)))
            ]
            manager = AdamManager(node_cfg=node_cfg)
            sim = NodeSimulator(
                trace, node_cfg, mode=modes[rng.integers(0, 3)],
                policy=ThresholdPolicy(always_send=True),
                model=fixture_model, manager=manager, commands=commands, audit=True,
            )
            report = sim.run()
            sim.network.assert_topology()
            for fifo in sim.network.out_fifo.values():
                assert fifo.written == fifo.read + len(fifo)
            times = [e.t_ns for e in report.events]
            assert times == sorted(times)
