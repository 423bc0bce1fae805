import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from advicemaze.agents import PendingAdviceQueue
from advicemaze.harness import ExperimentConfig, packaged_map_path, run_experiment
from advicemaze.qnet import TrainingConfig
from advicemaze.service import ServiceHub, create_app, handle_inbound, serve
from advicemaze.telemetry import StateSnapshot, TelemetryChannel
from advicemaze.world import Heading, load_map_file


def make_hub():
    hub = ServiceHub(TelemetryChannel(PendingAdviceQueue()))
    hub.state_rate = 200.0  # keep tests fast
    return hub


def snapshot(episode=1, step=1, score=-0.5):
    return StateSnapshot(
        episode=episode, step=step, x=2, y=7, heading="east", score=score,
        last_action="forward", advice_active=False,
        frame_w=2, frame_h=2, frame_bytes=bytes([0, 64, 128, 255]),
        map_digest="abc123",
    )


class TestHandleInbound:
    def test_advice_reaches_queue(self):
        hub = make_hub()
        hub.channel.global_step = 17
        reply = handle_inbound(hub, '{"type":"advice","direction":"north"}', True)
        assert reply is None
        event = hub.channel.queue.pop(now_step=17)
        assert event.direction == Heading.NORTH
        assert event.source == "human"
        assert event.issued_at == 17

    def test_bad_direction_rejected(self):
        hub = make_hub()
        reply = handle_inbound(hub, '{"type":"advice","direction":"up"}', True)
        assert reply.type == "error"
        assert reply.reason == "bad direction"
        assert hub.channel.queue.pop(0) is None

    def test_malformed_json(self):
        hub = make_hub()
        assert handle_inbound(hub, "{nope", True).reason == "bad json"

    def test_unknown_type(self):
        hub = make_hub()
        assert handle_inbound(hub, '{"type":"dance"}', True).reason == "unknown message type"

    def test_observer_cannot_advise(self):
        hub = make_hub()
        reply = handle_inbound(hub, '{"type":"advice","direction":"north"}', False)
        assert reply.reason == "observer connection"
        assert hub.channel.queue.pop(0) is None

    def test_control_pause_and_resume(self):
        hub = make_hub()
        assert handle_inbound(hub, '{"type":"control","cmd":"pause"}', True) is None
        assert hub.channel.paused
        assert handle_inbound(hub, '{"type":"control","cmd":"resume"}', True) is None
        assert not hub.channel.paused

    def test_bad_command(self):
        hub = make_hub()
        assert handle_inbound(hub, '{"type":"control","cmd":"stop"}', True).reason == "bad command"


class TestPauseResume:
    def test_idempotent_pause(self):
        hub = make_hub()
        assert hub.inject_pause_resume("pause")
        assert hub.inject_pause_resume("pause")
        assert hub.channel.paused

    def test_resume_without_pause_is_noop(self):
        hub = make_hub()
        assert hub.inject_pause_resume("resume")
        assert not hub.channel.paused

    def test_unknown_command_raises(self):
        hub = make_hub()
        with pytest.raises(ValueError):
            hub.inject_pause_resume("halt")

    def test_pause_freezes_loop(self):
        channel = TelemetryChannel(PendingAdviceQueue())
        counter = {"steps": 0}
        stop = threading.Event()

        def loop():
            while not stop.is_set():
                channel.wait_if_paused(timeout=5.0)
                if channel.paused:
                    continue
                counter["steps"] += 1
                time.sleep(0.001)

        thread = threading.Thread(target=loop, daemon=True)
        thread.start()
        time.sleep(0.05)
        channel.pause()
        time.sleep(0.02)
        frozen = counter["steps"]
        time.sleep(0.08)
        assert counter["steps"] == frozen
        channel.resume()
        time.sleep(0.05)
        assert counter["steps"] > frozen
        stop.set()
        channel.resume()
        thread.join(timeout=2)


class TestRestApi:
    def test_health_and_status(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        assert client.get("/health").json() == {"ok": True}
        status = client.get("/status").json()
        assert status["paused"] is False
        assert status["clients"] == 0
        assert status["run"] is None

    def test_control_endpoint(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        out = client.post("/control", json={"cmd": "pause"}).json()
        assert out == {"acknowledged": True, "paused": True}
        assert client.post("/control", json={"cmd": "bounce"}).status_code == 400

    def test_map_fetch_by_digest(self):
        hub = make_hub()
        gmap = load_map_file(packaged_map_path("desk12.map"))
        digest = hub.register_map(gmap)
        client = TestClient(create_app(hub))
        body = client.get(f"/map/{digest}").json()
        assert body["width"] == 12
        assert body["rows"][gmap.spawn.y][gmap.spawn.x] == "S"
        assert body["goal"] == list(gmap.goal)
        assert client.get("/map/feedbeef").status_code == 404

    def test_runs_endpoint_launches_background_run(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        assert client.get("/runs").status_code == 404
        request = {
            "agent": "naa", "condition": "none", "preset": "desk",
            "episodes": 1, "sessions": 1, "seed": 0,
        }
        started = client.post("/runs", json=request)
        assert started.status_code == 200
        hub.wait_run(timeout=120)
        final = client.get("/runs").json()
        assert final["state"] == "finished"
        assert final["summary"]["episodes"] == 1


class TestWebSocket:
    def test_state_stream_and_advice_roundtrip(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        with client.websocket_connect("/ws") as ws:
            hub.channel.publish(snapshot(episode=1, step=1))
            msg = ws.receive_json()
            assert msg["type"] == "state"
            assert msg["pose"] == {"x": 2, "y": 7, "heading": "east"}
            assert msg["frame"]["w"] == 2
            assert msg["mapDigest"] == "abc123"

            ws.send_text('{"type":"advice","direction":"west"}')
            deadline = time.monotonic() + 2.0
            while hub.channel.queue.pending(0) == 0 and time.monotonic() < deadline:
                time.sleep(0.005)
            event = hub.channel.queue.pop(0)
            assert event is not None and event.direction == Heading.WEST

    def test_states_monotone_and_rate_limited(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        with client.websocket_connect("/ws") as ws:
            hub.channel.publish(snapshot(episode=1, step=1))
            first = ws.receive_json()
            for step in range(2, 30):
                hub.channel.publish(snapshot(episode=1, step=step))
            second = ws.receive_json()  # latest-wins: intermediate states dropped
            assert (second["episode"], second["step"]) > (first["episode"], first["step"])

    def test_error_reply_keeps_connection(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        with client.websocket_connect("/ws") as ws:
            ws.send_text('{"type":"advice","direction":"up"}')
            reply = ws.receive_json()
            assert reply == {"type": "error", "reason": "bad direction"}
            ws.send_text('{"type":"advice","direction":"south"}')
            deadline = time.monotonic() + 2.0
            while hub.channel.queue.pending(0) == 0 and time.monotonic() < deadline:
                time.sleep(0.005)
            assert hub.channel.queue.pop(0).direction == Heading.SOUTH

    def test_second_client_is_observer(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        with client.websocket_connect("/ws") as first:
            with client.websocket_connect("/ws") as second:
                second.send_text('{"type":"advice","direction":"north"}')
                assert second.receive_json()["reason"] == "observer connection"
            first.send_text('{"type":"advice","direction":"north"}')
            deadline = time.monotonic() + 2.0
            while hub.channel.queue.pending(0) == 0 and time.monotonic() < deadline:
                time.sleep(0.005)
            assert hub.channel.queue.pending(0) == 1

    def test_client_connection_flag_tracks_attach(self):
        hub = make_hub()
        client = TestClient(create_app(hub))
        assert not hub.channel.client_connected
        with client.websocket_connect("/ws"):
            assert hub.channel.client_connected
        deadline = time.monotonic() + 2.0
        while hub.channel.client_connected and time.monotonic() < deadline:
            time.sleep(0.005)
        assert not hub.channel.client_connected


class TestLiveHumanCondition:
    def test_scripted_teacher_over_real_socket(self):
        """Human condition end to end: train against a live websocket teacher."""
        from websockets.sync.client import connect

        handle, hub = serve(port=0)
        hub.state_rate = 100.0
        try:
            cfg = ExperimentConfig(
                agent="naa",
                condition="human",
                map_path=str(packaged_map_path("desk12.map")),
                episodes=2,
                sessions=1,
                max_actions=120,
                obs_size=16,
                frame_stack=2,
                conv_channels=(4,),
                dense_widths=(8,),
                training=TrainingConfig(
                    min_replay=16, batch_size=8, eps_start=0.2, eps_end=0.05,
                    eps_decay_steps=100,
                ),
            )
            hub.register_map(load_map_file(cfg.resolved_map_path))
            seen_states = []
            consumed = []

            def teacher():
                with connect(f"ws://127.0.0.1:{handle.port}/ws") as ws:
                    # advice flows in while training runs; states flow out
                    for _ in range(40):
                        ws.send(json.dumps({"type": "advice", "direction": "east"}))
                        try:
                            raw = ws.recv(timeout=0.3)
                        except TimeoutError:
                            continue
                        msg = json.loads(raw)
                        if msg.get("type") == "state":
                            seen_states.append((msg["episode"], msg["step"]))

            thread = threading.Thread(target=teacher, daemon=True)
            thread.start()
            result = run_experiment(cfg, channel=hub.channel)
            thread.join(timeout=30)
            consumed = [r.advice_used for r in result.records]
        finally:
            handle.stop()

        assert sum(r.advice_offered for r in result.records) > 0  # human advice arrived
        assert sum(consumed) > 0  # and the agent acted on some of it
        assert seen_states == sorted(seen_states)  # monotone (episode, step)
        assert len(seen_states) > 0
