"""HTTP surface and per-connection WebSocket sessions of the service."""

import pytest
from fastapi.testclient import TestClient

from adaptsel import adapter as ad
from adaptsel import service


@pytest.fixture(scope="module")
def client():
    return TestClient(service.create_app())


def pointer_message(h_offset=0.0, timestamp=0.0):
    return {
        "v": service.PROTOCOL_VERSION,
        "type": "pointer_update",
        "position": [0.2, 1.1, 0.1],
        "direction": [h_offset, 0.0, 1.0],
        "timestamp": timestamp,
    }


class TestHttp:
    def test_health_reports_config_hash(self, client):
        doc = client.get("/health").json()
        assert doc["status"] == "ok"
        assert doc["preset"] == "application"
        assert doc["config_hash"] == ad.application_preset().hash()

    def test_bundled_scene_listing(self, client):
        scenes = {s["name"]: s["targets"] for s in client.get("/scenes").json()}
        assert scenes == {"sparse": 10, "dense": 240, "flat": 30, "deep": 30}

    def test_scene_document_fetch(self, client):
        doc = client.get("/scenes/sparse").json()
        assert doc["version"] == 1
        assert len(doc["targets"]) == 10

    def test_unknown_scene_fetch(self, client):
        assert "error" in client.get("/scenes/volcano").json()


class TestSession:
    def test_hello_frame(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            hello = ws.receive_json()
            assert hello["type"] == "session"
            assert hello["scene"] == "sparse"
            assert hello["preset"] == "application"
            assert hello["technique"] == "RayCasting"
            assert hello["techniques"] == ["RayCasting", "StickyRay", "RayCursor"]
            assert hello["targets"] == 10

    def test_unknown_scene_rejected(self, client):
        with client.websocket_connect("/session?scene=volcano") as ws:
            reply = ws.receive_json()
            assert reply["type"] == "error"

    def test_pointer_update_produces_a_frame(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json(pointer_message())
            frame = ws.receive_json()
            assert frame["type"] == "frame"
            assert frame["frame"] == 1
            assert frame["technique"] == "RayCasting"
            assert set(frame["scores"]) == {"RayCasting", "StickyRay", "RayCursor"}
            assert "overall" in frame["scores"]["RayCasting"]
            assert "outlines" in frame["geometry"]
            assert "regions" in frame["geometry"]

    def test_sessions_are_deterministic(self, client):
        def play():
            with client.websocket_connect("/session?scene=dense") as ws:
                ws.receive_json()
                frames = []
                for k in range(3):
                    ws.send_json(pointer_message(0.01 * k, timestamp=k / 90))
                    frames.append(ws.receive_json())
                return frames
        assert play() == play()

    def test_malformed_message_does_not_kill_the_session(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_text("{not json")
            assert ws.receive_json()["type"] == "error"
            ws.send_json(pointer_message())
            assert ws.receive_json()["type"] == "frame"

    def test_wrong_protocol_version_rejected(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            msg = pointer_message()
            msg["v"] = 99
            ws.send_json(msg)
            reply = ws.receive_json()
            assert reply["type"] == "error"
            assert "version" in reply["message"]

    def test_unknown_message_type_rejected(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json({"v": service.PROTOCOL_VERSION, "type": "warp"})
            assert ws.receive_json()["type"] == "error"

    def test_invalid_pointer_payload_is_an_error_frame(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json(
                {"v": service.PROTOCOL_VERSION, "type": "pointer_update",
                 "position": [0, 1], "direction": [0, 0, 1]}
            )
            assert ws.receive_json()["type"] == "error"
            ws.send_json(pointer_message())
            assert ws.receive_json()["type"] == "frame"


class TestSessionCommands:
    def test_set_weights_acknowledged(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json(
                {"v": 1, "type": "set_weights",
                 "weights": {"speed": 1, "accuracy": 0, "comfort": 0,
                             "familiarity": 0}}
            )
            reply = ws.receive_json()
            assert reply["type"] == "ack"
            assert reply["weights"]["speed"] == 1.0

    def test_invalid_weights_rejected(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json(
                {"v": 1, "type": "set_weights",
                 "weights": {"speed": -1, "accuracy": 0, "comfort": 0,
                             "familiarity": 0}}
            )
            assert ws.receive_json()["type"] == "error"

    def test_set_preset_switches_technique_roster(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json({"v": 1, "type": "set_preset", "preset": "study"})
            reply = ws.receive_json()
            assert reply["type"] == "ack"
            assert reply["techniques"] == ["StickyRay", "RayCursor"]
            assert reply["technique"] == "StickyRay"

    def test_load_scene_resets_the_frame_counter(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json(pointer_message())
            assert ws.receive_json()["frame"] == 1
            ws.send_json({"v": 1, "type": "load_scene", "name": "flat"})
            reply = ws.receive_json()
            assert reply["type"] == "ack" and reply["targets"] == 30
            ws.send_json(pointer_message())
            assert ws.receive_json()["frame"] == 1

    def test_unknown_scene_load_rejected(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json({"v": 1, "type": "load_scene", "name": "volcano"})
            assert ws.receive_json()["type"] == "error"

    def test_sessions_are_isolated(self, client):
        with client.websocket_connect("/session?scene=sparse") as a:
            with client.websocket_connect("/session?scene=sparse") as b:
                ha, hb = a.receive_json(), b.receive_json()
                assert ha["session_id"] != hb["session_id"]
                a.send_json({"v": 1, "type": "set_preset", "preset": "study"})
                assert a.receive_json()["techniques"] == ["StickyRay", "RayCursor"]
                b.send_json(pointer_message())
                frame = b.receive_json()
                assert frame["technique"] == "RayCasting"
                assert set(frame["scores"]) == {
                    "RayCasting", "StickyRay", "RayCursor"
                }

    def test_reset_clears_session_state(self, client):
        with client.websocket_connect("/session?scene=sparse") as ws:
            ws.receive_json()
            ws.send_json(pointer_message())
            ws.receive_json()
            ws.send_json({"v": 1, "type": "reset"})
            assert ws.receive_json()["type"] == "ack"
            ws.send_json(pointer_message())
            assert ws.receive_json()["frame"] == 1
